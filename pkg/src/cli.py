"""

*** CLI.py ***

Contains:
Command-line entry point wiring the workbench into reproducible workflows

Subcommands:
    simulate, label, split, train-synth, sample, train-forecaster, exp1, exp2,
    diag-pca, diag-tsne, report

Exit codes:
    0   success
    1   workbench error (reported as "error: <ErrorName>: <message>")
    2   usage error

Every subcommand writes a JSON manifest echoing the resolved configuration next to
its output, and refuses to overwrite existing outputs without --force.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
15/09/2024    Workbench team    Initial release
28/09/2024    Workbench team    report subcommand, diagnostics on real + synthetic CSVs
14/10/2024    Workbench team    sample checks the dataset scaler before drawing

"""
# Imports
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from src.experiments import harness
from src.models import forecaster as fc
from src.models.synthesizer import SYNTH_KINDS, build_synth, load_synth, sample
from src.models.testcell import generate_rico_like
from src.utils import dataio, diagnostics
from src.utils.config import build, load_json, resolve_config
from src.utils.errors import CheckpointFormatError, OutputExists, WorkbenchError
from src.utils.labeling import class_histogram, label_records
from src.utils.seeding import derive_seed
from src.utils.seriestools import SERIES_LENGTH

logger = logging.getLogger("workbench")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


#_______Helpers_________#
def _check_output(path, force):
    path = Path(path)
    if path.exists() and not force:
        raise OutputExists(f"{path} already exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(path, command, cfg, payload=None):
    record = {"command": command, "config": cfg.to_dict(), "result": harness._json_safe(payload or {})}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def _resolve(args):
    overrides = {}
    if args.seed is not None:
        overrides = {"seed": args.seed, "simulation": {"seed": args.seed}}
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    overrides = harness_overrides(args, overrides)
    return resolve_config(args.config, overrides)


def harness_overrides(args, overrides):
    """Subcommand flags mapped onto config sections."""
    mapping = {
        "runs": ("exp1" if args.command == "exp1" else "exp2", "runs"),
        "synth_n": ("exp1", "synth_n"),
        "ratios": ("exp2", "ratios"),
        "fraction": ("split", "fraction"),
        "rounding": ("split", "rounding"),
        "eps_slope": ("label", "eps_slope"),
        "eps_net": ("label", "eps_net"),
        "epochs": ("forecaster", "epochs"),
    }
    for attr, (section, key) in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    if getattr(args, "chronological", False):
        overrides.setdefault("split", {})["shuffle"] = False
    if getattr(args, "synth_kind", None):
        overrides.setdefault("synth", {})["kind"] = args.synth_kind
    if getattr(args, "dataset", None):
        overrides["dataset"] = str(args.dataset)
    return overrides


def _load_records(cfg, path=None, labeled=True):
    path = path or cfg.dataset
    if path:
        records = dataio.ingest_csv(path)
    else:
        logger.info("No dataset given, simulating the test cell")
        records = generate_rico_like(cfg.sim_config())
    if labeled and any(r.label is None for r in records):
        records = label_records(records, cfg.label_config())
    return records


def _split(cfg, records):
    split_cfg = cfg.split_config()
    return dataio.split_by_phase(records, split_cfg.fraction, derive_seed(cfg.seed, "split"),
                                 split_cfg.shuffle, split_cfg.rounding)


def _fit_synth(cfg, split):
    synth = build_synth(cfg.synth_kind(), cfg.synth_config())
    labels = [r.label for r in split.train]
    labels = None if any(c is None for c in labels) else labels
    synth.fit(split.scaler.apply(dataio.values_matrix(split.train)), labels, seed=derive_seed(cfg.seed, "synth"))
    return synth


#_______Subcommands_________#
def cmd_simulate(args, cfg):
    out = _check_output(args.out, args.force)
    sim_cfg = cfg.sim_config()
    if args.sim_config:
        sim_cfg = build(type(sim_cfg), {**load_json(args.sim_config, "simulation"), "seed": sim_cfg.seed}, "simulation")
    records = generate_rico_like(sim_cfg)
    dataio.write_csv(records, out)
    _write_manifest(_sidecar(out), "simulate", cfg, {"simulation": sim_cfg.to_dict(), "n_series": len(records),
                                                     "n_included": len(dataio.included(records))})


def cmd_label(args, cfg):
    out = _check_output(args.out, args.force)
    records = label_records(dataio.ingest_csv(args.data), cfg.label_config())
    dataio.write_csv(records, out)
    _write_manifest(_sidecar(out), "label", cfg, {"class_histogram": class_histogram(dataio.included(records))})


def cmd_split(args, cfg):
    out_dir = harness.prepare_output_dir(args.out_dir, args.force)
    split = _split(cfg, _load_records(cfg, args.data, labeled=False))
    dataio.write_csv(list(split.train), out_dir / "train.csv")
    dataio.write_csv(list(split.test), out_dir / "test.csv")
    dataio.write_split_manifest(split, out_dir / "split.json")
    _write_manifest(out_dir / "manifest.json", "split", cfg, {"per_phase": split.per_phase_counts(),
                                                              "n_train": len(split.train), "n_test": len(split.test)})


def cmd_train_synth(args, cfg):
    out = _check_output(args.out, args.force)
    split = _split(cfg, _load_records(cfg, args.data))
    synth = _fit_synth(cfg, split)
    synth.save(out, scaler=split.scaler.to_dict())
    _write_manifest(_sidecar(out), "train-synth", cfg, {"kind": synth.kind, "n_train": len(split.train),
                                                        "class_histogram": class_histogram(split.train),
                                                        "report": getattr(synth, "report", {})})


def cmd_sample(args, cfg):
    out = _check_output(args.out, args.force)
    synth = load_synth(args.model)
    if synth.scaler is None:
        raise CheckpointFormatError("checkpoint carries no dataset scaler, cannot export in °C")
    series = sample(synth, args.n, args.cls, derive_seed(cfg.seed, "sample"))
    values = dataio.StandardScaler.from_dict(synth.scaler).invert(series)
    records = [dataio.SeriesRecord(phase=0, step=k, flag=1, setpoints=(np.nan,) * 4, values=v, label=args.cls)
               for k, v in enumerate(values)]
    dataio.write_csv(records, out)
    _write_manifest(_sidecar(out), "sample", cfg, {"model": str(args.model), "n": args.n, "class": args.cls})


def cmd_train_forecaster(args, cfg):
    out = _check_output(args.out, args.force)
    split = _split(cfg, _load_records(cfg, args.data, labeled=False))
    fcfg = cfg.forecast_config()
    train, test = fc.make_windows(split, fcfg)
    model, report = fc.train_forecaster(train, fcfg, derive_seed(cfg.seed, "forecaster"))
    fc.save_forecaster(model, out)
    if args.report:
        report.write_csv(_check_output(args.report, args.force))
    metrics = fc.evaluate_forecaster(model, test)
    logger.info(f"Test metrics: {metrics.to_dict()}")
    _write_manifest(_sidecar(out), "train-forecaster", cfg, {"metrics": metrics.to_dict(),
                                                             "selected_epoch": report.selected_epoch,
                                                             "epochs_run": len(report.train_loss)})


def cmd_exp1(args, cfg):
    out_dir = harness.prepare_output_dir(args.out_dir, args.force)
    exp_cfg = cfg.exp1_config()
    split = _split(cfg, _load_records(cfg))
    synth = _fit_synth(cfg, split)
    manifest = harness.run_exp1(split, synth, exp_cfg.runs, exp_cfg.synth_n, cfg.seed, cfg.forecast_config(),
                                cfg.jobs, exp_cfg.strategies)
    manifest.config["resolved"] = cfg.to_dict()
    harness.write_outputs(manifest, out_dir, force=True)


def cmd_exp2(args, cfg):
    out_dir = harness.prepare_output_dir(args.out_dir, args.force)
    exp_cfg = cfg.exp2_config()
    split = _split(cfg, _load_records(cfg))
    kind, synth_cfg = cfg.synth_kind(), cfg.synth_config()
    manifest = harness.run_exp2(split, exp_cfg.ratios, exp_cfg.runs, cfg.seed,
                                lambda i, r: build_synth(kind, synth_cfg), cfg.forecast_config(), cfg.jobs,
                                exp_cfg.classes)
    manifest.config["resolved"] = cfg.to_dict()
    harness.write_outputs(manifest, out_dir, force=True)


def _real_and_synthetic(args):
    real = dataio.values_matrix(dataio.included(dataio.ingest_csv(args.real)))
    synthetic = dataio.values_matrix(dataio.ingest_csv(args.synthetic)) if args.synthetic else np.zeros((0, SERIES_LENGTH))
    sources = ["real"] * len(real) + ["synthetic"] * len(synthetic)
    return np.concatenate([real, synthetic]), sources


def cmd_diag_pca(args, cfg):
    out = _check_output(args.out, args.force)
    X, sources = _real_and_synthetic(args)
    coords, _, eigenvalues = diagnostics.pca_project(X, args.k)
    diagnostics.write_coordinates(coords, sources, out)
    _write_manifest(_sidecar(out), "diag-pca", cfg, {"k": args.k, "eigenvalues": eigenvalues[:args.k].tolist()})


def cmd_diag_tsne(args, cfg):
    out = _check_output(args.out, args.force)
    X, sources = _real_and_synthetic(args)
    coords = diagnostics.tsne_embed(X, args.perplexity, args.iters, derive_seed(cfg.seed, "tsne"))
    diagnostics.write_coordinates(coords, sources, out)
    _write_manifest(_sidecar(out), "diag-tsne", cfg, {"perplexity": args.perplexity, "iters": args.iters})


def cmd_report(args, cfg):
    summary = harness.report_from_rows(args.rows, args.out_dir, args.force, args.trim)
    print(summary.to_string(index=False))


COMMANDS = {
    "simulate": cmd_simulate, "label": cmd_label, "split": cmd_split, "train-synth": cmd_train_synth,
    "sample": cmd_sample, "train-forecaster": cmd_train_forecaster, "exp1": cmd_exp1, "exp2": cmd_exp2,
    "diag-pca": cmd_diag_pca, "diag-tsne": cmd_diag_tsne, "report": cmd_report,
}


#_______Parser_________#
def _ratios(text):
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Base seed (default: $WORKBENCH_SEED or 2024)")
    common.add_argument("--config", type=Path, default=None, help="Experiment JSON config")
    common.add_argument("--force", action="store_true", help="Overwrite existing outputs")
    common.add_argument("--jobs", type=int, default=None, help="Worker processes for exp1/exp2")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="workbench", description="Building-thermal synthetic augmentation workbench")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Simulate a RICO-like dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--sim-config", type=Path, default=None, help="Simulation JSON config")

    p = sub.add_parser("label", parents=[common], help="Label series with their trend class")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--eps-slope", type=float, default=None)
    p.add_argument("--eps-net", type=float, default=None)

    p = sub.add_parser("split", parents=[common], help="Per-phase train/test split")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--rounding", choices=["ceil", "half_up"], default=None)
    p.add_argument("--chronological", action="store_true", help="Test = last steps of each phase")

    p = sub.add_parser("train-synth", parents=[common], help="Fit a synthesizer on the train split")
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--synth-kind", choices=SYNTH_KINDS, default=None)

    p = sub.add_parser("sample", parents=[common], help="Sample series from a synthesizer checkpoint")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--class", dest="cls", type=int, choices=[0, 1, 2], default=None)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("train-forecaster", parents=[common], help="Train and evaluate one forecaster")
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--report", type=Path, default=None, help="TrainReport CSV")
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("exp1", parents=[common], help="TRTR / TSTR / TRSTR experiment")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--dataset", type=Path, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--synth-n", type=int, default=None)
    p.add_argument("--synth-kind", choices=SYNTH_KINDS, default=None)
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("exp2", parents=[common], help="Class-imbalance ablation experiment")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--dataset", type=Path, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--ratios", type=_ratios, default=None, help="Comma-separated, e.g. 0.25,0.5,0.75,1.0")
    p.add_argument("--synth-kind", choices=SYNTH_KINDS, default=None)
    p.add_argument("--epochs", type=int, default=None)

    for name, help_text in (("diag-pca", "PCA coordinates of real + synthetic series"),
                            ("diag-tsne", "t-SNE coordinates of real + synthetic series")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--real", required=True, type=Path)
        p.add_argument("--synthetic", type=Path, default=None)
        p.add_argument("--out", required=True, type=Path)
        if name == "diag-pca":
            p.add_argument("--k", type=int, default=2)
        else:
            p.add_argument("--perplexity", type=float, default=30.0)
            p.add_argument("--iters", type=int, default=1000)

    p = sub.add_parser("report", parents=[common], help="Aggregates and histograms from a rows.csv")
    p.add_argument("--rows", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--trim", type=float, default=0.05, help="Outlier fraction removed from histograms")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, force=True)
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](args, cfg)
    except WorkbenchError as err:
        logger.error(f"{args.command} failed: {type(err).__name__}: {err}")
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    return 0


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
