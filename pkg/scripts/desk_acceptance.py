"""

*** desk_acceptance.py ***

Acceptance runs too heavy for the unit suite, at desk scale on simulated data:
    split       116 / 31 split of the default 147-series plan
    memorize    VQ autoencoder reconstruction of a single-series corpus (MSE < 1e-3)
    fidelity    class-conditioned samples keep their class (rate >= 0.7, 500 per class)
    exp1        TRSTR mean test MAE below TRTR in >= 4 of 5 harness seeds
    exp2        12 synthesizers, restored class counts, arms neutral at r = 1.0
    determinism exp1 manifests byte-identical across two executions

Usage:
    python scripts/desk_acceptance.py [check ...] [--seed N] [--jobs N]

"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.experiments import harness  # noqa: E402
from src.models.synthesizer import build_synth, sample  # noqa: E402
from src.models.testcell import SimConfig, generate_rico_like  # noqa: E402
from src.models.vqsynth import VQConfig, VQSynth, train_vqvae  # noqa: E402
from src.utils.dataio import split_by_phase, values_matrix  # noqa: E402
from src.utils.labeling import TrendClass, label_records, label_values  # noqa: E402
from src.utils.seeding import derive_seed, numpy_rng  # noqa: E402

logger = logging.getLogger("desk_acceptance")


def labeled_split(seed, n_train=None):
    records = label_records(generate_rico_like(SimConfig(seed=seed)))
    split = split_by_phase(records, seed=derive_seed(seed, "split"))
    if n_train is not None:
        pick = numpy_rng(derive_seed(seed, "subset")).choice(len(split.train), size=n_train, replace=False)
        split = split.with_train([split.train[i] for i in sorted(pick)])
    return split


def check_split(args):
    split = split_by_phase(generate_rico_like(SimConfig(seed=args.seed)), seed=args.seed)
    return len(split.train) == 116 and len(split.test) == 31, f"{len(split.train)} train / {len(split.test)} test"


def check_memorize(args):
    split = labeled_split(args.seed)
    series = split.scaler.apply(values_matrix(split.train[:1]))
    model = train_vqvae(np.repeat(series, 8, axis=0), VQConfig(), seed=args.seed)
    mse = model.reconstruction_mse(series)
    return mse < 1e-3, f"reconstruction MSE {mse:.2e}"


def check_fidelity(args):
    split = labeled_split(args.seed)
    labels = [r.label for r in split.train]
    missing = [int(c) for c in TrendClass if int(c) not in labels]
    if missing:
        return False, f"classes {missing} absent from the training split"
    model = VQSynth(VQConfig())
    model.fit(split.scaler.apply(values_matrix(split.train)), labels, seed=args.seed)
    rates = {}
    for c in TrendClass:
        samples = split.scaler.invert(sample(model, 500, c, derive_seed(args.seed, "fidelity", int(c))))
        rates[int(c)] = float(np.mean([label_values(s) == c for s in samples]))
    return all(rate >= 0.7 for rate in rates.values()), f"per-class agreement {rates}"


def _mean_mae(manifest, arm):
    return next(a["mean"] for a in manifest.aggregates if a["arm"] == arm and a["metric"] == "mae")


def check_exp1(args):
    wins = 0
    for k in range(5):
        seed = derive_seed(args.seed, "exp1-desk", k)
        split = labeled_split(seed, n_train=30)
        synth = build_synth("vq")
        synth.fit(split.scaler.apply(values_matrix(split.train)), [r.label for r in split.train], seed=seed)
        manifest = harness.run_exp1(split, synth, runs=20, synth_n=64, seed=seed, jobs=args.jobs)
        trtr, trstr = _mean_mae(manifest, "trtr"), _mean_mae(manifest, "trstr")
        logger.info(f"seed {k}: TRTR {trtr:.5f}, TRSTR {trstr:.5f}")
        wins += trstr < trtr
    return wins >= 4, f"TRSTR < TRTR in {wins}/5 seeds"


def check_exp2(args):
    split = labeled_split(args.seed)
    manifest = harness.run_exp2(split, runs=10, seed=args.seed, jobs=args.jobs)
    restored = all(s["augmented_histogram"] == manifest.extra["train_histogram"] for s in manifest.extra["scenarios"])
    neutral = True
    for c in (0, 1, 2):
        rows = [r for r in manifest.rows if r["class_index"] == c and r["ratio"] == 1.0 and r["status"] == "ok"]
        base = [r["mae"] for r in rows if r["arm"] == "baseline"]
        aug = [r["mae"] for r in rows if r["arm"] == "augmented"]
        pooled = math.sqrt(np.var(base, ddof=1) / len(base) + np.var(aug, ddof=1) / len(aug))
        neutral &= abs(np.mean(base) - np.mean(aug)) <= 2.0 * pooled
    ok = manifest.extra["n_synthesizers"] == 12 and restored and neutral
    return ok, f"{manifest.extra['n_synthesizers']} synthesizers, counts restored {restored}, neutral at r=1 {neutral}"


def check_determinism(args):
    texts = []
    for _ in range(2):
        split = labeled_split(args.seed, n_train=30)
        synth = build_synth("bootstrap")
        synth.fit(split.scaler.apply(values_matrix(split.train)), seed=args.seed)
        manifest = harness.run_exp1(split, synth, runs=3, synth_n=16, seed=args.seed)
        texts.append(json.dumps(manifest.to_dict(), sort_keys=True))
    return texts[0] == texts[1], "manifests identical" if texts[0] == texts[1] else "manifests differ"


CHECKS = {"split": check_split, "memorize": check_memorize, "fidelity": check_fidelity,
          "exp1": check_exp1, "exp2": check_exp2, "determinism": check_determinism}


def main(argv=None):
    parser = argparse.ArgumentParser(description="Desk-scale acceptance runs")
    parser.add_argument("checks", nargs="*", choices=list(CHECKS) + [[]], default=list(CHECKS))
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    failed = 0
    for name in args.checks or list(CHECKS):
        ok, detail = CHECKS[name](args)
        print(f"{'✅' if ok else '❌'} {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
