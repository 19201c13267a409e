"""

*** Config.py ***

Contains:
Loading, schema validation and merging of the JSON configuration files
(defaults < config file < command-line overrides)

Files:
    data/configs/*.json         shipped configurations
    data/schemas/*.schema.json  JSON-Schema of each file kind (simulation, experiment)

External dependencies:
jsonschema  -JSON Schema validation. https://python-jsonschema.readthedocs.io/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
13/09/2024    Workbench team    Initial release

"""
# Imports
import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from jsonschema import ValidationError, validate

from src.utils.errors import InvalidConfig

ROOT_DIR = Path(__file__).resolve().parents[2]
SCHEMA_DIR = ROOT_DIR / "data" / "schemas"
CONFIG_DIR = ROOT_DIR / "data" / "configs"


def load_schema(schema_name):
    with open(SCHEMA_DIR / f"{schema_name}.schema.json", "r", encoding="utf-8") as f:
        return json.load(f)


def validate_data(data, schema_name):
    try:
        validate(instance=data, schema=load_schema(schema_name))
    except ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise InvalidConfig(f"{schema_name} config invalid at {where}: {e.message}") from None
    return data


def load_json(path, schema_name=None):
    """Reads a JSON file, validated against data/schemas/<schema_name>.schema.json when given."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidConfig(f"cannot read config {path}: {e}") from None
    return validate_data(data, schema_name) if schema_name else data


def build(cls, data, section):
    """Instantiates a config dataclass, unknown keys reported as InvalidConfig."""
    try:
        return cls(**data)
    except TypeError as e:
        raise InvalidConfig(f"{section}: {e}") from None


def deep_merge(base, update):
    """Recursive dict merge; values of ``update`` win, None values are ignored."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class WorkbenchConfig:
    """Fully-resolved configuration, echoed into every manifest."""
    seed: int
    simulation: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    label: dict = field(default_factory=dict)
    forecaster: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    exp1: dict = field(default_factory=dict)
    exp2: dict = field(default_factory=dict)
    jobs: int = 1
    dataset: str = None

    def sim_config(self):
        from src.models.testcell import SimConfig
        return build(SimConfig, {**self.simulation, "seed": self.simulation.get("seed", self.seed)}, "simulation")

    def split_config(self):
        from src.utils.dataio import SplitConfig
        return build(SplitConfig, self.split, "split")

    def label_config(self):
        from src.utils.labeling import LabelConfig
        return build(LabelConfig, self.label, "label")

    def forecast_config(self):
        from src.models.forecaster import ForecastConfig
        return build(ForecastConfig, self.forecaster, "forecaster")

    def synth_kind(self):
        return self.synth.get("kind", "vq")

    def synth_config(self):
        kind = self.synth_kind()
        if kind == "vq":
            from src.models.vqsynth import VQConfig
            return build(VQConfig, self.synth.get("vq", {}), "synth.vq")
        from src.models.baselines import BaselineConfig
        return build(BaselineConfig, {**self.synth.get("baseline", {}), "kind": kind}, "synth.baseline")

    def exp1_config(self):
        from src.experiments.harness import Exp1Config
        return build(Exp1Config, self.exp1, "exp1")

    def exp2_config(self):
        from src.experiments.harness import Exp2Config
        return build(Exp2Config, self.exp2, "exp2")

    def to_dict(self):
        return {"seed": self.seed, "simulation": self.simulation, "split": self.split, "label": self.label,
                "forecaster": self.forecaster, "synth": self.synth, "exp1": self.exp1, "exp2": self.exp2,
                "jobs": self.jobs, "dataset": self.dataset}


def resolve_config(path=None, overrides=None, seed=None):
    """
    Builds a WorkbenchConfig from an optional experiment config file and overrides.

    Args:
        path (str | Path): JSON file validated against experiment.schema.json
        overrides (dict): nested values taking precedence over the file
        seed (int): default seed when neither the file nor the overrides set one
    """
    data = {}
    if path is not None:
        data = load_json(path, "experiment")
    data = deep_merge(data, overrides or {})
    if data.get("simulation"):
        validate_data(data["simulation"], "simulation")
    data.setdefault("seed", seed)
    if data["seed"] is None:
        from src.utils.seeding import default_seed
        data["seed"] = default_seed()
    known = set(WorkbenchConfig.__dataclass_fields__)
    unknown = set(data) - known - {"name", "description"}
    if unknown:
        raise InvalidConfig(f"unknown config section(s): {sorted(unknown)}")
    return WorkbenchConfig(**{k: v for k, v in data.items() if k in known})
