"""Experiment configuration: YAML defaults, an optional user file, CLI overrides.

Precedence is flags > file > defaults. Every layer is a nested dict with the
sections of ``config/experiment.yaml``; ``build_config`` turns the merged
document into an ExperimentConfig.
"""

import copy
import logging
from dataclasses import asdict
from enum import Enum
from pathlib import Path

import yaml

from fairweight.errors import ConfigError
from fairweight.models import (
    DiverseConfig,
    ExperimentConfig,
    ModelKind,
    SplitSpec,
    Stratify,
    TrainConfig,
    UniformConfig,
    UtilityMetric,
    Variant,
)

logger = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).resolve().parent.parent / "config" / "experiment.yaml"


def load_yaml(path: str | Path) -> dict:
    """Load a YAML or JSON document (JSON is a YAML subset)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file {path} not found")
    try:
        doc = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML/JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"Config file {path} must hold a mapping")
    return doc


def load_defaults() -> dict:
    if DEFAULTS_PATH.exists():
        return load_yaml(DEFAULTS_PATH)
    return {}


def deep_merge(base: dict, overlay: dict) -> dict:
    """Recursively overlay ``overlay`` on a copy of ``base``; None values in the overlay are skipped."""
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _enum(cls: type[Enum], value, field: str):
    try:
        return cls(value)
    except ValueError:
        options = ", ".join(m.value for m in cls)
        raise ConfigError(f"{field} must be one of {options}, got {value!r}") from None


def build_config(doc: dict) -> ExperimentConfig:
    exp = doc.get("experiment", {})
    train = doc.get("train", {})
    mlp = doc.get("mlp", {})
    uniform = doc.get("uniform", {})
    diverse = doc.get("diverse", {})
    split = doc.get("split", {})
    model = _enum(ModelKind, exp.get("model", "logistic"), "experiment.model")

    try:
        tcfg = TrainConfig(
            epochs=int(train.get("epochs", 100)),
            learning_rate=float(train.get("learning_rate", 0.1)),
            l2_strength=float(train.get("l2_strength", 1e-4)),
            tolerance=float(train.get("tolerance", 1e-8)),
            solver=str(train.get("solver", "newton")),
            hidden_sizes=tuple(int(h) for h in mlp.get("hidden_sizes", (64, 32))),
            head_refit=bool(mlp.get("head_refit", True)),
        )
        if model == ModelKind.MLP:
            tcfg = TrainConfig(
                epochs=int(mlp.get("epochs", tcfg.epochs)),
                learning_rate=float(mlp.get("learning_rate", tcfg.learning_rate)),
                l2_strength=tcfg.l2_strength,
                batch_size=mlp.get("batch_size"),
                tolerance=tcfg.tolerance,
                solver=tcfg.solver,
                hidden_sizes=tcfg.hidden_sizes,
                head_refit=tcfg.head_refit,
            )
        ucfg = UniformConfig(
            tau=float(uniform.get("tau", 0.05)),
            grid_points=int(uniform.get("grid_points", 21)),
            utility_metric=_enum(UtilityMetric, uniform.get("utility_metric", "acc"), "uniform.utility_metric"),
            fairness_metrics=tuple(uniform.get("fairness_metrics", ("dp", "fpr", "eodds", "err"))),
            epsilon_norm=float(uniform.get("epsilon_norm", 1e-8)),
            eval_split=str(uniform.get("eval_split", "train")),
            validation_fraction=float(uniform.get("validation_fraction", 0.2)),
        )
        dcfg = DiverseConfig(
            lambda_f=float(diverse.get("lambda_f", 0.8)),
            lambda_u=float(diverse.get("lambda_u", 0.0)),
            potential_scope=str(diverse.get("potential_scope", "diverse")),
        )
        spec = SplitSpec(
            test_fraction=float(split.get("test_fraction", 0.2)),
            stratify_on=_enum(Stratify, split.get("stratify_on", "label_sensitive"), "split.stratify_on"),
        )
        return ExperimentConfig(
            dataset=exp.get("dataset"),
            csv_path=exp.get("csv_path"),
            schema_path=exp.get("schema_path"),
            delimiter=str(exp.get("delimiter", ",")),
            model=model,
            train=tcfg,
            variant=_enum(Variant, exp.get("variant", "diverse"), "experiment.variant"),
            uniform=ucfg,
            diverse=dcfg,
            split=spec,
            damping=float(doc.get("influence", {}).get("damping", 1e-3)),
            output_dir=str(exp.get("output_dir", "runs/latest")),
            seed=int(exp.get("seed", 0)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid configuration value: {e}") from e


def load_experiment(config_file: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    doc = load_defaults()
    if config_file:
        doc = deep_merge(doc, load_yaml(config_file))
        logger.info("Loaded config overlay %s", config_file)
    if overrides:
        doc = deep_merge(doc, overrides)
    return build_config(doc)


def sweep_settings(config_file: str | Path | None = None, overrides: dict | None = None) -> dict:
    doc = load_defaults()
    if config_file:
        doc = deep_merge(doc, load_yaml(config_file))
    if overrides:
        doc = deep_merge(doc, overrides)
    return doc.get("sweep", {})


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-ready snapshot of a config, enums as their values."""
    return _plain(asdict(cfg))
