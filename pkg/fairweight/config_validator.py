"""Validate an experiment configuration before any stage runs."""

from pathlib import Path

from fairweight.errors import ConfigError
from fairweight.models import FAIRNESS_METRICS, ExperimentConfig, ModelKind, Variant
from fairweight.schemas import BUILTIN_SCHEMAS

DATA_DIR = Path("data")


def data_path(cfg: ExperimentConfig) -> Path:
    """CSV location: the explicit path, else ``data/<dataset>.csv`` for a built-in dataset."""
    if cfg.csv_path:
        return Path(cfg.csv_path)
    if cfg.dataset:
        return DATA_DIR / f"{cfg.dataset.lower()}.csv"
    raise ConfigError("Either --dataset or --csv is required")


def validate_ranges(cfg: ExperimentConfig) -> list[str]:
    """Return a fatal problem per out-of-range value."""
    errors = []
    u, dv, t = cfg.uniform, cfg.diverse, cfg.train

    if not 0.0 <= u.tau <= 1.0:
        errors.append(f"uniform.tau must be in [0, 1], got {u.tau!r}")
    if u.grid_points < 2:
        errors.append(f"uniform.grid_points must be >= 2, got {u.grid_points!r}")
    if u.epsilon_norm < 0:
        errors.append(f"uniform.epsilon_norm must be >= 0, got {u.epsilon_norm!r}")
    if u.eval_split not in ("train", "holdout"):
        errors.append(f"uniform.eval_split must be train or holdout, got {u.eval_split!r}")
    if not 0.0 < u.validation_fraction < 1.0:
        errors.append(f"uniform.validation_fraction must be in (0, 1), got {u.validation_fraction!r}")
    unknown = [m for m in u.fairness_metrics if m not in FAIRNESS_METRICS]
    if unknown or not u.fairness_metrics:
        errors.append(f"uniform.fairness_metrics must be a non-empty subset of {FAIRNESS_METRICS}, got {unknown}")

    for name, value in (("lambda_f", dv.lambda_f), ("lambda_u", dv.lambda_u)):
        if not 0.0 <= value <= 1.0:
            errors.append(f"diverse.{name} must be in [0, 1], got {value!r}")
    if dv.potential_scope not in ("diverse", "all"):
        errors.append(f"diverse.potential_scope must be diverse or all, got {dv.potential_scope!r}")

    if t.learning_rate <= 0:
        errors.append(f"train.learning_rate must be > 0, got {t.learning_rate!r}")
    if t.tolerance <= 0:
        errors.append(f"train.tolerance must be > 0, got {t.tolerance!r}")
    if t.l2_strength < 0:
        errors.append(f"train.l2_strength must be >= 0, got {t.l2_strength!r}")
    if t.epochs <= 0:
        errors.append(f"train.epochs must be > 0, got {t.epochs!r}")
    if t.solver not in ("newton", "gd"):
        errors.append(f"train.solver must be newton or gd, got {t.solver!r}")
    if t.batch_size is not None and t.batch_size <= 0:
        errors.append(f"mlp.batch_size must be > 0, got {t.batch_size!r}")

    if not 0.0 < cfg.split.test_fraction < 1.0:
        errors.append(f"split.test_fraction must be in (0, 1), got {cfg.split.test_fraction!r}")
    if cfg.damping < 0:
        errors.append(f"influence.damping must be >= 0, got {cfg.damping!r}")
    return errors


def validate_inputs(cfg: ExperimentConfig) -> list[str]:
    errors = []
    if cfg.dataset and not cfg.schema_path and cfg.dataset.lower() not in BUILTIN_SCHEMAS:
        errors.append(f"Unknown dataset '{cfg.dataset}' and no --schema given")
    if not cfg.dataset and not cfg.schema_path:
        errors.append("A custom CSV needs --schema")
    try:
        csv = data_path(cfg)
        if not csv.exists():
            errors.append(f"Data file {csv} not found")
    except ConfigError as e:
        errors.append(str(e))
    if cfg.schema_path and not Path(cfg.schema_path).exists():
        errors.append(f"Schema file {cfg.schema_path} not found")
    return errors


def validate_experiment(cfg: ExperimentConfig, check_files: bool = True) -> list[str]:
    """Validate a config.

    Returns soft warnings. Raises ConfigError listing every fatal problem.
    """
    fatal = validate_ranges(cfg)
    if check_files:
        fatal.extend(validate_inputs(cfg))
    if fatal:
        raise ConfigError("Invalid configuration:\n  - " + "\n  - ".join(fatal))

    warnings = []
    if cfg.damping == 0:
        warnings.append("influence.damping is 0; the Hessian may be singular")
    if cfg.variant == Variant.DIVERSE and cfg.diverse.lambda_f > 0 and cfg.diverse.lambda_u >= 1.0:
        warnings.append("diverse.lambda_u = 1 forces the full utility potential and is often infeasible")
    if cfg.variant == Variant.UNIFORM and cfg.uniform.grid_points > 101:
        warnings.append(f"uniform.grid_points={cfg.uniform.grid_points} retrains once per point")
    if cfg.model == ModelKind.MLP and not cfg.train.head_refit:
        warnings.append("mlp.head_refit is off; influence assumes the head is at a stationary point")
    return warnings


def validate_grid(values, name: str = "lambda_f_grid") -> list[float]:
    """Return the grid as floats in the given order; raise ConfigError on an empty grid,
    a value outside [0, 1] or a repeated value."""
    try:
        grid = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must hold numbers, got {values!r}") from None
    errors = []
    if not grid:
        errors.append(f"{name} is empty")
    bad = [v for v in grid if not 0.0 <= v <= 1.0]
    if bad:
        errors.append(f"{name} values must be in [0, 1], got {bad}")
    repeated = sorted({v for v in grid if grid.count(v) > 1})
    if repeated:
        errors.append(f"{name} repeats {repeated}; every grid point must be distinct")
    if errors:
        raise ConfigError("Invalid configuration:\n  - " + "\n  - ".join(errors))
    return grid
