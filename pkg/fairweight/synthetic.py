"""Synthetic biased binary-classification task.

True labels are balanced; features are two Gaussian clusters around
+/- (0.5 / sqrt(d)) * 1 with identity covariance. The group bit is an
independent fair coin and is also a feature. Label bias: round(beta * m) of
the m positives in group 0 have their observed label flipped to 0. Which
ones is drawn without replacement, favouring positives close to the class
boundary, so the corrupted labels look like a stricter threshold applied to
group 0 rather than uniform noise. Features are drawn before any flip, so X
is identical across beta for a fixed seed.
"""

import logging
from pathlib import Path

import numpy as np
from scipy.special import expit

from fairweight.artifacts import fmt, locked_write_csv, locked_write_json
from fairweight.errors import ConfigError
from fairweight.models import ColumnKind, ColumnRole, ColumnSpec, DatasetSchema, EncodedDataset

logger = logging.getLogger(__name__)

CLUSTER_OFFSET = 0.5
FLIP_SHARPNESS = 5.0
GROUP_COLUMN = "group"
LABEL_COLUMN = "label"


def generate_synthetic(beta: float, n: int, d: int, seed: int = 0) -> EncodedDataset:
    if n < 20 or d < 2:
        raise ConfigError(f"Synthetic task needs n >= 20 and d >= 2, got n={n}, d={d}")
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {beta}")

    rng = np.random.default_rng(seed)
    y_true = rng.integers(0, 2, size=n)
    a = rng.integers(0, 2, size=n)
    centre = CLUSTER_OFFSET / np.sqrt(d)
    x = rng.standard_normal((n, d)) + np.where(y_true == 1, centre, -centre)[:, None]

    y = y_true.copy()
    candidates = np.flatnonzero((y_true == 1) & (a == 0))
    k = int(round(beta * len(candidates)))
    if k == len(candidates):
        flipped = candidates
    else:
        score = x[candidates].sum(axis=1) / np.sqrt(d)
        odds = expit(-FLIP_SHARPNESS * score)
        flipped = rng.choice(candidates, size=k, replace=False, p=odds / odds.sum())
    y[flipped] = 0
    logger.info("Synthetic task: n=%d d=%d beta=%.2f, %d labels flipped", n, d, beta, k)

    names = [f"x{j}" for j in range(d)]
    return EncodedDataset(
        X=np.column_stack([x, a]),
        y=y,
        a=a,
        feature_names=names + [f"{GROUP_COLUMN}=privileged"],
        feature_sources=names + [GROUP_COLUMN],
    )


def synthetic_schema(d: int) -> DatasetSchema:
    columns = [ColumnSpec(f"x{j}", ColumnRole.FEATURE, ColumnKind.NUMERIC) for j in range(d)]
    columns.append(ColumnSpec(GROUP_COLUMN, ColumnRole.SENSITIVE, ColumnKind.CATEGORICAL))
    columns.append(ColumnSpec(LABEL_COLUMN, ColumnRole.LABEL, ColumnKind.CATEGORICAL))
    return DatasetSchema(columns=columns, favorable_label="1", privileged_value="1", name="synthetic")


def schema_path_for(csv_path: str | Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".schema.json")


def write_synthetic(ds: EncodedDataset, path: str | Path) -> Path:
    """Write raw columns x0..x{d-1}, group, label plus the matching schema JSON.

    Returns the schema path.
    """
    d = ds.d - 1
    header = [f"x{j}" for j in range(d)] + [GROUP_COLUMN, LABEL_COLUMN]
    rows = [[fmt(v) for v in ds.X[i, :d]] + [str(int(ds.a[i])), str(int(ds.y[i]))] for i in range(ds.n)]
    locked_write_csv(path, header, rows)
    schema_path = schema_path_for(path)
    locked_write_json(schema_path, synthetic_schema(d).to_dict())
    logger.info("Synthetic data written to %s (schema %s)", path, schema_path)
    return schema_path
