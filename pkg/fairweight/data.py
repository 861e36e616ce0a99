"""Tabular ingestion: CSV parsing, encoding, splitting and group partitioning."""

import csv
import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import OneHotEncoder, StandardScaler

from fairweight.errors import (
    ConfigError,
    DegenerateSplit,
    NonNumericCell,
    RaggedRow,
    SchemaMismatch,
    SingleGroup,
    UnknownColumn,
)
from fairweight.models import (
    ColumnKind,
    DatasetSchema,
    EncodedDataset,
    EncodingStats,
    GroupPartition,
    RawTable,
    SplitSpec,
    Stratify,
)

logger = logging.getLogger(__name__)

MISSING_MARKERS = frozenset({"", "?", "NA", "N/A", "NaN", "nan", "null"})


def parse_csv(
    path: str | Path,
    delimiter: str = ",",
    required: Iterable[str] | None = None,
) -> RawTable:
    """Read a headed CSV into verbatim string cells.

    When ``required`` names columns, rows with a missing cell in any of them
    are dropped and counted.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path} is empty, a header row is required") from None
        if len(set(header)) != len(header):
            raise ConfigError(f"{path}: duplicate column names in header")

        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(reader.line_num, len(header), len(row))
            rows.append(row)

    table = RawTable(header=header, rows=rows)
    if required is not None:
        table = drop_missing(table, required)
    logger.info("Parsed %s: %d rows, %d columns", path.name, len(table.rows), len(header))
    return table


def drop_missing(table: RawTable, columns: Iterable[str]) -> RawTable:
    positions = []
    for name in columns:
        if name not in table.header:
            raise UnknownColumn(name)
        positions.append(table.header.index(name))

    kept = [row for row in table.rows if all(row[p].strip() not in MISSING_MARKERS for p in positions)]
    dropped = len(table.rows) - len(kept)
    if dropped:
        logger.warning("Dropped %d rows with missing values in used columns", dropped)
    return RawTable(header=table.header, rows=kept, dropped_rows=table.dropped_rows + dropped)


def _frame(table: RawTable, schema: DatasetSchema) -> pd.DataFrame:
    for name in schema.used_columns:
        if name not in table.header:
            raise UnknownColumn(name)
    df = pd.DataFrame(table.rows, columns=table.header, dtype=str)
    return df[schema.used_columns].apply(lambda s: s.str.strip())


def _numeric(df: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(df[column], errors="coerce")
    bad = values.isna() | ~np.isfinite(values.fillna(0.0))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise NonNumericCell(column, row, df[column].iloc[row])
    return values.to_numpy(dtype=float)


def _sensitive(df: pd.DataFrame, schema: DatasetSchema) -> np.ndarray:
    column = schema.sensitive_column
    if schema.sensitive_threshold is not None:
        return (_numeric(df, column) > schema.sensitive_threshold).astype(int)
    return (df[column] == schema.privileged_value).to_numpy().astype(int)


def fit_encoding(table: RawTable, schema: DatasetSchema) -> EncodingStats:
    """Fit one StandardScaler per numeric column and one OneHotEncoder per categorical column.

    Categories keep their order of first appearance; unseen categories encode
    as all zeros.
    """
    table = drop_missing(table, schema.used_columns)
    df = _frame(table, schema)
    stats = EncodingStats()

    if schema.favorable_label not in set(df[schema.label_column]):
        raise SchemaMismatch(f"favorable_label {schema.favorable_label!r} does not occur in '{schema.label_column}'")
    if schema.sensitive_threshold is None and schema.privileged_value not in set(df[schema.sensitive_column]):
        raise SchemaMismatch(
            f"privileged_value {schema.privileged_value!r} does not occur in '{schema.sensitive_column}'"
        )

    for spec in schema.feature_columns:
        if spec.kind == ColumnKind.NUMERIC:
            scaler = StandardScaler().fit(_numeric(df, spec.name).reshape(-1, 1))
            if scaler.var_[0] == 0.0:
                logger.warning("Constant column '%s' dropped", spec.name)
                stats.dropped_columns.append(spec.name)
                continue
            stats.scalers[spec.name] = scaler
            stats.means[spec.name] = float(scaler.mean_[0])
            stats.stds[spec.name] = float(scaler.scale_[0])
        else:
            categories = [str(c) for c in pd.unique(df[spec.name])]
            if len(categories) < 2:
                logger.warning("Constant column '%s' dropped", spec.name)
                stats.dropped_columns.append(spec.name)
                continue
            stats.categories[spec.name] = categories
            stats.encoders[spec.name] = OneHotEncoder(
                categories=[categories], handle_unknown="ignore", sparse_output=False
            ).fit(df[[spec.name]].to_numpy(dtype=object))
    return stats


def transform(table: RawTable, schema: DatasetSchema, stats: EncodingStats) -> EncodedDataset:
    """Encode a table with statistics fitted elsewhere (e.g. on the training split)."""
    table = drop_missing(table, schema.used_columns)
    df = _frame(table, schema)
    a = _sensitive(df, schema)
    y = (df[schema.label_column] == schema.favorable_label).to_numpy().astype(int)

    blocks: list[np.ndarray] = []
    names: list[str] = []
    sources: list[str] = []
    for spec in schema.columns:
        if spec.name == schema.sensitive_column and schema.sensitive_as_feature:
            blocks.append(a.astype(float).reshape(-1, 1))
            names.append(f"{spec.name}=privileged")
            sources.append(spec.name)
            continue
        if spec not in schema.feature_columns or spec.name in stats.dropped_columns:
            continue
        if spec.kind == ColumnKind.NUMERIC:
            blocks.append(stats.scalers[spec.name].transform(_numeric(df, spec.name).reshape(-1, 1)))
            names.append(spec.name)
            sources.append(spec.name)
        else:
            onehot = stats.encoders[spec.name].transform(df[[spec.name]].to_numpy(dtype=object))
            unseen = int(np.sum(onehot.sum(axis=1) == 0))
            if unseen:
                logger.warning("Column '%s': %d rows with unseen categories", spec.name, unseen)
            blocks.append(onehot)
            names.extend(f"{spec.name}={cat}" for cat in stats.categories[spec.name])
            sources.extend(spec.name for _ in stats.categories[spec.name])

    if not blocks:
        raise ConfigError("Encoding produced no feature columns")
    X = np.hstack(blocks)
    return EncodedDataset(
        X=X, y=y, a=a, feature_names=names, feature_sources=sources, stats=stats, dropped_rows=table.dropped_rows
    )


def encode(table: RawTable, schema: DatasetSchema) -> EncodedDataset:
    """Encode a table using statistics of the table itself."""
    return transform(table, schema, fit_encoding(table, schema))


# ── Splitting ───────────────────────────────────────────────────


def _strata(y: np.ndarray, a: np.ndarray, how: Stratify) -> list[np.ndarray]:
    n = len(y)
    if how == Stratify.NONE:
        return [np.arange(n)]
    if how == Stratify.LABEL:
        return [np.flatnonzero(y == v) for v in (0, 1)]
    return [np.flatnonzero((y == yv) & (a == av)) for yv in (0, 1) for av in (0, 1)]


def split_indices(y: np.ndarray, a: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Each stratum sends floor(size * test_fraction + 0.5) of its rows to the test side."""
    if not 0.0 < spec.test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {spec.test_fraction}")
    random_state = np.random.RandomState(spec.seed)
    test_parts = []
    for stratum in _strata(y, a, spec.stratify_on):
        n_test = math.floor(len(stratum) * spec.test_fraction + 0.5)
        if n_test == 0:
            continue
        if n_test == len(stratum):
            test_parts.append(stratum)
            continue
        _, test_part = train_test_split(stratum, test_size=n_test, random_state=random_state)
        test_parts.append(test_part)

    test_idx = np.sort(np.concatenate(test_parts)) if test_parts else np.array([], dtype=int)
    mask = np.ones(len(y), dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)

    for side, idx in (("train", train_idx), ("test", test_idx)):
        if len(np.unique(a[idx])) < 2 or len(np.unique(y[idx])) < 2:
            raise DegenerateSplit(f"{side} split lacks a group or a label ({len(idx)} samples)", stage="ingest")
    return train_idx, test_idx


def split(ds: EncodedDataset, spec: SplitSpec) -> tuple[EncodedDataset, EncodedDataset]:
    train_idx, test_idx = split_indices(ds.y, ds.a, spec)
    return ds.subset(train_idx), ds.subset(test_idx)


def subset_table(table: RawTable, idx: np.ndarray) -> RawTable:
    return RawTable(header=table.header, rows=[table.rows[i] for i in idx], dropped_rows=table.dropped_rows)


def prepare_splits(
    table: RawTable, schema: DatasetSchema, spec: SplitSpec
) -> tuple[EncodedDataset, EncodedDataset]:
    """Split raw rows, then encode both sides with training-split statistics."""
    table = drop_missing(table, schema.used_columns)
    full = encode(table, schema)
    train_idx, test_idx = split_indices(full.y, full.a, spec)
    train_table = subset_table(table, train_idx)
    stats = fit_encoding(train_table, schema)
    train = transform(train_table, schema, stats)
    test = transform(subset_table(table, test_idx), schema, stats)
    logger.info("Split %d rows into %d train / %d test (d=%d)", full.n, train.n, test.n, train.d)
    return train, test


def partition_groups(ds: EncodedDataset) -> GroupPartition:
    idx_0 = np.flatnonzero(ds.a == 0)
    idx_1 = np.flatnonzero(ds.a == 1)
    if len(idx_0) == 0 or len(idx_1) == 0:
        raise SingleGroup("Both sensitive groups must be present", stage="influence")
    return GroupPartition(idx_0=idx_0, idx_1=idx_1)


def encoded_rows(ds: EncodedDataset) -> tuple[list[str], list[list[str]]]:
    """Flatten an encoded dataset to CSV header and rows (17 significant digits)."""
    header = list(ds.feature_names) + ["a", "y"]
    rows = [[f"{v:.17g}" for v in ds.X[i]] + [str(int(ds.a[i])), str(int(ds.y[i]))] for i in range(ds.n)]
    return header, rows
