"""Reference pre-processing baselines: Suppression and inverse-probability weighting."""

import logging

import numpy as np

from fairweight.errors import EmptyCell, SingleGroup
from fairweight.models import BaselinePlan, DatasetSchema, EncodedDataset, Variant

logger = logging.getLogger(__name__)


def suppression(ds: EncodedDataset, schema: DatasetSchema) -> EncodedDataset:
    """Drop every feature column derived from the sensitive column.

    The group vector ``a`` is kept for evaluation.
    """
    sensitive = schema.sensitive_column
    keep = [j for j, source in enumerate(ds.feature_sources) if source != sensitive]
    if len(keep) == ds.d:
        return ds
    logger.info("Suppression removed %d feature column(s) derived from '%s'", ds.d - len(keep), sensitive)
    return EncodedDataset(
        X=ds.X[:, keep],
        y=ds.y,
        a=ds.a,
        feature_names=[ds.feature_names[j] for j in keep],
        feature_sources=[ds.feature_sources[j] for j in keep],
        stats=ds.stats,
        dropped_rows=ds.dropped_rows,
    )


def suppression_plan(ds: EncodedDataset, schema: DatasetSchema) -> BaselinePlan:
    dropped = [name for name, src in zip(ds.feature_names, ds.feature_sources) if src == schema.sensitive_column]
    return BaselinePlan(kind=Variant.SUPPRESSION, weights=np.ones(ds.n), dropped_columns=dropped)


def ipw_s(ds: EncodedDataset) -> BaselinePlan:
    """w_i = 1 / P(A = a_i)."""
    p_a = {g: float(np.mean(ds.a == g)) for g in (0, 1)}
    for g, p in p_a.items():
        if p == 0:
            raise SingleGroup(f"No training samples with a={g}", stage="optimize")
    weights = np.array([1.0 / p_a[int(g)] for g in ds.a])
    return BaselinePlan(kind=Variant.IPW_S, weights=weights)


def ipw_sy(ds: EncodedDataset) -> BaselinePlan:
    """w_i = P(A = a_i) * P(Y = y_i) / P(A = a_i, Y = y_i), expected over observed."""
    p_a = {g: float(np.mean(ds.a == g)) for g in (0, 1)}
    p_y = {v: float(np.mean(ds.y == v)) for v in (0, 1)}
    ratio = {}
    for g in (0, 1):
        for v in (0, 1):
            joint = float(np.mean((ds.a == g) & (ds.y == v)))
            if joint == 0:
                raise EmptyCell(g, v)
            ratio[(g, v)] = p_a[g] * p_y[v] / joint
    weights = np.array([ratio[(int(g), int(v))] for g, v in zip(ds.a, ds.y)])
    return BaselinePlan(kind=Variant.IPW_SY, weights=weights)
