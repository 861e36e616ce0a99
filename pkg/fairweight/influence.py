"""Group-oriented influence of training samples.

For a model trained with uniform weights, the influence of sample z on the
total loss of group a is

    I_a(z) = grad l(z)^T  H^-1  grad R_a,    grad R_a = sum_{j in a} grad l(z_j)

with H the damped Hessian of the training objective over the head
parameters. I_a(z) > 0 means removing z raises group a's loss.
"""

import logging
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from fairweight.artifacts import fmt, locked_write_csv
from fairweight.classifier import hessian, per_sample_gradient, per_sample_gradients
from fairweight.errors import DimensionMismatch, NoConvergence, NotPositiveDefinite
from fairweight.models import EncodedDataset, GroupPartition, HessianHandle, Ihvp, InfluenceRecord, ModelParams, Sample

logger = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 2000
IHVP_TOLERANCE = 1e-8


def group_gradient_sums(
    m: ModelParams, ds: EncodedDataset, part: GroupPartition
) -> tuple[np.ndarray, np.ndarray]:
    """Summed per-sample head gradients of each group, in ascending index order."""
    G = per_sample_gradients(m, ds.X, ds.y)
    idx_0 = np.sort(np.asarray(part.idx_0, dtype=int))
    idx_1 = np.sort(np.asarray(part.idx_1, dtype=int))
    return G[idx_0].sum(axis=0), G[idx_1].sum(axis=0)


def _residual(H: np.ndarray, v: np.ndarray, g: np.ndarray) -> float:
    return float(np.linalg.norm(H @ v - g))


def _curvature_checked(H: np.ndarray) -> LinearOperator:
    """H as a LinearOperator that refuses a search direction with p^T H p <= 0."""

    def matvec(p: np.ndarray) -> np.ndarray:
        p = np.ravel(p)
        Hp = H @ p
        if np.any(p) and float(p @ Hp) <= 0:
            raise NotPositiveDefinite("Non-positive curvature met during conjugate gradient", stage="influence")
        return Hp

    return LinearOperator(H.shape, matvec=matvec, dtype=float)


def conjugate_gradient(H: np.ndarray, g: np.ndarray, tol: float, max_iter: int | None = None) -> np.ndarray:
    """Solve H v = g for symmetric positive definite H to an absolute residual of tol."""
    v, info = cg(_curvature_checked(H), g, rtol=0.0, atol=tol, maxiter=max_iter or 10 * len(g))
    if info > 0:
        logger.warning("Conjugate gradient stopped after %d iterations", info)
    return v


def solve_ihvp(H: HessianHandle, g: np.ndarray, tol: float = IHVP_TOLERANCE) -> np.ndarray:
    """Return v with ||H v - g|| <= tol * max(1, ||g||).

    Cholesky for k up to DIRECT_SOLVE_LIMIT, conjugate gradient above.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (H.k,):
        raise DimensionMismatch(H.k, g.shape[0] if g.ndim else 0)
    bound = tol * max(1.0, float(np.linalg.norm(g)))
    if not np.any(g):
        return np.zeros(H.k)

    if H.k <= DIRECT_SOLVE_LIMIT:
        try:
            factor = cho_factor(H.matrix, lower=True, check_finite=True)
        except LinAlgError as e:
            raise NotPositiveDefinite(f"Hessian is not positive definite: {e}", stage="influence") from e
        v = cho_solve(factor, g)
        # One step of iterative refinement tightens ill-conditioned solves.
        if _residual(H.matrix, v, g) > bound:
            v = v + cho_solve(factor, g - H.matrix @ v)
    else:
        v = conjugate_gradient(H.matrix, g, bound)

    residual = _residual(H.matrix, v, g)
    if residual > bound:
        raise NoConvergence(residual, bound)
    return v


def compute_ihvp(H: HessianHandle, grad_0: np.ndarray, grad_1: np.ndarray) -> Ihvp:
    v_0 = solve_ihvp(H, grad_0)
    v_1 = solve_ihvp(H, grad_1)
    return Ihvp(
        v_0=v_0,
        v_1=v_1,
        residual_0=_residual(H.matrix, v_0, grad_0),
        residual_1=_residual(H.matrix, v_1, grad_1),
    )


def group_influence_all(
    m: ModelParams,
    ds: EncodedDataset,
    part: GroupPartition,
    damping: float = 1e-3,
) -> list[InfluenceRecord]:
    """Influence of every training sample on the loss of each group."""
    grad_0, grad_1 = group_gradient_sums(m, ds, part)
    H = hessian(m, ds, damping)
    ihvp = compute_ihvp(H, grad_0, grad_1)
    logger.info(
        "IHVP residuals: group 0 %.2e, group 1 %.2e (k=%d, damping=%.1e)",
        ihvp.residual_0,
        ihvp.residual_1,
        H.k,
        damping,
    )

    G = per_sample_gradients(m, ds.X, ds.y)
    i0 = G @ ihvp.v_0
    i1 = G @ ihvp.v_1
    return [InfluenceRecord.from_groups(i, float(i0[i]), float(i1[i])) for i in range(ds.n)]


def pairwise_influence(m: ModelParams, H: HessianHandle, z: Sample, z_j: Sample) -> float:
    """Influence of removing z on the loss of z_j: grad l(z_j)^T H^-1 grad l(z)."""
    g = per_sample_gradient(m, z)
    g_j = per_sample_gradient(m, z_j)
    return float(g_j @ solve_ihvp(H, g))


def influence_arrays(records: list[InfluenceRecord]) -> dict[str, np.ndarray]:
    return {
        "i0": np.array([r.i0 for r in records]),
        "i1": np.array([r.i1 for r in records]),
        "delta_if": np.array([r.delta_if for r in records]),
        "total_if": np.array([r.total_if for r in records]),
    }


def write_influence_csv(path: str | Path, records: list[InfluenceRecord]) -> None:
    rows = [[r.index, fmt(r.i0), fmt(r.i1), fmt(r.delta_if), fmt(r.total_if)] for r in records]
    locked_write_csv(path, ["index", "i0", "i1", "delta_if", "total_if"], rows)
