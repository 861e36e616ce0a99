"""Weighted ERM for logistic regression and a two-layer ReLU MLP.

Both kinds end in an affine + sigmoid head. Gradients and the Hessian used
for influence are taken with respect to the head parameters [w, b] only, at
the features that feed the head (raw inputs for logistic, penultimate
activations for the MLP).
"""

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from fairweight.artifacts import locked_write_json
from fairweight.errors import AllZeroWeights, ConfigError, DimensionMismatch, HeadNotConverged, NonFinite
from fairweight.models import (
    EncodedDataset,
    HessianHandle,
    ModelKind,
    ModelParams,
    PredictionBatch,
    Sample,
    TrainConfig,
)

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-12
DEFAULT_MLP_BATCH = 64
NEWTON_MAX_ITER = 200
NEWTON_TOLERANCE = 1e-12


def bce(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Binary cross-entropy with the probability clamped away from 0 and 1."""
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(y * np.log(p) + (1 - y) * np.log(1.0 - p))


def _augment(F: np.ndarray) -> np.ndarray:
    return np.hstack([F, np.ones((F.shape[0], 1))])


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ConfigError(f"Expected {n} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError("Weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise AllZeroWeights("All sample weights are zero", stage="train")
    return w / total


# ── Head fitting ────────────────────────────────────────────────


def _head_objective(Fa, y, omega, l2, theta) -> float:
    p = expit(Fa @ theta)
    return float(omega @ bce(p, y) + l2 * theta @ theta)


def _head_gradient(Fa, y, omega, l2, theta) -> np.ndarray:
    p = expit(Fa @ theta)
    return Fa.T @ (omega * (p - y)) + 2.0 * l2 * theta


def _fit_head(F, y, omega, l2, cfg: TrainConfig, theta0: np.ndarray, solver: str) -> np.ndarray:
    """Minimise the weighted head objective from theta0.

    Newton runs to NEWTON_TOLERANCE (or cfg.tolerance if tighter) under its
    own iteration cap and raises HeadNotConverged above cfg.tolerance.
    Gradient descent runs cfg.epochs steps and only warns.
    """
    Fa = _augment(F)
    k = Fa.shape[1]
    theta = theta0.astype(float).copy()
    newton = solver != "gd"
    target = min(cfg.tolerance, NEWTON_TOLERANCE) if newton else cfg.tolerance
    max_iter = NEWTON_MAX_ITER if newton else cfg.epochs

    steps = 0
    g = _head_gradient(Fa, y, omega, l2, theta)
    gnorm = float(np.linalg.norm(g))
    while steps < max_iter:
        if not np.isfinite(gnorm):
            raise NonFinite("Gradient diverged while fitting the head", stage="train")
        if gnorm <= target:
            break
        steps += 1

        if not newton:
            theta = theta - cfg.learning_rate * g
        else:
            p = expit(Fa @ theta)
            curvature = omega * p * (1.0 - p)
            H = (Fa * curvature[:, None]).T @ Fa + 2.0 * l2 * np.eye(k)
            try:
                step = np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, g, rcond=None)[0]

            # Armijo backtracking
            current = _head_objective(Fa, y, omega, l2, theta)
            t = 1.0
            while t > 1e-10:
                candidate = theta - t * step
                if _head_objective(Fa, y, omega, l2, candidate) <= current - 1e-4 * t * float(g @ step):
                    break
                t *= 0.5
            else:
                # no decrease left at machine precision
                break
            theta = candidate
        g = _head_gradient(Fa, y, omega, l2, theta)
        gnorm = float(np.linalg.norm(g))

    if not np.all(np.isfinite(theta)):
        raise NonFinite("Head parameters are not finite", stage="train")
    if gnorm > cfg.tolerance:
        if newton:
            raise HeadNotConverged(gnorm, cfg.tolerance, steps)
        logger.warning("Head fit stopped at gradient norm %.3e (tolerance %.1e)", gnorm, cfg.tolerance)
    logger.debug("Head fit: %d %s steps, gradient norm %.3e", steps, solver, gnorm)
    return theta


# ── MLP ─────────────────────────────────────────────────────────


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _init_mlp(d: int, sizes: tuple[int, int], rng: np.random.Generator):
    h1, h2 = sizes
    W1 = rng.normal(0.0, np.sqrt(2.0 / d), (d, h1))
    W2 = rng.normal(0.0, np.sqrt(2.0 / h1), (h1, h2))
    w = rng.normal(0.0, np.sqrt(1.0 / h2), h2)
    return [W1, np.zeros(h1), W2, np.zeros(h2), w, np.zeros(1)]


def _train_mlp(X, y, omega, cfg: TrainConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    params = _init_mlp(X.shape[1], cfg.hidden_sizes, rng)
    n = X.shape[0]
    batch = cfg.batch_size or DEFAULT_MLP_BATCH
    l2 = cfg.l2_strength
    lr = cfg.learning_rate

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            W1, b1, W2, b2, w, b = params
            xb = X[idx]
            # Sample weights scaled so the batch gradient is unbiased for the full weighted mean.
            om = omega[idx] * (n / len(idx))

            z1 = xb @ W1 + b1
            h1 = _relu(z1)
            z2 = h1 @ W2 + b2
            f = _relu(z2)
            p = expit(f @ w + b[0])

            r = om * (p - y[idx])
            df = np.outer(r, w) * (z2 > 0)
            dh1 = (df @ W2.T) * (z1 > 0)
            grads = [
                xb.T @ dh1 + 2 * l2 * W1,
                dh1.sum(axis=0) + 2 * l2 * b1,
                h1.T @ df + 2 * l2 * W2,
                df.sum(axis=0) + 2 * l2 * b2,
                f.T @ r + 2 * l2 * w,
                np.array([r.sum()]) + 2 * l2 * b,
            ]
            params = [param - lr * grad for param, grad in zip(params, grads)]

        if not all(np.all(np.isfinite(param)) for param in params):
            raise NonFinite(f"MLP parameters diverged at epoch {epoch}", stage="train")
    return params


# ── Public API ──────────────────────────────────────────────────


def train_weighted(
    ds: EncodedDataset,
    weights,
    cfg: TrainConfig,
    kind: ModelKind = ModelKind.LOGISTIC,
    init: ModelParams | None = None,
) -> ModelParams:
    """Minimise (1/sum w) * sum_i w_i * bce_i + l2 * ||theta||^2.

    Deterministic for a fixed ``cfg.seed``; scaling all weights by a constant
    leaves the result unchanged. ``init`` warm-starts a logistic fit from a
    previous model; the objective is strictly convex, so only the number of
    Newton steps changes.
    """
    if cfg.learning_rate <= 0 or cfg.tolerance <= 0:
        raise ConfigError("learning_rate and tolerance must be positive")
    omega = _check_weights(weights, ds.n)
    y = ds.y.astype(float)

    if kind == ModelKind.LOGISTIC:
        start = np.zeros(ds.d + 1)
        if init is not None:
            if init.kind != ModelKind.LOGISTIC or init.input_dim != ds.d:
                raise ConfigError("Warm start needs a logistic model over the same features")
            start = init.theta
        theta = _fit_head(ds.X, y, omega, cfg.l2_strength, cfg, start, cfg.solver)
        return ModelParams(
            kind=kind, head_w=theta[:-1], head_b=float(theta[-1]), input_dim=ds.d, l2_strength=cfg.l2_strength
        )

    W1, b1, W2, b2, w, b = _train_mlp(ds.X, y, omega, cfg)
    model = ModelParams(
        kind=kind,
        head_w=w,
        head_b=float(b[0]),
        input_dim=ds.d,
        hidden=((W1, b1), (W2, b2)),
        l2_strength=cfg.l2_strength,
    )
    if cfg.head_refit:
        model = refit_head(model, ds, weights, cfg)
    return model


def refit_head(m: ModelParams, ds: EncodedDataset, weights, cfg: TrainConfig) -> ModelParams:
    """Refit only [w, b] by Newton at the frozen features of ``m``, starting from its head."""
    omega = _check_weights(weights, ds.n)
    F = extract_features(m, ds.X)
    theta = _fit_head(F, ds.y.astype(float), omega, cfg.l2_strength, cfg, m.theta, "newton")
    return replace(m, head_w=theta[:-1], head_b=float(theta[-1]), l2_strength=cfg.l2_strength)


def train(ds: EncodedDataset, cfg: TrainConfig, kind: ModelKind = ModelKind.LOGISTIC) -> ModelParams:
    """Plain ERM: every sample weighted 1."""
    return train_weighted(ds, np.ones(ds.n), cfg, kind)


def _check_dim(m: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.input_dim:
        raise DimensionMismatch(m.input_dim, X.shape[1])
    return X


def extract_features(m: ModelParams, X: np.ndarray) -> np.ndarray:
    """Activations feeding the head; the identity for logistic models."""
    X = _check_dim(m, X)
    if m.kind == ModelKind.LOGISTIC:
        return X
    (W1, b1), (W2, b2) = m.hidden
    return _relu(_relu(X @ W1 + b1) @ W2 + b2)


def head_proba(m: ModelParams, F: np.ndarray) -> np.ndarray:
    return expit(F @ m.head_w + m.head_b)


def predict_proba(m: ModelParams, X: np.ndarray) -> PredictionBatch:
    """Probabilities and labels; a probability of exactly 0.5 maps to label 1."""
    probs = head_proba(m, extract_features(m, X))
    return PredictionBatch(probs=probs, labels=(probs >= 0.5).astype(int))


def per_sample_gradients(m: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row i is the head gradient (p_i - y_i) * [f_i, 1] of sample i's loss."""
    F = extract_features(m, X)
    residual = head_proba(m, F) - np.asarray(y, dtype=float)
    return _augment(F) * residual[:, None]


def per_sample_gradient(m: ModelParams, z: Sample) -> np.ndarray:
    return per_sample_gradients(m, np.atleast_2d(z.x), np.array([z.y]))[0]


def hessian(m: ModelParams, ds: EncodedDataset, damping: float = 1e-3) -> HessianHandle:
    """H = (1/n) sum p(1-p) [f,1][f,1]^T + (2*l2 + damping) I over the head parameters."""
    if damping < 0:
        raise ConfigError("Hessian damping must be nonnegative")
    k = m.head_dim + 1
    H = np.zeros((k, k))
    if ds.n > 0:
        F = extract_features(m, ds.X)
        p = head_proba(m, F)
        Fa = _augment(F)
        H = (Fa * (p * (1.0 - p))[:, None]).T @ Fa / ds.n
    H = H + (2.0 * m.l2_strength + damping) * np.eye(k)
    H = (H + H.T) / 2.0
    if not np.all(np.isfinite(H)):
        raise NonFinite("Hessian has non-finite entries", stage="influence")
    return HessianHandle(matrix=H, damping=damping, n=ds.n)


def weighted_objective(m: ModelParams, ds: EncodedDataset, weights) -> float:
    """Weighted mean loss plus the head regulariser, at the head features."""
    omega = _check_weights(weights, ds.n)
    F = extract_features(m, ds.X)
    return _head_objective(_augment(F), ds.y.astype(float), omega, m.l2_strength, m.theta)


def weighted_gradient(m: ModelParams, ds: EncodedDataset, weights) -> np.ndarray:
    omega = _check_weights(weights, ds.n)
    F = extract_features(m, ds.X)
    return _head_gradient(_augment(F), ds.y.astype(float), omega, m.l2_strength, m.theta)


def group_loss(m: ModelParams, ds: EncodedDataset, idx: np.ndarray) -> float:
    """Summed loss over the given samples."""
    if len(idx) == 0:
        return 0.0
    probs = predict_proba(m, ds.X[idx]).probs
    return float(bce(probs, ds.y[idx].astype(float)).sum())


# ── Persistence ─────────────────────────────────────────────────


def model_to_dict(m: ModelParams) -> dict:
    return {
        "kind": m.kind.value,
        "dims": {
            "input_dim": m.input_dim,
            "head_dim": m.head_dim,
            "hidden_sizes": [int(W.shape[1]) for W, _ in m.hidden],
        },
        "l2_strength": m.l2_strength,
        "head": {"w": m.head_w.tolist(), "b": m.head_b},
        "hidden": [{"W": W.tolist(), "b": b.tolist()} for W, b in m.hidden],
    }


def model_from_dict(doc: dict) -> ModelParams:
    return ModelParams(
        kind=ModelKind(doc["kind"]),
        head_w=np.asarray(doc["head"]["w"], dtype=float),
        head_b=float(doc["head"]["b"]),
        input_dim=int(doc["dims"]["input_dim"]),
        hidden=tuple((np.asarray(h["W"], dtype=float), np.asarray(h["b"], dtype=float)) for h in doc["hidden"]),
        l2_strength=float(doc.get("l2_strength", 0.0)),
    )


def save_model(path: str | Path, m: ModelParams) -> None:
    locked_write_json(path, model_to_dict(m))


def load_model(path: str | Path) -> ModelParams:
    return model_from_dict(json.loads(Path(path).read_text()))
