"""Influence-driven sample reweighting.

Two planners turn group influences into a weight vector:

- uniform: one shared weight w' for every sample with I_0 < 0 and
  I_1 > 0; w' is picked on a grid by retraining, minimising the
  normalised fairness score under a utility floor.
- diverse: a per-sample reduction dw_i in [0, 1] for every sample with
  delta_if < 0, from the linear program

      minimise    sum dw_i
      subject to  sum delta_if_i * dw_i <= lambda_f * max_fair
                  sum total_if_i * dw_i <= lambda_u * max_util
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from fairweight.classifier import train_weighted
from fairweight.data import partition_groups
from fairweight.errors import AllZeroWeights, ConfigError, Infeasible, NoFeasiblePoint, PipelineError
from fairweight.influence import group_influence_all, influence_arrays
from fairweight.metrics import evaluate
from fairweight.models import (
    DiverseConfig,
    EncodedDataset,
    FairnessScore,
    GridPoint,
    InfluenceRecord,
    MetricReport,
    ModelKind,
    ModelParams,
    TrainConfig,
    UniformConfig,
    Variant,
    WeightPlan,
)

logger = logging.getLogger(__name__)

SNAP_TOLERANCE = 1e-9
CONSTRAINT_TOLERANCE = 1e-9
# linprog statuses that mean the solver broke, not that the program has no solution.
SOLVER_ERRORS = {1: "iteration limit reached", 3: "problem is unbounded"}


# ── Bias sets ───────────────────────────────────────────────────


def select_uniform_bias_set(records: list[InfluenceRecord]) -> list[int]:
    """Samples whose removal lowers group 0 loss and raises group 1 loss (strict)."""
    return [r.index for r in records if r.i0 < 0 and r.i1 > 0]


def select_diverse_bias_set(records: list[InfluenceRecord]) -> list[int]:
    return [r.index for r in records if r.delta_if < 0]


def identity_plan(n: int, variant: Variant, status: str = "empty_bias_set") -> WeightPlan:
    return WeightPlan(
        weights=np.ones(n),
        variant=variant,
        bias_set=(),
        objective=0.0,
        status=status,
        w_star=1.0 if variant == Variant.UNIFORM else None,
        delta_w=np.zeros(n) if variant == Variant.DIVERSE else None,
    )


# ── Uniform ─────────────────────────────────────────────────────


def s_fair_score(report: MetricReport, base: MetricReport, cfg: UniformConfig) -> FairnessScore:
    """Sum over selected metrics of |fair_m| / (|base_m| + eps)."""
    pairs = {m: (report.fairness(m), base.fairness(m)) for m in cfg.fairness_metrics}
    total = 0.0
    for fair, ref in pairs.values():
        denominator = abs(ref) + cfg.epsilon_norm
        if denominator == 0:
            total += 0.0 if fair == 0 else float("inf")
        else:
            total += abs(fair) / denominator
    return FairnessScore(pairs=pairs, s_fair=total)


def optimize_uniform(
    ds: EncodedDataset,
    records: list[InfluenceRecord],
    vanilla: ModelParams,
    cfg: UniformConfig,
    tcfg: TrainConfig,
    holdout: EncodedDataset | None = None,
    workers: int = 1,
) -> WeightPlan:
    """Grid search over the shared weight w' by exact retraining.

    Returns the feasible grid point with the lowest S_fair; ties go to the
    larger w'. w' = 1 reproduces the vanilla model and is always feasible on
    noise-free evaluation.
    """
    bias = select_uniform_bias_set(records)
    if not bias:
        logger.info("Uniform bias set is empty, keeping all weights at 1")
        return identity_plan(ds.n, Variant.UNIFORM)

    if cfg.eval_split == "holdout":
        if holdout is None:
            raise ConfigError("eval_split=holdout needs a holdout dataset")
        eval_ds = holdout
    else:
        eval_ds = ds

    base = evaluate(vanilla, eval_ds)
    metric = cfg.utility_metric.value
    util_base = base.utility(metric)
    floor = util_base * (1.0 - cfg.tau)
    grid = np.linspace(0.0, 1.0, cfg.grid_points)
    logger.info("Uniform search: %d biased samples, %d grid points, util floor %.4f", len(bias), len(grid), floor)

    def evaluate_point(w: float) -> GridPoint:
        if w == 1.0:
            model = vanilla
        else:
            weights = np.ones(ds.n)
            weights[bias] = w
            try:
                model = train_weighted(ds, weights, tcfg, vanilla.kind)
            except AllZeroWeights:
                return GridPoint(w=float(w), util=float("nan"), s_fair=float("inf"), feasible=False)
        report = evaluate(model, eval_ds)
        util = report.utility(metric)
        return GridPoint(
            w=float(w),
            util=util,
            s_fair=s_fair_score(report, base, cfg).s_fair,
            feasible=bool(util >= floor),
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(evaluate_point, grid))
    else:
        points = [evaluate_point(w) for w in grid]

    best: GridPoint | None = None
    for point in reversed(points):
        if point.feasible and (best is None or point.s_fair < best.s_fair):
            best = point
    if best is None:
        raise NoFeasiblePoint(f"No grid value of w' keeps {metric} >= {floor:.4f}")

    weights = np.ones(ds.n)
    weights[bias] = best.w
    logger.info("Uniform optimum w*=%.3f (S_fair=%.4f, %s=%.4f)", best.w, best.s_fair, metric, best.util)
    return WeightPlan(
        weights=weights,
        variant=Variant.UNIFORM,
        bias_set=tuple(bias),
        objective=best.s_fair,
        w_star=best.w,
        grid=points,
        util_base=util_base,
        tau=cfg.tau,
    )


def pwl_curve(plan: WeightPlan, w) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear interpolation of (util, S_fair) between evaluated grid points."""
    points = [p for p in plan.grid if np.isfinite(p.s_fair)]
    if not points:
        raise ValueError("Plan has no evaluated grid points")
    xs = np.array([p.w for p in points])
    util = np.interp(w, xs, np.array([p.util for p in points]))
    s_fair = np.interp(w, xs, np.array([p.s_fair for p in points]))
    return util, s_fair


# ── Diverse ─────────────────────────────────────────────────────


def _polish(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Snap near-bound coordinates and re-solve the fractional ones on the tight rows exactly."""
    x = np.clip(x, 0.0, 1.0)
    x[x <= SNAP_TOLERANCE] = 0.0
    x[x >= 1.0 - SNAP_TOLERANCE] = 1.0
    frac = np.flatnonzero((x > 0.0) & (x < 1.0))
    if len(frac) == 0 or len(frac) > len(b):
        return x

    slack = b - A @ x
    tight = [i for i in range(len(b)) if abs(slack[i]) <= 1e-7 * max(1.0, abs(b[i]))]
    best_violation = max(0.0, float(np.max(A @ x - b)))
    fixed = np.setdiff1d(np.arange(len(x)), frac)
    for rows in itertools.combinations(tight, len(frac)):
        rows = list(rows)
        sub = A[np.ix_(rows, frac)]
        rhs = b[rows] - A[np.ix_(rows, fixed)] @ x[fixed]
        try:
            values = np.linalg.solve(sub, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.any(values < -SNAP_TOLERANCE) or np.any(values > 1.0 + SNAP_TOLERANCE):
            continue
        candidate = x.copy()
        candidate[frac] = np.clip(values, 0.0, 1.0)
        violation = max(0.0, float(np.max(A @ candidate - b)))
        if violation <= best_violation:
            return candidate
    return x


def _solved(res) -> bool:
    """True for an optimal linprog result, False for any infeasible or unclassified one."""
    if res.status in SOLVER_ERRORS:
        raise PipelineError(f"LP solver failed: {SOLVER_ERRORS[res.status]}: {res.message}", stage="optimize")
    if res.status != 0 or res.x is None:
        logger.debug("linprog status %d treated as infeasible: %s", res.status, res.message)
        return False
    return True


def _solve_lp(delta_if: np.ndarray, total_if: np.ndarray, rhs: tuple[float, float]) -> tuple[np.ndarray | None, str]:
    """Return (dw, status); dw is None when the program is infeasible."""
    m = len(delta_if)
    b = np.array(rhs, dtype=float)
    if np.all(b >= 0):
        # dw = 0 is feasible and the objective is nonnegative.
        return np.zeros(m), "optimal"
    if m == 0:
        return None, "infeasible"

    A = np.vstack([delta_if, total_if])
    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0] = 1.0
    res = linprog(
        c=np.ones(m),
        A_ub=A / scale[:, None],
        b_ub=b / scale,
        bounds=[(0.0, 1.0)] * m,
        method="highs",
    )
    if not _solved(res):
        return None, "infeasible"
    return _polish(A, b, np.asarray(res.x, dtype=float)), "optimal"


def optimization_potentials(
    records: list[InfluenceRecord], bias_set, scope: str = "diverse"
) -> tuple[float, float]:
    """max_fair = sum of negative delta_if, max_util = sum of negative total_if."""
    arrays = influence_arrays(records)
    idx = np.asarray(sorted(bias_set), dtype=int) if scope == "diverse" else np.arange(len(records))
    dif = arrays["delta_if"][idx]
    tif = arrays["total_if"][idx]
    return float(np.sum(dif[dif < 0])), float(np.sum(tif[tif < 0]))


def _lp_inputs(records, bias_set, cfg: DiverseConfig):
    if cfg.potential_scope not in ("diverse", "all"):
        raise ConfigError(f"potential_scope must be 'diverse' or 'all', got {cfg.potential_scope!r}")
    arrays = influence_arrays(records)
    bias = np.asarray(sorted(bias_set), dtype=int)
    max_fair, max_util = optimization_potentials(records, bias_set, cfg.potential_scope)
    return bias, arrays["delta_if"][bias], arrays["total_if"][bias], max_fair, max_util


def largest_feasible_lambda_f(records: list[InfluenceRecord], bias_set, cfg: DiverseConfig) -> float | None:
    """Largest lambda_f in [0, cfg.lambda_f] that is feasible at cfg.lambda_u.

    lambda_f only moves the fairness row, so the answer follows from the
    lowest sum(delta_if * dw) reachable under the utility row alone.
    None when the utility row cannot be met for any lambda_f.
    """
    _, dif, tif, max_fair, max_util = _lp_inputs(records, bias_set, cfg)
    util_rhs = cfg.lambda_u * max_util
    if len(dif) == 0:
        return cfg.lambda_f if util_rhs >= 0 else None

    scale = float(np.max(np.abs(tif))) or 1.0
    res = linprog(
        c=dif,
        A_ub=(tif / scale)[None, :],
        b_ub=[util_rhs / scale],
        bounds=[(0.0, 1.0)] * len(dif),
        method="highs",
    )
    if not _solved(res):
        return None
    if max_fair >= 0:
        return cfg.lambda_f
    dw = _polish(tif[None, :], np.array([util_rhs]), np.asarray(res.x, dtype=float))
    best = float(dif @ dw)
    return float(min(cfg.lambda_f, max(0.0, best / max_fair)))


def solve_diverse_lp(records: list[InfluenceRecord], bias_set, cfg: DiverseConfig) -> WeightPlan:
    n = len(records)
    bias, dif, tif, max_fair, max_util = _lp_inputs(records, bias_set, cfg)
    rhs = (cfg.lambda_f * max_fair, cfg.lambda_u * max_util)
    dw, status = _solve_lp(dif, tif, rhs)
    if dw is None:
        suggested = largest_feasible_lambda_f(records, bias_set, cfg)
        raise Infeasible(cfg.lambda_f, cfg.lambda_u, suggested)

    slacks = (float(rhs[0] - dif @ dw), float(rhs[1] - tif @ dw))
    if min(slacks) < -CONSTRAINT_TOLERANCE:
        logger.warning("LP solution violates a constraint by %.3e", -min(slacks))
    fractional = int(np.sum((dw > 0.0) & (dw < 1.0)))
    if fractional > 2:
        logger.warning("LP returned %d fractional coordinates; a vertex has at most 2", fractional)

    delta_w = np.zeros(n)
    delta_w[bias] = dw
    weights = 1.0 - delta_w
    logger.info(
        "Diverse LP: %d variables, objective %.4f, %d fully removed, %d fractional",
        len(bias),
        float(dw.sum()),
        int(np.sum(dw == 1.0)),
        fractional,
    )
    return WeightPlan(
        weights=weights,
        variant=Variant.DIVERSE,
        bias_set=tuple(int(i) for i in bias),
        objective=float(dw.sum()),
        status=status,
        delta_w=delta_w,
        slacks=slacks,
        max_fair=max_fair,
        max_util=max_util,
        lambda_f=cfg.lambda_f,
        lambda_u=cfg.lambda_u,
        fractional_count=fractional,
    )


# ── End to end ──────────────────────────────────────────────────


@dataclass
class PipelineResult:
    plan: WeightPlan
    vanilla: ModelParams
    fair: ModelParams
    before: MetricReport
    after: MetricReport
    records: list[InfluenceRecord]


def plan_weights(
    variant: Variant,
    train: EncodedDataset,
    records: list[InfluenceRecord],
    vanilla: ModelParams,
    uniform_cfg: UniformConfig,
    diverse_cfg: DiverseConfig,
    tcfg: TrainConfig,
    holdout: EncodedDataset | None = None,
) -> WeightPlan:
    if variant == Variant.UNIFORM:
        return optimize_uniform(train, records, vanilla, uniform_cfg, tcfg, holdout=holdout)
    if variant == Variant.DIVERSE:
        bias = select_diverse_bias_set(records)
        if not bias:
            logger.info("Diverse bias set is empty, keeping all weights at 1")
        return solve_diverse_lp(records, bias, diverse_cfg)
    raise ConfigError(f"Variant {variant.value} is not an influence reweighting variant")


def reweighting_pipeline(
    train: EncodedDataset,
    test: EncodedDataset,
    variant: Variant,
    tcfg: TrainConfig,
    kind: ModelKind = ModelKind.LOGISTIC,
    uniform_cfg: UniformConfig | None = None,
    diverse_cfg: DiverseConfig | None = None,
    damping: float = 1e-3,
    holdout: EncodedDataset | None = None,
) -> PipelineResult:
    """Vanilla fit, group influence, weight plan, retrain, and held-out reports."""
    ones = np.ones(train.n)
    vanilla = train_weighted(train, ones, tcfg, kind)
    records = group_influence_all(vanilla, train, partition_groups(train), damping)
    plan = plan_weights(
        variant, train, records, vanilla, uniform_cfg or UniformConfig(), diverse_cfg or DiverseConfig(), tcfg, holdout
    )
    fair = vanilla if np.array_equal(plan.weights, ones) else train_weighted(train, plan.weights, tcfg, kind)
    return PipelineResult(
        plan=plan,
        vanilla=vanilla,
        fair=fair,
        before=evaluate(vanilla, test),
        after=evaluate(fair, test),
        records=records,
    )
