"""Fairness-utility trade-off sweeps over lambda_f (and optionally lambda_u).

Each grid point is a full run in its own sub-directory of the sweep
directory; the vanilla fit and group influences are computed once and
shared. Infeasible points become status rows and the sweep continues.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from fairweight.artifacts import create_run_dir, fmt, locked_write_csv, locked_write_json
from fairweight.config_validator import validate_grid
from fairweight.errors import ConfigError, Infeasible, RunExists
from fairweight.models import FAIRNESS_METRICS, UTILITY_METRICS, DiverseConfig, ExperimentConfig, MetricReport, Variant
from fairweight.pipeline import ExperimentRunner, PreparedRun
from fairweight.reweight import select_diverse_bias_set, solve_diverse_lp

logger = logging.getLogger(__name__)

TRADEOFF_COLUMNS = ["lambda_f", "lambda_u", "status", *MetricReport.KEYS, "run_dir"]
SVG_HASH_SALT = "fairweight"


@dataclass
class SweepResult:
    rows: list[dict]
    lambda_u: float
    vanilla: MetricReport
    out_dir: Path
    plots: list[Path] = field(default_factory=list)


def parse_grid(text: str, name: str = "lambda_f_grid") -> list[float]:
    """Parse "0,0.1,0.5" into distinct floats in [0, 1], keeping their order."""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"Grid must be comma-separated numbers, got {text!r}") from None
    return validate_grid(values, name)


def select_lambda_u(prepared: PreparedRun, cfg: DiverseConfig, lambda_f: float, lambda_u_grid: list[float]) -> float:
    """First lambda_u, in descending order, whose LP is feasible at ``lambda_f``.

    Falls back to the smallest candidate when none is feasible.
    """
    bias = select_diverse_bias_set(prepared.records)
    candidates = sorted(validate_grid(lambda_u_grid, "lambda_u_grid"), reverse=True)
    for lam_u in candidates:
        try:
            solve_diverse_lp(prepared.records, bias, replace(cfg, lambda_f=lambda_f, lambda_u=lam_u))
        except Infeasible:
            logger.info("lambda_u=%.3f infeasible at lambda_f=%.3f", lam_u, lambda_f)
            continue
        logger.info("Fixed lambda_u=%.3f", lam_u)
        return lam_u
    logger.warning("No lambda_u in %s is feasible at lambda_f=%.3f; using %.3f", candidates, lambda_f, candidates[-1])
    return candidates[-1]


def _row(lambda_f: float, lambda_u: float, status: str, report: MetricReport | None, run_dir: str) -> dict:
    row = {"lambda_f": lambda_f, "lambda_u": lambda_u, "status": status, "run_dir": run_dir}
    for key in MetricReport.KEYS:
        row[key] = getattr(report, key) if report is not None else math.nan
    return row


def write_tradeoff_csv(path: Path, rows: list[dict]) -> None:
    out = []
    for row in rows:
        cells = []
        for col in TRADEOFF_COLUMNS:
            value = row[col]
            if isinstance(value, float):
                cells.append("" if math.isnan(value) else fmt(value))
            else:
                cells.append(value)
        out.append(cells)
    locked_write_csv(path, TRADEOFF_COLUMNS, out)


def run_sweep(
    config: ExperimentConfig,
    lambda_f_grid: list[float],
    out_dir: str | Path,
    lambda_u: float = 1.0,
    lambda_u_grid: list[float] | None = None,
    plots: bool = False,
    runner: ExperimentRunner | None = None,
    prepared: PreparedRun | None = None,
) -> SweepResult:
    if config.variant != Variant.DIVERSE:
        raise ConfigError(f"Sweeps need variant=diverse, got {config.variant.value}")
    grid = validate_grid(lambda_f_grid)
    if lambda_u_grid:
        validate_grid(lambda_u_grid, "lambda_u_grid")
    out = Path(out_dir)
    if out.exists():
        raise RunExists(f"Sweep directory {out} already exists; choose a new --out")

    runner = runner or ExperimentRunner(config)
    prepared = prepared or runner.prepare()
    create_run_dir(out)
    locked_write_json(out / "vanilla_metrics.json", prepared.before.to_dict())

    if lambda_u_grid:
        lambda_u = select_lambda_u(prepared, config.diverse, max(grid), lambda_u_grid)

    logger.info("=" * 50)
    logger.info("Sweep: %d lambda_f points at lambda_u=%.3f", len(grid), lambda_u)
    logger.info("=" * 50)
    rows = []
    for lam_f in grid:
        name = f"lambda_f_{lam_f:.4f}"
        point = replace(config.diverse, lambda_f=lam_f, lambda_u=lambda_u)
        try:
            record = runner.run_point(prepared, out / name, point)
        except Infeasible as e:
            logger.warning("lambda_f=%.3f: %s", lam_f, e)
            rows.append(_row(lam_f, lambda_u, "infeasible", None, ""))
            continue
        rows.append(_row(lam_f, lambda_u, "optimal", record.after, name))

    write_tradeoff_csv(out / "tradeoff.csv", rows)
    result = SweepResult(rows=rows, lambda_u=lambda_u, vanilla=prepared.before, out_dir=out)
    if plots:
        result.plots = plot_tradeoff(rows, prepared.before, out)
    logger.info("Sweep saved to %s (%d feasible of %d)", out, sum(r["status"] == "optimal" for r in rows), len(rows))
    return result


def plot_tradeoff(rows: list[dict], vanilla: MetricReport, out_dir: Path) -> list[Path]:
    """One SVG scatter per (utility, fairness) pair with the vanilla model as crosshair lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    feasible = [r for r in rows if r["status"] == "optimal"]
    paths = []
    for util in UTILITY_METRICS:
        for fair in FAIRNESS_METRICS:
            key = f"delta_{fair}"
            fig, ax = plt.subplots(figsize=(5, 4))
            xs = [abs(r[key]) for r in feasible]
            ys = [r[util] for r in feasible]
            ax.scatter(xs, ys, color="tab:blue", label="reweighted")
            for r, x, y in zip(feasible, xs, ys):
                ax.annotate(f"{r['lambda_f']:g}", (x, y), textcoords="offset points", xytext=(3, 3), fontsize=7)
            ax.axvline(abs(vanilla.fairness(fair)), color="gray", linestyle="--", label="vanilla")
            ax.axhline(vanilla.utility(util), color="gray", linestyle="--")
            ax.set_xlabel(f"|{key}|")
            ax.set_ylabel(util)
            ax.set_title(f"{util} vs |{key}|")
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=7)
            fig.tight_layout()
            path = out_dir / f"tradeoff_{util}_{fair}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    logger.info("Wrote %d trade-off plots to %s", len(paths), out_dir)
    return paths
