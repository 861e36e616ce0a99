"""Comparison tables across run directories.

Rows are methods and columns are the seven metrics. A row is flagged when
any of its absolute fairness gaps exceeds the vanilla model's.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

from tabulate import tabulate

from fairweight.artifacts import fmt, locked_read_json, locked_write_csv, read_csv_dicts, require_files
from fairweight.errors import ConfigError, MissingArtifacts
from fairweight.models import FAIRNESS_METRICS, MetricReport

logger = logging.getLogger(__name__)

RUN_FILES = ("config.json", "metrics_before.json", "metrics_after.json")
EXTERNAL_COLUMNS = ("method", *MetricReport.KEYS)


@dataclass
class ComparisonRow:
    method: str
    report: MetricReport
    flagged: bool = False
    source: str = ""


def exceeds_vanilla(report: MetricReport, vanilla: MetricReport) -> bool:
    return any(abs(report.fairness(m)) > abs(vanilla.fairness(m)) for m in FAIRNESS_METRICS)


def _method_name(config: dict) -> str:
    exp_variant = config.get("variant", "unknown")
    if exp_variant == "diverse":
        d = config.get("diverse", {})
        return f"diverse[lf={d.get('lambda_f', 0):g},lu={d.get('lambda_u', 0):g}]"
    if exp_variant == "uniform":
        return f"uniform[tau={config.get('uniform', {}).get('tau', 0):g}]"
    return exp_variant


def load_run(run_dir: str | Path) -> tuple[dict, MetricReport, MetricReport]:
    run_dir = require_files(run_dir, RUN_FILES)
    docs = [locked_read_json(run_dir / name) for name in RUN_FILES]
    if any(doc is None for doc in docs):
        raise MissingArtifacts(f"{run_dir} holds unreadable artifacts")
    config, before, after = docs
    return config, MetricReport.from_dict(before), MetricReport.from_dict(after)


def load_external(path: str | Path) -> list[ComparisonRow]:
    """Read precomputed baseline metrics: method, delta_dp, ..., auc."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifacts(f"External results file {path} not found")
    rows = []
    for line in read_csv_dicts(path):
        missing = [c for c in EXTERNAL_COLUMNS if c not in line]
        if missing:
            raise ConfigError(f"{path} is missing columns: {', '.join(missing)}")
        try:
            report = MetricReport.from_dict(line)
        except ValueError as e:
            raise ConfigError(f"{path}: non-numeric metric for {line['method']}: {e}") from e
        rows.append(ComparisonRow(method=line["method"], report=report, source=str(path)))
    return rows


def build_comparison(run_dirs: list[str | Path], external: str | Path | None = None) -> list[ComparisonRow]:
    if not run_dirs:
        raise ConfigError("report needs at least one run directory")
    runs = [(Path(d), *load_run(d)) for d in run_dirs]
    first_dir, first_config, vanilla, _ = runs[0]
    rows = [ComparisonRow(method="vanilla", report=vanilla, source=str(first_dir))]

    seen: dict[str, int] = {}
    for run_dir, config, _before, after in runs:
        if config.get("variant") == "vanilla":
            continue
        name = _method_name(config)
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            name = f"{name} ({run_dir.name})"
        rows.append(ComparisonRow(method=name, report=after, source=str(run_dir)))
    if external:
        rows.extend(load_external(external))

    for row in rows[1:]:
        row.flagged = exceeds_vanilla(row.report, vanilla)
    return rows


def render_console(rows: list[ComparisonRow]) -> str:
    table = [[r.method + (" *" if r.flagged else ""), *(f"{getattr(r.report, k):.4f}" for k in MetricReport.KEYS)] for r in rows]
    return tabulate(table, headers=["method", *MetricReport.KEYS], tablefmt="simple")


def render_markdown(rows: list[ComparisonRow]) -> str:
    table = [[r.method + (" *" if r.flagged else ""), *(f"{getattr(r.report, k):.4f}" for k in MetricReport.KEYS)] for r in rows]
    md = ["# Method comparison", "", tabulate(table, headers=["method", *MetricReport.KEYS], tablefmt="github"), ""]
    if any(r.flagged for r in rows):
        md.append("`*` marks methods with a larger absolute fairness gap than vanilla on at least one metric.")
        md.append("")
    return "\n".join(md)


def write_report(rows: list[ComparisonRow], out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "comparison.csv"
    locked_write_csv(
        csv_path,
        ["method", *MetricReport.KEYS, "flagged"],
        [[r.method, *(fmt(getattr(r.report, k)) for k in MetricReport.KEYS), int(r.flagged)] for r in rows],
    )
    md_path = out / "comparison.md"
    md_path.write_text(render_markdown(rows))
    logger.info("Comparison written to %s and %s", csv_path, md_path)
    return csv_path, md_path
