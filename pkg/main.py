#!/usr/bin/env python3
"""fairweight: influence-driven fair sample reweighting experiments."""

import argparse
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from fairweight.config import load_experiment, sweep_settings
from fairweight.config_validator import validate_experiment
from fairweight.errors import FairweightError
from fairweight.models import Variant
from fairweight.pipeline import ExperimentRunner, write_encoded
from fairweight.report import build_comparison, render_console, write_report
from fairweight.sweep import parse_grid, run_sweep
from fairweight.synthetic import generate_synthetic, write_synthetic

logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO"),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    datefmt="%H:%M:%S",
)
logger = logging.getLogger("main")


def _overrides(args: argparse.Namespace) -> dict:
    """Nested config overlay from the flags that were actually given."""
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "experiment": {
            "dataset": get("dataset"),
            "csv_path": get("csv"),
            "schema_path": get("schema"),
            "delimiter": get("delimiter"),
            "model": get("model"),
            "variant": get("variant"),
            "seed": get("seed"),
            "output_dir": get("out"),
        },
        "uniform": {"tau": get("tau"), "eval_split": get("eval_split")},
        "diverse": {"lambda_f": get("lambda_f"), "lambda_u": get("lambda_u")},
        "influence": {"damping": get("damping")},
    }


def _load(args: argparse.Namespace):
    cfg = load_experiment(args.config, _overrides(args))
    for w in validate_experiment(cfg):
        logger.warning("Config: %s", w)
    return cfg


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _load(args)
    runner = ExperimentRunner(cfg)
    schema, train, test = runner.load_data()
    write_encoded(args.out, schema, train, test)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    runner = ExperimentRunner(cfg)
    record = runner.run()
    runner.print_report(record)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    args.variant = Variant.DIVERSE.value
    cfg = _load(args)
    sweep = sweep_settings(args.config)
    grid = parse_grid(args.lambda_f_grid) if args.lambda_f_grid else list(sweep.get("lambda_f_grid", [0.0, 1.0]))
    lambda_u = args.lambda_u if args.lambda_u is not None else float(sweep.get("lambda_u", 1.0))
    u_grid = parse_grid(args.lambda_u_grid, "lambda_u_grid") if args.lambda_u_grid else list(sweep.get("lambda_u_grid", []))
    result = run_sweep(
        cfg,
        grid,
        args.out,
        lambda_u=lambda_u,
        lambda_u_grid=u_grid,
        plots=args.plots or bool(sweep.get("plots", False)),
    )
    for row in result.rows:
        print(
            f"  lambda_f={row['lambda_f']:.2f}  {row['status']:<10} "
            f"dDP={row['delta_dp']:+.4f}  dEOdds={row['delta_eodds']:.4f}  acc={row['acc']:.4f}"
        )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rows = build_comparison(args.run_dirs, args.external)
    print(render_console(rows))
    write_report(rows, args.out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    ds = generate_synthetic(args.beta, args.n, args.d, args.seed)
    schema_path = write_synthetic(ds, args.out)
    print(f"Wrote {args.out} and {schema_path}")
    return 0


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", type=str, help="Built-in dataset: adult | compas | german")
    p.add_argument("--csv", type=str, help="CSV file (default data/<dataset>.csv)")
    p.add_argument("--schema", type=str, help="JSON schema for a custom CSV")
    p.add_argument("--delimiter", type=str, help="CSV delimiter")
    p.add_argument("--seed", type=int, help="Root seed")
    p.add_argument("--config", type=str, help="YAML/JSON config overlay")


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", type=str, choices=["logistic", "mlp"])
    p.add_argument("--tau", type=float, help="Uniform: allowed relative utility loss")
    p.add_argument("--eval-split", type=str, choices=["train", "holdout"], help="Uniform: split that selects w'")
    p.add_argument("--lambda-f", type=float, help="Diverse: fraction of the fairness potential to realise")
    p.add_argument("--damping", type=float, help="Hessian damping")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Influence-driven fair sample reweighting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Parse, encode and split a dataset")
    _data_flags(p)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="Train vanilla and treated models and compare them")
    _data_flags(p)
    _experiment_flags(p)
    p.add_argument(
        "--variant",
        type=str,
        choices=[v.value for v in Variant],
        help="Treatment applied before retraining",
    )
    p.add_argument("--lambda-u", type=float, help="Diverse: fraction of the utility potential to realise")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Sweep lambda_f for the diverse variant")
    _data_flags(p)
    _experiment_flags(p)
    p.add_argument("--lambda-f-grid", type=str, help="Comma-separated lambda_f values")
    p.add_argument("--lambda-u", type=float, help="Fixed lambda_u (default 1)")
    p.add_argument("--lambda-u-grid", type=str, help="Pick the first feasible lambda_u, largest first")
    p.add_argument("--plots", action="store_true", help="Write trade-off SVGs")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="Compare finished runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--external", type=str, help="CSV of precomputed baseline metrics")
    p.add_argument("--out", type=str, default="reports", help="Output directory for comparison.csv/.md")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="Generate a synthetic biased dataset")
    p.add_argument("--beta", type=float, default=0.3, help="Label-flip rate on group-0 positives")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FairweightError as exc:
        where = getattr(exc, "stage", "")
        logger.critical("%s failed%s: %s", args.command, f" at stage {where}" if where else "", exc)
        return exc.exit_code
    except OSError as exc:
        logger.critical("%s failed: %s", args.command, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
