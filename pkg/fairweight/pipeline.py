"""Experiment runner: ingest, vanilla fit, influence, treatment, retrain, evaluate, persist."""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from tabulate import tabulate

from fairweight import __version__
from fairweight.artifacts import create_run_dir, fmt, locked_write_csv, locked_write_json
from fairweight.classifier import save_model, train_weighted
from fairweight.config import config_to_dict
from fairweight.config_validator import data_path
from fairweight.data import encoded_rows, parse_csv, partition_groups, prepare_splits, split
from fairweight.errors import FairweightError, PipelineError, RunExists
from fairweight.influence import group_influence_all, write_influence_csv
from fairweight.metrics import evaluate, improvement
from fairweight.models import (
    DatasetSchema,
    DiverseConfig,
    EncodedDataset,
    ExperimentConfig,
    InfluenceRecord,
    MetricReport,
    ModelParams,
    RunRecord,
    SplitSpec,
    TrainConfig,
    Variant,
)
from fairweight.schemas import resolve_schema
from fairweight.treatments import TreatmentContext, TreatmentRegistry, TreatmentResult

logger = logging.getLogger(__name__)

STAGE_IDS = {"split": 1, "validation": 2, "train": 3}


def derive_seed(root: int, stage: str) -> int:
    """Independent, reproducible seed for one pipeline stage."""
    return int(np.random.SeedSequence([root, STAGE_IDS[stage]]).generate_state(1)[0])


@contextmanager
def stage(name: str):
    """Tag errors raised inside a pipeline stage with the stage name."""
    try:
        yield
    except PipelineError as e:
        if not e.stage:
            e.stage = name
        raise
    except FairweightError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        raise PipelineError(f"{name} failed: {e}", stage=name) from e


@dataclass
class PreparedRun:
    """Everything shared by runs that differ only in the treatment settings."""

    schema: DatasetSchema
    train: EncodedDataset
    test: EncodedDataset
    holdout: EncodedDataset | None
    vanilla: ModelParams
    records: list[InfluenceRecord]
    before: MetricReport


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, registry: TreatmentRegistry | None = None):
        self.config = config
        self.registry = registry or TreatmentRegistry()
        self.tcfg: TrainConfig = replace(config.train, seed=derive_seed(config.seed, "train"))

    # ── Stages ──────────────────────────────────────────────────

    def load_data(self) -> tuple[DatasetSchema, EncodedDataset, EncodedDataset]:
        cfg = self.config
        with stage("ingest"):
            schema = resolve_schema(cfg.dataset, cfg.schema_path)
            table = parse_csv(data_path(cfg), cfg.delimiter, required=schema.used_columns)
            spec = replace(cfg.split, seed=derive_seed(cfg.seed, "split"))
            train, test = prepare_splits(table, schema, spec)
        return schema, train, test

    def _holdout(self, train: EncodedDataset) -> tuple[EncodedDataset, EncodedDataset | None]:
        cfg = self.config
        if cfg.variant != Variant.UNIFORM or cfg.uniform.eval_split != "holdout":
            return train, None
        spec = SplitSpec(
            test_fraction=cfg.uniform.validation_fraction,
            seed=derive_seed(cfg.seed, "validation"),
            stratify_on=cfg.split.stratify_on,
        )
        with stage("ingest"):
            fit, holdout = split(train, spec)
        logger.info("Holdout for w' selection: %d fit / %d validation", fit.n, holdout.n)
        return fit, holdout

    def prepare(self, data: tuple[DatasetSchema, EncodedDataset, EncodedDataset] | None = None) -> PreparedRun:
        """Load and split the data, fit the vanilla model and compute group influence.

        ``data`` supplies an already encoded (schema, train, test) triple.
        """
        schema, train, test = data if data is not None else self.load_data()
        train, holdout = self._holdout(train)

        logger.info("=" * 50)
        logger.info("Vanilla %s model on %d samples (d=%d)", self.config.model.value, train.n, train.d)
        logger.info("=" * 50)
        with stage("train"):
            vanilla = train_weighted(train, np.ones(train.n), self.tcfg, self.config.model)
        with stage("influence"):
            records = group_influence_all(vanilla, train, partition_groups(train), self.config.damping)
        with stage("evaluate"):
            before = evaluate(vanilla, test)
        return PreparedRun(schema, train, test, holdout, vanilla, records, before)

    def treat(self, prepared: PreparedRun, diverse: DiverseConfig | None = None) -> TreatmentResult:
        treatment = self.registry.get(self.config.variant.value)
        ctx = TreatmentContext(
            train=prepared.train,
            test=prepared.test,
            schema=prepared.schema,
            vanilla=prepared.vanilla,
            tcfg=self.tcfg,
            kind=self.config.model,
            uniform=self.config.uniform,
            diverse=diverse or self.config.diverse,
            records=prepared.records if treatment.needs_influence else None,
            holdout=prepared.holdout,
        )
        with stage("optimize"):
            result = treatment.apply(ctx)
        logger.info("Treatment: %s", treatment.describe(result))
        return result

    def run_point(
        self, prepared: PreparedRun, out_dir: str | Path, diverse: DiverseConfig | None = None
    ) -> RunRecord:
        """Treat, retrain, evaluate and persist one run into a fresh directory."""
        start = time.monotonic()
        result = self.treat(prepared, diverse)
        if result.is_identity:
            fair = prepared.vanilla
        else:
            with stage("retrain"):
                fair = train_weighted(result.train, result.weights, self.tcfg, self.config.model)
        with stage("evaluate"):
            after = evaluate(fair, result.test)
        return self._save(Path(out_dir), prepared, result, fair, after, diverse, time.monotonic() - start)

    def run(self) -> RunRecord:
        out = Path(self.config.output_dir)
        if out.exists():
            raise RunExists(f"Run directory {out} already exists; choose a new --out")
        start = time.monotonic()
        record = self.run_point(self.prepare(), out)
        return replace(record, wall_clock_s=time.monotonic() - start)

    # ── Output ──────────────────────────────────────────────────

    def _save(
        self,
        out: Path,
        prepared: PreparedRun,
        result: TreatmentResult,
        fair: ModelParams,
        after: MetricReport,
        diverse: DiverseConfig | None,
        elapsed: float,
    ) -> RunRecord:
        create_run_dir(out)
        config = config_to_dict(replace(self.config, diverse=diverse or self.config.diverse, output_dir=str(out)))
        locked_write_json(out / "config.json", config)

        weights_path = out / "weights.csv"
        locked_write_csv(weights_path, ["index", "weight"], [[i, fmt(w)] for i, w in enumerate(result.weights)])
        write_influence_csv(out / "influence.csv", prepared.records)
        locked_write_json(out / "metrics_before.json", prepared.before.to_dict())
        locked_write_json(out / "metrics_after.json", after.to_dict())

        plan_path = out / "plan.json"
        if result.plan is not None:
            sidecar = result.plan.to_sidecar()
            if result.plan.grid:
                locked_write_csv(
                    out / "uniform_grid.csv",
                    ["w", "util", "s_fair", "feasible"],
                    [[fmt(p.w), fmt(p.util), fmt(p.s_fair), int(p.feasible)] for p in result.plan.grid],
                )
        else:
            sidecar = {"variant": self.config.variant.value, "objective": 0.0, "status": "baseline"}
            sidecar["bias_set_size"] = 0
        if result.dropped_columns:
            sidecar["dropped_columns"] = list(result.dropped_columns)
        locked_write_json(plan_path, sidecar)

        save_model(out / "model_vanilla.json", prepared.vanilla)
        save_model(out / "model_fair.json", fair)

        record = RunRecord(
            config=config,
            before=prepared.before,
            after=after,
            plan_path=str(plan_path),
            weights_path=str(weights_path),
            wall_clock_s=elapsed,
            version=__version__,
        )
        locked_write_json(
            out / "run.json",
            {
                "version": record.version,
                "wall_clock_s": record.wall_clock_s,
                "plan_path": record.plan_path,
                "weights_path": record.weights_path,
                "metrics_before": record.before.to_dict(),
                "metrics_after": record.after.to_dict(),
            },
        )
        logger.info("Run saved to %s", out)
        return record

    def print_report(self, record: RunRecord) -> None:
        """Print vanilla vs treated metrics to the console."""
        print("\n" + "=" * 60)
        print(f"  {self.config.variant.value.upper()} vs VANILLA ({self.config.model.value})")
        print("=" * 60)
        gains = improvement(record.before, record.after)
        rows = []
        for key in MetricReport.KEYS:
            before, after = getattr(record.before, key), getattr(record.after, key)
            change = f"{gains[key]:+.1%}" if key.startswith("delta_") else f"{gains[key]:+.4f}"
            rows.append([key, f"{before:.4f}", f"{after:.4f}", change])
        print(tabulate(rows, headers=["metric", "vanilla", "treated", "improvement"], tablefmt="simple"))
        for warning in record.after.warnings:
            print(f"  ! {warning}")
        print(f"\n  Artifacts: {Path(record.weights_path).parent}  ({record.wall_clock_s:.1f}s)")
        print("=" * 60)


def write_encoded(out_dir: str | Path, schema: DatasetSchema, train: EncodedDataset, test: EncodedDataset) -> Path:
    """Write train.csv, test.csv and encoding.json for an ingested dataset."""
    out = create_run_dir(out_dir)
    for name, ds in (("train", train), ("test", test)):
        header, rows = encoded_rows(ds)
        locked_write_csv(out / f"{name}.csv", header, rows)
    stats = train.stats
    locked_write_json(
        out / "encoding.json",
        {
            "schema": schema.to_dict(),
            "feature_names": train.feature_names,
            "feature_sources": train.feature_sources,
            "means": stats.means if stats else {},
            "stds": stats.stds if stats else {},
            "categories": stats.categories if stats else {},
            "dropped_columns": stats.dropped_columns if stats else [],
            "dropped_rows": train.dropped_rows,
            "n_train": train.n,
            "n_test": test.n,
        },
    )
    logger.info("Encoded dataset written to %s (%d train / %d test)", out, train.n, test.n)
    return out
