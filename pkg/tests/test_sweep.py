"""Tests for fairweight.sweep."""

import math
from types import SimpleNamespace

import pytest

from fairweight.config import load_experiment
from fairweight.errors import ConfigError, Infeasible, RunExists
from fairweight.models import DiverseConfig, InfluenceRecord, MetricReport
from fairweight.pipeline import ExperimentRunner
from fairweight.sweep import TRADEOFF_COLUMNS, parse_grid, run_sweep, select_lambda_u, write_tradeoff_csv
from fairweight.synthetic import generate_synthetic, write_synthetic


def make_records(delta_if, total_if) -> list[InfluenceRecord]:
    return [
        InfluenceRecord.from_groups(i, (t + d) / 2.0, (t - d) / 2.0) for i, (d, t) in enumerate(zip(delta_if, total_if))
    ]


class RefusingRunner(ExperimentRunner):
    """Treats lambda_f = 1 as infeasible."""

    def run_point(self, prepared, out_dir, diverse=None):
        if diverse is not None and diverse.lambda_f == 1.0:
            raise Infeasible(1.0, diverse.lambda_u, 0.4)
        return super().run_point(prepared, out_dir, diverse)


@pytest.fixture
def config(tmp_path):
    csv = tmp_path / "synth.csv"
    schema = write_synthetic(generate_synthetic(beta=0.3, n=200, d=2, seed=1), csv)
    return load_experiment(
        overrides={"experiment": {"csv_path": str(csv), "schema_path": str(schema), "variant": "diverse"}}
    )


class TestParseGrid:
    def test_values(self):
        assert parse_grid("0, 0.5,1") == [0.0, 0.5, 1.0]

    def test_keeps_given_order(self):
        assert parse_grid("1,0,0.5") == [1.0, 0.0, 0.5]

    @pytest.mark.parametrize("text", ["", "a,b", "0.2,1.5", "0.1,0.2,0.1"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)


class TestSelectLambdaU:
    def test_largest_feasible_first(self):
        prepared = SimpleNamespace(records=make_records([-2.0, -1.0], [1.0, -1.0]))
        assert select_lambda_u(prepared, DiverseConfig(), 0.3, [0.0, 0.5, 1.0]) == 1.0

    def test_falls_back_to_smallest(self):
        prepared = SimpleNamespace(records=make_records([-2.0], [1.0]))
        assert select_lambda_u(prepared, DiverseConfig(), 0.5, [1.0, 0.2]) == 0.2


class TestRunSweep:
    def test_rows_in_grid_order(self, config, tmp_path):
        out = tmp_path / "sweep"
        result = run_sweep(config, [0.5, 0.0], out, lambda_u=0.0)
        assert [r["lambda_f"] for r in result.rows] == [0.5, 0.0]
        first = result.rows[1]
        assert first["status"] == "optimal"
        for key in MetricReport.KEYS:
            assert first[key] == getattr(result.vanilla, key)
        assert (out / "vanilla_metrics.json").exists()
        assert (out / "lambda_f_0.0000" / "weights.csv").exists()
        header = (out / "tradeoff.csv").read_text().splitlines()[0]
        assert header == ",".join(TRADEOFF_COLUMNS)

    def test_same_config_writes_identical_bytes(self, config, tmp_path):
        grid = [0.0, 0.4, 0.8]
        for name in ("first", "second"):
            run_sweep(config, grid, tmp_path / name, lambda_u=0.0)
        first, second = tmp_path / "first", tmp_path / "second"
        assert (first / "tradeoff.csv").read_bytes() == (second / "tradeoff.csv").read_bytes()
        for weights in sorted(first.glob("lambda_f_*/weights.csv")):
            assert weights.read_bytes() == (second / weights.relative_to(first)).read_bytes()
        assert any(first.glob("lambda_f_*/weights.csv"))

    def test_duplicate_grid_values_are_rejected(self, config, tmp_path):
        out = tmp_path / "sweep"
        with pytest.raises(ConfigError, match="repeats"):
            run_sweep(config, [0.5, 0.0, 0.5], out, lambda_u=0.0)
        assert not out.exists()

    def test_duplicate_lambda_u_grid_is_rejected(self, config, tmp_path):
        with pytest.raises(ConfigError, match="lambda_u_grid"):
            run_sweep(config, [0.0], tmp_path / "sweep", lambda_u_grid=[1.0, 1.0])

    def test_infeasible_points_are_kept(self, config, tmp_path):
        out = tmp_path / "sweep"
        result = run_sweep(config, [0.0, 1.0], out, lambda_u=0.0, runner=RefusingRunner(config))
        assert [r["status"] for r in result.rows] == ["optimal", "infeasible"]
        assert math.isnan(result.rows[1]["acc"])
        last = (out / "tradeoff.csv").read_text().splitlines()[-1]
        assert last.startswith("1,0,infeasible,,")

    def test_plots(self, config, tmp_path):
        result = run_sweep(config, [0.0, 0.2], tmp_path / "sweep", lambda_u=0.0, plots=True)
        assert len(result.plots) == 12
        assert all(p.suffix == ".svg" and p.exists() for p in result.plots)

    def test_lambda_u_grid(self, config, tmp_path):
        result = run_sweep(config, [0.0], tmp_path / "sweep", lambda_u_grid=[0.0, 1.0])
        assert result.lambda_u == 1.0
        assert result.rows[0]["lambda_u"] == 1.0

    def test_needs_diverse_variant(self, config, tmp_path):
        cfg = load_experiment(overrides={"experiment": {"csv_path": config.csv_path, "variant": "uniform"}})
        with pytest.raises(ConfigError):
            run_sweep(cfg, [0.0], tmp_path / "sweep")

    def test_existing_directory(self, config, tmp_path):
        (tmp_path / "sweep").mkdir()
        with pytest.raises(RunExists):
            run_sweep(config, [0.0], tmp_path / "sweep")


class TestTradeoffCsv:
    def test_nan_cells_are_empty(self, tmp_path):
        row = {col: math.nan for col in TRADEOFF_COLUMNS}
        row.update({"lambda_f": 0.5, "lambda_u": 1.0, "status": "infeasible", "run_dir": ""})
        write_tradeoff_csv(tmp_path / "t.csv", [row])
        assert (tmp_path / "t.csv").read_text().splitlines()[1] == "0.5,1,infeasible," + "," * len(MetricReport.KEYS)
