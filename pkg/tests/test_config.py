"""Tests for fairweight.config: layered YAML configuration."""

import json

import pytest

from fairweight.config import build_config, config_to_dict, deep_merge, load_experiment, load_yaml, sweep_settings
from fairweight.errors import ConfigError
from fairweight.models import ModelKind, Stratify, UtilityMetric, Variant


class TestDeepMerge:
    def test_nested_override(self):
        base = {"a": {"x": 1, "y": 2}, "b": 3}
        merged = deep_merge(base, {"a": {"y": 5}})
        assert merged == {"a": {"x": 1, "y": 5}, "b": 3}
        assert base["a"]["y"] == 2

    def test_none_values_are_skipped(self):
        assert deep_merge({"a": {"x": 1}}, {"a": {"x": None}, "b": None}) == {"a": {"x": 1}}


class TestLoadYaml:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_yaml(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("a: [1, 2\n")
        with pytest.raises(ConfigError):
            load_yaml(path)

    def test_non_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_yaml(path)

    def test_json_is_accepted(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"diverse": {"lambda_f": 0.4}}))
        assert load_yaml(path) == {"diverse": {"lambda_f": 0.4}}


class TestLoadExperiment:
    def test_shipped_defaults(self):
        cfg = load_experiment()
        assert cfg.variant == Variant.DIVERSE
        assert cfg.model == ModelKind.LOGISTIC
        assert cfg.diverse.lambda_f == 0.8
        assert cfg.diverse.lambda_u == 0.0
        assert cfg.uniform.utility_metric == UtilityMetric.ACC
        assert cfg.uniform.fairness_metrics == ("dp", "fpr", "eodds", "err")
        assert cfg.split.stratify_on == Stratify.LABEL_SENSITIVE
        assert cfg.damping == pytest.approx(1e-3)

    def test_precedence_flags_over_file_over_defaults(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("diverse:\n  lambda_f: 0.4\n  lambda_u: 0.2\nexperiment:\n  seed: 9\n")
        cfg = load_experiment(path, {"diverse": {"lambda_f": 0.6, "lambda_u": None}})
        assert cfg.diverse.lambda_f == 0.6
        assert cfg.diverse.lambda_u == 0.2
        assert cfg.seed == 9
        assert cfg.uniform.tau == 0.05

    def test_mlp_uses_mlp_training_section(self):
        cfg = load_experiment(overrides={"experiment": {"model": "mlp"}})
        assert cfg.train.epochs == 50
        assert cfg.train.batch_size == 64
        assert cfg.train.hidden_sizes == (64, 32)

    def test_unknown_enum_value(self):
        with pytest.raises(ConfigError, match="experiment.variant"):
            build_config({"experiment": {"variant": "magic"}})

    def test_non_numeric_value(self):
        with pytest.raises(ConfigError):
            build_config({"diverse": {"lambda_f": "lots"}})

    def test_sweep_settings(self, tmp_path):
        path = tmp_path / "sweep.yaml"
        path.write_text("sweep:\n  lambda_u: 0.5\n")
        sweep = sweep_settings(path)
        assert sweep["lambda_u"] == 0.5
        assert sweep["lambda_f_grid"][0] == 0.0
        assert len(sweep["lambda_f_grid"]) == 11


class TestConfigToDict:
    def test_enums_become_values(self):
        doc = config_to_dict(load_experiment())
        assert doc["variant"] == "diverse"
        assert doc["uniform"]["utility_metric"] == "acc"
        assert doc["split"]["stratify_on"] == "label_sensitive"
        json.dumps(doc)
