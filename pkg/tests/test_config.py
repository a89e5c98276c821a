import json
import re

import pytest

from common import ConfigError, DataFormatError
from packages.config import load_run_config, parse_run_config
from packages.methods import parse_method, parse_methods


def test_bare_method_names_use_presets():
    ensemble = parse_method("ensemble")
    assert [m.label for m in ensemble.ensemble.members][:2] == ["neural-r24", "neural-r32"]
    assert len(ensemble.ensemble.members) == 8
    cpds = parse_method("cpds_ensemble")
    assert [m.label for m in cpds.ensemble.members] == ["cpd_s-r1", "cpd_s-r2", "cpd_s-r4"]
    assert parse_method("cpd").member.rank == 2
    assert parse_method("neural").member.rank == 24
    assert parse_method("gp").kernel.alpha > 0


def test_method_options_flow_into_specs():
    spec = parse_method({"name": "small", "kind": "ensemble", "train": {"epochs": 10},
                         "members": [{"kind": "cpd", "rank": 3}, {"kind": "neural", "rank": 4,
                                                                   "train": {"learning_rate": 0.1}}],
                         "forest": {"tree_count": 7}, "stacking": "kfold", "folds": 4})
    assert spec.name == "small"
    first, second = spec.ensemble.members
    assert first.rank == 3 and first.train.epochs == 10
    assert second.train.epochs == 10 and second.train.learning_rate == 0.1
    assert spec.ensemble.forest.tree_count == 7
    assert spec.ensemble.stacking == "kfold" and spec.ensemble.folds == 4


@pytest.mark.parametrize("data, where", [
    ({"kind": "ensemble", "forest": {"trees": 3}}, "methods.forest.trees"),
    ({"kind": "ensemble", "members": [{"kind": "cpd", "depth": 2}]}, "methods.members[0].depth"),
    ({"kind": "cpd", "train": {"lr": 0.1}}, "methods.train.lr"),
    ({"kind": "gp", "kernel": {"nu": 1.5}}, "methods.kernel.nu"),
    ({"kind": "gp", "members": []}, "methods.members"),
])
def test_unknown_fields_are_reported_by_dotted_path(data, where):
    with pytest.raises(ConfigError, match=re.escape(f"{where}: unknown field")):
        parse_method(data)


def test_invalid_methods_rejected():
    with pytest.raises(ConfigError, match="unknown method"):
        parse_method("tucker")
    with pytest.raises(ConfigError):
        parse_method({"kind": "cpd", "rank": 0})
    with pytest.raises(ConfigError, match="unique"):
        parse_methods(["cpd", "cpd"])
    with pytest.raises(ConfigError):
        parse_methods([])
    assert [m.name for m in parse_methods(["cpd", {"kind": "cpd", "name": "cpd-3", "rank": 3}])] == ["cpd", "cpd-3"]


def test_uniform_defaults():
    cfg = parse_run_config({"schema_version": 1}, "uniform")
    assert cfg.train_sizes == (40, 60, 80, 100)
    assert cfg.iterations == 5
    assert [m.name for m in cfg.methods] == ["ensemble", "gp"]
    assert cfg.dataset.synthetic.seed == cfg.seed == 0
    assert cfg.record_timings is False


def test_seed_override_reaches_synthetic_dataset():
    cfg = parse_run_config({"schema_version": 1, "seed": 3}, "uniform", seed_override=9)
    assert cfg.seed == 9
    assert cfg.dataset.synthetic.seed == 9
    pinned = parse_run_config({"schema_version": 1, "dataset": {"synthetic": {"seed": 4}}}, "uniform", 9)
    assert pinned.dataset.synthetic.seed == 4


def test_bias_options():
    cfg = parse_run_config({"schema_version": 1, "e_nums": [1, 10], "fix_quotas": True,
                            "quota_source": "reference"}, "bias")
    assert cfg.e_nums == (1, 10)
    assert cfg.fix_quotas and cfg.quota_source == "reference"
    with pytest.raises(ConfigError, match="e_nums"):
        parse_run_config({"schema_version": 1, "e_nums": [11]}, "bias")
    with pytest.raises(ConfigError, match="quota_source"):
        parse_run_config({"schema_version": 1, "quota_source": "table"}, "bias")


@pytest.mark.parametrize("data, command, message", [
    ({}, "uniform", "schema_version"),
    ({"schema_version": 2}, "generate", "schema_version"),
    ({"schema_version": 1, "e_nums": [1]}, "uniform", "e_nums: unknown field"),
    ({"schema_version": 1, "dataset": {"path": "x.csv"}}, "uniform", "dataset.path: unknown field"),
    ({"schema_version": 1, "dataset": {"csv": "a.csv", "synthetic": {}}}, "uniform", "exactly one"),
    ({"schema_version": 1, "synthetic": {"shape": [4, 27, 2]}}, "generate", "geometry"),
    ({"schema_version": 1, "train_sizes": []}, "uniform", "train_sizes"),
    ({"schema_version": 1, "iterations": 0}, "uniform", "iterations"),
    ({"schema_version": 1}, "train", "dataset"),
    ({"schema_version": 1}, "predict", "model"),
])
def test_run_config_errors(data, command, message):
    with pytest.raises(ConfigError, match=message):
        parse_run_config(data, command)


def test_train_and_predict_configs():
    cfg = parse_run_config({"schema_version": 1, "dataset": "truth.csv", "method": "cpd"}, "train")
    assert cfg.dataset.csv == "truth.csv"
    assert cfg.method.kind == "cpd"
    predict = parse_run_config({"schema_version": 1, "model": "model.json"}, "predict")
    assert predict.model == "model.json" and predict.dataset is None


def test_load_run_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(str(tmp_path / "missing.json"), "uniform")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(DataFormatError):
        load_run_config(str(bad), "uniform")
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"schema_version": 1, "iterations": 2}), encoding="utf-8")
    assert load_run_config(str(good), "uniform").iterations == 2
