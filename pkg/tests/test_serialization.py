import json

import numpy as np
import pytest

from common import DataFormatError
from packages.methods import fit_method, parse_method, predict_space
from packages.models.serialization import load_model, model_from_dict, model_to_dict, save_model
from packages.tensor.core import all_cells

QUICK = {"epochs": 40}

METHODS = [
    {"kind": "cpd", "rank": 2, "train": QUICK},
    {"kind": "cpd_s", "rank": 1, "train": QUICK},
    {"kind": "neural", "rank": 3, "hidden_sizes": [4], "train": QUICK},
    {"kind": "gp"},
    {"kind": "ensemble", "members": [{"kind": "cpd", "rank": 1}, {"kind": "neural", "rank": 2, "hidden_sizes": [3]}],
     "train": QUICK, "forest": {"tree_count": 5}},
]


@pytest.fixture(scope="module")
def train_obs(synthetic):
    obs, space = synthetic
    return obs.take(np.arange(0, len(obs), 3)), space


@pytest.mark.parametrize("data", METHODS, ids=lambda d: d["kind"])
def test_saved_model_predicts_bitwise_identically(tmp_path, train_obs, data):
    obs, space = train_obs
    fitted = fit_method(parse_method(data), obs, space, seed=5)
    path = str(tmp_path / "model.json")
    save_model(fitted, space, path)
    restored, restored_space = load_model(path)
    assert restored.kind == fitted.kind
    assert restored_space == space
    cells = all_cells(space.shape)
    np.testing.assert_array_equal(restored.predict_many(cells), fitted.predict_many(cells))
    np.testing.assert_array_equal(predict_space(restored).array, predict_space(fitted).array)


def test_model_document_layout(train_obs):
    obs, space = train_obs
    fitted = fit_method(parse_method({"kind": "cpd", "rank": 1, "train": QUICK}), obs, space, seed=0)
    doc = model_to_dict(fitted, space)
    assert doc["schema_version"] == 1
    assert doc["kind"] == "cpd"
    assert doc["shape"] == [5, 27, 2]
    json.dumps(doc)


def test_bad_artifacts_are_rejected(tmp_path, train_obs):
    obs, space = train_obs
    fitted = fit_method(parse_method({"kind": "cpd", "rank": 1, "train": QUICK}), obs, space, seed=0)
    doc = model_to_dict(fitted, space)
    with pytest.raises(DataFormatError, match="schema_version"):
        model_from_dict({**doc, "schema_version": 7})
    with pytest.raises(DataFormatError, match="kind"):
        model_from_dict({**doc, "kind": "tucker"})
    with pytest.raises(DataFormatError, match="shape"):
        model_from_dict({**doc, "shape": [5, 27, 3]})
    broken = tmp_path / "broken.json"
    broken.write_text('{"schema_version": 1', encoding="utf-8")
    with pytest.raises(DataFormatError):
        load_model(str(broken))
    with pytest.raises(DataFormatError, match="not found"):
        load_model(str(tmp_path / "missing.json"))
