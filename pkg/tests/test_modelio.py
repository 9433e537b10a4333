import copy
import json
from pathlib import Path

import numpy as np
import pytest

from icr.catalog import compatible_pcgs, example_joint, gaussian_three_full
from icr.modelio import ModelFormatError, dump_model, load_model, model_to_dict, parse_model

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.mark.parametrize("model", [gaussian_three_full(), compatible_pcgs(example_joint())])
def test_round_trip(tmp_path, model):
    dump_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.family == model.family
    assert [v.name for v in back.variables] == [v.name for v in model.variables]
    for a, b in zip(model.conditionals, back.conditionals):
        assert (a.target, a.parents) == (b.target, b.parents)
        if model.family == "discrete":
            assert np.array_equal(a.table, b.table)
        else:
            assert np.array_equal(a.coef, b.coef)
            assert np.array_equal(a.cond_cov, b.cond_cov)


@pytest.mark.parametrize("path", sorted(MODELS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_models_load(path):
    assert load_model(path).L >= 2


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "family": "discrete",\n  "variables": [,]\n}\n')
    with pytest.raises(ModelFormatError, match=r"line 3, column \d+"):
        load_model(p)


def test_missing_file(tmp_path):
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "nope.json")


def base_doc():
    return model_to_dict(compatible_pcgs(example_joint()))


def test_unknown_variable():
    doc = base_doc()
    doc["conditionals"][0]["parents"] = ["X9"]
    with pytest.raises(ModelFormatError, match="unknown variable 'X9'"):
        parse_model(doc)


def test_family_mismatch():
    doc = base_doc()
    doc["family"] = "gaussian"
    with pytest.raises(ModelFormatError, match="requires continuous"):
        parse_model(doc)


def test_unknown_family():
    doc = base_doc()
    doc["family"] = "poisson"
    with pytest.raises(ModelFormatError, match="unknown family"):
        parse_model(doc)


def test_bad_table_shape():
    doc = base_doc()
    doc["conditionals"][0]["table"] = [0.5, 0.5]
    with pytest.raises(ModelFormatError, match=r"conditionals\[0\]"):
        parse_model(doc)


def test_missing_key():
    doc = base_doc()
    del doc["conditionals"]
    with pytest.raises(ModelFormatError, match="missing key 'conditionals'"):
        parse_model(doc)


def test_gaussian_intercept_defaults_to_zero():
    doc = model_to_dict(gaussian_three_full())
    doc = copy.deepcopy(doc)
    for c in doc["conditionals"]:
        del c["intercept"]
    model = parse_model(json.loads(json.dumps(doc)))
    assert all(np.array_equal(c.intercept, [0.0]) for c in model.conditionals)
