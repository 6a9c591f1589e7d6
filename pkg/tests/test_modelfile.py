import json
from pathlib import Path

import numpy as np
import pytest

from _gen import gl_asym, random_model
from spongedim import ModelError, WeightLaw, hausdorff_dim_K, load_model, model_to_json, parse_model

MODELS = Path(__file__).resolve().parent.parent / "models"


def _doc(**extra):
    p = {f"{a},{b}": 0.5 for a in range(3) for b in range(2)}
    doc = {"schema": 1, "bases": [3, 2], "cells": {"kind": "independent", "p": p}}
    doc.update(extra)
    return doc


@pytest.mark.parametrize("name", ["mcmullen", "gl_half", "gl_asym", "percolation", "full_432"])
def test_bundled_models_load(name):
    spec = load_model(MODELS / f"{name}.json")
    assert spec.source.endswith(f"{name}.json")
    assert hausdorff_dim_K(spec.model).value > 0


def test_unknown_top_level_key():
    with pytest.raises(ModelError, match="unknown keys"):
        parse_model(_doc(colour="red"), "m.json")


def test_unknown_nested_key():
    doc = _doc()
    doc["cells"]["extra"] = 1
    with pytest.raises(ModelError, match="field 'cells'"):
        parse_model(doc, "m.json")


def test_schema_required():
    doc = _doc()
    del doc["schema"]
    with pytest.raises(ModelError, match="schema"):
        parse_model(doc)


def test_bases_and_alphabets_exclusive():
    with pytest.raises(ModelError):
        parse_model(_doc(alphabets=[["a"]], factor_maps=[]))


def test_gamma_must_agree_with_bases():
    with pytest.raises(ModelError, match="gamma"):
        parse_model(_doc(gamma=[0.9, 0.5]))
    ok = parse_model(_doc(gamma=[float(g) for g in gl_asym().gamma.values]))
    assert ok.model.k == 2


def test_probability_type_checked():
    doc = _doc()
    doc["cells"]["p"]["0,0"] = "half"
    with pytest.raises(ModelError, match=r"cells\.p\[0,0\]"):
        parse_model(doc)


def test_law_validated_against_model():
    with pytest.raises(ModelError, match="law"):
        parse_model(_doc(law={"kind": "lifted", "level": 3, "nu": {"0": 1.0}}))


def test_missing_file_message(tmp_path):
    with pytest.raises(ModelError, match="cannot read model file"):
        load_model(tmp_path / "nope.json")


def test_bad_json_message(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{ not json")
    with pytest.raises(ModelError, match="invalid JSON"):
        load_model(f)


@pytest.mark.parametrize("seed", range(8))
def test_round_trip_random(seed):
    m = random_model(np.random.default_rng(seed))
    law = WeightLaw.branching()
    doc = json.loads(json.dumps(model_to_json(m, law, name="r")))
    back = parse_model(doc)
    assert back.name == "r" and back.law.kind == "branching"
    assert back.model.chain.alphabets == m.chain.alphabets
    assert np.array_equal(back.model.gamma.values, m.gamma.values)
    assert hausdorff_dim_K(back.model).value == pytest.approx(hausdorff_dim_K(m).value, abs=1e-14)


def test_round_trip_mixture():
    spec = load_model(MODELS / "mcmullen.json")
    back = parse_model(model_to_json(spec.model))
    assert back.model.cells.kind == "mixture"
    assert hausdorff_dim_K(back.model).value == pytest.approx(hausdorff_dim_K(spec.model).value, abs=1e-14)
