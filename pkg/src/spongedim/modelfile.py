"""Reading and writing the JSON model file (``schema: 1``).

Layout::

    {"schema": 1,
     "bases": [3, 2],                       # or "alphabets" + "factor_maps" + "gamma"
     "cells": {"kind": "independent", "p": {"0,0": 0.5, ...}},
     "law": {"kind": "lifted", "level": 2, "nu": {"0": 0.4, "1": 0.6}},   # optional
     "name": "free text"}                   # optional

Mixture laws use ``{"kind": "mixture", "atoms": [{"subset": [...], "prob": x}]}``.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ModelError
from .measures import WeightLaw
from .model import CellLaw, GammaVector, SpongeModel, build_euclidean_model, build_symbolic_model

__all__ = ["ModelSpec", "load_model", "parse_model", "model_to_json", "law_from_json"]

SCHEMA = 1
TOP_KEYS = {"schema", "name", "bases", "alphabets", "factor_maps", "gamma", "cells", "law"}
GAMMA_MATCH_TOL = 1e-12


@dataclass
class ModelSpec:
    model: SpongeModel
    law: WeightLaw | None
    name: str | None
    source: str


def _where(source: str, field: str) -> str:
    return f"{source}: field '{field}'"


def _strict(obj, allowed: set, source: str, field: str):
    if not isinstance(obj, dict):
        raise ModelError(f"{_where(source, field)} must be an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ModelError(f"{_where(source, field)} has unknown keys {extra}")


def _prob(x, source: str, field: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ModelError(f"{_where(source, field)} must be a number")
    x = float(x)
    if not math.isfinite(x):
        raise ModelError(f"{_where(source, field)} is not finite")
    return x


def _parse_cells(obj, source: str) -> CellLaw:
    _strict(obj, {"kind", "p", "atoms"}, source, "cells")
    kind = obj.get("kind")
    if kind == "independent":
        if "atoms" in obj or not isinstance(obj.get("p"), dict):
            raise ModelError(f"{_where(source, 'cells')} independent law needs a 'p' object only")
        p = {a: _prob(v, source, f"cells.p[{a}]") for a, v in obj["p"].items()}
        return CellLaw.independent(p)
    if kind == "mixture":
        if "p" in obj or not isinstance(obj.get("atoms"), list):
            raise ModelError(f"{_where(source, 'cells')} mixture law needs an 'atoms' list only")
        atoms = []
        for j, atom in enumerate(obj["atoms"]):
            fld = f"cells.atoms[{j}]"
            _strict(atom, {"subset", "prob"}, source, fld)
            if not isinstance(atom.get("subset"), list) or "prob" not in atom:
                raise ModelError(f"{_where(source, fld)} needs 'subset' (list) and 'prob'")
            atoms.append((atom["subset"], _prob(atom["prob"], source, fld + ".prob")))
        return CellLaw.mixture(atoms)
    raise ModelError(f"{_where(source, 'cells.kind')} must be 'independent' or 'mixture'")


def law_from_json(obj, source: str = "<law>") -> WeightLaw:
    _strict(obj, {"kind", "level", "nu", "v"}, source, "law")
    try:
        return WeightLaw(obj.get("kind"), obj.get("level"), obj.get("nu"), obj.get("v"))
    except ModelError as exc:
        raise ModelError(f"{_where(source, 'law')}: {exc}") from None


def parse_model(doc, source: str = "<model>") -> ModelSpec:
    """Validate a decoded model document and build the model."""
    _strict(doc, TOP_KEYS, source, "<root>")
    if doc.get("schema") != SCHEMA:
        raise ModelError(f"{_where(source, 'schema')} must be {SCHEMA}")
    if "cells" not in doc:
        raise ModelError(f"{_where(source, 'cells')} is required")
    cells = _parse_cells(doc["cells"], source)
    has_bases = "bases" in doc
    has_symbolic = "alphabets" in doc or "factor_maps" in doc
    if has_bases == has_symbolic:
        raise ModelError(f"{source}: give either 'bases' or 'alphabets' + 'factor_maps'")
    try:
        if has_bases:
            bases = doc["bases"]
            if not isinstance(bases, list) or not all(
                isinstance(m, int) and not isinstance(m, bool) for m in bases
            ):
                raise ModelError(f"{_where(source, 'bases')} must be a list of integers")
            model = build_euclidean_model(bases, cells)
            if "gamma" in doc:
                given = [_prob(g, source, "gamma") for g in doc["gamma"]]
                derived = GammaVector.from_bases(bases).values
                if len(given) != len(derived) or any(
                    abs(a - b) > GAMMA_MATCH_TOL for a, b in zip(given, derived)
                ):
                    raise ModelError(f"{_where(source, 'gamma')} disagrees with the bases")
        else:
            for key in ("alphabets", "factor_maps", "gamma"):
                if key not in doc:
                    raise ModelError(f"{_where(source, key)} is required for a symbolic model")
            gamma = [_prob(g, source, "gamma") for g in doc["gamma"]]
            model = build_symbolic_model(doc["alphabets"], doc["factor_maps"], gamma, cells)
    except ModelError as exc:
        if str(exc).startswith(source):
            raise
        raise ModelError(f"{source}: {exc}") from None
    except (TypeError, AttributeError) as exc:
        raise ModelError(f"{source}: malformed model ({exc})") from None
    law = law_from_json(doc["law"], source) if "law" in doc else None
    if law is not None:
        try:
            law.weights(model)
        except ModelError as exc:
            raise ModelError(f"{_where(source, 'law')}: {exc}") from None
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ModelError(f"{_where(source, 'name')} must be a string")
    return ModelSpec(model, law, name, source)


def load_model(path) -> ModelSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"{path}: cannot read model file ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON at line {exc.lineno} ({exc.msg})") from None
    return parse_model(doc, str(path))


def model_to_json(model: SpongeModel, law: WeightLaw | None = None, name: str | None = None) -> dict:
    """Symbolic serialisation that :func:`parse_model` reads back to an equal model."""
    chain = model.chain
    maps = [
        {a: chain.alphabets[i + 1][int(m[j])] for j, a in enumerate(chain.alphabets[i])}
        for i, m in enumerate(chain.maps)
    ]
    law_a = model.cells
    if law_a.kind == "independent":
        cells = {"kind": "independent", "p": dict(law_a.p)}
    else:
        cells = {
            "kind": "mixture",
            "atoms": [{"subset": sorted(s), "prob": p} for s, p in law_a.atoms],
        }
    doc = {
        "schema": SCHEMA,
        "alphabets": [list(a) for a in chain.alphabets],
        "factor_maps": maps,
        "gamma": [float(g) for g in model.gamma.values],
        "cells": cells,
    }
    if law is not None:
        doc["law"] = law.to_json()
    if name is not None:
        doc["name"] = name
    return doc
