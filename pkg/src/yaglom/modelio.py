"""JSON model documents and the bundled example models.

Schema (``type`` selects the family)::

    {"type": "polynomial",   "coeffs": [p0, p1, ..., pd]}
    {"type": "linfrac",      "p0": 0.6, "p": 0.3}
    {"type": "polynomial2d", "degrees": [d1, d2],
     "coeffs1": [...], "coeffs2": [...]}       # row-major (d1+1) x (d2+1) grids
    {"type": "linfrac2d",    "S": [[..], [..]], "c": [..], "b": [..], "d": 1.0}

Grid entry ``[h][k]`` is the probability of ``h`` type-1 and ``k`` type-2
children.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ModelError
from .genfun import LinearFractional, OffspringGF, Polynomial
from .multitype import BivariateOffspring, LinearFractional2D

__all__ = ["builtin_models", "is_bivariate", "load_model", "model_to_dict", "parse_model"]

Model = OffspringGF | BivariateOffspring
BUILTIN_PREFIX = "builtin:"


def builtin_models() -> list[str]:
    root = resources.files("yaglom") / "models"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _renormalized(values, renormalize):
    arr = np.asarray(values, dtype=float)
    return arr / arr.sum() if renormalize else arr


def _grid(doc, key, degrees, renormalize):
    flat = np.asarray(doc[key], dtype=float)
    shape = (degrees[0] + 1, degrees[1] + 1)
    if flat.ndim == 2:
        if flat.shape != shape:
            raise ModelError(f"{key} has shape {flat.shape}, expected {shape}")
        return _renormalized(flat, renormalize)
    if flat.size != shape[0] * shape[1]:
        raise ModelError(f"{key} has {flat.size} entries, expected {shape[0] * shape[1]}")
    return _renormalized(flat.reshape(shape), renormalize)


def parse_model(doc: dict, renormalize: bool = False) -> Model:
    """Build a model from a decoded JSON document."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ModelError("model document needs a 'type' field")
    kind = doc["type"]
    try:
        if kind == "polynomial":
            return Polynomial(_renormalized(doc["coeffs"], renormalize))
        if kind == "linfrac":
            return LinearFractional(float(doc["p0"]), float(doc["p"]))
        if kind == "polynomial2d":
            coeffs1 = np.asarray(doc["coeffs1"], dtype=float)
            degrees = doc.get("degrees")
            if degrees is None:
                if coeffs1.ndim != 2:
                    raise ModelError("flat coefficient lists need 'degrees': [d1, d2]")
                degrees = [coeffs1.shape[0] - 1, coeffs1.shape[1] - 1]
            degrees = [int(d) for d in degrees]
            return BivariateOffspring.polynomial(
                _grid(doc, "coeffs1", degrees, renormalize),
                _grid(doc, "coeffs2", degrees, renormalize),
            )
        if kind == "linfrac2d":
            return BivariateOffspring(LinearFractional2D(doc["S"], doc["c"], doc["b"], doc["d"]))
    except KeyError as exc:
        raise ModelError(f"model of type {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed {kind!r} model: {exc}") from None
    raise ModelError(f"unknown model type {kind!r}")


def load_model(source: str | Path, renormalize: bool = False) -> Model:
    """Load a model from a JSON file or ``builtin:<name>``."""
    source = str(source)
    if source.startswith(BUILTIN_PREFIX):
        name = source[len(BUILTIN_PREFIX):]
        path = resources.files("yaglom") / "models" / f"{name}.json"
        if not path.is_file():
            raise ConfigurationError(
                f"no builtin model {name!r}; available: {', '.join(builtin_models())}"
            )
        text = path.read_text()
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read model file {source!r}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON in {source!r}: {exc}") from None
    return parse_model(doc, renormalize)


def is_bivariate(model) -> bool:
    return isinstance(model, BivariateOffspring)


def model_to_dict(model: Model) -> dict:
    """Inverse of :func:`parse_model` for the shipped families."""
    if isinstance(model, Polynomial):
        return {"type": "polynomial", "coeffs": model.coeffs.tolist()}
    if isinstance(model, LinearFractional):
        return {"type": "linfrac", "p0": model.p0, "p": model.p}
    if isinstance(model, BivariateOffspring):
        if model.model is not None:
            m = model.model
            return {"type": "linfrac2d", "S": m.S.tolist(), "c": m.c.tolist(),
                    "b": m.b.tolist(), "d": m.d}
        c1, c2 = model.P1.coeffs, model.P2.coeffs
        if c1.shape != c2.shape:
            raise ModelError("serialization needs equal grid shapes")
        return {"type": "polynomial2d", "degrees": [c1.shape[0] - 1, c1.shape[1] - 1],
                "coeffs1": c1.ravel().tolist(), "coeffs2": c2.ravel().tolist()}
    raise ModelError(f"cannot serialize {type(model).__name__}")
