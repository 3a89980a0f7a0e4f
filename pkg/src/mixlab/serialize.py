"""Canonical serialization: JSON with stable float formatting, CSV exports.

Every artifact the lab writes must be byte-identical across runs with the
same inputs, so this module owns the one true formatting policy: map keys
sorted, floats at 17 significant digits (round-trip exact for doubles),
infinities and NaN spelled as the tokens the stdlib json parser accepts.
"""

from __future__ import annotations

import hashlib
import json
import math
import numbers
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .measures import FiniteMeasure, MixtureModel, StateSpace


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == 0.0:  # normalize -0.0
        return "0"
    return format(x, ".17g")


def _canon(obj, out: list) -> None:
    if obj is None or isinstance(obj, bool):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, numbers.Real):
        out.append(format_float(float(obj)))
    elif isinstance(obj, np.ndarray):
        _canon(obj.tolist(), out)
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(",")
            _canon(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise ConfigurationError(f"non-string key {key!r} in serialized object")
            if k:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _canon(obj[key], out)
        out.append("}")
    else:
        raise ConfigurationError(f"cannot serialize object of type {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON encoding: sorted keys, 17-digit floats, no spaces."""
    out: list = []
    _canon(obj, out)
    return "".join(out)


def digest(obj) -> str:
    """Short stable identifier of an object's canonical encoding."""
    return hashlib.sha256(canonical_json(obj).encode("ascii")).hexdigest()[:16]


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj) + "\n", encoding="ascii")


def read_json(path):
    # json.loads accepts the Infinity / NaN tokens emitted above
    return json.loads(Path(path).read_text(encoding="ascii"))


# ---------------------------------------------------------------------------
# domain objects <-> plain dicts


def space_to_dict(space: StateSpace) -> dict:
    doc: dict = {"size": space.size}
    if space.labels is not None:
        doc["labels"] = list(space.labels)
    if space.coords is not None:
        doc["coords"] = space.coords
    if space.metric is not None:
        doc["metric"] = space.metric
    return doc


def space_from_dict(doc: dict) -> StateSpace:
    return StateSpace(
        size=int(doc["size"]),
        labels=tuple(doc["labels"]) if "labels" in doc else None,
        coords=np.asarray(doc["coords"], dtype=float) if "coords" in doc else None,
        metric=np.asarray(doc["metric"], dtype=float) if "metric" in doc else None,
    )


def measure_to_dict(mu: FiniteMeasure) -> dict:
    return {"space": space_to_dict(mu.space), "mass": mu.mass}


def measure_from_dict(doc: dict, space: StateSpace | None = None) -> FiniteMeasure:
    if space is None:
        space = space_from_dict(doc["space"])
    return FiniteMeasure(space, np.asarray(doc["mass"], dtype=float))


def mixture_to_dict(mix: MixtureModel) -> dict:
    return {
        "space": space_to_dict(mix.space),
        "weights": mix.weights.mass,
        "components": [comp.mass for comp in mix.components],
    }


def mixture_from_dict(doc: dict) -> MixtureModel:
    space = space_from_dict(doc["space"])
    comps = [FiniteMeasure(space, np.asarray(row, dtype=float)) for row in doc["components"]]
    return MixtureModel.from_components(comps, np.asarray(doc["weights"], dtype=float))


def generator_to_dict(gen) -> dict:
    doc = {
        "space": space_to_dict(gen.space),
        "rates": gen.rates,
        "stationary": gen.stationary.mass,
    }
    if gen.notes:
        doc["notes"] = list(gen.notes)
    return doc


def generator_from_dict(doc: dict):
    from .dirichlet import ReversibleGenerator

    space = space_from_dict(doc["space"])
    stationary = None
    if "stationary" in doc:
        stationary = FiniteMeasure(space, np.asarray(doc["stationary"], dtype=float))
    return ReversibleGenerator.from_rates(
        space, np.asarray(doc["rates"], dtype=float), stationary=stationary
    )


def generator_mixture_to_dict(gm) -> dict:
    return {
        "mixture": mixture_to_dict(gm.mix),
        "parent_rates": gm.parent_generator.rates,
        "component_rates": [g.rates for g in gm.component_generators],
    }


# ---------------------------------------------------------------------------
# CSV writers (plain, no quoting needed: numeric columns plus simple names)


def _csv_row(values) -> str:
    cells = []
    for v in values:
        if isinstance(v, str):
            cells.append(v)
        elif isinstance(v, (bool, np.bool_)):
            cells.append("true" if v else "false")
        elif isinstance(v, (int, np.integer)):
            cells.append(str(int(v)))
        else:
            cells.append(format_float(v))
    return ",".join(cells)


def write_csv(path, header, rows, *, preamble: str | None = None) -> None:
    lines = []
    if preamble:
        lines.append("# " + preamble)
    lines.append(",".join(header))
    lines.extend(_csv_row(row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def conductances_to_csv(path, cond, *, preamble: str | None = None) -> None:
    """Sparse triple list (x, y, c) of the upper-triangular conducting edges."""
    c = cond.matrix
    xs, ys = np.nonzero(np.triu(c, 1))
    rows = [(int(x), int(y), c[x, y]) for x, y in zip(xs, ys)]
    write_csv(path, ("x", "y", "c"), rows, preamble=preamble)


def coupling_to_csv(path, coupling, *, preamble: str | None = None) -> None:
    g = coupling.matrix
    xs, ys = np.nonzero(g)
    rows = [(int(x), int(y), g[x, y]) for x, y in zip(xs, ys)]
    write_csv(path, ("x", "y", "mass"), rows, preamble=preamble)


def potentials_to_csv(path, f, g, *, preamble: str | None = None) -> None:
    rows = [(i, fv, gv) for i, (fv, gv) in enumerate(zip(f, g))]
    write_csv(path, ("state", "f", "g"), rows, preamble=preamble)
