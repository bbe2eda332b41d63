"""JSON serialization for every domain type.

Complex numbers are two-element arrays [re, im] and matrices are nested
row arrays, so the schema is language neutral. Round trips preserve
values exactly (Python floats survive JSON unchanged); bit-exactness is
not promised but 1e-15 relative error certainly holds.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InvalidShapeError
from .jm import DeterministicResponse, ParentPOVM
from .linalg import matrix_from_json, matrix_to_json
from .objects import Channel, Effect, Filter, MeasurementAssemblage, QState
from .allowed_ops import AllowedOperation, Instrument


def state_to_json(s: QState) -> dict:
    return {"dim": s.dim, "mat": matrix_to_json(s.mat)}


def state_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> QState:
    return QState(int(doc["dim"]), matrix_from_json(doc["mat"], "state"), tol=tol)


def effect_to_json(e: Effect) -> dict:
    return {"dim": e.dim, "mat": matrix_to_json(e.mat)}


def effect_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> Effect:
    return Effect(int(doc["dim"]), matrix_from_json(doc["mat"], "effect"), tol=tol)


def channel_to_json(n: Channel) -> dict:
    return {
        "dim_in": n.dim_in,
        "dim_out": n.dim_out,
        "kraus": [matrix_to_json(k) for k in n.kraus_ops()],
    }


def channel_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> Channel:
    try:
        dim_in, dim_out = int(doc["dim_in"]), int(doc["dim_out"])
        kraus = tuple(matrix_from_json(k, "kraus") for k in doc["kraus"])
    except (KeyError, TypeError) as exc:
        raise InvalidShapeError(f"malformed channel JSON: {exc}") from exc
    choi = matrix_from_json(doc["choi"], "choi") if "choi" in doc else None
    return Channel(dim_in, dim_out, kraus=kraus, choi=choi,
                   name=doc.get("name", ""), tol=tol)


def filter_to_json(f: Filter) -> dict:
    return {"dim": f.dim, "kind": f.kind, "kraus": [matrix_to_json(k) for k in f.kraus]}


def filter_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> Filter:
    try:
        return Filter(
            int(doc["dim"]),
            tuple(matrix_from_json(k, "filter kraus") for k in doc["kraus"]),
            kind=doc.get("kind", "general"),
            name=doc.get("name", ""),
            tol=tol,
        )
    except (KeyError, TypeError) as exc:
        raise InvalidShapeError(f"malformed filter JSON: {exc}") from exc


def assemblage_to_json(e: MeasurementAssemblage) -> dict:
    return {
        "dim": e.dim,
        "settings": [[matrix_to_json(eff.mat) for eff in setting] for setting in e.settings],
    }


def assemblage_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> MeasurementAssemblage:
    try:
        dim = int(doc["dim"])
        settings = tuple(
            tuple(Effect(dim, matrix_from_json(m, "effect"), tol=tol) for m in setting)
            for setting in doc["settings"]
        )
    except (KeyError, TypeError) as exc:
        raise InvalidShapeError(f"malformed assemblage JSON: {exc}") from exc
    return MeasurementAssemblage(dim, settings, name=doc.get("name", ""), tol=tol)


def parent_to_json(p: ParentPOVM) -> dict:
    doc: dict[str, Any] = {"effects": [matrix_to_json(g) for g in p.effects]}
    if p.deterministic:
        doc["responses"] = {"kind": "deterministic",
                            "tables": [list(r.table) for r in p.responses]}
    else:
        doc["responses"] = {"kind": "stochastic",
                            "tables": [np.asarray(t, dtype=float).tolist() for t in p.responses]}
    return doc


def parent_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> ParentPOVM:
    effects = tuple(matrix_from_json(g, "parent effect") for g in doc["effects"])
    resp = doc["responses"]
    if resp["kind"] == "deterministic":
        responses = tuple(DeterministicResponse(tuple(int(a) for a in t)) for t in resp["tables"])
    else:
        responses = tuple(np.asarray(t, dtype=float) for t in resp["tables"])
    return ParentPOVM(effects, responses, tol=tol)


def bounds_to_json(b) -> dict:
    """RobustnessBounds as a flat JSON record."""
    return {
        "lower": b.lower,
        "upper": b.upper,
        "lower_method": b.lower_method,
        "upper_method": b.upper_method,
        "dim": b.dim,
        "upper_certified": b.upper_certified,
    }


def ia_report_to_json(rep) -> dict:
    """IaCertificateReport as JSON (certificates included when present)."""
    return {
        "conclusion": rep.conclusion,
        "caveat": rep.caveat,
        "channel": channel_to_json(rep.channel),
        "per_probe": [
            {
                "jm": v.jm,
                "margin": v.margin,
                "certificate": parent_to_json(v.certificate) if v.certificate else None,
            }
            for v in rep.per_probe
        ],
    }


def game_bound_to_json(gb) -> dict:
    return {
        "numerator": gb.numerator,
        "denominator": gb.denominator,
        "ratio_lb": gb.ratio_lb,
        "denominator_method": gb.denominator_method,
        "filter": filter_to_json(gb.filter),
    }


def ao_to_json(f: AllowedOperation) -> dict:
    return {
        "weights": list(f.weights),
        "instruments": [
            [[matrix_to_json(k) for k in branch.kraus] for branch in inst.branches]
            for inst in f.instruments
        ],
        "post_channels": [[channel_to_json(ch) for ch in posts] for posts in f.post_channels],
    }


def ao_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> AllowedOperation:
    try:
        instruments = []
        for inst in doc["instruments"]:
            mats = [[matrix_from_json(k, "filter kraus") for k in branch] for branch in inst]
            dims = [m[0].shape[0] for m in mats if m]
            if not dims:
                raise InvalidShapeError("instrument has only empty branches")
            branches = tuple(Filter(dims[0], tuple(m), tol=tol) for m in mats)
            instruments.append(Instrument(branches, tol=tol))
        posts = tuple(
            tuple(channel_from_json(ch, tol=tol) for ch in plist)
            for plist in doc["post_channels"]
        )
        return AllowedOperation(tuple(float(w) for w in doc["weights"]),
                                tuple(instruments), posts)
    except (KeyError, TypeError) as exc:
        raise InvalidShapeError(f"malformed allowed-operation JSON: {exc}") from exc
