"""JSON documents: instances, answers, densities and reports.

All arrays are in multiset rank order.  Floats are written with ``repr``
precision, so reading a file back reproduces every value bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .ensemble import DEFAULT_BUDGET, CanonicalSystem, PotentialSpec
from .errors import InputError
from .sampler import ChainConfig
from .solver import SolverConfig
from .space import StateSpace, SymmetricTable

__all__ = ["Instance", "load_instance", "instance_to_dict", "read_json", "write_json", "table_from_doc"]


@dataclass
class Instance:
    system: CanonicalSystem
    u: SymmetricTable | None = None
    target: SymmetricTable | None = None
    P: SymmetricTable | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    sampler: ChainConfig = field(default_factory=ChainConfig)
    seed: int = 0


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def write_json(path, doc: dict):
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    Path(path).write_text(text)


def table_from_doc(doc: dict, space: StateSpace, order: int | None = None) -> SymmetricTable:
    if not isinstance(doc, dict) or "values" not in doc:
        raise InputError("table entries need a 'values' array")
    k = int(doc.get("order", order if order is not None else 0))
    if order is not None and k != order:
        raise InputError(f"expected a table of order {order}, got {k}")
    return SymmetricTable(space, k, doc["values"])


def _table_doc(t: SymmetricTable) -> dict:
    return {"order": t.order, "values": [float(v) for v in t.values]}


def _parse_W(doc, space: StateSpace, N: int) -> PotentialSpec:
    if doc is None:
        return PotentialSpec()
    if isinstance(doc, dict):
        if "full" not in doc:
            raise InputError("W must be a list of {order, values} terms or {full: values}")
        return PotentialSpec(full_table=SymmetricTable(space, N, doc["full"]))
    return PotentialSpec(terms=tuple(table_from_doc(t, space) for t in doc))


def _W_doc(W: PotentialSpec):
    if W.full_table is not None and not W.terms:
        return {"full": [float(v) for v in W.full_table.values]}
    if W.full_table is not None:
        raise InputError("W mixing terms and a full table cannot be serialized")
    return [_table_doc(t) for t in W.terms]


def load_instance(path_or_doc) -> Instance:
    doc = path_or_doc if isinstance(path_or_doc, dict) else read_json(path_or_doc)
    try:
        sp = doc["space"]
        space = StateSpace(tuple(sp["weights"]))
        if int(sp.get("num_cells", space.num_cells)) != space.num_cells:
            raise InputError("space.num_cells disagrees with the weights array")
        N = int(doc["system"]["N"])
        m = int(doc["system"]["m"])
        budget = int(doc["system"].get("budget", DEFAULT_BUDGET))
    except (KeyError, TypeError) as exc:
        raise InputError(f"instance is missing a required field: {exc}") from exc
    W = _parse_W(doc.get("W"), space, N)
    system = CanonicalSystem(space, N, m, W, budget=budget)
    u = table_from_doc(doc["u"], space, m) if doc.get("u") is not None else None
    target = table_from_doc(doc["target"], space, m) if doc.get("target") is not None else None
    P = SymmetricTable(space, N, doc["P"]["values"]) if doc.get("P") is not None else None
    sdoc = dict(doc.get("solver") or {})
    seed = int(sdoc.pop("seed", 0))
    solver = SolverConfig(
        method=sdoc.get("method", "newton"),
        tol=float(sdoc.get("tol", 1e-10)),
        max_iters=None if sdoc.get("max_iters") is None else int(sdoc["max_iters"]),
        engine=sdoc.get("engine", "exact"),
    )
    cdoc = doc.get("sampler") or {}
    sampler = ChainConfig(**{k: int(v) for k, v in cdoc.items()})
    if solver.engine == "sampled":
        solver = replace(solver, sampler=sampler)
    return Instance(system, u, target, P, solver, sampler, seed)


def instance_to_dict(inst: Instance) -> dict:
    sys = inst.system
    doc = {
        "space": {"num_cells": sys.K, "weights": list(sys.space.weights)},
        "system": {"N": sys.N, "m": sys.m},
        "W": _W_doc(sys.W),
    }
    if sys.budget != DEFAULT_BUDGET:
        doc["system"]["budget"] = sys.budget
    if inst.u is not None:
        doc["u"] = _table_doc(inst.u)
    if inst.target is not None:
        doc["target"] = _table_doc(inst.target)
    if inst.P is not None:
        doc["P"] = {"values": [float(v) for v in inst.P.values]}
    doc["solver"] = {
        "method": inst.solver.method,
        "tol": inst.solver.tol,
        "max_iters": inst.solver.max_iters,
        "seed": inst.seed,
        "engine": inst.solver.engine,
    }
    doc["sampler"] = inst.sampler.to_dict()
    return doc
