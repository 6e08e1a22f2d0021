"""Versioned JSON report files ("chambercut/1")."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .regions import RegionClass, RegionPartition
from .routing import RoutingPoint

SCHEMA = "chambercut/1"


def _c(z) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(z, dtype=complex)]


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


@dataclass
class LoadedReport:
    """A report as read back from disk."""
    mode: str
    seed: int
    degH: int
    exponent: int
    center: np.ndarray
    points: list
    partition: RegionPartition
    classes: list
    complex_points: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    spec: dict = field(default_factory=dict)

    @property
    def euler(self) -> list[int]:
        return [c.euler for c in self.classes]


def run_to_dict(run) -> dict:
    """Serializable form of a pipeline.RegionRun."""
    rep = run.report
    rf = run.rf
    diag = {
        "critical": run.critical.stats,
        "rejected_points": run.rejected,
        "flows": [f.to_dict() for f in rep.flows],
        "flow_failures": len([f for f in rep.flows if f.status == "failure"]),
        "added_points": rep.added_points,
        "recentered": run.recentered,
        "warnings": list(run.warnings) + list(rep.warnings),
        "partial": run.partial,
    }
    if run.pws is not None:
        diag["witness"] = {"mult": run.pws.mult, "reduced": bool(run.pws.reduced),
                           "complete": run.pws.complete, "counts": run.pws.counts}
    return {
        "schema": SCHEMA,
        "mode": run.spec.mode,
        "seed": run.spec.seed,
        "spec": run.spec.to_dict(),
        "degH": int(rf.degH),
        "e": int(rf.exponent),
        "c": [float(v) for v in rf.center],
        "complex_critical_points": [_c(x) for x in run.critical.points],
        "routing_points": [p.to_dict() for p in rep.points],
        "adjacency": rep.partition.adjacency.astype(int).tolist(),
        "classes": [c.to_dict() for c in rep.classes],
        "euler": rep.euler,
        "diagnostics": diag,
    }


def dumps(d: dict) -> str:
    """Canonical formatting: sorted keys, fixed indentation, repr floats."""
    return json.dumps(d, sort_keys=True, indent=1, default=_plain) + "\n"


def loads(text: str) -> LoadedReport:
    return from_dict(json.loads(text))


def from_dict(d: dict) -> LoadedReport:
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {d.get('schema')!r}")
    points = [RoutingPoint.from_dict(p) for p in d["routing_points"]]
    part = RegionPartition.from_adjacency(np.array(d["adjacency"], dtype=bool).reshape(len(points), len(points)))
    classes = [RegionClass.from_dict(c) for c in d["classes"]]
    if [c.members for c in classes] != part.classes:
        raise ValueError("report classes are inconsistent with its adjacency matrix")
    cpts = [np.array([complex(a, b) for a, b in p]) for p in d.get("complex_critical_points", [])]
    return LoadedReport(d["mode"], int(d["seed"]), int(d["degH"]), int(d["e"]),
                        np.array(d["c"], dtype=float), points, part, classes, cpts,
                        d.get("diagnostics", {}), d.get("spec", {}))


def read(path) -> LoadedReport:
    with open(path) as fh:
        return loads(fh.read())
