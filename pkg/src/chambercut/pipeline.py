"""End-to-end pipelines: job specifications, witness caching, and the region computation."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import Polynomial, PolynomialSystem, build_discriminant_system, parse_polynomial
from .errors import ChambercutError, NonUniformClusters, RoutingError, WitnessSetError
from .fixtures import get_fixture
from .flow import FlowOptions
from .monodromy import MonodromyOptions
from .oracle import LineOracle
from .pwitness import PseudoWitnessSet, check_reduced, initial_pseudo_witness
from .regions import DELTA_REL, RegionReport, attach_root_counts, compute_regions
from .rng import SeedStreams
from .routing import (CriticalOptions, CriticalPointSet, ExplicitBackend, OracleBackend,
                      RoutingFunction, build_routing, classify_real, critical_points)

log = logging.getLogger(__name__)

MODES = ("explicit", "projection", "discriminant")


@dataclass
class JobSpec:
    """Input of a run.

    ``explicit``: ``polynomials = [h]`` in the parameters.
    ``projection``: ``polynomials`` is F(p, z), projected to the parameters.
    ``discriminant``: ``polynomials`` is a square system G(p; z); F = (G, det J_z G).
    """
    mode: str
    parameters: list
    polynomials: list
    variables: list = field(default_factory=list)
    extra_factors: list = field(default_factory=list)
    center: list | None = None
    exponent: int | None = None
    seed: int = 0
    center_scale: float = 1.0
    root_counts: str | None = None          # None, "real" or "nonnegative"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "explicit" and len(self.polynomials) != 1:
            raise ValueError("explicit mode takes exactly one polynomial h")
        if self.mode != "explicit" and not self.variables:
            raise ValueError(f"{self.mode} mode needs fibre variables")
        if self.root_counts not in (None, "real", "nonnegative"):
            raise ValueError("root_counts must be null, 'real' or 'nonnegative'")
        self.seed = int(self.seed)

    # -- construction -------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "JobSpec":
        d = dict(d)
        if "fixture" in d:
            base = cls.from_fixture(d.pop("fixture"), d.pop("mode", None)).to_dict()
            base.update(d)
            d = base
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown job-spec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "JobSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    @classmethod
    def from_fixture(cls, name: str, mode: str | None = None, seed: int = 0) -> "JobSpec":
        fx = get_fixture(name)
        if mode is None:
            mode = "discriminant" if fx.source is not None else "projection"
        params = list(fx.param_names)
        extra = [g.to_text() for g in fx.extra_factors]
        common = dict(extra_factors=extra, seed=seed,
                      center=None if fx.center is None else list(fx.center), exponent=fx.exponent)
        if mode == "explicit":
            if fx.explicit_h is None:
                raise ValueError(f"fixture {name!r} has no explicit polynomial")
            return cls("explicit", params, [fx.explicit_h.to_text()], **common)
        system = fx.source if mode == "discriminant" else fx.system
        if system is None:
            raise ValueError(f"fixture {name!r} has no {mode} system")
        return cls(mode, params, system.to_text(), list(system.fibre_names), **common)

    # -- derived objects ----------------------------------------------------
    @property
    def k(self) -> int:
        return len(self.parameters)

    def explicit_h(self) -> Polynomial:
        return parse_polynomial(self.polynomials[0], self.parameters)

    def source_system(self) -> PolynomialSystem | None:
        if self.mode != "discriminant":
            return None
        return PolynomialSystem.parse(self.polynomials, self.parameters + self.variables, self.k)

    def witness_system(self) -> PolynomialSystem:
        if self.mode == "explicit":
            raise ValueError("explicit mode has no witness system")
        if self.mode == "discriminant":
            return build_discriminant_system(self.source_system())
        return PolynomialSystem.parse(self.polynomials, self.parameters + self.variables, self.k)

    def extra(self) -> list[Polynomial]:
        return [parse_polynomial(t, self.parameters) for t in self.extra_factors]

    def critical_options(self) -> CriticalOptions:
        o = self.options
        mono = MonodromyOptions(stall_limit=int(o.get("stall_limit", 10)),
                                max_loops=int(o.get("max_loops", 200)))
        return CriticalOptions(n_scale_samples=int(o.get("n_scale_samples", 20)),
                               n_graph_seeds=int(o.get("n_graph_seeds", 12)),
                               n_flow_seeds=int(o.get("n_flow_seeds", 6)),
                               monodromy=mono)

    def flow_options(self) -> FlowOptions:
        return FlowOptions(max_steps=int(self.options.get("flow_max_steps", 5000)))


# ---------------------------------------------------------------------------
# Pseudo-witness sets with an on-disk cache
# ---------------------------------------------------------------------------

def cache_path(cache_dir, F: PolynomialSystem, seed: int) -> Path:
    return Path(cache_dir) / f"pws-{F.fingerprint()[:24]}-{seed}.json"


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def witness_set(F: PolynomialSystem, streams: SeedStreams, cache_dir=None,
                warnings: list | None = None) -> PseudoWitnessSet:
    """Build (or load from ``cache_dir``) the pseudo-witness set of F for this seed."""
    warnings = warnings if warnings is not None else []
    path = cache_path(cache_dir, F, streams.seed) if cache_dir else None
    if path is not None and path.exists():
        try:
            with open(path) as fh:
                data = json.load(fh)
            pws = PseudoWitnessSet.from_dict(data["witness"])
            if data.get("fingerprint") == F.fingerprint() and data.get("seed") == streams.seed \
                    and pws.system == F:
                return pws
            log.info("stale witness cache %s; recomputing", path)
        except (OSError, ValueError, KeyError, ChambercutError) as exc:
            log.info("unreadable witness cache %s (%s); recomputing", path, exc)
    rng = streams.generator("slice")
    try:
        pws = initial_pseudo_witness(F, rng=rng)
    except NonUniformClusters:
        pws = initial_pseudo_witness(F, rng=rng, strict_clusters=False)
        warnings.append("projection has components of different fibre degree; "
                        "working with the reduced part")
    if not pws.complete:
        warnings.append(f"{len(pws.discarded)} singular witness points dropped; "
                        "regions are those of the reduced part")
    if path is not None:
        atomic_write(path, json.dumps({"fingerprint": F.fingerprint(), "seed": streams.seed,
                                       "witness": pws.to_dict()}))
    return pws


# ---------------------------------------------------------------------------
# Region pipeline
# ---------------------------------------------------------------------------

@dataclass
class RegionRun:
    spec: JobSpec
    rf: RoutingFunction
    critical: CriticalPointSet
    report: RegionReport
    rejected: list
    pws: PseudoWitnessSet | None = None
    recentered: bool = False
    warnings: list = field(default_factory=list)

    @property
    def partial(self) -> bool:
        r = self.report
        return bool(r.warnings or self.critical.stats.get("endgame_failures", 0)
                    or any(c.sample is None for c in r.classes))


def make_routing(spec: JobSpec, streams: SeedStreams, pws=None, center=None) -> RoutingFunction:
    if spec.mode == "explicit":
        backend = ExplicitBackend(spec.explicit_h())
    else:
        backend = OracleBackend(LineOracle(pws, rng=streams.generator("direction")))
    c = center if center is not None else spec.center
    return build_routing(backend, c, spec.exponent, spec.extra(), streams.generator("center"),
                         spec.center_scale)


def run_critical(spec: JobSpec, rf: RoutingFunction, streams: SeedStreams, salt: str = ""):
    cps = critical_points(rf, streams.generator("sampling" + salt), spec.critical_options(),
                          loop_rng=streams.generator("loops" + salt))
    points, rejected = classify_real(cps.points, rf)
    return cps, points, rejected


def run_regions(spec: JobSpec, cache_dir=None) -> RegionRun:
    """Routing points, connectivity, Euler characteristics and optional root counts."""
    streams = SeedStreams(spec.seed)
    warnings: list = []
    pws = None
    if spec.mode != "explicit":
        pws = witness_set(spec.witness_system(), streams, cache_dir, warnings)
        ok, _ = check_reduced(pws, include_discarded=False)
        if not ok:
            raise WitnessSetError("the witness points fail the rank test; the projection is not "
                                  "generically reduced and no regular part is available")
    rf = make_routing(spec, streams, pws)
    cps, points, rejected = run_critical(spec, rf, streams)
    recentered = False
    if any("degenerate" in r["reason"] for r in rejected):
        # a degenerate routing point means the center is not generic: redraw once
        warnings.append(f"degenerate routing point for c={rf.center.tolist()}; re-centering")
        crng = streams.generator("recenter")
        c = rf.center + (1 + np.linalg.norm(rf.center)) * 1e-2 * crng.uniform(-1, 1, rf.k)
        rf = make_routing(spec, streams, pws, c)
        cps, points, rejected = run_critical(spec, rf, streams, "-recenter")
        recentered = True
        if any("degenerate" in r["reason"] for r in rejected):
            raise RoutingError(f"degenerate routing points persist after re-centering: {rejected}")
    if not points:
        raise RoutingError("no real routing points found")
    report = compute_regions(rf, points, float(spec.options.get("delta_rel", DELTA_REL)),
                             spec.flow_options())
    if spec.root_counts:
        G = spec.source_system()
        if G is None:
            warnings.append("root counts need a source system (discriminant mode)")
        else:
            attach_root_counts(report, G, spec.root_counts, streams.generator("gamma"))
    mult = cps.stats.get("complex_critical_points")
    log.info("%d complex critical points, %d routing points, %d regions",
             mult, len(report.points), len(report.classes))
    return RegionRun(spec, rf, cps, report, rejected, pws, recentered, warnings)
