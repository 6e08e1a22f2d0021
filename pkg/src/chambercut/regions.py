"""Region partition from routing points: flow connectivity, Euler characteristics,
membership queries, and root counts of a source system per region."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import PolynomialSystem
from .errors import ChambercutError, CountUnavailable, EvaluationError, RoutingError
from .flow import FlowOptions, FlowResult, gradient_flow
from .routing import RoutingFunction, RoutingPoint, make_routing_point
from .tracking import solve_total_degree

log = logging.getLogger(__name__)

DELTA_REL = 1e-4


def transitive_closure(A) -> np.ndarray:
    """Boolean (reflexive) transitive closure by Warshall's algorithm."""
    M = np.array(A, dtype=bool)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("adjacency must be square")
    M |= np.eye(len(M), dtype=bool)
    for k in range(len(M)):
        M |= np.outer(M[:, k], M[k, :])
    return M


def classes_of(M) -> list[list[int]]:
    """Connected components of a closed relation, ordered by smallest member."""
    M = np.asarray(M, dtype=bool)
    seen = np.zeros(len(M), dtype=bool)
    out = []
    for i in range(len(M)):
        if not seen[i]:
            members = np.flatnonzero(M[i])
            seen[members] = True
            out.append([int(j) for j in members])
    return out


@dataclass
class RegionPartition:
    adjacency: np.ndarray
    closure: np.ndarray
    classes: list

    @classmethod
    def from_adjacency(cls, A) -> "RegionPartition":
        A = np.array(A, dtype=bool)
        A = A | A.T | np.eye(len(A), dtype=bool)
        M = transitive_closure(A)
        return cls(A, M, classes_of(M))

    def class_of(self, i: int) -> int:
        for c, members in enumerate(self.classes):
            if i in members:
                return c
        raise IndexError(i)

    def __len__(self):
        return len(self.classes)


@dataclass
class FlowRecord:
    """One connectivity flow: from point ``source`` along ``sign`` * eigenvector ``direction``."""
    source: int
    direction: int
    sign: int
    status: str
    limit: int | None = None
    steps: int = 0
    reason: str = ""
    point: list | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConnectResult:
    partition: RegionPartition
    flows: list
    new_points: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [f for f in self.flows if f.status == "failure"]


def connect(rf: RoutingFunction, points: list[RoutingPoint], delta_rel: float = DELTA_REL,
            flow_opts: FlowOptions | None = None) -> ConnectResult:
    """Adjacency from ascent flows started at y +- delta*v for each unstable eigenvector v.

    Failed flows leave their edge out.  Limits that match no known point are
    returned in ``new_points`` (unpolished coordinates) for the caller.
    """
    n = len(points)
    A = np.eye(n, dtype=bool)
    known = [p.coords for p in points]
    flows, new = [], []
    for j, p in enumerate(points):
        delta = delta_rel * (1 + np.linalg.norm(p.coords))
        for d in np.flatnonzero(p.eigenvalues > 0):
            v = p.eigenvectors[:, d]
            for sign in (1, -1):
                res = gradient_flow(rf, p.coords + sign * delta * v, known, flow_opts)
                rec = FlowRecord(j, int(d), sign, res.status, res.limit, res.steps, res.reason,
                                 [float(c) for c in res.point])
                flows.append(rec)
                if res.status == "limit":
                    A[j, res.limit] = A[res.limit, j] = True
                elif res.status == "new":
                    new.append(res.point)
                elif res.status == "failure":
                    log.warning("flow from point %d (dir %d, %+d) failed: %s", j, d, sign, res.reason)
    return ConnectResult(RegionPartition.from_adjacency(A), flows, new)


def euler_characteristics(partition: RegionPartition, indices) -> list[int]:
    idx = list(indices)
    return [int(sum((-1) ** idx[i] for i in members)) for members in partition.classes]


def index_histogram(members, indices, k: int) -> list[int]:
    hist = [0] * (k + 1)
    for i in members:
        hist[indices[i]] += 1
    return hist


def sample_point(members, points: list[RoutingPoint]) -> int | None:
    """The index-0 member with the largest smallest |eigenvalue| (deepest interior)."""
    cands = [i for i in members if points[i].index == 0]
    if not cands:
        return None
    return max(cands, key=lambda i: float(np.min(np.abs(points[i].eigenvalues))))


def membership(rf: RoutingFunction, partition: RegionPartition, points: list[RoutingPoint],
               z, flow_opts: FlowOptions | None = None) -> tuple[int | None, FlowResult]:
    """Class of the region containing ``z`` (None when the flow fails or finds a new point)."""
    res = gradient_flow(rf, np.asarray(z, dtype=float), [p.coords for p in points], flow_opts)
    if res.status != "limit":
        return None, res
    return partition.class_of(res.limit), res


def region_root_count(G: PolynomialSystem, p, mode: str = "real", rng=None,
                      imag_tol: float = 1e-6, nonneg_tol: float = 1e-8) -> int:
    """Number of real (or real nonnegative) solutions z of G(p; z) = 0."""
    if mode not in ("real", "nonnegative"):
        raise ValueError(f"unknown mode {mode!r}")
    p = np.asarray(p, dtype=float)
    if len(p) != G.k:
        raise ValueError(f"sample has {len(p)} coordinates, expected {G.k}")
    values = dict(zip(G.param_names, p.tolist()))
    sub = PolynomialSystem([f.substitute(values) for f in G.polys], 0)
    if any(f.is_zero() or f.degree < 1 for f in sub.polys):
        raise CountUnavailable("the specialized system has a constant or zero equation")
    res = solve_total_degree(sub, rng=rng)
    if len(res.singular):
        raise CountUnavailable("singular solutions at the sample; it may lie on the discriminant "
                               "or the fibre is positive-dimensional")
    count = 0
    for z in res.solutions:
        if np.all(np.abs(z.imag) < imag_tol * (1 + np.linalg.norm(z))):
            if mode == "real" or np.all(z.real > -nonneg_tol):
                count += 1
    return count


@dataclass
class RegionClass:
    members: list
    histogram: list
    euler: int
    sample: int | None
    sample_coords: list | None
    root_count: int | None = None
    root_count_note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d) -> "RegionClass":
        return cls(**d)


@dataclass
class RegionReport:
    points: list
    partition: RegionPartition
    classes: list
    flows: list = field(default_factory=list)
    added_points: int = 0
    warnings: list = field(default_factory=list)

    @property
    def euler(self) -> list[int]:
        return [c.euler for c in self.classes]

    @property
    def sizes(self) -> list[int]:
        return [len(c.members) for c in self.classes]


def compute_regions(rf: RoutingFunction, points: list[RoutingPoint], delta_rel: float = DELTA_REL,
                    flow_opts: FlowOptions | None = None, reruns: int = 1) -> RegionReport:
    """Connect routing points into regions; new limit points trigger ``reruns`` re-runs."""
    points = list(points)
    added = 0
    warnings = []
    for attempt in range(reruns + 1):
        res = connect(rf, points, delta_rel, flow_opts)
        fresh = []
        for x in res.new_points:
            try:
                rp = make_routing_point(rf, x)
            except (RoutingError, ChambercutError, EvaluationError, np.linalg.LinAlgError) as exc:
                warnings.append(f"discarded flow limit {np.round(x, 6).tolist()}: {exc}")
                continue
            if all(np.linalg.norm(rp.coords - q.coords) > 1e-6 * (1 + np.linalg.norm(q.coords))
                   for q in points + fresh):
                fresh.append(rp)
        if not fresh or attempt == reruns:
            if fresh:
                warnings.append(f"{len(fresh)} new routing points after the final re-run were not added")
            break
        log.info("flows found %d new routing points; re-running connectivity", len(fresh))
        points = sorted(points + fresh, key=lambda q: tuple(np.round(q.coords, 8)))
        added += len(fresh)
    part = res.partition
    indices = [p.index for p in points]
    chis = euler_characteristics(part, indices)
    classes = []
    for members, chi in zip(part.classes, chis):
        s = sample_point(members, points)
        if s is None:
            warnings.append(f"class {members} has no index-0 routing point")
        classes.append(RegionClass(members, index_histogram(members, indices, rf.k), chi, s,
                                   None if s is None else [float(v) for v in points[s].coords]))
    if res.failures:
        warnings.append(f"{len(res.failures)} connectivity flows failed; their edges are omitted")
    return RegionReport(points, part, classes, res.flows, added, warnings)


def attach_root_counts(report: RegionReport, G: PolynomialSystem, mode: str = "real", rng=None):
    for c in report.classes:
        if c.sample_coords is None:
            c.root_count_note = "no sample point"
            continue
        try:
            c.root_count = region_root_count(G, c.sample_coords, mode, rng)
        except CountUnavailable as exc:
            c.root_count_note = f"count unavailable: {exc}"
        except ChambercutError as exc:
            c.root_count_note = f"solver failure: {exc}"
    return report
