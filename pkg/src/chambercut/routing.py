"""Routing functions r = |h| * prod|g_i| / q^e and their critical points."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import Polynomial, PolynomialSystem
from .errors import (ChambercutError, EvaluationError, ExtraFactorZero,
                     PointOnHypersurface, RoutingError)
from .flow import FlowOptions, gradient_flow, polish_critical
from .monodromy import (MonodromyOptions, ParameterFamily, monodromy_solve, polish_many,
                        track_segments_many)
from .oracle import LineOracle
from .tracking import PathStatus, TrackerOptions, dedup_points

log = logging.getLogger(__name__)

REAL_TOL = 1e-6
DEGENERATE_RTOL = 1e-8


# ---------------------------------------------------------------------------
# Backends: derivatives of log h
# ---------------------------------------------------------------------------

class ExplicitBackend:
    """log|h| from a known polynomial h."""
    kind = "explicit"

    def __init__(self, h: Polynomial):
        self.h = h
        self.comp = PolynomialSystem([h]).compiled()
        self.degH = h.degree
        self.k = h.nvars
        self._scale = h.coefficient_scale()

    def _value(self, x):
        hv = complex(self.comp.values(x)[0])
        if abs(hv) < 1e-14 * self._scale * (1 + np.linalg.norm(x)) ** max(self.degH, 1):
            raise PointOnHypersurface("h vanishes at the query point")
        return hv

    def log_h_derivatives(self, x, order: int = 2):
        x = np.asarray(x)
        self._value(x)
        F, J, H = self.comp.evaluate(x, 2)
        hv, g = F[0], J[0]
        if not np.iscomplexobj(x) or np.all(np.imag(x) == 0):
            hv, g, H = hv.real, g.real, H.real
        grad = g / hv
        if order < 2:
            return grad, None
        return grad, H[0] / hv - np.outer(grad, grad)

    def log_h_value(self, x):
        hv = self._value(np.asarray(x))
        return float(np.log(abs(hv))), int(np.sign(hv.real))

    def batch(self):
        """Evaluator ``(X, ids, order) -> (grad, hess, ok)`` for stacked points."""
        def evaluate(X, ids, order=2):
            X = np.asarray(X, dtype=complex)
            F, J, H = self.comp.evaluate(X, 2)
            hv = F[:, 0]
            bound = 1e-14 * self._scale * (1 + np.sqrt(np.sum(np.abs(X) ** 2, axis=1))) ** max(self.degH, 1)
            ok = np.abs(hv) >= bound
            hv = np.where(ok, hv, 1.0)
            grad = J[:, 0] / hv[:, None]
            hess = H[:, 0] / hv[:, None, None] - grad[:, :, None] * grad[:, None, :]
            return grad, hess, ok
        return evaluate


class OracleBackend:
    """log|h| from a pseudo-witness set (values only up to a constant)."""
    kind = "oracle"

    def __init__(self, oracle: LineOracle):
        self.oracle = oracle
        self.degH = oracle.pws.degH
        self.k = oracle.k

    def log_h_derivatives(self, x, order: int = 2):
        v = self.oracle.evaluate(np.asarray(x), order)
        return v.grad, v.hess

    def log_h_value(self, x):
        return self.oracle.log_h_relative(np.asarray(x, dtype=float))

    def batch(self):
        return self.oracle.batch_session().evaluate


# ---------------------------------------------------------------------------
# Routing function
# ---------------------------------------------------------------------------

@dataclass
class RoutingFunction:
    backend: object
    center: np.ndarray
    exponent: int
    extra_factors: list = field(default_factory=list)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.k = len(self.center)
        self._extra = (PolynomialSystem(self.extra_factors).compiled()
                       if self.extra_factors else None)

    @property
    def degH(self) -> int:
        return self.backend.degH

    def _q(self, x):
        d = x - self.center
        return 1.0 + d @ d, d

    def _extra_terms(self, x, order):
        F, J, H = self._extra.evaluate(x, 2)
        if np.any(np.abs(F) < 1e-12):
            raise ExtraFactorZero("an extra factor vanishes at the query point")
        grad = (J / F[:, None]).sum(axis=0)
        if order < 2:
            return grad, None
        hess = (H / F[:, None, None]).sum(axis=0) - np.einsum("ij,ik->jk", J / F[:, None], J / F[:, None])
        return grad, hess

    def derivatives(self, x, order: int = 2):
        """Gradient and Hessian of log r (holomorphic extension for complex x)."""
        x = np.asarray(x)
        if not np.iscomplexobj(x):
            x = x.astype(float)
        g, H = self.backend.log_h_derivatives(x, order)
        q, d = self._q(x)
        e = self.exponent
        g = g - 2 * e * d / q
        if order >= 2:
            H = H + 4 * e * np.outer(d, d) / q ** 2 - (2 * e / q) * np.eye(self.k)
        if self._extra is not None:
            ge, He = self._extra_terms(x, order)
            g = g + ge
            if order >= 2:
                H = H + He
        return g, (H if order >= 2 else None)

    def batch(self):
        """Evaluator ``(X, ids) -> (grad, hess, ok)`` of log r at stacked complex points.

        ``ids`` name independent query streams; oracle backends warm-start
        each stream from its previous query.
        """
        backend = self.backend.batch()
        e, c, k = self.exponent, self.center, self.k

        def evaluate(X, ids, order=2):
            X = np.asarray(X, dtype=complex)
            g, H, ok = backend(X, ids, order)
            d = X - c
            q = 1.0 + np.sum(d * d, axis=1)
            g = g - 2 * e * d / q[:, None]
            H = (H + 4 * e * d[:, :, None] * d[:, None, :] / (q ** 2)[:, None, None]
                 - (2 * e / q)[:, None, None] * np.eye(k))
            if self._extra is not None:
                F, J, HH = self._extra.evaluate(X, 2)
                ok = ok & np.all(np.abs(F) >= 1e-12, axis=1)
                F = np.where(np.abs(F) >= 1e-12, F, 1.0)
                L = J / F[:, :, None]
                g = g + L.sum(axis=1)
                H = H + (HH / F[:, :, None, None]).sum(axis=1) - np.einsum("bij,bik->bjk", L, L)
            return g, H, ok
        return evaluate

    def gradient(self, x):
        return self.derivatives(x, 1)[0]

    def hessian(self, x):
        return self.derivatives(x, 2)[1]

    def log_value(self, x):
        """(relative log r, sign vector) at a real point."""
        x = np.asarray(x, dtype=float)
        val, sh = self.backend.log_h_value(x)
        q, _ = self._q(x)
        val -= self.exponent * np.log(q)
        signs = [sh]
        if self._extra is not None:
            F = self._extra.values(x).real
            if np.any(np.abs(F) < 1e-12):
                raise ExtraFactorZero("an extra factor vanishes at the query point")
            val += float(np.sum(np.log(np.abs(F))))
            signs += [int(s) for s in np.sign(F)]
        return float(val), tuple(signs)


def default_exponent(degH: int, extra_degrees=()) -> int:
    return (degH + sum(extra_degrees)) // 2 + 1


def build_routing(backend, c=None, e=None, extra_factors=(), rng=None,
                  scale: float = 1.0) -> RoutingFunction:
    extra = list(extra_factors)
    total = backend.degH + sum(g.degree for g in extra)
    if e is None:
        e = default_exponent(backend.degH, [g.degree for g in extra])
    if 2 * int(e) <= total:
        raise RoutingError(f"exponent e={e} must satisfy 2e > {total}")
    if c is None:
        rng = rng if rng is not None else np.random.default_rng()
        c = scale * rng.uniform(-1, 1, backend.k)
    c = np.asarray(c, dtype=float)
    if c.shape != (backend.k,) or not np.all(np.isfinite(c)):
        raise RoutingError("center must be a finite real vector of the parameter dimension")
    return RoutingFunction(backend, c, int(e), extra)


# ---------------------------------------------------------------------------
# Critical points
# ---------------------------------------------------------------------------

@dataclass
class CriticalOptions:
    n_scale_samples: int = 20
    n_graph_seeds: int = 12
    n_flow_seeds: int = 6
    sample_spread: float | None = None   # default 1 + |c|
    monodromy: MonodromyOptions = field(default_factory=MonodromyOptions)
    tracker: TrackerOptions = field(default_factory=lambda: TrackerOptions(
        max_steps=4000, divergence_bound=1e6))
    endgame_bound: float = 1e4           # times (1 + |c|)


@dataclass
class CriticalPointSet:
    points: list
    base_parameter: np.ndarray
    fibre_size: int
    stats: dict = field(default_factory=dict)


def _family(rf: RoutingFunction, q0) -> ParameterFamily:
    k = rf.k

    def func(x, q):
        g, H = rf.derivatives(x, 2)
        return g - q, H, -np.eye(k, dtype=complex)

    def factory():
        ev = rf.batch()

        def bf(X, Q, ids):
            g, H, ok = ev(X, ids, 2)
            return g - Q, H, np.broadcast_to(-np.eye(k, dtype=complex), H.shape), ok
        return bf
    return ParameterFamily(func, k, k, q0, factory)


def _sample_points(rf, count, rng, spread=None):
    s = (1 + np.linalg.norm(rf.center)) if spread is None else spread
    return [rf.center + s * rng.standard_normal(rf.k) for _ in range(count)]


def seed_start_solutions(rf: RoutingFunction, count: int, rng: np.random.Generator,
                         flow_count: int = 0, spread=None, flow_opts=None):
    """Pairs (x, q) with grad log r(x) = q: graph-trick samples plus ascent limits at q = 0."""
    out = []
    for x in _sample_points(rf, count, rng, spread):
        try:
            out.append((x.astype(complex), rf.gradient(x).astype(complex)))
        except EvaluationError:
            continue
    found = []
    for x in _sample_points(rf, flow_count, rng, spread):
        res = gradient_flow(rf, x, found, flow_opts or FlowOptions(max_steps=2000))
        if res.status == "new":
            found.append(res.point)
            out.append((res.point.astype(complex), np.zeros(rf.k, complex)))
    return out


def _colliding_rows(Y, ok, tol: float = 1e-6):
    rows = np.flatnonzero(ok)
    hit = set()
    for a in range(len(rows)):
        for b in range(a + 1, len(rows)):
            i, j = rows[a], rows[b]
            if np.linalg.norm(Y[i] - Y[j]) <= tol * (1 + np.linalg.norm(Y[i])):
                hit.update((int(i), int(j)))
    return np.array(sorted(hit), dtype=int)


def critical_points(rf: RoutingFunction, rng: np.random.Generator,
                    opts: CriticalOptions | None = None,
                    loop_rng: np.random.Generator | None = None) -> CriticalPointSet:
    """All complex solutions of grad log r = 0 reachable by the two-step homotopy.

    ``rng`` drives sampling, the base parameter and endgame detours;
    ``loop_rng`` (default: ``rng``) draws the monodromy loops.
    """
    opts = opts or CriticalOptions()
    k = rf.k
    norms = []
    for x in _sample_points(rf, opts.n_scale_samples, rng, opts.sample_spread):
        try:
            norms.append(np.linalg.norm(rf.gradient(x)))
        except EvaluationError:
            pass
    scale = float(np.median(norms)) if norms else 1.0
    q0 = scale * (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
    fam = _family(rf, q0)
    seeds = seed_start_solutions(rf, opts.n_graph_seeds, rng, opts.n_flow_seeds,
                                 opts.sample_spread)
    X = np.array([x for x, _ in seeds], dtype=complex).reshape(-1, k)
    Qs = np.array([q for _, q in seeds], dtype=complex).reshape(-1, k)

    def transport(tau, rows):
        a = Qs[rows]
        return a + tau[:, None] * (q0 - a), q0 - a
    Y, ok, _ = track_segments_many(fam, transport, X, opts.tracker)
    transport_failures = int(np.sum(~ok))
    starts = list(dedup_points(list(Y[ok]), 1e-6)) if ok.any() else []
    if not starts:
        raise RoutingError("no start solution reached the monodromy base fibre")
    mono = monodromy_solve(fam, starts, opts.monodromy, rng if loop_rng is None else loop_rng)
    if not mono.solutions:
        raise RoutingError("monodromy produced no solutions")
    end_opts = TrackerOptions(**{**opts.tracker.__dict__,
                                 "divergence_bound": opts.endgame_bound * (1 + np.linalg.norm(rf.center)),
                                 "endpoint_bound": opts.endgame_bound * (1 + np.linalg.norm(rf.center))})
    to_zero = lambda tau, rows: ((1 - tau)[:, None] * q0, np.broadcast_to(-q0, (len(tau), k)))  # noqa: E731
    S = np.array(mono.solutions, dtype=complex)
    bf = fam.batch()
    ids = np.arange(len(S))
    Y, ok, res = track_segments_many(fam, to_zero, S, end_opts, bf, ids)
    div = np.array([st is PathStatus.DIVERGED for st in res.status], dtype=bool)
    retry = np.flatnonzero(~ok & ~div)
    if len(retry):
        # detour through a random complex midpoint, away from the straight segment
        qm = 0.5 * q0 + 0.5 * np.linalg.norm(q0) * (rng.standard_normal(k) + 1j * rng.standard_normal(k))
        legs = [lambda tau, rows: (q0 + tau[:, None] * (qm - q0), np.broadcast_to(qm - q0, (len(tau), k))),
                lambda tau, rows: ((1 - tau)[:, None] * qm, np.broadcast_to(-qm, (len(tau), k)))]
        Z, okr = S[retry], np.ones(len(retry), dtype=bool)
        for leg in legs:
            rows = np.flatnonzero(okr)
            W, okl, _ = track_segments_many(fam, leg, Z[rows], end_opts, bf, ids[retry][rows])
            Z[rows] = W
            okr[rows[~okl]] = False
        Y[retry[okr]] = Z[okr]
        ok[retry[okr]] = True
    # coinciding regular endpoints betray path jumping: retrack them cautiously
    jumped = _colliding_rows(Y, ok)
    if len(jumped):
        careful = TrackerOptions(**{**end_opts.__dict__, "max_step": 0.01,
                                    "initial_step": min(0.01, end_opts.initial_step)})
        W, okj, _ = track_segments_many(fam, to_zero, S[jumped], careful, fam.batch(), ids[jumped])
        Y[jumped] = W
        ok[jumped] = okj
    # failures far out are paths to infinity whose evaluations broke down first
    far = np.sqrt(np.sum(np.abs(Y) ** 2, axis=1)) > np.sqrt(opts.endgame_bound) * (1 + np.linalg.norm(rf.center))
    div |= ~ok & far
    diverged = int(np.sum(div & ~ok))
    failed = int(np.sum(~ok)) - diverged
    rows = np.flatnonzero(ok)
    Z, okp = polish_many(fam, Y[rows], bf, ids[rows], np.zeros(k, complex))
    finite = []
    for y, good in zip(Z, okp):
        try:
            if not good:
                raise ChambercutError("polish did not converge")
            if np.linalg.norm(rf.gradient(y)) > 1e-8 * (1 + np.linalg.norm(y)):
                raise ChambercutError("residual too large")
        except (ChambercutError, np.linalg.LinAlgError):
            failed += 1
            continue
        finite.append(y)
    pts = dedup_points(finite, 1e-6)
    pts.sort(key=lambda x: tuple(np.round(np.concatenate([x.real, x.imag]), 8)))
    stats = {"q0": [[float(v.real), float(v.imag)] for v in q0], "gradient_scale": scale,
             "seeds": len(seeds), "transport_failures": transport_failures,
             "monodromy": mono.stats(), "endgame_failures": failed,
             "endgame_diverged": diverged, "complex_critical_points": len(pts)}
    return CriticalPointSet(pts, q0, len(mono.solutions), stats)


# ---------------------------------------------------------------------------
# Real routing points
# ---------------------------------------------------------------------------

@dataclass
class RoutingPoint:
    coords: np.ndarray
    index: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    value: float | None = None

    def to_dict(self) -> dict:
        return {"coords": [float(v) for v in self.coords], "index": int(self.index),
                "eigenvalues": [float(v) for v in self.eigenvalues],
                "eigenvectors": [[float(v) for v in row] for row in self.eigenvectors],
                "residual": float(self.residual),
                "value": None if self.value is None else float(self.value)}

    @classmethod
    def from_dict(cls, d: dict) -> "RoutingPoint":
        return cls(np.array(d["coords"], float), int(d["index"]),
                   np.array(d["eigenvalues"], float),
                   np.array(d["eigenvectors"], float).reshape(len(d["coords"]), -1),
                   float(d["residual"]), d.get("value"))


def make_routing_point(rf: RoutingFunction, x) -> RoutingPoint:
    """Polish a real critical point and compute its Hessian spectrum.

    Raises RoutingError for degenerate points or a residual above tolerance.
    """
    x = polish_critical(rf, np.asarray(x, dtype=float))
    g, H = rf.derivatives(x, 2)
    H = 0.5 * (H + H.T)
    res = float(np.linalg.norm(g))
    Hn = float(np.linalg.norm(H, 2))
    if res > 1e-10 * (1 + Hn) * (1 + np.linalg.norm(x)):
        raise RoutingError(f"residual {res:.2e} after polish")
    w, V = np.linalg.eigh(H)
    if np.min(np.abs(w)) < DEGENERATE_RTOL * Hn:
        raise RoutingError("degenerate critical point")
    try:
        value = rf.log_value(x)[0]
    except EvaluationError:
        value = None
    return RoutingPoint(x, int(np.sum(w > 0)), w, V, res, value)


def classify_real(points, rf: RoutingFunction, real_tol: float = REAL_TOL):
    """Keep the real critical points; returns (routing_points, rejected)."""
    out: list[RoutingPoint] = []
    rejected = []
    for x in points:
        x = np.asarray(x)
        if np.max(np.abs(np.imag(x))) >= real_tol * (1 + np.linalg.norm(x)):
            continue
        try:
            rp = make_routing_point(rf, np.real(x))
        except (RoutingError, ChambercutError, np.linalg.LinAlgError) as exc:
            rejected.append({"coords": [float(v) for v in np.real(x)], "reason": str(exc)})
            continue
        if any(np.linalg.norm(rp.coords - o.coords) <= 1e-6 * (1 + np.linalg.norm(o.coords))
               for o in out):
            continue
        out.append(rp)
    out.sort(key=lambda p: tuple(np.round(p.coords, 8)))
    return out, rejected


def distinct_values_warning(points: list[RoutingPoint], tol: float = 1e-8) -> list:
    """Pairs of routing points whose relative log r values coincide."""
    vals = [(i, p.value) for i, p in enumerate(points) if p.value is not None]
    bad = []
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            i, vi = vals[a]
            j, vj = vals[b]
            if abs(vi - vj) <= tol * (1 + abs(vi)):
                bad.append((i, j))
    return bad
