"""Monodromy solving: populate a solution fibre by tracking around parameter loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ChambercutError, EvaluationError, PathFailure
from .tracking import (PathStatus, TrackerOptions, newton_iterate, same_point, track_many,
                       track_path)

log = logging.getLogger(__name__)


class ParameterFamily:
    """A square system F(x; q) with ``func(x, q) -> (F, J_x, J_q)``."""

    def __init__(self, func: Callable, m: int, ell: int, q0, batch_factory: Callable | None = None):
        self.func = func
        self.m = m
        self.ell = ell
        self.q0 = np.asarray(q0, dtype=complex)
        self._batch_factory = batch_factory

    def batch(self) -> Callable:
        """A fresh evaluator ``bf(X, Q, ids) -> (F, Jx, Jq, ok)`` for stacked points.

        Evaluators may keep per-id warm-start state, so callers should use
        one per tracking job.
        """
        if self._batch_factory is not None:
            return self._batch_factory()
        func = self.func

        def bf(X, Q, ids):
            B = len(X)
            F = np.full((B, self.m), np.nan + 0j)
            Jx = np.full((B, self.m, self.m), np.nan + 0j)
            Jq = np.full((B, self.m, self.ell), np.nan + 0j)
            ok = np.zeros(B, dtype=bool)
            for j in range(B):
                try:
                    F[j], Jx[j], Jq[j] = func(X[j], Q[j])
                    ok[j] = True
                except (EvaluationError, np.linalg.LinAlgError):
                    pass
            return F, Jx, Jq, ok
        return bf

    @classmethod
    def from_system(cls, system, q0):
        """Family from a PolynomialSystem whose first k variables are the parameters q."""
        comp = system.compiled()
        k = system.k

        def func(x, q):
            F, J = comp.evaluate(np.concatenate([q, x]), 1)
            return F, J[:, k:], J[:, :k]
        return cls(func, system.nvars - k, k, q0)

    def residual(self, x, q=None) -> float:
        F, _, _ = self.func(np.asarray(x, dtype=complex), self.q0 if q is None else q)
        return float(np.linalg.norm(F))

    def polish(self, x, q=None, tol: float = 1e-13, max_iter: int = 12):
        q = self.q0 if q is None else np.asarray(q, dtype=complex)

        def f(y):
            F, Jx, _ = self.func(y, q)
            return F, Jx
        x, _ = newton_iterate(f, np.asarray(x, dtype=complex), tol, max_iter)
        return x


class _SegmentHomotopy:
    """H(x, s) = F(x; path(1 - s)), tracked from s = 1 to 0."""

    def __init__(self, fam: ParameterFamily, path: Callable):
        self.fam = fam
        self.path = path

    def evaluate(self, x, s):
        q, dq = self.path(1.0 - s)
        F, Jx, Jq = self.fam.func(x, q)
        return F, Jx, -(Jq @ dq)


@dataclass
class Loop:
    """A closed path in parameter space through q0, made of smooth legs.

    Each leg maps tau in [0, 1] to (q, dq/dtau).
    """
    legs: list
    kind: str = "triangle"
    nodes: list = field(default_factory=list)

    @classmethod
    def triangle(cls, q0, q1, q2) -> "Loop":
        q0, q1, q2 = (np.asarray(q, dtype=complex) for q in (q0, q1, q2))

        def seg(a, b):
            return lambda tau: (a + tau * (b - a), b - a)
        return cls([seg(q0, q1), seg(q1, q2), seg(q2, q0)], "triangle", [q0, q1, q2])

    @classmethod
    def circle(cls, q0, coord: int, center: complex, radius: float, winding: int = 1) -> "Loop":
        """Coordinate ``coord`` runs over center + radius*exp(2 pi i w (1 - tau)).

        The base point is q0 with that coordinate equal to center + radius.
        """
        q0 = np.asarray(q0, dtype=complex).copy()
        q0[coord] = center + radius

        def leg(tau):
            q = q0.copy()
            ph = np.exp(2j * np.pi * winding * (1 - tau))
            q[coord] = center + radius * ph
            dq = np.zeros_like(q)
            dq[coord] = -2j * np.pi * winding * radius * ph
            return q, dq
        return cls([leg], "circle", [q0])

    @classmethod
    def random_triangle(cls, q0, rng: np.random.Generator, scale: float | None = None) -> "Loop":
        q0 = np.asarray(q0, dtype=complex)
        s = (np.linalg.norm(q0) + 1) if scale is None else scale
        n = len(q0)

        def node():
            return q0 + s * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        return cls.triangle(q0, node(), node())

    def reversed(self) -> "Loop":
        legs = [(lambda f: (lambda tau: (f(1 - tau)[0], -f(1 - tau)[1])))(f) for f in self.legs[::-1]]
        return Loop(legs, self.kind, self.nodes[::-1])


def track_segment(fam: ParameterFamily, path: Callable, x, opts: TrackerOptions | None = None):
    res = track_path(_SegmentHomotopy(fam, path), x, opts)
    if res.status is not PathStatus.SUCCESS:
        raise PathFailure(f"segment tracking ended with {res.status.value} at t={res.t_reached:.3g}")
    return res.endpoint


def _leg_values(leg, tau):
    out = [leg(float(u)) for u in tau]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def track_segments_many(fam: ParameterFamily, path: Callable, X, opts=None, bf=None, ids=None):
    """Track many points along parameter paths; ``path(tau, rows) -> (Q, dQ)`` per row.

    Returns ``(Y, ok, result)``.
    """
    X = np.asarray(X, dtype=complex)
    if len(X) == 0:
        return X, np.zeros(0, dtype=bool), None
    bf = bf or fam.batch()
    ids = np.arange(len(X)) if ids is None else np.asarray(ids)

    def evaluate(Y, s, rows):
        Q, dQ = path(1.0 - s, rows)
        F, Jx, Jq, ok = bf(Y, Q, ids[rows])
        return F, Jx, -np.einsum("bij,bj->bi", Jq, dQ), ok
    res = track_many(evaluate, X, opts)
    return res.endpoints, res.success_mask(), res


def polish_many(fam: ParameterFamily, X, bf, ids, q=None, tol: float = 1e-13, iters: int = 8):
    """Batched Newton at a fixed parameter; returns (X, ok)."""
    X = np.array(X, dtype=complex)
    q = fam.q0 if q is None else np.asarray(q, dtype=complex)
    B = len(X)
    ok = np.ones(B, dtype=bool)
    done = np.zeros(B, dtype=bool)
    Q = np.broadcast_to(q, (B, fam.ell))
    last = np.full(B, np.inf)
    for _ in range(iters):
        rows = np.flatnonzero(ok & ~done)
        if len(rows) == 0:
            break
        F, Jx, _, okk = bf(X[rows], Q[rows], ids[rows])
        with np.errstate(all="ignore"):
            try:
                d = np.linalg.solve(Jx, -F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                d = np.stack([np.linalg.lstsq(J, -f, rcond=None)[0] for J, f in zip(Jx, F)])
        okk &= np.isfinite(d).all(axis=1)
        ok[rows[~okk]] = False
        r = rows[okk]
        X[r] += d[okk]
        nd = np.sqrt(np.sum(np.abs(d[okk]) ** 2, axis=1)) / (1 + np.sqrt(np.sum(np.abs(X[r]) ** 2, axis=1)))
        last[r] = nd
        done[r[nd <= tol]] = True
    # at ill-conditioned points roundoff keeps the step above tol; accept noise-level steps
    return X, ok & (done | (last <= 1e-8))


def track_loop_many(fam: ParameterFamily, loop: Loop, X, opts: TrackerOptions | None = None):
    """Track many base solutions once around ``loop``; returns (Y, ok)."""
    X = np.asarray(X, dtype=complex)
    bf = fam.batch()
    ids = np.arange(len(X))
    alive = np.ones(len(X), dtype=bool)
    Y = X.copy()
    for leg in loop.legs:
        rows = np.flatnonzero(alive)
        if len(rows) == 0:
            break
        path = lambda tau, r, leg=leg: _leg_values(leg, tau)  # noqa: E731
        Z, ok, _ = track_segments_many(fam, path, Y[rows], opts, bf, ids[rows])
        Y[rows[ok]] = Z[ok]
        alive[rows[~ok]] = False
    rows = np.flatnonzero(alive)
    Z, ok = polish_many(fam, Y[rows], bf, ids[rows])
    Y[rows] = Z
    alive[rows[~ok]] = False
    return Y, alive


def track_loop(fam: ParameterFamily, loop: Loop, x, opts: TrackerOptions | None = None):
    """Track a solution at q0 once around ``loop``; raises PathFailure on failure."""
    x = np.asarray(x, dtype=complex)
    for leg in loop.legs:
        x = track_segment(fam, leg, x, opts)
    try:
        return fam.polish(x)
    except ChambercutError as exc:
        raise PathFailure(f"polish at base failed: {exc}") from exc


@dataclass
class MonodromyOptions:
    stall_limit: int = 10
    max_loops: int = 200
    target_count: int | None = None
    dedup_tol: float = 1e-6
    loop_scale: tuple = (1.0, 100.0)  # triangle size range, times 1 + |q0|
    tracker: TrackerOptions = field(default_factory=TrackerOptions)


@dataclass
class MonodromyResult:
    solutions: list
    loops: int = 0
    failed_loops: int = 0
    path_failures: int = 0
    paths: int = 0
    stalled_after: int = 0
    stabilized: bool = False
    residuals: list = field(default_factory=list)

    def stats(self) -> dict:
        return {"solutions": len(self.solutions), "loops": self.loops,
                "failed_loops": self.failed_loops, "path_failures": self.path_failures,
                "paths": self.paths, "stalled_after": self.stalled_after,
                "stabilized": self.stabilized}


def _index_of(x, pts, tol) -> int:
    for i, y in enumerate(pts):
        if same_point(x, y, tol):
            return i
    return -1


def _canonical(points):
    return sorted(points, key=lambda x: tuple(np.round(np.concatenate([x.real, x.imag]), 8)))


def monodromy_solve(fam: ParameterFamily, seeds, opts: MonodromyOptions | None = None,
                    rng: np.random.Generator | None = None,
                    loop_factory: Callable | None = None) -> MonodromyResult:
    """Grow a solution set at q0 from ``seeds`` with random triangle loops.

    Stops after ``stall_limit`` consecutive successful loops without a new
    solution, at ``target_count`` solutions, or after ``max_loops`` loops.
    A loop on which more than half of the paths failed does not count
    toward the stall.
    """
    opts = opts or MonodromyOptions()
    rng = rng if rng is not None else np.random.default_rng()
    if loop_factory is None:
        # branch points spread over many scales (gradients blow up near the
        # hypersurface), so triangle sizes are drawn log-uniformly
        base = float(np.linalg.norm(fam.q0)) + 1.0
        lo, hi = opts.loop_scale

        def loop_factory():
            return Loop.random_triangle(fam.q0, rng, base * np.exp(rng.uniform(np.log(lo), np.log(hi))))
    make_loop = loop_factory
    known: list[np.ndarray] = []
    for x in seeds:
        try:
            x = fam.polish(x)
        except ChambercutError:
            continue
        if _index_of(x, known, opts.dedup_tol) < 0:
            known.append(x)
    result = MonodromyResult(known)
    if not known:
        return result
    stall = 0
    while result.loops < opts.max_loops:
        if opts.target_count is not None and len(known) >= opts.target_count:
            break
        loop = make_loop()
        result.loops += 1
        new = 0
        failures = 0
        tracked = 0
        pending = list(range(len(known)))
        # newly found points are also pushed through the same loop
        while pending:
            Y, ok = track_loop_many(fam, loop, np.array([known[i] for i in pending]), opts.tracker)
            tracked += len(pending)
            failures += int(np.sum(~ok))
            start = len(known)
            for y in Y[ok]:
                if _index_of(y, known, opts.dedup_tol) < 0:
                    known.append(y)
                    new += 1
            pending = list(range(start, len(known)))
        result.paths += tracked
        result.path_failures += failures
        if failures * 2 > tracked:
            result.failed_loops += 1
        elif new:
            stall = 0
        else:
            stall += 1
        log.info("monodromy loop %d: %d known, %d new, %d failures, stall %d",
                 result.loops, len(known), new, failures, stall)
        if stall >= opts.stall_limit:
            result.stabilized = True
            break
    result.stalled_after = result.loops
    result.solutions = _canonical(known)
    result.residuals = [fam.residual(x) for x in result.solutions]
    return result


def permutation_of_loop(fam: ParameterFamily, loop: Loop, solutions,
                        opts: TrackerOptions | None = None, tol: float = 1e-6) -> dict:
    """Map solution index -> image index under one loop.

    Failed paths map to None; an endpoint far from every known solution maps
    to the string "unmatched" (the solution set is incomplete).
    """
    perm: dict = {}
    for i, x in enumerate(solutions):
        try:
            y = track_loop(fam, loop, x, opts)
        except (PathFailure, EvaluationError):
            perm[i] = None
            continue
        j = _index_of(y, solutions, tol)
        perm[i] = j if j >= 0 else "unmatched"
    return perm
