"""Predictor-corrector path tracking.

A homotopy is any object with a ``dim`` attribute and an
``evaluate(x, t) -> (H, J_x H, J_t H)`` method.  Paths run from t = 1 to
t = 0: RK4 on the Davidenko equation as predictor, Newton on H(., t) as
corrector, step halving on corrector failure and growth after consecutive
easy steps.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .algebra import Polynomial, PolynomialSystem
from .errors import (ChambercutError, EvaluationError, NoConvergence, NonSquareSystem,
                     PathFailure, SingularJacobian)

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class Homotopy(Protocol):
    dim: int

    def evaluate(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...


@dataclass
class TrackerOptions:
    initial_step: float = 0.05
    min_step: float = 1e-12
    max_step: float = 0.25
    corrector_tol: float = 1e-10
    residual_tol: float = 1e-8
    max_corrector_iters: int = 3
    max_steps: int = 20000
    growth: float = 1.5
    easy_steps: int = 3
    endgame_start: float = 0.05
    endgame_shrink: float = 0.5
    divergence_bound: float = 1e8
    singular_cond: float = 1e10
    endpoint_bound: float = 1e4     # singular "endpoints" beyond this norm are paths to infinity

    def __post_init__(self):
        if not 0 < self.min_step <= self.initial_step <= 1:
            raise ValueError("need 0 < min_step <= initial_step <= 1")
        if self.corrector_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be positive")


class PathStatus(str, enum.Enum):
    SUCCESS = "success"
    DIVERGED = "diverged"
    SINGULAR_ENDPOINT = "singular_endpoint"
    STEP_FAILURE = "step_failure"


@dataclass
class PathResult:
    status: PathStatus
    endpoint: np.ndarray
    t_reached: float
    steps: int
    residual: float
    min_singular_value: float = float("nan")
    cond: float = float("nan")

    @property
    def success(self) -> bool:
        return self.status is PathStatus.SUCCESS


def _solve(J: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(J, b)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from exc


def _velocity(h: Homotopy, x, t):
    _, Jx, Jt = h.evaluate(x, t)
    return -_solve(Jx, Jt)


def _rk4(h: Homotopy, x, t, dt):
    """One classical RK4 step of the Davidenko equation from t to t - dt."""
    step = -dt
    k1 = _velocity(h, x, t)
    k2 = _velocity(h, x + 0.5 * step * k1, t + 0.5 * step)
    k3 = _velocity(h, x + 0.5 * step * k2, t + 0.5 * step)
    k4 = _velocity(h, x + step * k3, t + step)
    return x + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def _correct(h: Homotopy, x, t, opts: TrackerOptions, displacement: float):
    prev = None
    for it in range(opts.max_corrector_iters):
        H, Jx, _ = h.evaluate(x, t)
        dx = _solve(Jx, -H)
        x = x + dx
        nd = np.linalg.norm(dx)
        tol = opts.corrector_tol * (1 + np.linalg.norm(x))
        if it == 0 and nd > 0.5 * displacement + 10 * tol:
            raise NoConvergence("corrector moved further than the predictor")
        if nd <= tol:
            return x, it + 1, Jx
        if prev is not None and nd > 0.5 * prev:
            raise NoConvergence("corrector not contracting")
        prev = nd
    raise NoConvergence("corrector iteration limit")


def _conditioning(J: np.ndarray) -> tuple[float, float]:
    sv = np.linalg.svd(J, compute_uv=False)
    smin = float(sv[-1])
    return smin, (float(sv[0] / smin) if smin > 0 else float("inf"))


def track_path(h: Homotopy, start, opts: TrackerOptions | None = None) -> PathResult:
    """Track the solution path of ``h`` through ``start`` from t = 1 to t = 0."""
    opts = opts or TrackerOptions()
    x = np.array(start, dtype=complex)
    t = 1.0
    steps = 0
    try:
        H, Jx, _ = h.evaluate(x, t)
        if np.linalg.norm(H) > opts.residual_tol * (1 + np.linalg.norm(x)):
            x, _, Jx = _correct(h, x, t, opts, np.inf)
    except (ChambercutError, np.linalg.LinAlgError):
        return PathResult(PathStatus.STEP_FAILURE, x, t, 0, float("inf"))
    _, cond = _conditioning(Jx)
    if cond > 1.0 / (100 * _EPS):
        return PathResult(PathStatus.STEP_FAILURE, x, t, 0, float("nan"), cond=cond)

    dt = opts.initial_step
    easy = 0
    last_J = Jx
    while t > 0:
        if steps >= opts.max_steps:
            return _finish_failure(h, x, t, steps, opts)
        dt = min(dt, t, opts.max_step)
        if t < opts.endgame_start:
            _, cond = _conditioning(last_J)
            if cond > 1e8:
                dt = min(dt, (1 - opts.endgame_shrink) * t) if t > 1e-14 else t
        try:
            x_pred = _rk4(h, x, t, dt)
            x_new, iters, last_J = _correct(
                h, x_pred, t - dt, opts, np.linalg.norm(x_pred - x))
        except (EvaluationError, SingularJacobian, NoConvergence, FloatingPointError):
            dt *= 0.5
            easy = 0
            if dt < opts.min_step:
                return _finish_failure(h, x, t, steps, opts)
            continue
        if not np.all(np.isfinite(x_new)):
            dt *= 0.5
            if dt < opts.min_step:
                return _finish_failure(h, x, t, steps, opts)
            continue
        t = t - dt if dt < t else 0.0
        x = x_new
        steps += 1
        if np.linalg.norm(x) > opts.divergence_bound:
            return PathResult(PathStatus.DIVERGED, x, t, steps, float("nan"))
        if iters <= 2:
            easy += 1
            if easy >= opts.easy_steps:
                dt *= opts.growth
                easy = 0
        else:
            easy = 0

    return _finish_at_zero(h, x, steps, opts)


def _finish_at_zero(h: Homotopy, x, steps, opts: TrackerOptions) -> PathResult:
    converged = False
    for _ in range(6):
        try:
            H, Jx, _ = h.evaluate(x, 0.0)
            dx = _solve(Jx, -H)
        except (ChambercutError, np.linalg.LinAlgError):
            break
        x = x + dx
        if np.linalg.norm(dx) <= 1e-12 * (1 + np.linalg.norm(x)):
            converged = True
            break
    try:
        H, Jx, _ = h.evaluate(x, 0.0)
    except ChambercutError:
        return PathResult(PathStatus.STEP_FAILURE, x, 0.0, steps, float("inf"))
    res = float(np.linalg.norm(H))
    smin, cond = _conditioning(Jx)
    if cond > opts.singular_cond:
        status = (PathStatus.DIVERGED if np.linalg.norm(x) > opts.endpoint_bound
                  else PathStatus.SINGULAR_ENDPOINT)
    elif res < opts.residual_tol or converged:
        # Newton convergence is the scale-free test; the residual is absolute
        status = PathStatus.SUCCESS
    else:
        status = PathStatus.STEP_FAILURE
    return PathResult(status, x, 0.0, steps, res, smin, cond)


def _finish_failure(h: Homotopy, x, t, steps, opts: TrackerOptions) -> PathResult:
    status = PathStatus.STEP_FAILURE
    smin, cond = float("nan"), float("nan")
    res = float("nan")
    try:
        H, Jx, _ = h.evaluate(x, t)
        res = float(np.linalg.norm(H))
        smin, cond = _conditioning(Jx)
        if t < opts.endgame_start and cond > 1e8:
            status = PathStatus.SINGULAR_ENDPOINT
        elif t < 1e-8:
            # stalled just short of t = 0: a singular endpoint if x nearly solves the target
            H0, _, _ = h.evaluate(x, 0.0)
            if np.linalg.norm(H0) < 1e-6 * (1 + np.linalg.norm(x)):
                status = PathStatus.SINGULAR_ENDPOINT
    except ChambercutError:
        pass
    if status is PathStatus.SINGULAR_ENDPOINT and np.linalg.norm(x) > opts.endpoint_bound:
        status = PathStatus.DIVERGED
    return PathResult(status, x, t, steps, res, smin, cond)


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

def newton_iterate(func: Callable, x0, tol: float = 1e-12, max_iter: int = 20):
    """Newton's method; returns ``(x, iterations)``.

    ``func(x)`` returns ``(F, J)``.  Convergence is declared when the Newton
    update drops below ``tol * (1 + |x|)``.  Linear (non-quadratic) behaviour
    raises :class:`NoConvergence`, which is how multiple roots surface.
    """
    x = np.array(x0, dtype=np.result_type(np.asarray(x0).dtype, float))
    prev = None
    slow = 0
    for it in range(max_iter + 1):
        F, J = func(x)
        dx = _solve(np.atleast_2d(J), -np.atleast_1d(F)).reshape(x.shape)
        nd = float(np.linalg.norm(dx))
        if not np.isfinite(nd):
            raise SingularJacobian("non-finite Newton update")
        if nd <= tol * (1 + np.linalg.norm(x)):
            if it == 0:
                return x, 0
            return x + dx, it
        if it == max_iter:
            break
        if prev is not None and nd > 0.25 * prev:
            slow += 1
            if slow >= 3:
                raise NoConvergence("Newton iteration converging linearly (singular root?)")
        prev = nd
        x = x + dx
    raise NoConvergence(f"no convergence in {max_iter} iterations")


def newton_polish(func: Callable, x0, tol: float = 1e-12, max_iter: int = 20) -> np.ndarray:
    return newton_iterate(func, x0, tol, max_iter)[0]


# ---------------------------------------------------------------------------
# Straight-line and total-degree homotopies
# ---------------------------------------------------------------------------

class StraightLineHomotopy:
    """H(x, t) = (1 - t) F(x) + gamma t S(x)."""

    def __init__(self, target: PolynomialSystem, start: PolynomialSystem, gamma: complex,
                 normalize: bool = True):
        if target.nvars != start.nvars or len(target) != len(start):
            raise NonSquareSystem("target and start systems differ in shape")
        self.dim = target.nvars
        self.target = target
        self.start = start
        gamma = complex(gamma)
        self.gamma = gamma / abs(gamma) if normalize else gamma
        self._F = target.compiled()
        self._S = start.compiled()

    def evaluate(self, x, t):
        F, JF = self._F.evaluate(x)
        S, JS = self._S.evaluate(x)
        g = self.gamma
        return ((1 - t) * F + g * t * S, (1 - t) * JF + g * t * JS, g * S - F)


def total_degree_start_system(F: PolynomialSystem):
    """Start system x_i^{d_i} - 1 and its solutions (products of roots of unity)."""
    names = F.var_names
    degs = F.degrees()
    polys = [Polynomial.variable(i, names) ** d - 1 for i, d in enumerate(degs)]
    roots = [np.exp(2j * np.pi * np.arange(d) / d) for d in degs]
    starts = [np.array(p, dtype=complex) for p in itertools.product(*roots)]
    return PolynomialSystem(polys, F.k), starts


def canonical_key(x, decimals: int = 8):
    x = np.atleast_1d(x)
    return tuple(v for c in x for v in (round(float(c.real), decimals) + 0.0,
                                         round(float(np.imag(c)), decimals) + 0.0))


def same_point(x, y, rel_tol: float = 1e-6) -> bool:
    scale = 1 + max(np.max(np.abs(x)), np.max(np.abs(y)))
    return bool(np.max(np.abs(np.asarray(x) - np.asarray(y))) < rel_tol * scale)


def dedup_points(points: Sequence[np.ndarray], rel_tol: float = 1e-6) -> list[np.ndarray]:
    """Remove near-duplicates (max norm, relative) and sort canonically."""
    kept: list[np.ndarray] = []
    for p in points:
        if not any(same_point(p, q, rel_tol) for q in kept):
            kept.append(np.asarray(p))
    kept.sort(key=canonical_key)
    return kept


@dataclass
class SolveResult:
    solutions: list[np.ndarray]
    singular: list[np.ndarray] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    gamma: complex = 0j

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)


def solve_total_degree(F: PolynomialSystem, opts: TrackerOptions | None = None,
                       rng: np.random.Generator | None = None,
                       gamma: complex | None = None,
                       dedup_tol: float = 1e-6) -> SolveResult:
    """All finite nonsingular solutions of a square system by a total-degree homotopy."""
    if len(F) != F.nvars:
        raise NonSquareSystem(f"{len(F)} equations in {F.nvars} unknowns")
    if any(d < 1 for d in F.degrees()):
        raise ValueError("every equation needs degree >= 1")
    opts = opts or TrackerOptions()
    if gamma is None:
        rng = rng if rng is not None else np.random.default_rng()
        gamma = np.exp(2j * np.pi * rng.uniform())
    # equation-wise scaling leaves the solutions unchanged
    F = PolynomialSystem([f * (1.0 / f.coefficient_scale()) for f in F.polys], F.k)
    S, starts = total_degree_start_system(F)
    H = StraightLineHomotopy(F, S, gamma)
    comp = F.compiled()
    counts = {s.value: 0 for s in PathStatus}
    finite, singular = [], []
    for x0 in starts:
        res = track_path(H, x0, opts)
        counts[res.status.value] += 1
        if res.status is PathStatus.SUCCESS:
            try:
                x = newton_polish(lambda y: comp.evaluate(y), res.endpoint, 1e-14, 8)
            except ChambercutError:
                x = res.endpoint
            finite.append(x)
        elif res.status is PathStatus.SINGULAR_ENDPOINT:
            singular.append(res.endpoint)
    counts["paths"] = len(starts)
    if counts[PathStatus.SUCCESS.value] == 0 and not singular:
        raise PathFailure(f"no path of {len(starts)} reached a finite solution")
    sols = dedup_points(finite, dedup_tol)
    return SolveResult(sols, dedup_points(singular, 1e-4), counts, H.gamma)


# ---------------------------------------------------------------------------
# Batch tracking with a shared step (all paths assumed regular)
# ---------------------------------------------------------------------------

def track_batch(evaluate: Callable, X0: np.ndarray, opts: TrackerOptions | None = None,
                initial_step: float = 1.0) -> np.ndarray:
    """Track many regular paths together from t = 1 to t = 0.

    ``evaluate(X, t)`` maps points of shape (P, m) to ``(H, J, Jt)`` of shapes
    (P, m), (P, m, m), (P, m).  All paths share one step size, so this is only
    suitable when every path stays nonsingular (slice moves).  Raises
    :class:`PathFailure` when the step underflows.
    """
    opts = opts or TrackerOptions()
    X = np.array(X0, dtype=complex)
    t = 1.0
    dt = initial_step
    easy = 0
    steps = 0

    def vel(Y, s):
        _, J, Jt = evaluate(Y, s)
        return -np.linalg.solve(J, Jt[..., None])[..., 0]

    while t > 0:
        steps += 1
        if steps > opts.max_steps:
            raise PathFailure("batch tracker step limit")
        dt = min(dt, t)
        h = -dt
        try:
            k1 = vel(X, t)
            k2 = vel(X + 0.5 * h * k1, t + 0.5 * h)
            k3 = vel(X + 0.5 * h * k2, t + 0.5 * h)
            k4 = vel(X + h * k3, t + h)
            Xp = X + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            Xn, iters = _batch_correct(evaluate, Xp, t + h, opts, np.linalg.norm(Xp - X, axis=1))
        except (np.linalg.LinAlgError, NoConvergence, EvaluationError, FloatingPointError):
            dt *= 0.5
            easy = 0
            if dt < opts.min_step:
                raise PathFailure(f"batch step underflow at t={t:.3g}")
            continue
        X = Xn
        t = t - dt if dt < t else 0.0
        if iters <= 2:
            easy += 1
            if easy >= 2:
                dt *= 2.0
                easy = 0
        else:
            easy = 0
    return X


def _batch_correct(evaluate, X, t, opts: TrackerOptions, displacement):
    prev = None
    for it in range(opts.max_corrector_iters):
        H, J, _ = evaluate(X, t)
        dX = np.linalg.solve(J, -H[..., None])[..., 0]
        X = X + dX
        nd = np.linalg.norm(dX, axis=1)
        if not np.all(np.isfinite(nd)):
            raise NoConvergence("non-finite corrector update")
        tol = opts.corrector_tol * (1 + np.linalg.norm(X, axis=1))
        if it == 0 and np.any(nd > 0.5 * displacement + 10 * tol):
            raise NoConvergence("corrector moved further than the predictor")
        if np.all(nd <= tol):
            return X, it + 1
        if prev is not None and np.any((nd > 0.5 * prev) & (nd > tol)):
            raise NoConvergence("corrector not contracting")
        prev = nd
    raise NoConvergence("corrector iteration limit")


# ---------------------------------------------------------------------------
# Many paths with independent step sizes, evaluated together
# ---------------------------------------------------------------------------

@dataclass
class BatchPathResult:
    endpoints: np.ndarray
    status: list
    t_reached: np.ndarray
    steps: np.ndarray

    def success_mask(self) -> np.ndarray:
        return np.array([s is PathStatus.SUCCESS for s in self.status], dtype=bool)


def _bsolve(J, R):
    try:
        X = np.linalg.solve(J, R)
        return X, np.isfinite(X).reshape(len(X), -1).all(axis=1)
    except np.linalg.LinAlgError:
        X = np.full(R.shape, np.nan + 0j)
        ok = np.zeros(len(J), dtype=bool)
        for i in range(len(J)):
            try:
                X[i] = np.linalg.solve(J[i], R[i])
                ok[i] = np.all(np.isfinite(X[i]))
            except np.linalg.LinAlgError:
                pass
        return X, ok


def _bnorm(A):
    return np.sqrt(np.sum(np.abs(A) ** 2, axis=-1))


def _bcond(J):
    sv = np.linalg.svd(J, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = sv[:, 0] / sv[:, -1]
    return np.where(np.isfinite(c), c, np.inf)


def track_many(evaluate: Callable, X0, opts: TrackerOptions | None = None) -> BatchPathResult:
    """Track P paths from t = 1 to t = 0, each with its own adaptive step.

    ``evaluate(X, t, idx)`` receives the points (B, m), their t-values (B,)
    and their path indices (B,) and returns ``(H, J, Ht, ok)`` where ``ok``
    flags rows that could be evaluated.  Path indices let evaluators keep
    per-path warm-start state.  Failed rows only shrink their own step.
    """
    opts = opts or TrackerOptions()
    X = np.array(X0, dtype=complex)
    P, m = X.shape
    t = np.ones(P)
    dt = np.full(P, opts.initial_step)
    easy = np.zeros(P, dtype=int)
    steps = np.zeros(P, dtype=int)
    status: list = [None] * P
    active = np.ones(P, dtype=bool)
    cond = np.ones(P)
    eps_tol = opts.corrector_tol

    def finish(i_arr, kind):
        for i in i_arr:
            status[i] = kind
        active[i_arr] = False

    # make sure the start points solve H(., 1)
    with np.errstate(all="ignore"):
        idx = np.arange(P)
        for _ in range(opts.max_corrector_iters + 2):
            H, J, _, ok = evaluate(X[idx], t[idx], idx)
            d, ok2 = _bsolve(J, -H[..., None])
            ok &= ok2
            bad = idx[~ok]
            finish(bad, PathStatus.STEP_FAILURE)
            X[idx[ok]] += d[ok, :, 0]
            small = _bnorm(d[ok, :, 0]) <= eps_tol * (1 + _bnorm(X[idx[ok]]))
            idx = idx[ok][~small]
            if len(idx) == 0:
                break
        if len(idx):
            finish(idx, PathStatus.STEP_FAILURE)

    while np.any(active):
        idx = np.flatnonzero(active)
        over = steps[idx] >= opts.max_steps
        if np.any(over):
            finish(idx[over], PathStatus.STEP_FAILURE)
            idx = idx[~over]
            if len(idx) == 0:
                break
        tt = t[idx]
        h = np.minimum(np.minimum(dt[idx], tt), opts.max_step)
        eg = (tt < opts.endgame_start) & (cond[idx] > 1e8)
        h = np.where(eg, np.where(tt > 1e-14, np.minimum(h, (1 - opts.endgame_shrink) * tt), tt), h)
        x = X[idx]
        with np.errstate(all="ignore"):
            def vel(Y, s):
                _, J, Ht, ok = evaluate(Y, s, idx)
                v, ok2 = _bsolve(J, -Ht[..., None])
                return v[..., 0], ok & ok2
            hh = h[:, None]
            k1, o1 = vel(x, tt)
            k2, o2 = vel(x - 0.5 * hh * k1, tt - 0.5 * h)
            k3, o3 = vel(x - 0.5 * hh * k2, tt - 0.5 * h)
            k4, o4 = vel(x - hh * k3, tt - h)
            xp = x - hh * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            good = o1 & o2 & o3 & o4 & np.isfinite(xp).all(axis=1)
            xp = np.where(good[:, None], xp, x)
            disp = _bnorm(xp - x)
            Y = xp.copy()
            conv = np.zeros(len(idx), dtype=bool)
            iters = np.zeros(len(idx), dtype=int)
            prev = None
            Jlast = None
            for it in range(opts.max_corrector_iters):
                Hc, Jc, _, okc = evaluate(Y, tt - h, idx)
                d, ok2 = _bsolve(Jc, -Hc[..., None])
                d = d[..., 0]
                good &= okc & ok2
                d = np.where((good & ~conv)[:, None], d, 0)
                Y = Y + d
                nd = _bnorm(d)
                tol = eps_tol * (1 + _bnorm(Y))
                if it == 0:
                    good &= ~(nd > 0.5 * disp + 10 * tol)
                newly = good & ~conv & (nd <= tol)
                iters[newly] = it + 1
                conv |= newly
                if prev is not None:
                    good &= ~(~conv & (nd > 0.5 * prev))
                prev = nd
                Jlast = Jc
                if np.all(conv | ~good):
                    break
            acc = good & conv & np.isfinite(Y).all(axis=1)
        # rejected steps
        rej = idx[~acc]
        dt[rej] = h[~acc] * 0.5
        easy[rej] = 0
        under = rej[dt[rej] < opts.min_step]
        for i in under:
            status[i] = _batch_failure_status(evaluate, X[i], t[i], i, cond[i], opts)
            active[i] = False
        # accepted steps
        a = idx[acc]
        X[a] = Y[acc]
        t[a] = np.where(h[acc] >= t[a], 0.0, t[a] - h[acc])
        steps[a] += 1
        if Jlast is not None and np.any(acc):
            late = acc & (t[idx] < opts.endgame_start)
            if np.any(late):
                cond[idx[late]] = _bcond(Jlast[late])
        e_ok = iters[acc] <= 2
        easy[a[e_ok]] += 1
        easy[a[~e_ok]] = 0
        grow = easy[a] >= opts.easy_steps
        dt[a] = np.where(grow, np.minimum(h[acc] * opts.growth, opts.max_step), h[acc])
        easy[a[grow]] = 0
        div = a[_bnorm(X[a]) > opts.divergence_bound]
        finish(div, PathStatus.DIVERGED)
        done = a[(t[a] == 0) & active[a]]
        if len(done):
            _batch_finish_zero(evaluate, X, done, status, opts)
            active[done] = False
    return BatchPathResult(X, status, t, steps)


def _batch_failure_status(evaluate, x, t, i, cond, opts):
    x = x[None]
    with np.errstate(all="ignore"):
        if np.linalg.norm(x) > opts.endpoint_bound:
            return PathStatus.DIVERGED
        if t < opts.endgame_start and cond > 1e8:
            return PathStatus.SINGULAR_ENDPOINT
        if t < 1e-8:
            H0, _, _, ok = evaluate(x, np.zeros(1), np.array([i]))
            if ok[0] and np.linalg.norm(H0[0]) < 1e-6 * (1 + np.linalg.norm(x)):
                return PathStatus.SINGULAR_ENDPOINT
    return PathStatus.STEP_FAILURE


def _batch_finish_zero(evaluate, X, done, status, opts):
    idx = done.copy()
    zeros = np.zeros(len(idx))
    with np.errstate(all="ignore"):
        for _ in range(6):
            H, J, _, ok = evaluate(X[idx], zeros, idx)
            d, ok2 = _bsolve(J, -H[..., None])
            upd = ok & ok2
            X[idx[upd]] += d[upd, :, 0]
            small = _bnorm(d[:, :, 0]) <= 1e-14 * (1 + _bnorm(X[idx]))
            if np.all(small | ~upd):
                break
        H, J, _, ok = evaluate(X[idx], zeros, idx)
        res = _bnorm(H)
        cond = _bcond(J)
    for j, i in enumerate(idx):
        if not ok[j]:
            status[i] = PathStatus.STEP_FAILURE
        elif cond[j] > opts.singular_cond:
            status[i] = (PathStatus.DIVERGED if np.linalg.norm(X[i]) > opts.endpoint_bound
                         else PathStatus.SINGULAR_ENDPOINT)
        elif res[j] < opts.residual_tol:
            status[i] = PathStatus.SUCCESS
        else:
            status[i] = PathStatus.STEP_FAILURE
