"""Derivatives of log|h| for a hypersurface known only through a pseudo-witness set.

For a line p + t b meeting H at t_j(p, b), put s_j = 1/t_j.  Then

    grad log h(p)      = -sum_j d s_j / d b
    hess log h(p)[l,i] = -sum_j d^2 s_j / (d p_l d b_i)

and b . grad log h(p) = -sum_j s_j, which is checked on every evaluation.
All derivatives of s_j come from implicit differentiation of the sliced
system in the coordinates u = (s, y).
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import (EvaluationError, EvaluationGap, NonReducedWitnessSet, PathFailure, PointOnHypersurface, RealityError,
                     SingularJacobian, TCollision)
from .pwitness import (LineIntersection, PseudoWitnessSet, SliceLine, SlicedSystem, SliceMover,
                       move_slice, safe_solve, split_intersections_batch, subdivided_move_batch)

log = logging.getLogger(__name__)

IDENTITY_RTOL = 1e-9
REALITY_RTOL = 1e-7


class IdentityMonitor:
    """Worst observed violation of b . grad log h = -sum s_j (relative)."""

    def __init__(self, tol: float = IDENTITY_RTOL):
        self.tol = tol
        self.reset()

    def reset(self):
        self.count = 0
        self.worst = 0.0
        self.violations: list[tuple] = []

    def record(self, residual: float, p=None):
        self.count += 1
        self.worst = max(self.worst, residual)
        if residual > self.tol and len(self.violations) < 20:
            self.violations.append((residual, None if p is None else np.array(p)))


IDENTITY_MONITOR = IdentityMonitor()


@dataclass
class DerivativeData:
    """Per-root derivatives of s_j = 1/t_j with respect to the line (p, b)."""
    intersection: LineIntersection
    s: np.ndarray
    grad_p: np.ndarray               # (D, k)  ds/dp
    grad_b: np.ndarray               # (D, k)  ds/db
    jac_p_y: np.ndarray | None = None  # (D, r, k)
    jac_b_y: np.ndarray | None = None  # (D, r, k)
    mixed: np.ndarray | None = None  # (D, k, k)  d^2 s / dp_l db_i
    cond: np.ndarray | None = None

    @property
    def grad_log_h(self) -> np.ndarray:
        return -self.grad_b.sum(axis=0)

    @property
    def hess_log_h(self) -> np.ndarray:
        if self.mixed is None:
            raise ValueError("second derivatives were not requested")
        H = -self.mixed.sum(axis=0)
        return 0.5 * (H + H.T)

    @property
    def hess_asymmetry(self) -> float:
        H = -self.mixed.sum(axis=0)
        return float(np.linalg.norm(H - H.T) / max(np.linalg.norm(H), 1e-300))


def _derivative_arrays(comp, k, p, b, v, A, t, y, order: int = 2):
    """Root derivatives for arrays with arbitrary leading batch dimensions.

    p: (..., k); t: (..., D); y: (..., D, r).  Returns a dict of arrays and
    a boolean mask over the batch (False where a Jacobian is singular).
    """
    s = 1.0 / t
    X = np.concatenate([p[..., None, :] + t[..., None] * b, v + y @ A.T], axis=-1)
    if order >= 2:
        _, JF, HF = comp.evaluate(X, 2)
    else:
        _, JF = comp.evaluate(X, 1)
    Fp, Fz = JF[..., :k], JF[..., k:]
    Fpb = Fp @ b                                            # (..., D, N)
    Ju = np.concatenate([(-Fpb / s[..., None] ** 2)[..., None], Fz @ A], axis=-1)
    lead = Ju.shape[:-3]
    flat = int(np.prod(lead)) if lead else 1
    Jf = Ju.reshape((flat,) + Ju.shape[-3:])
    Up, ok = safe_solve(Jf, -Fp.reshape((flat,) + Fp.shape[-3:]))
    Up = Up.reshape(Fp.shape)
    ok = ok.reshape(lead) if lead else bool(ok[0])
    Ub = Up / s[..., None, None]
    Us_p, Us_b = Up[..., 0, :], Ub[..., 0, :]
    out = {"s": s, "grad_p": Us_p, "grad_b": Us_b, "jac_p_y": Up[..., 1:, :],
           "jac_b_y": Ub[..., 1:, :], "Ju": Ju}
    if order < 2:
        return out, ok
    # tangent vectors of the lifted point x(p, b) in C^n
    s_ = s[..., None, None]
    I = np.eye(k)
    dxp = np.concatenate([I - b[:, None] * Us_p[..., None, :] / s_ ** 2,
                          np.einsum("ar,...rl->...al", A, Up[..., 1:, :])], axis=-2)
    dxb = np.concatenate([I / s_ - b[:, None] * Us_b[..., None, :] / s_ ** 2,
                          np.einsum("ar,...rl->...al", A, Ub[..., 1:, :])], axis=-2)
    R = np.einsum("...eab,...al,...bi->...eli", HF, dxp, dxb)
    s4 = s[..., None, None, None]
    R += (2.0 / s4 ** 3) * Fpb[..., None, None] * Us_p[..., None, :, None] * Us_b[..., None, None, :]
    R -= Fp[..., None, :] * Us_p[..., None, :, None] / s4 ** 2
    Rf = R.reshape((flat,) + Fpb.shape[-2:] + (k * k,))
    Z, ok2 = safe_solve(Jf, -Rf)
    out["mixed"] = Z.reshape(R.shape)[..., 0, :, :]
    ok = ok & (ok2.reshape(lead) if lead else bool(ok2[0]))
    return out, ok


def differentiate_intersection(pws: PseudoWitnessSet, inter: LineIntersection,
                               order: int = 2) -> DerivativeData:
    """Implicitly differentiate the roots of one line intersection."""
    F = pws.system
    k = F.k
    s = 1.0 / inter.t
    if order <= 0:
        z = np.zeros((len(s), k), complex)
        return DerivativeData(inter, s, z, z.copy())
    p, b = inter.line.base, inter.line.direction
    with np.errstate(all="ignore"):
        out, ok = _derivative_arrays(F.compiled(), k, p, b, inter.fibre.offset,
                                     inter.fibre.matrix, inter.t, inter.y, order)
    if not ok:
        raise SingularJacobian("sliced Jacobian is singular at an intersection")
    sv = np.linalg.svd(out["Ju"], compute_uv=False)
    cond = sv[:, 0] / np.maximum(sv[:, -1], 1e-300)
    if np.any(cond > 1e13):
        raise SingularJacobian("ill-conditioned intersection")
    return DerivativeData(inter, out["s"], out["grad_p"], out["grad_b"], out["jac_p_y"],
                          out["jac_b_y"], out.get("mixed"), cond)


@dataclass
class OracleValue:
    grad: np.ndarray
    hess: np.ndarray | None
    data: DerivativeData
    direction: np.ndarray


@dataclass
class OracleStats:
    queries: int = 0
    retries: int = 0
    fallbacks: int = 0
    gaps: int = 0
    max_imag: float = 0.0
    extra: dict = field(default_factory=dict)


class LineOracle:
    """Evaluate log|h| derivatives at points p from a pseudo-witness set.

    A fixed generic real direction is used for every line; recent
    intersections are cached and used as warm starts for nearby queries.
    """

    def __init__(self, pws: PseudoWitnessSet, rng: np.random.Generator | None = None,
                 direction=None, cache_size: int = 16):
        if not pws.regular_part_ok:
            raise NonReducedWitnessSet("oracle requires a reduced pseudo-witness set")
        self.pws = pws
        self.k = pws.k
        self.rng = rng if rng is not None else np.random.default_rng(0)
        if direction is None:
            direction = self.rng.standard_normal(self.k)
        direction = np.asarray(direction, dtype=float)
        self.direction = direction / np.linalg.norm(direction)
        self.mover = SliceMover(pws.system, np.exp(2j * np.pi * self.rng.uniform()))
        self.cache_size = cache_size
        self._cache: OrderedDict[int, LineIntersection] = OrderedDict()
        self._key = 0
        self.stats = OracleStats()

    # -- intersections -------------------------------------------------------
    def _nearest(self, p, b):
        best, bd = None, np.inf
        for key, inter in self._cache.items():
            d = np.linalg.norm(inter.line.base - p) + np.linalg.norm(inter.line.direction - b)
            if d < bd:
                best, bd = key, d
        if best is None:
            return None
        self._cache.move_to_end(best)
        return self._cache[best]

    def intersect(self, p, direction=None) -> LineIntersection:
        b = self.direction if direction is None else np.asarray(direction)
        line = SliceLine(np.asarray(p, dtype=complex), b)
        src = self._nearest(line.base, line.direction)
        try:
            inter = move_slice(self.pws, line, source=src, mover=self.mover, rng=self.rng)
        except PathFailure:
            if src is None:
                raise
            self.stats.fallbacks += 1
            inter = move_slice(self.pws, line, mover=self.mover, rng=self.rng,
                               allow_direct=False)
        self._key += 1
        self._cache[self._key] = inter
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return inter

    def clear_cache(self):
        self._cache.clear()

    def batch_session(self) -> "BatchSession":
        """The oracle's persistent batch session (warm starts survive across jobs)."""
        if getattr(self, "_session", None) is None:
            self._session = BatchSession(self)
        return self._session

    # -- derivatives ---------------------------------------------------------
    def _directions(self):
        yield self.direction
        k = self.k
        yield self.direction + 1e-2j * self.rng.standard_normal(k)
        for _ in range(2):
            b = self.rng.standard_normal(k)
            yield b / np.linalg.norm(b)

    def evaluate(self, p, order: int = 2) -> OracleValue:
        """Gradient (and Hessian) of log h at p; complex p gives the holomorphic extension."""
        p = np.asarray(p)
        real_query = not np.iscomplexobj(p) or np.all(p.imag == 0)
        self.stats.queries += 1
        last: Exception | None = None
        for attempt, b in enumerate(self._directions()):
            if attempt:
                self.stats.retries += 1
            try:
                inter = self.intersect(p, b)
                data = differentiate_intersection(self.pws, inter, order)
            except (TCollision, SingularJacobian, PathFailure) as exc:
                last = exc
                continue
            grad = data.grad_log_h
            hess = data.hess_log_h if order >= 2 else None
            ssum = data.s.sum()
            resid = abs(grad @ b + ssum) / (1 + np.sum(np.abs(data.s)))
            IDENTITY_MONITOR.record(float(resid), p)
            if real_query:
                scale = 1 + np.sum(np.abs(data.grad_b))
                im = np.max(np.abs(grad.imag)) / scale
                if hess is not None:
                    hscale = 1 + np.sum(np.abs(data.mixed))
                    im = max(im, np.max(np.abs(hess.imag)) / hscale)
                self.stats.max_imag = max(self.stats.max_imag, float(im))
                if im > REALITY_RTOL:
                    last = RealityError(f"imaginary residue {im:.2e}")
                    continue
                grad = grad.real
                hess = None if hess is None else hess.real
            return OracleValue(grad, hess, data, np.asarray(b))
        self.stats.gaps += 1
        raise EvaluationGap(f"oracle failed at p={p}: {last}")

    def grad_log_h(self, p) -> np.ndarray:
        return self.evaluate(p, order=1).grad

    def hess_log_h(self, p) -> np.ndarray:
        return self.evaluate(p, order=2).hess

    def log_h_relative(self, p) -> tuple[float, int]:
        """log|h(p)| up to an additive constant, and sign(h(p)) up to a global sign.

        Uses the fixed direction only, so values at different points are
        comparable.  Raises EvaluationGap if the line intersection is degenerate.
        """
        p = np.asarray(p)
        try:
            inter = self.intersect(p)
        except (TCollision, PathFailure) as exc:
            raise EvaluationGap(str(exc)) from exc
        t = inter.t
        val = float(np.sum(np.log(np.abs(t))) * 1.0)
        prod = np.prod(-t / np.abs(t))
        sign = int(np.sign(prod.real)) if np.isrealobj(p) or np.all(np.imag(p) == 0) else 0
        return val, sign


FAR_MOVE = 10.0


class BatchSession:
    """Evaluate many query points at once, each warm-started from its own last result.

    ``ids`` identify independent query streams (e.g. homotopy paths); each
    stream keeps the witness points of its most recent successful query, so
    successive nearby queries need only a certified one-step move.  Streams
    without a usable warm start fall back to a full single-point move.
    """

    def __init__(self, oracle: "LineOracle"):
        self.oracle = oracle
        self.pws = oracle.pws
        self.sliced = SlicedSystem(self.pws.system)
        self.comp = self.pws.system.compiled()
        self.store: dict = {}
        self.uniform = self.pws.mult == 1
        self.fallbacks = 0
        self.max_entries = 4096
        self._bases = None

    def _nearest_entry(self, x):
        """Stored intersection whose base point is closest to x (any stream)."""
        if not self.store:
            return None
        if self._bases is None:
            self._keys = list(self.store)
            self._bases = np.array([self.store[key][0] for key in self._keys])
        d = np.sum(np.abs(self._bases - x) ** 2, axis=1)
        return self.store[self._keys[int(np.argmin(d))]]

    def _evaluate_each(self, X, order):
        B, k = X.shape
        grad = np.full((B, k), np.nan + 0j)
        hess = np.full((B, k, k), np.nan + 0j) if order >= 2 else None
        ok = np.zeros(B, dtype=bool)
        for j in range(B):
            try:
                v = self.oracle.evaluate(X[j], order)
            except EvaluationError:
                continue
            grad[j] = v.grad
            if hess is not None:
                hess[j] = v.hess
            ok[j] = True
        return grad, hess, ok

    def _single(self, x):
        inter = self.oracle.intersect(x)
        return inter.points

    def evaluate(self, X, ids, order: int = 2):
        """Returns ``(grad, hess, ok)`` for points X of shape (B, k)."""
        o = self.oracle
        X = np.asarray(X, dtype=complex)
        B, k = X.shape
        if not self.uniform:
            return self._evaluate_each(X, order)
        b = o.direction
        fib = self.pws.fibre
        ok = np.ones(B, dtype=bool)
        U0 = np.empty((B,) + self.pws.points.shape, dtype=complex)
        base0 = np.empty((B, k), dtype=complex)
        fresh = []
        for j, i in enumerate(ids):
            entry = self.store.get(int(i))
            if entry is None:
                entry = self._nearest_entry(X[j])
                fresh.append(j)
            if entry is None:
                try:
                    entry = (X[j].copy(), self._single(X[j]))
                except EvaluationError:
                    ok[j] = False
                    entry = (X[j].copy(), self.pws.points)
            base0[j], U0[j] = entry
        U1, okm = subdivided_move_batch(self.sliced, U0, base0, X, b, fib)
        # wild requests (predictor stages shooting off) fail fast: the caller shrinks its step
        far = np.sqrt(np.sum(np.abs(X - base0) ** 2, axis=1)) > FAR_MOVE * (
            1 + np.sqrt(np.sum(np.abs(base0) ** 2, axis=1)))
        ok &= ~(far & ~okm)
        for j in np.flatnonzero(ok & ~okm):
            self.fallbacks += 1
            try:
                U1[j] = self._single(X[j])
            except EvaluationError:
                ok[j] = False
        t, y, okc = split_intersections_batch(U1, self.pws)
        ok &= okc
        with np.errstate(all="ignore"):
            out, okd = _derivative_arrays(self.comp, k, X, b, fib.offset, fib.matrix, t, y, order)
        ok &= okd
        grad = -out["grad_b"].sum(axis=1)
        hess = None
        if order >= 2:
            Hs = -out["mixed"].sum(axis=1)
            hess = 0.5 * (Hs + np.swapaxes(Hs, 1, 2))
        ssum = out["s"].sum(axis=1)
        with np.errstate(all="ignore"):
            resid = np.abs(grad @ b + ssum) / (1 + np.abs(out["s"]).sum(axis=1))
        ok &= np.isfinite(resid)
        for j in np.flatnonzero(ok):
            IDENTITY_MONITOR.record(float(resid[j]), X[j])
            key = int(ids[j])
            self.store.pop(key, None)
            self.store[key] = (X[j].copy(), U1[j])
        while len(self.store) > self.max_entries:
            self.store.pop(next(iter(self.store)))
        self._bases = None
        o.stats.queries += B
        return grad, hess, ok


_ORACLES: dict[int, tuple[PseudoWitnessSet, LineOracle]] = {}


def as_oracle(obj) -> LineOracle:
    """Accept a LineOracle or a PseudoWitnessSet (one oracle is kept per set)."""
    if isinstance(obj, LineOracle):
        return obj
    if isinstance(obj, PseudoWitnessSet):
        entry = _ORACLES.get(id(obj))
        if entry is None or entry[0] is not obj:
            entry = (obj, LineOracle(obj))
            _ORACLES[id(obj)] = entry
        return entry[1]
    raise TypeError(f"expected LineOracle or PseudoWitnessSet, got {type(obj).__name__}")


def intersect_and_differentiate(source, p, b=None, order: int = 2) -> DerivativeData:
    """Intersect H with the line p + t b and differentiate its roots (no retries)."""
    oracle = as_oracle(source)
    inter = oracle.intersect(np.asarray(p), b)
    return differentiate_intersection(oracle.pws, inter, order)


def grad_log_h(source, p) -> np.ndarray:
    return as_oracle(source).grad_log_h(p)


def hess_log_h(source, p) -> np.ndarray:
    return as_oracle(source).hess_log_h(p)


def eval_log_h_relative(source, p) -> tuple[float, int]:
    return as_oracle(source).log_h_relative(p)


__all__ = ["LineOracle", "DerivativeData", "OracleValue", "intersect_and_differentiate",
           "differentiate_intersection", "as_oracle", "grad_log_h", "hess_log_h",
           "eval_log_h_relative", "IDENTITY_MONITOR", "IdentityMonitor", "PointOnHypersurface"]
