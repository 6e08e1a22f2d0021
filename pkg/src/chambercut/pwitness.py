"""Pseudo-witness sets for hypersurfaces given as projections.

The variety X = V(F) lives in C^k x C^(n-k) (parameters p first, fibre z
last).  Slicing with a line p0 + t b in parameter space and an affine space
v + A y in the fibre gives a square system in (t, y); its solutions project to
the intersection of the hypersurface with the line.  Moving the slice is a
parameter homotopy in (p0, b, v, A).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .algebra import Polynomial, PolynomialSystem
from .errors import (EmptyWitnessSet, NonReducedWitnessSet, NonSquareSystem, NonUniformClusters,
                     PathFailure, PointOnHypersurface, TCollision)
from .tracking import TrackerOptions, solve_total_degree, track_batch

log = logging.getLogger(__name__)

RANK_RTOL = 1e-8
ON_HYPERSURFACE_TOL = 1e-8


@dataclass(frozen=True)
class SliceLine:
    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=complex))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=complex))
        if np.linalg.norm(self.direction) == 0:
            raise ValueError("slice direction must be nonzero")


@dataclass(frozen=True)
class FibreSlice:
    offset: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=complex))
        M = np.asarray(self.matrix, dtype=complex)
        if M.ndim != 2:
            M = M.reshape(len(self.offset), -1)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


class SlicedSystem:
    """Evaluate G(t, y) = F(p + t b, v + A y) and its derivatives for batches of (t, y)."""

    def __init__(self, F: PolynomialSystem):
        self.F = F
        self.comp = F.compiled()
        self.k = F.k
        self.nz = F.nvars - F.k

    def lift(self, U, line: SliceLine, fibre: FibreSlice):
        U = np.asarray(U)
        t = U[..., :1]
        y = U[..., 1:]
        p = line.base + t * line.direction
        z = fibre.offset + y @ fibre.matrix.T
        return np.concatenate([p, z], axis=-1)

    def evaluate(self, U, line: SliceLine, fibre: FibreSlice):
        X = self.lift(U, line, fibre)
        F, JF = self.comp.evaluate(X, 1)
        k = self.k
        Fp, Fz = JF[..., :k], JF[..., k:]
        Ju = np.concatenate([(Fp @ line.direction)[..., None], Fz @ fibre.matrix], axis=-1)
        return F, Ju, Fp, Fz

    @staticmethod
    def param_rate(Fp, Fz, U, dline: tuple, dfibre: tuple):
        """d/dlambda G along a slice-parameter change (dp, db, dv, dA)."""
        dp, db = dline
        dv, dA = dfibre
        t = U[..., :1]
        y = U[..., 1:]
        wp = dp + t * db
        wz = dv + y @ dA.T
        return np.einsum("...ij,...j->...i", Fp, wp) + np.einsum("...ij,...j->...i", Fz, wz)


def sliced_polynomials(F: PolynomialSystem, line: SliceLine, fibre: FibreSlice) -> PolynomialSystem:
    """The square system in (t, y_1..y_r) obtained by substituting the slice into F."""
    r = fibre.dim
    names = ["t"] + [f"y{i + 1}" for i in range(r)]
    t = Polynomial.variable(0, names)
    ys = [Polynomial.variable(i + 1, names) for i in range(r)]
    subs = [complex(line.base[i]) + complex(line.direction[i]) * t for i in range(F.k)]
    for j in range(F.nvars - F.k):
        expr = Polynomial.constant(complex(fibre.offset[j]), names)
        for l in range(r):
            expr = expr + complex(fibre.matrix[j, l]) * ys[l]
        subs.append(expr)
    return PolynomialSystem([f.compose(subs) for f in F], 0)


def cluster_values(values: np.ndarray, rel_tol: float = 1e-6) -> list[list[int]]:
    """Single-linkage clusters of complex numbers with threshold rel_tol*(1+|t|)."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            scale = 1 + max(abs(values[i]), abs(values[j]))
            if abs(values[i] - values[j]) < rel_tol * scale:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = list(groups.values())
    out.sort(key=lambda g: (round(float(values[g[0]].real), 10), round(float(values[g[0]].imag), 10)))
    return out


def numerical_rank(J: np.ndarray, rtol: float = RANK_RTOL, ref: float = 0.0) -> int:
    """Singular values above rtol * max(sigma_max, ref)."""
    sv = np.linalg.svd(np.atleast_2d(J), compute_uv=False)
    scale = max(sv[0] if sv.size else 0.0, ref)
    if scale == 0:
        return 0
    return int(np.sum(sv > rtol * scale))


@dataclass
class PseudoWitnessSet:
    system: PolynomialSystem
    dim: int
    line: SliceLine
    fibre: FibreSlice
    t: np.ndarray
    y: np.ndarray
    degH: int
    mult: int                        # 0 when cluster sizes differ (reducible, non-strict mode)
    reduced: bool = True
    ranks: list = field(default_factory=list)
    discarded: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    cluster_sizes: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.system.k

    @property
    def points(self) -> np.ndarray:
        """Witness points in (t, y) coordinates, shape (|W|, 1 + r)."""
        return np.concatenate([self.t[:, None], self.y], axis=1)

    def lifted(self) -> np.ndarray:
        return SlicedSystem(self.system).lift(self.points, self.line, self.fibre)

    @property
    def regular_part_ok(self) -> bool:
        """Rank condition holds at every stored (trackable) witness point."""
        target = self.system.nvars - self.dim
        return len(self.t) > 0 and all(rk == target for rk in self.ranks[:len(self.t)])

    @property
    def complete(self) -> bool:
        """False when singular (non-reduced) witness points were dropped."""
        return not self.discarded

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        c = _cplx_list
        return {
            "version": 1,
            "var_names": list(self.system.var_names),
            "k": self.system.k,
            "system": self.system.to_text(),
            "dim": self.dim,
            "line": {"base": c(self.line.base), "direction": c(self.line.direction)},
            "fibre": {"offset": c(self.fibre.offset),
                      "matrix": [c(row) for row in self.fibre.matrix]},
            "points": [c(row) for row in self.points],
            "degH": self.degH,
            "mult": self.mult,
            "reduced": self.reduced,
            "ranks": list(map(int, self.ranks)),
            "discarded": [c(row) for row in self.discarded],
            "counts": self.counts,
            "cluster_sizes": list(map(int, self.cluster_sizes)),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PseudoWitnessSet":
        if data.get("version") != 1:
            raise ValueError("unsupported pseudo-witness record version")
        system = PolynomialSystem.parse(data["system"], data["var_names"], data["k"])
        a = _cplx_array
        pts = a(data["points"])
        nz = system.nvars - system.k
        fm = a(data["fibre"]["matrix"]).reshape(nz, -1)
        return cls(system, data["dim"],
                   SliceLine(a(data["line"]["base"]), a(data["line"]["direction"])),
                   FibreSlice(a(data["fibre"]["offset"]), fm),
                   pts[:, 0], pts[:, 1:], data["degH"], data["mult"], data["reduced"],
                   data["ranks"], [a(r) for r in data["discarded"]], data.get("counts", {}),
                   data.get("cluster_sizes", []))


def _cplx_list(v):
    return [[float(np.real(x)), float(np.imag(x))] for x in np.asarray(v).ravel()]


def _cplx_array(v):
    arr = np.asarray(v, dtype=float)
    if arr.size == 0:
        return np.zeros(arr.shape[:-1] if arr.ndim > 1 else (0,), dtype=complex)
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass
class LineIntersection:
    """Intersection of the hypersurface with one line, one fibre point per root."""
    line: SliceLine
    fibre: FibreSlice
    t_all: np.ndarray
    y_all: np.ndarray
    t: np.ndarray
    y: np.ndarray

    @property
    def s(self) -> np.ndarray:
        return 1.0 / self.t

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.t_all[:, None], self.y_all], axis=1)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def random_slice(k: int, nz: int, r: int, rng: np.random.Generator):
    def cg(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return SliceLine(cg(k), cg(k)), FibreSlice(cg(nz), cg(nz, r))


def initial_pseudo_witness(F: PolynomialSystem, dim: int | None = None,
                           rng: np.random.Generator | None = None,
                           opts: TrackerOptions | None = None,
                           max_attempts: int = 3,
                           strict_clusters: bool = True) -> PseudoWitnessSet:
    """Slice X = V(F) generically, solve by total degree, cluster by t.

    An attempt whose solve lost a path (step failure) is retried with a fresh
    slice, since a missing point would silently lower the degree.  With
    ``strict_clusters=False`` differing cluster sizes are accepted (reducible
    projections whose components have different fibre degrees) and ``mult``
    is set to 0.
    """
    rng = rng if rng is not None else np.random.default_rng()
    k = F.k
    n = F.nvars
    d = k - 1 if dim is None else int(dim)
    r = n - d - 1
    if r < 0 or r > n - k:
        raise NonSquareSystem(f"fibre slice dimension {r} is invalid for n={n}, k={k}")
    if len(F) != 1 + r:
        raise NonSquareSystem(
            f"sliced system has {len(F)} equations in {1 + r} unknowns")
    last_error: Exception | None = None
    fallback: PseudoWitnessSet | None = None
    for attempt in range(max_attempts):
        line, fibre = random_slice(k, n - k, r, rng)
        sliced = sliced_polynomials(F, line, fibre)
        try:
            res = solve_total_degree(sliced, opts, rng)
        except PathFailure as exc:
            last_error = EmptyWitnessSet(str(exc))
            continue
        singular = [np.asarray(x) for x in res.singular]
        if not res.solutions and not singular:
            last_error = EmptyWitnessSet("no finite witness points")
            continue
        regular = np.array(res.solutions) if res.solutions else np.zeros((0, 1 + r), complex)
        # degree comes from the regular part when there is one (the engine works
        # with the reduced part); otherwise from the singular endpoints alone
        basis = regular if len(regular) else np.array(singular)
        clusters = cluster_values(basis[:, 0], 1e-5 if not len(regular) else 1e-6)
        sizes = sorted(len(c) for c in clusters)
        if strict_clusters and len(set(sizes)) != 1:
            last_error = NonUniformClusters(f"cluster sizes {sizes}")
            log.info("attempt %d: %s", attempt, last_error)
            continue
        if len(regular):
            regular = regular[[i for c in clusters for i in c]]
        mult = sizes[0] if len(set(sizes)) == 1 else 0
        pws = PseudoWitnessSet(F, d, line, fibre, regular[:, 0], regular[:, 1:],
                               len(clusters), mult, discarded=singular,
                               counts=dict(res.counts), cluster_sizes=sizes)
        ok, ranks = check_reduced(pws)
        pws.reduced = ok
        pws.ranks = ranks
        if res.counts.get("step_failure", 0):
            log.info("attempt %d: %d failed paths, retrying", attempt, res.counts["step_failure"])
            fallback = fallback or pws
            last_error = PathFailure("paths failed in every attempt")
            continue
        if not ok:
            log.warning("pseudo-witness set is not reduced; working with the reduced part")
        return pws
    if fallback is not None:
        log.warning("accepting a pseudo-witness set with failed paths; degree may be low")
        return fallback
    assert last_error is not None
    raise last_error


def check_reduced(pws: PseudoWitnessSet, include_discarded: bool = True):
    """Rank of JF at each witness point against n - d; returns (reduced, ranks).

    Singular endpoints are only known to about sqrt(machine eps), so their
    rank is judged against the Jacobian size at nearby points with a looser
    threshold.
    """
    F = pws.system
    comp = F.compiled()
    target = F.nvars - pws.dim
    sl = SlicedSystem(F)
    ranks = []
    if len(pws.t):
        for Jx in comp.jacobian(sl.lift(pws.points, pws.line, pws.fibre)):
            ranks.append(numerical_rank(Jx))
    if include_discarded and pws.discarded:
        rng = np.random.default_rng(7)
        X = sl.lift(np.array(pws.discarded), pws.line, pws.fibre)
        for x, Jx in zip(X, comp.jacobian(X)):
            off = 1e-2 * (1 + np.linalg.norm(x)) * rng.standard_normal((4, len(x)))
            ref = np.median([np.linalg.norm(J) for J in comp.jacobian(x + off)])
            ranks.append(numerical_rank(Jx, 1e-4, ref))
    if not ranks:
        return False, []
    return all(rk == target for rk in ranks), ranks


# ---------------------------------------------------------------------------
# Moving slices
# ---------------------------------------------------------------------------

def _min_separation(U: np.ndarray) -> np.ndarray:
    if len(U) < 2:
        return np.full(len(U), np.inf)
    D = np.linalg.norm(U[:, None, :] - U[None, :, :], axis=-1)
    np.fill_diagonal(D, np.inf)
    return D.min(axis=1)


class SliceMover:
    """Track witness points between slices of one system."""

    def __init__(self, F: PolynomialSystem, gamma: complex, opts: TrackerOptions | None = None):
        self.sliced = SlicedSystem(F)
        self.gamma = complex(gamma)
        self.opts = opts or TrackerOptions(corrector_tol=1e-11, max_corrector_iters=4,
                                           min_step=1e-10, initial_step=1.0)
        self.direct_moves = 0
        self.tracked_moves = 0

    def _newton(self, U, line, fibre, iters=4, tol=1e-13):
        prev = None
        for it in range(iters):
            F, Ju, _, _ = self.sliced.evaluate(U, line, fibre)
            dU = np.linalg.solve(Ju, -F[..., None])[..., 0]
            U = U + dU
            nd = np.linalg.norm(dU, axis=1)
            if not np.all(np.isfinite(nd)):
                raise PathFailure("non-finite Newton update")
            if np.all(nd <= tol * (1 + np.linalg.norm(U, axis=1))):
                return U, it + 1
            if prev is not None and np.any((nd > 0.5 * prev) & (nd > 1e-10)):
                raise PathFailure("Newton not contracting")
            prev = nd
        return U, iters

    def _direct(self, U0, src, dst):
        """Euler predictor plus Newton, accepted only when clearly non-jumping."""
        (l0, f0), (l1, f1) = src, dst
        _, Ju, Fp, Fz = self.sliced.evaluate(U0, l0, f0)
        rate = self.sliced.param_rate(
            Fp, Fz, U0, (l1.base - l0.base, l1.direction - l0.direction),
            (f1.offset - f0.offset, f1.matrix - f0.matrix))
        U_pred = U0 - np.linalg.solve(Ju, rate[..., None])[..., 0]
        U1, _ = self._newton(U_pred, l1, f1)
        move = np.linalg.norm(U1 - U0, axis=1)
        corr = np.linalg.norm(U1 - U_pred, axis=1)
        pred = np.linalg.norm(U_pred - U0, axis=1)
        sep = _min_separation(U0)
        scale = 1 + np.linalg.norm(U0, axis=1)
        if np.any(move > 0.25 * sep) or np.any(corr > 0.1 * pred + 1e-9 * scale):
            raise PathFailure("direct move not certified")
        return U1

    def _tracked(self, U0, src, dst):
        (l0, f0), (l1, f1) = src, dst
        g = self.gamma
        dp, db = l0.base - l1.base, l0.direction - l1.direction
        dv, dA = f0.offset - f1.offset, f0.matrix - f1.matrix
        sl = self.sliced

        def evaluate(U, s):
            den = 1 + (g - 1) * s
            tau = g * s / den
            dtau = g / den ** 2
            line = SliceLine(l1.base + tau * dp, l1.direction + tau * db)
            fib = FibreSlice(f1.offset + tau * dv, f1.matrix + tau * dA)
            F, Ju, Fp, Fz = sl.evaluate(U, line, fib)
            return F, Ju, dtau * sl.param_rate(Fp, Fz, U, (dp, db), (dv, dA))

        U1 = track_batch(evaluate, U0, self.opts, initial_step=0.25)
        U1, _ = self._newton(U1, l1, f1)
        return U1

    def move(self, U0: np.ndarray, src: tuple, dst: tuple, allow_direct: bool = True):
        U0 = np.asarray(U0, dtype=complex)
        U1 = None
        if allow_direct:
            try:
                U1 = self._direct(U0, src, dst)
                self.direct_moves += 1
            except (PathFailure, np.linalg.LinAlgError, FloatingPointError):
                U1 = None
        if U1 is None:
            try:
                U1 = self._tracked(U0, src, dst)
            except (np.linalg.LinAlgError, FloatingPointError) as exc:
                raise PathFailure(str(exc)) from exc
            self.tracked_moves += 1
        sep = _min_separation(U1)
        if np.any(sep < 1e-8 * (1 + np.linalg.norm(U1, axis=1))):
            raise PathFailure("two witness paths converged to one point")
        return U1


def _intersection_from_points(U, line, fibre, degH, sizes) -> LineIntersection:
    t_all = U[:, 0]
    y_all = U[:, 1:]
    if np.any(np.abs(t_all) < ON_HYPERSURFACE_TOL):
        raise PointOnHypersurface("line base point lies on or near the hypersurface")
    clusters = cluster_values(t_all)
    if len(clusters) != degH or sorted(len(c) for c in clusters) != list(sizes):
        raise TCollision(f"expected cluster sizes {list(sizes)}, got "
                         f"{sorted(len(c) for c in clusters)}")
    reps = [min(c, key=lambda i: (np.linalg.norm(y_all[i]), i)) for c in clusters]
    return LineIntersection(line, fibre, t_all, y_all, t_all[reps], y_all[reps])


def move_slice(pws: PseudoWitnessSet, target_line: SliceLine,
               target_fibre: FibreSlice | None = None,
               source: LineIntersection | None = None,
               mover: SliceMover | None = None,
               rng: np.random.Generator | None = None,
               allow_direct: bool = True) -> LineIntersection:
    """Track all witness points to a new slice and cluster them per root.

    ``source`` lets a caller start from a previously computed intersection
    instead of the stored generic slice.  On path failure one retry goes
    through a random complex intermediate slice.
    """
    if not pws.regular_part_ok:
        raise NonReducedWitnessSet("slice moves require a reduced pseudo-witness set")
    target_fibre = target_fibre or pws.fibre
    rng = rng if rng is not None else np.random.default_rng(0)
    mover = mover or SliceMover(pws.system, np.exp(2j * np.pi * rng.uniform()))
    if source is None:
        U0, src = pws.points, (pws.line, pws.fibre)
    else:
        U0, src = source.points, (source.line, source.fibre)
    dst = (target_line, target_fibre)
    try:
        U1 = mover.move(U0, src, dst, allow_direct)
    except PathFailure:
        k = pws.k
        scale = 1 + np.linalg.norm(target_line.base)
        mid_line = SliceLine(
            target_line.base + scale * (rng.standard_normal(k) + 1j * rng.standard_normal(k)) * 0.5,
            target_line.direction + (rng.standard_normal(k) + 1j * rng.standard_normal(k)) * 0.5)
        mid = (mid_line, target_fibre)
        Um = mover.move(U0, src, mid, allow_direct=False)
        U1 = mover.move(Um, mid, dst, allow_direct=False)
    sizes = pws.cluster_sizes or [pws.mult] * pws.degH
    return _intersection_from_points(U1, target_line, target_fibre, pws.degH, sizes)


# ---------------------------------------------------------------------------
# Batched warm-start moves (many query lines sharing direction and fibre slice)
# ---------------------------------------------------------------------------

def safe_solve(J: np.ndarray, R: np.ndarray):
    """Batched solve that isolates singular systems; returns (X, ok) over the batch."""
    try:
        X = np.linalg.solve(J, R)
        ok = np.isfinite(X).reshape(X.shape[0], -1).all(axis=1)
        return X, ok
    except np.linalg.LinAlgError:
        X = np.full(np.broadcast_shapes(R.shape), np.nan + 0j)
        ok = np.ones(J.shape[0], dtype=bool)
        for i in range(J.shape[0]):
            try:
                X[i] = np.linalg.solve(J[i], R[i])
            except np.linalg.LinAlgError:
                ok[i] = False
        ok &= np.isfinite(X).reshape(X.shape[0], -1).all(axis=1)
        return X, ok


def _rownorm(A):
    return np.sqrt(np.sum(np.abs(A) ** 2, axis=-1))


def direct_move_batch(sliced: SlicedSystem, U0: np.ndarray, base0: np.ndarray,
                      base1: np.ndarray, direction: np.ndarray, fibre: FibreSlice,
                      newton_iters: int = 4, tol: float = 1e-13):
    """Move many witness-point sets from lines base0 + t b to base1 + t b.

    U0 has shape (B, W, 1 + r).  A row is accepted only when the Euler
    prediction is accurate and every point moves much less than its distance
    to the other points of its set, so path jumping is excluded.  Returns
    ``(U1, ok)``.
    """
    B = U0.shape[0]
    b = np.asarray(direction)
    l0 = SliceLine(base0[:, None, :], b)
    l1 = SliceLine(base1[:, None, :], b)
    zero_f = (np.zeros_like(fibre.offset), np.zeros_like(fibre.matrix))
    with np.errstate(all="ignore"):
        _, Ju, Fp, Fz = sliced.evaluate(U0, l0, fibre)
        rate = sliced.param_rate(Fp, Fz, U0, (base1[:, None, :] - base0[:, None, :], 0 * b), zero_f)
        dU, ok = safe_solve(Ju, rate[..., None])
        U_pred = U0 - dU[..., 0]
        U = U_pred.copy()
        prev = None
        done = np.zeros(B, dtype=bool)
        for it in range(newton_iters):
            F, Ju, _, _ = sliced.evaluate(U, l1, fibre)
            d, okk = safe_solve(Ju, -F[..., None])
            ok &= okk
            d = np.where(ok[:, None, None], d[..., 0], 0)
            U = U + d
            nd = _rownorm(d).max(axis=1)
            conv = nd <= tol * (1 + _rownorm(U).max(axis=1))
            done |= conv
            if prev is not None:
                ok &= ~((nd > 0.5 * prev) & (nd > 1e-10) & ~done)
            prev = nd
            if np.all(done | ~ok):
                break
        ok &= done
        move = _rownorm(U - U0)
        corr = _rownorm(U - U_pred)
        pred = _rownorm(U_pred - U0)
        W = U0.shape[1]
        if W > 1:
            D = _rownorm(U0[:, :, None, :] - U0[:, None, :, :])
            D[:, np.arange(W), np.arange(W)] = np.inf
            sep = D.min(axis=2)
        else:
            sep = np.full(move.shape, np.inf)
        scale = 1 + _rownorm(U0)
        ok &= np.all(move <= 0.25 * sep, axis=1)
        ok &= np.all(corr <= 0.1 * pred + 1e-9 * scale, axis=1)
        ok &= np.isfinite(U).reshape(B, -1).all(axis=1)
    return U, ok


def subdivided_move_batch(sliced: SlicedSystem, U0, base0, base1, direction, fibre,
                          max_pieces: int = 16):
    """Like :func:`direct_move_batch`, retrying failed rows in 2, 4, ... equal sub-moves."""
    U, ok = direct_move_batch(sliced, U0, base0, base1, direction, fibre)
    pieces = 2
    while pieces <= max_pieces and not ok.all():
        rows = np.flatnonzero(~ok)
        V = U0[rows].copy()
        alive = np.ones(len(rows), dtype=bool)
        for j in range(pieces):
            a = rows[alive]
            if len(a) == 0:
                break
            s0, s1 = j / pieces, (j + 1) / pieces
            b0 = base0[a] + s0 * (base1[a] - base0[a])
            b1 = base0[a] + s1 * (base1[a] - base0[a])
            W, okw = direct_move_batch(sliced, V[alive], b0, b1, direction, fibre)
            idx = np.flatnonzero(alive)
            V[idx[okw]] = W[okw]
            alive[idx[~okw]] = False
        U[rows[alive]] = V[alive]
        ok[rows[alive]] = True
        pieces *= 2
    return U, ok


def split_intersections_batch(U: np.ndarray, pws: PseudoWitnessSet):
    """Representatives (t, y) per row for sets with one point per cluster.

    Returns ``(t, y, ok)``; rows with colliding t-values or a root at t = 0
    are flagged.  Only valid when every cluster has size one.
    """
    t = U[:, :, 0]
    y = U[:, :, 1:]
    ok = np.all(np.abs(t) >= ON_HYPERSURFACE_TOL, axis=1)
    W = t.shape[1]
    if W > 1:
        D = np.abs(t[:, :, None] - t[:, None, :])
        D[:, np.arange(W), np.arange(W)] = np.inf
        scale = 1 + np.maximum(np.abs(t[:, :, None]), np.abs(t[:, None, :]))
        ok &= np.all(D >= 1e-6 * scale, axis=(1, 2))
    return t, y, ok
