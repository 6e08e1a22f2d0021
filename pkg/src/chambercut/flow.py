"""Gradient ascent of log r towards its local maxima."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChambercutError, EvaluationError


@dataclass
class FlowOptions:
    grad_tol: float = 1e-8
    max_steps: int = 5000
    initial_step: float = 1e-2
    min_step: float = 1e-14
    armijo: float = 1e-4
    match_tol: float = 1e-6
    polish_tol: float = 1e-13
    step_tol: float = 1e-10          # Newton steps this small (relative) mean convergence
    trajectory_stride: int = 10


@dataclass
class FlowResult:
    status: str                      # "limit", "new", "failure"
    point: np.ndarray
    limit: int | None = None         # index into the known routing points
    steps: int = 0
    min_increase: float = np.inf     # smallest accepted increase of log r
    reason: str = ""
    trajectory: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status in ("limit", "new")


def match_point(x, points, tol: float = 1e-6) -> int | None:
    for i, y in enumerate(points):
        if np.linalg.norm(x - y) <= tol * (1 + np.linalg.norm(y)):
            return i
    return None


def polish_critical(rf, x, tol: float = 1e-13, max_iter: int = 20):
    """Real Newton iteration on grad log r = 0."""
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        g, H = rf.derivatives(x, 2)
        dx = np.linalg.solve(H, -g)
        x = x + dx
        if np.linalg.norm(dx) <= tol * (1 + np.linalg.norm(x)):
            return x
    g, _ = rf.derivatives(x, 1)
    if np.linalg.norm(g) > 1e-8 * (1 + np.linalg.norm(x)):
        raise ChambercutError("Newton polish of a critical point did not converge")
    return x


def gradient_flow(rf, x0, known=None, opts: FlowOptions | None = None) -> FlowResult:
    """Ascend log r from x0 and identify the limit among ``known`` points.

    Steps are normalized gradient steps with an adaptive length, accepted only
    when log r increases (Armijo) and no sign of h or of an extra factor
    changes.  Near a nondegenerate maximum the iteration switches to Newton.
    """
    opts = opts or FlowOptions()
    known = [] if known is None else [np.asarray(p, dtype=float) for p in known]
    x = np.array(x0, dtype=float)
    traj = [x.copy()]
    try:
        val, signs = rf.log_value(x)
        g, H = rf.derivatives(x, 2)
    except EvaluationError as exc:
        return FlowResult("failure", x, reason=f"start not evaluable: {exc}")
    eta = opts.initial_step * (1 + np.linalg.norm(x))
    min_inc = np.inf
    steps = 0
    while steps < opts.max_steps:
        gn = np.linalg.norm(g)
        if gn < opts.grad_tol:
            break
        steps += 1
        u = g / gn
        Hn = np.linalg.norm(H, 2)
        kappa = abs(u @ H @ u)
        cap = 0.5 * gn / max(kappa, 1e-2 * Hn, 1e-300)
        candidates = []
        w = np.linalg.eigvalsh(H)
        if w[-1] < 0:
            dxn = -np.linalg.solve(H, g)
            if np.linalg.norm(dxn) <= 4 * cap:
                candidates.append(("newton", dxn))
        length = min(eta, cap)
        accepted = done = False
        while not accepted and not done:
            kind, dx = candidates.pop(0) if candidates else ("grad", length * u)
            xn = x + dx
            try:
                vn, sn = rf.log_value(xn)
                ok = sn == signs and vn >= val + opts.armijo * (g @ dx) * (kind == "grad")
                if kind == "newton":
                    ok = sn == signs and vn >= val - 1e-14 * (1 + abs(val))
                if ok:
                    gn_, Hn_ = rf.derivatives(xn, 2)
            except EvaluationError:
                ok = False
            if ok:
                accepted = True
                min_inc = min(min_inc, vn - val)
                x, val, g, H = xn, vn, gn_, Hn_
                if kind == "grad":
                    eta = min(2.0 * length, 1e3 * (1 + np.linalg.norm(x)))
                elif np.linalg.norm(dx) <= opts.step_tol * (1 + np.linalg.norm(x)):
                    done = True
            elif kind == "grad":
                length *= 0.5
                eta = length
                if length < opts.min_step * (1 + np.linalg.norm(x)):
                    # at a sharp maximum the gradient noise floor can sit above
                    # grad_tol: accept when Newton says we are already there
                    if w[-1] < 0 and np.linalg.norm(np.linalg.solve(H, g)) <= \
                            opts.match_tol * (1 + np.linalg.norm(x)):
                        done = True
                    else:
                        return FlowResult("failure", x, None, steps, min_inc,
                                          "step stall (backtracking underflow)", traj)
        if done:
            break
        if steps % opts.trajectory_stride == 0:
            traj.append(x.copy())
    else:
        return FlowResult("failure", x, None, steps, min_inc, "maximum steps reached", traj)
    traj.append(x.copy())
    try:
        x = polish_critical(rf, x, opts.polish_tol)
    except (ChambercutError, np.linalg.LinAlgError) as exc:
        return FlowResult("failure", x, None, steps, min_inc, f"polish failed: {exc}", traj)
    idx = match_point(x, known, opts.match_tol)
    if idx is None:
        return FlowResult("new", x, None, steps, min_inc, "", traj)
    return FlowResult("limit", known[idx], idx, steps, min_inc, "", traj)
