"""Accelerated inexact augmented Lagrangian method for convex QPs.

Problem::

    minimize    f0(x) = x'Qx/2 + q'x
    subject to  F(x) = Ax - b <= 0,   x in box C

Each outer step approximately minimizes ``phi_k(x) = L(x, y_k, c_k)`` over
``C`` to gap ``eps_k^2 / (2 c_k)``, applies the multiplier map and anchors
the result to ``y_0``. This is the Halpern inexact proximal point method
applied to the dual inclusion ``0 in -dg(y)``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._pg import projected_gradient
from .operators import BoxNormalCone
from .solver import ProxParamSchedule, eps_schedule, halpern_step

__all__ = [
    "CertificateUnavailable",
    "InnerSolverError",
    "ConvexProgram",
    "ALMConfig",
    "ALMTrace",
    "InnerResult",
    "aug_lagrangian",
    "multiplier_map",
    "inner_solve",
    "dual_resolvent",
    "run_alm",
    "ergodic_average",
    "thm41_bounds",
    "thm42_bounds",
    "ergodic_bounds_exact_sums",
    "pointwise_bound_check",
    "ergodic_bound_check",
    "DELTA0_HEADROOM",
]

DELTA0_HEADROOM = 1.1


class CertificateUnavailable(ValueError):
    """The inner gap certificate needs a positive definite ``Q``."""


class InnerSolverError(RuntimeError):
    """Inner solver hit its iteration cap; ``trace`` holds the partial run."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


@dataclass
class ConvexProgram:
    """Inequality-constrained convex QP over a box.

    ``x_star``, ``y_star`` and ``optimum`` are optional ground truth.
    """

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    box: BoxNormalCone | None = None
    x_star: np.ndarray | None = None
    y_star: np.ndarray | None = None
    optimum: float | None = None
    name: str = ""

    def __post_init__(self):
        self.Q = np.atleast_2d(np.array(self.Q, dtype=float))
        n = self.Q.shape[0]
        if self.Q.shape != (n, n):
            raise ValueError("Q must be square")
        if not np.allclose(self.Q, self.Q.T, rtol=0, atol=1e-14 * max(1.0, np.abs(self.Q).max())):
            raise ValueError("Q must be symmetric")
        self.q = np.array(self.q, dtype=float).reshape(-1)
        self.A = np.array(self.A, dtype=float).reshape(-1, n) if np.size(self.A) else np.zeros((0, n))
        self.b = np.array(self.b, dtype=float).reshape(-1)
        if self.q.shape[0] != n:
            raise ValueError("q has wrong dimension")
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError("b has wrong dimension")
        if self.box is None:
            self.box = BoxNormalCone(np.full(n, -np.inf), np.full(n, np.inf))
        if self.box.dim != n:
            raise ValueError("box has wrong dimension")
        eig = np.linalg.eigvalsh(self.Q)
        if eig[0] < -1e-10 * max(1.0, eig[-1]):
            raise ValueError("Q must be positive semidefinite")
        self.lam_min = max(eig[0], 0.0)
        self.lam_max = max(eig[-1], 0.0)
        self.ata_max = float(np.linalg.eigvalsh(self.A.T @ self.A)[-1]) if self.m else 0.0

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def m(self):
        return self.A.shape[0]

    def f0(self, x):
        return 0.5 * x @ self.Q @ x + self.q @ x

    def F(self, x):
        return self.A @ x - self.b


def aug_lagrangian(x, y, c, prog):
    """``f0(x) + (||max(0, y + cF(x))||^2 - ||y||^2) / (2c)``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape[0] != prog.n or y.shape[0] != prog.m:
        raise ValueError("dimension mismatch")
    p = np.maximum(y + c * prog.F(x), 0.0)
    return prog.f0(x) + (p @ p - y @ y) / (2.0 * c)


def multiplier_map(x, y, c, prog):
    """``Y(x, y, c) = max(0, y + c(Ax - b))``."""
    return np.maximum(np.asarray(y, dtype=float) + c * prog.F(np.asarray(x, dtype=float)), 0.0)


@dataclass
class InnerResult:
    x: np.ndarray
    gap_cert: float
    iterations: int
    inf_phi: float | None = None
    dist_cert: float | None = None


def inner_solve(prog, y, c, gap_target, oracle_mode=False, x0=None, max_iter=200000,
                strict=True, oracle_tol=1e-13):
    """Minimize ``phi(x) = L(x, y, c)`` over the box with a certified gap.

    The certificate ``||G(x)||^2 / (2 lambda_min(Q))`` bounds
    ``phi(x+) - inf phi`` for the projected step ``x+`` returned. In
    ``oracle_mode`` the solve runs to ``oracle_tol (1 + |phi|)`` and reports
    ``inf_phi`` for ex-post checks.
    """
    if prog.lam_min <= 0:
        raise CertificateUnavailable("certificate unavailable (Q not positive definite), use oracle_mode")
    y = np.asarray(y, dtype=float)
    Q, q, A, b = prog.Q, prog.q, prog.A, prog.b
    lo, hi = prog.box.lower, prog.box.upper
    mu = prog.lam_min
    L = (prog.lam_max + c * prog.ata_max) * (1.0 + 1e-12)

    def grad(x):
        return Q @ x + q + A.T @ np.maximum(y + c * (A @ x - b), 0.0)

    def polish(x):
        act = y + c * (A @ x - b) > 0
        free = (x > lo) & (x < hi)
        if not free.any():
            return None
        Ai = A[act]
        H = Q + c * Ai.T @ Ai
        rhs = -q - Ai.T @ (y[act] - c * b[act])
        fixed = ~free
        xp = x.copy()
        xp[free] = np.linalg.solve(H[np.ix_(free, free)], rhs[free] - H[np.ix_(free, fixed)] @ x[fixed])
        return np.clip(xp, lo, hi)

    start = prog.box.project(np.zeros(prog.n) if x0 is None else np.asarray(x0, dtype=float))
    if oracle_mode:
        gap_target = oracle_tol * (1.0 + abs(aug_lagrangian(start, y, c, prog)))
    x, cert, its = projected_gradient(
        grad=grad, project=prog.box.project, x0=start, L=L, mu=mu,
        certificate=lambda g: g * g / (2.0 * mu), target=gap_target,
        polish=polish, max_iter=max_iter, patience=None if strict else 50,
    )
    if strict and cert > gap_target:
        raise InnerSolverError(
            f"inner solver stalled at gap certificate {cert:.3e} > target {gap_target:.3e}")
    res = InnerResult(x, float(cert), its)
    if oracle_mode:
        res.inf_phi = aug_lagrangian(x, y, c, prog)
    return res


def dual_resolvent(prog, y, c, max_iter=200000):
    """Reference value of the dual proximal map and its certified error.

    Uses ``(P_c g)(y) = max(0, y + cF(x_c(y)))`` with ``x_c(y)`` solved as
    accurately as floating point allows; the error bound is
    ``sqrt(2 c gap)``.
    """
    res = inner_solve(prog, y, c, 0.0, max_iter=max_iter, strict=False)
    return multiplier_map(res.x, y, c, prog), float(np.sqrt(2.0 * c * res.gap_cert))


@dataclass
class ALMConfig:
    y0: np.ndarray
    prox_schedule: ProxParamSchedule = field(default_factory=ProxParamSchedule)
    delta: float = 1.0
    max_outer: int = 1000
    inner_max_iter: int = 200000
    inner_oracle_tol: float = 1e-13

    def __post_init__(self):
        self.y0 = np.array(self.y0, dtype=float).reshape(-1)
        if np.any(self.y0 < 0):
            raise ValueError("y0 must be nonnegative")
        if self.prox_schedule.mode not in ("constant", "linear"):
            raise ValueError("ALM supports constant and linear schedules")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class ALMTrace:
    """Outer-loop record.

    Row ``k`` of ``x``, ``xtilde``, ``ybar``, ``c``, ``eps``, ``gap_cert``
    belongs to outer step ``k``: it holds ``x^{k+1}``, the ergodic average
    ``x~^{k+1}``, ``ybar^k``, ``c_k``, ``eps_k``. ``y`` has one extra row
    (``y^0`` .. ``y^K``), as does ``delta0_running``.
    """

    y: np.ndarray
    ybar: np.ndarray
    x: np.ndarray
    xtilde: np.ndarray
    c: np.ndarray
    eps: np.ndarray
    gap_cert: np.ndarray
    inner_iterations: np.ndarray
    delta0_running: np.ndarray
    feas_max: np.ndarray
    obj_gap: np.ndarray
    prog: ConvexProgram
    config: ALMConfig

    def __len__(self):
        return self.x.shape[0]

    @property
    def delta0(self):
        """``Delta_0`` bound on ``||y^k||`` with headroom, taken over the whole run."""
        return DELTA0_HEADROOM * float(self.delta0_running[-1])


def _assemble(prog, config, rows):
    y, ybar, x, xt, c, eps, gap, inner, d0, feas, obj = rows
    m, n = prog.m, prog.n
    return ALMTrace(
        y=np.array(y).reshape(-1, m), ybar=np.array(ybar).reshape(-1, m),
        x=np.array(x).reshape(-1, n), xtilde=np.array(xt).reshape(-1, n),
        c=np.array(c), eps=np.array(eps), gap_cert=np.array(gap),
        inner_iterations=np.array(inner, dtype=int), delta0_running=np.array(d0),
        feas_max=np.array(feas), obj_gap=np.array(obj), prog=prog, config=config,
    )


def run_alm(prog, config):
    """Run the accelerated inexact augmented Lagrangian method."""
    y0 = config.y0
    if y0.shape[0] != prog.m:
        raise ValueError(f"y0 has dimension {y0.shape[0]}, program has {prog.m} constraints")
    rows = tuple([] for _ in range(11))
    ys, ybars, xs, xts, cs, epss, gaps, inners, d0s, feass, objs = rows
    y = y0.copy()
    ys.append(y)
    d0s.append(float(np.linalg.norm(y)))
    x = prog.box.project(np.zeros(prog.n))
    csum, xsum = 0.0, np.zeros(prog.n)
    for k in range(config.max_outer):
        c = config.prox_schedule(k)
        eps = eps_schedule(config.delta, k)
        try:
            res = inner_solve(prog, y, c, eps * eps / (2.0 * c), x0=x,
                              max_iter=config.inner_max_iter)
        except InnerSolverError as exc:
            raise InnerSolverError(f"outer step {k}: {exc}", _assemble(prog, config, rows)) from None
        x = res.x
        ybar = multiplier_map(x, y, c, prog)
        y = halpern_step(y0, ybar, k)
        csum += c
        xsum = xsum + c * x
        xt = xsum / csum

        ys.append(y)
        ybars.append(ybar)
        xs.append(x)
        xts.append(xt)
        cs.append(c)
        epss.append(eps)
        gaps.append(res.gap_cert)
        inners.append(res.iterations)
        d0s.append(max(d0s[-1], float(np.linalg.norm(y))))
        feass.append(float(np.max(prog.F(xt))) if prog.m else -np.inf)
        objs.append(prog.f0(xt) - prog.optimum if prog.optimum is not None else np.nan)
    return _assemble(prog, config, rows)


def ergodic_average(x_history, c_history, k):
    """``x~^k = sum_{j=1}^k w_j x^j`` with ``w_j = c_{j-1} / sum_{l=1}^k c_{l-1}``.

    ``x_history[j-1]`` is ``x^j`` and ``c_history[j-1]`` is ``c_{j-1}``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = np.asarray(x_history, dtype=float)[:k]
    w = np.asarray(c_history, dtype=float)[:k]
    if X.shape[0] < k or w.shape[0] < k:
        raise ValueError("history shorter than k")
    w = w / w.sum()
    return w @ X.reshape(k, -1)


def thm41_bounds(trace, k, c_k=None):
    """Pointwise bounds on ``f_i(x^{k+1})`` and ``f0(x^{k+1}) - min(P)``.

    ``c_k`` defaults to the value recorded in the trace.
    """
    if not 0 <= k < len(trace):
        raise ValueError(f"k={k} outside the trace")
    y0, yk, yk1 = trace.y[0], trace.y[k], trace.y[k + 1]
    c = trace.c[k] if c_k is None else c_k
    eps = trace.eps[k]
    feas = (yk1 - yk + (yk1 - y0) / (k + 1.0)) / c
    inner = (yk1 - y0) @ (yk1 - y0 / (2.0 * k + 3.0))
    obj = (eps**2 + yk @ yk - yk1 @ yk1 - (2.0 * k + 3.0) / (k + 1.0) ** 2 * inner) / (2.0 * c)
    return feas, float(obj)


def thm42_bounds(Delta0, delta, c0, schedule, k):
    """Ergodic feasibility and objective bounds at ``x~^k``.

    ``schedule`` is ``"constant"`` (any nondecreasing ``c_k >= c0``) or
    ``"linear"`` (``c_k = c0 (k + 1)``).
    """
    if k < 2:
        raise ValueError("bounds need k >= 2")
    lnk = np.log(k)
    core = 2.0 * (1.0 + delta) / (1.0 + 2.0 * delta) + 13.0 * Delta0**2 + 12.0 * Delta0**2 * lnk
    if schedule in ("constant", "increasing", "geometric"):
        return (3.0 * Delta0 + 2.0 * lnk) / (c0 * k), core / (2.0 * c0 * k)
    if schedule == "linear":
        return (2.0 * (3.0 * Delta0 + 2.0 * lnk) / (c0 * k * (k + 1.0)),
                core / (c0 * k * (k + 1.0)))
    raise ValueError(f"unknown schedule {schedule!r}")


def ergodic_bounds_exact_sums(Delta0, eps, c, k):
    """Ergodic bounds before the integral estimates are applied.

    Uses the actual ``c_0..c_{k-1}`` and ``eps_0..eps_{k-1}`` and the
    harmonic partial sums in place of ``ln k``; tighter than
    :func:`thm42_bounds`.
    """
    if k < 2:
        raise ValueError("bounds need k >= 2")
    c = np.asarray(c, dtype=float)[:k]
    eps = np.asarray(eps, dtype=float)[:k]
    if c.shape[0] < k or eps.shape[0] < k:
        raise ValueError("history shorter than k")
    harm = np.sum(1.0 / np.arange(2, k + 1))
    csum = c.sum()
    feas = (3.0 * Delta0 + 2.0 * Delta0 * harm) / csum
    obj = (np.sum(eps**2) + 13.0 * Delta0**2 + 12.0 * Delta0**2 * harm) / (2.0 * csum)
    return float(feas), float(obj)


def pointwise_bound_check(trace, atol=1e-12):
    """Per-step check of the two pointwise bounds.

    Returns ``(feas_ok, obj_ok)`` boolean arrays over outer steps; the
    objective check is all True when the optimum is unknown. ``atol`` is
    scaled by ``1 + |value|`` to absorb rounding at convergence.
    """
    prog = trace.prog
    K = len(trace)
    feas_ok = np.ones(K, dtype=bool)
    obj_ok = np.ones(K, dtype=bool)
    for k in range(K):
        fb, ob = thm41_bounds(trace, k)
        x = trace.x[k]
        Fx = prog.F(x)
        feas_ok[k] = np.all(Fx <= fb + atol * (1.0 + np.abs(fb)))
        if prog.optimum is not None:
            gap = prog.f0(x) - prog.optimum
            obj_ok[k] = gap <= ob + atol * (1.0 + abs(prog.optimum) + abs(ob))
    return feas_ok, obj_ok


def ergodic_bound_check(trace, Delta0=None):
    """Check ``x~^k`` against the ergodic bounds for every ``k >= 2``.

    Returns ``(k, feas_bound, obj_bound, feas_ok, obj_ok)`` arrays.
    """
    cfg = trace.config
    D0 = trace.delta0 if Delta0 is None else Delta0
    ks = np.arange(2, len(trace) + 1)
    fb = np.empty(ks.shape)
    ob = np.empty(ks.shape)
    for i, k in enumerate(ks):
        fb[i], ob[i] = thm42_bounds(D0, cfg.delta, cfg.prox_schedule.c0, cfg.prox_schedule.mode, k)
    feas = trace.feas_max[ks - 1]
    obj = trace.obj_gap[ks - 1]
    feas_ok = feas <= fb
    obj_ok = np.where(np.isnan(obj), True, obj <= ob)
    return ks, fb, ob, feas_ok, obj_ok
