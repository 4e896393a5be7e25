"""Computable convergence bounds for the Halpern inexact proximal point method.

All envelopes assume constant ``c`` and criterion A with the tolerance rule
``eps_k = 1/(k+2)^(1+delta)``; the linear-rate check assumes criterion B,
nondecreasing ``c_k`` and an operator whose inverse is Lipschitz at zero.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

__all__ = [
    "ConvergedBeforeWindow",
    "EnvelopeParams",
    "BoundReport",
    "LinearRateParams",
    "LinearRateReport",
    "beta0",
    "theta",
    "theta_envelope",
    "exact_envelope",
    "deltak_upper",
    "deltak_exact",
    "deltak_bruteforce",
    "fit_rate",
    "predicted_slope",
    "bound_report",
    "distance_envelope",
    "linear_rate_check",
]

BOUNDARY_TOL = 1e-12


class ConvergedBeforeWindow(ValueError):
    """A residual in the fitting window is zero: the run converged earlier."""


def beta0(delta, tail_tol=1e-12):
    """Sum of the tolerance series, ``sum_{k>=0} 1/(k+2)^(1+delta)``.

    Evaluated as the Hurwitz zeta function ``zeta(1 + delta, 2)``, whose
    accuracy (about 1e-15 relative) is far below any sensible ``tail_tol``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    return float(zeta(1.0 + delta, 2.0))


@dataclass(frozen=True)
class EnvelopeParams:
    delta: float
    beta0: float
    kappa0: float
    dist0: float

    @classmethod
    def from_run(cls, delta, dist0):
        b = beta0(delta)
        return cls(delta, b, 2.0 * (b + dist0), dist0)


def _branch(delta):
    for edge in (1.0, 2.0):
        if abs(delta - edge) <= BOUNDARY_TOL:
            return edge
    return delta


def theta(params, k):
    """Five-branch ``Theta_k`` bounding ``Delta_k`` under the tolerance rule."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("theta is defined for k >= 1")
    d = _branch(params.delta)
    kap, b = params.kappa0, params.beta0
    t = k + 1.0
    if d < 1:
        return (8 * kap * b / t**2 + 4 * kap / t ** (2 + d)
                + 4 * kap * (3 - d) / (1 - d) / t ** (1 + d)
                + 8 * kap / (2 - d) / t**d)
    if d == 1:
        return (4 * kap * (1 + 2 * b) / t**2 + 4 * kap / t**3
                + 8 * kap * np.log(t) / t**2 + 8 * kap / t)
    if d < 2:
        return (8 * kap * (1 / (d - 1) + b) / t**2 + 4 * kap / t ** (2 + d)
                + 4 * kap / t ** (1 + d) + 8 * kap / (2 - d) / t**d)
    if d == 2:
        return (8 * kap * (1 + b) / t**2 + 4 * kap / t**4 + 4 * kap / t**3
                + 8 * kap * np.log(t) / t**2)
    return (8 * kap * (1 / (d - 1) + 1 / (d - 2) + b) / t**2
            + 4 * kap / t ** (2 + d) + 4 * kap / t ** (1 + d))


def theta_envelope(params, k):
    """Residual envelope ``2 dist0/(k+1) + sqrt(Theta_k)``."""
    return exact_envelope(params.dist0, k) + np.sqrt(theta(params, k))


def exact_envelope(dist0, k):
    """Envelope ``2 dist0/(k+1)`` of the exact Halpern iteration."""
    return 2.0 * dist0 / (np.asarray(k, dtype=float) + 1.0)


def deltak_upper(params, eps_history, k):
    """Upper bound on ``Delta_k`` from the tolerance history.

    ``eps_history[j]`` is ``eps_j`` for ``j >= 0``; the convention
    ``eps_{-1} = eps_0`` is applied internally. Needs ``len >= max(k, 1)``.
    """
    eps = np.asarray(eps_history, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if eps.shape[0] < k:
        raise ValueError(f"eps history has {eps.shape[0]} entries, need {k}")
    kap, b = params.kappa0, params.beta0
    t2 = (k + 1.0) ** 2
    e_prev = eps[k - 1]
    j = np.arange(1, k)
    e_jm1 = eps[j - 1]
    return (4 * kap * e_prev * k / t2
            + 8 * kap * b / t2
            + 8 * kap / t2 * np.sum(j * e_jm1)
            + 4 * kap * e_prev
            + 8 * kap / t2 * np.sum((j + 1.0) ** 2 * e_jm1))


def _require_eta(trace):
    if trace.eta is None or trace.prox is None:
        raise ValueError("trace lacks stored error vectors; rerun with store_eta=True")


def deltak_exact(trace, k):
    """Exact perturbation term ``Delta_k`` assembled from the stored errors.

    Requires a constant-``c`` trace recorded with ``store_eta=True`` and
    ``1 <= k < len(trace)``; ``eta_{-1} = 0``.
    """
    _require_eta(trace)
    if not 1 <= k < len(trace):
        raise ValueError(f"k={k} outside 1..{len(trace) - 1}")
    z, eta, prox = trace.z, trace.eta, trace.prox
    z0, zk = z[0], z[k]
    n = z.shape[1]
    eta_prev = np.vstack([np.zeros(n), eta[:-1]])  # row j holds eta_{j-1}
    j = np.arange(k)
    w = (j + 1.0) / (j + 2.0)
    d0 = z0 - z[:k]              # z0 - z_j
    r = prox[:k] - z[:k]         # P(z_j) - z_j
    e, ep = eta[:k], eta_prev[:k]
    rk = zk - prox[k]
    s = 4.0 / (k + 1.0) ** 2
    dot = lambda a, b: np.einsum("ij,ij->i", a, b)
    jj = np.arange(1, k + 1)
    return (s * k * (zk - z0) @ eta[k - 1]
            + s * np.sum(dot(d0, w[:, None] * e))
            + s * np.sum(j * dot(d0, w[:, None] * e - ep))
            + 4.0 * k / (k + 1.0) * rk @ eta[k - 1]
            - s * np.sum((j + 1.0) ** 3 / (j + 2.0) * dot(r, ep - e))
            + s * np.sum(w * dot(r, ep))
            - s * np.sum(jj**2 / (jj + 1.0) * dot(eta[:k], eta[:k])))


def deltak_bruteforce(trace, k):
    """``Delta_k`` recomputed from the weighted nonexpansiveness sum.

    Independent of :func:`deltak_exact`: it evaluates
    ``sum_j j(j+1)(||P z_j - P z_{j-1}||^2 - ||z_j - z_{j-1}||^2)`` directly
    and strips the residual terms, without any of the rearranged error sums.
    """
    _require_eta(trace)
    z, prox = trace.z, trace.prox
    total = 0.0
    for j in range(1, k + 1):
        total += j * (j + 1) * (np.sum((prox[j] - prox[j - 1]) ** 2)
                                - np.sum((z[j] - z[j - 1]) ** 2))
    rk = z[k] - prox[k]
    rest = total - k * (k + 1) * (rk @ rk) - 2 * (k + 1) * rk @ (z[k] - z[0])
    return -2.0 * rest / (k + 1.0) ** 2


def _geometric_indices(k_min, k_max, points=60):
    ks = np.unique(np.round(np.geomspace(k_min, k_max, points)).astype(int))
    return ks


def fit_rate(residuals, k_min=None, k_max=None):
    """Least-squares slope of ``log residual`` against ``log(k + 1)``.

    ``residuals`` is an array indexed by ``k`` or an object with a
    ``residual`` attribute. The window ``[k_min, k_max]`` defaults to
    ``[k_max/10, k_max]`` and is sampled geometrically so late iterations
    do not dominate.
    """
    res = np.asarray(getattr(residuals, "residual", residuals), dtype=float)
    if k_max is None:
        k_max = res.shape[0] - 1
    if k_min is None:
        k_min = max(k_max // 10, 10)
    if not (k_min >= 10 and k_max >= 2 * k_min):
        raise ValueError("window must satisfy k_max >= 2 k_min >= 20")
    if k_max >= res.shape[0]:
        raise ValueError(f"k_max={k_max} beyond trace length {res.shape[0]}")
    ks = _geometric_indices(k_min, k_max)
    vals = res[ks]
    keep = ~np.isnan(vals)
    ks, vals = ks[keep], vals[keep]
    if np.any(vals <= 0):
        raise ConvergedBeforeWindow("converged before window")
    if ks.size < 2:
        raise ValueError("not enough sampled residuals in window")
    slope, _ = np.polyfit(np.log(ks + 1.0), np.log(vals), 1)
    return float(slope)


def predicted_slope(delta):
    """Predicted log-log slope of the envelope: ``-delta/2`` up to ``-1``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return -min(delta / 2.0, 1.0)


@dataclass
class BoundReport:
    """Envelope versus observed residual for ``k = 1..K-1``.

    ``flags`` collects notes such as a negative radicand in the exact
    inequality or a skipped check.
    """

    k: np.ndarray
    observed_residual: np.ndarray
    envelope_value: np.ndarray
    deltak_upper: np.ndarray
    deltak_exact: np.ndarray | None
    satisfied: np.ndarray
    flags: list

    @property
    def all_satisfied(self):
        return bool(np.all(self.satisfied))

    @property
    def first_failure(self):
        bad = np.nonzero(~self.satisfied)[0]
        return int(self.k[bad[0]]) if bad.size else None


def bound_report(trace, delta=None, zstar=None, rel_slack=1e-9):
    """Check observed residuals against the applicable envelope.

    Exact runs (all tolerances zero) use ``2 dist0/(k+1)``; criterion-A runs
    use the five-branch envelope. Returns None (and nothing is approximated)
    when the zero of the operator is unknown or ``c`` is not constant.
    """
    zstar = trace.zstar if zstar is None else zstar
    cfg = trace.config
    if zstar is None:
        return None
    if not cfg.prox_schedule.is_constant or cfg.method != "halpern":
        return None
    if cfg.tolerance.kind != "A":
        return None
    dist0 = float(np.linalg.norm(trace.z[0] - zstar))
    K = len(trace)
    k = np.arange(1, K)
    obs = trace.residual[1:]
    flags = []
    exact = cfg.tolerance.is_exact
    d = cfg.tolerance.delta_exponent if delta is None else delta
    if exact:
        env = exact_envelope(dist0, k)
        upper = np.zeros(k.shape)
    else:
        params = EnvelopeParams.from_run(d, dist0)
        env = theta_envelope(params, k)
        eps = trace.tol
        upper = np.array([deltak_upper(params, eps, kk) for kk in k])
    exact_delta = None
    if trace.eta is not None:
        exact_delta = np.array([deltak_exact(trace, kk) for kk in k])
        radicand = 4 * dist0**2 / (k + 1.0) ** 2 + exact_delta
        if np.any(radicand < 0):
            flags.append("negative radicand in exact inequality (clamped at 0)")
    with np.errstate(invalid="ignore"):
        sat = np.where(np.isnan(obs), True, obs <= env * (1.0 + rel_slack))
    return BoundReport(k, obs, env, upper, exact_delta, sat, flags)


def distance_envelope(trace, zstar=None):
    """``||z0 - z*|| + sum_{j<k} eps_j`` for every row of a criterion-A trace."""
    zstar = trace.zstar if zstar is None else zstar
    dist0 = np.linalg.norm(trace.z[0] - zstar)
    return dist0 + np.concatenate([[0.0], np.cumsum(trace.eps_used)[:-1]])


@dataclass(frozen=True)
class LinearRateParams:
    """Contraction factors for a criterion-B run with ``T^{-1}`` Lipschitz at 0."""

    a: float
    c: np.ndarray
    delta: np.ndarray

    @property
    def mu(self):
        c = np.asarray(self.c, dtype=float)
        return self.a / np.sqrt(self.a**2 + c**2)

    @property
    def theta(self):
        d = np.asarray(self.delta, dtype=float)
        return (self.mu + d) / (1.0 - d)

    @classmethod
    def from_trace(cls, trace, a):
        return cls(a, trace.c.copy(), trace.tol.copy())


@dataclass
class LinearRateReport:
    k_bar: int | None
    max_violation: float
    ratios: np.ndarray
    theta: np.ndarray

    @property
    def ok(self):
        return self.k_bar is not None


def linear_rate_check(trace, params, zbar_star, slack=1e-12):
    """Find the first index after which ``||zbar_k - z|| <= theta_k ||z_k - z||``.

    ``max_violation`` is the largest ``ratio - theta_k`` over the whole trace
    (nonpositive when the inequality holds everywhere).
    """
    num = np.linalg.norm(trace.zbar - zbar_star, axis=1)
    den = np.linalg.norm(trace.z - zbar_star, axis=1)
    th = params.theta[: len(trace)]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(den > 0, num / den, 0.0)
    holds = num <= th * den + slack * (1.0 + den)
    bad = np.nonzero(~holds)[0]
    if bad.size == 0:
        k_bar = 0
    elif bad[-1] == len(trace) - 1:
        k_bar = None
    else:
        k_bar = int(bad[-1] + 1)
    return LinearRateReport(k_bar, float(np.max(ratio - th)), ratio, th)
