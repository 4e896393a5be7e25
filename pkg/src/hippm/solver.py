"""Halpern-accelerated inexact proximal point method and the classical baseline.

The Halpern iteration anchors every step to the starting point::

    zbar_k ~ P_{c_k}(z_k)                      (criterion A or B)
    z_{k+1} = z_0 / (k + 2) + (k + 1) / (k + 2) * zbar_k

while the classical (Rockafellar) method simply sets ``z_{k+1} = zbar_k``.
"""

from dataclasses import dataclass, field

import numpy as np

from .operators import reference_tol

__all__ = [
    "CriterionBUnattainable",
    "ToleranceSchedule",
    "ProxParamSchedule",
    "SolveConfig",
    "IterateTrace",
    "eps_schedule",
    "halpern_step",
    "inject_adversarial_error",
    "unit_direction",
    "run_hippm",
]

HALVING_LIMIT = 60


class CriterionBUnattainable(RuntimeError):
    """The relative criterion could not be certified (iterate is near a fixed point)."""


def eps_schedule(delta, k):
    """Summable tolerance ``1 / (k + 2)^(1 + delta)``.

    >>> eps_schedule(1.0, 0)
    0.25
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    return 1.0 / (k + 2.0) ** (1.0 + delta)


@dataclass(frozen=True)
class ToleranceSchedule:
    """Inexactness sequence for criterion A (``eps_k``) or B (``delta_k``).

    Both criteria draw their sequence from :func:`eps_schedule` unless an
    explicit ``override`` sequence is given; an all-zero override requests
    exact resolvents.
    """

    kind: str = "A"
    delta_exponent: float = 1.0
    override: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("A", "B"):
            raise ValueError(f"criterion must be 'A' or 'B', got {self.kind!r}")
        if not self.delta_exponent > 0:
            raise ValueError("delta_exponent must be positive")
        if self.override is not None:
            object.__setattr__(self, "override", tuple(float(v) for v in self.override))
            if any(v < 0 for v in self.override):
                raise ValueError("override tolerances must be nonnegative")

    @classmethod
    def exact(cls, length):
        return cls("A", 1.0, (0.0,) * length)

    @property
    def is_exact(self):
        return self.override is not None and not any(self.override)

    def __call__(self, k):
        if self.override is not None:
            if k >= len(self.override):
                raise IndexError(f"override sequence has no entry for k={k}")
            return self.override[k]
        return eps_schedule(self.delta_exponent, k)

    def values(self, n):
        return np.array([self(k) for k in range(n)])


@dataclass(frozen=True)
class ProxParamSchedule:
    """Proximal parameters ``c_k``.

    ``mode`` is ``"constant"`` (``c_k = c0``), ``"geometric"``
    (``c_k = min(c0 * growth**k, cap)``) or ``"linear"`` (``c_k = c0 (k + 1)``).
    """

    mode: str = "constant"
    c0: float = 1.0
    growth: float = 1.0
    cap: float = np.inf

    def __post_init__(self):
        if self.mode not in ("constant", "geometric", "linear"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if self.growth < 1:
            raise ValueError("growth must be >= 1")
        if not self.cap >= self.c0:
            raise ValueError("cap must be >= c0")

    @classmethod
    def constant(cls, c):
        return cls("constant", c)

    @classmethod
    def geometric(cls, c0, growth, cap=np.inf):
        return cls("geometric", c0, growth, cap)

    @classmethod
    def linear(cls, c0):
        return cls("linear", c0)

    @classmethod
    def parse(cls, text):
        """Parse ``constant:1``, ``linear:0.5`` or ``geometric:1,2,1e6``."""
        mode, _, args = text.partition(":")
        try:
            vals = [float(v) for v in args.split(",")] if args else []
        except ValueError:
            raise ValueError(f"bad schedule {text!r}") from None
        if mode == "constant" and len(vals) == 1:
            return cls.constant(vals[0])
        if mode == "linear" and len(vals) == 1:
            return cls.linear(vals[0])
        if mode == "geometric" and len(vals) in (2, 3):
            return cls.geometric(*vals)
        raise ValueError(f"bad schedule {text!r}")

    def __str__(self):
        if self.mode == "geometric":
            return f"geometric:{self.c0!r},{self.growth!r},{self.cap!r}"
        return f"{self.mode}:{self.c0!r}"

    @property
    def is_constant(self):
        return self.mode == "constant" or (self.mode == "geometric" and self.growth == 1)

    def __call__(self, k):
        if self.mode == "constant":
            return self.c0
        if self.mode == "linear":
            return self.c0 * (k + 1)
        # exponent capped to avoid overflow warnings on long runs
        e = min(k, 2000)
        return float(min(self.c0 * self.growth ** e, self.cap))


@dataclass
class SolveConfig:
    """Settings for :func:`run_hippm`.

    ``error_mode`` is ``"natural"`` (whatever the resolvent oracle returns
    under its tolerance) or ``"adversarial"`` (reference resolvent plus an
    error spending the whole tolerance budget in a seeded random direction).
    """

    anchor: np.ndarray
    max_iter: int = 1000
    stop_residual: float = 0.0
    method: str = "halpern"
    prox_schedule: ProxParamSchedule = field(default_factory=ProxParamSchedule)
    tolerance: ToleranceSchedule = field(default_factory=ToleranceSchedule)
    error_mode: str = "natural"
    seed: int = 0
    residual_stride: int = 1
    store_eta: bool = False
    zstar: np.ndarray | None = None

    def __post_init__(self):
        self.anchor = np.array(self.anchor, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.anchor)):
            raise ValueError("anchor must be finite")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.stop_residual < 0:
            raise ValueError("stop_residual must be >= 0")
        if self.method not in ("halpern", "classical"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.error_mode not in ("natural", "adversarial"):
            raise ValueError(f"unknown error mode {self.error_mode!r}")
        if self.residual_stride < 1:
            raise ValueError("residual_stride must be >= 1")


@dataclass
class IterateTrace:
    """Per-iteration record of a run; row ``k`` describes iterate ``z_k``.

    ``eps_used`` is the certified bound on ``||zbar_k - P_{c_k}(z_k)||``;
    ``tol`` the scheduled value (``eps_k`` or ``delta_k``). Residuals not
    sampled under a stride are NaN. ``eta`` and ``prox`` (reference
    resolvent values) are filled only when ``store_eta`` was set.
    """

    z: np.ndarray
    zbar: np.ndarray
    c: np.ndarray
    tol: np.ndarray
    eps_used: np.ndarray
    residual: np.ndarray
    dist_to_star: np.ndarray
    inner_iterations: np.ndarray
    criterion_ok: np.ndarray
    final: np.ndarray
    config: SolveConfig
    eta: np.ndarray | None = None
    prox: np.ndarray | None = None

    def __len__(self):
        return self.z.shape[0]

    @property
    def anchor(self):
        return self.z[0]

    @property
    def zstar(self):
        return self.config.zstar


def halpern_step(z0, zbar_k, k):
    """Anchored convex combination ``z0/(k+2) + (k+1)/(k+2) zbar_k``."""
    z0 = np.asarray(z0, dtype=float)
    zbar_k = np.asarray(zbar_k, dtype=float)
    if z0.shape != zbar_k.shape:
        raise ValueError(f"dimension mismatch: {z0.shape} vs {zbar_k.shape}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    return z0 / (k + 2.0) + (k + 1.0) / (k + 2.0) * zbar_k


def unit_direction(dim, seed, k):
    """Deterministic pseudo-random unit vector for iteration ``k``."""
    rng = np.random.default_rng([int(seed), int(k)])
    u = rng.standard_normal(dim)
    return u / np.linalg.norm(u)


def inject_adversarial_error(z_exact, budget, direction_seed, k=0):
    """Return ``z_exact + budget * u`` with a seeded unit vector ``u``."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    z_exact = np.asarray(z_exact, dtype=float)
    if budget == 0:
        return z_exact.copy()
    return z_exact + budget * unit_direction(z_exact.shape[0], direction_seed, k)


def _resolve_criterion_b(op, c, z, delta_k):
    """Tighten the oracle tolerance until ``err <= delta_k ||zbar - z||``."""
    tol = delta_k * max(1.0, float(np.linalg.norm(z)))
    for _ in range(HALVING_LIMIT + 1):
        res = op.resolvent(c, z, tol)
        if res.error_bound <= delta_k * np.linalg.norm(res.point - z):
            return res
        tol *= 0.5
    raise CriterionBUnattainable(
        "criterion B unattainable: resolvent output indistinguishable from the iterate")


def run_hippm(op, config):
    """Run the Halpern (or classical) inexact proximal point method.

    Parameters
    ----------
    op : MonotoneOperator
        Operator whose zero is sought.
    config : SolveConfig
        Anchor, schedules, criterion and error model.

    Returns
    -------
    IterateTrace
        One row per iteration performed (at most ``config.max_iter``).
    """
    z0 = config.anchor
    if z0.shape[0] != op.dim:
        raise ValueError(f"anchor has dimension {z0.shape[0]}, operator has {op.dim}")
    sched, cs = config.tolerance, config.prox_schedule
    zstar = config.zstar
    n, K = op.dim, config.max_iter
    adversarial = config.error_mode == "adversarial"
    exact_run = sched.is_exact

    zs, zbars, etas, proxs = [], [], [], []
    c_log, tol_log, eps_log, res_log, dist_log, inner_log, ok_log = ([] for _ in range(7))

    z = z0.copy()
    for k in range(K):
        c = cs(k)
        tk = sched(k)
        sample = k % config.residual_stride == 0
        need_ref = sample or adversarial or config.store_eta or op.exact
        ref_err = 0.0
        p_ref = None
        if need_ref:
            rtol = 0.0 if op.exact else reference_tol(z)
            ref = op.resolvent(c, z, rtol)
            p_ref, ref_err = ref.point, ref.error_bound
        residual = float(np.linalg.norm(z - p_ref)) if sample else np.nan

        inner = 0
        stop = sample and residual <= config.stop_residual
        if stop:
            zbar, err = p_ref, ref_err
        elif exact_run or (op.exact and not adversarial):
            if not op.exact:
                raise ValueError("exact resolvents requested on an operator without closed form")
            zbar, err = p_ref, 0.0
        elif adversarial:
            if sched.kind == "A":
                budget = max(tk - ref_err, 0.0)
            else:
                d = np.linalg.norm(p_ref - z)
                budget = max((tk * d - ref_err) / (1.0 + tk), 0.0)
            zbar = inject_adversarial_error(p_ref, budget, config.seed, k)
            err = budget + ref_err
        elif sched.kind == "A":
            res = op.resolvent(c, z, tk)
            zbar, err, inner = res.point, res.error_bound, res.inner_iterations
        else:
            res = _resolve_criterion_b(op, c, z, tk)
            zbar, err, inner = res.point, res.error_bound, res.inner_iterations

        if sched.kind == "A":
            ok = err <= tk
        else:
            ok = err <= tk * np.linalg.norm(zbar - z) * (1.0 + 1e-12) + 1e-300

        zs.append(z)
        zbars.append(zbar)
        c_log.append(c)
        tol_log.append(tk)
        eps_log.append(err)
        res_log.append(residual)
        dist_log.append(np.linalg.norm(z - zstar) if zstar is not None else np.nan)
        inner_log.append(inner)
        ok_log.append(ok)
        if config.store_eta:
            etas.append(zbar - p_ref)
            proxs.append(p_ref)

        z = halpern_step(z0, zbar, k) if config.method == "halpern" else zbar
        if stop:
            break

    return IterateTrace(
        z=np.array(zs).reshape(-1, n),
        zbar=np.array(zbars).reshape(-1, n),
        c=np.array(c_log),
        tol=np.array(tol_log),
        eps_used=np.array(eps_log),
        residual=np.array(res_log),
        dist_to_star=np.array(dist_log),
        inner_iterations=np.array(inner_log, dtype=int),
        criterion_ok=np.array(ok_log, dtype=bool),
        final=z,
        config=config,
        eta=np.array(etas).reshape(-1, n) if config.store_eta else None,
        prox=np.array(proxs).reshape(-1, n) if config.store_eta else None,
    )
