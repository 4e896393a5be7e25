"""Finite-dimensional maximal monotone operators and their resolvents.

Every operator exposes ``resolvent(c, y, tol)`` returning a
:class:`ResolventResult` whose ``error_bound`` certifies
``||point - (I + cT)^{-1} y|| <= error_bound``. Closed-form families report
a zero bound; :class:`QuadraticBoxSubdifferential` runs a certified inner
minimizer.
"""

from dataclasses import dataclass

import numpy as np

from ._pg import projected_gradient

__all__ = [
    "ResolventResult",
    "ExactResolventUnavailable",
    "ResolventError",
    "MonotoneOperator",
    "AffineOperator",
    "BoxNormalCone",
    "ScaledIdentityPlusSkew",
    "QuadraticBoxSubdifferential",
    "resolvent",
    "fixed_point_residual",
    "zero_point",
    "reference_tol",
]


class ExactResolventUnavailable(ValueError):
    """Raised when ``tol=0`` is requested from an operator without closed form."""


class ResolventError(RuntimeError):
    """Raised when the inner minimizer cannot certify the requested accuracy."""


@dataclass(frozen=True)
class ResolventResult:
    point: np.ndarray
    error_bound: float
    inner_iterations: int = 0


def reference_tol(z):
    """Default accuracy for reference resolvents, ``1e-13 (1 + ||z||)``."""
    return 1e-13 * (1.0 + float(np.linalg.norm(z)))


def _vector(x, n=None, name="vector"):
    x = np.array(x, dtype=float).reshape(-1)
    if n is not None and x.shape[0] != n:
        raise ValueError(f"{name} has dimension {x.shape[0]}, expected {n}")
    return x


def _matrix(M, name="matrix"):
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


class MonotoneOperator:
    """Base class for the operator catalog.

    Subclasses set ``dim`` and ``exact`` and implement ``_resolve``.
    """

    dim: int
    exact: bool = True

    def resolvent(self, c, y, tol=0.0):
        """Approximate ``P_c(y) = (I + cT)^{-1} y`` within ``tol``."""
        if not c > 0:
            raise ValueError(f"proximal parameter must be positive, got {c}")
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        y = _vector(y, self.dim, "y")
        if not np.all(np.isfinite(y)):
            raise ValueError("y has non-finite entries")
        return self._resolve(float(c), y, float(tol))

    def _resolve(self, c, y, tol):
        raise NotImplementedError

    def zero_point(self):
        """An element of ``T^{-1}(0)`` or None when it is not available."""
        return None


class AffineOperator(MonotoneOperator):
    """``T(z) = Mz + q`` with ``M + M^T`` positive semidefinite."""

    def __init__(self, M, q=None):
        M = _matrix(M, "M")
        n = M.shape[0]
        q = np.zeros(n) if q is None else _vector(q, n, "q")
        scale = max(np.linalg.norm(M, 2), 1.0)
        if np.linalg.eigvalsh(M + M.T).min() < -1e-10 * scale:
            raise ValueError("M + M^T is not positive semidefinite; operator is not monotone")
        self.M, self.q, self.dim = M, q, n
        self.M.flags.writeable = False
        self.q.flags.writeable = False

    def __call__(self, z):
        return self.M @ z + self.q

    def _resolve(self, c, y, tol):
        z = np.linalg.solve(np.eye(self.dim) + c * self.M, y - c * self.q)
        return ResolventResult(z, 0.0)

    def zero_point(self):
        # minimum-norm solution of Mz = -q; None when the system is inconsistent
        z, *_ = np.linalg.lstsq(self.M, -self.q, rcond=None)
        if np.linalg.norm(self.M @ z + self.q) > 1e-10 * (1.0 + np.linalg.norm(self.q)):
            return None
        return z


class BoxNormalCone(MonotoneOperator):
    """Normal cone of the box ``[lower, upper]``; its resolvent is the projection."""

    def __init__(self, lower, upper):
        lower = _vector(lower, name="lower")
        upper = _vector(upper, lower.shape[0], "upper")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("box bounds must not be NaN")
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        self.lower, self.upper, self.dim = lower, upper, lower.shape[0]

    def project(self, y):
        return np.clip(y, self.lower, self.upper)

    def contains(self, x):
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def _resolve(self, c, y, tol):
        return ResolventResult(self.project(y), 0.0)

    def zero_point(self):
        return self.project(np.zeros(self.dim))


class ScaledIdentityPlusSkew(MonotoneOperator):
    """``T(z) = mu z + S z`` with ``S`` skew-symmetric.

    For ``mu > 0`` the inverse is globally Lipschitz with modulus ``1/mu``.
    """

    def __init__(self, mu, S):
        S = _matrix(S, "S")
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        if not np.array_equal(S.T, -S):
            raise ValueError("S must be exactly skew-symmetric")
        self.mu, self.S, self.dim = float(mu), S, S.shape[0]

    @property
    def lipschitz_inverse(self):
        """Modulus ``a`` of ``T^{-1}`` at zero (inf when ``mu = 0``)."""
        return 1.0 / self.mu if self.mu > 0 else np.inf

    def __call__(self, z):
        return self.mu * z + self.S @ z

    def _resolve(self, c, y, tol):
        A = (1.0 + c * self.mu) * np.eye(self.dim) + c * self.S
        return ResolventResult(np.linalg.solve(A, y), 0.0)

    def zero_point(self):
        # origin is the unique zero for mu > 0 and the minimum-norm one otherwise
        return np.zeros(self.dim)


class QuadraticBoxSubdifferential(MonotoneOperator):
    """Subdifferential of ``x'Qx/2 + q'x`` plus the indicator of a box.

    The resolvent is a box-constrained strongly convex QP with no closed
    form. It is solved by projected gradient with step ``1/L_c``,
    ``L_c = 1 + c lambda_max(Q)``; the returned point is the projected step
    from the last iterate ``x`` and carries the certificate
    ``||G(x)|| / m_c`` with ``m_c = 1 + c lambda_min(Q)``.
    """

    exact = False

    def __init__(self, Q, q, box, max_inner=200000):
        Q = _matrix(Q, "Q")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-14 * max(1.0, np.abs(Q).max())):
            raise ValueError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        eig = np.linalg.eigvalsh(Q)
        if eig[0] < -1e-10 * max(1.0, eig[-1]):
            raise ValueError("Q must be positive semidefinite")
        n = Q.shape[0]
        if box.dim != n:
            raise ValueError("box dimension does not match Q")
        self.Q, self.q, self.box, self.dim = Q, _vector(q, n, "q"), box, n
        self.lam_min, self.lam_max = max(eig[0], 0.0), max(eig[-1], 0.0)
        self.max_inner = max_inner

    def __call__(self, z):
        """Single-valued part ``Qz + q`` (the normal cone part is omitted)."""
        return self.Q @ z + self.q

    def _resolve(self, c, y, tol, x0=None):
        if tol == 0:
            raise ExactResolventUnavailable("exact resolvent unavailable for quadratic-box operator")
        H = np.eye(self.dim) + c * self.Q
        r = y - c * self.q
        L = (1.0 + c * self.lam_max) * (1.0 + 1e-12)
        m = 1.0 + c * self.lam_min
        lo, hi = self.box.lower, self.box.upper

        def polish(x):
            free = (x > lo) & (x < hi)
            if not free.any():
                return None
            xp = x.copy()
            fixed = ~free
            rhs = r[free] - H[np.ix_(free, fixed)] @ x[fixed]
            xp[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
            return np.clip(xp, lo, hi)

        start = self.box.project(y) if x0 is None else x0
        point, cert, its = projected_gradient(
            grad=lambda x: H @ x - r,
            project=self.box.project,
            x0=start, L=L, mu=m,
            certificate=lambda g: g / m,
            target=tol, polish=polish, max_iter=self.max_inner,
        )
        if cert > tol:
            raise ResolventError(
                f"inner solver reached certificate {cert:.3e} > tol {tol:.3e}")
        return ResolventResult(point, float(cert), its)

    def zero_point(self):
        """Minimizer of the box QP, found by active-set polishing."""
        if self.lam_min <= 0:
            return None
        lo, hi = self.box.lower, self.box.upper
        Q, q = self.Q, self.q
        L = self.lam_max * (1.0 + 1e-12)

        def polish(x):
            free = (x > lo) & (x < hi)
            xp = x.copy()
            if free.any():
                fixed = ~free
                rhs = -q[free] - Q[np.ix_(free, fixed)] @ x[fixed]
                xp[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
            return np.clip(xp, lo, hi)

        x, cert, _ = projected_gradient(
            grad=lambda x: Q @ x + q, project=self.box.project,
            x0=self.box.project(np.zeros(self.dim)), L=L, mu=self.lam_min,
            certificate=lambda g: g / self.lam_min, target=1e-14,
            polish=polish, max_iter=self.max_inner,
        )
        return x


def resolvent(op, c, y, tol=0.0):
    """Evaluate ``op.resolvent(c, y, tol)``."""
    return op.resolvent(c, y, tol)


def fixed_point_residual(op, c, z, ref_tol=None):
    """``||z - P_c(z)||`` with a reference-grade resolvent.

    The result approximates ``||Q_c(z)||`` within ``ref_tol``.
    """
    z = np.asarray(z, dtype=float)
    if ref_tol is None:
        ref_tol = reference_tol(z)
    if ref_tol > 1e-12 * (1.0 + np.linalg.norm(z)):
        raise ValueError("ref_tol must be at most 1e-12 (1 + ||z||)")
    if op.exact:
        ref_tol = 0.0
    p = op.resolvent(c, z, ref_tol).point
    return float(np.linalg.norm(z - p))


def zero_point(op):
    """Ground-truth element of ``T^{-1}(0)``, or None when unknown."""
    return op.zero_point()
