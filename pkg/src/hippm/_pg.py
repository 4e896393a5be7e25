"""Accelerated projected gradient with an active-set polishing step.

Shared by the inexact resolvent of the quadratic-box operator and the
augmented Lagrangian inner solver. Both objectives are strongly convex and
piecewise quadratic, so a few accelerated steps followed by a Newton-type
solve on the identified face usually land on the minimizer to rounding
accuracy.
"""

import numpy as np


def projected_gradient(grad, project, x0, L, mu, certificate, target,
                       polish=None, max_iter=100000, polish_every=10, patience=None):
    """Minimize a smooth strongly convex function over a simple set.

    Parameters
    ----------
    grad : callable
        Gradient of the smooth objective.
    project : callable
        Euclidean projection onto the feasible set.
    x0 : ndarray
        Starting point (projected before use).
    L, mu : float
        Lipschitz constant of ``grad`` and strong convexity modulus.
    certificate : callable
        Maps the gradient-mapping norm ``||G(x)||`` to the certified
        quantity (distance or optimality gap) of the projected step ``x+``.
    target : float
        Stop once ``certificate(||G(x)||) <= target``.
    polish : callable, optional
        ``polish(x)`` returns a candidate point (or None) obtained by
        solving the stationarity system on the face identified at ``x``.
    max_iter : int
        Cap on gradient evaluations.
    patience : int, optional
        Stop after this many probe rounds without improving the
        certificate (rounding floor reached). Meant for best-effort solves.

    Returns
    -------
    x_plus : ndarray
        Projected gradient step from the best certified point.
    cert : float
        Certificate value attached to ``x_plus``.
    iterations : int
        Number of gradient evaluations used.
    """
    step = 1.0 / L
    q = np.sqrt(mu / L) if mu > 0 else 0.0
    momentum = (1.0 - q) / (1.0 + q)

    def probe(x):
        x_plus = project(x - step * grad(x))
        gnorm = np.linalg.norm(x - x_plus) / step
        return x_plus, certificate(gnorm)

    x = project(np.asarray(x0, dtype=float))
    best_plus, best_cert = probe(x)
    evals = 1
    if best_cert <= target:
        return best_plus, best_cert, evals

    w = x
    stale = 0
    while evals < max_iter and (patience is None or stale < patience):
        x_new = project(w - step * grad(w))
        evals += 1
        # gradient-based adaptive restart keeps the scheme monotone-ish
        if np.dot(w - x_new, x_new - x) > 0:
            w = x_new
        else:
            w = x_new + momentum * (x_new - x)
        x = x_new

        if evals % polish_every == 0 or evals + 1 >= max_iter:
            x_plus, cert = probe(x)
            evals += 1
            stale += 1
            if cert < best_cert:
                best_plus, best_cert = x_plus, cert
                stale = 0
            if polish is not None:
                cand = polish(x_plus)
                if cand is not None:
                    cand_plus, cand_cert = probe(cand)
                    evals += 1
                    if cand_cert < best_cert:
                        best_plus, best_cert = cand_plus, cand_cert
                        x = w = cand
                        stale = 0
            if best_cert <= target:
                break
    return best_plus, best_cert, evals
