"""Divided differences of ``x -> exp(-x)`` in log space.

The k-th divided difference of ``f`` at nodes ``x_0..x_k`` is the
``(k, 0)`` entry of ``f(J)`` where ``J`` is the lower bidiagonal matrix with
the nodes on the diagonal and ones below it.  For ``f(x) = exp(-x)`` we flip
the signs of the subdiagonal with a diagonal similarity and shift by the
largest node, which turns the matrix into an entrywise nonnegative one.  The
Taylor series and the repeated squarings then only ever add nonnegative
numbers, so every entry, including the tiny corner entry, keeps full relative
accuracy even for tightly clustered or widely spread nodes.
"""

import math

import numpy as np

__all__ = ["log_divdiff_expneg", "divdiff_expneg"]


def _log_expm_nonneg(P):
    """Return ``(E, log_scale)`` with ``expm(P) = E * exp(log_scale)``.

    ``P`` must be entrywise nonnegative.
    """
    n = P.shape[0]
    norm = np.abs(P).sum(axis=1).max()
    k = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    S = P / 2.0**k
    E = np.eye(n)
    term = np.eye(n)
    for j in range(1, 200):
        term = term @ S / j
        E = E + term
        if j >= n and np.all(term <= 1e-18 * E):
            break
    log_scale = 0.0
    f = E.max()
    E = E / f
    log_scale = math.log(f)
    for _ in range(k):
        E = E @ E
        f = E.max()
        E = E / f
        log_scale = 2.0 * log_scale + math.log(f)
    return E, log_scale


def log_divdiff_expneg(nodes):
    """Log-magnitude and sign of the divided difference of ``exp(-x)``.

    Parameters
    ----------
    nodes : array_like of float
        Interpolation nodes; repeated nodes are allowed (confluent case).

    Returns
    -------
    log_abs : float
    sign : int
        Always ``(-1)**(len(nodes) - 1)``.
    """
    x = np.sort(np.asarray(nodes, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("need at least one node")
    sign = -1 if (n - 1) % 2 else 1
    x0 = x[0]
    if n == 1:
        return -x0, 1
    c = x - x0
    s = c[-1]
    # P = s*I - D J D with J = diag(c) + subdiag(1), D = diag((-1)^i)
    P = np.diag(s - c) + np.diag(np.ones(n - 1), -1)
    E, log_scale = _log_expm_nonneg(P)
    corner = E[n - 1, 0]
    if corner <= 0.0:
        return -math.inf, sign
    return math.log(corner) + log_scale - s - x0, sign


def divdiff_expneg(nodes):
    """Divided difference of ``exp(-x)`` at ``nodes`` (may underflow)."""
    log_abs, sign = log_divdiff_expneg(nodes)
    return sign * math.exp(log_abs)
