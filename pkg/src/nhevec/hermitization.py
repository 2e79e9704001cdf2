"""Hermitization of ``A - z`` and its resolvent.

Normalized traces: ``<X> = Tr X / N`` for ``N x N`` operators and
``Tr X / (2N)`` for operators on the doubled ``2N`` space.  This is the
single place where that convention is fixed; every functional below uses
:func:`ntr` or :func:`ntr2`.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IllConditioned

__all__ = [
    "ntr",
    "ntr2",
    "hermitize",
    "SymSpectrum",
    "sym_spectrum",
    "ResolventBundle",
    "resolvents",
    "trace_functionals",
    "cross_functionals",
    "block_E",
    "embed_observable",
    "v_functional",
    "COND_MAX",
]

COND_MAX = 1e14


def ntr(X):
    return np.trace(X) / X.shape[0]


def ntr2(X):
    # same as ntr, spelled out for the 2N space
    return np.trace(X) / X.shape[0]


def block_E(n, a, b):
    """``2n x 2n`` block unit ``E_ab`` (``a, b`` in ``{1, 2}``) tensored with ``I_n``."""
    E = np.zeros((2 * n, 2 * n))
    E[(a - 1) * n:a * n, (b - 1) * n:b * n] = np.eye(n)
    return E


def hermitize(A, z):
    """``[[0, A - z], [(A - z)*, 0]]``."""
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    X = A - z * np.eye(n)
    H = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    H[:n, n:] = X
    H[n:, :n] = X.conj().T
    return H


@dataclass(frozen=True)
class SymSpectrum:
    """Spectrum of the Hermitization with the ``+-k`` indexing.

    ``xi`` and the columns of ``vecs`` are stored in increasing order,
    ``k = -N, ..., -1, 1, ..., N``; use :meth:`col` to translate ``k``.
    The upper half of each eigenvector is the left singular vector of
    ``A - z`` and the lower half the right singular vector, both scaled by
    ``1/sqrt(2)``.
    """

    z: complex
    xi: np.ndarray
    vecs: np.ndarray

    @property
    def n(self):
        return self.xi.size // 2

    def col(self, k):
        n = self.n
        if k == 0 or abs(k) > n:
            raise IndexError(k)
        return n + k if k < 0 else n + k - 1

    def value(self, k):
        return self.xi[self.col(k)]

    def vector(self, k):
        return self.vecs[:, self.col(k)]

    @property
    def positive(self):
        """``xi_1 <= ... <= xi_N`` (the singular values of ``A - z``)."""
        return self.xi[self.n:]

    @property
    def ks(self):
        n = self.n
        return np.concatenate([np.arange(-n, 0), np.arange(1, n + 1)])

    def mean_H(self, eta):
        """``<H_z(eta)> = N^-1 sum_{k>=1} (xi_k^2 + eta^2)^-1``."""
        s = self.positive
        return float(np.mean(1.0 / (s * s + eta * eta)))


def sym_spectrum(A, z, with_vectors=True):
    """Hermitization spectrum from the SVD of ``A - z``.

    If ``A - z = U diag(s) V*``, the Hermitization has eigenpairs
    ``+-s_k`` with eigenvectors ``(U_k, +-V_k) / sqrt(2)``.
    """
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    X = A - z * np.eye(n)
    if not with_vectors:
        s = np.linalg.svd(X, compute_uv=False)[::-1]
        return SymSpectrum(complex(z), np.concatenate([-s[::-1], s]), None)
    U, s, Vh = np.linalg.svd(X)
    # ascending singular values for k = 1..N
    U = U[:, ::-1]
    s = s[::-1]
    V = Vh.conj().T[:, ::-1]
    c = 1.0 / np.sqrt(2.0)
    pos = np.vstack([U, V]) * c
    neg = np.vstack([U, -V]) * c
    xi = np.concatenate([-s[::-1], s])
    vecs = np.hstack([neg[:, ::-1], pos])
    return SymSpectrum(complex(z), xi, vecs)


@dataclass(frozen=True)
class ResolventBundle:
    z: complex
    eta: float
    X: np.ndarray  # A - z
    H: np.ndarray
    Htilde: np.ndarray
    G12: np.ndarray = None
    G21: np.ndarray = None

    def __post_init__(self):
        if self.G12 is None:
            object.__setattr__(self, "G12", self.Htilde @ self.X)
        if self.G21 is None:
            object.__setattr__(self, "G21", self.X.conj().T @ self.Htilde)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def G(self):
        """``(H_z - i eta)^-1`` assembled from its blocks."""
        n = self.n
        G = np.empty((2 * n, 2 * n), dtype=np.complex128)
        G[:n, :n] = 1j * self.eta * self.Htilde
        G[:n, n:] = self.G12
        G[n:, :n] = self.G21
        G[n:, n:] = 1j * self.eta * self.H
        return G

    def block(self, a, b):
        """Block ``(a, b)`` of ``G`` without forming the full matrix."""
        if (a, b) == (1, 1):
            return 1j * self.eta * self.Htilde
        if (a, b) == (1, 2):
            return self.G12
        if (a, b) == (2, 1):
            return self.G21
        if (a, b) == (2, 2):
            return 1j * self.eta * self.H
        raise IndexError((a, b))


def _hpd_inverse(S):
    c, low = scipy.linalg.cho_factor(S, lower=True)
    inv = scipy.linalg.cho_solve((c, low), np.eye(S.shape[0], dtype=S.dtype))
    return 0.5 * (inv + inv.conj().T)


def resolvents(A, z, eta, cond_max=COND_MAX):
    """Resolvent blocks ``H_z(eta)`` and ``H~_z(eta)``.

    Raises :class:`IllConditioned` if ``(||A - z||^2 + eta^2)/eta^2``
    exceeds ``cond_max``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    X = A - z * np.eye(n)
    top = np.linalg.norm(X, 2) ** 2
    cond = (top + eta * eta) / (eta * eta)
    if cond > cond_max:
        raise IllConditioned(f"condition estimate {cond:.3g} exceeds {cond_max:.3g}")
    I = np.eye(n)
    H = _hpd_inverse(X.conj().T @ X + eta * eta * I)
    Ht = _hpd_inverse(X @ X.conj().T + eta * eta * I)
    return ResolventBundle(complex(z), float(eta), X, H, Ht)


def _gbgb(b1, b2, B1, B2):
    """``<G1 E_B1 G2 E_B2>`` on the 2N space; ``B = (a, b)`` block labels.

    ``Tr(G1 E_ab G2 E_cd) = Tr(G1[d, a] G2[b, c])``.
    """
    (a, b), (c, d) = B1, B2
    n = b1.n
    return np.sum(b1.block(d, a) * b2.block(b, c).T) / (2 * n)


def trace_functionals(b, b2=None):
    """Normalized trace functionals of one resolvent bundle.

    Returns a dict with ``H``, ``HHt``, ``H2``, ``H2X`` (``<H^2 (A - z)>``)
    and ``GBGB``: the four values ``<G(eta) B1 G(eta2) B2>`` for
    ``B1, B2`` in ``{E12, E21}``, where ``eta2`` comes from ``b2`` (same
    ``z``) when given.
    """
    if b2 is None:
        b2 = b
    if b2.n != b.n:
        raise ValueError("dimension mismatch")
    H, Ht, X = b.H, b.Htilde, b.X
    n = b.n
    HX = H @ X
    return {
        "H": float(ntr(H).real),
        "HHt": float(np.sum(H * Ht.T).real / n),
        "H2": float(np.sum(np.abs(H) ** 2) / n),
        "H2X": complex(np.sum(H * HX.T) / n),
        "GBGB": _gbgb_all(b, b2),
    }


def _gbgb_all(b, b2):
    labels = {"E12": (1, 2), "E21": (2, 1)}
    out = {}
    for n1, B1 in labels.items():
        for n2, B2 in labels.items():
            out[f"{n1},{n2}"] = complex(_gbgb(b, b2, B1, B2))
    return out


def cross_functionals(b1, b2):
    """Two-shift traces ``<H_z1 H_z2>``, ``<H~_z1 H~_z2>``, ``<H_z1 H~_z2>``."""
    if b1.n != b2.n:
        raise ValueError("dimension mismatch")
    return {
        "HH": float(np.sum(b1.H * b2.H.T).real / b1.n),
        "HtHt": float(np.sum(b1.Htilde * b2.Htilde.T).real / b1.n),
        "HHt": float(np.sum(b1.H * b2.Htilde.T).real / b1.n),
    }


def embed_observable(T, side):
    """Weight vectors of ``T`` lifted to the 2N space.

    ``side="right"`` places ``w_k`` in the lower half (``F12 (x) T``: picks
    the right-vector component); ``side="left"`` places it in the upper half
    (``F21 (x) T``).
    """
    W = T.vectors
    n = W.shape[0]
    Z = np.zeros_like(W)
    if side == "right":
        return np.vstack([Z, W])
    if side == "left":
        return np.vstack([W, Z])
    raise ValueError("side must be 'right' or 'left'")


def v_functional(A, z, T, delta_V, side="right", spectrum=None, rtol=1e-8):
    """``V(z, T) = N eta Tr[T* T Im G_z(eta)]`` with ``eta = N^(-1-delta_V)``.

    Evaluated as the eigen-sum over the Hermitization spectrum and, as a
    cross-check, via quadratic forms ``w* Im G w`` from one LU solve.
    Raises :class:`ValueError` if they disagree beyond ``rtol``.

    Returns
    -------
    value : float
    detail : dict
        ``eta``, both evaluations, and the ``k = +-1`` part of the sum.
    """
    if not 0 < delta_V < 0.5:
        raise ValueError("delta_V must lie in (0, 0.5)")
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    eta = n ** (-1.0 - delta_V)
    S = spectrum if spectrum is not None else sym_spectrum(A, z)
    Wt = embed_observable(T, side)
    proj = np.abs(Wt.conj().T @ S.vecs) ** 2  # (rank, 2N)
    tnorm = T.weights @ proj  # ||T u_k||^2
    lor = n * eta * eta / (S.xi**2 + eta * eta)
    terms = lor * tnorm
    eig_sum = float(terms.sum())
    pm1 = float(terms[S.col(-1)] + terms[S.col(1)])

    if T.weights.size:
        lu = scipy.linalg.lu_factor(hermitize(A, z) - 1j * eta * np.eye(2 * n))
        Gw = scipy.linalg.lu_solve(lu, Wt)
        qf = np.einsum("ik,ik->k", Wt.conj(), Gw).imag
        trace_form = float(n * eta * np.sum(T.weights * qf))
    else:
        trace_form = 0.0
    scale = max(abs(eig_sum), abs(trace_form), 1e-300)
    if abs(eig_sum - trace_form) > rtol * scale and abs(eig_sum - trace_form) > 1e-14:
        raise ValueError(
            f"V evaluations disagree: eigen-sum {eig_sum!r} vs trace {trace_form!r}"
        )
    return eig_sum, {"eta": eta, "eig_sum": eig_sum, "trace_form": trace_form, "pm1": pm1}
