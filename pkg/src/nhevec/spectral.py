"""Left/right eigenvectors of non-normal matrices.

Conventions: eigenvectors are unit vectors and the left vector's phase is
chosen so that ``v* u`` is real and nonnegative.  ``v`` is a left eigenvector
in the sense ``v* A = lambda v*``, i.e. ``A* v = conj(lambda) v``.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectivePair, SeparationViolated

__all__ = [
    "EigenTriple",
    "SpectralSet",
    "ProjectionObservable",
    "matrix_digest",
    "eig_pairs",
    "eig_near",
    "schur_form",
    "nearest_indices",
    "select_near",
    "overlap_matrix",
    "projection_stat",
]

TOL_EIG = 1e-8


def matrix_digest(A):
    A = np.ascontiguousarray(A, dtype=np.complex128)
    h = hashlib.sha256()
    h.update(repr(A.shape).encode())
    h.update(A.tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class EigenTriple:
    lam: complex
    u: np.ndarray
    v: np.ndarray
    biorth: float

    @property
    def overlap(self):
        """Diagonal overlap ``O_ii = 1 / |v* u|^2``."""
        return 1.0 / self.biorth**2


@dataclass(frozen=True)
class SpectralSet:
    digest: str
    triples: tuple

    def __len__(self):
        return len(self.triples)

    def __getitem__(self, i):
        return self.triples[i]

    @property
    def eigenvalues(self):
        return np.array([t.lam for t in self.triples])

    @property
    def right(self):
        return np.column_stack([t.u for t in self.triples])

    @property
    def left(self):
        return np.column_stack([t.v for t in self.triples])

    def to_dict(self):
        return {
            "digest": self.digest,
            "eigenvalues": [[float(t.lam.real), float(t.lam.imag)] for t in self.triples],
            "biorth": [float(t.biorth) for t in self.triples],
        }


def _fix_phase(u, v):
    """Normalize both vectors and rotate ``v`` so that ``v* u >= 0``."""
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    c = np.vdot(v, u)
    if abs(c) > 0:
        v = v * (c / abs(c))
    return u, v, abs(c)


def _check_pair(A, lam, u, v, scale, tol_eig, tol_biorth):
    res_r = np.linalg.norm(A @ u - lam * u)
    res_l = np.linalg.norm(A.conj().T @ v - np.conj(lam) * v)
    if res_r > tol_eig * scale or res_l > tol_eig * scale:
        raise DefectivePair(
            f"eigen-residual too large at lambda={lam:.6g}: right {res_r:.3g}, left {res_l:.3g}"
        )


def eig_pairs(A, tol_eig=TOL_EIG, tol_biorth=None):
    """All eigen-triples of ``A``.

    Right vectors come from ``A``, left vectors from ``A*``; the two spectra
    are matched greedily by distance ``|conj(mu) - lambda|`` (ties go to the
    lower index).

    Raises
    ------
    DefectivePair
        If a match is poor or ``|v* u| < tol_biorth`` (default ``1e-10 N``).
    """
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    if tol_biorth is None:
        tol_biorth = 1e-10 * n
    scale = max(np.linalg.norm(A), 1.0)

    lam, R = np.linalg.eig(A)
    mu, L = np.linalg.eig(A.conj().T)
    mu = mu.conj()

    dist = np.abs(lam[:, None] - mu[None, :])
    free = np.ones(n, dtype=bool)
    match = np.empty(n, dtype=int)
    # greedy on the globally closest remaining pair
    order = np.argsort(dist, axis=None, kind="stable")
    assigned = np.zeros(n, dtype=bool)
    for flat in order:
        i, j = divmod(int(flat), n)
        if assigned[i] or not free[j]:
            continue
        match[i] = j
        assigned[i] = True
        free[j] = False
        if assigned.all():
            break

    triples = []
    for i in range(n):
        j = match[i]
        if abs(lam[i] - mu[j]) > tol_eig * scale:
            raise DefectivePair(f"no left partner for lambda={lam[i]:.6g}")
        u, v, b = _fix_phase(R[:, i], L[:, j])
        if b < tol_biorth:
            raise DefectivePair(f"|v*u|={b:.3g} below {tol_biorth:.3g}")
        _check_pair(A, lam[i], u, v, scale, tol_eig, tol_biorth)
        triples.append(EigenTriple(complex(lam[i]), u, v, float(b)))
    triples.sort(key=lambda t: (t.lam.real, t.lam.imag))
    return SpectralSet(matrix_digest(A), tuple(triples))


def nearest_indices(eigenvalues, targets, epsilon=0.1, n=None, tau=0.0):
    """Index of the eigenvalue nearest to each target, with separation check.

    Raises :class:`SeparationViolated` when two targets pick the same
    eigenvalue or two picked eigenvalues are closer than ``n**(-1/2+epsilon)``.
    """
    lam = np.asarray(eigenvalues)
    n = lam.size if n is None else n
    idx = []
    for z0 in targets:
        if abs(z0) > 1 - tau:
            raise ValueError(f"target {z0} outside the disk of radius 1 - tau")
        idx.append(int(np.argmin(np.abs(lam - z0))))
    if len(set(idx)) < len(idx):
        raise SeparationViolated("two targets select the same eigenvalue")
    scale = n ** (-0.5 + epsilon)
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            d = abs(lam[idx[a]] - lam[idx[b]])
            if d < scale:
                raise SeparationViolated(
                    f"selected eigenvalues {lam[idx[a]]:.4g}, {lam[idx[b]]:.4g} "
                    f"closer than {scale:.4g}"
                )
    return idx


def select_near(S, targets, epsilon=0.1, tau=0.0):
    """Triples of ``S`` nearest to ``targets`` (see :func:`nearest_indices`)."""
    idx = nearest_indices(S.eigenvalues, targets, epsilon, n=len(S), tau=tau)
    return [S[i] for i in idx]


def schur_form(A):
    """Complex Schur form ``(T, Q)`` with ``A = Q T Q*``."""
    return scipy.linalg.schur(np.asarray(A, dtype=np.complex128), output="complex")


def eig_near(A, targets, epsilon=0.1, tau=0.0, tol_eig=TOL_EIG, tol_biorth=None, schur=None):
    """Eigen-triples nearest to ``targets`` from one complex Schur form.

    Cheaper than :func:`eig_pairs` when only a few triples are needed: with
    ``A = Q T Q*`` the right and left eigenvectors of the ``k``-th diagonal
    entry of ``T`` follow from triangular solves, then are mapped back by
    ``Q``.  Pass ``schur=schur_form(A)`` to reuse one factorization across
    several calls.
    """
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    if tol_biorth is None:
        tol_biorth = 1e-10 * n
    scale = max(np.linalg.norm(A), 1.0)
    T, Q = schur_form(A) if schur is None else schur
    lam = np.diag(T).copy()
    idx = nearest_indices(lam, targets, epsilon, n=n, tau=tau)
    out = []
    for k in idx:
        mu = lam[k]
        x = np.zeros(n, dtype=np.complex128)
        x[k] = 1.0
        if k > 0:
            Tk = T[:k, :k] - mu * np.eye(k)
            x[:k] = scipy.linalg.solve_triangular(Tk, -T[:k, k], lower=False)
        y = np.zeros(n, dtype=np.complex128)
        y[k] = 1.0
        if k < n - 1:
            Tk = (T[k + 1:, k + 1:] - mu * np.eye(n - k - 1)).conj().T
            y[k + 1:] = scipy.linalg.solve_triangular(Tk, -T[k, k + 1:].conj(), lower=True)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DefectivePair(f"singular triangular solve at lambda={mu:.6g}")
        u, v, b = _fix_phase(Q @ x, Q @ y)
        if b < tol_biorth:
            raise DefectivePair(f"|v*u|={b:.3g} below {tol_biorth:.3g}")
        _check_pair(A, mu, u, v, scale, tol_eig, tol_biorth)
        out.append(EigenTriple(complex(mu), u, v, float(b)))
    return out


def overlap_matrix(S):
    """Overlaps ``O_ij = <u_j, u_i> <v_i, v_j>`` under ``v_i* u_j = delta_ij``.

    Only the left vectors are rescaled, so ``O_ii = 1/|v_i* u_i|^2`` and
    every row sums to one.
    """
    R = S.right
    L = S.left
    b = np.einsum("ij,ij->j", L.conj(), R)
    if np.any(np.abs(b) == 0):
        raise DefectivePair("zero biorthogonality coefficient")
    L = L / b.conj()[None, :]
    GL = L.conj().T @ L  # GL[i, j] = L_i* L_j
    GR = R.conj().T @ R  # GR[j, i] = R_j* R_i
    return GL * GR.T


@dataclass(frozen=True)
class ProjectionObservable:
    """Finite-rank ``T`` through ``T* T = sum_k q_k w_k w_k*``.

    ``vectors`` holds the orthonormal ``w_k`` as columns.
    """

    weights: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.weights, dtype=float))
        W = np.asarray(self.vectors, dtype=np.complex128)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[1] != q.size:
            raise ValueError("one weight per vector")
        if np.any(q <= 0):
            raise ValueError("weights must be positive")
        gram = W.conj().T @ W
        if np.max(np.abs(gram - np.eye(q.size))) > 1e-12:
            raise ValueError("vectors must be orthonormal")
        object.__setattr__(self, "weights", q)
        object.__setattr__(self, "vectors", W)

    @property
    def rank(self):
        return self.weights.size

    @property
    def dim(self):
        return self.vectors.shape[0]

    @property
    def frobenius_sq(self):
        return float(self.weights.sum())

    def matrix(self):
        """A concrete ``T`` (rank x N) with the prescribed ``T* T``."""
        return np.sqrt(self.weights)[:, None] * self.vectors.conj().T

    def gram(self):
        """``T* T`` as a dense ``N x N`` matrix."""
        W = self.vectors
        return (W * self.weights) @ W.conj().T

    @classmethod
    def basis(cls, n, weights):
        """Observable on the first ``len(weights)`` coordinate vectors."""
        weights = np.atleast_1d(np.asarray(weights, dtype=float))
        return cls(weights, np.eye(n, weights.size, dtype=np.complex128))

    @classmethod
    def from_matrix(cls, T, tol=1e-12):
        T = np.asarray(T, dtype=np.complex128)
        q, W = np.linalg.eigh(T.conj().T @ T)
        keep = q > tol * max(q.max(), 1.0)
        return cls(q[keep], W[:, keep])

    def to_dict(self):
        return {"weights": self.weights.tolist(), "dim": self.dim}


def projection_stat(T, x):
    """``N ||T x||^2 = N sum_k q_k |w_k* x|^2`` for a unit vector ``x``."""
    x = np.asarray(x)
    nrm = np.linalg.norm(x)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError("x must be a unit vector")
    c = T.vectors.conj().T @ x
    return float(x.size * np.sum(T.weights * np.abs(c) ** 2))
