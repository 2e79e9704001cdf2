"""Householder change of variables for a matrix with selected eigenpairs.

A right step writes ``M = R(u) [[lam, w*], [0, M']] R(u)`` with ``u`` a unit
right eigenvector; a left step writes ``M = R(v) [[lam, 0], [w, M']] R(v)``
with ``v`` a unit left eigenvector.  ``R(u)`` is the reflection exchanging
``e1`` and ``u``; it sends ``e1`` to ``u`` only when ``u[0]`` is real, so the
sphere variables are taken modulo phase with ``u[0] >= 0`` (the phase of an
eigenvector is arbitrary anyway).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .divdiff import log_divdiff_expneg
from .errors import DefectivePair, EigenvalueCollision, FDInstability, PositivityLost
from .hermitization import sym_spectrum
from .dse import eta_zt

__all__ = [
    "householder",
    "phase_fix_first",
    "DeflationStep",
    "DeflationChain",
    "phi_step",
    "phi_forward",
    "deflate",
    "reference_blocks",
    "density_split",
    "chain_to_params",
    "params_to_matrix",
    "jacobian_formula",
    "jacobian_fd_check",
    "evec_reconstruct",
    "lift_eigenvector",
    "sphere_exp_integral",
    "kq_ratio_check",
    "probe_qT",
]

_DEGENERATE = 1e-14
COLLISION_TOL = 1e-12


def phase_fix_first(u):
    """Rotate ``u`` so its first entry is real and nonnegative."""
    u = np.asarray(u, dtype=np.complex128)
    a = abs(u[0])
    return u * (np.conj(u[0]) / a) if a > 0 else u.copy()


def householder(u, n=None):
    """``R(u) = I - 2 (e1 - u)(e1 - u)* / ||e1 - u||^2``; ``R(e1) = I``.

    ``u`` must be a unit vector with real first entry (see
    :func:`phase_fix_first`), which makes ``R(u) e1 = u``.
    """
    u = np.asarray(u, dtype=np.complex128).ravel()
    n = u.size if n is None else int(n)
    if u.size != n:
        raise ValueError("dimension mismatch")
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("u must be a unit vector")
    if abs(u[0].imag) > 1e-12:
        raise ValueError("u[0] must be real; apply phase_fix_first")
    d = -u
    d[0] += 1.0
    nd = np.linalg.norm(d)
    if nd < _DEGENERATE:
        return np.eye(n, dtype=np.complex128)
    d /= nd
    return np.eye(n, dtype=np.complex128) - 2.0 * np.outer(d, d.conj())


@dataclass(frozen=True)
class DeflationStep:
    """One step: ``side``, eigenvalue, sphere vector, ``w`` and the size it acts on.

    ``a``, ``off`` (``b_j`` for right steps, ``c_j`` for left steps) are the
    blocks of a reference matrix when one was supplied.
    """

    side: str
    lam: complex
    vec: np.ndarray
    w: np.ndarray
    a: complex = None
    off: np.ndarray = None

    def __post_init__(self):
        if self.side not in ("right", "left"):
            raise ValueError("side must be 'right' or 'left'")
        if abs(np.linalg.norm(self.vec) - 1.0) > 1e-12:
            raise ValueError("sphere vector must have unit norm")
        if self.w.size != self.vec.size - 1:
            raise ValueError("w must have length n - 1")

    @property
    def size(self):
        return self.vec.size


@dataclass(frozen=True)
class DeflationChain:
    steps: tuple
    residual: np.ndarray
    ref_blocks: tuple = field(default=None)

    def __post_init__(self):
        n = self.dim
        for j, s in enumerate(self.steps):
            if s.size != n - j:
                raise ValueError(f"step {j + 1} acts on size {s.size}, expected {n - j}")
        k = n - len(self.steps)
        if self.residual.shape != (k, k):
            raise ValueError("residual block has the wrong size")
        sides = [s.side for s in self.steps]
        if "right" in sides and "left" in sides:
            if sides.index("left") < max(i for i, x in enumerate(sides) if x == "right"):
                raise ValueError("right steps must precede left steps")

    @property
    def dim(self):
        return self.steps[0].size if self.steps else self.residual.shape[0]

    @property
    def m(self):
        return len(self.steps)

    @property
    def eigenvalues(self):
        return np.array([s.lam for s in self.steps])

    @property
    def m_R(self):
        return sum(s.side == "right" for s in self.steps)


def phi_step(step, M):
    """Apply one ``Phi_j``: embed ``M`` below ``(lam, w)`` and conjugate by ``R``."""
    n = step.size
    if M.shape != (n - 1, n - 1):
        raise ValueError("dimension mismatch")
    B = np.zeros((n, n), dtype=np.complex128)
    B[0, 0] = step.lam
    B[1:, 1:] = M
    if step.side == "right":
        B[0, 1:] = step.w.conj()
    else:
        B[1:, 0] = step.w
    R = householder(step.vec)
    return R @ B @ R


def phi_forward(chain):
    """Compose ``Phi_1 o (Id x Phi_2) o ... `` starting from the residual block."""
    M = np.asarray(chain.residual, dtype=np.complex128)
    for step in reversed(chain.steps):
        M = phi_step(step, M)
    return M


def _normalize(x):
    nx = np.linalg.norm(x)
    if nx == 0:
        raise DefectivePair("eigenvector vanished during deflation")
    return x / nx


def deflate(A, selected, sides, reference=None):
    """Successive Householder deflation; inverse of :func:`phi_forward`.

    Parameters
    ----------
    A : (N, N) complex array
    selected : sequence of EigenTriple
        Eigen-triples of ``A``, one per step.
    sides : sequence of {"right", "left"}
        Right steps first.
    reference : (N, N) array, optional
        Matrix whose blocks ``a_j``, ``b_j`` / ``c_j`` are recorded under the
        same reflections (see :func:`reference_blocks`).
    """
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    sides = list(sides)
    if len(sides) != len(selected):
        raise ValueError("one side per selected triple")
    lam = np.array([t.lam for t in selected])
    for i in range(lam.size):
        for k in range(i + 1, lam.size):
            if abs(lam[i] - lam[k]) < COLLISION_TOL:
                raise EigenvalueCollision("selected eigenvalues must be distinct")
    # work on copies of the eigenvectors, transported through each step
    rvec = [np.asarray(t.u, dtype=np.complex128) for t in selected]
    lvec = [np.asarray(t.v, dtype=np.complex128) for t in selected]
    M = A.copy()
    steps = []
    for j, side in enumerate(sides):
        x = rvec[j] if side == "right" else lvec[j]
        x = phase_fix_first(_normalize(x))
        R = householder(x)
        B = R @ M @ R
        scale = max(np.linalg.norm(M), 1.0)
        if side == "right":
            if np.linalg.norm(B[1:, 0]) > 1e-8 * scale:
                raise DefectivePair("right eigenvector does not deflate the matrix")
            w = B[0, 1:].conj().copy()
        else:
            if np.linalg.norm(B[0, 1:]) > 1e-8 * scale:
                raise DefectivePair("left eigenvector does not deflate the matrix")
            w = B[1:, 0].copy()
        steps.append(DeflationStep(side, complex(B[0, 0]), x, w))
        M = B[1:, 1:].copy()
        for k in range(j + 1, len(sides)):
            rvec[k] = _normalize((R @ rvec[k])[1:])
            lvec[k] = _normalize((R @ lvec[k])[1:])
    chain = DeflationChain(tuple(steps), M)
    if reference is not None:
        chain = reference_blocks(chain, reference)
    return chain


def reference_blocks(chain, A_ref):
    """Record ``R_j A^(j-1) R_j = [[a_j, b_j*], [c_j, A^(j)]]`` along ``chain``.

    Returns a new chain whose steps carry ``a`` and ``off`` (``b_j`` for
    right steps, ``c_j`` for left steps) and whose ``ref_blocks`` holds
    ``A^(0), ..., A^(m)``.
    """
    Aj = np.asarray(A_ref, dtype=np.complex128)
    blocks = [Aj]
    steps = []
    for s in chain.steps:
        R = householder(s.vec)
        B = R @ Aj @ R
        off = B[0, 1:].conj().copy() if s.side == "right" else B[1:, 0].copy()
        steps.append(DeflationStep(s.side, s.lam, s.vec, s.w, complex(B[0, 0]), off))
        Aj = B[1:, 1:].copy()
        blocks.append(Aj)
    return DeflationChain(tuple(steps), chain.residual, tuple(blocks))


def density_split(chain, A_ref):
    """Terms of ``||M - A||_F^2`` after the change of variables.

    Returns ``(total, parts)`` where ``parts`` lists, per step, the sphere
    term ``||(A^(j-1) - lam_j) u||^2`` (adjoint for left steps) and
    ``||w_j - b_j||^2`` (``c_j``), plus the residual ``||M^(m) - A^(m)||^2``.
    """
    ch = reference_blocks(chain, A_ref)
    parts = []
    for j, s in enumerate(ch.steps):
        Aprev = ch.ref_blocks[j]
        X = Aprev - s.lam * np.eye(Aprev.shape[0])
        sphere = np.linalg.norm((X if s.side == "right" else X.conj().T) @ s.vec) ** 2
        parts.append({"sphere": float(sphere), "w": float(np.linalg.norm(s.w - s.off) ** 2)})
    resid = float(np.linalg.norm(ch.residual - ch.ref_blocks[-1]) ** 2)
    total = sum(p["sphere"] + p["w"] for p in parts) + resid
    return total, {"steps": parts, "residual": resid}


# --- Jacobian --------------------------------------------------------------


def jacobian_formula(lams, M):
    """``|Delta(lam)|^2 prod_j |det(lam_j - M)|^2``."""
    lams = np.asarray(lams, dtype=np.complex128)
    v = 1.0
    for i in range(lams.size):
        for k in range(i + 1, lams.size):
            v *= abs(lams[i] - lams[k]) ** 2
    k = M.shape[0]
    for l in lams:
        if k:
            v *= abs(np.linalg.det(l * np.eye(k) - M)) ** 2
    return float(v)


def _orth_complement(u):
    """Orthonormal basis (columns) of the complex complement of ``u``."""
    n = u.size
    Q, _ = np.linalg.qr(np.column_stack([u, np.eye(n, dtype=np.complex128)]))
    return Q[:, 1:n]


def _chart(u0, Q0, y):
    x = u0 + Q0 @ y
    return phase_fix_first(x / np.linalg.norm(x))


def chain_to_params(chain):
    """Real coordinates of ``chain`` in the local chart centred at it.

    Returns ``(theta, unpack)`` where ``unpack(theta)`` rebuilds a chain.
    The sphere coordinates are ``y`` in ``C^(n-1)`` with
    ``u(y) = phase_fix(u0 + Q0 y)`` and vanish at the centre.
    """
    centres = [(s.vec, _orth_complement(s.vec)) for s in chain.steps]
    sides = [s.side for s in chain.steps]
    sizes = [s.size for s in chain.steps]
    k = chain.residual.shape[0]

    def c2r(z):
        z = np.asarray(z, dtype=np.complex128).ravel()
        return np.concatenate([z.real, z.imag])

    theta = []
    for s in chain.steps:
        theta += [c2r([s.lam]), np.zeros(2 * (s.size - 1)), c2r(s.w)]
    theta.append(c2r(chain.residual))
    theta = np.concatenate(theta)

    def take(th, pos, cnt):
        re, im = th[pos:pos + cnt], th[pos + cnt:pos + 2 * cnt]
        return re + 1j * im, pos + 2 * cnt

    def unpack(th):
        pos = 0
        steps = []
        for (u0, Q0), side, n in zip(centres, sides, sizes):
            lam, pos = take(th, pos, 1)
            y, pos = take(th, pos, n - 1)
            w, pos = take(th, pos, n - 1)
            steps.append(DeflationStep(side, complex(lam[0]), _chart(u0, Q0, y), w))
        M, pos = take(th, pos, k * k)
        return DeflationChain(tuple(steps), M.reshape(k, k))

    return theta, unpack


def params_to_matrix(theta, unpack):
    return phi_forward(unpack(theta))


def _fd_jacobian(f, theta, h):
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        d = (f(theta + e) - f(theta - e)) / (2 * h)
        cols.append(np.concatenate([d.real.ravel(), d.imag.ravel()]))
    return np.column_stack(cols)


def _chart_factor(u0, Q0, h):
    """Horizontal volume factor of ``y -> u(y)`` at ``y = 0``.

    Directions along ``u0`` and ``i u0`` (the normal and the phase fibre)
    are projected out before taking ``sqrt(det(D^T D))``.
    """
    n = u0.size
    if n == 1:
        return 1.0
    m = n - 1

    def f(th):
        return _chart(u0, Q0, th[:m] + 1j * th[m:])

    D = _fd_jacobian(f, np.zeros(2 * m), h)
    a = np.concatenate([u0.real, u0.imag])
    b = np.concatenate([-u0.imag, u0.real])  # i u0 as a real vector
    P = np.eye(2 * n) - np.outer(a, a) - np.outer(b, b)
    D = P @ D
    return float(np.sqrt(abs(np.linalg.det(D.T @ D))))


def jacobian_fd_check(chain, h=1e-5, rtol_fd=1e-3):
    """Central-difference ``|det J|`` of ``Phi`` against the closed form.

    Returns ``(numeric, formula, relative_error)``.  The numeric value is
    divided by the sphere chart factors, so it is the density with respect to
    ``d lam du dw dM`` with ``du`` the phase-quotient (horizontal) sphere
    measure.  Raises :class:`FDInstability` when the ``h`` and ``h/2``
    determinants disagree by more than ``rtol_fd`` relative (or ``1e-8``
    absolute when both are tiny).
    """
    n = chain.dim
    if n > 6:
        raise ValueError("finite-difference Jacobian limited to N <= 6")
    theta, unpack = chain_to_params(chain)
    if theta.size != 2 * n * n:
        raise ValueError("parameter count does not match 2 N^2")
    f = lambda th: params_to_matrix(th, unpack)  # noqa: E731

    def numeric(hh):
        J = _fd_jacobian(f, theta, hh)
        det = abs(np.linalg.det(J))
        for s in chain.steps:
            det /= _chart_factor(s.vec, _orth_complement(s.vec), hh)
        return det

    # chart factors must use the same centres as unpack: rebuild from theta
    d1, d2 = numeric(h), numeric(h / 2)
    if abs(d1 - d2) > max(rtol_fd * max(d1, d2), 1e-8):
        raise FDInstability(f"Jacobian determinants disagree: {d1:.6g} vs {d2:.6g}")
    formula = jacobian_formula(chain.eigenvalues, chain.residual)
    rel = abs(d2 - formula) / formula if formula > 0 else abs(d2)
    return float(d2), formula, float(rel)


# --- eigenvector reconstruction -------------------------------------------


def evec_reconstruct(step, mu, x, kind="right"):
    """Lift an eigenvector of ``M^(j)`` (eigenvalue ``mu``) to ``M^(j-1)``.

    Right vector, right step: ``R [w* x / (mu - lam); x]``.  Left vector,
    left step: ``R [w* y / conj(mu - lam); y]``.  Across the other side the
    first component is zero.
    """
    x = np.asarray(x, dtype=np.complex128)
    d = mu - step.lam
    R = householder(step.vec)
    head = 0.0
    if kind == step.side:
        if abs(d) < COLLISION_TOL:
            raise EigenvalueCollision(f"|mu - lam_j| = {abs(d):.3g}")
        num = np.vdot(step.w, x)
        head = num / d if kind == "right" else num / np.conj(d)
    elif kind not in ("right", "left"):
        raise ValueError("kind must be 'right' or 'left'")
    return R @ np.concatenate([[head], x])


def lift_eigenvector(chain, j, mu, x, kind="right", normalize=True):
    """Lift an eigenvector of ``M^(j)`` all the way to ``M^(0)``."""
    for step in reversed(chain.steps[:j]):
        x = evec_reconstruct(step, mu, x, kind)
    return x / np.linalg.norm(x) if normalize else x


# --- spherical integrals ---------------------------------------------------


def sphere_exp_integral(B):
    """``log E[exp(-u* B u)]`` for ``u`` uniform on the unit sphere of ``C^n``.

    Equals ``(n-1)! (-1)^(n-1) [b_1, ..., b_n] exp(-x)`` with ``b_k`` the
    eigenvalues of ``B``; the divided difference is evaluated in log space.
    """
    B = np.atleast_2d(np.asarray(B, dtype=np.complex128))
    B = 0.5 * (B + B.conj().T)
    b = np.linalg.eigvalsh(B)
    n = b.size
    log_abs, _ = log_divdiff_expneg(b)
    return float(math.lgamma(n) + log_abs)


def probe_qT(A, lam, t, T, eta=None):
    """Largest ``q`` keeping ``(A - lam)*(A - lam) + eta^2 - t q T* T`` positive.

    Computed exactly: ``q_T = 1 / (t * lambda_max(T H T*))`` with
    ``H = ((A - lam)*(A - lam) + eta^2)^-1``.
    """
    A = np.asarray(A, dtype=np.complex128)
    if eta is None:
        eta = eta_zt(sym_spectrum(A, lam, with_vectors=False), t)
    X = A - lam * np.eye(A.shape[0])
    S = X.conj().T @ X + eta * eta * np.eye(A.shape[0])
    W = T.vectors * np.sqrt(T.weights)
    C = W.conj().T @ np.linalg.solve(S, W)
    return float(1.0 / (t * np.linalg.eigvalsh(0.5 * (C + C.conj().T)).max()))


def kq_ratio_check(A, lam, t, q, T):
    """Exact ``log K_q - log K_0`` against ``-log det(I - t q H T* T)``.

    ``K_q = E_u exp(-u* B_q u)`` with
    ``B_q = (N/t) [(A - lam)*(A - lam) + eta^2 - t q T* T]`` and
    ``eta = eta_{lam,t}``.

    Returns
    -------
    (lhs, rhs, gap) : floats
        ``gap = lhs - rhs``.
    """
    A = np.asarray(A, dtype=np.complex128)
    n = A.shape[0]
    S = sym_spectrum(A, lam)
    eta = eta_zt(S, t)
    X = A - lam * np.eye(n)
    base = X.conj().T @ X + eta * eta * np.eye(n)
    G = T.gram()
    if q > 0:
        qT = probe_qT(A, lam, t, T, eta)
        if q >= qT:
            raise PositivityLost(f"q={q} is not below q_T={qT:.6g}")
    if q == 0:
        return 0.0, 0.0, 0.0
    Bq = (n / t) * (base - t * q * G)
    B0 = (n / t) * base
    lhs = sphere_exp_integral(Bq) - sphere_exp_integral(B0)
    H = np.linalg.inv(base)
    sign, logdet = np.linalg.slogdet(np.eye(n) - t * q * H @ G)
    if sign.real <= 0:
        raise PositivityLost("I - t q H T* T is not positive")
    rhs = -float(logdet)
    return float(lhs), rhs, float(lhs - rhs)
