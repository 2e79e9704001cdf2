import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhevec.ensemble import EnsembleSpec, sample_iid
from nhevec.errors import SeparationViolated
from nhevec.spectral import (
    ProjectionObservable,
    eig_near,
    eig_pairs,
    matrix_digest,
    nearest_indices,
    overlap_matrix,
    projection_stat,
    schur_form,
)


def _A(n, seed=0, idx=0):
    return sample_iid(EnsembleSpec(dim=n, master_seed=seed), idx)


def test_eig_pairs_residuals_and_biorth():
    A = _A(40)
    S = eig_pairs(A)
    for t in S.triples:
        assert np.linalg.norm(A @ t.u - t.lam * t.u) < 1e-10
        assert np.linalg.norm(t.v.conj() @ A - t.lam * t.v.conj()) < 1e-10
        assert np.isclose(np.linalg.norm(t.u), 1) and np.isclose(np.linalg.norm(t.v), 1)
        vu = np.vdot(t.v, t.u)
        assert abs(vu.imag) < 1e-12 and vu.real > 0
        assert np.isclose(t.overlap, 1 / abs(vu) ** 2)


def test_overlap_matrix_diagonal():
    S = eig_pairs(_A(20))
    O = overlap_matrix(S)
    assert np.allclose(np.diag(O).real, [t.overlap for t in S.triples])
    # overlaps >= 1 on the diagonal
    assert np.all(np.diag(O).real >= 1 - 1e-12)


def test_eig_near_matches_eig_pairs_up_to_phase():
    A = _A(60, seed=3)
    S = eig_pairs(A)
    sch = schur_form(A)
    for z in (0.0, 0.4, -0.3 + 0.2j):
        t = eig_near(A, [z], schur=sch)[0]
        ref = S[int(np.argmin(np.abs(S.eigenvalues - z)))]
        assert abs(t.lam - ref.lam) < 1e-10
        assert abs(abs(np.vdot(ref.u, t.u)) - 1) < 1e-9
        assert abs(abs(np.vdot(ref.v, t.v)) - 1) < 1e-9
        assert np.isclose(t.biorth, ref.biorth, rtol=1e-8)


def test_separation_violation():
    lam = np.array([0.0, 0.01, 1.0])
    # both targets pick eigenvalues closer than epsilon N^-1/2
    with pytest.raises(SeparationViolated):
        nearest_indices(lam, [0.0, 0.012], epsilon=1.0, n=4)


def test_digest_is_stable():
    A = _A(5)
    assert matrix_digest(A) == matrix_digest(A.copy())
    assert matrix_digest(A) != matrix_digest(A + 1e-15)


def test_observable_validation():
    with pytest.raises(ValueError):
        ProjectionObservable([1.0, -1.0], np.eye(3, 2))
    with pytest.raises(ValueError):
        ProjectionObservable([1.0, 1.0], np.ones((3, 2)))
    T = ProjectionObservable.basis(4, [1.0, 0.5])
    assert T.rank == 2 and T.dim == 4 and T.frobenius_sq == 1.5
    assert np.allclose(T.matrix().conj().T @ T.matrix(), T.gram())


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_from_matrix_recovers_gram(n, seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
    P = ProjectionObservable.from_matrix(T)
    assert np.allclose(P.gram(), T.conj().T @ T)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10**6))
def test_projection_stat_bounds(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    T = ProjectionObservable.basis(n, [1.0, 0.5])
    val = projection_stat(T, x)
    assert 0 <= val <= n * 1.0 + 1e-12
    assert np.isclose(val, n * np.linalg.norm(T.matrix() @ x) ** 2)
