import numpy as np
import pytest

from nhevec.dse import solve_mz
from nhevec.ensemble import EnsembleSpec, sample_iid
from nhevec.errors import IllConditioned
from nhevec.hermitization import (
    block_E,
    cross_functionals,
    embed_observable,
    hermitize,
    resolvents,
    sym_spectrum,
    trace_functionals,
    v_functional,
)
from nhevec.spectral import ProjectionObservable


def _A(n, seed=0):
    return sample_iid(EnsembleSpec(dim=n, master_seed=seed), 0)


def test_sym_spectrum_matches_eigh():
    A, z = _A(12), 0.2 - 0.1j
    S = sym_spectrum(A, z)
    Hz = hermitize(A, z)
    assert np.allclose(S.xi, np.linalg.eigvalsh(Hz), atol=1e-12)
    for k in S.ks:
        x = S.vector(k)
        assert np.linalg.norm(Hz @ x - S.value(k) * x) < 1e-12
    assert np.allclose(S.vecs.conj().T @ S.vecs, np.eye(24), atol=1e-12)
    assert np.all(S.value(1) <= S.positive) and np.isclose(S.value(-1), -S.value(1))


def test_sym_spectrum_values_only():
    A = _A(10)
    a = sym_spectrum(A, 0.3, with_vectors=False)
    b = sym_spectrum(A, 0.3)
    assert np.allclose(a.xi, b.xi) and a.vecs is None


def test_col_indexing():
    S = sym_spectrum(_A(4), 0.0)
    assert [S.col(k) for k in S.ks] == list(range(8))
    with pytest.raises(IndexError):
        S.col(0)


def test_resolvent_blocks_match_dense_inverse():
    A, z, eta = _A(10), 0.3 + 0.2j, 0.07
    b = resolvents(A, z, eta)
    G = np.linalg.inv(hermitize(A, z) - 1j * eta * np.eye(20))
    assert np.allclose(b.G, G, atol=1e-10)
    for a in (1, 2):
        for c in (1, 2):
            assert np.allclose(b.block(a, c), G[(a - 1) * 10:a * 10, (c - 1) * 10:c * 10], atol=1e-10)


def test_trace_functionals_against_definitions():
    A, z, eta, eta2 = _A(9), 0.1, 0.2, 0.5
    b, b2 = resolvents(A, z, eta), resolvents(A, z, eta2)
    tf = trace_functionals(b, b2)
    n = 9
    assert np.isclose(tf["H"], np.trace(b.H).real / n)
    assert np.isclose(tf["H"], sym_spectrum(A, z).mean_H(eta))
    assert np.isclose(tf["HHt"], np.trace(b.H @ b.Htilde).real / n)
    assert np.isclose(tf["H2"], np.trace(b.H @ b.H).real / n)
    assert np.isclose(tf["H2X"], np.trace(b.H @ b.H @ b.X) / n)
    G1, G2 = b.G, b2.G
    for key, (B1, B2) in {"E12,E12": ((1, 2), (1, 2)), "E12,E21": ((1, 2), (2, 1)),
                          "E21,E12": ((2, 1), (1, 2)), "E21,E21": ((2, 1), (2, 1))}.items():
        ref = np.trace(G1 @ block_E(n, *B1) @ G2 @ block_E(n, *B2)) / (2 * n)
        assert np.isclose(tf["GBGB"][key], ref, atol=1e-12)


def test_cross_functionals():
    A = _A(8)
    b1, b2 = resolvents(A, 0.0, 0.3), resolvents(A, 0.5, 0.1)
    cf = cross_functionals(b1, b2)
    assert np.isclose(cf["HH"], np.trace(b1.H @ b2.H).real / 8)
    assert np.isclose(cf["HtHt"], np.trace(b1.Htilde @ b2.Htilde).real / 8)
    assert np.isclose(cf["HHt"], np.trace(b1.H @ b2.Htilde).real / 8)


def test_resolvent_trace_near_deterministic_equivalent():
    # large-N average of G against M_z(i eta)
    n, z, eta = 400, 0.4, 0.5
    b = resolvents(_A(n, 3), z, eta)
    M = solve_mz(z, 1j * eta).M
    assert abs(np.trace(b.block(1, 1)) / n - M[0, 0]) < 0.02
    assert abs(np.trace(b.block(2, 2)) / n - M[1, 1]) < 0.02
    assert abs(np.trace(b.block(1, 2)) / n - M[0, 1]) < 0.02


def test_ill_conditioned():
    A = _A(5)
    with pytest.raises(IllConditioned):
        resolvents(A, 0.0, 1e-9, cond_max=1e10)
    with pytest.raises(ValueError):
        resolvents(A, 0.0, 0.0)


def test_embed_observable():
    T = ProjectionObservable.basis(3, [1.0])
    r, l = embed_observable(T, "right"), embed_observable(T, "left")
    assert r[3, 0] == 1 and l[0, 0] == 1
    with pytest.raises(ValueError):
        embed_observable(T, "up")


def test_v_functional_two_forms_agree():
    A = _A(30, 2)
    T = ProjectionObservable.basis(30, [1.0, 0.5])
    for side in ("right", "left"):
        val, det = v_functional(A, 0.1, T, 0.1, side=side)
        assert np.isclose(det["eig_sum"], det["trace_form"], rtol=1e-8)
        assert 0 <= det["pm1"] <= val + 1e-12
    with pytest.raises(ValueError):
        v_functional(A, 0.1, T, 0.7)
