import numpy as np
import pytest

from nhevec.dse import quantiles
from nhevec.ensemble import EnsembleSpec, sample_iid
from nhevec.hermitization import SymSpectrum, sym_spectrum
from nhevec.locallaw import (
    ScalingReport,
    a3_vector_set,
    check_a1,
    check_a2,
    check_a3_isotropic,
    eth_check,
    eth_predicted,
    fit_slope,
    grad_scaling,
    level_repulsion,
    level_repulsion_summary,
    rigidity_deloc,
    second_singular,
    trace_TG,
)
from nhevec.spectral import ProjectionObservable


def _A(n, seed=0, idx=0):
    return sample_iid(EnsembleSpec(dim=n, master_seed=seed), idx)


def test_fit_slope_exact_power():
    x = np.geomspace(0.01, 1, 9)
    s, c, r2 = fit_slope(x, 3 * x**-2.5)
    assert np.isclose(s, -2.5) and np.isclose(c, np.log(3)) and np.isclose(r2, 1)


def test_scaling_report_constants():
    x = np.geomspace(0.1, 1, 5)
    rep = ScalingReport("q", x, 2 * x**-1.0, -1.0, "two-sided")
    assert np.isclose(rep.c, 2) and np.isclose(rep.C, 2) and rep.passed
    up = ScalingReport("u", x, 20 * x**-1.0, -1.0, "upper", bound=10)
    assert not up.passed and up.to_dict()["pass"] is False


def test_a1_zero_matrix_closed_forms():
    # A = 0, z = 0: H = Ht = eta^-2, so <H> ~ eta^-2 and <HHt> = <H^2> = eta^-4
    grid = np.geomspace(0.1, 1, 6)
    reps = check_a1(np.zeros((4, 4)), 0.0, grid)
    slopes = [r.slope for r in reps[:3]]
    assert np.allclose(slopes, [-2, -4, -4], atol=1e-10)
    assert np.allclose(reps[0].values, grid**-2)


def test_a1_ginibre_fitted_slopes_are_finite():
    grid = np.geomspace(64 ** (-1 / 3), 1, 6)
    reps = check_a1([_A(64, 1, i) for i in range(2)], 0.3, grid)
    assert all(np.isfinite(r.slope) for r in reps)
    assert reps[3].kind == "upper" and reps[4].kind == "upper"


def test_a2_lower_bounds_positive():
    grid = np.geomspace(0.3, 1, 4)
    reps = check_a2(_A(48, 2), 0.0, 0.5, grid, grid)
    assert all(r.c > 0 for r in reps)


def test_a3_vector_set_size():
    W = np.eye(5, 2)
    assert len(a3_vector_set(W)) == 2 + 2 * 4
    assert len(a3_vector_set(W[:, 0])) == 1


def test_a3_scaling_report():
    grid = np.geomspace(0.3, 1, 4)
    reps = check_a3_isotropic(_A(64, 3), 0.2, grid, a3_vector_set(np.eye(64, 2)))
    assert len(reps) == 2 and all(r.C < 10 for r in reps)


def test_rigidity_and_delocalization():
    n = 128
    S = sym_spectrum(_A(n, 4), 0.3 + 0.1j)
    r = rigidity_deloc(S, quantiles(0.3 + 0.1j, n))
    assert r["pass"] and r["n_bulk"] > n
    with pytest.raises(ValueError):
        rigidity_deloc(S, quantiles(0.3 + 0.1j, 64))


def test_rigidity_degenerate_spectrum_note():
    n = 4
    xi = np.concatenate([-np.ones(n), np.ones(n)])
    S = SymSpectrum(0.0, xi, np.eye(2 * n))
    r = rigidity_deloc(S, quantiles(0.0, n))
    assert r["pass"] is None and "DegenerateSpectrum" in r["note"]


def test_eth_prediction_and_check():
    n = 96
    Y = np.zeros((2 * n, 2 * n), complex)
    Y[:n, n:] = np.eye(n)
    d, a = eth_predicted(0.3, 0.5, Y, n)
    assert np.isfinite(d) and np.isfinite(a)
    r = eth_check(sym_spectrum(_A(n, 5), 0.3), Y)
    assert r["max_dev"] <= np.log(n)
    bad = np.eye(2 * n)
    with pytest.raises(ValueError):
        eth_check(sym_spectrum(_A(n, 5), 0.3), bad)


def test_level_repulsion_summary():
    n = 100
    # thresholds 100^-1.05, 100^-1.1, 100^-1.2 = 0.0079, 0.0063, 0.0040
    s = level_repulsion_summary([1e-5, 5e-3, 1.0, 1.0], n, [0.05, 0.1, 0.2])
    freqs = [r["frequency"] for r in s["rows"]]
    assert freqs == [0.5, 0.5, 0.25] and s["monotone"]
    with pytest.raises(ValueError):
        level_repulsion_summary([1.0], n, [0.3])


def test_level_repulsion_small_run():
    spec = EnsembleSpec(dim=32, master_seed=1)
    out = level_repulsion(spec, 0.0, [0.1], 50)
    assert out["xi2"].size == 50
    assert np.all(out["xi2"] >= 0)
    assert second_singular(np.diag([1.0, 2.0, 3.0]), 0.0) == 2.0


def test_trace_tg_against_dense():
    from nhevec.hermitization import embed_observable, hermitize
    A = _A(10, 6)
    T = ProjectionObservable.basis(10, [1.0, 0.5])
    Wt = embed_observable(T, "right")
    G = np.linalg.inv(hermitize(A, 0.2) - 0.1j * np.eye(20))
    ref = np.trace((Wt * T.weights) @ Wt.conj().T @ G)
    assert np.isclose(trace_TG(A, 0.2, 0.1, Wt, T.weights), ref)


def test_grad_scaling_ratios_bounded():
    n = 64
    T = ProjectionObservable.basis(n, [1.0])
    r = grad_scaling(_A(n, 7), 0.1, T, n ** -1.1)
    for k in ("grad_ratio", "hess_ratio", "gradV_ratio"):
        assert 0 < r[k] < r["bound"], (k, r[k])
