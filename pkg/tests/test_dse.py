import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhevec.dse import (
    cubic_coeffs,
    eta_zt,
    kappa_bulk,
    quantiles,
    rho_z,
    solve_mz,
    support,
    write_quantiles_csv,
    write_rho_csv,
)
from nhevec.errors import BracketFailure
from nhevec.hermitization import sym_spectrum
from nhevec.ensemble import EnsembleSpec, sample_iid


def test_golden_ratio_at_origin():
    m = solve_mz(0.0, 1j).m
    assert abs(m - 1j * (np.sqrt(5) - 1) / 2) < 1e-14


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1.3), st.floats(0, 2 * np.pi), st.floats(-3, 3), st.floats(1e-3, 3))
def test_residual_and_branch(r, th, E, eta):
    z = r * np.exp(1j * th)
    d = solve_mz(z, E + 1j * eta)
    assert d.m.imag > 0
    assert d.residual < 1e-12 * max(1.0, abs(d.m) ** -2)
    c = cubic_coeffs(z, E + 1j * eta)
    assert abs(np.polyval(c, d.m)) < 1e-12


@pytest.mark.parametrize("r", [0.0, 0.3, 0.6, 0.855])
def test_im_m_at_zero(r):
    assert abs(solve_mz(r, 0.0).m.imag - np.sqrt(1 - r * r)) < 1e-8


def test_semicircle_at_zero():
    for E in np.linspace(-1.99, 1.99, 41):
        assert abs(rho_z(0.0, E) - np.sqrt(4 - E * E) / (2 * np.pi)) < 1e-10


def test_support_and_outside():
    (a, b), = support(0.0)
    assert np.isclose(a, -2) and np.isclose(b, 2)
    assert rho_z(0.0, 5.0) == 0.0
    assert np.isclose(rho_z(0.6, 0.0) * np.pi, 0.8)


def test_support_splits_outside_unit_disk():
    iv = support(1.2)
    assert len(iv) == 2 and iv[0][1] < 0 < iv[1][0]


def test_quantiles_small_N():
    p = quantiles(0.0, 2)
    assert np.isclose(p.mass, 1, atol=1e-8)
    assert abs(p.quantile(1) - 0.80794551) < 1e-7
    assert p.quantile(0) == 0 and p.quantile(-1) == -p.quantile(1)
    assert np.isclose(p.quantile(2), 2.0, atol=1e-6)


def test_quantiles_monotone_and_bulk():
    p = quantiles(0.3 + 0.1j, 64)
    assert np.all(np.diff(p.gamma) > 0)
    assert p.bulk and all(a < b for a, b in p.bulk)
    with pytest.raises(ValueError):
        quantiles(0.99, 4, tau=0.05)


def test_kappa_bulk_shrinks_with_kappa():
    wide = kappa_bulk(0.0, 1e-3)
    narrow = kappa_bulk(0.0, 1e-2)
    assert wide[0][0] < narrow[0][0] and narrow[0][1] < wide[0][1]


def test_eta_zt_solves_equation():
    S = sym_spectrum(sample_iid(EnsembleSpec(dim=50, master_seed=1), 0), 0.1)
    t = 0.3
    eta = eta_zt(S, t)
    assert abs(t * S.mean_H(eta) - 1) < 1e-10
    with pytest.raises(BracketFailure):
        eta_zt(S, 1e-6, hi=1.0)


def test_csv_writers(tmp_path):
    p = quantiles(0.0, 3)
    write_rho_csv(tmp_path / "r.csv", p)
    write_quantiles_csv(tmp_path / "q.csv", p)
    assert len((tmp_path / "q.csv").read_text().splitlines()) == 1 + 7
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 1 + p.grid.size
