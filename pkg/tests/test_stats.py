import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from nhevec.stats import (
    GaussianSquareLaw,
    LimitLaw,
    SampleSet,
    det_mgf_compare,
    ecdf,
    ginue_correlation,
    independence_check,
    ks_distance,
    ks_test,
    limit_law_cdf,
    mgf_compare,
)


def test_exponential_cdf():
    x = np.linspace(0, 8, 17)
    assert np.allclose(LimitLaw((1.0,)).cdf(x), 1 - np.exp(-x), atol=1e-13)


def test_hypoexponential_closed_form():
    x = np.linspace(0.1, 6, 12)
    ref = 1 - 2 * np.exp(-x) + np.exp(-2 * x)  # weights 1, 0.5
    assert np.allclose(LimitLaw((1.0, 0.5)).cdf(x), ref, atol=1e-12)


def test_equal_weights_are_gamma():
    import scipy.stats
    x = np.linspace(0.1, 8, 10)
    assert np.allclose(LimitLaw((1.0, 1.0, 1.0)).cdf(x), scipy.stats.gamma.cdf(x, 3), atol=1e-11)


def test_cdf_monte_carlo_at_one():
    law = LimitLaw((1.0, 0.5, 0.2))
    s = law.sample(400_000, np.random.default_rng(9))
    p = np.mean(s <= 1.0)
    se = np.sqrt(p * (1 - p) / s.size)
    assert abs(law.cdf(1.0) - p) < 3 * se


@pytest.mark.parametrize("w", [(1.0,), (1.0, 0.5), (0.7, 0.7, 0.1)])
def test_mgf_matches_integrated_cdf(w):
    # E e^{sX} = 1 + s int_0^inf e^{sx} (1 - F(x)) dx for s < 0
    law = LimitLaw(w)
    s = -1.0
    val, _ = scipy.integrate.quad(lambda x: np.exp(s * x) * (1 - law.cdf(x)), 0, np.inf,
                                  epsabs=1e-12, epsrel=1e-12, limit=200)
    assert abs(1 + s * val - law.mgf(s)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 3), min_size=1, max_size=5), st.floats(0, 20))
def test_cdf_is_a_probability(w, x):
    F = limit_law_cdf(LimitLaw(tuple(w)), x)
    assert 0.0 <= F <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 3), min_size=1, max_size=5))
def test_cdf_monotone(w):
    F = LimitLaw(tuple(w)).cdf(np.linspace(0, 15, 40))
    assert np.all(np.diff(F) >= -1e-12)


def test_law_validation():
    with pytest.raises(ValueError):
        LimitLaw((1.0, -1.0))
    with pytest.raises(ValueError):
        LimitLaw((1.0, 0.5), kind="exponential")
    with pytest.raises(ValueError):
        LimitLaw((1.0,)).mgf(1.5)
    with pytest.raises(ValueError):
        LimitLaw((1.0,)).cdf(-1.0)


def test_gaussian_square_law():
    g = GaussianSquareLaw(1.5)
    s = g.sample(200_000, np.random.default_rng(1))
    assert abs(s.mean() - 1.5) < 0.02
    assert np.isclose(g.mgf(-1.0), 1 / np.sqrt(4.0))
    assert g.kind == "real-gaussian-square"


def test_ecdf_has_n_plus_one_heights():
    x, F = ecdf([3.0, 1.0, 2.0])
    assert list(x) == [1, 2, 3] and F.size == 4 and F[0] == 0 and F[-1] == 1


def test_ks_distance_exact_small():
    # single sample at the median of Exp(1): D = 1/2
    assert np.isclose(ks_distance([np.log(2)], lambda x: 1 - np.exp(-x)), 0.5)


def test_ks_calibration():
    # the 1% critical value rejects about 1% of true-null samples
    rng = np.random.default_rng(77)
    law = GaussianSquareLaw(1.0)  # vectorized CDF keeps this fast
    rej = [not ks_test(law.sample(200, rng), law).passed for _ in range(1000)]
    assert 0.005 <= np.mean(rej) <= 0.015


def test_ks_requires_100():
    with pytest.raises(ValueError):
        ks_test(np.ones(50), LimitLaw((1.0,)))


def test_mgf_compare_and_det_compare():
    rng = np.random.default_rng(3)
    law = LimitLaw((1.0, 0.5))
    s = law.sample(5000, rng)
    r = mgf_compare(s, law, s_grid=(-1.0, -0.5))
    assert r.passed and len(r.extra["rows"]) == 2
    with pytest.raises(ValueError):
        mgf_compare(s, law, s_grid=(0.5,))
    a = rng.normal(1.0, 0.1, 1000)
    d = det_mgf_compare(a, a + 1e-4)
    assert d.passed
    assert not det_mgf_compare(a, a + 1.0).passed


def test_independence():
    rng = np.random.default_rng(4)
    x, y = rng.standard_normal(2000), rng.standard_normal(2000)
    assert independence_check(x, y, 0.05, 0.01).passed
    assert not independence_check(x, x + 0.3 * y, 0.05, 0.01).passed


def test_sampleset_roundtrip(tmp_path):
    s = SampleSet("lbl", np.array([[1.0, 2.0], [3.5, 4.25]]), {"N": 4})
    s.to_csv(tmp_path / "s.csv")
    t = SampleSet.from_csv(tmp_path / "s.csv")
    assert t.label == "lbl" and t.metadata == {"N": 4} and np.array_equal(t.values, s.values)
    with pytest.raises(ValueError):
        SampleSet("x", [np.nan])


def test_ginue_correlation():
    assert np.isclose(ginue_correlation([0.3]), 1 / np.pi)
    # coinciding points repel completely
    assert abs(ginue_correlation([0.2, 0.2])) < 1e-15
    far = ginue_correlation([0.0, 10.0])
    assert np.isclose(far, 1 / np.pi**2)
