import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhevec.divdiff import divdiff_expneg, log_divdiff_expneg


def mp_divdiff(nodes):
    """Distinct-node divided difference of exp(-x) at 60 digits."""
    mpmath.mp.dps = 60
    x = [mpmath.mpf(v) for v in nodes]
    tot = mpmath.mpf(0)
    for i, xi in enumerate(x):
        den = mpmath.mpf(1)
        for k, xk in enumerate(x):
            if k != i:
                den *= xi - xk
        tot += mpmath.exp(-xi) / den
    return tot


@pytest.mark.parametrize("nodes", [[0.0, 1.0], [0.3, 2.0, 5.0], [0.0, 0.1, 0.2, 10.0, 30.0],
                                   list(np.linspace(0, 40, 9))])
def test_matches_mpmath(nodes):
    ref = mp_divdiff(nodes)
    la, s = log_divdiff_expneg(np.array(nodes))
    assert s == int(mpmath.sign(ref))
    assert abs(la - float(mpmath.log(abs(ref)))) < 1e-9


def test_coincident_nodes_give_derivative():
    # [x, x, x] f = f''(x) / 2
    x = 1.7
    assert np.isclose(divdiff_expneg([x, x, x]), np.exp(-x) / 2, rtol=1e-10)


def test_single_node():
    assert np.isclose(divdiff_expneg([2.0]), np.exp(-2.0))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=2, max_size=7), st.randoms())
def test_permutation_invariant(nodes, rnd):
    perm = list(nodes)
    rnd.shuffle(perm)
    a, sa = log_divdiff_expneg(np.array(nodes))
    b, sb = log_divdiff_expneg(np.array(perm))
    assert sa == sb
    assert abs(a - b) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 30), min_size=1, max_size=6))
def test_sign_alternates_with_order(nodes):
    # exp(-x) has derivatives of sign (-1)^k, so the divided difference does too
    _, s = log_divdiff_expneg(np.array(nodes))
    assert s == (-1) ** (len(nodes) - 1)
