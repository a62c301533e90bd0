import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from dgp_dynamics.errors import DomainError, NumericalFailure
from dgp_dynamics.oracle import chi_moment
from dgp_dynamics.quadrature import QuadratureConfig
from dgp_dynamics.specfun import (
    EvalResult,
    chi2_mgf,
    chi_mgf,
    chi_weighted_mgf,
    hyp1f1_array,
    kummer_1f1,
    ln_gamma,
    noncentral_chi2_mgf,
)

TIGHT = QuadratureConfig(abs_tol=1e-20, rel_tol=1e-12)


@pytest.mark.parametrize("x, expected", [(1.0, 0.0), (4.0, math.log(6.0)), (0.5, 0.5723649429247001)])
def test_ln_gamma_values(x, expected):
    assert ln_gamma(x) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_ln_gamma_domain(x):
    with pytest.raises(DomainError):
        ln_gamma(x)


# reference values computed with mpmath at 30 digits
@pytest.mark.parametrize(
    "a, b, z, expected",
    [
        (0.7, 1.3, 0.0, 1.0),
        (0.5, 0.5, -2.0, math.exp(-2.0)),
        (1.0, 2.0, 1.0, math.e - 1.0),
        (1.5, 3.0, -100.0, 0.00223972495571581598575514830229),
        (1.0, 0.5, -30.0, -0.0175790498616661852415152327402),
        (2.5, 0.5, -700.0, 6.41405810727706669441959198705e-299),
    ],
)
def test_kummer_reference(a, b, z, expected):
    res = kummer_1f1(a, b, z)
    assert isinstance(res, EvalResult)
    assert res.value == pytest.approx(expected, rel=1e-12, abs=0 if expected else 1e-300)
    assert res.abs_error_estimate >= 0


def test_kummer_domain_errors():
    with pytest.raises(DomainError):
        kummer_1f1(1.0, 0.0, -1.0)
    with pytest.raises(DomainError):
        kummer_1f1(1.0, -2.0, -1.0)
    with pytest.raises(DomainError):
        kummer_1f1(1.0, 1.5, 60.0)


def test_kummer_array_matches_scalar():
    z = np.array([0.0, -1e-3, -1.0, -40.0, -499.0, -800.0, 10.0])
    arr = hyp1f1_array(1.5, 0.5, z)
    assert arr == pytest.approx([kummer_1f1(1.5, 0.5, float(v)).value for v in z], rel=1e-13)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 3.0])
@pytest.mark.parametrize("b", [0.5, 1.0, 1.5, 3.0])
def test_kummer_transform_consistency(a, b):
    # the positive-argument side beyond z = 50 is evaluated with mpmath
    for z in -np.logspace(-6, 2, 25):
        lhs = kummer_1f1(a, b, z).value
        if -z <= 50:
            rhs = math.exp(z) * kummer_1f1(b - a, b, -z).value
        else:
            rhs = float(mpmath.exp(z) * mpmath.hyp1f1(b - a, b, -z))
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-50.0, 0.0))
@settings(max_examples=200, deadline=None)
def test_kummer_transform_property(a, b, z):
    lhs = kummer_1f1(a, b, z).value
    rhs = math.exp(z) * kummer_1f1(b - a, b, -z).value
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1e-300) + 1e-300


@pytest.mark.parametrize(
    "t, m, expected", [(0.0, 5, 1.0), (-0.5, 2, 0.5), (-1.0, 1, 3 ** -0.5)]
)
def test_chi2_mgf(t, m, expected):
    assert chi2_mgf(t, m) == pytest.approx(expected, rel=1e-15)


def test_chi2_mgf_domain():
    with pytest.raises(DomainError):
        chi2_mgf(0.5, 1)
    with pytest.raises(DomainError):
        chi2_mgf(0.0, 0)


@pytest.mark.parametrize(
    "t, lam, k, expected",
    [(-0.3, 0.0, 1, 0.7905694150420949), (0.0, 7.0, 1, 1.0), (-0.5, 2.0, 1, 2 ** -0.5 * math.exp(-0.5))],
)
def test_noncentral_chi2_mgf(t, lam, k, expected):
    assert noncentral_chi2_mgf(t, lam, k) == pytest.approx(expected, rel=1e-15)


def test_noncentral_reduces_to_central():
    for t in np.linspace(-5, 0.4, 20):
        assert noncentral_chi2_mgf(t, 0.0, 3) == chi2_mgf(t, 3)
    with pytest.raises(DomainError):
        noncentral_chi2_mgf(-1.0, -0.1, 1)
    with pytest.raises(DomainError):
        noncentral_chi2_mgf(0.6, 1.0, 1)


@pytest.mark.parametrize(
    "t, m, expected",
    [
        (0.0, 3, 1.0),
        # E[exp(-|N(0,1)|)] = 2 e^{1/2} Phi(-1)
        (-1.0, 1, 0.523156583730246743363687673691),
        (-2.0, 2, 0.157261541423891053550131332915),
        (-10.0, 5, 0.0000554236609849225223465438172432),
    ],
)
def test_chi_mgf_reference(t, m, expected):
    assert chi_mgf(t, m).value == pytest.approx(expected, rel=1e-12)


@given(st.floats(-500.0, 0.0), st.integers(1, 40))
@settings(max_examples=200, deadline=None)
def test_chi_mgf_half_normal_and_range(t, m):
    v = chi_mgf(t, m).value
    assert 0.0 < v <= 1.0
    if m == 1 and t > -30:
        # half-normal closed form; beyond |t| = 30 the exp/erfc product under/overflows
        ref = math.exp(0.5 * t * t) * erfc(-t / math.sqrt(2.0))
        assert v == pytest.approx(ref, rel=1e-10)


def test_chi_mgf_branches_agree_at_switch():
    # both evaluation routes near the switching point
    for m in (1, 4, 25, 60):
        a = min(1.0, 1.5 / math.sqrt(m))
        below = chi_mgf(-a * (1 - 1e-9), m).value
        above = chi_mgf(-a * (1 + 1e-9), m).value
        assert above == pytest.approx(below, rel=1e-8)


def test_chi_mgf_domain():
    with pytest.raises(DomainError):
        chi_mgf(0.1, 2)


@pytest.mark.parametrize("fn", [lambda t: chi2_mgf(t, 3), lambda t: chi_mgf(t, 3).value,
                                lambda t: noncentral_chi2_mgf(t, 1.5, 3)])
def test_mgfs_strictly_decreasing(fn):
    # MGFs of positive variables increase in t, i.e. decrease as t moves left
    vals = [fn(t) for t in np.linspace(-20.0, 0.0, 100)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert fn(0.0) == 1.0


@pytest.mark.parametrize(
    "t, m, k, expected",
    [
        (0.0, 1, 1, math.sqrt(2.0 / math.pi)),
        (0.0, 3, 1, 2.0 * math.sqrt(2.0 / math.pi)),
        (-1.0, 1, 1, 0.274727977072618612516204446177),
    ],
)
def test_chi_weighted_mgf_values(t, m, k, expected):
    assert chi_weighted_mgf(t, m, k).value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3, 10])
@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("t", [0.0, -0.5, -2.0, -10.0])
def test_chi_weighted_mgf_matches_quadrature(m, k, t):
    ref = chi_moment(t, m, k, TIGHT).value
    assert abs(chi_weighted_mgf(t, m, k).value - ref) <= 1e-8 * ref


def test_eval_result_rejects_nonfinite():
    with pytest.raises(NumericalFailure):
        EvalResult(float("nan"), 0.0, 1)
