import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgp_dynamics.errors import ConfigurationError, DomainError
from dgp_dynamics.kernels import KernelSpec, Kind, gram_matrix, kernel_deficit, kernel_eval, kernel_of_diff

ALL = [
    KernelSpec("SE", sigma2=1.5, ell2=0.8),
    KernelSpec("COS", sigma2=1.2, p=2.0),
    KernelSpec("PER", sigma2=0.7, ell2=1.3, p=1.5),
    KernelSpec("RQ", sigma2=2.0, ell2=0.5, alpha=0.7),
    KernelSpec("SM", sigma2=0.3, mu=0.8),
    KernelSpec("MATERN32", sigma2=0.9, ell2=2.0),
]


@pytest.mark.parametrize(
    "spec, r, expected",
    [
        (KernelSpec("SE"), 0.0, 1.0),
        (KernelSpec("SE"), 1.0, math.exp(-0.5)),
        (KernelSpec("SM", sigma2=1.0, mu=1.0), 0.5, -math.exp(-math.pi**2 / 2)),
        (KernelSpec("MATERN32", sigma2=2.0), 0.0, 2.0),
        (KernelSpec("COS", p=2.0), 1.0, 0.0),
        (KernelSpec("PER", sigma2=1.0, ell2=1.0, p=4.0), 1.0, math.exp(-1.0)),
        (KernelSpec("RQ", sigma2=3.0, ell2=1.0, alpha=2.0), 2.0, 3.0 * 2.0**-2),
        (KernelSpec("MATERN32", ell2=3.0), 1.0, 2.0 * math.exp(-1.0)),
    ],
)
def test_kernel_values(spec, r, expected):
    assert kernel_eval(spec, r) == pytest.approx(expected, rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.kind.value)
def test_k0_and_bounds(spec):
    r = np.linspace(0.0, 20.0, 1000)
    k = kernel_eval(spec, r)
    assert k[0] == spec.k0
    assert np.all(np.abs(k) <= spec.k0 + 1e-15)
    if spec.kind is not Kind.COS:
        assert np.argmax(k) == 0


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.kind.value)
def test_deficit_is_k0_minus_k(spec):
    r = np.array([0.0, 1e-9, 1e-4, 0.3, 2.0, 7.5])
    assert kernel_deficit(spec, r) == pytest.approx(spec.k0 - kernel_eval(spec, r), abs=1e-15)


def test_deficit_small_r_no_cancellation():
    spec = KernelSpec("SE", sigma2=1.0, ell2=1.0)
    assert kernel_deficit(spec, 1e-10) == pytest.approx(0.5e-20, rel=1e-12)
    mat = KernelSpec("MATERN32", sigma2=1.0, ell2=1.0)
    y = math.sqrt(3.0) * 1e-5
    assert kernel_deficit(mat, 1e-5) == pytest.approx(y * y / 2 - y**3 / 3, rel=1e-10)


def test_unused_fields_ignored():
    a = KernelSpec("SE", sigma2=1.0, ell2=2.0, p=-5.0, alpha=0.0)
    b = KernelSpec("SE", sigma2=1.0, ell2=2.0)
    assert kernel_eval(a, 1.3) == kernel_eval(b, 1.3)


@pytest.mark.parametrize(
    "kind, field", [("SE", "ell2"), ("COS", "p"), ("RQ", "alpha"), ("SM", "mu"), ("PER", "sigma2")]
)
def test_invalid_hyperparameters(kind, field):
    with pytest.raises(ConfigurationError):
        KernelSpec(kind, **{field: 0.0})
    with pytest.raises(ConfigurationError):
        KernelSpec(kind, **{field: float("inf")})


def test_kind_parse_aliases():
    assert Kind.parse("matern") is Kind.MATERN32
    assert Kind.parse("rbf") is Kind.SE
    assert KernelSpec("per").kind is Kind.PER
    with pytest.raises(ConfigurationError):
        Kind.parse("linear")


def test_numpy_scalars_accepted():
    spec = KernelSpec("SE", sigma2=np.float32(2.0), ell2=np.int64(3))
    assert spec.ell2 == 3.0 and isinstance(spec.ell2, float)


def test_negative_distance_rejected():
    with pytest.raises(DomainError):
        kernel_eval(KernelSpec("SE"), -0.1)


def test_gram_examples():
    assert gram_matrix(KernelSpec("SE"), [0.0]).tolist() == [[1.0]]
    g = gram_matrix(KernelSpec("SE"), [0.0, 1.0])
    assert g == pytest.approx(np.array([[1, math.exp(-0.5)], [math.exp(-0.5), 1]]), rel=1e-15)
    g = gram_matrix(KernelSpec("COS", p=2.0), [0.0, 1.0])
    assert g == pytest.approx(np.eye(2), abs=1e-15)


def test_gram_errors():
    with pytest.raises(DomainError):
        gram_matrix(KernelSpec("SE"), [])
    with pytest.raises(DomainError):
        gram_matrix(KernelSpec("SE"), [[0.0, 1.0], [1.0]])


def test_sm_product_over_coordinates():
    spec = KernelSpec("SM", sigma2=0.4, mu=0.7)
    d = np.array([0.3, -0.8])
    per_axis = [kernel_eval(spec, abs(v)) for v in d]
    assert kernel_of_diff(spec, d) == pytest.approx(per_axis[0] * per_axis[1], rel=1e-14)


@given(
    st.lists(st.lists(st.floats(-10, 10), min_size=2, max_size=2), min_size=1, max_size=12),
    st.sampled_from(ALL),
    st.floats(-50, 50),
)
@settings(max_examples=100, deadline=None)
def test_gram_symmetric_and_stationary(points, spec, shift):
    g = gram_matrix(spec, points)
    assert np.array_equal(g, g.T)
    assert np.all(np.diag(g) == spec.k0)
    moved = gram_matrix(spec, np.asarray(points) + shift)
    assert moved == pytest.approx(g, abs=1e-9)
