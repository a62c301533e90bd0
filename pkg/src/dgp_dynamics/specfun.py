"""Special functions behind the recurrence maps.

Kummer's confluent hypergeometric function ``1F1`` and the moment-generating
functions of the chi-squared, chi and non-central chi-squared distributions.
Everything here is evaluated for real, mostly non-positive, arguments: the
recurrences only ever need ``E[exp(t X)]`` with ``t <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from .errors import DomainError, NumericalFailure

__all__ = [
    "EvalResult",
    "ln_gamma",
    "kummer_1f1",
    "hyp1f1_array",
    "chi2_mgf",
    "chi_mgf",
    "noncentral_chi2_mgf",
    "chi_weighted_mgf",
]

EPS = np.finfo(float).eps
TERM_BUDGET = 10_000
SERIES_RTOL = 1e-16
# Below this argument the ascending series (after the Kummer transform) is
# replaced by the large-|z| asymptotic expansion.
ASYMPTOTIC_Z = -500.0
MAX_Z = 50.0
# chi_mgf switches from the 1F1 combination to the erfcx/continued-fraction
# route above min(CHI_SWITCH, CHI_SWITCH_SCALE / sqrt(m)); the 1F1 form
# cancels catastrophically for large |t| and large m.
CHI_SWITCH = 1.0
CHI_SWITCH_SCALE = 1.5


@dataclass(frozen=True)
class EvalResult:
    """A function value with an absolute error estimate and the work spent."""

    value: float
    abs_error_estimate: float
    terms_or_nodes_used: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericalFailure(
                f"non-finite result {self.value!r}", work=self.terms_or_nodes_used
            )
        if not self.abs_error_estimate >= 0.0:
            raise ValueError("abs_error_estimate must be >= 0")

    def __float__(self):
        return float(self.value)


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0.0:
        raise DomainError(f"ln_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def _gamma_sign(x: float) -> float:
    if x > 0.0:
        return 1.0
    # Gamma alternates sign between consecutive negative integers.
    return -1.0 if math.floor(x) % 2 else 1.0


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0.0 and float(x).is_integer()


def _ascending_series(a: float, b: float, x: float) -> tuple[float, float, int]:
    """Sum ``sum_n (a)_n / (b)_n x^n / n!`` term by term.

    Returns ``(sum, sum of |terms|, number of terms)``.
    """
    term = 1.0
    total = 1.0
    abs_total = 1.0
    prev = math.inf
    for n in range(TERM_BUDGET):
        term *= (a + n) / (b + n) * x / (n + 1)
        total += term
        at = abs(term)
        abs_total += at
        if at == 0.0:
            return total, abs_total, n + 2
        if at <= SERIES_RTOL * abs(total) and at <= prev:
            return total, abs_total, n + 2
        prev = at
    raise NumericalFailure(
        f"1F1({a}, {b}, {x}) series did not converge in {TERM_BUDGET} terms",
        work=TERM_BUDGET,
        error_estimate=abs(term),
    )


def _asymptotic_negative(a: float, b: float, x: float) -> tuple[float, float, int]:
    """``1F1(a, b, -x)`` for large positive ``x`` (the algebraic branch).

    The exponentially small companion term is below ``exp(-500)`` relative to
    unity and is dropped.
    """
    if _is_nonpositive_int(b - a):
        return 0.0, 0.0, 0
    log_pref = math.lgamma(b) - math.lgamma(b - a) - a * math.log(x)
    sign = _gamma_sign(b) * _gamma_sign(b - a)
    term = 1.0
    total = 1.0
    for s in range(TERM_BUDGET):
        nxt = term * (a + s) * (a - b + 1 + s) / ((s + 1) * x)
        if abs(nxt) >= abs(term) and s > 0:
            # Smallest term reached; the series is asymptotic only.
            break
        term = nxt
        total += term
        if abs(term) <= SERIES_RTOL * abs(total):
            break
    scale = sign * math.exp(log_pref)
    value = scale * total
    err = abs(scale) * (abs(term) + 4 * EPS * abs(total))
    return value, err, s + 1


def kummer_1f1(a: float, b: float, z: float) -> EvalResult:
    """Kummer's confluent hypergeometric function ``M(a, b, z)``.

    For ``z < 0`` the Kummer transformation
    ``M(a, b, z) = exp(z) M(b - a, b, -z)`` is applied before summing so that
    the series has no alternating cancellation. For ``z < -500`` the
    large-argument asymptotic expansion is used instead.

    Raises
    ------
    DomainError
        If ``b`` is zero or a negative integer, or ``z > 50``.
    NumericalFailure
        If the series exhausts its term budget.
    """
    a = float(a)
    b = float(b)
    z = float(z)
    if _is_nonpositive_int(b):
        raise DomainError(f"1F1 undefined for b = {b}")
    if not math.isfinite(z) or z > MAX_Z:
        raise DomainError(f"1F1 argument z = {z} outside supported range (-inf, {MAX_Z}]")
    if z == 0.0 or a == 0.0:
        return EvalResult(1.0, 0.0, 1)
    if z > 0.0:
        total, abs_total, n = _ascending_series(a, b, z)
        return EvalResult(total, 4 * EPS * (abs_total + n * abs(total)), n)
    if z < ASYMPTOTIC_Z and not _is_nonpositive_int(b - a):
        value, err, n = _asymptotic_negative(a, b, -z)
        return EvalResult(value, err, n)
    total, abs_total, n = _ascending_series(b - a, b, -z)
    scale = math.exp(z)
    value = scale * total
    return EvalResult(value, 4 * EPS * scale * (abs_total + n * abs(total)), n)


def hyp1f1_array(a: float, b: float, z) -> np.ndarray:
    """Vectorised ``M(a, b, z)`` for an array of ``z`` values.

    Same branches as :func:`kummer_1f1`; the ascending series runs on all
    elements at once and stops when every element has converged.
    """
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    out = np.empty_like(flat)
    if _is_nonpositive_int(b):
        raise DomainError(f"1F1 undefined for b = {b}")
    if np.any(~np.isfinite(flat)) or np.any(flat > MAX_Z):
        raise DomainError(f"1F1 argument outside supported range (-inf, {MAX_Z}]")

    asym = flat < ASYMPTOTIC_Z
    if _is_nonpositive_int(b - a):
        asym[:] = False
    for i in np.flatnonzero(asym):
        out[i] = _asymptotic_negative(a, b, -flat[i])[0]

    rest = ~asym
    if np.any(rest):
        zr = flat[rest]
        neg = zr < 0.0
        x = np.abs(zr)
        aa = np.where(neg, b - a, a)
        term = np.ones_like(x)
        total = np.ones_like(x)
        prev = np.full_like(x, np.inf)
        active = x > 0.0
        n = 0
        while np.any(active):
            if n >= TERM_BUDGET:
                raise NumericalFailure("vectorised 1F1 series did not converge", work=n)
            term = np.where(active, term * (aa + n) / (b + n) * x / (n + 1), 0.0)
            total = total + term
            at = np.abs(term)
            done = (at == 0.0) | ((at <= SERIES_RTOL * np.abs(total)) & (at <= prev))
            active &= ~done
            prev = at
            n += 1
        out[rest] = np.where(neg, np.exp(-x) * total, total)
    return out.reshape(z.shape)


def _check_dof(m) -> int:
    if int(m) != m or m < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {m!r}")
    return int(m)


def chi2_mgf(t: float, m: int) -> float:
    """MGF of the chi-squared distribution, ``(1 - 2t)^(-m/2)``."""
    m = _check_dof(m)
    if not t < 0.5:
        raise DomainError(f"chi2_mgf needs t < 1/2, got {t!r}")
    return (1.0 - 2.0 * t) ** (-0.5 * m)


def noncentral_chi2_mgf(t: float, lam: float, k: int) -> float:
    """MGF of the non-central chi-squared distribution.

    ``(1 - 2t)^(-k/2) * exp(lam t / (1 - 2t))``; with ``lam == 0`` this is
    exactly :func:`chi2_mgf`.
    """
    k = _check_dof(k)
    if not t < 0.5:
        raise DomainError(f"noncentral_chi2_mgf needs t < 1/2, got {t!r}")
    if lam < 0.0:
        raise DomainError(f"noncentrality must be >= 0, got {lam!r}")
    base = 1.0 - 2.0 * t
    if lam == 0.0:
        return base ** (-0.5 * k)
    return base ** (-0.5 * k) * math.exp(lam * t / base)


def _chi_mgf_cf(a: float, m: int) -> EvalResult:
    # I_k(a) = int_0^inf x^k exp(-a x - x^2/2) dx obeys
    # I_{k+1} = k I_{k-1} - a I_k, so r_k = I_k / I_{k-1} = k / (a + r_{k+1}).
    # I_k is the minimal solution, hence the backward sweep is stable.
    log_i0 = 0.5 * math.log(0.5 * math.pi) + math.log(erfcx(a / math.sqrt(2.0)))
    need = m - 1
    depth = need + 40 + int((20.0 / a) ** 2)
    prev_log = None
    for _ in range(12):
        r = 0.0
        log_prod = 0.0
        for j in range(depth, 0, -1):
            r = j / (a + r)
            if j <= need:
                log_prod += math.log(r)
        if prev_log is not None and abs(log_prod - prev_log) <= 1e-15 * max(1.0, abs(log_prod)):
            break
        prev_log = log_prod
        depth *= 2
    else:
        raise NumericalFailure(f"chi_mgf continued fraction stalled at a={a}", work=depth)
    log_val = log_i0 + log_prod - ((0.5 * m - 1.0) * math.log(2.0) + math.lgamma(0.5 * m))
    value = math.exp(log_val)
    return EvalResult(value, 16 * EPS * (m + 1) * value, depth)


def chi_mgf(t: float, m: int) -> EvalResult:
    """MGF ``E[exp(t X)]`` of ``X ~ chi_m`` for ``t <= 0``.

    Small ``|t|`` uses the confluent hypergeometric form
    ``M(m/2, 1/2, t^2/2) + t sqrt(2) G M((m+1)/2, 3/2, t^2/2)`` with
    ``G = Gamma((m+1)/2) / Gamma(m/2)``. Larger ``|t|`` uses
    ``I_{m-1}(|t|)`` built from ``erfcx`` and a continued fraction for the
    ratios ``I_k / I_{k-1}``, which avoids the cancellation of the first form.
    """
    m = _check_dof(m)
    t = float(t)
    if not t <= 0.0:
        raise DomainError(f"chi_mgf is implemented for t <= 0, got {t!r}")
    if t == 0.0:
        return EvalResult(1.0, 0.0, 1)
    a = -t
    if a > min(CHI_SWITCH, CHI_SWITCH_SCALE / math.sqrt(m)):
        return _chi_mgf_cf(a, m)
    z = 0.5 * a * a
    m1 = kummer_1f1(0.5 * m, 0.5, z)
    m2 = kummer_1f1(0.5 * (m + 1), 1.5, z)
    g = math.exp(math.lgamma(0.5 * (m + 1)) - math.lgamma(0.5 * m))
    c = a * math.sqrt(2.0) * g
    value = m1.value - c * m2.value
    err = m1.abs_error_estimate + c * m2.abs_error_estimate + 4 * EPS * (m1.value + c * m2.value)
    return EvalResult(value, err, m1.terms_or_nodes_used + m2.terms_or_nodes_used)


def chi_weighted_mgf(t: float, m: int, k: int) -> EvalResult:
    """``E[X^k exp(t X)]`` for ``X ~ chi_m`` and ``t <= 0``.

    Uses ``2^(k/2) Gamma((m+k)/2) / Gamma(m/2) * M_{chi_{m+k}}(t)``.
    """
    m = _check_dof(m)
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    k = int(k)
    base = chi_mgf(t, m + k)
    factor = math.exp(0.5 * k * math.log(2.0) + math.lgamma(0.5 * (m + k)) - math.lgamma(0.5 * m))
    return EvalResult(
        factor * base.value,
        factor * base.abs_error_estimate,
        base.terms_or_nodes_used,
    )
