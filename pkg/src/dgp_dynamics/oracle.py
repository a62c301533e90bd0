"""Brute-force ground truth for one recurrence step.

Given ``u``, the per-unit conditional variance is ``s = u / m`` and the
previous-layer distance is ``sqrt(s) X`` with ``X ~ chi_m``. The exact
fixed-``s`` expectation ``2 m k(0) - 2 m E[k(sqrt(s) X)]`` is integrated
numerically against the chi density, independently of the closed forms used
by :mod:`dgp_dynamics.recurrence`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kernels import Kind, _deficit, kernel_of_diff
from .quadrature import QuadratureConfig, integrate
from .recurrence import RecurrenceMap
from .specfun import EvalResult

__all__ = [
    "QuadratureConfig",
    "expected_step",
    "mc_expected_step",
    "MCResult",
    "chi_pdf",
    "chi_moment",
]


def chi_pdf(x, m: int):
    """Density of the chi distribution with ``m`` degrees of freedom."""
    x = np.asarray(x, dtype=float)
    log_norm = (1.0 - 0.5 * m) * math.log(2.0) - math.lgamma(0.5 * m)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    out = np.exp(log_norm + (m - 1) * logx - 0.5 * x * x)
    if m == 1:
        out = np.where(x == 0.0, math.exp(log_norm), out)
    return out


def chi_moment(t: float, m: int, k: int = 0,
               cfg: QuadratureConfig = QuadratureConfig()) -> EvalResult:
    """``E[X^k exp(t X)]`` for ``X ~ chi_m`` and ``t <= 0`` by direct quadrature."""
    if t > 0:
        raise DomainError("chi_moment needs t <= 0")
    mode = math.sqrt(max(m - 1.0, 1.0))
    val, err, evals = integrate(lambda x: x**k * np.exp(t * x) * chi_pdf(x, m),
                                [0.0, mode, max(40.0, mode + 40.0)], cfg)
    return EvalResult(val, err, evals)


def expected_step(rmap: RecurrenceMap, u: float,
                  cfg: QuadratureConfig = QuadratureConfig()) -> EvalResult:
    """Exact one-step expectation of ``Z_n`` given ``E[Z_{n-1}] = u`` at fixed ``s``.

    The chi density is split at its mode and truncated at
    ``max(40, mode + 40)``, beyond which it is far below double precision.
    The input-connection constant ``c`` is added to the result.
    """
    if not (math.isfinite(u) and u >= 0):
        raise DomainError("u must be finite and >= 0")
    c = rmap.input_connect_c
    if u == 0.0:
        return EvalResult(c, 0.0, 0)
    m = rmap.m
    root_s = math.sqrt(u / m)
    kernel = rmap.kernel

    if kernel.kind is Kind.SM and m > 1:
        # product kernel: the m coordinates of the difference are independent
        # N(0, s) each, so E[k] = (E_1[k_1])^m with a chi_1 average per axis
        dof = 1
    else:
        dof = m
    mode = math.sqrt(dof - 1.0)
    cutoff = max(40.0, mode + 40.0)
    pts = [0.0, mode, cutoff] if mode > 0 else [0.0, 1.0, cutoff]

    def integrand(x):
        return _deficit(kernel, root_s * x) * chi_pdf(x, dof)

    val, err, evals = integrate(integrand, pts, cfg)
    if kernel.kind is Kind.SM and m > 1:
        # 1 - (1 - D1)^m, evaluated stably
        val_m = -math.expm1(m * math.log1p(-val))
        err_m = m * (1.0 - val) ** (m - 1) * err
        return EvalResult(2.0 * m * val_m + c, 2.0 * m * err_m, evals)
    return EvalResult(2.0 * m * val + c, 2.0 * m * err, evals)


@dataclass(frozen=True)
class MCResult:
    mean: float
    std_error: float


def mc_expected_step(rmap: RecurrenceMap, u: float, n_samples: int = 100_000,
                     seed: int = 0) -> MCResult:
    """Monte-Carlo estimate of :func:`expected_step`.

    Draws ``m``-dimensional ``N(0, s I)`` differences so that the norm is
    ``sqrt(s) chi_m``; product kernels see the individual coordinates.
    Deterministic for a fixed seed.
    """
    if n_samples < 100:
        raise DomainError("n_samples must be >= 100")
    if not (math.isfinite(u) and u >= 0):
        raise DomainError("u must be finite and >= 0")
    c = rmap.input_connect_c
    if u == 0.0:
        return MCResult(c, 0.0)
    m = rmap.m
    rng = np.random.Generator(np.random.PCG64(seed))
    diff = rng.standard_normal((n_samples, m)) * math.sqrt(u / m)
    vals = 2.0 * m * (rmap.kernel.k0 - kernel_of_diff(rmap.kernel, diff))
    mean = float(np.mean(vals)) + c
    se = float(np.std(vals, ddof=1) / math.sqrt(n_samples))
    return MCResult(mean, se)
