"""Stationary kernels as functions of the distance between two points.

Six kinds are supported::

    SE        sigma2 * exp(-r^2 / (2 ell2))
    COS       sigma2 * cos(pi r / p)
    PER       sigma2 * exp(-2 sin^2(pi r / p) / ell2)
    RQ        sigma2 * (1 + r^2 / (2 alpha ell2))^(-alpha)
    SM        exp(-2 pi^2 sigma2 r^2) * cos(2 pi mu r)          (one mixture)
    MATERN32  sigma2 * (1 + sqrt(3) r / ell) * exp(-sqrt(3) r / ell)

SM has no outer variance; its ``sigma2`` is the spectral bandwidth. For
multi-dimensional inputs SM is the usual product over coordinates, every
coordinate sharing ``sigma2`` and ``mu``; all other kinds are isotropic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "Kind",
    "KernelSpec",
    "kernel_eval",
    "kernel_deficit",
    "kernel_of_diff",
    "gram_matrix",
]


class Kind(str, enum.Enum):
    SE = "SE"
    COS = "COS"
    PER = "PER"
    RQ = "RQ"
    SM = "SM"
    MATERN32 = "MATERN32"

    @classmethod
    def parse(cls, name) -> "Kind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "").replace("_", "")
        aliases = {"MATERN": "MATERN32", "MATERN32": "MATERN32", "PERIODIC": "PER",
                   "COSINE": "COS", "RBF": "SE"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown kernel kind {name!r}") from None


_USES = {
    Kind.SE: ("sigma2", "ell2"),
    Kind.COS: ("sigma2", "p"),
    Kind.PER: ("sigma2", "ell2", "p"),
    Kind.RQ: ("sigma2", "ell2", "alpha"),
    Kind.SM: ("sigma2", "mu"),
    Kind.MATERN32: ("sigma2", "ell2"),
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus hyperparameters; fields a kind does not use are ignored."""

    kind: Kind
    sigma2: float = 1.0
    ell2: float = 1.0
    p: float = 1.0
    alpha: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        for name in _USES[self.kind]:
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                value = math.nan
            object.__setattr__(self, name, value)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(
                    f"{self.kind.value} kernel needs {name} > 0, got {value!r}"
                )

    @property
    def used_fields(self) -> tuple[str, ...]:
        return _USES[self.kind]

    @property
    def k0(self) -> float:
        """Kernel value at zero distance."""
        return 1.0 if self.kind is Kind.SM else float(self.sigma2)

    def params(self) -> dict:
        return {name: float(getattr(self, name)) for name in self.used_fields}

    def replace(self, **changes) -> "KernelSpec":
        return replace(self, **changes)


def kernel_eval(spec: KernelSpec, r):
    """Kernel value at distance ``r >= 0`` (scalar or array)."""
    r = _check_r(r)
    return _finish(spec.k0 - _deficit(spec, r))


def kernel_deficit(spec: KernelSpec, r):
    """``k(0) - k(r)``, evaluated without cancellation for small ``r``."""
    r = _check_r(r)
    return _finish(_deficit(spec, r))


def _check_r(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise DomainError("distance must be finite and >= 0")
    return arr


def _finish(x):
    return float(x) if np.ndim(x) == 0 else x


def _matern_tail(y):
    # 1 - (1 + y) e^{-y}; short series near 0 where the closed form cancels.
    y = np.asarray(y, dtype=float)
    small = y < 0.1
    out = np.empty_like(y)
    ys = y[small]
    acc = np.zeros_like(ys)
    term = np.ones_like(ys)
    for k in range(1, 13):
        term = term * ys / k
        if k >= 2:
            acc += (-1) ** k * (k - 1) * term
    out[small] = acc
    yl = y[~small]
    out[~small] = -np.expm1(-yl) - yl * np.exp(-yl)
    return out


def _deficit(spec: KernelSpec, r):
    s2 = spec.sigma2
    kind = spec.kind
    if kind is Kind.SE:
        return -s2 * np.expm1(-(r * r) / (2.0 * spec.ell2))
    if kind is Kind.COS:
        return 2.0 * s2 * np.sin(0.5 * np.pi * r / spec.p) ** 2
    if kind is Kind.PER:
        return -s2 * np.expm1(-2.0 * np.sin(np.pi * r / spec.p) ** 2 / spec.ell2)
    if kind is Kind.RQ:
        a = spec.alpha
        return -s2 * np.expm1(-a * np.log1p(r * r / (2.0 * a * spec.ell2)))
    if kind is Kind.SM:
        decay = 2.0 * np.pi**2 * s2 * r * r
        return -np.expm1(-decay) + np.exp(-decay) * 2.0 * np.sin(np.pi * spec.mu * r) ** 2
    if kind is Kind.MATERN32:
        return s2 * _matern_tail(math.sqrt(3.0) * r / math.sqrt(spec.ell2))
    raise ConfigurationError(f"unhandled kernel kind {kind}")


def kernel_of_diff(spec: KernelSpec, diff):
    """Kernel value for difference vectors ``diff`` of shape ``(..., d)``."""
    diff = np.asarray(diff, dtype=float)
    if diff.ndim == 0:
        diff = diff[None]
    if spec.kind is Kind.SM:
        per = spec.k0 - _deficit(spec, np.abs(diff))
        return np.prod(per, axis=-1)
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    return spec.k0 - _deficit(spec, r)


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Covariance matrix ``M[i, j] = k(points[i], points[j])``.

    ``points`` is a sequence of equal-length vectors (or scalars for 1-d).
    """
    try:
        pts = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise DomainError(f"points must all have the same dimension: {exc}") from None
    if pts.size == 0:
        raise DomainError("points must be nonempty")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DomainError("points must be a list of vectors")
    diff = pts[:, None, :] - pts[None, :, :]
    mat = kernel_of_diff(spec, diff)
    mat = np.triu(mat) + np.triu(mat, 1).T
    np.fill_diagonal(mat, spec.k0)
    return mat
