"""Parameter sweeps over recurrence maps: bifurcation data and contour grids."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalFailure
from .kernels import KernelSpec, Kind
from .recurrence import RecurrenceMap, _scalar_fn, classify

__all__ = [
    "AxisSpec",
    "Cell",
    "ScanResult",
    "KernelFamily",
    "LogisticFamily",
    "bifurcation_scan",
    "contour_scan",
    "se_dim_threshold",
    "CYCLE_TOL",
]

#: recorded iterates closer than this are treated as the same cycle point
CYCLE_TOL = 1e-9
COLLAPSE_SPAN = 1e-10

KERNEL_FIELDS = ("sigma2", "ell2", "p", "alpha", "mu")
# ``inv_ell2`` sets ell2 = 1 / value; ``c`` is the input-connection constant
PARAMETERS = KERNEL_FIELDS + ("inv_ell2", "m", "c", "r")


@dataclass(frozen=True)
class AxisSpec:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ConfigurationError(
                f"unknown scan parameter {self.parameter!r}; choose from {', '.join(PARAMETERS)}"
            )
        vals = tuple(float(v) for v in np.atleast_1d(np.asarray(self.values, dtype=float)))
        if not vals:
            raise ConfigurationError("axis values must be nonempty")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigurationError("axis values must be finite")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigurationError("axis values must be strictly increasing")
        if self.parameter == "m":
            if any(v != int(v) or v < 1 for v in vals):
                raise ConfigurationError("m axis values must be positive integers")
            vals = tuple(int(v) for v in vals)
        elif self.parameter == "c":
            if vals[0] < 0:
                raise ConfigurationError("c axis values must be >= 0")
        elif self.parameter != "r" and vals[0] <= 0:
            raise ConfigurationError(f"{self.parameter} axis values must be > 0")
        object.__setattr__(self, "values", vals)

    @classmethod
    def linspace(cls, parameter: str, lo: float, hi: float, n: int) -> "AxisSpec":
        return cls(parameter, tuple(np.linspace(lo, hi, n)))


@dataclass(frozen=True)
class Cell:
    params: dict
    asymptotic_values: tuple
    classification: str | None = None
    error: str | None = None


@dataclass(frozen=True)
class ScanResult:
    axes: tuple
    cells: tuple
    n_iterations: int
    burn_in: int
    u0: float
    kind: str = "contour"

    def values_grid(self) -> np.ndarray:
        """Final values reshaped to the axis grid (first recorded value per cell)."""
        shape = tuple(len(a.values) for a in self.axes)
        flat = [c.asymptotic_values[0] if c.asymptotic_values else math.nan for c in self.cells]
        return np.array(flat, dtype=float).reshape(shape)

    def classification_grid(self) -> np.ndarray:
        shape = tuple(len(a.values) for a in self.axes)
        return np.array([c.classification for c in self.cells], dtype=object).reshape(shape)


@dataclass(frozen=True)
class KernelFamily:
    """Recurrence maps sharing a kernel template; scan parameters override it."""

    kernel: KernelSpec
    m: int = 1
    c: float = 0.0

    def build(self, params: dict) -> RecurrenceMap:
        changes = {k: v for k, v in params.items() if k in KERNEL_FIELDS}
        if "inv_ell2" in params:
            changes["ell2"] = 1.0 / params["inv_ell2"]
        if "r" in params:
            raise ConfigurationError("parameter r only applies to the logistic map")
        kernel = self.kernel.replace(**changes) if changes else self.kernel
        return RecurrenceMap(kernel, int(params.get("m", self.m)), float(params.get("c", self.c)))

    def scalar(self, params: dict):
        return _scalar_fn(self.build(params))

    def classify(self, params: dict) -> str:
        return classify(self.build(params)).value

    def describe(self) -> dict:
        return {"family": "kernel", "kind": self.kernel.kind.value, **self.kernel.params(),
                "m": self.m, "c": self.c}


def _logistic(r: float):
    return lambda u: r * u * (1.0 - u)


@dataclass(frozen=True)
class LogisticFamily:
    """The logistic map ``u -> r u (1 - u)``, a kernel-free test system."""

    r: float = 3.2

    def scalar(self, params: dict):
        unknown = set(params) - {"r"}
        if unknown:
            raise ConfigurationError(f"logistic map has no parameter(s) {sorted(unknown)}")
        return _logistic(float(params.get("r", self.r)))

    def classify(self, params: dict) -> None:
        return None

    def describe(self) -> dict:
        return {"family": "logistic", "r": self.r}


def _collapse(values: list[float]) -> tuple:
    arr = np.asarray(values, dtype=float)
    if float(arr.max() - arr.min()) < COLLAPSE_SPAN:
        return (float(arr[-1]),)
    distinct = []
    for v in sorted(values):
        if not distinct or abs(v - distinct[-1]) > CYCLE_TOL * max(1.0, abs(v)):
            distinct.append(v)
    # a periodic orbit: keep one representative per cycle point
    if len(distinct) < len(values):
        return tuple(distinct)
    return tuple(values)


def _bifurcation_cell(args) -> Cell:
    family, params, u0, burn_in, record = args
    try:
        f = family.scalar(params)
        u = float(u0)
        for _ in range(burn_in):
            u = f(u)
        rec = []
        for _ in range(record):
            u = f(u)
            rec.append(u)
        if not all(math.isfinite(v) for v in rec):
            raise NumericalFailure("non-finite iterate")
        return Cell(params, _collapse(rec), None)
    except (ArithmeticError, ValueError) as exc:
        return Cell(params, (), None, f"{type(exc).__name__}: {exc}")


def _contour_cell(args) -> Cell:
    family, params, u0, n, do_classify = args
    try:
        f = family.scalar(params)
        u = float(u0)
        for _ in range(n):
            u = f(u)
        if not math.isfinite(u):
            raise NumericalFailure("non-finite iterate")
        cls = family.classify(params) if do_classify else None
        return Cell(params, (u,), cls)
    except (ArithmeticError, ValueError) as exc:
        return Cell(params, (), None, f"{type(exc).__name__}: {exc}")


def _run_cells(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) < 2:
        return tuple(fn(j) for j in jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return tuple(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def bifurcation_scan(family, axis: AxisSpec, u0: float = 1.0, burn_in: int = 300,
                     record: int = 50, workers: int = 1) -> ScanResult:
    """Iterate ``burn_in`` times per axis value, then record ``record`` iterates.

    Recorded values spanning less than ``1e-10`` collapse to a single value;
    otherwise repeated cycle points (within ``CYCLE_TOL``) are merged.
    """
    if burn_in < 0 or record < 1 or burn_in + record > 10**6:
        raise ConfigurationError("need burn_in >= 0, record >= 1 and burn_in + record <= 1e6")
    jobs = [(family, {axis.parameter: v}, u0, burn_in, record) for v in axis.values]
    cells = _run_cells(_bifurcation_cell, jobs, workers)
    return ScanResult((axis,), cells, burn_in + record, burn_in, float(u0), "bifurcation")


def contour_scan(family, axis1: AxisSpec, axis2: AxisSpec, u0: float = 1.0, n: int = 300,
                 classify_cells: bool = True, workers: int = 1) -> ScanResult:
    """``u_n`` after exactly ``n`` iterations from ``u0`` on a two-parameter grid.

    Cells are ordered row-major with ``axis1`` varying slowest.
    """
    if axis1.parameter == axis2.parameter:
        raise ConfigurationError("contour axes must be different parameters")
    if len(axis1.values) * len(axis2.values) > 10**6:
        raise ConfigurationError("grid exceeds 1e6 cells")
    if n < 0:
        raise ConfigurationError("n must be >= 0")
    if not (math.isfinite(u0) and u0 >= 0):
        raise DomainError("u0 must be finite and >= 0")
    jobs = [
        (family, {axis1.parameter: a, axis2.parameter: b}, u0, n, classify_cells)
        for a, b in itertools.product(axis1.values, axis2.values)
    ]
    cells = _run_cells(_contour_cell, jobs, workers)
    return ScanResult((axis1, axis2), cells, n, 0, float(u0), "contour")


def se_dim_threshold(axis_m: AxisSpec, axis_ratio: AxisSpec, n: int = 300, u0: float = 1.0,
                     workers: int = 1) -> ScanResult:
    """SE contour over width ``m`` and ``ell2 / sigma2`` (``sigma2 = 1``).

    The classification boundary sits at ``m sigma2 / ell2 = 1``.
    """
    if axis_m.parameter != "m":
        raise ConfigurationError("first axis must be m")
    ratio_axis = AxisSpec("ell2", axis_ratio.values)
    family = KernelFamily(KernelSpec(Kind.SE, sigma2=1.0, ell2=1.0))
    return contour_scan(family, axis_m, ratio_axis, u0=u0, n=n, workers=workers)
