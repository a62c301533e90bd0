"""Layer-to-layer recurrence maps ``u_n = h(u_{n-1})`` for the expected squared
distance between two outputs of a deep GP layer.

Conditioned on the previous layer, the per-unit output difference is
``N(0, s)`` with ``s = 2 k(0) - 2 k(r)``; the distance ``Z`` over ``m`` units
is ``s * chi^2_m``. Each map evaluates ``E[2 m k(0) - 2 m k(sqrt(s) X)]`` for
``X ~ chi_m`` and ``s = u / m`` through a closed form (or, for RQ, a
one-dimensional integral), then adds the input-connection constant ``c``.

==========  ===============================================================
kernel      h(u) - c
==========  ===============================================================
SE          2 m s2 (1 - (1 + u / (m l2))^(-m/2))
COS         2 s2 (1 - exp(-pi^2 u / (2 p^2)))                      (m = 1)
PER         2 m s2 / l2 (1 - 1F1(m/2, 1/2, -2 pi^2 u / (m p^2)))
RQ          2 m s2 (1 - E[(1 + (u/m) Y / (2 alpha l2))^(-alpha)]), Y ~ chi^2_m
SM          2 m (1 - (1 + 4 pi^2 s2 u/m)^(-m/2)
                 * exp(-2 pi^2 mu^2 u / (1 + 4 pi^2 s2 u/m)))
MATERN32    2 m s2 (1 - M_chi_m(-a) - a E[X exp(-a X)]),  a = sqrt(3 u / m) / l
==========  ===============================================================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DomainError, NumericalFailure
from .kernels import KernelSpec, Kind, kernel_deficit, kernel_of_diff
from .specfun import chi_mgf, chi_weighted_mgf, hyp1f1_array, kummer_1f1

__all__ = [
    "BoundKind",
    "Pathology",
    "RecurrenceMap",
    "Trajectory",
    "FixedPoint",
    "FixedPointReport",
    "step",
    "derivative",
    "trajectory",
    "initial_u_from_inputs",
    "input_connect_constant",
    "fixed_points",
    "classify",
    "convergence_rate",
    "iterate_n",
]

FD_REL_STEP = 1e-6
MARGINAL_TOL = 1e-6
ROOT_XTOL = 1e-12
SCAN_CELLS = 1000


class BoundKind(str, enum.Enum):
    UPPER = "UPPER"
    LOWER = "LOWER"


class Pathology(str, enum.Enum):
    PATHOLOGICAL = "PATHOLOGICAL"
    NON_PATHOLOGICAL = "NON_PATHOLOGICAL"
    MARGINAL = "MARGINAL"


_BOUND = {
    Kind.SE: BoundKind.UPPER,
    Kind.COS: BoundKind.UPPER,
    Kind.RQ: BoundKind.UPPER,
    Kind.SM: BoundKind.UPPER,
    Kind.MATERN32: BoundKind.UPPER,
    Kind.PER: BoundKind.LOWER,
}


@dataclass(frozen=True)
class RecurrenceMap:
    """A kernel-derived map with layer width ``m`` and input-connection ``c``."""

    kernel: KernelSpec
    m: int = 1
    input_connect_c: float = 0.0
    bound_kind: BoundKind | None = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigurationError(f"layer width m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        c = float(self.input_connect_c)
        if not (math.isfinite(c) and c >= 0.0):
            raise ConfigurationError(f"input_connect_c must be >= 0, got {self.input_connect_c!r}")
        object.__setattr__(self, "input_connect_c", c)
        if self.kernel.kind is Kind.COS and self.m != 1:
            raise ConfigurationError(
                "the cosine-kernel recurrence is restricted to m = 1 "
                "(convexity of 1F1(m/2, 1/2, .) only holds for m = 1)"
            )
        expected = _BOUND[self.kernel.kind]
        if self.bound_kind is None:
            object.__setattr__(self, "bound_kind", expected)
        elif BoundKind(self.bound_kind) is not expected:
            raise ConfigurationError(
                f"{self.kernel.kind.value} maps bound E[Z_n] from {expected.value.lower()}"
            )

    @property
    def heuristic(self) -> bool:
        """True when the Jensen step lacks a convexity argument (MATERN32)."""
        return self.kernel.kind is Kind.MATERN32

    @property
    def saturation_cap(self) -> float:
        """Supremum of ``h(u) - c`` over ``u >= 0``."""
        k = self.kernel
        if k.kind is Kind.SM:
            return 2.0 * self.m
        if k.kind is Kind.COS:
            return 2.0 * k.sigma2
        if k.kind is Kind.PER:
            # E[cos] >= 0 for chi_1 but can dip below 0 for m >= 2
            return 2.0 * self.m * k.sigma2 / k.ell2 * (1.0 if self.m == 1 else 2.0)
        return 2.0 * self.m * k.sigma2

    def with_c(self, c: float) -> "RecurrenceMap":
        return RecurrenceMap(self.kernel, self.m, c)

    def __call__(self, u):
        return step(self, u)


# --------------------------------------------------------------------------
# map evaluation


def _rq_expect_deficit(c: float, alpha: float, m: int) -> float:
    # E[1 - (1 + c Y)^(-alpha)], Y ~ chi^2_m
    if c == 0.0:
        return 0.0
    half = 0.5 * m
    norm = 1.0 / (2.0**half * math.gamma(half))

    def g(y):
        return -math.expm1(-alpha * math.log1p(c * y)) * math.exp(-0.5 * y) * norm

    split = max(1.0, float(m))
    head, _ = integrate.quad(g, 0.0, split, weight="alg", wvar=(half - 1.0, 0.0),
                             epsabs=1e-15, epsrel=1e-12, limit=200)
    tail, _ = integrate.quad(lambda y: g(y) * y ** (half - 1.0), split, np.inf,
                             epsabs=1e-15, epsrel=1e-12, limit=200)
    return head + tail


def _matern_deficit(a: float, m: int) -> float:
    # E[1 - (1 + a X) exp(-a X)], X ~ chi_m
    if a == 0.0:
        return 0.0
    if a < 0.05:
        # alternating moment series; the closed form cancels for small a
        log_norm = math.lgamma(0.5 * m)
        acc = 0.0
        for k in range(2, 40):
            log_mom = 0.5 * k * math.log(2.0) + math.lgamma(0.5 * (m + k)) - log_norm
            term = (k - 1) * math.exp(k * math.log(a) + log_mom - math.lgamma(k + 1.0))
            acc += term if k % 2 == 0 else -term
            if term < 1e-17 * abs(acc):
                break
        return acc
    return 1.0 - chi_mgf(-a, m).value - a * chi_weighted_mgf(-a, m, 1).value


def _h(rmap: RecurrenceMap, u: np.ndarray) -> np.ndarray:
    """``h(u) - c`` for an array ``u >= 0``."""
    k = rmap.kernel
    m = rmap.m
    s2 = k.sigma2
    if k.kind is Kind.SE:
        return -2.0 * m * s2 * np.expm1(-0.5 * m * np.log1p(u / (m * k.ell2)))
    if k.kind is Kind.COS:
        return -2.0 * s2 * np.expm1(-(np.pi**2) * u / (2.0 * k.p**2))
    if k.kind is Kind.PER:
        z = -2.0 * np.pi**2 * u / (m * k.p**2)
        return 2.0 * m * s2 / k.ell2 * (1.0 - hyp1f1_array(0.5 * m, 0.5, z))
    if k.kind is Kind.SM:
        b = 4.0 * np.pi**2 * s2 * u / m
        expo = -0.5 * m * np.log1p(b) - 2.0 * np.pi**2 * k.mu**2 * u / (1.0 + b)
        return -2.0 * m * np.expm1(expo)
    if k.kind is Kind.RQ:
        scale = 1.0 / (2.0 * k.alpha * k.ell2 * m)
        out = [_rq_expect_deficit(float(x) * scale, k.alpha, m) for x in u.ravel()]
        return 2.0 * m * s2 * np.asarray(out).reshape(u.shape)
    if k.kind is Kind.MATERN32:
        root = math.sqrt(3.0 / (m * k.ell2))
        out = [_matern_deficit(root * math.sqrt(float(x)), m) for x in u.ravel()]
        return 2.0 * m * s2 * np.asarray(out).reshape(u.shape)
    raise ConfigurationError(f"unhandled kernel kind {k.kind}")


def step(rmap: RecurrenceMap, u):
    """One application of the map: ``u_n`` from ``u_{n-1}`` (scalar or array)."""
    arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError("u must be finite and >= 0")
    out = np.maximum(_h(rmap, arr), 0.0) + rmap.input_connect_c
    if np.any(~np.isfinite(out)):
        raise NumericalFailure("recurrence map produced a non-finite value")
    return float(out) if out.ndim == 0 else out


def _scalar_fn(rmap: RecurrenceMap):
    """Fast scalar ``u -> step(rmap, u)`` without per-call validation."""
    k = rmap.kernel
    m = rmap.m
    c = rmap.input_connect_c
    if k.kind is Kind.SE:
        a = -2.0 * m * k.sigma2
        inv = 1.0 / (m * k.ell2)
        half = -0.5 * m
        return lambda u: max(a * math.expm1(half * math.log1p(u * inv)), 0.0) + c
    if k.kind is Kind.COS:
        a = -2.0 * k.sigma2
        rate = -(math.pi**2) / (2.0 * k.p**2)
        return lambda u: max(a * math.expm1(rate * u), 0.0) + c
    if k.kind is Kind.SM:
        bfac = 4.0 * math.pi**2 * k.sigma2 / m
        mfac = 2.0 * math.pi**2 * k.mu**2
        half = 0.5 * m

        def sm(u):
            b = bfac * u
            return max(-2.0 * m * math.expm1(-half * math.log1p(b) - mfac * u / (1.0 + b)), 0.0) + c

        return sm
    if k.kind is Kind.PER:
        pref = 2.0 * m * k.sigma2 / k.ell2
        zfac = -2.0 * math.pi**2 / (m * k.p**2)
        return lambda u: max(pref * (1.0 - kummer_1f1(0.5 * m, 0.5, zfac * u).value), 0.0) + c
    return lambda u: float(np.maximum(_h(rmap, np.asarray(float(u))), 0.0)) + c


def derivative(rmap: RecurrenceMap, u: float) -> float:
    """Finite-difference ``h'(u)``: central with step ``1e-6 max(1, u)``, or
    second-order one-sided when the central stencil would leave ``u >= 0``."""
    f = _scalar_fn(rmap)
    d = FD_REL_STEP * max(1.0, u)
    if u - d >= 0.0:
        return (f(u + d) - f(u - d)) / (2.0 * d)
    return (-3.0 * f(u) + 4.0 * f(u + d) - f(u + 2.0 * d)) / (2.0 * d)


# --------------------------------------------------------------------------
# iteration


@dataclass(frozen=True)
class Trajectory:
    values: np.ndarray
    converged: bool
    limit_estimate: float
    iterations_to_tolerance: int | None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0):
            raise NumericalFailure("trajectory values must be finite and >= 0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def trajectory(rmap: RecurrenceMap, u0: float, n_max: int = 300, tol: float = 1e-12) -> Trajectory:
    """Iterate the map from ``u0`` for at most ``n_max`` steps.

    Stops at the first ``k`` with ``|u_{k+1} - u_k| <= tol * max(1, u_k)``.
    """
    if n_max < 1:
        raise ConfigurationError("n_max must be >= 1")
    if not tol > 0:
        raise ConfigurationError("tol must be > 0")
    if not (math.isfinite(u0) and u0 >= 0):
        raise DomainError("u0 must be finite and >= 0")
    f = _scalar_fn(rmap)
    values = [float(u0)]
    u = float(u0)
    hit = None
    for k in range(n_max):
        nxt = f(u)
        if not math.isfinite(nxt):
            raise NumericalFailure(f"non-finite iterate at step {k + 1}", work=k + 1)
        values.append(nxt)
        if abs(nxt - u) <= tol * max(1.0, u):
            hit = k + 1
            u = nxt
            break
        u = nxt
    return Trajectory(np.array(values), hit is not None, u, hit)


def iterate_n(rmap: RecurrenceMap, u0: float, n: int) -> float:
    """``h^n(u0)`` with no early stopping."""
    f = _scalar_fn(rmap)
    u = float(u0)
    for _ in range(n):
        u = f(u)
    return u


def initial_u_from_inputs(rmap: RecurrenceMap, x, x_prime) -> float:
    """``E[Z_1] = 2 m (k(0) - k(x, x'))`` for a raw input pair."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != xp.shape:
        raise DomainError("x and x_prime must have the same dimension")
    diff = x - xp
    if rmap.kernel.kind is Kind.SM:
        return float(2 * rmap.m * (1.0 - kernel_of_diff(rmap.kernel, diff)))
    return float(2 * rmap.m * kernel_deficit(rmap.kernel, float(np.linalg.norm(diff))))


def input_connect_constant(kernel: KernelSpec, m: int, inputs) -> float:
    """``c = 2 m (k(0) - mean_{i<j} k(x_i, x_j))`` over all input pairs."""
    pts = np.asarray(inputs, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n < 2:
        raise DomainError("need at least two inputs")
    iu = np.triu_indices(n, 1)
    diff = pts[iu[0]] - pts[iu[1]]
    kv = kernel_of_diff(kernel, diff)
    return float(2 * m * (kernel.k0 - np.mean(kv)))


# --------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPoint:
    location: float
    derivative: float
    stable: bool


@dataclass(frozen=True)
class FixedPointReport:
    fixed_points: tuple[FixedPoint, ...]
    pathological: Pathology
    lipschitz_on_interval: float
    interval: tuple[float, float]
    heuristic: bool = False
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "fixed_points": [
                {"location": p.location, "derivative": p.derivative, "stable": p.stable}
                for p in self.fixed_points
            ],
            "pathological": self.pathological.value,
            "lipschitz_on_interval": self.lipschitz_on_interval,
            "interval": list(self.interval),
            "heuristic": self.heuristic,
            "notes": list(self.notes),
        }


def _bisect(g, lo: float, hi: float, glo: float) -> float:
    while hi - lo > ROOT_XTOL:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _root_scan(rmap: RecurrenceMap, u_max: float, n_cells: int, refine: bool):
    """Roots of ``h(u) - u`` on ``[0, u_max]`` plus the grid data used to find them."""
    c = rmap.input_connect_c
    grid = np.linspace(0.0, u_max, n_cells + 1)
    hv = step(rmap, grid)
    gv = hv - grid
    f = _scalar_fn(rmap)

    def g(u):
        return f(u) - u

    roots = []
    if c == 0.0:
        roots.append(0.0)
        if gv[1] < 0.0 and derivative(rmap, 0.0) > 1.0 + MARGINAL_TOL:
            # unstable origin but g(grid[1]) < 0: a root hides inside the first cell
            lo = float(grid[1])
            for _ in range(80):
                lo *= 0.5
                if g(lo) > 0.0:
                    roots.append(_bisect(g, lo, 2.0 * lo, g(lo)) if refine else lo)
                    break
    for i in range(1, n_cells + 1):
        if gv[i] == 0.0:
            roots.append(float(grid[i]))
        elif gv[i - 1] != 0.0 and (gv[i - 1] > 0) != (gv[i] > 0):
            lo, hi = float(grid[i - 1]), float(grid[i])
            roots.append(_bisect(g, lo, hi, float(gv[i - 1])) if refine else 0.5 * (lo + hi))
    return roots, grid, hv


def _classify(rmap: RecurrenceMap, n_roots: int, d0: float) -> Pathology:
    if rmap.input_connect_c != 0.0:
        return Pathology.NON_PATHOLOGICAL
    if abs(d0 - 1.0) <= MARGINAL_TOL:
        return Pathology.MARGINAL
    if n_roots == 1 and abs(d0) < 1.0:
        return Pathology.PATHOLOGICAL
    return Pathology.NON_PATHOLOGICAL


def _default_u_max(rmap: RecurrenceMap) -> float:
    return 4.0 * rmap.saturation_cap + rmap.input_connect_c


def classify(rmap: RecurrenceMap, u_max: float | None = None,
             n_cells: int = SCAN_CELLS) -> Pathology:
    """Pathology class of :func:`fixed_points` without refining the roots."""
    if u_max is None:
        u_max = _default_u_max(rmap)
    roots, _, _ = _root_scan(rmap, u_max, n_cells, refine=False)
    d0 = derivative(rmap, 0.0) if rmap.input_connect_c == 0.0 else math.nan
    return _classify(rmap, len(roots), d0)


def fixed_points(rmap: RecurrenceMap, u_max: float | None = None,
                 n_cells: int = SCAN_CELLS) -> FixedPointReport:
    """Locate every root of ``h(u) - u`` on ``[0, u_max]`` and classify the map.

    Roots are bracketed by a sign-change scan over ``n_cells`` cells and
    refined by bisection; stability is ``|h'| < 1``. The map is PATHOLOGICAL
    when 0 is its only fixed point and is stable, MARGINAL when
    ``|h'(0) - 1| <= 1e-6``. The Lipschitz estimate is the largest of the
    grid secant slopes and the derivatives at the roots.
    """
    if u_max is None:
        u_max = _default_u_max(rmap)
    if not u_max > 0:
        raise DomainError("u_max must be > 0")
    roots, grid, hv = _root_scan(rmap, u_max, n_cells, refine=True)
    roots.sort()
    points = []
    for r in roots:
        d = derivative(rmap, r)
        points.append(FixedPoint(r, d, abs(d) < 1.0))

    slopes = np.diff(hv) / np.diff(grid)
    lip = max([float(np.max(slopes))] + [p.derivative for p in points])
    d0 = points[0].derivative if rmap.input_connect_c == 0.0 else math.nan
    cls = _classify(rmap, len(points), d0)

    notes = []
    if rmap.heuristic:
        notes.append("heuristic estimate: no convexity argument for the Jensen step")
    if rmap.bound_kind is BoundKind.LOWER:
        notes.append("map is labelled a lower bound on E[Z_n]")
    return FixedPointReport(tuple(points), cls, lip, (0.0, float(u_max)),
                            rmap.heuristic, tuple(notes))


def convergence_rate(rmap: RecurrenceMap, u0: float, tol: float = 1e-9,
                     n_max: int = 10**6) -> float:
    """``|h'(u*)|`` at the fixed point reached from ``u0``.

    Smaller values mean faster geometric convergence.
    """
    if not u0 > 0:
        raise DomainError("u0 must be > 0")
    traj = trajectory(rmap, u0, n_max=n_max, tol=tol)
    if not traj.converged:
        raise NumericalFailure(
            f"trajectory from u0={u0} did not converge within {n_max} iterations", work=n_max
        )
    return abs(derivative(rmap, traj.limit_estimate))
