"""Monte-Carlo sampling of deep GP priors.

Each layer draws ``m`` independent GP columns over the current point set,
whose covariance is the kernel Gram matrix of the previous layer's outputs
(the raw inputs at layer 1). Replication ``r`` uses its own PCG64 stream
seeded by ``SeedSequence([seed, r])``, so results do not depend on the
number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalFailure
from .kernels import KernelSpec, gram_matrix
from .recurrence import RecurrenceMap, initial_u_from_inputs, input_connect_constant, iterate_n

__all__ = [
    "MeanMode",
    "SimConfig",
    "LayerStats",
    "RNG_ALGORITHM",
    "psd_factor",
    "sample_dgp",
    "estimate_mean_z",
    "rmsd_trace",
    "pairwise_rmsd",
]

RNG_ALGORITHM = "numpy PCG64, SeedSequence([seed, replication])"
JITTER_START = 1e-8
JITTER_MAX = 1e-2


@dataclass(frozen=True)
class MeanMode:
    """Prior mean of every layer: ``ZERO`` or ``LINEAR`` with a slope."""

    kind: str = "ZERO"
    slope: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in ("ZERO", "LINEAR"):
            raise ConfigurationError(f"mean mode must be ZERO or LINEAR, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not math.isfinite(self.slope):
            raise ConfigurationError("slope must be finite")

    @classmethod
    def zero(cls) -> "MeanMode":
        return cls("ZERO", 0.0)

    @classmethod
    def linear(cls, slope: float = 1.0) -> "MeanMode":
        return cls("LINEAR", float(slope))


@dataclass(frozen=True)
class SimConfig:
    kernel: KernelSpec
    m: int
    depth: int
    inputs: np.ndarray
    replications: int = 1
    seed: int = 0
    mean_mode: MeanMode = field(default_factory=MeanMode.zero)
    input_connect: bool = False

    def __post_init__(self):
        pts = np.asarray(self.inputs, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) < 2:
            raise ConfigurationError("inputs must hold at least two points")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("inputs must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "inputs", pts)
        if int(self.m) != self.m or self.m < 1:
            raise ConfigurationError("m must be a positive integer")
        if int(self.depth) != self.depth or self.depth < 0:
            raise ConfigurationError("depth must be a nonnegative integer")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {
            "kernel": {"kind": self.kernel.kind.value, **self.kernel.params()},
            "m": self.m,
            "depth": self.depth,
            "inputs": self.inputs.tolist(),
            "replications": self.replications,
            "seed": self.seed,
            "mean_mode": {"kind": self.mean_mode.kind, "slope": self.mean_mode.slope},
            "input_connect": self.input_connect,
            "rng": RNG_ALGORITHM,
        }


@dataclass(frozen=True)
class LayerStats:
    layer: int
    empirical_mean_z: float
    std_error: float
    predicted_u: float
    n_samples: int
    degenerate: bool = False


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replication])))


def psd_factor(cov: np.ndarray, layer: int = 0) -> np.ndarray:
    """Return ``L`` with ``L @ L.T`` approximately ``cov``.

    Tries Cholesky with jitter ``1e-8 * mean(diag)``, escalating by factors of
    ten up to ``1e-2``, then falls back to an eigendecomposition with the
    negative eigenvalues clamped to zero.
    """
    n = len(cov)
    scale = float(np.mean(np.diag(cov)))
    if not scale > 0:
        scale = 1.0
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(n))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    try:
        w, v = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"PSD repair failed at layer {layer}: {exc}") from None
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    if not np.all(np.isfinite(factor)):
        raise NumericalFailure(f"PSD repair failed at layer {layer}")
    return factor


def _draw_layer(cfg: SimConfig, rep: np.ndarray, prev: np.ndarray, rng, layer: int) -> np.ndarray:
    # identical points get identical outputs, regardless of jitter
    uniq, inverse = np.unique(rep, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    factor = psd_factor(gram_matrix(cfg.kernel, uniq), layer)
    draws = factor @ rng.standard_normal((len(uniq), cfg.m))
    out = draws[inverse]
    if cfg.mean_mode.kind == "LINEAR":
        if prev.shape[1] == cfg.m:
            out = out + cfg.mean_mode.slope * prev
        else:
            out = out + cfg.mean_mode.slope * prev.mean(axis=1, keepdims=True)
    return out


def sample_dgp(cfg: SimConfig, replication_seed: int) -> list[np.ndarray]:
    """One prior draw: the ``(n_points, m)`` outputs of layers ``1..depth``."""
    rng = replication_rng(cfg.seed, replication_seed)
    x = cfg.inputs
    prev = x
    layers = []
    for n in range(1, cfg.depth + 1):
        rep = prev if (n == 1 or not cfg.input_connect) else np.hstack([prev, x])
        prev = _draw_layer(cfg, rep, prev, rng, n)
        layers.append(prev)
    return layers


def _pair_z(args):
    cfg, rep, i, j = args
    return [float(np.sum((f[i] - f[j]) ** 2)) for f in sample_dgp(cfg, rep)]


def _rmsd_row(args):
    cfg, rep = args
    return [pairwise_rmsd(cfg.inputs)] + [pairwise_rmsd(f) for f in sample_dgp(cfg, rep)]


def _run(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) < 2:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def pairwise_rmsd(points) -> float:
    """``sqrt(sum_{i != j} |p_i - p_j|^2 / (N (N - 1)))`` via centred sums."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n < 2:
        raise DomainError("RMSD needs at least two points")
    centred = pts - pts.mean(axis=0)
    return math.sqrt(2.0 * n * float(np.sum(centred * centred)) / (n * (n - 1)))


def predicted_trajectory(cfg: SimConfig, i: int, j: int) -> list[float]:
    """Recurrence prediction of ``E[Z_n]`` for layers ``1..depth``."""
    c = input_connect_constant(cfg.kernel, cfg.m, cfg.inputs) if cfg.input_connect else 0.0
    try:
        rmap = RecurrenceMap(cfg.kernel, cfg.m, c)
    except ConfigurationError:
        return [math.nan] * cfg.depth
    u = initial_u_from_inputs(rmap, cfg.inputs[i], cfg.inputs[j])
    out = []
    for _ in range(cfg.depth):
        out.append(u)
        u = iterate_n(rmap, u, 1)
    return out


def estimate_mean_z(cfg: SimConfig, x_index: int, x_prime_index: int,
                    workers: int = 1) -> list[LayerStats]:
    """Empirical mean and standard error of ``Z_n`` per layer for one input pair.

    With a single replication the standard error is reported as 0 and the
    layer is flagged ``degenerate``.
    """
    n_pts = len(cfg.inputs)
    for idx in (x_index, x_prime_index):
        if not 0 <= idx < n_pts:
            raise DomainError(f"input index {idx} out of range for {n_pts} inputs")
    jobs = [(cfg, r, x_index, x_prime_index) for r in range(cfg.replications)]
    z = np.array(_run(_pair_z, jobs, workers), dtype=float).reshape(cfg.replications, cfg.depth)
    predicted = predicted_trajectory(cfg, x_index, x_prime_index)
    reps = cfg.replications
    stats = []
    for n in range(cfg.depth):
        col = z[:, n]
        se = float(np.std(col, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        stats.append(LayerStats(n + 1, float(np.mean(col)), se, predicted[n], reps, reps == 1))
    return stats


def rmsd_trace(cfg: SimConfig, workers: int = 1) -> np.ndarray:
    """RMSD of the layer outputs, shape ``(replications, depth + 1)``.

    Column 0 is the RMSD of the raw inputs.
    """
    jobs = [(cfg, r) for r in range(cfg.replications)]
    return np.array(_run(_rmsd_row, jobs, workers), dtype=float)
