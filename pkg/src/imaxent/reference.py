"""Reference marginal distribution L_n of a uniform point on Pi_n.

For n <= N_MAX the exact piecewise polynomial is tabulated; beyond that
the marginal is estimated from rejection-sampled points, pooling all n
coordinates of every accepted draw.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .permutohedron import N_MAX, circumradius, exact_moments, marginal_density_exact

__all__ = [
    "FORMAT_VERSION",
    "MarginalReference",
    "SamplerStats",
    "RateFit",
    "sample_uniform",
    "sample_uniform_batch",
    "build_reference",
    "cdf_lookup",
    "save_reference",
    "load_reference",
    "cached_reference",
    "uniform_central_moment",
    "rate_regression",
]

FORMAT_VERSION = 1
MOMENT_ORDERS = tuple(range(2, 11))
CHUNK_DRAWS = 500
HIST_BINS = 200


@dataclass
class SamplerStats:
    attempts: int = 0
    stage1_passed: int = 0
    prefilter_rejected: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else float("nan")

    def merge(self, other: "SamplerStats") -> None:
        self.attempts += other.attempts
        self.stage1_passed += other.stage1_passed
        self.prefilter_rejected += other.prefilter_rejected
        self.accepted += other.accepted


def _majorized(points: np.ndarray) -> np.ndarray:
    """Row-wise Rado test against the Pi_n generator (plane sum assumed)."""
    n = points.shape[1]
    gen_cum = np.cumsum(np.arange(n - 1, -1, -1) / (n - 1))[:-1]
    desc = -np.sort(-points, axis=1)
    return np.all(np.cumsum(desc, axis=1)[:, :-1] <= gen_cum + 1e-12 * n, axis=1)


def _central_section(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    # Uniform points on the cube's central section: n-1 free uniforms,
    # the last coordinate fixed by the plane, kept only if it lands in [0, 1].
    free = rng.random((count, n - 1))
    last = n / 2.0 - free.sum(axis=1)
    ok = (last >= 0.0) & (last <= 1.0)
    return np.column_stack([free[ok], last[ok]])


def sample_uniform_batch(n: int, count: int, rng: np.random.Generator,
                         stats: SamplerStats | None = None) -> np.ndarray:
    """``count`` independent uniform points on Pi_n by rejection."""
    if n < 2:
        raise ValueError("n must be >= 2")
    radius2 = circumradius(n) ** 2
    out = []
    have = 0
    while have < count:
        # overall acceptance is roughly 2.8/n
        block = int(min(max(64, 0.5 * (count - have) * n), max(64, 8_000_000 // n)))
        cand = _central_section(n, block, rng)
        if stats is not None:
            stats.attempts += block
            stats.stage1_passed += cand.shape[0]
        inside = np.sum((cand - 0.5) ** 2, axis=1) <= radius2
        if stats is not None:
            stats.prefilter_rejected += int((~inside).sum())
        cand = cand[inside]
        cand = cand[_majorized(cand)]
        take = cand[: count - have]
        if stats is not None:
            # attempts beyond the last needed acceptance are still counted
            stats.accepted += take.shape[0]
        out.append(take)
        have += take.shape[0]
    return np.concatenate(out, axis=0) if out else np.empty((0, n))


def sample_uniform(n: int, rng: np.random.Generator, stats: SamplerStats | None = None) -> np.ndarray:
    """One uniform point on Pi_n."""
    return sample_uniform_batch(n, 1, rng, stats)[0]


@dataclass(frozen=True)
class MarginalReference:
    n: int
    grid: np.ndarray
    cdf_values: np.ndarray
    density_values: np.ndarray
    central_moments: dict
    source: str
    draws: int = 0
    seed: int | None = None
    moment_se: dict = field(default_factory=dict)

    @property
    def grid_size(self) -> int:
        return self.grid.size - 1

    def moments_array(self, r: int) -> np.ndarray:
        return np.array([self.central_moments[j] for j in range(2, r + 1)])


def _exact_reference(n: int, grid_size: int) -> MarginalReference:
    dens = marginal_density_exact(n)
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    cdf = dens.cdf(grid)
    cdf[0], cdf[-1] = 0.0, 1.0
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    moments = dict(zip(MOMENT_ORDERS, exact_moments(dens, MOMENT_ORDERS)))
    return MarginalReference(n=n, grid=grid, cdf_values=cdf, density_values=dens(grid),
                             central_moments=moments, source="exact")


def _chunk_seed(seed: int, chunk: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(chunk,))


def _simulate_chunk(args):
    n, count, seed, chunk, grid_size = args
    rng = np.random.default_rng(_chunk_seed(seed, chunk))
    stats = SamplerStats()
    pts = sample_uniform_batch(n, count, rng, stats)
    vals = pts.ravel()
    # Pool the reflection 1 - u as well: the marginal is symmetric about 1/2.
    pooled = np.concatenate([vals, 1.0 - vals])
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    idx = np.searchsorted(grid, pooled, side="left")
    le_counts = np.bincount(idx, minlength=grid_size + 1)[: grid_size + 1]
    hist = np.histogram(pooled, bins=HIST_BINS, range=(0.0, 1.0))[0]
    centred = pts - 0.5
    per_draw = np.stack([np.mean(centred ** j, axis=1) for j in MOMENT_ORDERS], axis=1)
    per_draw[:, 1::2] = 0.0  # odd orders vanish under the symmetrisation
    return (le_counts.astype(np.int64), hist.astype(np.int64),
            per_draw.sum(axis=0), (per_draw ** 2).sum(axis=0), stats)


def build_reference(n: int, draws: int = 100_000, grid_size: int = 1000, seed: int = 0,
                    workers: int = 1, force_simulation: bool = False) -> MarginalReference:
    """Tabulate L_n on an equispaced grid, with its density and central moments.

    Uses the exact density for ``n <= N_MAX`` (``draws`` ignored) unless
    ``force_simulation`` is set. The simulated path splits ``draws`` into
    fixed chunks, each with its own substream of ``seed``, so the result
    does not depend on ``workers``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if n < 2:
        raise ValueError("n must be >= 2")
    if n <= N_MAX and not force_simulation:
        return _exact_reference(n, grid_size)
    if draws < 10 * grid_size:
        raise ValueError(f"draws={draws} is below 10 * grid_size = {10 * grid_size}")
    sizes = [CHUNK_DRAWS] * (draws // CHUNK_DRAWS)
    if draws % CHUNK_DRAWS:
        sizes.append(draws % CHUNK_DRAWS)
    tasks = [(n, size, seed, c, grid_size) for c, size in enumerate(sizes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_chunk, tasks))
    else:
        results = [_simulate_chunk(t) for t in tasks]

    le_counts = np.zeros(grid_size + 1, dtype=np.int64)
    hist = np.zeros(HIST_BINS, dtype=np.int64)
    s1 = np.zeros(len(MOMENT_ORDERS))
    s2 = np.zeros(len(MOMENT_ORDERS))
    stats = SamplerStats()
    for le, h, a, b, st in results:  # merged in chunk order
        le_counts += le
        hist += h
        s1 += a
        s2 += b
        stats.merge(st)

    total = 2 * n * draws
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    cdf = np.cumsum(le_counts) / total
    cdf[0], cdf[-1] = 0.0, 1.0
    density_bins = hist / (total / HIST_BINS)
    bin_idx = np.minimum((grid * HIST_BINS).astype(int), HIST_BINS - 1)
    mean = s1 / draws
    var = np.maximum(s2 / draws - mean ** 2, 0.0)
    se = np.sqrt(var / max(draws - 1, 1))
    moments = {j: float(m) for j, m in zip(MOMENT_ORDERS, mean)}
    return MarginalReference(
        n=n, grid=grid, cdf_values=cdf, density_values=density_bins[bin_idx],
        central_moments=moments, source="simulated", draws=draws, seed=seed,
        moment_se={j: float(s) for j, s in zip(MOMENT_ORDERS, se)})


def cdf_lookup(ref: MarginalReference, v, return_flag: bool = False):
    """L_n(v) by linear interpolation between grid nodes.

    Values outside [0, 1] are clamped; with ``return_flag`` a boolean
    saying whether any clamping happened is returned as well.
    """
    v = np.asarray(v, dtype=float)
    clamped = bool(np.any((v < 0) | (v > 1)))
    out = np.interp(np.clip(v, 0.0, 1.0), ref.grid, ref.cdf_values)
    if out.ndim == 0:
        out = float(out)
    return (out, clamped) if return_flag else out


def _to_json(ref: MarginalReference) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "n": ref.n,
        "grid_size": ref.grid_size,
        "draws": ref.draws,
        "seed": ref.seed,
        "source": ref.source,
        "cdf_values": ref.cdf_values.tolist(),
        "density_values": ref.density_values.tolist(),
        "central_moments": {str(k): v for k, v in ref.central_moments.items()},
        "moment_se": {str(k): v for k, v in ref.moment_se.items()},
    }


def save_reference(ref: MarginalReference, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(_to_json(ref)))
    os.replace(tmp, path)
    return path


def load_reference(path) -> MarginalReference:
    data = json.loads(Path(path).read_text())
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported reference format {data.get('format_version')}")
    g = int(data["grid_size"])
    return MarginalReference(
        n=int(data["n"]), grid=np.linspace(0.0, 1.0, g + 1),
        cdf_values=np.asarray(data["cdf_values"], dtype=float),
        density_values=np.asarray(data["density_values"], dtype=float),
        central_moments={int(k): float(v) for k, v in data["central_moments"].items()},
        source=data.get("source", "simulated"), draws=int(data["draws"]), seed=data["seed"],
        moment_se={int(k): float(v) for k, v in data.get("moment_se", {}).items()})


def default_cache_dir() -> Path:
    return Path(os.environ.get("IMAXENT_CACHE", Path.home() / ".cache" / "imaxent"))


def cached_reference(n: int, draws: int = 100_000, grid_size: int = 1000, seed: int = 0,
                     cache_dir=None, workers: int = 1) -> MarginalReference:
    """Load a reference from the on-disk cache, building it on a miss."""
    if n <= N_MAX:
        return build_reference(n, draws, grid_size, seed)
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache_dir / f"ref_n{n}_d{draws}_g{grid_size}_s{seed}_v{FORMAT_VERSION}.json"
    if path.exists():
        return load_reference(path)
    ref = build_reference(n, draws, grid_size, seed, workers=workers)
    save_reference(ref, path)
    return ref


def uniform_central_moment(order: int) -> float:
    """Central moment of U(0, 1) about 1/2."""
    if order % 2:
        return 0.0
    return 1.0 / ((order + 1) * 2.0 ** order)


@dataclass(frozen=True)
class RateFit:
    order: int
    alpha: float
    beta: float
    subsample_min_n: int


def rate_regression(moment_table, order: int, min_n: int = 0) -> RateFit:
    """OLS fit of log10(m0 - m_n) = alpha + beta * log10(n).

    ``moment_table`` is an iterable of ``(n, m_n)`` pairs for one even
    ``order``; ``m0`` is the uniform central moment.
    """
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    m0 = uniform_central_moment(order)
    rows = [(float(n), float(m)) for n, m in moment_table if n >= min_n]
    if len(rows) < 3:
        raise ValueError(f"need at least 3 points with n >= {min_n}, got {len(rows)}")
    ns, ms = np.array(rows).T
    if np.any(ms >= m0):
        raise ValueError("every moment must lie below the uniform moment "
                         f"m0={m0:.6g}; deviations are expected to be negative")
    x = np.log10(ns)
    y = np.log10(m0 - ms)
    beta, alpha = np.polyfit(x, y, 1)
    if not math.isfinite(beta):
        raise ArithmeticError("rate regression produced a non-finite slope")
    return RateFit(order=order, alpha=float(alpha), beta=float(beta), subsample_min_n=min_n)
