"""Seeded Monte Carlo study of bandwidth selectors on normal mixtures.

Replication ``r`` draws its sample from ``SeedSequence(master_seed,
spawn_key=(0, r))`` so results do not depend on how replications are
spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .kernels import PitVector, get_kernel
from .mixtures import mixture, mixture_sample
from .reference import MarginalReference, cached_reference, load_reference
from .select import PitEvaluator, parse_method, select

__all__ = [
    "QUANTILE_LEVELS",
    "SimConfig",
    "MethodSummary",
    "PitHistogram",
    "SimResult",
    "resolve_reference",
    "run_simulation",
    "replicate_pits",
    "pit_marginal_histogram",
    "emit",
    "load_result",
    "summary_csv",
    "draws_csv",
    "pit_hist_csv",
    "json_text",
]

QUANTILE_LEVELS = (0.0, 0.025, 0.25, 0.5, 0.75, 0.975, 1.0)
HIST_BINS = 50
HIST_REPLICATIONS = 100
_TASK_SIZE = 10


@dataclass(frozen=True)
class SimConfig:
    density_id: int
    n: int
    replications: int = 500
    methods: tuple = ("ad", "ns2", "ns4")
    kernel: str = "gaussian"
    master_seed: int = 0
    ref_source: str = "auto"
    workers: int = 1
    ref_draws: int = 100_000
    ref_grid: int = 1000
    ref_seed: int = 0
    histograms: bool = True

    def __post_init__(self):
        if self.density_id not in range(1, 7):
            raise ValueError(f"density_id must be in 1..6, got {self.density_id}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        labels = tuple(parse_method(m).label for m in self.methods)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate methods in {list(self.methods)}")
        object.__setattr__(self, "methods", labels)
        get_kernel(self.kernel)


@dataclass
class MethodSummary:
    method: str
    count: int
    quantiles: tuple
    mean: float
    sd: float
    edge_minima: int
    failures: int


@dataclass
class PitHistogram:
    b: float
    edges: np.ndarray
    density: np.ndarray
    ref_density: np.ndarray | None
    pooled_m2: float

    def sup_distance(self) -> float:
        if self.ref_density is None:
            raise ValueError("histogram has no reference overlay")
        return float(np.max(np.abs(self.density - self.ref_density)))


@dataclass
class SimResult:
    config: SimConfig
    draws: dict
    edge_flags: dict
    histograms: dict = field(default_factory=dict)

    @property
    def methods(self) -> tuple:
        return self.config.methods

    def summary(self) -> list:
        return [_summarise(m, self.draws[m], self.edge_flags[m]) for m in self.methods]


def _summarise(method: str, draws, edges) -> MethodSummary:
    b = np.asarray(draws, dtype=float)
    ok = b[np.isfinite(b)]
    if ok.size == 0:
        q = tuple([math.nan] * len(QUANTILE_LEVELS))
        mean = sd = math.nan
    else:
        # linear interpolation between order statistics
        q = tuple(float(x) for x in np.quantile(ok, QUANTILE_LEVELS, method="linear"))
        mean = float(ok.mean())
        sd = float(ok.std(ddof=1)) if ok.size > 1 else 0.0
    return MethodSummary(method=method, count=int(ok.size), quantiles=q, mean=mean, sd=sd,
                         edge_minima=int(np.sum(edges)), failures=int(b.size - ok.size))


def resolve_reference(config: SimConfig, cache_dir=None) -> MarginalReference:
    """``auto`` builds (or loads from cache) the reference; anything else is a path."""
    if config.ref_source == "auto":
        return cached_reference(config.n, draws=config.ref_draws, grid_size=config.ref_grid,
                                seed=config.ref_seed, cache_dir=cache_dir, workers=config.workers)
    path = Path(config.ref_source)
    if not path.exists():
        raise FileNotFoundError(f"reference file {path} does not exist")
    ref = load_reference(path)
    if ref.n != config.n:
        raise ValueError(f"reference {path} is for n={ref.n}, simulation has n={config.n}")
    return ref


def _rep_rng(seed: int, stream: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, r)))


_WORKER_STATE: dict = {}


def _init_worker(config: SimConfig, ref: MarginalReference) -> None:
    _WORKER_STATE["config"] = config
    _WORKER_STATE["ref"] = ref


def _run_reps(reps: range) -> list:
    config, ref = _WORKER_STATE["config"], _WORKER_STATE["ref"]
    model = mixture(config.density_id)
    out = []
    for r in reps:
        sample = mixture_sample(model, config.n, _rep_rng(config.master_seed, 0, r))
        row = []
        for m in config.methods:
            try:
                est = select(m, sample, ref, config.kernel)
                row.append((est.b, "edge_minimum" in est.flags))
            except ArithmeticError:
                row.append((math.nan, False))
        out.append(row)
    return out


def run_simulation(config: SimConfig, ref: MarginalReference | None = None,
                   cache_dir=None) -> SimResult:
    """Run every method on ``config.replications`` seeded mixture samples."""
    if ref is None:
        ref = resolve_reference(config, cache_dir)
    if ref.n != config.n:
        raise ValueError(f"reference is for n={ref.n}, simulation has n={config.n}")
    tasks = [range(i, min(i + _TASK_SIZE, config.replications))
             for i in range(0, config.replications, _TASK_SIZE)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker,
                                 initargs=(config, ref)) as pool:
            chunks = list(pool.map(_run_reps, tasks))
    else:
        _init_worker(config, ref)
        chunks = [_run_reps(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]  # replication order
    draws, edges = {}, {}
    for k, m in enumerate(config.methods):
        draws[m] = np.array([row[k][0] for row in rows], dtype=float)
        edges[m] = np.array([row[k][1] for row in rows], dtype=bool)
    result = SimResult(config=config, draws=draws, edge_flags=edges)
    if config.histograms:
        model = mixture(config.density_id)
        for m in config.methods:
            s = _summarise(m, draws[m], edges[m])
            b = s.quantiles[3]
            if math.isfinite(b):
                pits = replicate_pits(model, config.n, b, HIST_REPLICATIONS, config.master_seed,
                                      config.kernel)
                result.histograms[m] = pit_marginal_histogram(pits, ref)
    return result


def replicate_pits(model, n: int, b: float, replications: int, seed: int,
                   kernel="gaussian") -> list:
    """Leave-one-out PITs at a fixed ``b`` for independent mixture samples."""
    out = []
    for r in range(replications):
        sample = mixture_sample(model, n, _rep_rng(seed, 1, r))
        v = PitEvaluator(sample, kernel)(b)
        out.append(PitVector(b=float(b), v=v, order=sample.order))
    return out


def pit_marginal_histogram(pits, ref: MarginalReference | None = None,
                           bins: int = HIST_BINS) -> PitHistogram:
    """Pooled density histogram of the PITs with the bin-averaged l_n overlay."""
    pits = list(pits)
    if not pits:
        raise ValueError("no PIT vectors given")
    b_values = {float(p.b) for p in pits if isinstance(p, PitVector)}
    if len(b_values) > 1:
        raise ValueError("PIT vectors were computed at different bandwidths")
    v = np.concatenate([np.asarray(p.v if isinstance(p, PitVector) else p, dtype=float).ravel()
                        for p in pits])
    edges = np.linspace(0.0, 1.0, bins + 1)
    dens, _ = np.histogram(v, bins=edges, density=True)
    ref_dens = None
    if ref is not None:
        cdf = np.interp(edges, ref.grid, ref.cdf_values)
        ref_dens = np.diff(cdf) / np.diff(edges)
    b = b_values.pop() if b_values else math.nan
    return PitHistogram(b=b, edges=edges, density=dens, ref_density=ref_dens,
                        pooled_m2=float(np.mean((v - 0.5) ** 2)))


# ---- emission -------------------------------------------------------------

_SUMMARY_HEADER = (["method", "count"] + [f"q{q:g}" for q in QUANTILE_LEVELS]
                   + ["mean", "sd", "edge_minima", "failures"])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])
    return buf.getvalue()


def summary_csv(result: SimResult) -> str:
    rows = [[s.method, s.count, *s.quantiles, s.mean, s.sd, s.edge_minima, s.failures]
            for s in result.summary()]
    return _csv_text(_SUMMARY_HEADER, rows)


def draws_csv(result: SimResult) -> str:
    rows = []
    for m in result.methods:
        for r, (b, e) in enumerate(zip(result.draws[m], result.edge_flags[m])):
            rows.append([str(r), m, b, bool(e)])
    return _csv_text(["replication", "method", "b", "edge_minimum"], rows)


def pit_hist_csv(result: SimResult) -> str:
    rows = []
    for m in result.methods:
        h = result.histograms.get(m)
        if h is None:
            continue
        ref = h.ref_density if h.ref_density is not None else np.full(h.density.size, math.nan)
        for i in range(h.density.size):
            rows.append([m, h.b, h.edges[i], h.edges[i + 1], h.density[i], ref[i]])
    return _csv_text(["method", "b", "bin_lo", "bin_hi", "density", "ref_density"], rows)


def _to_dict(result: SimResult) -> dict:
    cfg = asdict(result.config)
    cfg["methods"] = list(cfg["methods"])
    hists = {}
    for m, h in result.histograms.items():
        hists[m] = {"b": h.b, "edges": h.edges.tolist(), "density": h.density.tolist(),
                    "ref_density": None if h.ref_density is None else h.ref_density.tolist(),
                    "pooled_m2": h.pooled_m2}
    return {
        "config": cfg,
        "draws": {m: [None if not math.isfinite(x) else float(x) for x in result.draws[m]]
                  for m in result.methods},
        "edge_flags": {m: [bool(x) for x in result.edge_flags[m]] for m in result.methods},
        "histograms": hists,
        "summary": [asdict(s) for s in result.summary()],
    }


def _from_dict(data: dict) -> SimResult:
    cfg = dict(data["config"])
    cfg["methods"] = tuple(cfg["methods"])
    config = SimConfig(**cfg)
    draws = {m: np.array([math.nan if x is None else x for x in v], dtype=float)
             for m, v in data["draws"].items()}
    edges = {m: np.array(v, dtype=bool) for m, v in data["edge_flags"].items()}
    hists = {}
    for m, h in data.get("histograms", {}).items():
        hists[m] = PitHistogram(b=h["b"], edges=np.array(h["edges"]), density=np.array(h["density"]),
                                ref_density=None if h["ref_density"] is None else np.array(h["ref_density"]),
                                pooled_m2=h["pooled_m2"])
    return SimResult(config=config, draws=draws, edge_flags=edges, histograms=hists)


def json_text(result: SimResult) -> str:
    return json.dumps(_to_dict(result), indent=1, allow_nan=True) + "\n"


def load_result(path) -> SimResult:
    """Read a result written by ``emit(..., "json", path)``."""
    with open(path, encoding="utf-8") as fh:
        return _from_dict(json.load(fh))


def emit(result: SimResult, format: str, path) -> list:
    """Write ``result``; returns the paths written.

    ``csv`` treats ``path`` as a directory and writes ``summary.csv``,
    ``draws.csv`` and ``pit_hist.csv``; ``json`` writes one file.
    """
    path = Path(path)
    if format == "csv":
        path.mkdir(parents=True, exist_ok=True)
        out = []
        for name, text in (("summary.csv", summary_csv(result)), ("draws.csv", draws_csv(result)),
                           ("pit_hist.csv", pit_hist_csv(result))):
            p = path / name
            p.write_text(text, encoding="utf-8")
            out.append(p)
        return out
    if format == "json":
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json_text(result), encoding="utf-8")
        return [path]
    raise ValueError(f"unknown format {format!r}; expected csv or json")
