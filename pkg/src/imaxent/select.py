"""Bandwidth selection: criterion profiles, scan-and-refine minimisation
and the dispatching ``select`` entry point."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .criteria import (DEFAULT_EPS, CvMWeight, anderson_darling, cue_objective, cvm_beta,
                       neyman_statistic, sarda_cv)
from .kernels import KernelModel, Sample, _as_sample, gaussian_var_v1, get_kernel
from .reference import MarginalReference, cdf_lookup

__all__ = [
    "Method",
    "parse_method",
    "BandwidthEstimate",
    "PitEvaluator",
    "profile",
    "minimize",
    "default_bracket",
    "make_criterion",
    "select",
    "m2_gaussian_bandwidth",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Method:
    """A bandwidth selector: ``ad``, ``cvm``, ``ns``, ``cue``, ``m2`` or ``cv``."""

    kind: str
    alpha: float = 1.0
    eps: float = DEFAULT_EPS
    r: int = 2

    @property
    def label(self) -> str:
        if self.kind == "ad":
            return "ad" if self.eps == DEFAULT_EPS else f"ad:{self.eps:g}"
        if self.kind == "cvm":
            return f"cvm:{self.alpha:g}:{self.eps:g}"
        if self.kind in ("ns", "cue"):
            return f"{self.kind}{self.r}"
        return self.kind


_METHOD_RE = re.compile(r"^(ns|cue)[:]?(\d+)$")


def parse_method(spec: str | Method) -> Method:
    """Parse ``ad``, ``ad:EPS``, ``cvm:ALPHA[:EPS]``, ``ns:R``, ``cue:R``, ``m2``, ``cv``.

    ``ns2`` and ``cue4`` style labels are accepted too.
    """
    if isinstance(spec, Method):
        return spec
    s = spec.strip().lower()
    m = _METHOD_RE.match(s)
    if m:
        r = int(m.group(2))
        if r < (1 if m.group(1) == "ns" else 2):
            raise ValueError(f"invalid order in method {spec!r}")
        return Method(kind=m.group(1), r=r)
    parts = s.split(":")
    try:
        if parts[0] == "ad" and len(parts) <= 2:
            return Method(kind="ad", alpha=0.0, eps=float(parts[1]) if len(parts) == 2 else DEFAULT_EPS)
        if parts[0] == "cvm" and 2 <= len(parts) <= 3:
            alpha = float(parts[1])
            eps = float(parts[2]) if len(parts) == 3 else DEFAULT_EPS
            if alpha == 0:
                return Method(kind="ad", alpha=0.0, eps=eps)
            CvMWeight(alpha, alpha, eps)
            return Method(kind="cvm", alpha=alpha, eps=eps)
    except ValueError as exc:
        raise ValueError(f"invalid method {spec!r}: {exc}") from None
    if s in ("m2", "cv"):
        return Method(kind=s)
    raise ValueError(f"unknown method {spec!r}; expected ad, cvm:ALPHA:EPS, ns:R, cue:R, m2 or cv")


@dataclass
class BandwidthEstimate:
    b: float
    method: str
    objective_value: float
    all_local_minima: list = field(default_factory=list)
    bracket: tuple = (math.nan, math.nan)
    evaluations: int = 0
    flags: list = field(default_factory=list)
    interior_b: float | None = None

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "method": self.method,
            "objective": self.objective_value,
            "local_minima": [[float(b), float(v)] for b, v in self.all_local_minima],
            "flags": list(self.flags),
            "interior_b": self.interior_b,
            "bracket": [float(x) for x in self.bracket],
            "evaluations": self.evaluations,
        }


class PitEvaluator:
    """Leave-one-out PITs for one sample at many bandwidths.

    Pairwise differences are computed once; each call costs one kernel
    evaluation per pair.
    """

    def __init__(self, sample, kernel: KernelModel | str = "gaussian"):
        self.sample = _as_sample(sample)
        if self.sample.n < 2:
            raise ValueError("need n >= 2")
        self.kernel = get_kernel(kernel)
        x = self.sample.values
        self._diff = x[:, None] - x[None, :]
        self._self = float(self.kernel.K_b(0.0, 1.0))  # diagonal term for b > 0

    def __call__(self, b: float) -> np.ndarray:
        n = self.sample.n
        if b <= 0:
            kap = self.kernel.K_b(self._diff, b)
            return np.clip((kap.sum(axis=1) - np.diag(kap)) / (n - 1), 0.0, 1.0)
        with np.errstate(over="ignore"):
            s = self.kernel.K(self._diff / b).sum(axis=1) - self._self
        return np.clip(s / (n - 1), 0.0, 1.0)


def profile(criterion: Callable[[float], float], b_grid) -> list:
    b_grid = np.asarray(b_grid, dtype=float)
    if b_grid.size == 0:
        raise ValueError("empty bandwidth grid")
    if np.any(b_grid <= 0) or np.any(np.diff(b_grid) <= 0):
        raise ValueError("bandwidth grid must be positive and strictly increasing")
    return [(float(b), float(criterion(float(b)))) for b in b_grid]


def _safe(criterion):
    def f(b):
        try:
            v = float(criterion(b))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            return math.inf
        return v if math.isfinite(v) else math.inf
    return f


def _golden(f, a: float, c: float, x0: float, f0: float, tol: float):
    """Golden-section search on log b; returns the best point seen."""
    la, lc = math.log(a), math.log(c)
    best_x, best_f = x0, f0
    evals = 0
    x1 = lc - _GOLDEN * (lc - la)
    x2 = la + _GOLDEN * (lc - la)
    f1, f2 = f(math.exp(x1)), f(math.exp(x2))
    evals += 2
    while math.exp(lc) - math.exp(la) > tol:
        if f1 <= f2:
            lc, x2, f2 = x2, x1, f1
            x1 = lc - _GOLDEN * (lc - la)
            f1 = f(math.exp(x1))
        else:
            la, x1, f1 = x1, x2, f2
            x2 = la + _GOLDEN * (lc - la)
            f2 = f(math.exp(x2))
        evals += 1
        for x, v in ((x1, f1), (x2, f2)):
            if v < best_f:
                best_x, best_f = math.exp(x), v
    return best_x, best_f, evals


def minimize(criterion: Callable[[float], float], bracket: tuple, grid_points: int = 64,
             tol: float = 1e-6, method: str = "custom") -> BandwidthEstimate:
    """Log-spaced scan over ``bracket``, golden-section refinement of every
    local minimum found, global minimum returned.

    All local minima are reported so that a minimum sitting on the lower
    edge of the bracket (the b -> 0 hazard) can be recognised; such an
    estimate carries the ``edge_minimum`` flag and ``interior_b`` holds the
    best interior local minimum, if any.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    if grid_points < 16:
        raise ValueError("grid_points must be >= 16")
    f = _safe(criterion)
    grid = np.geomspace(lo, hi, grid_points)
    vals = np.array([f(b) for b in grid])
    evals = grid_points
    if np.sum(~np.isfinite(vals)) > grid_points / 2:
        raise ArithmeticError("criterion is non-finite on more than half of the scan grid")

    minima = []  # (b, value, kind)
    m = grid_points
    for i in range(m):
        v = vals[i]
        if not math.isfinite(v):
            continue
        left = vals[i - 1] if i > 0 else math.inf
        right = vals[i + 1] if i < m - 1 else math.inf
        if not (v < left and v <= right):
            continue
        if i == 0:
            minima.append((grid[0], v, "lower"))
        elif i == m - 1:
            minima.append((grid[-1], v, "upper"))
        else:
            b, fb, k = _golden(f, grid[i - 1], grid[i + 1], grid[i], v, tol)
            evals += k
            minima.append((b, fb, "interior"))

    finite = np.isfinite(vals)
    if not minima:
        i = int(np.argmin(np.where(finite, vals, np.inf)))
        minima.append((grid[i], vals[i], "interior"))
    best = min(minima, key=lambda t: (t[1], t[0]))
    flags = []
    if best[2] == "lower":
        flags.append("edge_minimum")
    elif best[2] == "upper":
        flags.append("upper_edge_minimum")
    interior = [t for t in minima if t[2] == "interior"]
    interior_b = min(interior, key=lambda t: t[1])[0] if interior else None
    b_hat = float(best[0])
    value = float(criterion(b_hat))
    evals += 1
    return BandwidthEstimate(b=b_hat, method=method, objective_value=value,
                             all_local_minima=[(float(b), float(v)) for b, v, _ in minima],
                             bracket=(lo, hi), evaluations=evals, flags=flags,
                             interior_b=None if interior_b is None else float(interior_b))


def default_bracket(sample) -> tuple:
    """[0.05 * sd * n^-1, 3 * range]."""
    s = _as_sample(sample)
    x = s.values
    sd = float(np.std(x, ddof=1)) if s.n > 1 else 0.0
    rng = float(x[-1] - x[0])
    if not (sd > 0 and rng > 0):
        raise ValueError("sample has zero spread; no bandwidth bracket")
    return 0.05 * sd / s.n, 3.0 * rng


def _check_ref(ref: MarginalReference, n: int) -> None:
    if ref.n != n:
        raise ValueError(f"reference built for n={ref.n}, sample has n={n}")


def make_criterion(method, sample, ref: MarginalReference | None,
                   kernel: KernelModel | str = "gaussian") -> Callable[[float], float]:
    """Criterion b -> value: leave-one-out PITs, then L_n lookup, then the
    discrepancy."""
    meth = parse_method(method)
    s = _as_sample(sample)
    kern = get_kernel(kernel)
    if meth.kind == "cv":
        return lambda b: sarda_cv(s, b, kern)
    if ref is None:
        raise ValueError(f"method {meth.label} needs a reference distribution")
    _check_ref(ref, s.n)
    pits = PitEvaluator(s, kern)
    if meth.kind == "ad":
        return lambda b: anderson_darling(cdf_lookup(ref, pits(b)), meth.eps)
    if meth.kind == "cvm":
        w = CvMWeight(meth.alpha, meth.alpha, meth.eps)
        return lambda b: cvm_beta(cdf_lookup(ref, pits(b)), w)
    if meth.kind == "ns":
        return lambda b: neyman_statistic(cdf_lookup(ref, pits(b)), meth.r)
    if meth.kind == "cue":
        return lambda b: cue_objective(pits(b), ref, meth.r)
    raise ValueError(f"method {meth.label} has no scalar criterion")


def m2_gaussian_bandwidth(n: int, ref: MarginalReference | float, rtol: float = 1e-10) -> float:
    """Root of Var V_1(b) = m_{2,n} for standard normal data and kernel.

    ``ref`` may be a reference for ``n`` or the moment m_{2,n} itself.
    """
    if isinstance(ref, MarginalReference):
        _check_ref(ref, n)
        m2 = ref.central_moments[2]
    else:
        m2 = float(ref)
    lo, hi = 1e-6, 1e3
    g = lambda b: gaussian_var_v1(n, b) - m2
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 > ghi):
        raise ValueError(f"m2={m2:.6g} lies outside the range of Var V_1 on [{lo}, {hi}] for n={n}")
    return float(optimize.brentq(g, lo, hi, xtol=1e-14, rtol=rtol))


def select(method, sample, ref: MarginalReference | None = None,
           kernel: KernelModel | str = "gaussian", bracket: tuple | None = None,
           grid_points: int = 64, tol: float = 1e-6) -> BandwidthEstimate:
    """Estimate the iMaxEnt bandwidth of ``sample`` with one selector."""
    meth = parse_method(method)
    s = _as_sample(sample)
    if ref is not None:
        _check_ref(ref, s.n)
    if meth.kind == "m2":
        if ref is None:
            raise ValueError("m2 needs a reference distribution")
        # normal-reference rule: rescale the standard-normal root by the sample sd
        sd = float(np.std(s.values, ddof=1))
        b = sd * m2_gaussian_bandwidth(s.n, ref)
        return BandwidthEstimate(b=b, method=meth.label, objective_value=0.0,
                                 all_local_minima=[(b, 0.0)], bracket=(b, b))
    crit = make_criterion(meth, s, ref, kernel)
    est = minimize(crit, bracket or default_bracket(s), grid_points=grid_points, tol=tol,
                   method=meth.label)
    return est
