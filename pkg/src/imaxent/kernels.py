"""Second-order kernels, kernel distribution/density estimators and
leave-one-out PITs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

__all__ = [
    "KernelModel",
    "Sample",
    "PitVector",
    "gaussian_kernel",
    "epanechnikov_kernel",
    "get_kernel",
    "make_kernel",
    "kdfe",
    "kde",
    "loo_pits",
    "loo_pits_identity",
    "pit_affine_representation",
    "pit_moment_expansion",
    "lemma2_expansion",
    "compute_xi",
    "gaussian_var_v1",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Phi(-8.5) ~ 1e-17: pairs further apart than this many bandwidths are 0/1.
_GAUSS_CUTOFF = 8.5


@dataclass(frozen=True)
class KernelModel:
    name: str
    k: Callable[[np.ndarray], np.ndarray]
    K: Callable[[np.ndarray], np.ndarray]
    mu2: float
    mu4: float
    psi21: float
    support: float = math.inf

    def K_b(self, z, b: float):
        """Scaled CDF kernel; ``b = 0`` gives the right-continuous step."""
        z = np.asarray(z, dtype=float)
        if b < 0:
            raise ValueError(f"bandwidth must be >= 0, got {b}")
        if b == 0:
            return (z >= 0).astype(float)
        with np.errstate(over="ignore"):  # z/b -> +-inf maps to 0 or 1
            return self.K(z / b)

    def k_b(self, z, b: float):
        if b <= 0:
            raise ValueError(f"bandwidth must be > 0, got {b}")
        return self.k(np.asarray(z, dtype=float) / b) / b


def _gauss_k(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _epan_k(x):
    x = np.asarray(x, dtype=float)
    return 0.75 * np.maximum(0.0, 1.0 - x * x)


def _epan_K(x):
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    return 0.5 + 0.75 * x - 0.25 * x ** 3


def make_kernel(name, k, K, support=math.inf) -> KernelModel:
    """Build a kernel, computing its functionals and checking it is a
    symmetric, non-negative second-order kernel."""
    lim = support if math.isfinite(support) else 40.0
    grid = np.linspace(-lim, lim, 2001)
    kv = k(grid)
    if np.any(kv < 0):
        raise ValueError(f"kernel {name!r} takes negative values; only second-order kernels are supported")
    if not np.allclose(kv, k(-grid), atol=1e-14):
        raise ValueError(f"kernel {name!r} is not symmetric")
    if abs(float(K(np.array(0.0))) - 0.5) > 1e-12:
        raise ValueError(f"kernel {name!r} has K(0) != 1/2")
    pts = None if not math.isfinite(support) else [0.0]
    quad = lambda f: integrate.quad(f, -lim, lim, points=pts, limit=200, epsabs=1e-13)[0]
    mass = quad(lambda x: float(k(x)))
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"kernel {name!r} integrates to {mass}, not 1")
    mu2 = quad(lambda x: x * x * float(k(x)))
    mu4 = quad(lambda x: x ** 4 * float(k(x)))
    psi21 = 2.0 * quad(lambda x: x * float(K(x)) * float(k(x)))
    if not (0 < mu2 < math.inf):
        raise ValueError(f"kernel {name!r} has mu2={mu2}")
    return KernelModel(name=name, k=k, K=K, mu2=mu2, mu4=mu4, psi21=psi21, support=support)


def gaussian_kernel() -> KernelModel:
    return KernelModel(name="gaussian", k=_gauss_k, K=special.ndtr,
                       mu2=1.0, mu4=3.0, psi21=1.0 / math.sqrt(math.pi))


def epanechnikov_kernel() -> KernelModel:
    return KernelModel(name="epanechnikov", k=_epan_k, K=_epan_K,
                       mu2=0.2, mu4=3.0 / 35.0, psi21=9.0 / 35.0, support=1.0)


_KERNELS = {"gaussian": gaussian_kernel, "epanechnikov": epanechnikov_kernel}


def get_kernel(name: str | KernelModel) -> KernelModel:
    if isinstance(name, KernelModel):
        return name
    try:
        return _KERNELS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(_KERNELS)}") from None


@dataclass(frozen=True)
class Sample:
    """Observations stored sorted ascending.

    ``order[i]`` is the original position of ``values[i]``.
    """

    values: np.ndarray
    order: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, x) -> "Sample":
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("sample is empty")
        if not np.all(np.isfinite(x)):
            raise ValueError("sample contains non-finite values")
        order = np.argsort(x, kind="stable")
        vals = x[order]
        vals.flags.writeable = False
        order.flags.writeable = False
        return cls(values=vals, order=order)

    @property
    def n(self) -> int:
        return self.values.size

    def original(self) -> np.ndarray:
        out = np.empty_like(self.values)
        out[self.order] = self.values
        return out


def _as_sample(sample) -> Sample:
    return sample if isinstance(sample, Sample) else Sample.from_array(sample)


@dataclass(frozen=True)
class PitVector:
    """Leave-one-out PITs in sorted-sample order."""

    b: float
    v: np.ndarray
    order: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.v.size

    def original(self) -> np.ndarray:
        if self.order is None:
            return self.v.copy()
        out = np.empty_like(self.v)
        out[self.order] = self.v
        return out


def kdfe(sample, b: float, x, kernel: KernelModel | str = "gaussian"):
    """Kernel distribution function estimate n^-1 sum K_b(x - X_i)."""
    s = _as_sample(sample)
    kern = get_kernel(kernel)
    x = np.asarray(x, dtype=float)
    out = kern.K_b(x[..., None] - s.values, b).mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def kde(sample, b: float, x, kernel: KernelModel | str = "gaussian"):
    """Kernel density estimate n^-1 sum k_b(x - X_i)."""
    if b <= 0:
        raise ValueError(f"kde needs b > 0, got {b}")
    s = _as_sample(sample)
    kern = get_kernel(kernel)
    x = np.asarray(x, dtype=float)
    out = kern.k_b(x[..., None] - s.values, b).mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def _loo_direct(x: np.ndarray, b: float, kern: KernelModel) -> np.ndarray:
    n = x.size
    kap = kern.K_b(x[:, None] - x[None, :], b)
    return (kap.sum(axis=1) - np.diag(kap)) / (n - 1)


def _loo_sorted_gaussian(x: np.ndarray, b: float) -> np.ndarray:
    # x sorted ascending. Pairs more than _GAUSS_CUTOFF*b apart contribute
    # exactly 0 or 1 to double precision; only the band is evaluated.
    n = x.size
    reach = _GAUSS_CUTOFF * b
    lo = np.searchsorted(x, x - reach, side="left")
    hi = np.searchsorted(x, x + reach, side="right")
    width = int((hi - lo).max())
    idx = lo[:, None] + np.arange(width)[None, :]
    valid = idx < hi[:, None]
    idx = np.minimum(idx, n - 1)
    vals = special.ndtr((x[:, None] - x[idx]) / b)
    band = np.where(valid, vals, 0.0).sum(axis=1) - 0.5  # drop the j = i term
    return (lo + band) / (n - 1)


def loo_pits(sample, b: float, kernel: KernelModel | str = "gaussian",
             method: str = "direct") -> PitVector:
    """Leave-one-out PITs V_i(b) = (n-1)^-1 sum_{j != i} K_b(X_i - X_j).

    ``method="sorted"`` uses a banded O(n log n + n w) evaluation that is
    only available for the Gaussian kernel; ``"auto"`` picks it for large
    samples.
    """
    s = _as_sample(sample)
    kern = get_kernel(kernel)
    if s.n < 2:
        raise ValueError("leave-one-out PITs need n >= 2")
    if b < 0:
        raise ValueError(f"bandwidth must be >= 0, got {b}")
    if method == "auto":
        method = "sorted" if (kern.name == "gaussian" and s.n > 400 and b > 0) else "direct"
    if method == "sorted":
        if kern.name != "gaussian" or b == 0:
            raise ValueError("sorted path is only available for the Gaussian kernel with b > 0")
        v = _loo_sorted_gaussian(s.values, b)
    elif method == "direct":
        v = _loo_direct(s.values, b, kern)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = np.clip(v, 0.0, 1.0)
    return PitVector(b=float(b), v=v, order=s.order)


def loo_pits_identity(sample, b: float, kernel: KernelModel | str = "gaussian") -> np.ndarray:
    """V_i = n/(n-1) * Fhat(X_i; b) - K_b(0)/(n-1), in sorted order."""
    s = _as_sample(sample)
    kern = get_kernel(kernel)
    n = s.n
    return n / (n - 1) * kdfe(s, b, s.values, kern) - float(kern.K_b(0.0, b)) / (n - 1)


def pit_affine_representation(sample, b: float, kernel: KernelModel | str = "gaussian") -> np.ndarray:
    """(n-1)V + 1 computed as A(2 kappa - 1) + (n+1)/2.

    ``kappa`` collects K_b(X_i - X_j) for i < j and column l of ``A`` is
    (e_i - e_j)/2. Returned in sorted-sample order.
    """
    s = _as_sample(sample)
    kern = get_kernel(kernel)
    n = s.n
    if n < 2:
        raise ValueError("need n >= 2")
    i, j = np.triu_indices(n, k=1)
    kappa = kern.K_b(s.values[i] - s.values[j], b)
    A = np.zeros((n, i.size))
    cols = np.arange(i.size)
    A[i, cols] = 0.5
    A[j, cols] = -0.5
    return A @ (2.0 * kappa - 1.0) + (n + 1) / 2.0


def pit_moment_expansion(r: int, n: float, b: float, xi2r: float, xi1r: float,
                     kernel: KernelModel | str = "gaussian") -> float:
    """Four-term large-n approximation of E V_j^r."""
    if r < 2:
        raise ValueError("r must be >= 2")
    kern = get_kernel(kernel)
    return (1.0 / (r + 1) - 0.5 * kern.mu2 * xi2r * b * b
            + (r - 1) / (2.0 * (r + 1)) / n - kern.psi21 * xi1r * b / n)


lemma2_expansion = pit_moment_expansion


def compute_xi(dist, r: int, tol: float = 1e-10) -> tuple[float, float]:
    """xi_{2,r} = r(r-1)/2 int F^{r-2} f^3 and xi_{1,r} = r(r-1)/2 int F^{r-2} f^2.

    ``dist`` needs ``pdf`` and ``cdf`` methods (a scipy frozen
    distribution or a :class:`~imaxent.mixtures.MixtureModel`).
    """
    if r < 2:
        raise ValueError("r must be >= 2")
    c = r * (r - 1) / 2.0
    out = []
    for power in (3, 2):
        val, err = integrate.quad(
            lambda x: float(dist.cdf(x)) ** (r - 2) * float(dist.pdf(x)) ** power,
            -np.inf, np.inf, epsabs=1e-13, epsrel=1e-11, limit=500)
        if not np.isfinite(val) or err > tol * max(1.0, abs(val)):
            raise ArithmeticError(f"xi integral did not converge (achieved error {err:.3g})")
        out.append(c * val)
    return out[0], out[1]


def gaussian_var_v1(n: int, b: float) -> float:
    """Exact Var V_1(b) for standard normal data and a Gaussian kernel."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if b < 0:
        raise ValueError("b must be >= 0")
    b2 = b * b
    t1 = math.atan(math.sqrt((3.0 + b2) / (1.0 + b2))) / math.pi
    t2 = 0.5 if b == 0 else math.atan(math.sqrt((4.0 + b2) / b2)) / math.pi
    return (n - 2) / (n - 1) * t1 + t2 / (n - 1) - 0.25
