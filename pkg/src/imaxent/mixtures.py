"""Standardised Marron-Wand normal mixtures #1-#6 and exact MISE.

Raw parameters are those of Table 1 in Marron & Wand (1992), "Exact mean
integrated squared error", Ann. Statist. 20(2). Each mixture is shifted and
scaled analytically to zero mean and unit variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .kernels import KernelModel, Sample, get_kernel

__all__ = [
    "MixtureModel",
    "MIXTURE_NAMES",
    "mixture",
    "mixture_eval",
    "mixture_sample",
    "mise_kde",
    "mise_kdfe",
    "min_mise_bandwidths",
]

# (weights, means, sds) before standardisation.
_RAW = {
    1: ([1.0], [0.0], [1.0]),
    2: ([0.2, 0.2, 0.6], [0.0, 0.5, 13.0 / 12.0], [1.0, 2.0 / 3.0, 5.0 / 9.0]),
    3: ([1.0 / 8] * 8,
        [3.0 * ((2.0 / 3.0) ** l - 1.0) for l in range(8)],
        [(2.0 / 3.0) ** l for l in range(8)]),
    4: ([2.0 / 3.0, 1.0 / 3.0], [0.0, 0.0], [1.0, 0.1]),
    5: ([0.1, 0.9], [0.0, 0.0], [1.0, 0.1]),
    6: ([0.5, 0.5], [-1.0, 1.0], [2.0 / 3.0, 2.0 / 3.0]),
}

MIXTURE_NAMES = {
    1: "Gaussian",
    2: "Skewed unimodal",
    3: "Strongly skewed",
    4: "Kurtotic unimodal",
    5: "Outlier",
    6: "Bimodal",
}

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureModel:
    id: int
    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    shift: float
    scale: float

    @property
    def name(self) -> str:
        return MIXTURE_NAMES.get(self.id, f"mixture {self.id}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.means) / self.sds
        out = np.sum(self.weights * np.exp(-0.5 * z * z) / (_SQRT_2PI * self.sds), axis=-1)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.sum(self.weights * special.ndtr((x[..., None] - self.means) / self.sds), axis=-1)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def var(self) -> float:
        m = self.mean()
        return float(self.weights @ (self.sds ** 2 + self.means ** 2) - m * m)


def mixture(id: int) -> MixtureModel:
    if id not in _RAW:
        raise ValueError(f"mixture id must be in 1..6, got {id}")
    w, m, s = (np.asarray(a, dtype=float) for a in _RAW[id])
    w = w / w.sum()
    mu = float(w @ m)
    sigma = math.sqrt(float(w @ (s ** 2 + (m - mu) ** 2)))
    return MixtureModel(id=id, weights=w, means=(m - mu) / sigma, sds=s / sigma,
                        shift=mu, scale=sigma)


def mixture_eval(model: MixtureModel, x) -> tuple:
    return model.pdf(x), model.cdf(x)


def mixture_sample(model: MixtureModel, n: int, rng: np.random.Generator) -> Sample:
    """Component by weight, then a normal draw from the standardised component."""
    if n < 1:
        raise ValueError("n must be >= 1")
    comp = rng.choice(model.weights.size, size=n, p=model.weights)
    z = rng.standard_normal(n)
    return Sample.from_array(model.means[comp] + model.sds[comp] * z)


def _abs_normal_mean(mu, var):
    # E|Y| for Y ~ N(mu, var)
    s = np.sqrt(var)
    return s * math.sqrt(2.0 / math.pi) * np.exp(-0.5 * mu * mu / var) + mu * (1.0 - 2.0 * special.ndtr(-mu / s))


def _energy(w1, m1, v1, w2, m2, v2) -> float:
    """E|X - Y| for independent normal mixtures X, Y."""
    d = m1[:, None] - m2[None, :]
    v = v1[:, None] + v2[None, :]
    return float(w1 @ _abs_normal_mean(d, v) @ w2)


def _normal_overlap(w, m, v_extra, s2) -> float:
    # w' Omega w with Omega[l, l'] = phi_{sqrt(v_extra + s_l^2 + s_l'^2)}(m_l - m_l')
    d = m[:, None] - m[None, :]
    v = v_extra + s2[:, None] + s2[None, :]
    return float(w @ (np.exp(-0.5 * d * d / v) / np.sqrt(2.0 * math.pi * v)) @ w)


def _require_gaussian(kernel) -> None:
    if get_kernel(kernel).name != "gaussian":
        raise ValueError("exact MISE is only available for the Gaussian kernel")


def mise_kde(model: MixtureModel, n: int, b: float, kernel="gaussian") -> float:
    """Exact MISE of the Gaussian-kernel density estimate."""
    _require_gaussian(kernel)
    w, m, s2 = model.weights, model.means, model.sds ** 2
    return (1.0 / (2.0 * math.sqrt(math.pi) * n * b)
            + (1.0 - 1.0 / n) * _normal_overlap(w, m, 2 * b * b, s2)
            - 2.0 * _normal_overlap(w, m, b * b, s2)
            + _normal_overlap(w, m, 0.0, s2))


def mise_kdfe(model: MixtureModel, n: int, b: float, kernel="gaussian") -> float:
    """Exact MISE of the Gaussian-kernel distribution function estimate.

    With F_b the law of X + bZ, the integrated squared bias is
    E|F_b - F| energy form and the integrated variance is
    (E|Y - Y'|/2 - b/sqrt(pi)) / n for Y, Y' iid F_b.
    """
    _require_gaussian(kernel)
    w, m, s2 = model.weights, model.means, model.sds ** 2
    sb2 = s2 + b * b
    e_bb = _energy(w, m, sb2, w, m, sb2)
    e_b0 = _energy(w, m, sb2, w, m, s2)
    e_00 = _energy(w, m, s2, w, m, s2)
    ivar = (0.5 * e_bb - b / math.sqrt(math.pi)) / n
    isb = e_b0 - 0.5 * e_bb - 0.5 * e_00
    return ivar + isb


def _argmin(f, lo=1e-4, hi=5.0) -> float:
    grid = np.geomspace(lo, hi, 200)
    vals = np.array([f(b) for b in grid])
    i = int(np.argmin(vals))
    a, c = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda t: f(math.exp(t)), bounds=(math.log(a), math.log(c)),
                                   method="bounded", options={"xatol": 1e-10})
    return float(math.exp(res.x))


def min_mise_bandwidths(model: MixtureModel, n: int, kernel="gaussian") -> dict:
    """Bandwidths minimising exact MISE for the KDE ('D') and KDFE ('C')."""
    _require_gaussian(kernel)
    b_kde = _argmin(lambda b: mise_kde(model, n, b))
    b_kdfe = _argmin(lambda b: mise_kdfe(model, n, b))
    return {"b_kde": b_kde, "b_kdfe": b_kdfe,
            "mise_kde": mise_kde(model, n, b_kde), "mise_kdfe": mise_kdfe(model, n, b_kdfe)}
