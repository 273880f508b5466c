"""Discrepancy criteria evaluated on (transformed) leave-one-out PITs.

Beta-weighted Cramer-von Mises family with trimming, Anderson-Darling,
the Neyman smooth statistic on shifted Legendre polynomials, moment
estimating equations with a continuously-updated quadratic form, and
Sarda's cross-validation criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .kernels import PitVector, _as_sample, get_kernel, loo_pits

__all__ = [
    "CvMWeight",
    "incomplete_beta",
    "cvm_beta",
    "cvm_classical_trimmed",
    "anderson_darling",
    "legendre_shifted",
    "neyman_statistic",
    "moment_deviations",
    "cue_objective",
    "sarda_cv",
    "cvm_integral",
    "DEFAULT_EPS",
]

DEFAULT_EPS = 0.001
_AD_CLAMP = 1e-12
_LEGENDRE_MAX = 20


@dataclass(frozen=True)
class CvMWeight:
    """Weight psi(t) = t^(alpha-1) (1-t)^(beta-1) on [eps, 1-eps]."""

    alpha: float = 1.0
    beta: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not 0 <= self.eps < 0.5:
            raise ValueError(f"eps must lie in [0, 1/2), got {self.eps}")
        if (self.alpha == 0) != (self.beta == 0):
            raise ValueError("alpha and beta must both be positive, or both zero (Anderson-Darling)")

    @property
    def is_ad(self) -> bool:
        return self.alpha == 0 and self.beta == 0

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            w = t ** (self.alpha - 1.0) * (1.0 - t) ** (self.beta - 1.0)
        return np.where((t >= self.eps) & (t <= 1.0 - self.eps), w, 0.0)


def incomplete_beta(x, a: float, c: float):
    """Unnormalised incomplete beta B(x; a, c) = int_0^x t^(a-1) (1-t)^(c-1) dt."""
    if a <= 0 or c <= 0:
        raise ValueError(f"incomplete beta needs a > 0 and c > 0, got a={a}, c={c}")
    return special.betainc(a, c, x) * special.beta(a, c)


def _sorted_u(u) -> np.ndarray:
    u = np.sort(np.asarray(u, dtype=float).ravel(), kind="stable")
    if u.size == 0:
        raise ValueError("u is empty")
    if u[0] < 0 or u[-1] > 1:
        raise ValueError("u must lie in [0, 1]")
    return u


def _trim_indices(u: np.ndarray, eps: float) -> tuple[int, int]:
    # 1-based: j_min is the first order statistic >= eps, j_max the last <= 1-eps.
    j_min = int(np.searchsorted(u, eps, side="left")) + 1
    j_max = int(np.searchsorted(u, 1.0 - eps, side="right"))
    return j_min, j_max


def cvm_beta(u, w: CvMWeight) -> float:
    """Beta-weighted CvM discrepancy between the EDF of ``u`` and the uniform."""
    if w.is_ad:
        raise ValueError("alpha = beta = 0 is the Anderson-Darling criterion; use anderson_darling")
    u = _sorted_u(u)
    n = u.size
    a, c, eps = w.alpha, w.beta, w.eps
    j_min, j_max = _trim_indices(u, eps)
    j = np.arange(j_min, j_max + 1)
    uj = u[j_min - 1:j_max]
    body = np.sum(2.0 * incomplete_beta(uj, a + 1, c) - (2 * j - 1) / n * incomplete_beta(uj, a, c)) / n
    hi, lo = 1.0 - eps, eps
    A = (incomplete_beta(hi, a + 2, c) - incomplete_beta(lo, a + 2, c)
         - 2 * j_max / n * incomplete_beta(hi, a + 1, c)
         + 2 * (j_min - 1) / n * incomplete_beta(lo, a + 1, c)
         + j_max ** 2 / n ** 2 * incomplete_beta(hi, a, c)
         - (j_min - 1) ** 2 / n ** 2 * incomplete_beta(lo, a, c))
    return float(body + A)


def cvm_classical_trimmed(u, eps: float = 0.0) -> float:
    """Trimmed classical CvM (alpha = beta = 1) in its order-statistic form."""
    u = _sorted_u(u)
    n = u.size
    j_min, j_max = _trim_indices(u, eps)
    j = np.arange(j_min, j_max + 1)
    uj = u[j_min - 1:j_max]
    return float(np.sum((uj - (2 * j - 1) / (2 * n)) ** 2) / n
                 + (j_max - j_min + 1) / (12 * n ** 3)
                 + (1 - eps - j_max / n) ** 3 / 3 - (eps - (j_min - 1) / n) ** 3 / 3)


class ADClampCounter:
    """Counts PITs clamped away from 0/1 before the untrimmed AD logs."""

    def __init__(self):
        self.count = 0


def anderson_darling(u, eps: float = DEFAULT_EPS, clamp: bool = False,
                     counter: ADClampCounter | None = None) -> float:
    """Anderson-Darling discrepancy, trimmed to [eps, 1-eps] when eps > 0.

    With ``eps = 0`` every ``u`` must lie strictly inside (0, 1) unless
    ``clamp`` is set, in which case values are pushed to
    [1e-12, 1 - 1e-12] and the number of clamped values is added to
    ``counter``.
    """
    u = _sorted_u(u)
    n = u.size
    if eps < 0 or eps >= 0.5:
        raise ValueError(f"eps must lie in [0, 1/2), got {eps}")
    if eps == 0:
        bad = (u <= 0) | (u >= 1)
        if np.any(bad):
            if not clamp:
                raise ValueError("u contains 0 or 1; the untrimmed AD statistic is infinite. "
                                 "Use a trimming eps > 0 (default 0.001).")
            if counter is not None:
                counter.count += int(bad.sum())
            u = np.clip(u, _AD_CLAMP, 1 - _AD_CLAMP)
        j = np.arange(1, n + 1)
        return float(-np.sum((2 * j - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n ** 2 - 1.0)
    j_min, j_max = _trim_indices(u, eps)
    j = np.arange(j_min, j_max + 1)
    uj = u[j_min - 1:j_max]
    log_u, log_1mu = np.log(uj), np.log1p(-uj)
    body = np.sum(-2.0 * log_1mu - (2 * j - 1) / n * (log_u - log_1mu)) / n
    return float(body - 1.0 + 2.0 * eps
                 + (j_max ** 2 / n ** 2 + ((j_min - 1) / n - 1) ** 2) * math.log1p(-eps)
                 - ((j_max / n - 1) ** 2 + (j_min - 1) ** 2 / n ** 2) * math.log(eps))


def cvm_integral(u, psi, eps: float = 0.0) -> float:
    """Weighted CvM by adaptive quadrature of int_0^1 (G_n(t) - t)^2 psi(t) dt.

    Used as the independent reference for the calculating forms: the EDF
    is piecewise constant, so each gap between order statistics is
    integrated separately.
    """
    u = _sorted_u(u)
    n = u.size
    knots = np.concatenate([[0.0], u, [1.0]])
    lo_cut, hi_cut = eps, 1.0 - eps
    total = 0.0
    for j in range(n + 1):
        a, b = max(knots[j], lo_cut), min(knots[j + 1], hi_cut)
        if b <= a:
            continue
        level = j / n
        val, _ = integrate.quad(lambda t: (level - t) ** 2 * float(psi(t)), a, b,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    return total


def legendre_shifted(k: int, v):
    """Orthonormal shifted Legendre polynomial rho_k(v) = sqrt(2k+1) P_k(2v - 1) on [0, 1]."""
    if k < 0 or k > _LEGENDRE_MAX:
        raise ValueError(f"k must lie in 0..{_LEGENDRE_MAX}, got {k}")
    c = np.zeros(k + 1)
    c[k] = math.sqrt(2 * k + 1)
    # three-term recurrence: the monomial expansion loses ~1e-3 to cancellation at k = 20
    out = np.polynomial.legendre.legval(2.0 * np.asarray(v, dtype=float) - 1.0, c)
    return float(out) if np.ndim(out) == 0 else out


def neyman_statistic(u, r: int) -> float:
    """S_r = sum_{j=1}^r (n^-1/2 sum_i rho_j(u_i))^2."""
    if r < 1:
        raise ValueError("r must be >= 1")
    u = np.asarray(u, dtype=float).ravel()
    n = u.size
    rho_bar = np.array([np.mean(legendre_shifted(k, u)) for k in range(1, r + 1)])
    return float(n * rho_bar @ rho_bar)


def _ref_moments(ref, r: int) -> np.ndarray:
    # m_{j,n} for j = 2..r from a MarginalReference or a plain mapping/sequence.
    moments = getattr(ref, "central_moments", ref)
    if isinstance(moments, dict):
        try:
            return np.array([moments[j] for j in range(2, r + 1)], dtype=float)
        except KeyError as exc:
            raise ValueError(f"reference has no central moment of order {exc.args[0]}") from None
    moments = np.asarray(moments, dtype=float)
    if moments.size < r - 1:
        raise ValueError(f"reference provides moments up to order {moments.size + 1}, need {r}")
    return moments[:r - 1]


def _moment_matrix(V, ref, r: int) -> np.ndarray:
    if r < 2:
        raise ValueError("r must be >= 2")
    v = V.v if isinstance(V, PitVector) else np.asarray(V, dtype=float)
    ref_n = getattr(ref, "n", None)
    if ref_n is not None and ref_n != v.size:
        raise ValueError(f"reference built for n={ref_n}, PITs have n={v.size}")
    m = _ref_moments(ref, r)
    powers = np.arange(2, r + 1)
    return (v[:, None] - 0.5) ** powers[None, :] - m[None, :]


def moment_deviations(V, ref, r: int) -> np.ndarray:
    """n^-1 sum (V_i - 1/2)^j - m_{j,n} for j = 2..r."""
    return _moment_matrix(V, ref, r).mean(axis=0)


def cue_objective(V, ref, r: int, rcond: float = 1e-10) -> float:
    """Continuously-updated quadratic form n g_bar' Omega^+ g_bar.

    ``Omega`` is the centred sample covariance of the per-observation
    moment vectors, inverted by a spectral pseudo-inverse.
    """
    g = _moment_matrix(V, ref, r)
    n = g.shape[0]
    if n <= r:
        raise ValueError(f"CUE needs n > r (n={n}, r={r})")
    g_bar = g.mean(axis=0)
    centred = g - g_bar
    omega = centred.T @ centred / n
    evals, evecs = np.linalg.eigh(omega)
    top = evals.max()
    scale = float(np.abs(g).max())
    if not top > (1e-12 * scale) ** 2:
        raise ArithmeticError("degenerate moment conditions: all observations give identical moments")
    keep = evals > rcond * top
    proj = evecs[:, keep].T @ g_bar
    return float(max(n * np.sum(proj ** 2 / evals[keep]), 0.0))


def sarda_cv(sample, b: float, kernel="gaussian") -> float:
    """Sarda's unweighted CV: n^-1 sum (V_i(b) - F_n(X_i))^2."""
    s = _as_sample(sample)
    v = loo_pits(s, b, get_kernel(kernel)).v
    x = s.values
    fn = np.searchsorted(x, x, side="right") / s.n
    return float(np.mean((v - fn) ** 2))
