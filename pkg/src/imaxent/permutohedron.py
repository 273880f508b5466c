"""Exact geometry of the rescaled regular permutohedron.

The leave-one-out PIT vector of a sample of size ``n`` lives on

    Pi_n = P_n(1, (n-2)/(n-1), ..., 1/(n-1), 0),

an (n-1)-dimensional polytope inside the hyperplane ``sum(u) = n/2``.
This module provides membership (majorization), volume, circumradius and
the exact marginal density ``l_n`` of a uniform point on ``Pi_n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "N_MAX",
    "PermutohedronSpec",
    "PiecewisePolynomialDensity",
    "permutohedron_spec",
    "contains",
    "circumradius",
    "volume_postnikov",
    "volume_regular",
    "marginal_density_exact",
    "exact_moments",
]

# Largest n handled by the n!-cost exact paths.
N_MAX = 9


@dataclass(frozen=True)
class PermutohedronSpec:
    n: int
    generator: np.ndarray
    plane_sum: float


def permutohedron_spec(n: int) -> PermutohedronSpec:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    gen = np.arange(n - 1, -1, -1, dtype=float) / (n - 1)
    gen.flags.writeable = False
    return PermutohedronSpec(n=n, generator=gen, plane_sum=n / 2.0)


def contains(point, spec: PermutohedronSpec | int, tol: float | None = None) -> bool:
    """Membership in ``Pi_n`` via Rado's majorization criterion.

    A point on the plane ``sum(u) = n/2`` lies in ``Pi_n`` iff its
    descending partial sums never exceed those of the generator.
    """
    if isinstance(spec, (int, np.integer)):
        spec = permutohedron_spec(int(spec))
    u = np.asarray(point, dtype=float).ravel()
    n = spec.n
    if u.size != n:
        raise ValueError(f"point has length {u.size}, expected n={n}")
    if tol is None:
        tol = 1e-12 * n
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if abs(u.sum() - spec.plane_sum) > tol:
        return False
    desc = -np.sort(-u, kind="stable")
    return bool(np.all(np.cumsum(desc)[:-1] <= np.cumsum(spec.generator)[:-1] + tol))


def circumradius(n: int) -> float:
    """Distance from the barycentre ``1/2`` to any vertex of ``Pi_n``."""
    if n < 2:
        raise ValueError(f"circumradius needs n >= 2, got {n}")
    return math.sqrt(n * (n + 1) / (12.0 * (n - 1)))


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    perms = np.fromiter(itertools.chain.from_iterable(itertools.permutations(range(n))),
                        dtype=np.int8 if n < 128 else np.int32, count=n * math.factorial(n))
    perms = perms.reshape(-1, n)
    perms.flags.writeable = False
    return perms


def volume_postnikov(x, lambdas=None, n_max: int = N_MAX) -> float:
    """(n-1)-volume of ``P_n(x)`` from Postnikov's permutation sum.

    The result does not depend on ``lambdas`` (any pairwise-distinct
    reals); the default is ``0, 1, ..., n-1``. Both ``x`` and ``lambdas``
    are centred first, which leaves every summand's contribution to the
    total unchanged but keeps the cancellation in floating point small.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 1:
        raise ValueError("x must be non-empty")
    if n > n_max:
        raise ValueError(
            f"n={n} exceeds n_max={n_max}: the exact sum has n! terms; "
            "use the simulated reference (build_reference) instead")
    if np.any(np.diff(x) >= 0):
        raise ValueError("x must be strictly decreasing")
    lam = np.arange(n, dtype=float) if lambdas is None else np.asarray(lambdas, dtype=float).ravel()
    if lam.size != n:
        raise ValueError(f"lambdas has length {lam.size}, expected {n}")
    if np.unique(lam).size != n:
        raise ValueError("lambdas must be pairwise distinct")
    if n == 1:
        return 1.0
    x = x - x.mean()
    lam = lam - lam.mean()
    L = lam[_permutations(n)]
    terms = (L @ x) ** (n - 1) / np.prod(L[:, :-1] - L[:, 1:], axis=1)
    return math.fsum(terms) / math.factorial(n - 1)


def volume_regular(n: int) -> float:
    """Closed-form (n-1)-volume of ``Pi_n``: n^(n-2) / (n-1)^(n-1)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return math.exp((n - 2) * math.log(n) - (n - 1) * math.log(n - 1))


@dataclass(frozen=True)
class PiecewisePolynomialDensity:
    """Piecewise polynomial density on ``[0, 1]``.

    ``coefficients[j]`` holds the exact (rational) coefficients of piece
    ``j`` in increasing powers of ``u``; piece ``j`` covers
    ``[j/(n-1), (j+1)/(n-1)]``.
    """

    n: int
    coefficients: tuple[tuple[Fraction, ...], ...]

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @cached_property
    def pieces(self) -> list[tuple[tuple[float, float], np.ndarray]]:
        k = self.knots
        return [((k[j], k[j + 1]), np.array([float(c) for c in cs]))
                for j, cs in enumerate(self.coefficients)]

    def _piece_index(self, u: np.ndarray) -> np.ndarray:
        return np.clip(np.floor(u * (self.n - 1)).astype(int), 0, self.n - 2)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError("u must lie in [0, 1]")
        idx = self._piece_index(u)
        out = np.empty_like(u)
        for j, (_, c) in enumerate(self.pieces):
            mask = idx == j
            if np.any(mask):
                out[mask] = np.polynomial.polynomial.polyval(u[mask], c)
        return out

    @cached_property
    def cdf_pieces(self) -> tuple[tuple[Fraction, ...], ...]:
        # Antiderivatives, with constants chosen so the CDF is continuous.
        out = []
        acc = Fraction(0)
        knots = [Fraction(j, self.n - 1) for j in range(self.n)]
        for j, cs in enumerate(self.coefficients):
            anti = [Fraction(0)] + [c / (p + 1) for p, c in enumerate(cs)]
            lo = knots[j]
            anti[0] = acc - _polyval_exact(anti, lo)
            acc = _polyval_exact(anti, knots[j + 1])
            out.append(tuple(anti))
        return tuple(out)

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError("u must lie in [0, 1]")
        idx = self._piece_index(u)
        out = np.empty_like(u)
        for j, cs in enumerate(self.cdf_pieces):
            mask = idx == j
            if np.any(mask):
                out[mask] = np.polynomial.polynomial.polyval(u[mask], [float(c) for c in cs])
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "knots": [str(Fraction(j, self.n - 1)) for j in range(self.n)],
            "coefficients": [[str(c) for c in cs] for cs in self.coefficients],
            "coefficients_float": [[float(c) for c in cs] for cs in self.coefficients],
        }


def _polyval_exact(coefs, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coefs):
        acc = acc * x + c
    return acc


@lru_cache(maxsize=None)
def _weighted_permutations(m: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    common = math.factorial(m - 1) ** (m - 1)
    out = []
    for perm in itertools.permutations(range(m)):
        den = 1
        for a, b in zip(perm[:-1], perm[1:]):
            den *= a - b
        out.append((perm, common // den))
    return tuple(out)


def _section_volume_poly(m: int, j: int) -> list[Fraction]:
    """Exact coefficients (in t) of Vol P_m(m, ..., j+1, t, j-2, ..., 0).

    Postnikov's sum with integer lambdas 0..m-1 is expanded in ``t``. Every
    denominator divides ((m-1)!)^(m-1), so all arithmetic stays in integers.
    """
    deg = m - 1
    if m == 1:
        return [Fraction(1)]
    fixed = list(range(m, j, -1)) + [None] + list(range(j - 2, -1, -1))
    k = fixed.index(None)
    ints = [0 if v is None else v for v in fixed]
    binoms = [math.comb(deg, p) for p in range(deg + 1)]
    acc = [0] * (deg + 1)
    for perm, w in _weighted_permutations(m):
        a0 = sum(l * v for l, v in zip(perm, ints))
        c = perm[k]
        apow = [1] * (deg + 1)
        for p in range(1, deg + 1):
            apow[p] = apow[p - 1] * a0
        cp = 1
        for p in range(deg + 1):
            acc[p] += w * binoms[p] * apow[deg - p] * cp
            cp *= c
    scale = math.factorial(m - 1) ** (m - 1) * math.factorial(deg)
    return [Fraction(a, scale) for a in acc]


def _compose_linear(coefs: list[Fraction], a: Fraction, b: Fraction) -> list[Fraction]:
    """Coefficients in u of p(a + b*u) given p's coefficients."""
    out = [Fraction(0)]
    for c in reversed(coefs):
        # out = out * (a + b u) + c
        new = [Fraction(0)] * (len(out) + 1)
        for i, v in enumerate(out):
            new[i] += v * a
            new[i + 1] += v * b
        new[0] += c
        out = new
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


@lru_cache(maxsize=None)
def marginal_density_exact(n: int, n_max: int = N_MAX) -> PiecewisePolynomialDensity:
    """Exact marginal density ``l_n`` of a uniform point on ``Pi_n``.

    On ``[(j-1)/(n-1), j/(n-1)]`` the density is proportional to the
    volume of the section, itself a permutohedron
    ``P_{n-1}(n-1, ..., j+1, 2j-1-(n-1)u, j-2, ..., 0)``.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if n > n_max:
        raise ValueError(
            f"n={n} exceeds n_max={n_max}; use the simulated reference "
            "(build_reference) for large n")
    m = n - 1
    scale = Fraction(n - 1, n ** (n - 2))
    pieces = []
    for j in range(1, n):
        poly_t = _section_volume_poly(m, j)
        poly_u = _compose_linear(poly_t, Fraction(2 * j - 1), Fraction(-(n - 1)))
        poly_u = [scale * c for c in poly_u]
        poly_u += [Fraction(0)] * (n - 1 - len(poly_u))
        pieces.append(tuple(poly_u))
    return PiecewisePolynomialDensity(n=n, coefficients=tuple(pieces))


def _exact_central_moment(density: PiecewisePolynomialDensity, order: int) -> Fraction:
    half = Fraction(1, 2)
    n = density.n
    total = Fraction(0)
    shift = [math.comb(order, i) * (-half) ** (order - i) for i in range(order + 1)]
    for j, cs in enumerate(density.coefficients):
        lo, hi = Fraction(j, n - 1), Fraction(j + 1, n - 1)
        # (u - 1/2)^order * sum c_p u^p, integrated term by term
        for i, s in enumerate(shift):
            for p, c in enumerate(cs):
                if c == 0 or s == 0:
                    continue
                e = i + p + 1
                total += s * c * (hi ** e - lo ** e) / e
    return total


def exact_moments(density: PiecewisePolynomialDensity, orders, exact: bool = False):
    """Central moments about 1/2 by exact integration of each piece."""
    out = []
    for k in orders:
        if int(k) < 1:
            raise ValueError("moment orders must be >= 1")
        val = _exact_central_moment(density, int(k))
        out.append(val if exact else float(val))
    return out
