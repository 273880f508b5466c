import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats
from scipy.special import ndtr

from imaxent.kernels import (PitVector, Sample, compute_xi, epanechnikov_kernel, gaussian_kernel,
                             gaussian_var_v1, get_kernel, kde, kdfe, pit_moment_expansion, loo_pits,
                             loo_pits_identity, make_kernel, pit_affine_representation)
from imaxent.mixtures import mixture, mixture_sample
from imaxent.permutohedron import contains

SQRT_2PI = math.sqrt(2 * math.pi)


@pytest.mark.parametrize("kern", [gaussian_kernel(), epanechnikov_kernel()])
def test_kernel_invariants(kern):
    x = np.linspace(-5, 5, 401)
    assert np.all(kern.k(x) >= 0)
    assert_allclose(kern.k(x), kern.k(-x), atol=1e-15)
    assert float(kern.K(np.array(0.0))) == 0.5
    lim = 40.0 if kern.support == math.inf else kern.support
    assert abs(integrate.quad(lambda t: float(kern.k(t)), -lim, lim, limit=200)[0] - 1) < 1e-6
    # functionals against direct quadrature
    mu2 = integrate.quad(lambda t: t * t * float(kern.k(t)), -lim, lim, limit=200)[0]
    psi = 2 * integrate.quad(lambda t: t * float(kern.K(t)) * float(kern.k(t)), -lim, lim,
                             limit=200)[0]
    assert math.isclose(kern.mu2, mu2, rel_tol=1e-8)
    assert math.isclose(kern.psi21, psi, rel_tol=1e-8)


def test_gaussian_functionals():
    g = gaussian_kernel()
    assert g.mu2 == 1.0 and g.mu4 == 3.0
    assert math.isclose(g.psi21, 1 / math.sqrt(math.pi))


def test_make_kernel_rejects_higher_order():
    # fourth-order Gaussian-based kernel dips below zero
    k4 = lambda x: 0.5 * (3 - np.asarray(x) ** 2) * np.exp(-0.5 * np.asarray(x) ** 2) / SQRT_2PI
    with pytest.raises(ValueError, match="negative"):
        make_kernel("g4", k4, ndtr)


def test_make_kernel_recomputes_gaussian():
    g = make_kernel("g", lambda x: np.exp(-0.5 * np.asarray(x) ** 2) / SQRT_2PI, ndtr)
    assert math.isclose(g.mu2, 1.0, rel_tol=1e-10)
    assert math.isclose(g.mu4, 3.0, rel_tol=1e-10)
    assert math.isclose(g.psi21, 1 / math.sqrt(math.pi), rel_tol=1e-10)


def test_get_kernel_unknown():
    with pytest.raises(ValueError, match="unknown kernel"):
        get_kernel("triangle")


def test_sample_sorted_with_permutation():
    s = Sample.from_array([3.0, -1.0, 2.0, -1.0])
    assert_allclose(s.values, [-1, -1, 2, 3])
    assert_allclose(s.original(), [3, -1, 2, -1])
    assert s.n == 4
    with pytest.raises(ValueError):
        Sample.from_array([1.0, np.nan])


def test_kdfe_examples():
    assert math.isclose(kdfe([0, 1], 1.0, 0.0), (ndtr(0) + ndtr(-1)) / 2, rel_tol=1e-14)
    assert math.isclose(kdfe([0, 1], 1.0, 0.0), 0.329328, abs_tol=1e-6)
    x = np.random.default_rng(0).standard_normal(20)
    assert kdfe(x, 0.0, x.max()) == 1.0
    assert math.isclose(kdfe(x, 1e8, 0.0), 0.5, abs_tol=1e-7)
    with pytest.raises(ValueError):
        kdfe(x, -1.0, 0.0)


def test_kdfe_b0_is_right_continuous_edf():
    x = np.array([0.0, 1.0, 1.0, 2.0])
    assert_allclose(kdfe(x, 0.0, [-0.1, 0.0, 0.99, 1.0, 2.0]), [0, 0.25, 0.25, 0.75, 1.0])


def test_kde_examples():
    xs = np.linspace(-3, 3, 7)
    assert_allclose(kde([0.0], 1.0, xs), stats.norm.pdf(xs), rtol=1e-14)
    assert math.isclose(kde([0.0, 2.0], 1.0, 1.0), 0.241971, abs_tol=1e-6)
    x = np.random.default_rng(2).standard_normal(30)
    b = 0.4
    total = integrate.quad(lambda t: kde(x, b, t), x.min() - 10 * b, x.max() + 10 * b, limit=200)[0]
    assert abs(total - 1) < 1e-4
    with pytest.raises(ValueError):
        kde(x, 0.0, 0.0)


def test_loo_pits_examples():
    v = loo_pits([-1.0, 0.0, 1.0], 1.0).v
    v1 = (ndtr(-1) + ndtr(-2)) / 2
    assert math.isclose(v[0], v1, rel_tol=1e-14)
    assert math.isclose(v[0], 0.0907027, abs_tol=1e-7)
    assert math.isclose(v[1], 0.5, rel_tol=1e-14)
    assert math.isclose(v[2], 1 - v1, rel_tol=1e-14)
    assert math.isclose(v.sum(), 1.5, rel_tol=1e-14)


@pytest.mark.parametrize("kern", ["gaussian", "epanechnikov"])
def test_loo_pits_n2(kern):
    x = np.array([0.3, -0.4])
    K = get_kernel(kern)
    for b in (0.0, 0.2, 1.5):
        p = loo_pits(x, b, kern)
        k12 = float(K.K_b(-0.7, b))
        assert_allclose(p.v, [k12, 1 - k12], atol=1e-15)
        assert_allclose(p.original(), [1 - k12, k12], atol=1e-15)


def test_loo_pits_huge_bandwidth():
    x = np.random.default_rng(3).standard_normal(25)
    assert_allclose(loo_pits(x, 1e8).v, 0.5, atol=1e-8)


def test_loo_pits_errors():
    with pytest.raises(ValueError):
        loo_pits([1.0], 0.5)
    with pytest.raises(ValueError):
        loo_pits([1.0, 2.0], -0.5)


def _cases(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        model = mixture(int(rng.integers(1, 7)))
        n = int(rng.integers(2, 51))
        b = float(10 ** rng.uniform(-3, 1)) if rng.random() > 0.05 else 0.0
        yield mixture_sample(model, n, rng), b


def test_three_pit_representations_agree():
    for sample, b in _cases(100, 11):
        for kern in ("gaussian", "epanechnikov"):
            v = loo_pits(sample, b, kern).v
            assert_allclose(loo_pits_identity(sample, b, kern), v, atol=1e-12)
            assert_allclose((pit_affine_representation(sample, b, kern) - 1) / (sample.n - 1),
                            v, atol=1e-12)


def test_affine_representation_limits():
    x = np.array([-1.0, 0.4, 2.0])
    p = pit_affine_representation(x, 0.7)
    assert_allclose((p - 1) / 2, loo_pits(x, 0.7).v, atol=1e-12)
    assert_allclose(pit_affine_representation(x, 1e12), (3 + 1) / 2, atol=1e-9)


def test_sorted_path_matches_direct():
    rng = np.random.default_rng(4)
    for n in (50, 500, 1200):
        x = rng.standard_normal(n) * rng.uniform(0.5, 3)
        for b in (1e-3, 0.05, 0.5, 5.0):
            assert_allclose(loo_pits(x, b, method="sorted").v, loo_pits(x, b).v, atol=1e-10)
    with pytest.raises(ValueError):
        loo_pits(x, 0.1, "epanechnikov", method="sorted")


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=40), st.floats(min_value=0.0, max_value=20.0),
       st.integers(min_value=0, max_value=2 ** 32 - 1), st.sampled_from(["gaussian", "epanechnikov"]))
def test_pit_vector_invariants(n, b, seed, kern):
    x = np.random.default_rng(seed).standard_normal(n)
    p = loo_pits(x, b, kern)
    assert isinstance(p, PitVector)
    assert np.all((p.v >= 0) & (p.v <= 1))
    assert abs(p.v.sum() - n / 2) <= 1e-10 * n
    assert np.all(np.diff(p.v) >= -1e-15)
    assert contains(p.v, n, tol=1e-9)


def test_pair_correlation_is_minus_one_over_n_minus_one():
    rng = np.random.default_rng(5)
    n, b, reps = 5, 0.5, 100_000
    x = rng.standard_normal((reps, n))
    kap = ndtr((x[:, :, None] - x[:, None, :]) / b)
    v = (kap.sum(axis=2) - 0.5) / (n - 1)
    v1, v2 = v[:, 0], v[:, 1]
    r = np.corrcoef(v1, v2)[0, 1]
    se = (1 - r * r) / math.sqrt(reps)
    assert abs(r + 1 / (n - 1)) < 4 * se


def _mc_v1(n, b, reps, rng):
    x = rng.standard_normal((reps, n))
    return ndtr((x[:, :1] - x[:, 1:]) / b).mean(axis=1)


@pytest.mark.parametrize("n", [3, 10, 50])
@pytest.mark.parametrize("b", [0.1, 0.5, 1.0, 2.0])
def test_gaussian_var_v1_against_monte_carlo(n, b):
    v = _mc_v1(n, b, 100_000, np.random.default_rng(1000 * n + int(10 * b)))
    c = (v - 0.5) ** 2
    se = c.std() / math.sqrt(c.size)
    assert abs(c.mean() - gaussian_var_v1(n, b)) < 4 * se


def test_gaussian_var_v1_limits_and_shape():
    assert abs(gaussian_var_v1(5, 1e8)) < 1e-6
    assert abs(gaussian_var_v1(10 ** 9, 0.0) - 1 / 12) < 1e-6
    assert math.isclose(gaussian_var_v1(3, 1.0), 0.08510, abs_tol=5e-5)
    bs = np.geomspace(1e-4, 100, 200)
    for n in (2, 3, 10, 1000):
        vals = [gaussian_var_v1(n, b) for b in bs]
        assert np.all(np.diff(vals) < 0)


def test_compute_xi_normal():
    xi2, xi1 = compute_xi(stats.norm(), 2)
    assert math.isclose(xi2, 1 / (2 * math.pi * math.sqrt(3)), rel_tol=1e-9)
    assert math.isclose(xi1, 1 / (2 * math.sqrt(math.pi)), rel_tol=1e-9)


def test_compute_xi_bounds():
    u = stats.uniform()
    xi2, xi1 = compute_xi(u, 3)
    assert 0 < xi2 <= 1.5 and 0 < xi1 <= 1.5
    m = mixture(3)
    xi2, xi1 = compute_xi(m, 4)
    grid = np.linspace(-4, 3, 20001)
    sup = float(np.max(m.pdf(grid)))
    assert 0 < xi2 <= 2 * sup ** 2 and 0 < xi1 <= 2 * sup


def test_moment_expansion_limits():
    for r in (2, 3, 5):
        assert math.isclose(pit_moment_expansion(r, 1e12, 0.0, 0.3, 0.3), 1 / (r + 1), rel_tol=1e-10)
    n = 40
    assert math.isclose(pit_moment_expansion(2, n, 0.0, 0.3, 0.3), 1 / 3 + 1 / (6 * n))


def test_moment_expansion_against_monte_carlo():
    n, b = 1000, 0.1
    xi2, xi1 = compute_xi(stats.norm(), 2)
    approx = pit_moment_expansion(2, n, b, xi2, xi1)
    v = _mc_v1(n, b, 100_000, np.random.default_rng(8))
    se = (v ** 2).std() / math.sqrt(v.size)
    assert abs(np.mean(v ** 2) - approx) < 3 * se + b ** 4
    # same quantity in closed form
    assert abs(gaussian_var_v1(n, b) + 0.25 - approx) < b ** 4
