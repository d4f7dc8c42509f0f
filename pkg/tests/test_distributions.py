import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from uqengine.distributions import (
    FAMILIES,
    Beta,
    Binomial,
    ClaytonCopula,
    Exponential,
    Gamma,
    GaussianCopula,
    Gumbel,
    JointDistribution,
    Laplace,
    Logistic,
    Lognormal,
    Normal,
    Poisson,
    Uniform,
    Weibull,
    bivariate_normal_cdf,
    distribution_from_dict,
    make_distribution,
    rvs,
    suggest_family,
)
from uqengine.errors import DomainError, InvalidParameterError

CONTINUOUS = [
    Normal(mean=1.0, std=2.0),
    Lognormal(mu=0.2, sigma=0.6),
    Uniform(low=-1.0, high=3.0),
    Exponential(rate=2.0),
    Gamma(shape=2.5, scale=1.5),
    Beta(alpha=2.0, beta=3.0),
    Weibull(shape=1.5, scale=2.0),
    Gumbel(loc=0.5, scale=1.2),
    Laplace(loc=-1.0, scale=0.7),
    Logistic(loc=2.0, scale=0.5),
]
DISCRETE = [Binomial(n=10, p=0.3), Poisson(rate=3.5)]


def test_catalog_has_twelve_families():
    assert len(FAMILIES) == 12
    assert {type(d) for d in CONTINUOUS + DISCRETE} == set(FAMILIES.values())


def test_pdf_examples():
    assert Normal(0, 1).pdf(0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    assert Uniform(0, 2).pdf(3) == 0.0
    assert Gamma(shape=2, scale=1).pdf(1) == pytest.approx(math.exp(-1), rel=1e-14)


def test_log_pdf_examples():
    assert Normal(0, 1).log_pdf(0) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)
    assert Exponential(rate=1).log_pdf(-1) == -math.inf
    w = Weibull(shape=1.5, scale=2)
    assert w.log_pdf(1.0) == pytest.approx(math.log(w.pdf(1.0)), abs=1e-12)


def test_cdf_examples():
    assert Normal(0, 1).cdf(0) == 0.5
    # enumerate {0, 1, 2}: P(0) + P(1) = 1/4 + 1/2
    assert Binomial(n=2, p=0.5).cdf(1) == pytest.approx(0.75, abs=1e-15)
    assert Lognormal(mu=0, sigma=1).cdf(1) == pytest.approx(0.5, abs=1e-15)


def test_icdf_examples():
    assert Normal(0, 1).icdf(0.5) == 0.0
    assert Uniform(low=1, high=3).icdf(0.25) == pytest.approx(1.5, abs=1e-15)
    g = Gumbel(loc=0, scale=1)
    for p in (0.01, 0.5, 0.99):
        assert g.cdf(g.icdf(p)) == pytest.approx(p, abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_icdf_domain_error(p):
    with pytest.raises(DomainError):
        Normal(0, 1).icdf(p)


def test_discrete_icdf_is_generalized_inverse():
    b = Binomial(n=2, p=0.5)
    assert b.icdf(0.25) == 0.0
    assert b.icdf(0.2500001) == 1.0
    assert b.icdf(0.75) == 1.0
    assert b.icdf(0.76) == 2.0


@pytest.mark.parametrize("dist", CONTINUOUS, ids=repr)
def test_pdf_integrates_to_one(dist):
    lo, hi = dist.support
    total, _ = integrate.quad(dist.pdf, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("dist", DISCRETE, ids=repr)
def test_pmf_sums_to_one(dist):
    k = np.arange(0, 200)
    assert dist.pdf(k).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("dist", CONTINUOUS, ids=repr)
def test_cdf_is_integral_of_pdf(dist):
    gen = np.random.default_rng(7)
    lo_p, hi_p = np.sort(gen.uniform(0.01, 0.99, size=2))
    a, b = dist.icdf(lo_p), dist.icdf(hi_p)
    area, _ = integrate.quad(dist.pdf, a, b, epsabs=1e-13, epsrel=1e-12)
    assert abs(dist.cdf(b) - dist.cdf(a) - area) <= 1e-6


@pytest.mark.parametrize("dist", CONTINUOUS, ids=repr)
def test_icdf_roundtrip(dist):
    p = np.linspace(0.001, 0.999, 101)
    x = dist.icdf(p)
    np.testing.assert_allclose(dist.cdf(x), p, atol=1e-9, rtol=0)
    inner = x[(x > dist.support[0]) & (x < dist.support[1])]
    np.testing.assert_allclose(dist.icdf(dist.cdf(inner)), inner, atol=1e-9, rtol=1e-9)


@pytest.mark.parametrize("dist", CONTINUOUS + DISCRETE, ids=repr)
def test_pdf_nonnegative_and_cdf_monotone(dist):
    lo, hi = dist.support
    x = np.linspace(max(lo, -20.0) - 1, min(hi, 40.0) + 1, 2001)
    assert np.all(dist.pdf(x) >= 0)
    c = dist.cdf(x)
    assert np.all(np.diff(c) >= -1e-15)
    assert c[0] == pytest.approx(0.0, abs=1e-6) or lo > -1e300
    assert 0.0 <= c.min() and c.max() <= 1.0


def _ks_statistic(dist, x):
    x = np.sort(x)
    n = x.size
    if dist.discrete:
        support = np.unique(x)
        emp = np.searchsorted(x, support, side="right") / n
        emp_before = np.searchsorted(x, support, side="left") / n
        return max(
            np.max(np.abs(emp - dist.cdf(support))),
            np.max(np.abs(emp_before - dist.cdf(support - 1))),
        )
    f = dist.cdf(x)
    i = np.arange(1, n + 1)
    return max(np.max(i / n - f), np.max(f - (i - 1) / n))


@pytest.mark.parametrize("dist", CONTINUOUS + DISCRETE, ids=repr)
def test_rvs_ks(dist):
    n = 100_000
    x = dist.rvs(n, 12345)
    assert _ks_statistic(dist, x) < 1.95 / math.sqrt(n)


def test_rvs_deterministic():
    a = rvs(Gamma(2, 3), 50, 42)
    b = rvs(Gamma(2, 3), 50, 42)
    assert np.array_equal(a.samples, b.samples)
    assert a.seed_record == {"generator": "PCG64", "seed": 42}


def test_rvs_mean_clt_bound():
    n = 100_000
    x = Normal(0, 1).rvs(n, 3)
    assert abs(x.mean()) < 4 / math.sqrt(n)


def test_gaussian_copula_rvs_correlation():
    joint = JointDistribution([Normal(0, 1), Normal(0, 1)], GaussianCopula([[1, 0.8], [0.8, 1]]))
    x = joint.rvs(100_000, 11)
    assert np.corrcoef(x.T)[0, 1] == pytest.approx(0.8, abs=0.02)


def test_moments():
    assert tuple(Uniform(0, 1).moments()) == pytest.approx((0.5, 1 / 12, 0.0, -1.2))
    m = Exponential(rate=2).moments()
    assert (m.mean, m.variance) == pytest.approx((0.5, 0.25))
    assert Lognormal(mu=0, sigma=0.5).moments().mean == pytest.approx(math.exp(0.125), rel=1e-14)


@pytest.mark.parametrize(
    "family,params",
    [
        ("normal", {"mean": 0, "std": 0}),
        ("normal", {"mean": 0, "std": -1}),
        ("uniform", {"low": 2, "high": 1}),
        ("gamma", {"shape": 0, "scale": 1}),
        ("binomial", {"n": 2.5, "p": 0.5}),
        ("binomial", {"n": 3, "p": 1.2}),
        ("poisson", {"rate": -2}),
        ("normal", {"mean": 0}),
        ("normal", {"mean": 0, "std": 1, "scale": 3}),
    ],
)
def test_invalid_parameters_rejected_at_construction(family, params):
    with pytest.raises(InvalidParameterError):
        make_distribution(family, params)


def test_distributions_are_immutable():
    d = Normal(0, 1)
    with pytest.raises(AttributeError):
        d.std = 3.0


def test_config_roundtrip_and_suggestion():
    d = distribution_from_dict({"family": "normal", "params": {"mean": 0, "std": 1}})
    assert d == Normal(0, 1)
    assert distribution_from_dict(d.to_dict()) == d
    assert suggest_family("gaussiann") == "normal"
    assert suggest_family("weibul") == "weibull"
    assert suggest_family("qqqqqqqq") is None
    with pytest.raises(InvalidParameterError, match="normal"):
        make_distribution("gaussiann", {"mean": 0, "std": 1})


# --- copulas -----------------------------------------------------------------


def test_copula_cdf_examples():
    assert ClaytonCopula(1e-8).cdf([0.3, 0.7]) == pytest.approx(0.21, abs=1e-7)
    assert GaussianCopula([[1, 0], [0, 1]]).cdf([0.5, 0.5]) == pytest.approx(0.25, abs=1e-14)
    assert ClaytonCopula(2).cdf([0.5, 0.5]) == pytest.approx(1 / math.sqrt(7), abs=1e-14)


def test_bivariate_normal_cdf_against_quadrature():
    for a, b, rho in [(0.3, -0.4, 0.5), (1.2, 0.7, -0.9), (-1.0, -1.0, 0.99), (2.0, 0.1, 0.3)]:
        phi2 = lambda y, x: math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * (1 - rho**2))) / (
            2 * math.pi * math.sqrt(1 - rho**2)
        )
        ref, _ = integrate.dblquad(phi2, -12, a, -12, b, epsabs=1e-13, epsrel=1e-12)
        assert bivariate_normal_cdf(a, b, rho) == pytest.approx(ref, abs=1e-10)
    assert bivariate_normal_cdf(0.0, 0.0, 0.5) == pytest.approx(0.25 + math.asin(0.5) / (2 * math.pi))


@pytest.mark.parametrize(
    "copula", [GaussianCopula([[1, 0.6], [0.6, 1]]), GaussianCopula([[1, -0.4], [-0.4, 1]]), ClaytonCopula(2.0)]
)
def test_copula_pdf_is_mixed_partial_of_cdf(copula):
    h = 1e-4
    for u, v in [(0.3, 0.6), (0.5, 0.5), (0.8, 0.2)]:
        mixed = (
            copula.cdf([u + h, v + h]) - copula.cdf([u + h, v - h])
            - copula.cdf([u - h, v + h]) + copula.cdf([u - h, v - h])
        ) / (4 * h * h)
        assert copula.pdf([u, v]) == pytest.approx(mixed, abs=1e-4)


def test_copula_validation():
    with pytest.raises(InvalidParameterError):
        ClaytonCopula(0.0)
    with pytest.raises(InvalidParameterError):
        GaussianCopula([[1, 0.5], [0.4, 1]])
    with pytest.raises(InvalidParameterError):
        GaussianCopula([[1, 1.2], [1.2, 1]])
    with pytest.raises(InvalidParameterError):
        GaussianCopula([[2, 0.0], [0.0, 1]])


def test_clayton_sampler_matches_kendall_tau():
    theta = 2.0
    u = ClaytonCopula(theta).sample(20_000, 5)
    from scipy.stats import kendalltau

    tau = kendalltau(u[:, 0], u[:, 1]).statistic
    assert tau == pytest.approx(theta / (theta + 2), abs=0.02)


def test_copula_boundary_clamped():
    c = GaussianCopula([[1, 0.5], [0.5, 1]])
    assert np.isfinite(c.pdf([0.0, 1.0]))
    assert 0.0 <= c.cdf([1.0, 1.0]) <= 1.0


# --- joint ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "copula", [None, GaussianCopula([[1, 0.7], [0.7, 1]]), ClaytonCopula(1.5)]
)
def test_joint_pdf_integrates_to_one(copula):
    joint = JointDistribution([Exponential(rate=1.0), Uniform(0, 2)], copula)
    total, _ = integrate.dblquad(
        lambda y, x: joint.pdf([[x, y]]), 0, 40, 0, 2, epsabs=1e-9, epsrel=1e-9
    )
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("copula", [GaussianCopula([[1, 0.5], [0.5, 1]]), ClaytonCopula(3.0)])
def test_joint_marginalization_recovers_marginal_cdf(copula):
    m1, m2 = Normal(1, 2), Gamma(2, 1)
    joint = JointDistribution([m1, m2], copula)
    for x in (-1.0, 0.5, 2.5):
        big = 1e6
        assert joint.cdf([[x, big]]) == pytest.approx(m1.cdf(x), abs=1e-6)
        assert joint.cdf([[big, x + 2]]) == pytest.approx(m2.cdf(x + 2), abs=1e-6)


def test_joint_independent_cdf_is_product():
    joint = JointDistribution([Normal(0, 1), Uniform(0, 1)])
    assert joint.cdf([[0.0, 0.25]]) == pytest.approx(0.125)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.02, 0.98), st.floats(0.1, 8.0))
def test_clayton_cdf_within_frechet_bounds(u, v, theta):
    c = ClaytonCopula(theta).cdf([u, v])
    assert max(u + v - 1, 0) - 1e-12 <= c <= min(u, v) + 1e-12
    assert c >= u * v - 1e-12  # Clayton is positively dependent


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.95, 0.95))
def test_bivariate_normal_symmetry(a, b, rho):
    assert bivariate_normal_cdf(a, b, rho) == pytest.approx(bivariate_normal_cdf(b, a, rho), abs=1e-14)
    # P(Z1<=a, Z2<=b) + P(Z1<=a, Z2>b) = Phi(a)
    assert bivariate_normal_cdf(a, b, rho) + bivariate_normal_cdf(a, -b, -rho) == pytest.approx(
        special.ndtr(a), abs=1e-12
    )
