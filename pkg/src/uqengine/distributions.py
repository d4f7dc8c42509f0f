"""Univariate distributions, copulas and joint distributions.

Parameterizations (the names are also the CLI config contract):

============  ======================  =========================================
family        params                  notes
============  ======================  =========================================
normal        mean, std               std > 0
lognormal     mu, sigma               of the underlying normal; median e^mu
uniform       low, high               low < high
exponential   rate                    mean 1/rate
gamma         shape, scale            pdf x^(k-1) e^(-x/theta) / (Gamma(k) theta^k)
beta          alpha, beta             support [0, 1]
weibull       shape, scale            cdf 1 - exp(-(x/scale)^shape)
gumbel        loc, scale              maximum (right-skewed) type
laplace       loc, scale              double exponential
logistic      loc, scale
binomial      n, p                    integer n >= 1, 0 <= p <= 1
poisson       rate                    rate > 0
============  ======================  =========================================

Density/cdf evaluation is delegated to ``scipy.stats`` frozen objects. Gamma and
Beta quantiles use bracketed bisection followed by a Newton polish.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ._random import as_generator
from .errors import DomainError, InvalidParameterError
from .samples import SampleSet

COPULA_CLAMP = 1e-12
_Z_CLIP = 37.0


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(np.asarray(value).reshape(-1)[0])
    return value


@dataclass(frozen=True)
class Moments:
    """Mean, variance, skewness and excess kurtosis; ``None`` where undefined."""

    mean: float | None
    variance: float | None
    skewness: float | None
    excess_kurtosis: float | None

    def __iter__(self):
        return iter((self.mean, self.variance, self.skewness, self.excess_kurtosis))


class UnivariateDistribution:
    """Base class for the univariate families.

    Subclasses declare ``family``, ``param_names``, validate parameters in
    ``_check`` and build the scipy frozen distribution in ``_freeze``.
    Instances are immutable.
    """

    family = ""
    param_names = ()
    discrete = False

    def __init__(self, *args, **kwargs):
        if len(args) > len(self.param_names):
            raise InvalidParameterError(
                f"{self.family} takes {len(self.param_names)} parameters"
            )
        params = dict(zip(self.param_names, args))
        for key, value in kwargs.items():
            if key not in self.param_names:
                raise InvalidParameterError(
                    f"unknown parameter {key!r} for {self.family}; "
                    f"expected {list(self.param_names)}"
                )
            if key in params:
                raise InvalidParameterError(f"parameter {key!r} given twice")
            params[key] = value
        missing = [p for p in self.param_names if p not in params]
        if missing:
            raise InvalidParameterError(f"{self.family} missing parameters {missing}")
        clean = {}
        for key in self.param_names:
            try:
                value = float(params[key])
            except (TypeError, ValueError):
                raise InvalidParameterError(
                    f"{self.family}.{key} must be a real number, got {params[key]!r}"
                ) from None
            if not math.isfinite(value):
                raise InvalidParameterError(f"{self.family}.{key} must be finite")
            clean[key] = value
        self._check(**clean)
        object.__setattr__(self, "_params", clean)
        object.__setattr__(self, "_dist", self._freeze(**clean))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _check(self, **params):
        pass

    def _freeze(self, **params):
        raise NotImplementedError

    @property
    def params(self):
        return dict(self._params)

    def __getattr__(self, name):
        params = self.__dict__.get("_params", {})
        if name in params:
            return params[name]
        raise AttributeError(name)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self._params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self._params == other._params

    def __hash__(self):
        return hash((type(self).__name__, tuple(self._params.items())))

    def to_dict(self):
        return {"family": self.family, "params": dict(self._params)}

    @property
    def support(self):
        lo, hi = self._dist.support()
        return float(lo), float(hi)

    def pdf(self, x):
        """Density (probability mass for discrete families) at ``x``."""
        x = np.asarray(x, dtype=float)
        out = self._dist.pmf(x) if self.discrete else self._dist.pdf(x)
        return _scalar_or_array(out, x)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = self._dist.logpmf(x) if self.discrete else self._dist.logpdf(x)
        return _scalar_or_array(out, x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self._dist.cdf(x), x)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self._dist.sf(x), x)

    def icdf(self, p):
        """Quantile function on the open interval ``(0, 1)``.

        Discrete families return the generalized inverse
        ``inf{x : cdf(x) >= p}``.
        """
        p = np.asarray(p, dtype=float)
        if np.any(~((p > 0) & (p < 1))):
            raise DomainError("icdf requires 0 < p < 1")
        return _scalar_or_array(self._ppf(p), p)

    def _ppf(self, p):
        return self._dist.ppf(p)

    def _isf(self, q):
        return self._dist.isf(q)

    def unit_to_physical(self, u):
        """Quantile map accepting the closed interval; endpoints map to the support."""
        u = np.asarray(u, dtype=float)
        lo, hi = self.support
        out = np.empty_like(u)
        inner = (u > 0) & (u < 1)
        out[inner] = self._ppf(u[inner])
        out[u <= 0] = lo
        out[u >= 1] = hi
        return _scalar_or_array(out, u)

    def from_standard_normal(self, z):
        """``F^-1(Phi(z))`` evaluated without losing the upper tail."""
        z = np.clip(np.asarray(z, dtype=float), -_Z_CLIP, _Z_CLIP)
        out = np.empty_like(z)
        low = z <= 0
        out[low] = self._ppf(special.ndtr(z[low]))
        out[~low] = self._isf(special.ndtr(-z[~low]))
        return _scalar_or_array(out, z)

    def to_standard_normal(self, x):
        """``Phi^-1(F(x))`` evaluated without losing the upper tail."""
        x = np.asarray(x, dtype=float)
        cdf = np.asarray(self._dist.cdf(x), dtype=float)
        sf = np.asarray(self._dist.sf(x), dtype=float)
        with np.errstate(divide="ignore"):
            z = np.where(cdf < 0.5, special.ndtri(cdf), -special.ndtri(sf))
        return _scalar_or_array(np.clip(z, -_Z_CLIP, _Z_CLIP), x)

    def rvs(self, n, rng):
        """``n`` independent draws as a 1-D array."""
        gen, _ = as_generator(rng)
        return np.asarray(self._dist.rvs(size=int(n), random_state=gen), dtype=float)

    def moments(self):
        values = self._dist.stats(moments="mvsk")
        return Moments(*(float(v) if np.isfinite(v) else None for v in values))


def _positive(family, **params):
    for key, value in params.items():
        if value <= 0:
            raise InvalidParameterError(f"{family}.{key} must be > 0, got {value}")


def _invert_cdf(dist, p, upper, lo, hi):
    """Bracketed bisection with Newton polish for a continuous cdf.

    With ``upper`` the survival function is inverted instead, which keeps
    precision for probabilities close to one.
    """
    p = np.asarray(p, dtype=float)
    a = np.full_like(p, lo)
    b = np.full_like(p, hi if math.isfinite(hi) else 1.0)
    func = dist.sf if upper else dist.cdf
    sign = -1.0 if upper else 1.0
    if not math.isfinite(hi):
        # grow the upper bracket until it holds the quantile
        for _ in range(2000):
            short = sign * (func(b) - p) < 0
            if not np.any(short):
                break
            b = np.where(short, 2.0 * b, b)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if np.all((mid == a) | (mid == b)):
            break
        below = sign * (func(mid) - p) < 0
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    x = 0.5 * (a + b)
    for _ in range(3):
        dens = dist.pdf(x)
        ok = dens > 0
        step = np.where(ok, sign * (func(x) - p) / np.where(ok, dens, 1.0), 0.0)
        cand = x - step
        inside = (cand >= a) & (cand <= b)
        x = np.where(inside, cand, x)
    return x


class Normal(UnivariateDistribution):
    family = "normal"
    param_names = ("mean", "std")

    def _check(self, mean, std):
        _positive(self.family, std=std)

    def _freeze(self, mean, std):
        return stats.norm(loc=mean, scale=std)

    def from_standard_normal(self, z):
        z = np.asarray(z, dtype=float)
        return _scalar_or_array(self.mean + self.std * z, z)

    def to_standard_normal(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array((x - self.mean) / self.std, x)


class Lognormal(UnivariateDistribution):
    family = "lognormal"
    param_names = ("mu", "sigma")

    def _check(self, mu, sigma):
        _positive(self.family, sigma=sigma)

    def _freeze(self, mu, sigma):
        return stats.lognorm(s=sigma, scale=math.exp(mu))

    def from_standard_normal(self, z):
        z = np.clip(np.asarray(z, dtype=float), -_Z_CLIP, _Z_CLIP)
        return _scalar_or_array(np.exp(self.mu + self.sigma * z), z)


class Uniform(UnivariateDistribution):
    family = "uniform"
    param_names = ("low", "high")

    def _check(self, low, high):
        if not low < high:
            raise InvalidParameterError(f"uniform requires low < high, got {low}, {high}")

    def _freeze(self, low, high):
        return stats.uniform(loc=low, scale=high - low)


class Exponential(UnivariateDistribution):
    family = "exponential"
    param_names = ("rate",)

    def _check(self, rate):
        _positive(self.family, rate=rate)

    def _freeze(self, rate):
        return stats.expon(scale=1.0 / rate)


class Gamma(UnivariateDistribution):
    family = "gamma"
    param_names = ("shape", "scale")

    def _check(self, shape, scale):
        _positive(self.family, shape=shape, scale=scale)

    def _freeze(self, shape, scale):
        return stats.gamma(a=shape, scale=scale)

    def _ppf(self, p):
        return _invert_cdf(self._dist, p, False, 0.0, math.inf)

    def _isf(self, q):
        return _invert_cdf(self._dist, q, True, 0.0, math.inf)


class Beta(UnivariateDistribution):
    family = "beta"
    param_names = ("alpha", "beta")

    def _check(self, alpha, beta):
        _positive(self.family, alpha=alpha, beta=beta)

    def _freeze(self, alpha, beta):
        return stats.beta(alpha, beta)

    def _ppf(self, p):
        return _invert_cdf(self._dist, p, False, 0.0, 1.0)

    def _isf(self, q):
        return _invert_cdf(self._dist, q, True, 0.0, 1.0)


class Weibull(UnivariateDistribution):
    family = "weibull"
    param_names = ("shape", "scale")

    def _check(self, shape, scale):
        _positive(self.family, shape=shape, scale=scale)

    def _freeze(self, shape, scale):
        return stats.weibull_min(c=shape, scale=scale)


class Gumbel(UnivariateDistribution):
    family = "gumbel"
    param_names = ("loc", "scale")

    def _check(self, loc, scale):
        _positive(self.family, scale=scale)

    def _freeze(self, loc, scale):
        return stats.gumbel_r(loc=loc, scale=scale)


class Laplace(UnivariateDistribution):
    family = "laplace"
    param_names = ("loc", "scale")

    def _check(self, loc, scale):
        _positive(self.family, scale=scale)

    def _freeze(self, loc, scale):
        return stats.laplace(loc=loc, scale=scale)


class Logistic(UnivariateDistribution):
    family = "logistic"
    param_names = ("loc", "scale")

    def _check(self, loc, scale):
        _positive(self.family, scale=scale)

    def _freeze(self, loc, scale):
        return stats.logistic(loc=loc, scale=scale)


class Binomial(UnivariateDistribution):
    family = "binomial"
    param_names = ("n", "p")
    discrete = True

    def _check(self, n, p):
        if n < 1 or n != int(n):
            raise InvalidParameterError(f"binomial.n must be a positive integer, got {n}")
        if not 0 <= p <= 1:
            raise InvalidParameterError(f"binomial.p must lie in [0, 1], got {p}")

    def _freeze(self, n, p):
        return stats.binom(int(n), p)

    @property
    def support(self):
        return 0.0, float(self.n)


class Poisson(UnivariateDistribution):
    family = "poisson"
    param_names = ("rate",)
    discrete = True

    def _check(self, rate):
        _positive(self.family, rate=rate)

    def _freeze(self, rate):
        return stats.poisson(rate)


FAMILIES = {
    cls.family: cls
    for cls in (
        Normal, Lognormal, Uniform, Exponential, Gamma, Beta,
        Weibull, Gumbel, Laplace, Logistic, Binomial, Poisson,
    )
}

ALIASES = {
    "gaussian": "normal",
    "norm": "normal",
    "lognorm": "lognormal",
    "expon": "exponential",
    "weibull_min": "weibull",
    "gumbel_r": "gumbel",
    "binom": "binomial",
}


def _edit_distance(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def suggest_family(name, max_distance=2):
    """Closest known family for a misspelled name, or ``None``."""
    name = str(name).lower()
    best = None
    for candidate in sorted(FAMILIES) + sorted(ALIASES):
        dist = _edit_distance(name, candidate)
        if dist <= max_distance and (best is None or dist < best[0]):
            best = (dist, ALIASES.get(candidate, candidate))
    return None if best is None else best[1]


def make_distribution(family, params=None):
    """Build a distribution from its family name and parameter mapping."""
    key = str(family).lower()
    key = ALIASES.get(key, key)
    if key not in FAMILIES:
        hint = suggest_family(family)
        extra = f"; did you mean {hint!r}?" if hint else ""
        raise InvalidParameterError(f"unknown distribution family {family!r}{extra}")
    return FAMILIES[key](**(params or {}))


def distribution_from_dict(spec):
    return make_distribution(spec["family"], spec.get("params", {}))


def _clamp_unit(u):
    return np.clip(np.asarray(u, dtype=float), COPULA_CLAMP, 1.0 - COPULA_CLAMP)


def _validate_correlation(corr):
    corr = np.array(corr, dtype=float, ndmin=2)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise InvalidParameterError("correlation matrix must be square")
    if not np.allclose(corr, corr.T, atol=1e-12, rtol=0):
        raise InvalidParameterError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12, rtol=0):
        raise InvalidParameterError("correlation matrix must have a unit diagonal")
    try:
        np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise InvalidParameterError("correlation matrix is not positive definite") from None
    return 0.5 * (corr + corr.T)


# Gauss-Legendre nodes on [0, 1] for the bivariate normal integral
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def bivariate_normal_cdf(a, b, rho):
    """``P(Z1 <= a, Z2 <= b)`` for standard normals with correlation ``rho``.

    Uses ``Phi(a)Phi(b) + int_0^rho phi2(a, b; r) dr`` with the substitution
    ``r = sin(t)``, which removes the endpoint singularity at ``|r| = 1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    base = special.ndtr(a) * special.ndtr(b)
    if rho == 0:
        return base
    top = math.asin(max(-1.0, min(1.0, rho)))
    t = top * _GL_X
    s, c = np.sin(t), np.cos(t)
    aa = a[..., None]
    bb = b[..., None]
    with np.errstate(over="ignore", invalid="ignore"):
        expo = -(aa * aa - 2.0 * aa * bb * s + bb * bb) / (2.0 * c * c)
        integrand = np.exp(np.where(np.isfinite(expo), expo, -np.inf))
    integral = top * (integrand @ _GL_W) / (2.0 * math.pi)
    return np.clip(base + integral, 0.0, 1.0)


class GaussianCopula:
    """Gaussian copula with correlation matrix ``corr``."""

    name = "gaussian"

    def __init__(self, corr):
        corr = _validate_correlation(corr)
        if corr.shape[0] < 2:
            raise InvalidParameterError("copula dimension must be at least 2")
        self.corr = corr
        self.dim = corr.shape[0]
        self._chol = np.linalg.cholesky(corr)
        self._inv = np.linalg.inv(corr)
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))

    def to_dict(self):
        return {"kind": "gaussian", "corr": self.corr.tolist()}

    def cdf(self, u):
        u = np.atleast_2d(_clamp_unit(u))
        z = special.ndtri(u)
        if self.dim == 2:
            out = bivariate_normal_cdf(z[:, 0], z[:, 1], self.corr[0, 1])
        else:
            mvn = stats.multivariate_normal(mean=np.zeros(self.dim), cov=self.corr)
            out = np.atleast_1d(mvn.cdf(z, abseps=1e-10, releps=1e-10))
        return out if out.shape[0] > 1 else float(out[0])

    def log_pdf(self, u):
        u = np.atleast_2d(_clamp_unit(u))
        z = special.ndtri(u)
        quad = np.einsum("ni,ij,nj->n", z, self._inv - np.eye(self.dim), z)
        out = -0.5 * self._logdet - 0.5 * quad
        return out if out.shape[0] > 1 else float(out[0])

    def pdf(self, u):
        return np.exp(self.log_pdf(u))

    def sample(self, n, rng):
        gen, _ = as_generator(rng)
        z = gen.standard_normal((int(n), self.dim)) @ self._chol.T
        return special.ndtr(z)

    def sample_normal(self, n, rng):
        gen, _ = as_generator(rng)
        return gen.standard_normal((int(n), self.dim)) @ self._chol.T


class ClaytonCopula:
    """Bivariate Clayton copula ``C(u, v) = (u^-t + v^-t - 1)^(-1/t)``, ``t > 0``."""

    name = "clayton"
    dim = 2

    def __init__(self, theta):
        theta = float(theta)
        if not (math.isfinite(theta) and theta > 0):
            raise InvalidParameterError(f"Clayton theta must be > 0, got {theta}")
        self.theta = theta

    def to_dict(self):
        return {"kind": "clayton", "theta": self.theta}

    def _split(self, u):
        u = np.atleast_2d(_clamp_unit(u))
        if u.shape[1] != 2:
            raise DomainError("Clayton copula is bivariate")
        return u[:, 0], u[:, 1]

    def cdf(self, u):
        a, b = self._split(u)
        t = self.theta
        # expm1/log1p keep the small-theta (independence) limit accurate
        s = np.expm1(-t * np.log(a)) + np.expm1(-t * np.log(b))
        out = np.exp(-np.log1p(s) / t)
        return out if out.shape[0] > 1 else float(out[0])

    def log_pdf(self, u):
        a, b = self._split(u)
        t = self.theta
        la, lb = np.log(a), np.log(b)
        s = np.expm1(-t * la) + np.expm1(-t * lb)
        out = math.log1p(t) + (-t - 1.0) * (la + lb) + (-1.0 / t - 2.0) * np.log1p(s)
        return out if out.shape[0] > 1 else float(out[0])

    def pdf(self, u):
        return np.exp(self.log_pdf(u))

    def sample(self, n, rng):
        """Conditional inversion: draw ``u``, then ``v`` from ``C(v | u)``."""
        gen, _ = as_generator(rng)
        u = gen.random(int(n))
        w = gen.random(int(n))
        t = self.theta
        u = _clamp_unit(u)
        w = _clamp_unit(w)
        v = ((w ** (-t / (1.0 + t)) - 1.0) * u ** (-t) + 1.0) ** (-1.0 / t)
        return np.column_stack([u, v])


def copula_from_dict(spec):
    kind = spec.get("kind")
    if kind == "gaussian":
        return GaussianCopula(spec["corr"])
    if kind == "clayton":
        return ClaytonCopula(spec["theta"])
    raise InvalidParameterError(f"unknown copula kind {kind!r}")


class JointDistribution:
    """Marginals coupled independently or through a copula."""

    def __init__(self, marginals, copula=None):
        marginals = list(marginals)
        if not marginals:
            raise InvalidParameterError("at least one marginal is required")
        for m in marginals:
            if not isinstance(m, UnivariateDistribution):
                raise InvalidParameterError(f"marginal {m!r} is not a distribution")
        if copula is not None and copula.dim != len(marginals):
            raise InvalidParameterError(
                f"copula dimension {copula.dim} != number of marginals {len(marginals)}"
            )
        self.marginals = tuple(marginals)
        self.copula = copula

    @property
    def dim(self):
        return len(self.marginals)

    @property
    def is_independent(self):
        return self.copula is None

    def to_dict(self):
        return {
            "marginals": [m.to_dict() for m in self.marginals],
            "copula": None if self.copula is None else self.copula.to_dict(),
        }

    def _check_x(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}")
        return x

    def log_pdf(self, x):
        x = self._check_x(x)
        with np.errstate(divide="ignore"):
            out = sum(np.asarray(m.log_pdf(x[:, i])) for i, m in enumerate(self.marginals))
            if self.copula is not None:
                inside = np.isfinite(out)
                u = np.column_stack([m.cdf(x[:, i]) for i, m in enumerate(self.marginals)])
                cop = np.full(x.shape[0], -np.inf)
                if np.any(inside):
                    cop[inside] = np.atleast_1d(self.copula.log_pdf(u[inside]))
                out = out + cop
        return out if out.shape[0] > 1 else float(out[0])

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def cdf(self, x):
        x = self._check_x(x)
        u = np.column_stack([m.cdf(x[:, i]) for i, m in enumerate(self.marginals)])
        if self.copula is None:
            out = np.prod(u, axis=1)
        else:
            out = np.atleast_1d(self.copula.cdf(u))
            out = np.where(np.any(u <= 0, axis=1), 0.0, out)
        return out if out.shape[0] > 1 else float(out[0])

    def rvs(self, n, rng):
        """``n`` draws as an ``(n, d)`` array."""
        gen, _ = as_generator(rng)
        n = int(n)
        if self.copula is None:
            return np.column_stack([m.rvs(n, gen) for m in self.marginals])
        if isinstance(self.copula, GaussianCopula):
            z = self.copula.sample_normal(n, gen)
            return np.column_stack(
                [m.from_standard_normal(z[:, i]) for i, m in enumerate(self.marginals)]
            )
        u = _clamp_unit(self.copula.sample(n, gen))
        return np.column_stack([m.icdf(u[:, i]) for i, m in enumerate(self.marginals)])


def as_joint(dist):
    """Wrap a univariate distribution or a list of marginals as a joint."""
    if isinstance(dist, JointDistribution):
        return dist
    if isinstance(dist, UnivariateDistribution):
        return JointDistribution([dist])
    return JointDistribution(dist)


def rvs(dist, n, rng):
    """Draw ``n`` samples from a univariate or joint distribution as a SampleSet."""
    if n < 1:
        raise DomainError("n must be at least 1")
    gen, record = as_generator(rng)
    joint = as_joint(dist)
    return SampleSet(joint.rvs(n, gen), seed_record=record)
