"""Static (non-Markov) sample designs."""

import math

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import logsumexp

from .._random import as_generator
from ..distributions import JointDistribution, UnivariateDistribution, as_joint
from ..errors import DegenerateWeightsError, DomainError, InvalidParameterError, UnsupportedCouplingError
from ..samples import SampleSet

LHS_CRITERIA = ("random", "centered", "maximin")


def monte_carlo(joint, n, rng):
    """Plain Monte Carlo: ``n`` i.i.d. draws from ``joint``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    gen, record = as_generator(rng)
    x = as_joint(joint).rvs(n, gen)
    return SampleSet(x, seed_record=record)


def _independent_marginals(marginals):
    if isinstance(marginals, JointDistribution):
        if not marginals.is_independent:
            raise UnsupportedCouplingError("this design requires independent marginals")
        return list(marginals.marginals)
    if isinstance(marginals, UnivariateDistribution):
        return [marginals]
    return list(marginals)


def _to_physical(marginals, u):
    return np.column_stack([m.unit_to_physical(u[:, k]) for k, m in enumerate(marginals)])


def _lhs_unit(n, d, gen, centered):
    offsets = np.full((n, d), 0.5) if centered else gen.random((n, d))
    u = np.empty((n, d))
    for k in range(d):
        u[:, k] = (gen.permutation(n) + offsets[:, k]) / n
    return u


def min_distance(points):
    """Smallest pairwise Euclidean distance between rows."""
    return float(pdist(points).min()) if len(points) > 1 else math.inf


def latin_hypercube(marginals, n, criterion="random", rng=None, n_candidates=100):
    """Latin hypercube design mapped through the marginal quantile functions.

    Parameters
    ----------
    marginals : sequence of UnivariateDistribution or independent JointDistribution
    n : int
        Number of points; each dimension gets exactly one point per bin of
        width ``1/n``.
    criterion : {'random', 'centered', 'maximin'}
        ``centered`` puts points at bin midpoints, ``maximin`` keeps the best
        of ``n_candidates`` random designs by minimum pairwise distance in the
        unit cube.
    """
    marginals = _independent_marginals(marginals)
    criterion = str(criterion).lower()
    if criterion not in LHS_CRITERIA:
        raise InvalidParameterError(f"unknown LHS criterion {criterion!r}")
    if n < 1:
        raise DomainError("n must be at least 1")
    gen, record = as_generator(rng)
    d = len(marginals)
    if criterion == "maximin":
        best, best_dist = None, -1.0
        for _ in range(int(n_candidates)):
            cand = _lhs_unit(n, d, gen, centered=False)
            dist = min_distance(cand)
            if dist > best_dist:
                best, best_dist = cand, dist
        u = best
    else:
        u = _lhs_unit(n, d, gen, centered=criterion == "centered")
    record = dict(record, design="lhs", criterion=criterion)
    return SampleSet(_to_physical(marginals, u), seed_record=record)


class RectangularStrata:
    """Axis-aligned partition of the unit hypercube.

    Parameters
    ----------
    lows, highs : array_like, shape (k, d)
        Lower and upper corners of each stratum.
    """

    def __init__(self, lows, highs):
        lows = np.array(lows, dtype=float, ndmin=2)
        highs = np.array(highs, dtype=float, ndmin=2)
        if lows.shape != highs.shape:
            raise InvalidParameterError("lows and highs must have the same shape")
        if np.any(lows < 0) or np.any(highs > 1):
            raise InvalidParameterError("strata must lie inside the unit hypercube")
        if np.any(highs <= lows):
            raise InvalidParameterError("degenerate stratum: every low must be < high")
        volumes = np.prod(highs - lows, axis=1)
        if abs(volumes.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"strata volumes sum to {volumes.sum()!r}, expected 1")
        k = lows.shape[0]
        for i in range(k):
            overlap = np.minimum(highs[i], highs[i + 1:]) - np.maximum(lows[i], lows[i + 1:])
            if np.any(np.all(overlap > 1e-15, axis=1)):
                raise InvalidParameterError(f"stratum {i} overlaps another stratum")
        self.lows = lows
        self.highs = highs
        self.volumes = volumes

    @classmethod
    def grid(cls, divisions):
        """Equal grid with ``divisions[k]`` cells along dimension ``k``."""
        divisions = [int(v) for v in np.atleast_1d(divisions)]
        edges = [np.linspace(0.0, 1.0, m + 1) for m in divisions]
        idx = np.array(np.meshgrid(*[np.arange(m) for m in divisions], indexing="ij"))
        idx = idx.reshape(len(divisions), -1).T
        lows = np.column_stack([edges[k][idx[:, k]] for k in range(len(divisions))])
        highs = np.column_stack([edges[k][idx[:, k] + 1] for k in range(len(divisions))])
        return cls(lows, highs)

    @property
    def n_strata(self):
        return self.lows.shape[0]

    @property
    def dim(self):
        return self.lows.shape[1]


def stratified(strata, marginals, per_stratum=1, rng=None):
    """True stratified sampling: uniform draws inside each stratum.

    Sample weights are ``volume / count`` of the stratum they fall in.
    """
    marginals = _independent_marginals(marginals)
    if strata.dim != len(marginals):
        raise InvalidParameterError("strata dimension does not match the number of marginals")
    counts = np.broadcast_to(np.asarray(per_stratum, dtype=int), (strata.n_strata,))
    if np.any(counts < 1):
        raise InvalidParameterError("per-stratum counts must be >= 1")
    gen, record = as_generator(rng)
    u_parts, w_parts = [], []
    for i in range(strata.n_strata):
        c = int(counts[i])
        r = gen.random((c, strata.dim))
        u_parts.append(strata.lows[i] + r * (strata.highs[i] - strata.lows[i]))
        w_parts.append(np.full(c, strata.volumes[i] / c))
    u = np.vstack(u_parts)
    w = np.concatenate(w_parts)
    w = w / w.sum()
    return SampleSet(_to_physical(marginals, u), weights=w, seed_record=dict(record, design="stratified"))


def simplex(vertices, n, rng):
    """Uniform samples inside a simplex given by ``d+1`` vertices.

    Barycentric weights are the spacings of ``d`` sorted uniforms, i.e.
    Dirichlet(1, ..., 1).
    """
    v = np.array(vertices, dtype=float, ndmin=2)
    d = v.shape[1]
    if v.shape[0] != d + 1:
        raise InvalidParameterError(f"a {d}-simplex needs {d + 1} vertices, got {v.shape[0]}")
    volume = abs(np.linalg.det(v[1:] - v[0])) / math.factorial(d)
    if volume < 1e-14:
        raise InvalidParameterError(f"degenerate simplex (volume {volume:.3g})")
    gen, record = as_generator(rng)
    s = np.sort(gen.random((int(n), d)), axis=1)
    s = np.hstack([np.zeros((int(n), 1)), s, np.ones((int(n), 1))])
    bary = np.diff(s, axis=1)
    return SampleSet(bary @ v, seed_record=dict(record, design="simplex"))


def importance_sampling(proposal, log_target, n, rng):
    """Draw from ``proposal`` and weight by ``exp(log_target - log_proposal)``.

    ``log_target`` maps an ``(n, d)`` array to ``n`` log densities (it may be
    unnormalized).
    """
    gen, record = as_generator(rng)
    joint = as_joint(proposal)
    x = joint.rvs(int(n), gen)
    log_q = np.atleast_1d(joint.log_pdf(x))
    log_p = np.asarray(log_target(x), dtype=float).reshape(-1)
    log_w = log_p - log_q
    log_w = np.where(np.isnan(log_w), -np.inf, log_w)
    if not np.any(np.isfinite(log_w)) or np.any(log_w == np.inf):
        raise DegenerateWeightsError("importance weights are all zero or non-finite")
    w = np.exp(log_w - logsumexp(log_w))
    w = w / w.sum()
    return SampleSet(x, weights=w, seed_record=dict(record, design="importance"))


def resample(s, m, rng):
    """Multinomial resampling of a weighted SampleSet into ``m`` equal-weight points."""
    if s.weights is None:
        raise InvalidParameterError("resampling requires a weighted SampleSet")
    gen, record = as_generator(rng)
    idx = gen.choice(s.n, size=int(m), replace=True, p=s.weights)
    return SampleSet(s.samples[idx], seed_record=dict(record, design="resample"), space_tag=s.space_tag)
