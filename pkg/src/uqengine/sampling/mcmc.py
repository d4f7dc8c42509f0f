"""Markov chain Monte Carlo samplers.

All samplers share the bookkeeping in :class:`ChainHistory`: the first
``burn`` steps are discarded, then every ``jump``-th state is kept until
``n_samples`` states per chain are saved (so ``burn + n_samples * jump``
steps run in total). Independent chains use streams seeded
``seed + chain_index``.
"""

from dataclasses import dataclass, field

import numpy as np

from .._random import as_generator, seed_record, stream_generators
from ..errors import DomainError, InvalidParameterError


@dataclass(frozen=True)
class ChainHistory:
    """Saved states of one or more chains.

    Attributes
    ----------
    states : ndarray, shape (n_chains, n_saved, d)
    log_target : ndarray, shape (n_chains, n_saved)
    acceptance_rate : ndarray, shape (n_chains,)
    burn, jump : int
    seed_record : dict
    """

    states: np.ndarray
    log_target: np.ndarray
    acceptance_rate: np.ndarray
    burn: int
    jump: int
    seed_record: dict = field(default_factory=dict)

    @property
    def n_chains(self):
        return self.states.shape[0]

    @property
    def n_saved(self):
        return self.states.shape[1]

    def pooled(self):
        """All saved states stacked chain after chain, shape ``(n_chains*n_saved, d)``."""
        return self.states.reshape(-1, self.states.shape[-1])


def _check_knobs(n_samples, burn, jump):
    if n_samples < 1:
        raise InvalidParameterError("n_samples must be >= 1")
    if burn < 0:
        raise InvalidParameterError("burn must be >= 0")
    if jump < 1:
        raise InvalidParameterError("jump must be >= 1")
    return int(n_samples), int(burn), int(jump)


def _initial_points(init, n_chains, d):
    if init is None:
        return np.zeros((n_chains, d))
    x0 = np.array(init, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (n_chains, d)).copy()
    if x0.shape != (n_chains, d):
        raise InvalidParameterError(f"init must have shape ({n_chains}, {d}) or ({d},)")
    return x0


def _scales(proposal_scale, d):
    s = np.broadcast_to(np.asarray(proposal_scale, dtype=float), (d,)).copy()
    if np.any(s < 0):
        raise InvalidParameterError("proposal scales must be nonnegative")
    return s


def _run_chain(step, x, lp, n_samples, burn, jump):
    """Drive ``step(x, lp) -> (x, lp, accepted)`` and collect saved states."""
    d = x.shape[0]
    states = np.empty((n_samples, d))
    logs = np.empty(n_samples)
    accepted = 0
    total = burn + n_samples * jump
    saved = 0
    for t in range(1, total + 1):
        x, lp, acc = step(x, lp)
        accepted += acc
        if t > burn and (t - burn) % jump == 0:
            states[saved] = x
            logs[saved] = lp
            saved += 1
    return states, logs, accepted / total


def mcmc_mh(log_target, d, proposal_scale=1.0, n_samples=1000, burn=0, jump=1,
            n_chains=1, init=None, rng=None, proposal=None):
    """Random-walk Metropolis-Hastings.

    Parameters
    ----------
    log_target : callable
        Maps a length-``d`` point to its (unnormalized) log density; ``-inf``
        outside the support.
    proposal_scale : float or array_like
        Per-dimension standard deviation of the Gaussian random walk.
    proposal : callable, optional
        Custom symmetric proposal ``proposal(x, generator) -> candidate``;
        replaces the Gaussian walk.
    """
    n_samples, burn, jump = _check_knobs(n_samples, burn, jump)
    x0 = _initial_points(init, n_chains, d)
    scale = _scales(proposal_scale, d)
    gens = stream_generators(rng, n_chains)
    record = seed_record(rng)
    states = np.empty((n_chains, n_samples, d))
    logs = np.empty((n_chains, n_samples))
    rates = np.empty(n_chains)
    for c in range(n_chains):
        gen = gens[c]
        lp0 = float(log_target(x0[c]))
        if not np.isfinite(lp0):
            raise DomainError(f"log_target is not finite at the initial point of chain {c}")

        def step(x, lp, gen=gen):
            if proposal is None:
                cand = x + scale * gen.standard_normal(d)
            else:
                cand = np.asarray(proposal(x, gen), dtype=float)
            lp_c = float(log_target(cand))
            if np.log(gen.random()) < lp_c - lp:
                return cand, lp_c, 1
            return x, lp, 0

        states[c], logs[c], rates[c] = _run_chain(step, x0[c].copy(), lp0, n_samples, burn, jump)
    return ChainHistory(states, logs, rates, burn, jump, dict(record, method="metropolis_hastings"))


def mmh_candidates(x, log_marginal, scale, gen):
    """Component-wise Metropolis proposals for the rows of ``x``.

    Each coordinate is perturbed by a centered normal with its own scale and
    kept with probability ``min(1, f_k(xi_k) / f_k(x_k))``; rejected
    coordinates keep their current value. ``log_marginal(values, k)`` returns
    the log marginal density of coordinate ``k``.
    """
    x = np.atleast_2d(x)
    n, d = x.shape
    xi = x + scale * gen.standard_normal((n, d))
    r = gen.random((n, d))
    cand = x.copy()
    for k in range(d):
        log_ratio = log_marginal(xi[:, k], k) - log_marginal(x[:, k], k)
        keep = np.log(r[:, k]) < log_ratio
        cand[keep, k] = xi[keep, k]
    return cand


def _marginal_caller(log_marginals, d):
    if callable(log_marginals):
        return lambda v, k: np.asarray(log_marginals(v), dtype=float)
    fns = list(log_marginals)
    if len(fns) != d:
        raise InvalidParameterError(f"expected {d} log-marginal functions, got {len(fns)}")
    return lambda v, k: np.asarray(fns[k](v), dtype=float)


def mcmc_mmh(log_marginals, d, constraint=None, proposal_scale=1.0, n_samples=1000,
             burn=0, jump=1, n_chains=1, init=None, rng=None):
    """Modified (component-wise) Metropolis-Hastings.

    Candidates are built coordinate by coordinate against the marginal
    densities, then accepted as a block only if ``constraint(candidate)``
    holds. With a limit-state constraint ``g(x) <= b`` this is the conditional
    sampler of subset simulation.

    Parameters
    ----------
    log_marginals : callable or sequence of callables
        A single vectorized log density used for every coordinate, or one per
        coordinate.
    constraint : callable, optional
        Predicate on a length-``d`` point; ``None`` accepts every candidate.
    """
    n_samples, burn, jump = _check_knobs(n_samples, burn, jump)
    lm = _marginal_caller(log_marginals, d)
    x0 = _initial_points(init, n_chains, d)
    scale = _scales(proposal_scale, d)
    gens = stream_generators(rng, n_chains)
    record = seed_record(rng)

    def log_joint(x):
        return float(sum(lm(np.array([x[k]]), k)[0] for k in range(d)))

    states = np.empty((n_chains, n_samples, d))
    logs = np.empty((n_chains, n_samples))
    rates = np.empty(n_chains)
    for c in range(n_chains):
        gen = gens[c]
        lp0 = log_joint(x0[c])
        if not np.isfinite(lp0):
            raise DomainError(f"log density is not finite at the initial point of chain {c}")

        def step(x, lp, gen=gen):
            cand = mmh_candidates(x[None, :], lm, scale, gen)[0]
            if np.array_equal(cand, x):
                return x, lp, 0
            if constraint is not None and not constraint(cand):
                return x, lp, 0
            return cand, log_joint(cand), 1

        states[c], logs[c], rates[c] = _run_chain(step, x0[c].copy(), lp0, n_samples, burn, jump)
    return ChainHistory(states, logs, rates, burn, jump, dict(record, method="modified_metropolis_hastings"))


def mcmc_stretch(log_target, n_walkers, d=None, a=2.0, n_samples=1000, burn=0, jump=1,
                 init=None, rng=None):
    """Affine-invariant ensemble sampler with the stretch move.

    Walkers are updated one after another. For walker ``k`` a partner ``j`` is
    drawn from the other walkers, ``z`` from ``g(z) ~ 1/sqrt(z)`` on
    ``[1/a, a]``, and ``y = x_j + z (x_k - x_j)`` is accepted with probability
    ``min(1, z^(d-1) p(y)/p(x_k))``.

    ``init`` must hold ``n_walkers`` distinct points; if omitted, walkers
    start from independent standard normals.
    """
    n_samples, burn, jump = _check_knobs(n_samples, burn, jump)
    if a < 1:
        raise InvalidParameterError("stretch scale a must be >= 1")
    gen, record = as_generator(rng)
    if init is None:
        if d is None:
            raise InvalidParameterError("either init or d is required")
        x = gen.standard_normal((n_walkers, d))
    else:
        x = np.array(init, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != n_walkers:
            raise InvalidParameterError(f"init must have {n_walkers} rows")
    d = x.shape[1]
    if n_walkers < 2 * (d + 1):
        raise InvalidParameterError(f"need at least {2 * (d + 1)} walkers for d={d}")
    if np.unique(x, axis=0).shape[0] != n_walkers:
        raise InvalidParameterError("walkers must be initialized at distinct points")
    lp = np.array([float(log_target(w)) for w in x])
    if not np.all(np.isfinite(lp)):
        raise DomainError("log_target is not finite at some initial walker")

    states = np.empty((n_walkers, n_samples, d))
    logs = np.empty((n_walkers, n_samples))
    accepted = np.zeros(n_walkers)
    total = burn + n_samples * jump
    saved = 0
    for t in range(1, total + 1):
        for k in range(n_walkers):
            j = gen.integers(n_walkers - 1)
            j = j + (j >= k)
            z = ((a - 1.0) * gen.random() + 1.0) ** 2 / a
            y = x[k] + (z - 1.0) * (x[k] - x[j])
            lp_y = float(log_target(y))
            log_ratio = (d - 1) * np.log(z) + lp_y - lp[k]
            if np.log(gen.random()) < log_ratio:
                x[k] = y
                lp[k] = lp_y
                accepted[k] += 1
        if t > burn and (t - burn) % jump == 0:
            states[:, saved] = x
            logs[:, saved] = lp
            saved += 1
    return ChainHistory(states, logs, accepted / total, burn, jump, dict(record, method="stretch", a=a))
