"""Failure-probability estimation: FORM, SORM and subset simulation.

Failure is ``g(x) <= 0``. Every method works in standard normal space U;
the limit state is evaluated as ``G(u) = g(T^-1(u))`` with the Nataf map
``T`` built from the input joint distribution.

Finite-difference steps in U-space default to ``1e-6`` for gradients and
``1e-4`` for Hessians. SORM uses Breitung's asymptotic correction with the
curvature sign convention that positive curvature means the failure surface
bends away from the origin (smaller failure probability than FORM).

The subset-simulation coefficient of variation follows Au & Beck:
``cov^2 = sum_j (1 - P_j) / (N P_j) * (1 + gamma_j)`` where ``gamma_j``
accounts for the correlation between states of the same Markov chain
(``gamma_0 = 0`` for the Monte Carlo level).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ._random import as_generator
from .distributions import JointDistribution, Normal
from .errors import BreitungError, DomainError, InvalidParameterError, ModelSpecError, SingularGradientError
from .model_runner import as_model, evaluate
from .sampling.mcmc import mmh_candidates
from .transformations import NatafTransform

log = logging.getLogger(__name__)

GRAD_STEP = 1e-6
HESS_STEP = 1e-4
CURVATURE_TOL = 1e-8


class LimitState:
    """Scalar limit-state function of random inputs.

    Parameters
    ----------
    model : InProcessModel, ExternalModel or callable
        Maps a physical input point to a scalar ``g``.
    joint : JointDistribution, optional
        Input distribution; independent or Gaussian-copula coupled. Defaults
        to ``dim`` independent standard normals.
    dim : int, optional
        Input dimension when ``joint`` is omitted.
    workers : int
        Worker count passed to the model runner for every batch.
    """

    def __init__(self, model, joint=None, dim=None, workers=1, transform=None):
        self.model = as_model(model)
        if self.model.output_dim not in (None, 1):
            raise ModelSpecError("a limit-state model must return a scalar")
        if joint is None:
            if dim is None:
                raise InvalidParameterError("give either a joint distribution or dim")
            joint = JointDistribution([Normal(0.0, 1.0)] * int(dim))
        self.joint = joint
        self.transform = transform if transform is not None else NatafTransform.from_joint(joint)
        self.workers = workers
        self.n_evals = 0

    @property
    def dim(self):
        return self.joint.dim

    def g_x(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = evaluate(self.model, x, self.workers, index_offset=self.n_evals)[:, 0]
        self.n_evals += x.shape[0]
        return out

    def g_u(self, u):
        return self.g_x(self.transform.inverse(np.atleast_2d(u)))


@dataclass(frozen=True)
class FormResult:
    beta: float
    u_star: np.ndarray
    x_star: np.ndarray
    alpha: np.ndarray
    pf: float
    iterations: int
    converged: bool
    g_history: tuple
    grad_star: np.ndarray
    n_model_evals: int

    def to_dict(self):
        return {
            "method": "form",
            "algorithm": "hl-rf",
            "beta": self.beta,
            "pf": self.pf,
            "design_point": self.x_star.tolist(),
            "design_point_u": self.u_star.tolist(),
            "alpha": self.alpha.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "n_model_evals": self.n_model_evals,
        }


def _gradient(ls, u, g0, step):
    d = u.size
    pts = np.vstack([u + step * np.eye(d), u - step * np.eye(d)])
    vals = ls.g_u(pts)
    return (vals[:d] - vals[d:]) / (2.0 * step)


def form(ls, u0=None, tol_u=1e-6, tol_g=1e-6, max_iter=100, fd_step=GRAD_STEP):
    """First-order reliability method by the HL-RF iteration.

    ``u_{k+1} = [(grad . u_k - G(u_k)) / |grad|^2] grad``; converged when the
    step is at most ``tol_u`` and ``|G(u_k)| <= tol_g |G(u0)|``. Hitting
    ``max_iter`` returns a result with ``converged=False``.
    """
    d = ls.dim
    u = np.zeros(d) if u0 is None else np.asarray(u0, dtype=float).copy()
    evals_start = ls.n_evals
    g = float(ls.g_u(u)[0])
    if not math.isfinite(g):
        raise DomainError("limit state is not finite at the starting point")
    g_scale = abs(g) if g != 0 else 1.0
    history = [g]
    converged = False
    it = 0
    grad = None
    for it in range(1, max_iter + 1):
        grad = _gradient(ls, u, g, fd_step)
        norm2 = float(grad @ grad)
        if norm2 == 0.0 or not math.isfinite(norm2):
            raise SingularGradientError(f"limit-state gradient vanished at iteration {it}")
        u_new = ((grad @ u - g) / norm2) * grad
        step = float(np.linalg.norm(u_new - u))
        log.debug("FORM iter %d: g=%.6e |grad|=%.6e beta=%.8f step=%.3e",
                  it, g, math.sqrt(norm2), np.linalg.norm(u_new), step)
        done = step <= tol_u and abs(g) <= tol_g * g_scale
        u = u_new
        g = float(ls.g_u(u)[0])
        history.append(g)
        if done:
            converged = True
            break
    grad = _gradient(ls, u, g, fd_step)
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        raise SingularGradientError("limit-state gradient vanished at the design point")
    alpha = -grad / gnorm
    beta = float(np.linalg.norm(u))
    if alpha @ u < 0:
        beta = -beta
    if not converged:
        log.warning("FORM did not converge in %d iterations", max_iter)
    return FormResult(
        beta=beta,
        u_star=u,
        x_star=ls.transform.inverse(u[None, :])[0],
        alpha=alpha,
        pf=float(ndtr(-beta)),
        iterations=it,
        converged=converged,
        g_history=tuple(history),
        grad_star=grad,
        n_model_evals=ls.n_evals - evals_start,
    )


@dataclass(frozen=True)
class SormResult:
    pf: float
    pf_form: float
    beta: float
    curvatures: np.ndarray
    n_model_evals: int
    correction: str = "breitung"
    form_result: FormResult | None = field(default=None, repr=False)

    def to_dict(self):
        out = {
            "method": "sorm",
            "correction": self.correction,
            "pf": self.pf,
            "pf_form": self.pf_form,
            "beta": self.beta,
            "curvatures": self.curvatures.tolist(),
            "n_model_evals": self.n_model_evals,
        }
        if self.form_result is not None:
            out["design_point"] = self.form_result.x_star.tolist()
            out["iterations"] = self.form_result.iterations
        return out


def _hessian(ls, u, g0, step, grad):
    d = u.size
    eye = np.eye(d)
    pts, index = [], {}
    for i in range(d):
        for sgn in (1, -1):
            index[(i, sgn)] = len(pts)
            pts.append(u + sgn * step * eye[i])
    for i in range(d):
        for j in range(i + 1, d):
            for si in (1, -1):
                for sj in (1, -1):
                    index[(i, j, si, sj)] = len(pts)
                    pts.append(u + step * (si * eye[i] + sj * eye[j]))
    vals = ls.g_u(np.array(pts))
    # rounding floor of a second difference; near the design point g ~ 0 but
    # the terms it is built from are of size ~ |g| + |grad|(|u| + 1)
    scale = float(np.max(np.abs(vals))) + np.linalg.norm(grad) * (np.linalg.norm(u) + 1.0)
    noise = 16.0 * np.finfo(float).eps * scale / step**2
    H = np.empty((d, d))
    for i in range(d):
        H[i, i] = (vals[index[(i, 1)]] - 2.0 * g0 + vals[index[(i, -1)]]) / step**2
        for j in range(i + 1, d):
            H[i, j] = H[j, i] = (
                vals[index[(i, j, 1, 1)]] - vals[index[(i, j, 1, -1)]]
                - vals[index[(i, j, -1, 1)]] + vals[index[(i, j, -1, -1)]]
            ) / (4.0 * step**2)
    return H, noise


def rotation_with_last(alpha):
    """Orthonormal matrix whose last column is ``alpha`` (Gram-Schmidt)."""
    d = alpha.size
    basis = [alpha / np.linalg.norm(alpha)]
    for e in np.eye(d)[np.argsort(-np.abs(alpha))[::-1]]:
        v = e.copy()
        for b in basis:
            v -= (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-10:
            basis.append(v / nv)
        if len(basis) == d:
            break
    return np.column_stack(basis[1:] + basis[:1])


def sorm(fr, ls, fd_step=HESS_STEP):
    """Second-order correction of a converged FORM result (Breitung).

    Principal curvatures are the eigenvalues of the tangential block of
    ``Q^T H Q / |grad G|`` with ``Q`` orthonormal and its last column equal
    to ``alpha``. A tangential Hessian block with norm at most ``1e-8`` (or
    below the rounding floor of the finite differences, if larger) is treated
    as flat, so SORM returns the FORM probability exactly.
    """
    if not fr.converged:
        raise InvalidParameterError("SORM requires a converged FORM result")
    evals_start = ls.n_evals
    d = ls.dim
    u = fr.u_star
    g0 = float(ls.g_u(u)[0])
    H, noise = _hessian(ls, u, g0, fd_step, fr.grad_star)
    gnorm = float(np.linalg.norm(fr.grad_star))
    Q = rotation_with_last(fr.alpha)
    A = Q.T @ H @ Q
    block = A[: d - 1, : d - 1]
    if d == 1 or np.linalg.norm(block) <= max(CURVATURE_TOL, d * noise):
        kappa = np.zeros(d - 1)
    else:
        kappa = np.linalg.eigvalsh(0.5 * (block + block.T)) / gnorm
    factors = 1.0 + fr.beta * kappa
    if np.any(factors <= 0):
        raise BreitungError(f"1 + beta*kappa <= 0 for curvatures {kappa.tolist()}")
    pf = fr.pf * float(np.prod(factors ** -0.5))
    return SormResult(
        pf=pf,
        pf_form=fr.pf,
        beta=fr.beta,
        curvatures=kappa,
        n_model_evals=ls.n_evals - evals_start,
        form_result=fr,
    )


@dataclass(frozen=True)
class SubsetResult:
    pf: float
    cov: float
    thresholds: tuple
    n_levels: int
    samples_per_level: int
    conditional_probabilities: tuple
    converged: bool
    n_model_evals: int
    seed_record: dict

    def to_dict(self):
        return {
            "method": "subset",
            "mcmc": "modified_metropolis_hastings",
            "cov_estimator": "au_beck",
            "pf": self.pf,
            "cov": self.cov,
            "thresholds": list(self.thresholds),
            "n_levels": self.n_levels,
            "samples_per_level": self.samples_per_level,
            "conditional_probabilities": list(self.conditional_probabilities),
            "converged": self.converged,
            "n_model_evals": self.n_model_evals,
        }


def _chain_gamma(indicator):
    """Au-Beck correlation factor for indicators of shape (n_chains, length)."""
    n_chains, length = indicator.shape
    N = indicator.size
    p = indicator.mean()
    r0 = p * (1.0 - p)
    if length < 2 or r0 <= 0:
        return 0.0
    gamma = 0.0
    for k in range(1, length):
        rk = np.sum(indicator[:, : length - k] * indicator[:, k:]) / (N - k * n_chains) - p * p
        gamma += (1.0 - k / length) * rk / r0
    return 2.0 * gamma


def _log_phi(v, k):
    return -0.5 * v * v


def subset_simulation(ls, n_per_level=1000, p0=0.1, proposal_scale=1.0, max_levels=20, rng=None):
    """Subset simulation with modified Metropolis-Hastings conditional sampling.

    Level 0 is plain Monte Carlo in U-space. Each following level starts one
    chain from each of the ``n_per_level * p0`` samples with the smallest
    ``g`` and grows it to ``1/p0`` states (seed included) under the
    constraint ``g <= b``, where ``b`` is the current threshold. The chains
    advance in lockstep so each step is one model batch.
    """
    n = int(n_per_level)
    n_seeds = n * p0
    if not (0 < p0 < 1) or abs(n_seeds - round(n_seeds)) > 1e-9 or round(n_seeds) < 1:
        raise InvalidParameterError("need 0 < p0 < 1 with n_per_level * p0 a positive integer")
    n_seeds = int(round(n_seeds))
    if n % n_seeds:
        raise InvalidParameterError("n_per_level must be a multiple of n_per_level * p0")
    chain_len = n // n_seeds
    gen, record = as_generator(rng)
    d = ls.dim
    evals_start = ls.n_evals
    scale = np.broadcast_to(np.asarray(proposal_scale, dtype=float), (d,))

    u = gen.standard_normal((n, d))
    g = ls.g_u(u)
    indicator_shape = (n, 1)  # level 0: independent samples
    thresholds, probs, deltas2 = [], [], []
    converged = False
    for level in range(max_levels):
        order = np.argsort(g, kind="stable")
        b = float(g[order[n_seeds - 1]])
        stalled = bool(thresholds) and b >= thresholds[-1]
        final = b <= 0 or stalled or level == max_levels - 1
        if final:
            p_level = float(np.mean(g <= 0))
            ind = (g <= 0).reshape(indicator_shape)
        else:
            p_level = p0
            ind = (g <= b).reshape(indicator_shape)
        gamma = _chain_gamma(ind)
        if p_level > 0:
            deltas2.append((1.0 - p_level) / (n * p_level) * (1.0 + gamma))
        probs.append(p_level)
        if not stalled:
            thresholds.append(b)
        log.info("subset level %d: threshold %.6g, conditional p %.4g", level, b, p_level)
        if final:
            converged = b <= 0
            if stalled:
                log.warning("subset simulation stalled at threshold %.6g", b)
            break
        seeds = order[:n_seeds]
        states = np.empty((n_seeds, chain_len, d))
        gvals = np.empty((n_seeds, chain_len))
        cur, gcur = u[seeds].copy(), g[seeds].copy()
        states[:, 0], gvals[:, 0] = cur, gcur
        for step in range(1, chain_len):
            cand = mmh_candidates(cur, _log_phi, scale, gen)
            moved = np.flatnonzero(np.any(cand != cur, axis=1))
            if moved.size:
                g_c = ls.g_u(cand[moved])
                ok = g_c <= b
                cur[moved[ok]] = cand[moved[ok]]
                gcur[moved[ok]] = g_c[ok]
            states[:, step], gvals[:, step] = cur, gcur
        u = states.reshape(n, d)
        g = gvals.reshape(n)
        indicator_shape = (n_seeds, chain_len)

    if not converged:
        log.warning("subset simulation stopped after %d levels without reaching g <= 0", len(probs))
    pf = float(np.prod(probs))
    cov = float(math.sqrt(sum(deltas2))) if pf > 0 else math.inf
    return SubsetResult(
        pf=pf,
        cov=cov,
        thresholds=tuple(thresholds),
        n_levels=len(probs),
        samples_per_level=n,
        conditional_probabilities=tuple(probs),
        converged=converged,
        n_model_evals=ls.n_evals - evals_start,
        seed_record=record,
    )
