"""Gaussian process regression (Kriging when noise-free).

The prior mean is constant: by default the training mean ``y_bar``
(``mean="constant"``), or zero (``mean="zero"``). With centered targets
``c = y - y_bar`` the log marginal likelihood is

    ``-1/2 c^T (K + s_n^2 I)^-1 c - 1/2 log|K + s_n^2 I| - n/2 log(2 pi)``

and is maximized over log lengthscales, log signal variance and (optionally)
log noise variance with L-BFGS-B using the analytic gradient
``1/2 tr((a a^T - K^-1) dK)``, ``a = K^-1 c``. Restart points are drawn
uniformly in log space inside the bounds.

If the Cholesky factorization fails, a jitter of ``1e-10``, ``1e-8`` and
then ``1e-6`` times the mean diagonal is added before giving up with
:class:`IllConditionedError`.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .._random import as_generator
from ..errors import IllConditionedError, InvalidParameterError
from .kernels import Kernel

log = logging.getLogger(__name__)

SCHEMA = "uqengine.gpr/1"
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


def _factorize(K, noise):
    n = K.shape[0]
    scale = float(np.mean(np.diag(K))) + noise
    for jitter in JITTER_LADDER:
        try:
            L = cholesky(K + (noise + jitter * scale) * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
        return L, jitter * scale
    raise IllConditionedError("covariance matrix is not positive definite even with jitter 1e-6")


def _centered(y, mean):
    if mean == "constant":
        return float(np.mean(y))
    if mean == "zero":
        return 0.0
    raise InvalidParameterError(f"mean must be 'constant' or 'zero', got {mean!r}")


def log_marginal_likelihood(kernel, noise, X, y, mean="constant", gradient=False, noise_grad=False):
    """Log marginal likelihood and, optionally, its gradient in log parameters.

    The gradient is ordered ``[log l_1..log l_d, log s2]`` plus ``log s_n^2``
    when ``noise_grad`` is true.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    c = np.asarray(y, dtype=float) - _centered(y, mean)
    n = X.shape[0]
    if gradient:
        K, dKs = kernel.gram_and_grads(X)
    else:
        K = kernel.gram(X)
    L, _ = _factorize(K, noise)
    a = cho_solve((L, True), c)
    lml = -0.5 * c @ a - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)
    if not gradient:
        return float(lml)
    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(a, a) - Kinv
    if noise_grad:
        dKs = dKs + [noise * np.eye(n)]
    grad = np.array([0.5 * np.sum(W * dK) for dK in dKs])
    return float(lml), grad


@dataclass(frozen=True)
class GprModel:
    """Fitted Gaussian process; immutable, prediction is reentrant."""

    kernel: Kernel
    noise_variance: float
    X_train: np.ndarray
    y_train: np.ndarray
    mean: str = "constant"
    lml: float = float("nan")
    restarts: tuple = ()
    y_offset: float = field(init=False)
    jitter: float = field(init=False)
    chol_K: np.ndarray = field(init=False, repr=False)
    alpha_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        K = self.kernel.gram(self.X_train)
        L, jitter = _factorize(K, self.noise_variance)
        offset = _centered(self.y_train, self.mean)
        object.__setattr__(self, "y_offset", offset)
        object.__setattr__(self, "jitter", jitter)
        object.__setattr__(self, "chol_K", L)
        object.__setattr__(self, "alpha_weights", cho_solve((L, True), self.y_train - offset))

    def predict(self, X):
        """Posterior mean and variance (latent, without noise) at ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim < 2:
            X = X.reshape(-1, 1) if self.X_train.shape[1] == 1 else X.reshape(1, -1)
        Ks = self.kernel.gram(self.X_train, X)
        mean = self.y_offset + Ks.T @ self.alpha_weights
        v = solve_triangular(self.chol_K, Ks, lower=True)
        var = self.kernel.diag(X) - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def __call__(self, X):
        return self.predict(X)[0]

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "kernel": self.kernel.to_dict(),
            "noise_variance": self.noise_variance,
            "mean": self.mean,
            "lml": self.lml,
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA:
            raise InvalidParameterError(f"unsupported GPR schema {data.get('schema')!r}")
        return cls(
            kernel=Kernel.from_dict(data["kernel"]),
            noise_variance=float(data["noise_variance"]),
            X_train=np.asarray(data["X_train"], dtype=float),
            y_train=np.asarray(data["y_train"], dtype=float),
            mean=data.get("mean", "constant"),
            lml=float(data.get("lml", "nan")),
        )


def default_bounds(X, y, optimize_noise):
    """Log-space bounds: lengthscales in [1e-3, 1e3] x input range, signal
    variance in [1e-6, 1e6] x var(y), noise in [1e-10, 1] x var(y)."""
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    vy = float(np.var(y))
    vy = vy if vy > 0 else 1.0
    lo = [*np.log(1e-3 * span), math.log(1e-6 * vy)]
    hi = [*np.log(1e3 * span), math.log(1e6 * vy)]
    if optimize_noise:
        lo.append(math.log(1e-10 * vy))
        hi.append(math.log(vy))
    return np.array(lo), np.array(hi)


def gpr_fit(X, y, kernel="rbf", nu=None, noise=0.0, optimize=True, bounds=None,
            n_restarts=10, rng=None, mean="constant"):
    """Fit a Gaussian process by maximum marginal likelihood.

    Parameters
    ----------
    kernel : str or Kernel
        ``"rbf"``/``"matern"``, or a Kernel whose hyperparameters are kept
        fixed when ``optimize`` is false.
    noise : float or "optimize"
        Fixed noise variance, or optimize it jointly with the kernel.
    bounds : (lower, upper), optional
        Log-space bounds on the parameter vector; see :func:`default_bounds`.
    n_restarts : int
        Number of uniformly drawn starting points.
    """
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if len(y) != n:
        raise InvalidParameterError(f"X has {n} rows but y has {len(y)} values")
    if n < 1 or not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise InvalidParameterError("training data must be non-empty and finite")
    opt_noise = isinstance(noise, str)
    if opt_noise and noise != "optimize":
        raise InvalidParameterError("noise must be a number or 'optimize'")
    if not opt_noise and noise < 0:
        raise InvalidParameterError("noise variance must be >= 0")
    base = kernel if isinstance(kernel, Kernel) else Kernel(kernel, (1.0,) * d, 1.0, nu)
    if base.dim != d:
        raise InvalidParameterError(f"kernel has {base.dim} lengthscales for {d}-dimensional inputs")

    if not optimize:
        if opt_noise:
            raise InvalidParameterError("noise='optimize' requires optimize=True")
        lml = log_marginal_likelihood(base, noise, X, y, mean)
        return GprModel(base, float(noise), X, y, mean, lml)

    lo, hi = default_bounds(X, y, opt_noise) if bounds is None else map(np.asarray, bounds)

    def unpack(theta):
        k = base.with_params(np.exp(theta[:d]), math.exp(theta[d]))
        return k, (math.exp(theta[d + 1]) if opt_noise else float(noise))

    def objective(theta):
        k, s_n = unpack(theta)
        try:
            val, grad = log_marginal_likelihood(k, s_n, X, y, mean, gradient=True, noise_grad=opt_noise)
        except IllConditionedError:
            return 1e25, np.zeros_like(theta)
        return -val, -grad

    gen, _ = as_generator(rng)
    starts = gen.uniform(lo, hi, size=(max(1, int(n_restarts)), len(lo)))
    best, restarts = None, []
    for theta0 in starts:
        f0 = objective(theta0)[0]
        res = minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)))
        theta, fval = (res.x, res.fun) if res.fun <= f0 else (theta0, f0)
        restarts.append({"initial_lml": -f0, "final_lml": -fval})
        log.debug("GPR restart: lml %.6g -> %.6g", -f0, -fval)
        if best is None or fval < best[1]:
            best = (theta, fval)
    if best[1] >= 1e25:
        raise IllConditionedError("no restart produced a factorizable covariance matrix")
    k, s_n = unpack(best[0])
    return GprModel(k, s_n, X, y, mean, -best[1], tuple(restarts))
