"""Isoprobabilistic transformations between physical and standard normal space.

The Nataf model couples the marginals with a Gaussian copula whose
correlation ``rho_Z`` is chosen so that the physical-space (Pearson)
correlation equals the requested ``rho_X``.
"""

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import linalg, optimize

from .distributions import GaussianCopula, JointDistribution, Normal
from .errors import DomainError, FactorizationError, InfeasibleCorrelationError, InvalidParameterError

GH_POINTS = 32
ROOT_XTOL = 1e-6
EIG_FLOOR = 1e-10

_GH_Z, _GH_W = hermegauss(GH_POINTS)
_GH_W = _GH_W / np.sqrt(2.0 * np.pi)


def check_correlation(rho):
    """Validate a correlation matrix; returns it as a float array."""
    rho = np.array(rho, dtype=float, ndmin=2)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidParameterError("correlation matrix must be square")
    if not np.allclose(rho, rho.T, atol=1e-12, rtol=0):
        raise InvalidParameterError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(rho), 1.0, atol=1e-12, rtol=0):
        raise InvalidParameterError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(rho) > 1.0 + 1e-12):
        raise InvalidParameterError("correlation coefficients must lie in [-1, 1]")
    return 0.5 * (rho + rho.T)


def cholesky(rho):
    try:
        return np.linalg.cholesky(rho)
    except np.linalg.LinAlgError:
        raise FactorizationError("correlation matrix is not positive definite") from None


def _pair_correlation(mi, mj, rho_z, xi_nodes, mean_i, mean_j, std_i, std_j):
    # tensorized Gauss-Hermite: Z_j = rho Z_i + sqrt(1 - rho^2) W
    zj = rho_z * _GH_Z[:, None] + np.sqrt(max(0.0, 1.0 - rho_z * rho_z)) * _GH_Z[None, :]
    xj = mj.from_standard_normal(zj)
    e_xy = np.einsum("a,b,a,ab->", _GH_W, _GH_W, xi_nodes, xj)
    return (e_xy - mean_i * mean_j) / (std_i * std_j)


def _gh_moments(m):
    x = m.from_standard_normal(_GH_Z)
    mean = _GH_W @ x
    var = _GH_W @ (x - mean) ** 2
    return x, mean, np.sqrt(var)


def distort_correlation(marginals, rho_x):
    """Gaussian-space correlation reproducing ``rho_x`` under the Nataf model.

    Each pair is solved independently by Brent's method on the 32x32
    Gauss-Hermite approximation of the correlation integral. If the
    assembled matrix is not positive definite, negative eigenvalues are
    clipped and the diagonal rescaled to one.
    """
    marginals = list(marginals)
    rho_x = check_correlation(rho_x)
    d = len(marginals)
    if rho_x.shape[0] != d:
        raise InvalidParameterError(
            f"correlation is {rho_x.shape[0]}x{rho_x.shape[0]} but there are {d} marginals"
        )
    for k, m in enumerate(marginals):
        if m.discrete:
            raise InvalidParameterError(f"marginal {k} is discrete; Nataf requires continuous marginals")
        var = m.moments().variance
        if var is None:
            raise InvalidParameterError(f"marginal {k} has no finite variance")
    rho_z = np.eye(d)
    nodes = [_gh_moments(m) for m in marginals]
    for i in range(d):
        for j in range(i + 1, d):
            target = rho_x[i, j]
            if target == 0.0:
                continue
            if isinstance(marginals[i], Normal) and isinstance(marginals[j], Normal):
                rho_z[i, j] = rho_z[j, i] = target
                continue
            xi, mu_i, sd_i = nodes[i]
            _, mu_j, sd_j = nodes[j]

            def residual(r, i=i, j=j, xi=xi, mu_i=mu_i, mu_j=mu_j, sd_i=sd_i, sd_j=sd_j):
                return _pair_correlation(marginals[i], marginals[j], r, xi, mu_i, mu_j, sd_i, sd_j) - target

            lo, hi = -1.0 + 1e-10, 1.0 - 1e-10
            f_lo, f_hi = residual(lo), residual(hi)
            if np.sign(f_lo) == np.sign(f_hi):
                raise InfeasibleCorrelationError(
                    f"correlation {target} between marginals {i} and {j} is not attainable "
                    f"(attainable range approx. [{f_lo + target:.4f}, {f_hi + target:.4f}])"
                )
            root = optimize.brentq(residual, lo, hi, xtol=ROOT_XTOL)
            rho_z[i, j] = rho_z[j, i] = root
    return repair_correlation(rho_z)


def repair_correlation(rho):
    """Nearest-ish PD correlation: clip eigenvalues, restore the unit diagonal."""
    try:
        np.linalg.cholesky(rho)
        return rho
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(rho)
    fixed = (vecs * np.maximum(vals, EIG_FLOOR)) @ vecs.T
    scale = 1.0 / np.sqrt(np.diag(fixed))
    fixed = fixed * np.outer(scale, scale)
    fixed = 0.5 * (fixed + fixed.T)
    np.fill_diagonal(fixed, 1.0)
    return fixed


def correlate(u, rho_z):
    """Map uncorrelated standard normal rows to correlated ones: ``z = u L^T``."""
    rho_z = check_correlation(rho_z)
    L = cholesky(rho_z)
    return np.atleast_2d(np.asarray(u, dtype=float)) @ L.T


def decorrelate(z, rho_z):
    """Inverse of :func:`correlate`."""
    rho_z = check_correlation(rho_z)
    L = cholesky(rho_z)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return linalg.solve_triangular(L, z.T, lower=True).T


class NatafTransform:
    """Nataf map between physical space X and independent standard normals U.

    Parameters
    ----------
    marginals : sequence of UnivariateDistribution
        Continuous marginals with finite variance.
    rho_x : array_like, optional
        Physical-space correlation matrix. ``None`` means independence.
    """

    def __init__(self, marginals, rho_x=None):
        self.marginals = tuple(marginals)
        d = len(self.marginals)
        if rho_x is None:
            self.rho_x = np.eye(d)
            self.rho_z = np.eye(d)
        else:
            self.rho_x = check_correlation(rho_x)
            self.rho_z = distort_correlation(self.marginals, self.rho_x)
        self.chol_L = cholesky(self.rho_z)

    @classmethod
    def from_joint(cls, joint):
        """Transform for a joint distribution (independent or Gaussian copula).

        A Gaussian copula already carries the Gaussian-space correlation, so no
        distortion solve is needed.
        """
        if joint.copula is None:
            return cls(joint.marginals)
        if not isinstance(joint.copula, GaussianCopula):
            raise InvalidParameterError("Nataf requires independent marginals or a Gaussian copula")
        obj = cls(joint.marginals)
        obj.rho_z = joint.copula.corr.copy()
        obj.chol_L = cholesky(obj.rho_z)
        obj.rho_x = None
        return obj

    @property
    def dim(self):
        return len(self.marginals)

    def joint(self):
        """The equivalent JointDistribution (Gaussian copula with ``rho_z``)."""
        if np.array_equal(self.rho_z, np.eye(self.dim)):
            return JointDistribution(self.marginals)
        return JointDistribution(self.marginals, GaussianCopula(self.rho_z))

    def forward(self, x):
        """Physical samples ``x`` (n x d) to standard normal ``u``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise DomainError(f"expected {self.dim} columns, got {x.shape[1]}")
        z = np.empty_like(x)
        for k, m in enumerate(self.marginals):
            lo, hi = m.support
            col = x[:, k]
            bad = (col < lo) | (col > hi) | ~np.isfinite(col)
            if np.any(bad):
                row = int(np.flatnonzero(bad)[0])
                raise DomainError(
                    f"x[{row}, {k}] = {col[row]!r} lies outside the support [{lo}, {hi}] of marginal {k}"
                )
            z[:, k] = m.to_standard_normal(col)
        return linalg.solve_triangular(self.chol_L, z.T, lower=True).T

    def inverse(self, u):
        """Standard normal samples ``u`` (n x d) to physical ``x``."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dim:
            raise DomainError(f"expected {self.dim} columns, got {u.shape[1]}")
        z = u @ self.chol_L.T
        return np.column_stack([m.from_standard_normal(z[:, k]) for k, m in enumerate(self.marginals)])


def nataf_forward(t, x):
    return t.forward(x)


def nataf_inverse(t, u):
    return t.inverse(u)
