"""Polynomial chaos expansions.

A PCE represents ``y(x) ~ sum_a c_a Psi_a(z(x))`` where ``Psi_a`` is a
product of orthonormal univariate polynomials and ``z`` maps each physical
input to the standard variable of its polynomial family:

* Normal marginal with Hermite: ``z = (x - mu) / sigma``
* Uniform(a, b) with Legendre: ``z = 2 (x - a) / (b - a) - 1``
* any other marginal with Hermite: ``z = Phi^-1(F(x))``
* any other marginal with Legendre: ``z = 2 F(x) - 1``

By default Uniform marginals get Legendre polynomials and everything else
Hermite. With an orthonormal basis the mean is the constant coefficient and
the variance is the sum of the remaining squared coefficients.

Coefficients come from one of three regressors: least squares (QR), ridge
(the constant term is not penalized) or least-angle regression, whose path
point is chosen by the leave-one-out error of an ordinary least-squares
refit on the active set (hat-matrix identity, no extra model runs).
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from ..distributions import distribution_from_dict
from ..errors import InvalidParameterError, RankDeficientError
from .polynomials import FAMILIES, evaluate_all

SCHEMA = "uqengine.pce/1"
TRUNCATIONS = ("tensor", "total_degree", "hyperbolic")


# --- basis ---------------------------------------------------------------------


def _total_degree(d, p):
    if d == 1:
        for k in range(p + 1):
            yield (k,)
        return
    for k in range(p + 1):
        for rest in _total_degree(d - 1, p - k):
            yield (k,) + rest


def _graded_order(indices):
    return sorted(indices, key=lambda a: (sum(a), tuple(-v for v in a)))


@dataclass(frozen=True)
class PceBasis:
    """Set of multi-indices with the polynomial family of each dimension.

    ``families`` may be ``None`` until the basis is paired with marginals in
    :func:`pce_fit`.
    """

    multi_indices: np.ndarray
    truncation: str
    p: int
    q: float = 1.0
    families: tuple | None = None

    @property
    def size(self):
        return self.multi_indices.shape[0]

    @property
    def dim(self):
        return self.multi_indices.shape[1]

    def with_families(self, families):
        families = tuple(families)
        if len(families) != self.dim or any(f not in FAMILIES for f in families):
            raise InvalidParameterError(f"need {self.dim} families from {FAMILIES}, got {families}")
        return PceBasis(self.multi_indices, self.truncation, self.p, self.q, families)

    def design_matrix(self, Z):
        """``Psi[i, j] = prod_k phi_{a_jk}(Z[i, k])``."""
        if self.families is None:
            raise InvalidParameterError("basis families are not set")
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.dim:
            raise InvalidParameterError(f"expected {self.dim} columns, got {Z.shape[1]}")
        Psi = np.ones((Z.shape[0], self.size))
        for k, fam in enumerate(self.families):
            deg = self.multi_indices[:, k]
            vals = evaluate_all(fam, Z[:, k], int(deg.max()))
            Psi *= vals[:, deg]
        return Psi

    def constant_index(self):
        hits = np.flatnonzero(~self.multi_indices.any(axis=1))
        return int(hits[0]) if hits.size else None


def build_basis(truncation, d, p, q=1.0, families=None):
    """Multi-index set in graded lexicographic order.

    ``tensor``: ``max(a) <= p``; ``total_degree``: ``sum(a) <= p``;
    ``hyperbolic``: ``(sum a_i^q)^(1/q) <= p`` with ``0 < q <= 1``.
    """
    d, p = int(d), int(p)
    if d < 1 or p < 0:
        raise InvalidParameterError("need d >= 1 and p >= 0")
    truncation = truncation.lower().replace("-", "_")
    if truncation == "tensor":
        idx = list(itertools.product(range(p + 1), repeat=d))
    elif truncation == "total_degree":
        idx = list(_total_degree(d, p))
    elif truncation == "hyperbolic":
        if not 0 < q <= 1:
            raise InvalidParameterError("hyperbolic q must be in (0, 1]")
        idx = [a for a in _total_degree(d, p) if sum(v**q for v in a) ** (1.0 / q) <= p + 1e-9]
    else:
        raise InvalidParameterError(f"unknown truncation {truncation!r}; use one of {TRUNCATIONS}")
    basis = PceBasis(np.array(_graded_order(idx), dtype=int).reshape(-1, d), truncation, p, float(q))
    return basis if families is None else basis.with_families(families)


# --- input maps ----------------------------------------------------------------


def default_family(marginal):
    return "legendre" if marginal.family == "uniform" else "hermite"


def to_standard(marginal, family, x):
    """Map physical values of one input to the standard variable of ``family``."""
    x = np.asarray(x, dtype=float)
    if family == "hermite":
        if marginal.family == "normal":
            return (x - marginal.mean) / marginal.std
        return marginal.to_standard_normal(x)
    if marginal.family == "uniform":
        return 2.0 * (x - marginal.low) / (marginal.high - marginal.low) - 1.0
    return 2.0 * marginal.cdf(x) - 1.0


# --- regressors ----------------------------------------------------------------


def _loo_relative(Psi_a, y, resid):
    """Relative leave-one-out error of an OLS fit with design ``Psi_a``."""
    Q, _ = np.linalg.qr(Psi_a)
    h = np.sum(Q * Q, axis=1)
    if np.any(h >= 1.0 - 1e-10):
        return math.inf
    loo = resid / (1.0 - h)
    vy = float(np.var(y))
    return float(np.mean(loo**2) / (vy if vy > 0 else 1.0))


class LeastSquares:
    name = "least_squares"

    def fit(self, Psi, y, constant_col):
        n, m = Psi.shape
        Q, R, perm = qr(Psi, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = max(n, m) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
        if n < m or diag.size < m or np.any(diag <= tol):
            raise RankDeficientError(
                f"design matrix ({n} x {m}) is rank deficient; use the 'ridge' or 'lars' regressor "
                "or add samples"
            )
        coef = np.empty(m)
        coef[perm] = solve_triangular(R, Q.T @ y)
        resid = y - Psi @ coef
        return coef, {"loo_error": _loo_relative(Psi, y, resid)}


class Ridge:
    name = "ridge"

    def __init__(self, lam=1e-6):
        if lam < 0:
            raise InvalidParameterError("ridge lambda must be >= 0")
        self.lam = float(lam)

    def fit(self, Psi, y, constant_col):
        m = Psi.shape[1]
        D = np.ones(m)
        if constant_col is not None:
            D[constant_col] = 0.0
        A = Psi.T @ Psi + self.lam * np.diag(D)
        try:
            coef = np.linalg.solve(A, Psi.T @ y)
            h = np.einsum("ij,ji->i", Psi, np.linalg.solve(A, Psi.T))
        except np.linalg.LinAlgError as exc:
            raise RankDeficientError("ridge system is singular; increase lambda") from exc
        resid = y - Psi @ coef
        vy = float(np.var(y))
        loo = math.inf if np.any(h >= 1 - 1e-10) else float(np.mean((resid / (1 - h)) ** 2) / (vy or 1.0))
        return coef, {"loo_error": loo, "lambda": self.lam}


def lars_order(X, y, max_steps):
    """Order in which columns enter the least-angle regression path.

    ``X`` must have standardized columns and ``y`` be centered.
    """
    n, p = X.shape
    active = []
    mu = np.zeros(n)
    scale = np.linalg.norm(y) + 1e-300
    for _ in range(min(max_steps, p)):
        c = X.T @ (y - mu)
        if not active:
            active.append(int(np.argmax(np.abs(c))))
        C = float(np.max(np.abs(c[active])))
        if C <= 1e-12 * scale:
            break
        s = np.sign(c[active])
        XA = X[:, active] * s
        G = XA.T @ XA
        if np.linalg.cond(G) > 1e12:
            active.pop()
            break
        g1 = np.linalg.solve(G, np.ones(len(active)))
        AA = 1.0 / math.sqrt(float(np.sum(g1)))
        u = XA @ (AA * g1)
        a = X.T @ u
        inactive = [j for j in range(p) if j not in active]
        if len(active) >= max_steps or not inactive:
            break
        best_j, best_g = None, math.inf
        for j in inactive:
            for num, den in ((C - c[j], AA - a[j]), (C + c[j], AA + a[j])):
                if abs(den) > 1e-15:
                    gam = num / den
                    if 1e-14 < gam < best_g:
                        best_j, best_g = j, gam
        if best_j is None:
            break
        mu = mu + best_g * u
        active.append(best_j)
    return active


class Lars:
    """Least-angle regression with leave-one-out path-point selection."""

    name = "lars"

    def __init__(self, max_terms=None):
        self.max_terms = max_terms

    def fit(self, Psi, y, constant_col):
        n, m = Psi.shape
        cols = [j for j in range(m) if j != constant_col]
        sd = Psi[:, cols].std(axis=0)
        cols = [j for j, s in zip(cols, sd) if s > 1e-12]
        Xs = Psi[:, cols]
        Xs = (Xs - Xs.mean(axis=0)) / Xs.std(axis=0)
        limit = min(len(cols), n - 2)
        if self.max_terms is not None:
            limit = min(limit, int(self.max_terms))
        order = [cols[k] for k in lars_order(Xs, y - y.mean(), max(limit, 0))]
        intercept = np.ones((n, 1)) if constant_col is None else Psi[:, [constant_col]]
        best = None
        for k in range(len(order) + 1):
            design = np.hstack([intercept, Psi[:, order[:k]]])
            sol, *_ = np.linalg.lstsq(design, y, rcond=None)
            resid = y - design @ sol
            loo = _loo_relative(design, y, resid)
            if best is None or loo < best[0]:
                best = (loo, k, sol)
        loo, k, sol = best
        coef = np.zeros(m)
        if constant_col is not None:
            coef[constant_col] = sol[0]
        coef[order[:k]] = sol[1:]
        return coef, {"loo_error": loo, "active": tuple(order[:k]), "path": tuple(order)}


def make_regressor(spec):
    if not isinstance(spec, str):
        return spec
    key = spec.lower().replace("-", "_")
    if key in ("least_squares", "ols", "lstsq"):
        return LeastSquares()
    if key == "ridge":
        return Ridge()
    if key == "lars":
        return Lars()
    raise InvalidParameterError(f"unknown regressor {spec!r}; use least_squares, ridge or lars")


# --- model ---------------------------------------------------------------------


@dataclass(frozen=True)
class PceModel:
    basis: PceBasis
    coefficients: np.ndarray
    marginals: tuple
    validation_error: float | None = None
    regressor: str = "least_squares"
    active: tuple = ()

    def to_standard(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim < 2:
            X = X.reshape(-1, 1) if self.basis.dim == 1 else X.reshape(1, -1)
        return np.column_stack(
            [to_standard(m, f, X[:, k]) for k, (m, f) in enumerate(zip(self.marginals, self.basis.families))]
        )

    def predict(self, X):
        return self.basis.design_matrix(self.to_standard(X)) @ self.coefficients

    def __call__(self, X):
        return self.predict(X)

    def mean(self):
        k = self.basis.constant_index()
        return 0.0 if k is None else float(self.coefficients[k])

    def variance(self):
        nonconst = self.basis.multi_indices.any(axis=1)
        return float(np.sum(self.coefficients[nonconst] ** 2))

    def moments(self):
        return self.mean(), self.variance()

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "truncation": self.basis.truncation,
            "p": self.basis.p,
            "q": self.basis.q,
            "families": list(self.basis.families),
            "multi_indices": self.basis.multi_indices.tolist(),
            "coefficients": self.coefficients.tolist(),
            "marginals": [m.to_dict() for m in self.marginals],
            "validation_error": self.validation_error,
            "regressor": self.regressor,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA:
            raise InvalidParameterError(f"unsupported PCE schema {data.get('schema')!r}")
        idx = np.asarray(data["multi_indices"], dtype=int)
        basis = PceBasis(idx, data["truncation"], int(data["p"]), float(data["q"]), tuple(data["families"]))
        return cls(
            basis=basis,
            coefficients=np.asarray(data["coefficients"], dtype=float),
            marginals=tuple(distribution_from_dict(m) for m in data["marginals"]),
            validation_error=data.get("validation_error"),
            regressor=data.get("regressor", "least_squares"),
        )


def pce_fit(X, y, basis, marginals, regressor="least_squares"):
    """Fit PCE coefficients by regression on samples ``(X, y)``.

    Parameters
    ----------
    basis : PceBasis
        Families default to Legendre for Uniform marginals and Hermite
        otherwise when the basis has none.
    marginals : sequence of UnivariateDistribution or JointDistribution
    regressor : str or regressor instance
        ``"least_squares"``, ``"ridge"``, ``"lars"``, or ``Ridge(lam)``,
        ``Lars(max_terms)``, ``LeastSquares()``.
    """
    marginals = tuple(getattr(marginals, "marginals", marginals))
    if len(marginals) != basis.dim:
        raise InvalidParameterError(f"basis has {basis.dim} dimensions but {len(marginals)} marginals were given")
    if basis.families is None:
        basis = basis.with_families([default_family(m) for m in marginals])
    X = np.asarray(X, dtype=float)
    X = X.reshape(-1, 1) if X.ndim == 1 else X
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size or y.size < 1:
        raise InvalidParameterError(f"X has {X.shape[0]} rows but y has {y.size} values")
    reg = make_regressor(regressor)
    model = PceModel(basis, np.zeros(basis.size), marginals)
    Psi = basis.design_matrix(model.to_standard(X))
    coef, info = reg.fit(Psi, y, basis.constant_index())
    return PceModel(basis, coef, marginals, info.get("loo_error"), reg.name, tuple(info.get("active", ())))
