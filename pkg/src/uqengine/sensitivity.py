"""Global sensitivity analysis.

Estimators
----------
Morris
    ``p`` grid levels on the unit cube, jump ``D = p / (2 (p - 1))`` (half
    the grid). Each coordinate of a trajectory moves up by ``D`` when its
    level index is below ``p/2`` and down otherwise, so moves never leave
    the grid. Elementary effects are ``(g(x') - g(x)) / (+-D)`` in unit-cube
    units. Marginals with infinite support map the end levels ``0`` and ``1``
    to the probabilities ``clip`` and ``1 - clip``.
Sobol (pick-freeze)
    ``A``, ``B`` independent ``n x d`` designs and ``A_B^(i)`` = ``A`` with
    column ``i`` from ``B``; ``n (d + 2)`` model runs. First order by the
    Janon estimator on ``(y_B, y_ABi)``, total order by the Jansen estimator
    ``mean((y_A - y_ABi)^2) / (2 V)`` with ``V`` the variance of ``y_A`` and
    ``y_B`` pooled.
Cramer-von Mises
    Same design; the Janon numerator and denominator are applied to the
    indicators ``1{y <= t}`` and summed over ``m_grid`` empirical quantiles
    ``t`` of the output before taking the ratio.
Chatterjee
    Rank coefficient ``xi`` after a stable sort by ``x``. Ranks use the
    max-rank convention; with ties in ``y`` the tie-corrected denominator
    ``2 sum l_i (n - l_i)`` replaces ``n^2 - 1``.
PCE
    Indices read off the coefficients of an orthonormal expansion.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._random import as_generator
from .distributions import as_joint
from .errors import InvalidParameterError, UndefinedIndicesError, UnsupportedCouplingError
from .model_runner import as_model, evaluate


@dataclass(frozen=True)
class SensitivityResult:
    method: str
    n_model_evals: int
    first_order: np.ndarray | None = None
    total_order: np.ndarray | None = None
    mu: np.ndarray | None = None
    mu_star: np.ndarray | None = None
    sigma: np.ndarray | None = None
    first_order_stderr: np.ndarray | None = None
    total_order_stderr: np.ndarray | None = None
    first_order_ci: np.ndarray | None = None
    total_order_ci: np.ndarray | None = None
    seed_record: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        out = {}
        for key, value in asdict(self).items():
            if value is None:
                continue
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


def _independent_marginals(joint):
    joint = as_joint(joint)
    if not joint.is_independent:
        raise UnsupportedCouplingError("this sensitivity method requires independent inputs")
    return joint.marginals


def _scalar_outputs(model, X, workers):
    return evaluate(as_model(model), X, workers)[:, 0]


def _to_physical(marginals, U, clip=0.0):
    cols = []
    for k, m in enumerate(marginals):
        u = U[:, k]
        lo, hi = m.support
        if clip > 0 and (math.isinf(lo) or math.isinf(hi)):
            u = np.clip(u, clip, 1.0 - clip)
        cols.append(m.unit_to_physical(u))
    return np.column_stack(cols)


# --- Morris ----------------------------------------------------------------------


def morris(model, joint, n_trajectories=10, n_levels=4, rng=None, clip=1e-3, workers=1):
    """Morris elementary-effects screening with ``r (d + 1)`` model runs."""
    marginals = _independent_marginals(joint)
    d = len(marginals)
    r, p = int(n_trajectories), int(n_levels)
    if p < 2 or p % 2:
        raise InvalidParameterError("n_levels must be an even integer >= 2")
    if r < 2:
        raise InvalidParameterError("n_trajectories must be >= 2")
    gen, record = as_generator(rng)
    delta = p / (2.0 * (p - 1))
    half = p // 2
    points = np.empty((r, d + 1, d))
    moves = np.empty((r, d), dtype=int)
    signs = np.empty((r, d))
    for t in range(r):
        level = gen.integers(0, p, size=d)
        order = gen.permutation(d)
        x = level / (p - 1.0)
        points[t, 0] = x
        for step, k in enumerate(order):
            up = level[k] < half
            x = x.copy()
            x[k] = (level[k] + (half if up else -half)) / (p - 1.0)
            points[t, step + 1] = x
            moves[t, step] = k
            signs[t, step] = 1.0 if up else -1.0
    X = _to_physical(marginals, points.reshape(-1, d), clip)
    y = _scalar_outputs(model, X, workers).reshape(r, d + 1)
    ee = np.empty((r, d))
    for t in range(r):
        for step in range(d):
            ee[t, moves[t, step]] = (y[t, step + 1] - y[t, step]) / (signs[t, step] * delta)
    return SensitivityResult(
        method="morris",
        n_model_evals=r * (d + 1),
        mu=ee.mean(axis=0),
        mu_star=np.abs(ee).mean(axis=0),
        sigma=ee.std(axis=0, ddof=1),
        seed_record=record,
        metadata={"n_levels": p, "delta": delta, "n_trajectories": r},
    )


# --- Sobol and Cramer-von Mises --------------------------------------------------


def _pick_freeze(model, joint, n, gen, workers):
    marginals = _independent_marginals(joint)
    d = len(marginals)
    n = int(n)
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    U = gen.random((n, 2 * d))
    A = _to_physical(marginals, U[:, :d])
    B = _to_physical(marginals, U[:, d:])
    blocks = [A, B]
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        blocks.append(ABi)
    y = _scalar_outputs(model, np.vstack(blocks), workers).reshape(d + 2, n)
    return y[0], y[1], y[2:], n * (d + 2)


def _janon_parts(yb, yab):
    m = np.mean((yb + yab) / 2.0, axis=-1)
    num = np.mean(yb * yab, axis=-1) - m**2
    den = np.mean((yb**2 + yab**2) / 2.0, axis=-1) - m**2
    return num, den


def _sobol_indices(ya, yb, yab):
    var = np.var(np.concatenate([ya, yb]))
    if not var > 0:
        raise UndefinedIndicesError("model output has zero variance; Sobol indices are undefined")
    num, den = _janon_parts(yb[None, :], yab)
    if np.any(den <= 0):
        raise UndefinedIndicesError("zero variance in a pick-freeze pair")
    first = num / den
    total = np.mean((ya[None, :] - yab) ** 2, axis=1) / (2.0 * var)
    return first, total


def _bootstrap(stat, n, n_boot, gen):
    reps = [stat(gen.integers(0, n, size=n)) for _ in range(n_boot)]
    s1 = np.array([a for a, _ in reps])
    st = np.array([b for _, b in reps])
    ci = lambda s: np.percentile(s, [2.5, 97.5], axis=0).T  # noqa: E731
    return s1.std(axis=0, ddof=1), st.std(axis=0, ddof=1), ci(s1), ci(st)


def sobol(model, joint, n=1024, rng=None, bootstrap=0, workers=1):
    """First (Janon) and total (Jansen) Sobol indices with ``n (d + 2)`` runs.

    ``bootstrap`` > 0 adds percentile 95% intervals and standard errors from
    that many resamples of the design rows (500 is a good choice).
    """
    gen, record = as_generator(rng)
    ya, yb, yab, evals = _pick_freeze(model, joint, n, gen, workers)
    first, total = _sobol_indices(ya, yb, yab)
    extra = {}
    if bootstrap:
        se1, set_, ci1, cit = _bootstrap(lambda i: _sobol_indices(ya[i], yb[i], yab[:, i]), len(ya), int(bootstrap), gen)
        extra = dict(first_order_stderr=se1, total_order_stderr=set_, first_order_ci=ci1, total_order_ci=cit)
    return SensitivityResult(
        method="sobol",
        n_model_evals=evals,
        first_order=first,
        total_order=total,
        seed_record=record,
        metadata={"first_order_estimator": "janon", "total_order_estimator": "jansen",
                  "n": int(n), "bootstrap": int(bootstrap)},
        **extra,
    )


def _cvm_indices(ya, yb, yab, m_grid):
    pooled = np.concatenate([ya, yb])
    if np.ptp(pooled) == 0:
        raise UndefinedIndicesError("model output is constant; Cramer-von Mises indices are undefined")
    t = np.quantile(pooled, (np.arange(m_grid) + 0.5) / m_grid)
    ib = (yb[None, :] <= t[:, None]).astype(float)
    num = np.zeros(yab.shape[0])
    den = np.zeros(yab.shape[0])
    for i in range(yab.shape[0]):
        iab = (yab[i][None, :] <= t[:, None]).astype(float)
        a, b = _janon_parts(ib, iab)
        num[i], den[i] = a.sum(), b.sum()
    if np.any(den <= 0):
        raise UndefinedIndicesError("indicator outputs have zero variance")
    return num / den


def cramer_von_mises(model, joint, n=1024, m_grid=100, rng=None, workers=1):
    """Cramer-von Mises indices on the Sobol pick-freeze design."""
    gen, record = as_generator(rng)
    ya, yb, yab, evals = _pick_freeze(model, joint, n, gen, workers)
    return SensitivityResult(
        method="cramer_von_mises",
        n_model_evals=evals,
        first_order=_cvm_indices(ya, yb, yab, int(m_grid)),
        seed_record=record,
        metadata={"estimator": "janon_on_indicators", "m_grid": int(m_grid), "n": int(n)},
    )


# --- Chatterjee ------------------------------------------------------------------


def chatterjee(x, y):
    """Chatterjee's rank correlation ``xi`` of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if n != y.size:
        raise InvalidParameterError("x and y must have the same length")
    if n < 3:
        raise InvalidParameterError("need at least 3 points")
    if np.ptp(x) == 0:
        raise UndefinedIndicesError("x is constant; xi is undefined")
    ys = y[np.argsort(x, kind="stable")]
    sorted_y = np.sort(ys)
    r = np.searchsorted(sorted_y, ys, side="right")
    diffs = int(np.sum(np.abs(np.diff(r))))
    if np.unique(ys).size == n:
        return 1.0 - 3.0 * diffs / (n * n - 1.0)
    l = n - np.searchsorted(sorted_y, ys, side="left")
    denom = 2.0 * float(np.sum(l * (n - l)))
    if denom == 0:
        raise UndefinedIndicesError("y is constant; xi is undefined")
    return 1.0 - n * diffs / denom


def chatterjee_indices(model, joint, n=1000, rng=None, workers=1):
    """Chatterjee ``xi`` of the output on each input from ``n`` Monte Carlo runs."""
    marginals = _independent_marginals(joint)
    gen, record = as_generator(rng)
    X = _to_physical(marginals, gen.random((int(n), len(marginals))))
    y = _scalar_outputs(model, X, workers)
    xi = np.array([chatterjee(X[:, k], y) for k in range(X.shape[1])])
    return SensitivityResult(
        method="chatterjee",
        n_model_evals=int(n),
        first_order=xi,
        seed_record=record,
        metadata={"ties": "max-rank, tie-corrected denominator"},
    )


# --- PCE -------------------------------------------------------------------------


def pce_sensitivity(pce):
    """First and total Sobol indices from PCE coefficients (no model runs)."""
    idx = pce.basis.multi_indices
    c2 = np.asarray(pce.coefficients) ** 2
    nonconst = idx.any(axis=1)
    V = float(np.sum(c2[nonconst]))
    if not V > 0:
        raise UndefinedIndicesError("PCE has zero variance; indices are undefined")
    d = idx.shape[1]
    active = idx > 0
    only = active & (active.sum(axis=1) == 1)[:, None]
    first = np.array([np.sum(c2[only[:, i]]) for i in range(d)]) / V
    total = np.array([np.sum(c2[active[:, i]]) for i in range(d)]) / V
    return SensitivityResult(
        method="pce",
        n_model_evals=0,
        first_order=first,
        total_order=total,
        metadata={"variance": V, "basis_size": int(idx.shape[0])},
    )
