import itertools
import json
import math

import numpy as np
import pytest
from scipy.stats import qmc

from uqengine.distributions import Lognormal, Normal, Uniform
from uqengine.errors import IllConditionedError, InvalidParameterError, RankDeficientError
from uqengine.sampling import latin_hypercube
from uqengine.surrogates import (
    GprModel,
    Kernel,
    Lars,
    PceModel,
    Ridge,
    build_basis,
    gpr_fit,
    log_marginal_likelihood,
    pce_fit,
    polynomial_eval,
)
from uqengine.surrogates.gpr import _factorize

KERNELS = [("rbf", None), ("matern", 0.5), ("matern", 1.5), ("matern", 2.5), ("matern", math.inf)]


# --- kernels ---------------------------------------------------------------------


def test_rbf_closed_form():
    k = Kernel("rbf", (1.0, 1.0))
    assert k.gram([[0, 0]], [[1, 1]])[0, 0] == pytest.approx(math.exp(-1))


def test_matern_half_closed_form():
    k = Kernel("matern", (1.0,), nu=0.5)
    assert k.gram([[0.0]], [[1.0]])[0, 0] == pytest.approx(math.exp(-1))


def test_matern_closed_forms_3_2_and_5_2():
    r = 0.7
    k32 = Kernel("matern", (1.0,), 2.0, nu=1.5).gram([[0.0]], [[r]])[0, 0]
    k52 = Kernel("matern", (1.0,), 2.0, nu=2.5).gram([[0.0]], [[r]])[0, 0]
    s3, s5 = math.sqrt(3) * r, math.sqrt(5) * r
    assert k32 == pytest.approx(2 * (1 + s3) * math.exp(-s3))
    assert k52 == pytest.approx(2 * (1 + s5 + s5**2 / 3) * math.exp(-s5))


@pytest.mark.parametrize("kind,nu", KERNELS)
def test_kernel_diagonal_is_signal_variance(kind, nu):
    k = Kernel(kind, (0.3, 2.0), 1.7, nu)
    X = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_allclose(np.diag(k.gram(X)), 1.7)


def test_matern_inf_is_rbf():
    X = np.random.default_rng(1).normal(size=(6, 3))
    a = Kernel("matern", (0.5, 1, 2), 1.3, math.inf).gram(X)
    b = Kernel("rbf", (0.5, 1, 2), 1.3).gram(X)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind,nu", KERNELS)
def test_gram_psd_random_trials(kind, nu):
    rng = np.random.default_rng(2)
    for _ in range(100):
        d = rng.integers(1, 4)
        k = Kernel(kind, tuple(rng.uniform(0.1, 3, d)), rng.uniform(0.1, 5), nu)
        K = k.gram(rng.normal(size=(15, d)))
        np.testing.assert_allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


@pytest.mark.parametrize("kind,nu", KERNELS)
def test_gram_gradients_match_finite_differences(kind, nu):
    X = np.random.default_rng(3).normal(size=(7, 2))
    theta = np.log([0.8, 1.6, 1.3])

    def gram(t):
        return Kernel(kind, tuple(np.exp(t[:2])), math.exp(t[2]), nu).gram(X)

    _, grads = Kernel(kind, tuple(np.exp(theta[:2])), math.exp(theta[2]), nu).gram_and_grads(X)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (gram(theta + e) - gram(theta - e)) / (2 * h)
        np.testing.assert_allclose(grads[j], fd, atol=1e-7)


def test_kernel_validation():
    with pytest.raises(InvalidParameterError):
        Kernel("matern", (1.0,), nu=0.7)
    with pytest.raises(InvalidParameterError):
        Kernel("rbf", (0.0,))
    with pytest.raises(InvalidParameterError):
        Kernel("cosine", (1.0,))


# --- GPR -------------------------------------------------------------------------


@pytest.mark.parametrize("kind,nu", KERNELS)
@pytest.mark.parametrize("noise_grad", [False, True])
def test_lml_gradient_matches_finite_differences(kind, nu, noise_grad):
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(12, 2))
    y = np.sin(4 * X[:, 0]) + X[:, 1] + 0.05 * rng.normal(size=12)
    theta = np.log([0.4, 0.9, 0.8, 0.01])

    def lml(t, grad=False):
        k = Kernel(kind, tuple(np.exp(t[:2])), math.exp(t[2]), nu)
        return log_marginal_likelihood(k, math.exp(t[3]), X, y, gradient=grad, noise_grad=noise_grad)

    _, g = lml(theta, True)
    h = 1e-5
    for j in range(3 + noise_grad):
        e = np.zeros(4)
        e[j] = h
        fd = (lml(theta + e) - lml(theta - e)) / (2 * h)
        assert g[j] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def test_gpr_interpolates_training_data():
    X = np.random.default_rng(5).uniform(-2, 2, size=(15, 2))
    y = X[:, 0] ** 2 - np.cos(X[:, 1])
    m = gpr_fit(X, y, noise=0.0, rng=0)
    mean, var = m.predict(X)
    np.testing.assert_allclose(mean, y, atol=1e-8)
    assert var.max() <= 1e-8


def test_gpr_sin_generalization():
    x = np.linspace(0, 2 * np.pi, 8)
    m = gpr_fit(x, np.sin(x), kernel="rbf", noise=1e-10, rng=0)
    xt = np.linspace(0.1, 2 * np.pi - 0.1, 50)
    assert np.sqrt(np.mean((m(xt) - np.sin(xt)) ** 2)) < 0.05


def test_gpr_constant_data():
    X = np.random.default_rng(6).uniform(size=(10, 2))
    m = gpr_fit(X, np.full(10, 4.2), noise="optimize", rng=0)
    Xt = np.random.default_rng(7).uniform(0.2, 0.8, size=(20, 2))
    np.testing.assert_allclose(m(Xt), 4.2, atol=1e-6)


def test_gpr_restarts_never_worsen_lml():
    x = np.linspace(0, 1, 10)
    m = gpr_fit(x, np.exp(x) * np.sin(6 * x), kernel="matern", nu=2.5, rng=3)
    assert len(m.restarts) == 10
    for r in m.restarts:
        assert r["final_lml"] >= r["initial_lml"]
    assert m.lml == pytest.approx(max(r["final_lml"] for r in m.restarts))


def test_gpr_reverts_to_prior_far_away():
    x = np.linspace(0, 1, 6)
    m = gpr_fit(x, x**2, rng=0)
    _, var = m.predict([[1e4]])
    assert var[0] == pytest.approx(m.kernel.signal_variance, abs=1e-6)
    assert m(np.array([[1e4]]))[0] == pytest.approx(np.mean(x**2))


def test_gpr_one_point_closed_form():
    k = Kernel("rbf", (0.7,), 2.0)
    m = gpr_fit([[0.3]], [1.5], kernel=k, noise=0.1, optimize=False, mean="zero")
    xs = np.array([[0.3], [1.0]])
    kx = 2.0 * np.exp(-0.5 * ((xs[:, 0] - 0.3) / 0.7) ** 2)
    mean, var = m.predict(xs)
    np.testing.assert_allclose(mean, kx * 1.5 / 2.1)
    np.testing.assert_allclose(var, 2.0 - kx**2 / 2.1)


def test_gpr_variance_bounds():
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(20, 1))
    m = gpr_fit(X, np.sin(5 * X[:, 0]) + 0.1 * rng.normal(size=20), noise="optimize", rng=1)
    _, var = m.predict(np.linspace(-1, 2, 300)[:, None])
    assert var.min() >= 0
    assert var.max() <= m.kernel.signal_variance + m.noise_variance + 1e-8


def test_factorize_ill_conditioned():
    with pytest.raises(IllConditionedError):
        _factorize(np.array([[1.0, 2.0], [2.0, 1.0]]), 0.0)


def test_gpr_jitter_rescues_duplicates():
    m = gpr_fit([[0.0], [0.0], [1.0]], [1.0, 1.0, 2.0], kernel=Kernel("rbf", (1.0,)), optimize=False)
    assert m.jitter > 0


def test_gpr_json_roundtrip():
    x = np.linspace(0, 3, 7)
    m = gpr_fit(x, np.cos(x), kernel="matern", nu=1.5, rng=0)
    m2 = GprModel.from_dict(json.loads(json.dumps(m.to_dict())))
    xt = np.linspace(0, 3, 11)
    np.testing.assert_allclose(m2.predict(xt)[0], m.predict(xt)[0], rtol=1e-12)
    assert m.to_dict()["schema"].startswith("uqengine.gpr")


# --- polynomials -----------------------------------------------------------------


def test_degree_zero_is_one():
    for fam in ("hermite", "legendre"):
        np.testing.assert_array_equal(polynomial_eval(fam, 0, np.array([-0.3, 2.0])), 1.0)


def test_hermite_two_at_zero():
    assert polynomial_eval("hermite", 2, 0.0) == pytest.approx(-1 / math.sqrt(2))


def test_orthonormality_by_quadrature():
    xh, wh = np.polynomial.hermite_e.hermegauss(64)
    wh = wh / math.sqrt(2 * math.pi)
    xl, wl = np.polynomial.legendre.leggauss(64)
    wl = wl / 2
    for fam, x, w in (("hermite", xh, wh), ("legendre", xl, wl)):
        P = np.array([polynomial_eval(fam, k, x) for k in range(7)])
        np.testing.assert_allclose((P * w) @ P.T, np.eye(7), atol=1e-8)


# --- basis -----------------------------------------------------------------------


def test_basis_sizes():
    assert build_basis("total_degree", 2, 2).size == 6
    assert build_basis("tensor", 2, 2).size == 9
    assert build_basis("total_degree", 4, 3).size == math.comb(7, 3)
    assert build_basis("tensor", 3, 2).size == 27


def test_basis_graded_order():
    idx = [tuple(a) for a in build_basis("total_degree", 2, 2).multi_indices]
    assert idx == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_hyperbolic_q1_is_total_degree():
    a = build_basis("hyperbolic", 3, 4, q=1.0).multi_indices
    b = build_basis("total_degree", 3, 4).multi_indices
    np.testing.assert_array_equal(a, b)


def test_hyperbolic_half_enumeration_oracle():
    basis = build_basis("hyperbolic", 3, 3, q=0.5)
    got = {tuple(a) for a in basis.multi_indices}
    brute = {a for a in itertools.product(range(4), repeat=3) if sum(math.sqrt(v) for v in a) ** 2 <= 3 + 1e-9}
    assert got == brute
    total = {tuple(a) for a in build_basis("total_degree", 3, 3).multi_indices}
    assert got < total
    assert {(3, 0, 0), (0, 3, 0), (0, 0, 3)} <= got


# --- PCE -------------------------------------------------------------------------


def _normals(d):
    return [Normal(0.0, 1.0)] * d


def test_pce_linear_exact_recovery():
    X = latin_hypercube(_normals(2), 50, rng=0).samples
    m = pce_fit(X, 2 + 3 * X[:, 0], build_basis("total_degree", 2, 2), _normals(2))
    assert m.coefficients[0] == pytest.approx(2, abs=1e-8)
    assert m.coefficients[1] == pytest.approx(3, abs=1e-8)
    assert np.all(np.abs(m.coefficients[2:]) <= 1e-8)
    mean, var = m.moments()
    assert mean == pytest.approx(2, abs=1e-8) and var == pytest.approx(9, abs=1e-6)


def test_pce_affine_normal_map():
    marg = [Normal(5.0, 2.0), Normal(-1.0, 0.5)]
    X = latin_hypercube(marg, 40, rng=1).samples
    m = pce_fit(X, X[:, 0] * X[:, 1], build_basis("total_degree", 2, 2), marg)
    Xt = np.random.default_rng(2).normal(size=(30, 2)) * 3
    np.testing.assert_allclose(m(Xt), Xt[:, 0] * Xt[:, 1], atol=1e-8)
    assert m.mean() == pytest.approx(-5.0, abs=1e-8)


def test_pce_legendre_projection():
    marg = [Uniform(0.0, 2.0), Uniform(-1.0, 1.0)]
    X = latin_hypercube(marg, 60, rng=3).samples
    z1 = X[:, 0] - 1.0
    y = polynomial_eval("legendre", 2, z1)
    m = pce_fit(X, y, build_basis("total_degree", 2, 3), marg)
    k = [tuple(a) for a in m.basis.multi_indices].index((2, 0))
    assert m.coefficients[k] == pytest.approx(1.0, abs=1e-8)
    assert m.basis.families == ("legendre", "legendre")


def test_pce_generic_marginal_map():
    marg = [Lognormal(0.0, 1.0)]
    X = Lognormal(0.0, 1.0).rvs(30, np.random.default_rng(4))[:, None]
    m = pce_fit(X, np.log(X[:, 0]), build_basis("total_degree", 1, 3), marg)
    np.testing.assert_allclose(m.coefficients, [0, 1, 0, 0], atol=1e-8)


def test_pce_lars_picks_signal_first():
    X = np.random.default_rng(5).normal(size=(40, 2))
    basis = build_basis("total_degree", 2, 3)
    assert basis.size == 10
    m = pce_fit(X, 3 * X[:, 1], basis, _normals(2), Lars())
    assert tuple(basis.multi_indices[m.active[0]]) == (0, 1)
    assert m.coefficients[2] == pytest.approx(3.0, abs=1e-8)


def test_pce_lars_sparse_recovery_underdetermined():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 5))
    basis = build_basis("total_degree", 5, 3)
    assert basis.size > 30
    y = 1 + 2 * X[:, 0] + 0.5 * (X[:, 2] ** 2 - 1) / math.sqrt(2)
    m = pce_fit(X, y, basis, _normals(5), "lars")
    Xt = rng.normal(size=(100, 5))
    yt = 1 + 2 * Xt[:, 0] + 0.5 * (Xt[:, 2] ** 2 - 1) / math.sqrt(2)
    np.testing.assert_allclose(m(Xt), yt, atol=1e-8)


def test_pce_rank_deficient_suggests_alternatives():
    X = np.random.default_rng(7).normal(size=(5, 2))
    with pytest.raises(RankDeficientError, match="ridge.*lars"):
        pce_fit(X, X[:, 0], build_basis("total_degree", 2, 3), _normals(2))


def test_ridge_does_not_shrink_constant():
    X = np.random.default_rng(8).normal(size=(200, 1))
    m = pce_fit(X, 7 + 0.0 * X[:, 0], build_basis("total_degree", 1, 2), _normals(1), Ridge(1e3))
    assert m.mean() == pytest.approx(7.0, abs=1e-10)
    y = 7 + X[:, 0]
    shrunk = pce_fit(X, y, build_basis("total_degree", 1, 2), _normals(1), Ridge(1e3))
    assert abs(shrunk.coefficients[1]) < 0.5


def test_pce_constant_model():
    basis = build_basis("total_degree", 2, 2).with_families(("hermite", "hermite"))
    m = PceModel(basis, np.array([5.0, 0, 0, 0, 0, 0]), tuple(_normals(2)))
    np.testing.assert_array_equal(m(np.random.default_rng(0).normal(size=(4, 2))), 5.0)
    assert m.variance() == 0.0


def test_pce_moments_vs_monte_carlo():
    basis = build_basis("total_degree", 2, 3).with_families(("hermite", "legendre"))
    coef = np.random.default_rng(9).normal(size=basis.size)
    m = PceModel(basis, coef, (Normal(0, 1), Uniform(-1, 1)))
    rng = np.random.default_rng(10)
    X = np.column_stack([rng.normal(size=10**6), rng.uniform(-1, 1, 10**6)])
    y = m(X)
    se = y.std() / 1e3
    assert abs(y.mean() - m.mean()) < 4 * se
    assert y.var() == pytest.approx(m.variance(), rel=0.02)


def test_pce_json_roundtrip():
    marg = [Uniform(-1, 3), Normal(2, 1)]
    X = latin_hypercube(marg, 80, rng=11).samples
    m = pce_fit(X, X[:, 0] ** 2 + X[:, 1], build_basis("hyperbolic", 2, 4, q=0.7), marg)
    m2 = PceModel.from_dict(json.loads(json.dumps(m.to_dict())))
    np.testing.assert_array_equal(m2.coefficients, m.coefficients)
    Xt = qmc.scale(qmc.Sobol(2, seed=0).random(8), [-1, 0], [3, 4])
    np.testing.assert_allclose(m2(Xt), m(Xt), rtol=1e-14)
