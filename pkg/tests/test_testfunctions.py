import numpy as np
import pytest

from uqengine.errors import InvalidParameterError
from uqengine.testfunctions import CATALOG, branin, builtin_model, ishigami, sobol_g


def test_branin_global_minima():
    minima = np.array([[-np.pi, 12.275], [np.pi, 2.275], [9.42478, 2.475]])
    np.testing.assert_allclose(branin(minima), 0.397887, atol=1e-5)


def test_ishigami_known_point():
    x = np.array([[np.pi / 2, np.pi / 2, 1.0]])
    assert ishigami(x)[0] == pytest.approx(1 + 7 + 0.1)


def test_sobol_g_unit_mean():
    # each factor integrates to 1 on [0, 1]; the midpoint grid is exact for |4x - 2|
    t = (np.arange(200) + 0.5) / 200
    X = np.stack(np.meshgrid(t, t), axis=-1).reshape(-1, 2)
    assert sobol_g(X).mean() == pytest.approx(1.0, abs=1e-12)
    assert sobol_g(np.full((1, 4), 0.5))[0] == pytest.approx(np.prod(np.arange(4) / 2 / (1 + np.arange(4) / 2)))


def test_builtin_model_validation():
    with pytest.raises(InvalidParameterError):
        builtin_model("nope")
    with pytest.raises(InvalidParameterError):
        builtin_model("ishigami", {"zzz": 1})
    with pytest.raises(InvalidParameterError):
        builtin_model("ishigami", dim=2)
    assert set(CATALOG) >= {"ishigami", "branin", "linear_limit_state"}
