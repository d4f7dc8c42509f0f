"""Builtin test functions, vectorized over the rows of ``X``.

=======================  =====  ==============================================
name                     arity  definition
=======================  =====  ==============================================
linear_limit_state       any    ``beta - a.x / |a|`` (default ``a = e_1``)
parabolic_limit_state    2      ``beta - x_1 + c x_2^2``
ishigami                 3      ``sin x_1 + a sin^2 x_2 + b x_3^4 sin x_1``
sobol_g                  any    ``prod (|4 x_i - 2| + a_i) / (1 + a_i)``,
                                default ``a_i = (i - 1) / 2``
branin                   2      ``(x_2 - 5.1 x_1^2/(4 pi^2) + 5 x_1/pi - 6)^2
                                + 10 (1 - 1/(8 pi)) cos x_1 + 10``
=======================  =====  ==============================================
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model_runner import InProcessModel


def linear_limit_state(X, beta=3.0, a=None):
    X = np.atleast_2d(X)
    a = np.eye(X.shape[1])[0] if a is None else np.asarray(a, dtype=float)
    return beta - X @ (a / np.linalg.norm(a))


def parabolic_limit_state(X, beta=3.0, c=0.1):
    X = np.atleast_2d(X)
    return beta - X[:, 0] + c * X[:, 1] ** 2


def ishigami(X, a=7.0, b=0.1):
    X = np.atleast_2d(X)
    return np.sin(X[:, 0]) + a * np.sin(X[:, 1]) ** 2 + b * X[:, 2] ** 4 * np.sin(X[:, 0])


def sobol_g(X, a=None):
    X = np.atleast_2d(X)
    a = np.arange(X.shape[1]) / 2.0 if a is None else np.asarray(a, dtype=float)
    return np.prod((np.abs(4.0 * X - 2.0) + a) / (1.0 + a), axis=1)


def branin(X):
    X = np.atleast_2d(X)
    x1, x2 = X[:, 0], X[:, 1]
    b, c, t = 5.1 / (4 * math.pi**2), 5 / math.pi, 1 / (8 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1 - t) * np.cos(x1) + 10.0


@dataclass(frozen=True)
class Builtin:
    func: object
    arity: int | None
    params: tuple


CATALOG = {
    "linear_limit_state": Builtin(linear_limit_state, None, ("beta", "a")),
    "parabolic_limit_state": Builtin(parabolic_limit_state, 2, ("beta", "c")),
    "ishigami": Builtin(ishigami, 3, ("a", "b")),
    "sobol_g": Builtin(sobol_g, None, ("a",)),
    "branin": Builtin(branin, 2, ()),
}


def builtin_model(name, params=None, dim=None):
    """In-process model for a catalog entry with keyword ``params``."""
    if name not in CATALOG:
        raise InvalidParameterError(f"unknown builtin model {name!r}; available: {sorted(CATALOG)}")
    entry = CATALOG[name]
    params = dict(params or {})
    unknown = set(params) - set(entry.params)
    if unknown:
        raise InvalidParameterError(f"unknown parameters {sorted(unknown)} for {name}")
    if entry.arity is not None and dim is not None and dim != entry.arity:
        raise InvalidParameterError(f"{name} takes {entry.arity} inputs, got {dim}")
    return InProcessModel(lambda X: entry.func(X, **params), vectorized=True,
                          input_dim=entry.arity or dim, name=name)
