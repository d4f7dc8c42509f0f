"""Orthonormal polynomial families for polynomial chaos.

* ``hermite``: probabilists' Hermite ``He_k`` divided by ``sqrt(k!)``;
  orthonormal under the standard normal density.
* ``legendre``: Legendre ``P_k`` scaled by ``sqrt(2k + 1)``; orthonormal
  under the uniform density on ``[-1, 1]``.

Both are evaluated by their three-term recurrences.
"""

import math

import numpy as np

from ..errors import InvalidParameterError

FAMILIES = ("hermite", "legendre")


def _hermite_raw(x, k_max):
    out = np.empty(x.shape + (k_max + 1,))
    out[..., 0] = 1.0
    if k_max >= 1:
        out[..., 1] = x
    for k in range(1, k_max):
        out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
    return out


def _legendre_raw(x, k_max):
    out = np.empty(x.shape + (k_max + 1,))
    out[..., 0] = 1.0
    if k_max >= 1:
        out[..., 1] = x
    for k in range(1, k_max):
        out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
    return out


def evaluate_all(family, x, k_max):
    """Orthonormal polynomials of degree ``0..k_max`` at ``x``; shape ``x.shape + (k_max+1,)``."""
    x = np.asarray(x, dtype=float)
    k_max = int(k_max)
    if k_max < 0:
        raise InvalidParameterError("degree must be >= 0")
    k = np.arange(k_max + 1)
    if family == "hermite":
        norms = np.sqrt([math.factorial(int(j)) for j in k], dtype=float)
        return _hermite_raw(x, k_max) / norms
    if family == "legendre":
        return _legendre_raw(x, k_max) * np.sqrt(2 * k + 1.0)
    raise InvalidParameterError(f"unknown polynomial family {family!r}; use one of {FAMILIES}")


def polynomial_eval(family, k, x):
    """Orthonormal polynomial of degree ``k`` of ``family`` at ``x``."""
    return evaluate_all(family, x, k)[..., int(k)]
