"""Stationary covariance kernels with per-dimension lengthscales.

With scaled distance ``r = sqrt(sum((x_i - x'_i) / l_i)^2)`` and signal
variance ``s2``:

=========  ====================================================
RBF        ``s2 * exp(-r^2 / 2)``
Matern 1/2 ``s2 * exp(-r)``
Matern 3/2 ``s2 * (1 + sqrt(3) r) * exp(-sqrt(3) r)``
Matern 5/2 ``s2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r)``
Matern inf identical to RBF
=========  ====================================================
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError

MATERN_NUS = (0.5, 1.5, 2.5, math.inf)


@dataclass(frozen=True)
class Kernel:
    """Covariance kernel.

    Parameters
    ----------
    kind : {"rbf", "matern"}
    lengthscales : sequence of float
        One positive lengthscale per input dimension.
    signal_variance : float
    nu : float, optional
        Matern smoothness, one of 0.5, 1.5, 2.5 or inf.
    """

    kind: str
    lengthscales: tuple
    signal_variance: float = 1.0
    nu: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("rbf", "matern"):
            raise InvalidParameterError(f"unknown kernel kind {self.kind!r}; use 'rbf' or 'matern'")
        nu = self.nu
        if kind == "matern":
            nu = 2.5 if nu is None else float(nu)
            if nu not in MATERN_NUS:
                raise InvalidParameterError(f"Matern nu must be one of 1/2, 3/2, 5/2, inf; got {self.nu}")
        elif nu is not None:
            raise InvalidParameterError("nu applies to the Matern kernel only")
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if not ls or any(not (v > 0 and math.isfinite(v)) for v in ls):
            raise InvalidParameterError("lengthscales must be positive and finite")
        if not (self.signal_variance > 0 and math.isfinite(self.signal_variance)):
            raise InvalidParameterError("signal_variance must be positive and finite")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    @property
    def dim(self):
        return len(self.lengthscales)

    @property
    def _effective(self):
        if self.kind == "rbf" or self.nu == math.inf:
            return "rbf"
        return self.nu

    def with_params(self, lengthscales, signal_variance):
        return Kernel(self.kind, tuple(lengthscales), signal_variance, self.nu)

    def _scaled_sq(self, X1, X2):
        ls = np.asarray(self.lengthscales)
        A = np.atleast_2d(X1) / ls
        B = np.atleast_2d(X2) / ls
        diff = A[:, None, :] - B[None, :, :]
        return diff**2

    def _profile(self, r2):
        """Kernel value divided by the signal variance, as a function of r^2."""
        eff = self._effective
        if eff == "rbf":
            return np.exp(-0.5 * r2)
        r = np.sqrt(r2)
        if eff == 0.5:
            return np.exp(-r)
        if eff == 1.5:
            s = math.sqrt(3.0) * r
            return (1.0 + s) * np.exp(-s)
        s = math.sqrt(5.0) * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)

    def gram(self, X1, X2=None):
        """Kernel matrix ``k(X1[i], X2[j])``, shape ``(n1, n2)``."""
        X2 = X1 if X2 is None else X2
        r2 = self._scaled_sq(X1, X2).sum(axis=-1)
        return self.signal_variance * self._profile(r2)

    def diag(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.signal_variance)

    def gram_and_grads(self, X):
        """Gram matrix of ``X`` and its derivatives w.r.t. log hyperparameters.

        Returns ``K`` and a list ``[dK/dlog l_1, ..., dK/dlog l_d, dK/dlog s2]``.
        """
        sq = self._scaled_sq(X, X)
        r2 = sq.sum(axis=-1)
        s2 = self.signal_variance
        K = s2 * self._profile(r2)
        eff = self._effective
        # dK/dlog l_i = w(r) * sq_i, where w absorbs dk/dr * dr/dlog l_i
        if eff == "rbf":
            w = K
        elif eff == 0.5:
            r = np.sqrt(r2)
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(r > 0, K / r, 0.0)
        elif eff == 1.5:
            w = 3.0 * s2 * np.exp(-math.sqrt(3.0) * np.sqrt(r2))
        else:
            s = math.sqrt(5.0) * np.sqrt(r2)
            w = (5.0 / 3.0) * s2 * (1.0 + s) * np.exp(-s)
        grads = [w * sq[:, :, i] for i in range(sq.shape[-1])]
        grads.append(K.copy())
        return K, grads

    def to_dict(self):
        return {
            "kind": self.kind,
            "nu": None if self.nu is None else ("inf" if self.nu == math.inf else self.nu),
            "lengthscales": list(self.lengthscales),
            "signal_variance": self.signal_variance,
        }

    @classmethod
    def from_dict(cls, data):
        nu = data.get("nu")
        if nu == "inf":
            nu = math.inf
        return cls(data["kind"], tuple(data["lengthscales"]), data["signal_variance"], nu)
