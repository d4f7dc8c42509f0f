"""Container for sample matrices shared by the sampling, runner and CLI code."""

from dataclasses import dataclass, field

import numpy as np

SPACE_TAGS = ("physical", "unit_hypercube", "standard_normal")


@dataclass(frozen=True)
class SampleSet:
    """An ``n x d`` matrix of realizations.

    Parameters
    ----------
    samples : ndarray, shape (n, d)
        Sample points, one per row.
    weights : ndarray, shape (n,), optional
        Nonnegative weights summing to one (importance/stratified sampling).
    seed_record : dict
        Generator name and seed that produced the samples.
    space_tag : str
        One of ``physical``, ``unit_hypercube`` or ``standard_normal``.
    """

    samples: np.ndarray
    weights: np.ndarray | None = None
    seed_record: dict = field(default_factory=dict)
    space_tag: str = "physical"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples contain NaN or Inf")
        object.__setattr__(self, "samples", x)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != x.shape[0]:
                raise ValueError("weights length does not match number of samples")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
            object.__setattr__(self, "weights", w)
        if self.space_tag not in SPACE_TAGS:
            raise ValueError(f"unknown space tag {self.space_tag!r}")

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def d(self):
        return self.samples.shape[1]

    def __len__(self):
        return self.n
