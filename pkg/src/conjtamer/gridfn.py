"""Scalar functions sampled on a grid, with optional exact evaluator.

The grid samples are always authoritative for serialization and for sup-norm
reports; the optional callable `fn` (when the function came from a closed form
or a ball average that can be re-evaluated anywhere) is used for off-grid
evaluation so that compositions do not stack interpolation error.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import NonFinite
from .space import Space

Array = np.ndarray


class GridFunction:
    """A real-valued function on a Space: samples per node + piecewise-linear
    interpolation, optionally backed by an exact vectorized callable."""

    __slots__ = ("space", "samples", "fn")

    def __init__(self, space: Space, samples, fn: Optional[Callable] = None):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (space.track_length,):
            raise ValueError(
                f"expected {space.track_length} samples on {space}, "
                f"got shape {samples.shape}"
            )
        self.space = space
        self.samples = samples
        self.fn = fn

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_callable(cls, space: Space, fn: Callable) -> "GridFunction":
        return cls(space, fn(space.track_nodes()), fn)

    @classmethod
    def zero(cls, space: Space) -> "GridFunction":
        return cls(space, np.zeros(space.track_length), lambda x: np.zeros_like(np.asarray(x, dtype=float)))

    # -- evaluation --------------------------------------------------------

    def __call__(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if self.space.is_circle:
            x = np.mod(x, 1.0)
        if self.fn is not None:
            return self.fn(x)
        return self.interp(x)

    def interp(self, x) -> Array:
        """Piecewise-linear evaluation from the samples alone."""
        x = np.asarray(x, dtype=float)
        nodes = self.space.nodes
        if self.space.is_circle:
            fp = np.concatenate([self.samples, self.samples[:1]])
            return np.interp(np.mod(x, 1.0), nodes, fp)
        return np.interp(x, nodes, self.samples)

    # -- norms and checks ----------------------------------------------------

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def check_finite(self, what: str = "grid function") -> "GridFunction":
        if not np.all(np.isfinite(self.samples)):
            raise NonFinite(f"{what} has non-finite samples")
        return self

    # -- arithmetic (combines exact evaluators when both sides have them) ----

    def _combine(self, other: "GridFunction", op) -> "GridFunction":
        self.space.check_same(other.space)
        fn = None
        if self.fn is not None and other.fn is not None:
            f, g = self.fn, other.fn
            fn = lambda x: op(f(x), g(x))
        return GridFunction(self.space, op(self.samples, other.samples), fn)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return self._combine(other, np.add)
        c = float(other)
        f = self.fn
        return GridFunction(
            self.space, self.samples + c, None if f is None else (lambda x: f(x) + c)
        )

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return self._combine(other, np.subtract)
        return self + (-float(other))

    def __neg__(self):
        f = self.fn
        return GridFunction(
            self.space, -self.samples, None if f is None else (lambda x: -f(x))
        )

    def __mul__(self, other):
        c = float(other)
        f = self.fn
        return GridFunction(
            self.space, self.samples * c, None if f is None else (lambda x: f(x) * c)
        )

    __rmul__ = __mul__

    def __repr__(self):
        tag = "exact" if self.fn is not None else "interp"
        return f"GridFunction({self.space}, sup|.|={self.sup_abs():.4g}, {tag})"
