"""Tensorized Gauss-Hermite rules for integration against the standard
Gaussian measure.

The 1-D rule uses the probabilists' weight exp(-x^2/2)/sqrt(2*pi), so the
weights form a probability vector and a rule with m nodes per axis
integrates polynomials of degree <= 2m-1 exactly in each coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import DimensionMismatchError

MAX_QUADRATURE_DIM = 3


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and probability weights for integration against gamma_n."""

    dim: int
    nodes: np.ndarray    # (M, dim)
    weights: np.ndarray  # (M,), positive, sums to 1
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"nodes shape {self.nodes.shape} inconsistent with dim={self.dim}"
            )
        if len(self.weights) != len(self.nodes) or len(self.weights) == 0:
            raise ValueError("weights and nodes must be equal-length and non-empty")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "log_weights", np.log(self.weights))

    @classmethod
    def gauss_hermite(cls, dim: int, n_nodes: int = 64) -> "QuadratureRule":
        """Tensor product of 1-D probabilists' Gauss-Hermite rules.

        Parameters
        ----------
        dim : int
            Ambient dimension, 1 <= dim <= 3 (node count grows as n_nodes**dim).
        n_nodes : int
            Nodes per axis.
        """
        if not 1 <= dim <= MAX_QUADRATURE_DIM:
            raise DimensionMismatchError(
                f"tensorized quadrature supports 1 <= dim <= {MAX_QUADRATURE_DIM}, got {dim}"
            )
        if n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
        w = w / np.sqrt(2.0 * np.pi)
        if dim == 1:
            return cls(dim=1, nodes=x[:, None], weights=w)
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*([w] * dim), indexing="ij")
        weights = reduce(np.multiply, [g.ravel() for g in wgrids])
        return cls(dim=dim, nodes=nodes, weights=weights)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of per-node values (plain linear functional)."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n_nodes:
            raise DimensionMismatchError("values last axis must match node count")
        return values @ self.weights
