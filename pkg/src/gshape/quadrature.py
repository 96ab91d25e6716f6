"""Quadrature node sets for Gaussian expectations in N dimensions.

Two families are provided:

* Tensorised Gauss-Hermite rules: exact for polynomial integrands but with
  node count n^N, which explodes combinatorially with dimension.
* Randomised quadratures: L standard-normal node vectors with weights
  exp(-||xi||^2 / 2).  The node count is chosen freely, so the cost scales
  with L instead of n^N, at the price of a stochastic (proportional-only)
  estimate that is used as an optimisation surrogate.

Both produce nodes for integrals of the form

    integral exp(-||xi||^2) f(xi) dxi     (Gauss-Hermite convention)

up to the documented normalisation of each family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureSet",
    "Rotation",
    "GhGridError",
    "gh_nodes_1d",
    "gh_tensor",
    "rq_sample",
    "haar_rotation",
    "apply_rotation",
    "default_quadrature_count",
]

#: Largest 1D Gauss-Hermite order supported.
MAX_GH_ORDER = 64

#: Hard cap on materialised tensor-grid size.
MAX_GH_GRID = 10**8

#: Node counts used for the randomised rule at the dimensions studied most.
DEFAULT_RQ_COUNTS = {2: 16, 4: 128, 8: 256, 12: 512}


class GhGridError(ValueError):
    """Raised when a tensor Gauss-Hermite grid would be too large.

    The offending grid size n^N is available as ``grid_size``.
    """

    def __init__(self, n: int, dims: int):
        self.grid_size = n**dims
        super().__init__(
            f"GH grid infeasible at this dimension: n^N = {self.grid_size} "
            f"(n={n}, N={dims}) exceeds {MAX_GH_GRID}"
        )


@dataclass(frozen=True)
class QuadratureSet:
    """A weighted node set in N dimensions.

    ``kind`` is "gh-tensor" for tensorised Gauss-Hermite rules (weights sum
    to pi^(N/2)) or "rq" for randomised quadratures (weights are
    exp(-||node||^2 / 2)).
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if nodes.ndim != 2:
            raise ValueError(f"nodes must be 2D, got shape {nodes.shape}")
        if weights.shape != (nodes.shape[0],):
            raise ValueError("weights must be a vector matching the node count")
        if not np.isfinite(nodes).all() or not np.isfinite(weights).all():
            raise ValueError("nodes and weights must be finite")
        if (weights <= 0).any():
            raise ValueError("weights must be strictly positive")
        if self.kind not in ("gh-tensor", "rq"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        nodes = nodes.copy()
        weights = weights.copy()
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return self.nodes.shape[0]

    @property
    def dims(self) -> int:
        return self.nodes.shape[1]


@dataclass(frozen=True)
class Rotation:
    """An orthogonal matrix with determinant +1."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"rotation matrix must be square, got {mat.shape}")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dims(self) -> int:
        return self.matrix.shape[0]


def gh_nodes_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the order-n Gauss-Hermite rule on the line.

    The rule integrates exp(-x^2) f(x) exactly for polynomials f up to
    degree 2n - 1.  Nodes are returned in ascending order and are
    symmetrised so that x[k] == -x[n-1-k] exactly (with a zero centre node
    for odd n); the raw eigenvalue-based nodes are symmetric only to
    rounding.

    Parameters
    ----------
    n : int
        Rule order, 1 <= n <= 64.
    """
    if not 1 <= n <= MAX_GH_ORDER:
        raise ValueError(f"order must be in [1, {MAX_GH_ORDER}], got {n}")
    x, w = np.polynomial.hermite.hermgauss(n)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2 == 1:
        x[n // 2] = 0.0
    return x, w


def gh_tensor(n: int, dims: int) -> QuadratureSet:
    """Tensor product of the order-n Gauss-Hermite rule over `dims` axes.

    Produces n^dims nodes; refuses to materialise more than 10^8 of them
    by raising :class:`GhGridError` (this is the regime where randomised
    quadratures are the only practical option).
    """
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    if not 1 <= n <= MAX_GH_ORDER:
        raise ValueError(f"order must be in [1, {MAX_GH_ORDER}], got {n}")
    if n**dims > MAX_GH_GRID:
        raise GhGridError(n, dims)
    x, w = gh_nodes_1d(n)
    grids = np.meshgrid(*([x] * dims), indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = w
    for _ in range(dims - 1):
        weights = np.multiply.outer(weights, w)
    return QuadratureSet(nodes, weights.reshape(-1), "gh-tensor")


def rq_sample(count: int, dims: int, seed) -> QuadratureSet:
    """Draw a randomised quadrature set of `count` nodes in `dims` dims.

    Nodes are i.i.d. standard normal vectors; the weight attached to node
    xi is exp(-||xi||^2 / 2).  ``seed`` is anything accepted by
    numpy.random.default_rng (an int, a SeedSequence, or a Generator).
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    nodes = rng.standard_normal((count, dims))
    weights = np.exp(-0.5 * np.einsum("ij,ij->i", nodes, nodes))
    return QuadratureSet(nodes, weights, "rq")


def haar_rotation(dims: int, seed) -> Rotation:
    """Draw a rotation uniformly from SO(dims).

    QR decomposition of a standard Gaussian matrix with the sign of R's
    diagonal folded into Q gives a Haar-distributed orthogonal matrix; if
    its determinant is -1 the last column is negated, restricting to the
    rotation subgroup without disturbing uniformity.
    """
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((dims, dims))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if np.linalg.det(q) < 0:
        q[:, -1] = -q[:, -1]
    return Rotation(q)


def apply_rotation(quad: QuadratureSet, rotation: Rotation) -> QuadratureSet:
    """Rotate every node of a quadrature set; weights are unchanged.

    Rotations preserve norms, so the weight rule of both families is
    preserved exactly.
    """
    if quad.dims != rotation.dims:
        raise ValueError(
            f"dimension mismatch: nodes are {quad.dims}D, rotation is {rotation.dims}D"
        )
    return QuadratureSet(quad.nodes @ rotation.matrix.T, quad.weights, quad.kind)


def default_quadrature_count(dims: int) -> int:
    """Randomised node budget for a given dimension.

    Dimensions 2, 4, 8, 12 use the counts 16, 128, 256, 512 that proved
    sufficient in practice; other dimensions fall back to the smallest
    power of two at or above 512 * dims / 12.
    """
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    if dims in DEFAULT_RQ_COUNTS:
        return DEFAULT_RQ_COUNTS[dims]
    target = 512.0 * dims / 12.0
    count = 1
    while count < target:
        count *= 2
    return count
