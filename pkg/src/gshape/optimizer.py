"""Gradient-based constellation optimisation on randomised surrogates.

The optimiser ascends a normalised randomised-quadrature estimate of MI
or GMI (descends its negative, reported as ``surrogate_loss``).  Each
iteration the node set is re-randomised: by default a fixed base set is
rotated by a fresh uniform rotation (one rotation per bit position for
GMI, so each bit metric sees its own orientation), or with
``redraw_nodes`` the nodes are redrawn outright.  The re-randomisation
decorrelates the surrogate's bias across iterations, which is what lets a
small node budget train constellations that a tensor quadrature of equal
cost could not.

Points are optimised without a power constraint; the loss normalises the
point set internally, making it scale invariant (the gradient is exactly
orthogonal to the current points' radial direction).  Progress is
measured on an independent reference estimator every ``eval_every``
iterations, and the best normalised iterate by that reference, the
initial constellation included, is what the run returns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .air import EstimatorSpec, evaluate_air, parse_estimator
from .kernels import prepare, weighted_log_sums
from .model import (
    AirEstimate,
    BitLabeling,
    ChannelSpec,
    Constellation,
    normalize_power,
)
from .quadrature import (
    QuadratureSet,
    apply_rotation,
    default_quadrature_count,
    haar_rotation,
    rq_sample,
)

__all__ = [
    "OptimizerConfig",
    "TracePoint",
    "OptimisationRun",
    "surrogate_loss_grad",
    "optimize",
]

_LN2 = math.log(2.0)

#: Normalised points closer than this Euclidean distance mark the run as
#: collapsed (degenerate merging of constellation points).
COLLAPSE_DIST = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one optimisation run.

    ``quadrature_count`` of None picks the per-dimension default node
    budget; ``reference_eval`` of "auto" tracks progress with gh:10 up to
    4 dimensions and mc:1000000 above (tensor rules stop being an option
    there).  ``redraw_nodes`` swaps per-iteration rotation of a fixed node
    set for full redraws.
    """

    snr_db: float
    metric: str = "MI"
    iterations: int = 5000
    learning_rate: float = 5e-3
    lr_decay: float = 0.9995
    quadrature_count: Optional[int] = None
    redraw_nodes: bool = False
    seed: int = 0
    eval_every: int = 100
    reference_eval: str = "auto"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        metric = self.metric.upper()
        if metric not in ("MI", "GMI"):
            raise ValueError(f"metric must be MI or GMI, got {self.metric!r}")
        object.__setattr__(self, "metric", metric)
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.quadrature_count is not None and self.quadrature_count < 1:
            raise ValueError("quadrature_count must be >= 1")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta1 and beta2 must be in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be positive")


@dataclass(frozen=True)
class TracePoint:
    """One optimisation trace row.

    ``reference_air`` is None on iterations without a reference
    evaluation; ``wall_ms`` is elapsed wall clock since the run started.
    ``collapsed`` marks iterations where two normalised points sat within
    the collapse distance of each other (the run continues regardless;
    the log-sum-exp gradient stays finite).
    """

    iteration: int
    surrogate_loss: float
    reference_air: Optional[float]
    wall_ms: float
    collapsed: bool = False


@dataclass(frozen=True)
class OptimisationRun:
    """Result of :func:`optimize`.

    ``final`` is the power-normalised iterate with the best reference
    value seen (the initial constellation competes too, so the result
    never ranks below the start by the reference estimator).
    """

    config: OptimizerConfig
    initial: Constellation
    labeling: Optional[BitLabeling]
    final: Constellation
    trace: list[TracePoint] = field(repr=False)
    best_iteration: int
    best_reference: AirEstimate
    initial_reference: AirEstimate
    collapsed: bool


def _norm_const(quad: QuadratureSet) -> float:
    if quad.kind == "gh-tensor":
        return math.pi ** (-quad.dims / 2.0)
    return 2.0 ** (quad.dims / 2.0) / quad.count


def _loss_grad_raw(
    points: np.ndarray,
    bits: Optional[np.ndarray],
    quads: Sequence[QuadratureSet],
    sigma: float,
    metric: str,
    m_bits: float,
) -> tuple[float, np.ndarray, float]:
    """Loss and gradient in the raw (pre-normalisation) point coordinates.

    Returns (loss, grad, min_sq_dist) where min_sq_dist is the smallest
    off-diagonal squared distance of the normalised points as seen by the
    Gram expansion.
    """
    m_pts, dims = points.shape
    p_bar = float(np.einsum("ij,ij->i", points, points).mean())
    if p_bar <= 0 or not math.isfinite(p_bar):
        raise ValueError("degenerate constellation")
    scale = math.sqrt((dims / 2.0) / p_bar)
    x = scale * points
    prep = prepare(x, sigma)

    grad_x = np.zeros_like(x)
    if metric == "MI":
        factor = _norm_const(quads[0]) / (m_pts * _LN2)
        total, g = weighted_log_sums(prep, quads[0].nodes, quads[0].weights, True)
        loss = factor * total - m_bits
        grad_x += factor * g
    else:
        loss = -m_bits
        for k, quad in enumerate(quads):
            factor = _norm_const(quad) / (m_pts * _LN2)
            full, g_full = weighted_log_sums(prep, quad.nodes, quad.weights, True)
            loss += factor * full
            grad_x += factor * g_full
            for value in (0, 1):
                idx = np.flatnonzero(bits[:, k] == value)
                sub, g_sub = weighted_log_sums(
                    prep.subset(idx), quad.nodes, quad.weights, True
                )
                loss -= factor * sub
                grad_x[idx] -= factor * g_sub

    # Chain rule through the internal power normalisation x = scale(p) * p:
    # the loss is scale invariant, so the radial component drops out.
    inner = float((grad_x * x).sum())
    grad = scale * (grad_x - x * (inner / (m_pts * dims / 2.0)))
    return loss, grad, prep.min_sq_dist


def surrogate_loss_grad(
    points: np.ndarray,
    labeling: Optional[BitLabeling],
    quads: Union[QuadratureSet, Sequence[QuadratureSet]],
    sigma_d: float,
    metric: str = "MI",
) -> tuple[float, np.ndarray]:
    """Normalised surrogate loss (negative AIR estimate) and its gradient.

    ``points`` need not be power normalised; the loss normalises
    internally and the returned gradient is with respect to the raw
    points.  For GMI pass one quadrature set per bit (or a single set to
    share); for MI a single set.
    """
    metric = metric.upper()
    if metric not in ("MI", "GMI"):
        raise ValueError(f"metric must be MI or GMI, got {metric!r}")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be 2D, got shape {points.shape}")
    if isinstance(quads, QuadratureSet):
        quads = [quads]
    else:
        quads = list(quads)
    for quad in quads:
        if quad.dims != points.shape[1]:
            raise ValueError("quadrature dimension does not match points")
    if metric == "GMI":
        if labeling is None:
            raise ValueError("GMI requires a bit labeling")
        if labeling.size != points.shape[0]:
            raise ValueError("labeling size does not match points")
        m_bits = labeling.bits_per_symbol
        if len(quads) == 1:
            quads = quads * m_bits
        if len(quads) != m_bits:
            raise ValueError(
                f"need one quadrature set per bit ({m_bits}), got {len(quads)}"
            )
        bits = labeling.bits
    else:
        if len(quads) != 1:
            raise ValueError("MI uses a single quadrature set")
        bits = None
        m_bits = math.log2(points.shape[0])
    loss, grad, _ = _loss_grad_raw(points, bits, quads, sigma_d, metric, m_bits)
    return loss, grad


def _exact_min_sq_dist(x: np.ndarray) -> float:
    """Direct minimum off-diagonal squared distance (no Gram cancellation)."""
    m = x.shape[0]
    if m < 2:
        return math.inf
    best = math.inf
    chunk = max(1, int(2_000_000 // max(m * x.shape[1], 1)))
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        diff = x[start:stop, None, :] - x[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        for row in range(stop - start):
            d2[row, start + row] = math.inf
        best = min(best, float(d2.min()))
    return best


def _resolve_reference(text: str, dims: int) -> EstimatorSpec:
    if text == "auto":
        return EstimatorSpec("gh", order=10) if dims <= 4 else EstimatorSpec(
            "mc", samples=1_000_000
        )
    return parse_estimator(text)


def optimize(
    config: OptimizerConfig,
    initial: Constellation,
    labeling: Optional[BitLabeling] = None,
) -> OptimisationRun:
    """Optimise a constellation with Adam on the randomised surrogate.

    The trace has ``iterations + 1`` rows: row i records the surrogate
    loss of the iterate after i updates, evaluated on that iteration's
    freshly randomised node set (so consecutive rows fluctuate even at a
    fixed point).  Runs with the same config and inputs are bitwise
    reproducible.
    """
    metric = config.metric
    if metric == "GMI":
        if labeling is None:
            raise ValueError("GMI requires a bit labeling")
        if labeling.size != initial.size:
            raise ValueError("labeling size does not match constellation")
        m_bits: float = labeling.bits_per_symbol
        n_sets = labeling.bits_per_symbol
        bits = labeling.bits
    else:
        m_bits = math.log2(initial.size)
        n_sets = 1
        bits = None

    dims = initial.dims
    m_pts = initial.size
    channel = ChannelSpec(config.snr_db, dims)
    count = config.quadrature_count or default_quadrature_count(dims)
    ref_spec = _resolve_reference(config.reference_eval, dims)

    root = np.random.SeedSequence(config.seed)
    nodes_ss, rot_ss, eval_ss = root.spawn(3)
    nodes_rng = np.random.default_rng(nodes_ss)
    rot_rng = np.random.default_rng(rot_ss)
    base = None if config.redraw_nodes else rq_sample(count, dims, nodes_rng)

    points = initial.points.astype(np.float64).copy()
    adam_m = np.zeros_like(points)
    adam_v = np.zeros_like(points)

    trace: list[TracePoint] = []
    best_value = -math.inf
    best_iteration = -1
    best_points: Optional[np.ndarray] = None
    best_estimate: Optional[AirEstimate] = None
    initial_estimate: Optional[AirEstimate] = None
    collapsed = False
    start = time.perf_counter()

    for it in range(config.iterations + 1):
        if config.redraw_nodes:
            quads = [rq_sample(count, dims, nodes_rng) for _ in range(n_sets)]
        else:
            quads = [
                apply_rotation(base, haar_rotation(dims, rot_rng))
                for _ in range(n_sets)
            ]
        loss, grad, min_sq = _loss_grad_raw(
            points, bits, quads, channel.sigma_d, metric, m_bits
        )
        # The Gram-based min_sq loses accuracy around 1e-15, so it only
        # screens candidates; a direct pass confirms genuine collapses.
        row_collapsed = False
        if min_sq < 1e-12:
            normalised = normalize_power(points)
            row_collapsed = _exact_min_sq_dist(normalised) < COLLAPSE_DIST**2
            collapsed = collapsed or row_collapsed

        ref_value = None
        if it % config.eval_every == 0 or it == config.iterations:
            candidate = normalize_power(points)
            estimate = evaluate_air(
                ref_spec,
                Constellation(candidate),
                labeling,
                metric,
                channel,
                entropy=eval_ss,
            )
            ref_value = estimate.value
            if it == 0:
                initial_estimate = estimate
            if ref_value > best_value:
                best_value = ref_value
                best_iteration = it
                best_points = candidate
                best_estimate = estimate

        trace.append(
            TracePoint(
                it, loss, ref_value, (time.perf_counter() - start) * 1e3,
                row_collapsed,
            )
        )

        if it < config.iterations:
            lr = config.learning_rate * config.lr_decay**it
            adam_m = config.beta1 * adam_m + (1.0 - config.beta1) * grad
            adam_v = config.beta2 * adam_v + (1.0 - config.beta2) * grad * grad
            m_hat = adam_m / (1.0 - config.beta1 ** (it + 1))
            v_hat = adam_v / (1.0 - config.beta2 ** (it + 1))
            points -= lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)

    return OptimisationRun(
        config=config,
        initial=initial,
        labeling=labeling,
        final=Constellation(best_points),
        trace=trace,
        best_iteration=best_iteration,
        best_reference=best_estimate,
        initial_reference=initial_estimate,
        collapsed=collapsed,
    )
