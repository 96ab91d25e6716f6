"""Achievable information rate estimators for AWGN constellations.

All estimators share the integrand

    f_i(xi) = log2 sum_j exp( -( ||x_i-x_j||^2
                                 + 2 sqrt(2) sigma (x_i-x_j).xi ) / (2 sigma^2) )

so that MI = m - (1 / (M pi^(N/2))) sum_i sum_l W_l f_i(xi_l) for a
Gauss-Hermite rule with nodes xi_l and weights W_l, with m = log2 M.  The
per-bit terms of the GMI replace the inner sum over all points by the sum
over the points sharing the transmitted value of one bit.

Randomised quadratures evaluate the same sums over L Gaussian nodes with
weights exp(-||xi||^2 / 2).  Their raw value (the "surrogate") reproduces
the integral only up to a constant factor, which is irrelevant for
ranking and optimisation; multiplying the node average by 2^(N/2) / L
restores an unbiased estimate of the integral, which is what the
"normalized" return value reports.

Estimates are invariant to the stored ordering of constellation points:
every estimator first puts the points into a canonical lexicographic
order, so permuted inputs produce bitwise identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .kernels import mc_symbol_terms, prepare, weighted_log_sums
from .model import AirEstimate, BitLabeling, ChannelSpec, Constellation
from .quadrature import QuadratureSet, gh_tensor, rq_sample

__all__ = [
    "mi_gh",
    "gmi_gh",
    "mi_mc",
    "gmi_mc",
    "mi_rq",
    "gmi_rq",
    "capacity_per_2d",
    "CodingMetrics",
    "coding_metrics",
    "rate_for_overhead",
    "EstimatorSpec",
    "parse_estimator",
    "evaluate_air",
]

_LN2 = math.log(2.0)


def _as_rate(value: float) -> float:
    """Information rates are nonnegative; truncate estimation noise below 0."""
    return value if value > 0.0 else 0.0


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Permutation sorting points lexicographically by coordinates."""
    return np.lexsort(points.T[::-1])


def _canon(constellation: Constellation, labeling: Optional[BitLabeling]):
    order = canonical_order(constellation.points)
    x = constellation.points[order]
    bits = labeling.bits[order] if labeling is not None else None
    return x, bits


def _check_channel(constellation: Constellation, channel: ChannelSpec):
    if channel.dims != constellation.dims:
        raise ValueError(
            f"channel is {channel.dims}D but constellation is {constellation.dims}D"
        )


def _check_labeling(constellation: Constellation, labeling: BitLabeling):
    if labeling.size != constellation.size:
        raise ValueError("labeling size does not match constellation")
    counts = labeling.bits.sum(axis=0)
    if ((counts == 0) | (counts == labeling.size)).any():
        raise ValueError("labeling must use both values of every bit position")


def _norm_const(quad: QuadratureSet) -> float:
    """Factor turning sum_l w_l f(xi_l) into E[f] under N(0, I)."""
    if quad.kind == "gh-tensor":
        return math.pi ** (-quad.dims / 2.0)
    return 2.0 ** (quad.dims / 2.0) / quad.count


def _mi_from_sets(x, sigma, quad, scale) -> float:
    prep = prepare(x, sigma)
    total, _ = weighted_log_sums(prep, quad.nodes, quad.weights)
    m_bits = math.log2(x.shape[0])
    return m_bits - scale * total / (x.shape[0] * _LN2)


def _gmi_from_sets(x, bits, sigma, quads, scales) -> float:
    prep = prepare(x, sigma)
    m_bits = bits.shape[1]
    shared = all(q is quads[0] for q in quads)
    full_total = None
    acc = 0.0
    for k in range(m_bits):
        quad = quads[k]
        if shared:
            if full_total is None:
                full_total, _ = weighted_log_sums(prep, quad.nodes, quad.weights)
            full = full_total
        else:
            full, _ = weighted_log_sums(prep, quad.nodes, quad.weights)
        bit_term = full
        for value in (0, 1):
            idx = np.flatnonzero(bits[:, k] == value)
            sub, _ = weighted_log_sums(prep.subset(idx), quad.nodes, quad.weights)
            bit_term -= sub
        acc += scales[k] * bit_term
    return m_bits - acc / (x.shape[0] * _LN2)


def mi_gh(constellation: Constellation, channel: ChannelSpec, n: int = 10) -> AirEstimate:
    """Mutual information via a tensor Gauss-Hermite rule of order n."""
    _check_channel(constellation, channel)
    x, _ = _canon(constellation, None)
    quad = gh_tensor(n, constellation.dims)
    value = _mi_from_sets(x, channel.sigma_d, quad, _norm_const(quad))
    return AirEstimate(_as_rate(value), constellation.dims, f"gh:{n}")


def gmi_gh(
    constellation: Constellation,
    labeling: BitLabeling,
    channel: ChannelSpec,
    n: int = 10,
) -> AirEstimate:
    """Generalised MI (bit-metric decoding rate) via tensor Gauss-Hermite."""
    _check_channel(constellation, channel)
    _check_labeling(constellation, labeling)
    x, bits = _canon(constellation, labeling)
    quad = gh_tensor(n, constellation.dims)
    scales = [_norm_const(quad)] * labeling.bits_per_symbol
    value = _gmi_from_sets(x, bits, channel.sigma_d, [quad] * labeling.bits_per_symbol,
                           scales)
    return AirEstimate(_as_rate(value), constellation.dims, f"gh:{n}")


def mi_mc(
    constellation: Constellation,
    channel: ChannelSpec,
    samples: int,
    seed=0,
) -> AirEstimate:
    """Monte Carlo MI estimate with reported standard error."""
    _check_channel(constellation, channel)
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    x, _ = _canon(constellation, None)
    rng = np.random.default_rng(seed)
    tx = rng.integers(0, x.shape[0], size=samples)
    noise = rng.standard_normal((samples, x.shape[1]))
    f, _ = mc_symbol_terms(x, channel.sigma_d, tx, noise)
    value = math.log2(x.shape[0]) - float(f.mean())
    stderr = float(f.std(ddof=1)) / math.sqrt(samples)
    return AirEstimate(_as_rate(value), constellation.dims, f"mc:{samples}", stderr)


def gmi_mc(
    constellation: Constellation,
    labeling: BitLabeling,
    channel: ChannelSpec,
    samples: int,
    seed=0,
) -> AirEstimate:
    """Monte Carlo GMI estimate with reported standard error."""
    _check_channel(constellation, channel)
    _check_labeling(constellation, labeling)
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    x, bits = _canon(constellation, labeling)
    m_bits = bits.shape[1]
    rng = np.random.default_rng(seed)
    tx = rng.integers(0, x.shape[0], size=samples)
    noise = rng.standard_normal((samples, x.shape[1]))
    f, h_sum = mc_symbol_terms(x, channel.sigma_d, tx, noise, bits)
    summand = m_bits * f - h_sum
    value = m_bits - float(summand.mean())
    stderr = float(summand.std(ddof=1)) / math.sqrt(samples)
    return AirEstimate(_as_rate(value), constellation.dims, f"mc:{samples}", stderr)


def mi_rq(
    constellation: Constellation,
    channel: ChannelSpec,
    quad: QuadratureSet,
) -> tuple[float, AirEstimate]:
    """Randomised-quadrature MI: (raw surrogate, normalised estimate).

    The surrogate applies the node weights without any normalising
    constant, as used inside the optimiser; the second element rescales by
    2^(N/2) / L to estimate the MI itself.
    """
    _check_channel(constellation, channel)
    if quad.kind != "rq":
        raise ValueError(f"expected an rq quadrature set, got kind {quad.kind!r}")
    if quad.dims != constellation.dims:
        raise ValueError("quadrature dimension does not match constellation")
    x, _ = _canon(constellation, None)
    prep = prepare(x, channel.sigma_d)
    total, _ = weighted_log_sums(prep, quad.nodes, quad.weights)
    m_bits = math.log2(x.shape[0])
    per_point = total / (x.shape[0] * _LN2)
    surrogate = m_bits - per_point
    value = m_bits - _norm_const(quad) * per_point
    return surrogate, AirEstimate(_as_rate(value), constellation.dims, f"rq:{quad.count}")


def gmi_rq(
    constellation: Constellation,
    labeling: BitLabeling,
    channel: ChannelSpec,
    quads: Union[QuadratureSet, Sequence[QuadratureSet]],
) -> tuple[float, AirEstimate]:
    """Randomised-quadrature GMI: (raw surrogate, normalised estimate).

    ``quads`` is either one node set shared by every bit position or a
    sequence with one (independently rotated) set per bit.
    """
    _check_channel(constellation, channel)
    _check_labeling(constellation, labeling)
    x, bits = _canon(constellation, labeling)
    m_bits = bits.shape[1]
    if isinstance(quads, QuadratureSet):
        quads = [quads] * m_bits
    else:
        quads = list(quads)
    if len(quads) != m_bits:
        raise ValueError(f"need one quadrature set per bit ({m_bits}), got {len(quads)}")
    for quad in quads:
        if quad.kind != "rq":
            raise ValueError(f"expected rq quadrature sets, got kind {quad.kind!r}")
        if quad.dims != constellation.dims:
            raise ValueError("quadrature dimension does not match constellation")
    surrogate = _gmi_from_sets(x, bits, channel.sigma_d, quads, [1.0] * m_bits)
    value = _gmi_from_sets(x, bits, channel.sigma_d, quads,
                           [_norm_const(q) for q in quads])
    counts = ",".join(str(q.count) for q in quads)
    return surrogate, AirEstimate(_as_rate(value), constellation.dims, f"rq:{counts}")


def capacity_per_2d(snr_db: float) -> float:
    """AWGN capacity log2(1 + SNR) in bits per 2D."""
    return math.log2(1.0 + 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class CodingMetrics:
    """Normalised rate and the FEC overhead budget it supports.

    ``max_overhead`` is the largest code overhead (1 - R) / R whose rate R
    equals the NGMI; the rate usable with overhead OH is 1 / (1 + OH).
    """

    ngmi: float
    max_overhead: float


def coding_metrics(air: Union[AirEstimate, float], bits_per_symbol: int) -> CodingMetrics:
    """NGMI and maximum FEC overhead for an AIR at m bits per symbol."""
    if bits_per_symbol < 1:
        raise ValueError(f"bits_per_symbol must be >= 1, got {bits_per_symbol}")
    value = air.value if isinstance(air, AirEstimate) else float(air)
    ngmi = value / bits_per_symbol
    overhead = (1.0 - ngmi) / ngmi if ngmi > 0 else math.inf
    return CodingMetrics(ngmi, overhead)


def rate_for_overhead(overhead: float) -> float:
    """Code rate 1 / (1 + overhead); e.g. 20% overhead supports rate 5/6."""
    if overhead < 0:
        raise ValueError(f"overhead must be >= 0, got {overhead}")
    return 1.0 / (1.0 + overhead)


# ---------------------------------------------------------------------------
# Estimator selection strings: "gh:10", "mc:1000000[:seed]", "rq:128[:seed]"
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorSpec:
    """A parsed estimator selector."""

    kind: str  # "gh" | "mc" | "rq"
    order: int = 0  # GH order n
    samples: int = 0  # MC sample count
    count: int = 0  # RQ node count L
    seed: int = 0

    def describe(self) -> str:
        if self.kind == "gh":
            return f"gh:{self.order}"
        if self.kind == "mc":
            return f"mc:{self.samples}"
        return f"rq:{self.count}"


def parse_estimator(text: str) -> EstimatorSpec:
    """Parse an estimator selector of the form kind:param[:seed]."""
    parts = text.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "gh":
            if len(parts) != 2:
                raise ValueError
            return EstimatorSpec("gh", order=int(parts[1]))
        if kind == "mc":
            if len(parts) not in (2, 3):
                raise ValueError
            seed = int(parts[2]) if len(parts) == 3 else 0
            return EstimatorSpec("mc", samples=int(parts[1]), seed=seed)
        if kind == "rq":
            if len(parts) not in (2, 3):
                raise ValueError
            seed = int(parts[2]) if len(parts) == 3 else 0
            return EstimatorSpec("rq", count=int(parts[1]), seed=seed)
    except ValueError:
        pass
    raise ValueError(
        f"invalid estimator {text!r}; expected gh:N, mc:SAMPLES[:SEED] or rq:COUNT[:SEED]"
    )


def evaluate_air(
    spec: EstimatorSpec,
    constellation: Constellation,
    labeling: Optional[BitLabeling],
    metric: str,
    channel: ChannelSpec,
    entropy=None,
) -> AirEstimate:
    """Run the estimator selected by ``spec`` for MI or GMI.

    ``entropy`` overrides the spec's seed material (any value accepted by
    numpy.random.default_rng); sweeps use it to give each grid point its
    own substream.
    """
    metric = metric.upper()
    if metric not in ("MI", "GMI"):
        raise ValueError(f"metric must be MI or GMI, got {metric!r}")
    if metric == "GMI" and labeling is None:
        raise ValueError("GMI requires a bit labeling")
    seed = entropy if entropy is not None else spec.seed
    if spec.kind == "gh":
        if metric == "MI":
            return mi_gh(constellation, channel, spec.order)
        return gmi_gh(constellation, labeling, channel, spec.order)
    if spec.kind == "mc":
        if metric == "MI":
            return mi_mc(constellation, channel, spec.samples, seed)
        return gmi_mc(constellation, labeling, channel, spec.samples, seed)
    quad = rq_sample(spec.count, constellation.dims, seed)
    if metric == "MI":
        return mi_rq(constellation, channel, quad)[1]
    return gmi_rq(constellation, labeling, channel, quad)[1]
