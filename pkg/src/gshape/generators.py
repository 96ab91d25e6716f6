"""Deterministic constellation generators and bit labelings.

Every generator returns points already scaled to unit power per 2D
(mean ||x||^2 == N/2), with a bit labeling whenever the point count is a
power of two.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .model import BitLabeling, Constellation, normalize_power

__all__ = [
    "brgc",
    "cartesian_bpsk",
    "qam",
    "apsk_two_ring",
    "cartesian_product",
    "random_constellation",
    "sp_bpsk_12d",
]


def brgc(bits: int) -> np.ndarray:
    """Binary reflected Gray code as a (2^bits, bits) uint8 array.

    Row i is the Gray code of index i (MSB first); consecutive rows differ
    in exactly one bit, and so do rows 0 and 2^bits - 1.
    """
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    idx = np.arange(2**bits, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint64)
    return ((gray[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def cartesian_bpsk(dims: int) -> tuple[Constellation, BitLabeling]:
    """BPSK on each of `dims` real axes: the 2^dims hypercube corners.

    Bit k selects the sign of coordinate k (0 -> +, 1 -> -), so each bit
    rides its own axis; dims=2 gives Gray-labeled QPSK.  Coordinates are
    +-1/sqrt(2), which is already unit power per 2D.
    """
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    if dims > 30:
        raise ValueError(f"dims={dims} would generate 2^{dims} points")
    bits_rows = np.arange(2**dims, dtype=np.uint64)
    shifts = np.arange(dims - 1, -1, -1, dtype=np.uint64)
    bits = ((bits_rows[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    points = (1.0 - 2.0 * bits) / math.sqrt(2.0)
    return Constellation(points), BitLabeling(bits)


def qam(order: int) -> tuple[Constellation, BitLabeling]:
    """Square QAM with per-axis Gray labeling, unit power per 2D.

    ``order`` must be an even power of two (4, 16, 64, ...).  The first
    half of the bits Gray-labels the first axis, the second half the
    second axis, so the labeling is Gray overall.
    """
    if order < 4:
        raise ValueError(f"order must be >= 4, got {order}")
    m_bits = round(math.log2(order))
    if 2**m_bits != order or m_bits % 2 != 0:
        raise ValueError(f"order must be an even power of two, got {order}")
    side = 2 ** (m_bits // 2)
    levels = np.arange(side, dtype=np.float64) * 2.0 - (side - 1)
    axis_bits = brgc(m_bits // 2)
    ii, qq = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    ii = ii.reshape(-1)
    qq = qq.reshape(-1)
    points = np.stack([levels[ii], levels[qq]], axis=1)
    bits = np.concatenate([axis_bits[ii], axis_bits[qq]], axis=1)
    return Constellation(normalize_power(points)), BitLabeling(bits)


def apsk_two_ring(
    points_per_ring: tuple[int, int],
    radius_ratio: float = 2.0,
    phase_offset: Optional[float] = None,
) -> tuple[Constellation, BitLabeling]:
    """Two-ring APSK in 2D with equally spaced phases per ring.

    The outer ring has ``radius_ratio`` times the inner radius and is
    rotated by ``phase_offset`` (default: half an outer phase step).
    Points come out inner ring first, each ring in phase order.  The
    total point count must be a power of two; with equal ring sizes the
    first bit selects the ring and the rest Gray-label the phase,
    otherwise the labels are a Gray sequence along the point order.
    """
    inner, outer = points_per_ring
    if inner < 1 or outer < 1:
        raise ValueError("both rings need at least one point")
    total = inner + outer
    m_bits = round(math.log2(total))
    if 2**m_bits != total:
        raise ValueError(f"total point count must be a power of two, got {total}")
    if radius_ratio <= 0:
        raise ValueError(f"radius_ratio must be positive, got {radius_ratio}")
    if phase_offset is None:
        phase_offset = math.pi / outer
    ang_in = 2.0 * math.pi * np.arange(inner) / inner
    ang_out = 2.0 * math.pi * np.arange(outer) / outer + phase_offset
    pts = np.concatenate([
        np.stack([np.cos(ang_in), np.sin(ang_in)], axis=1),
        radius_ratio * np.stack([np.cos(ang_out), np.sin(ang_out)], axis=1),
    ])
    if inner == outer:
        phase = brgc(m_bits - 1) if m_bits > 1 else np.zeros((1, 0), dtype=np.uint8)
        ring = np.repeat([[0], [1]], inner, axis=0).astype(np.uint8)
        bits = np.concatenate([ring, np.tile(phase, (2, 1))], axis=1)
    else:
        bits = brgc(m_bits)
    return Constellation(normalize_power(pts)), BitLabeling(bits)


def cartesian_product(
    first: tuple[Constellation, BitLabeling],
    second: tuple[Constellation, BitLabeling],
) -> tuple[Constellation, BitLabeling]:
    """All pairings [x, y] of points from two labeled constellations.

    Arguments are (constellation, labeling) pairs as returned by the
    other generators.  The first factor's index varies slowest; labels
    concatenate, coordinates concatenate, and the result is power
    normalised (a no-op up to rounding when both factors already are,
    since mean squared norms add).
    """
    c_a, lab_a = first
    c_b, lab_b = second
    if lab_a is None or lab_b is None:
        raise ValueError("cartesian_product requires labeled constellations")
    if lab_a.size != c_a.size or lab_b.size != c_b.size:
        raise ValueError("labeling sizes do not match constellations")
    pts = np.concatenate(
        [
            np.repeat(c_a.points, c_b.size, axis=0),
            np.tile(c_b.points, (c_a.size, 1)),
        ],
        axis=1,
    )
    bits = np.concatenate(
        [
            np.repeat(lab_a.bits, c_b.size, axis=0),
            np.tile(lab_b.bits, (c_a.size, 1)),
        ],
        axis=1,
    )
    return Constellation(normalize_power(pts)), BitLabeling(bits)


def random_constellation(size: int, dims: int, seed) -> Constellation:
    """`size` i.i.d. Gaussian points in `dims` dims, power normalised.

    Coincident points (a probability-zero event hit only by adversarial
    seeds) are resolved by redrawing the whole set.
    """
    if size < 2:
        raise ValueError(f"size must be >= 2, got {size}")
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    while True:
        pts = normalize_power(rng.standard_normal((size, dims)))
        if not _duplicate_rows(pts):
            return Constellation(pts)


def _duplicate_rows(pts: np.ndarray) -> bool:
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.fill_diagonal(d2, np.inf)
    return bool((d2 < 1e-12).any())


def sp_bpsk_12d() -> tuple[Constellation, BitLabeling]:
    """Set-partitioned 12D BPSK: one parity coset of the sign cube.

    Of the 4096 sign patterns of 12D BPSK, keep the 2048 whose sign bits
    have odd parity (the coset selected by setting the even-parity check
    bit of the first 11 sign bits); the parity constraint makes the 12th
    sign bit redundant, so the first 11 bits label the points.  Any two
    surviving patterns differ in at least two coordinates, doubling the
    minimum squared distance of the full cube.
    """
    rows = np.arange(4096, dtype=np.uint64)
    shifts = np.arange(11, -1, -1, dtype=np.uint64)
    bits12 = ((rows[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    keep = bits12.sum(axis=1) % 2 == 1
    bits12 = bits12[keep]
    points = (1.0 - 2.0 * bits12.astype(np.float64)) / math.sqrt(2.0)
    return Constellation(points), BitLabeling(bits12[:, :11])
