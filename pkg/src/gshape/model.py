"""Core data types: constellations, bit labelings, channel parameters.

Conventions used throughout the package:

* A constellation is a set of M points in R^N, stored row-wise as an
  (M, N) float64 array.  N real dimensions carry N/2 complex (quadrature)
  channels, so unit average power per 2D pair means mean ||x||^2 == N/2.
* Noise is i.i.d. real Gaussian per dimension with standard deviation
  sigma_d, and SNR = 1 / (2 sigma_d^2) per 2D pair.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Constellation",
    "BitLabeling",
    "ChannelSpec",
    "AirEstimate",
    "normalize_power",
    "validate",
    "save_constellation",
    "load_constellation",
]

#: Absolute tolerance on the mean squared norm for a constellation to count
#: as power-normalised.
POWER_TOL = 1e-12

#: Two points closer than this Euclidean distance count as duplicates.
DUPLICATE_TOL = 1e-12

FILE_MAGIC = "GSHAPE v1"


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be a 2D array, got shape {pts.shape}")
    if pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError(f"points must be non-empty, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Constellation:
    """An M-point constellation in N real dimensions.

    The point array is copied and frozen on construction.  Structural
    problems (wrong rank, empty) raise ValueError immediately; semantic
    problems (power, duplicates, non-finite entries) are reported by
    :func:`validate` so that callers can inspect broken inputs.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        """Number of points M."""
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        """Number of real dimensions N."""
        return self.points.shape[1]

    @property
    def bits_per_symbol(self) -> float:
        """log2(M); an integer only when M is a power of two."""
        return math.log2(self.size)

    def mean_power(self) -> float:
        """Mean squared Euclidean norm over the points."""
        return float(np.einsum("ij,ij->i", self.points, self.points).mean())

    def normalized(self) -> "Constellation":
        """Return a copy scaled to mean power N/2 (unit power per 2D)."""
        return Constellation(normalize_power(self.points))


@dataclass(frozen=True)
class BitLabeling:
    """Assigns an m-bit pattern to each of M constellation points.

    Stored as an (M, m) uint8 array of 0/1 values; row i labels point i.
    Bijectivity (all rows distinct, M == 2^m) is checked by
    :func:`validate`, not here, so malformed labelings can be constructed
    and then reported.
    """

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise ValueError(f"bits must be a non-empty 2D array, got shape {b.shape}")
        if not np.isin(b, (0, 1)).all():
            raise ValueError("bits must contain only 0 and 1")
        b = b.astype(np.uint8).copy()
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    @property
    def bits_per_symbol(self) -> int:
        """Number of bits m per label."""
        return self.bits.shape[1]

    def strings(self) -> list[str]:
        """Labels as '0'/'1' strings, one per point."""
        return ["".join("1" if v else "0" for v in row) for row in self.bits]


@dataclass(frozen=True)
class ChannelSpec:
    """AWGN channel at a given SNR for an N-dimensional constellation.

    SNR is defined per 2D (per complex channel use) as 1 / (2 sigma_d^2)
    where sigma_d is the noise standard deviation per real dimension.
    With constellations normalised to unit power per 2D this matches the
    usual Es/N0 convention.
    """

    snr_db: float
    dims: int

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError(f"dims must be >= 1, got {self.dims}")
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def sigma_d(self) -> float:
        """Noise standard deviation per real dimension."""
        return math.sqrt(1.0 / (2.0 * self.snr_linear))


@dataclass(frozen=True)
class AirEstimate:
    """An achievable-information-rate value in bits per N-dim symbol.

    ``std_error`` is the standard error of the estimate and is only set by
    Monte Carlo estimators; quadrature estimators leave it None.
    """

    value: float
    dims: int
    method: str
    std_error: Optional[float] = None

    @property
    def value_per_2d(self) -> float:
        """Rate per 2D pair (bits per complex channel use)."""
        return self.value / (self.dims / 2.0)


def normalize_power(points) -> np.ndarray:
    """Scale a point set so the mean squared norm equals N/2.

    Parameters
    ----------
    points : (M, N) array_like

    Returns
    -------
    (M, N) float64 ndarray

    Raises
    ------
    ValueError
        If all points are (numerically) at the origin, with the message
        "degenerate constellation".
    """
    pts = _as_points(points)
    if not np.isfinite(pts).all():
        raise ValueError("points contain non-finite values")
    mean_sq = float(np.einsum("ij,ij->i", pts, pts).mean())
    if mean_sq <= 0.0 or not math.isfinite(mean_sq):
        raise ValueError("degenerate constellation")
    scale = math.sqrt((pts.shape[1] / 2.0) / mean_sq)
    return pts * scale


def _duplicate_pairs(pts: np.ndarray) -> list[tuple[int, int]]:
    """All index pairs (i, j), i < j, closer than DUPLICATE_TOL.

    Candidate pairs are found with the Gram-matrix distance expansion and
    then re-checked by direct subtraction, since the expansion loses
    absolute precision around 1e-16 and the tolerance is far below that.
    """
    m = pts.shape[0]
    sq = np.einsum("ij,ij->i", pts, pts)
    pairs: list[tuple[int, int]] = []
    chunk = max(1, int(4_000_000 // max(m, 1)))
    coarse = max(DUPLICATE_TOL**2, 1e-12)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (pts[start:stop] @ pts.T)
        cand = np.argwhere(d2 < coarse)
        for a, j in cand:
            i = start + int(a)
            j = int(j)
            if i >= j:
                continue
            diff = pts[i] - pts[j]
            if float(diff @ diff) < DUPLICATE_TOL**2:
                pairs.append((i, j))
    return sorted(pairs)


def validate(constellation: Constellation, labeling: Optional[BitLabeling] = None) -> list[str]:
    """Check semantic invariants; return a list of violation strings.

    An empty list means the constellation (and labeling, if given) is
    valid: all coordinates finite, mean power N/2 within POWER_TOL, no two
    points within DUPLICATE_TOL of each other, and, when a labeling is
    present, M == 2^m with all labels distinct.
    """
    pts = constellation.points
    violations: list[str] = []

    finite = np.isfinite(pts).all(axis=1)
    if not finite.all():
        for i in np.flatnonzero(~finite):
            violations.append(f"non-finite coordinates at point {int(i)}")
        return violations  # distance / power checks are meaningless now

    target = constellation.dims / 2.0
    mean_sq = constellation.mean_power()
    if abs(mean_sq - target) > POWER_TOL:
        violations.append(
            f"mean squared norm {mean_sq!r} differs from N/2 = {target!r}"
        )

    for i, j in _duplicate_pairs(pts):
        violations.append(f"duplicate points ({i},{j})")

    if labeling is not None:
        m_bits = labeling.bits_per_symbol
        if labeling.size != constellation.size:
            violations.append(
                f"labeling has {labeling.size} rows for {constellation.size} points"
            )
        if constellation.size != 2**m_bits:
            violations.append(
                f"point count {constellation.size} is not 2^{m_bits}"
            )
        if np.unique(labeling.bits, axis=0).shape[0] != labeling.size:
            violations.append("labels not bijective")

    return violations


# ---------------------------------------------------------------------------
# File format
#
#   GSHAPE v1
#   name=<string>
#   M=<int> N=<int> m=<int>
#   <M lines of N whitespace-separated floats>
#   <M lines of m-character bit strings, only when m > 0>
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(r"^M=(\d+) N=(\d+) m=(\d+)$")
_BITS_RE = re.compile(r"^[01]+$")


def save_constellation(
    path,
    constellation: Constellation,
    labeling: Optional[BitLabeling] = None,
    name: str = "",
) -> None:
    """Write a constellation (and optional labeling) in GSHAPE v1 format.

    Coordinates are written with 17 significant digits, enough for an
    exact float64 round trip.
    """
    if "\n" in name or "\r" in name:
        raise ValueError("name must not contain line breaks")
    if labeling is not None and labeling.size != constellation.size:
        raise ValueError("labeling size does not match constellation")
    m_bits = labeling.bits_per_symbol if labeling is not None else 0
    lines = [FILE_MAGIC, f"name={name}",
             f"M={constellation.size} N={constellation.dims} m={m_bits}"]
    for row in constellation.points:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    if labeling is not None:
        lines.extend(labeling.strings())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _fail(lineno: int, why: str):
    raise ValueError(f"line {lineno}: {why}")


def load_constellation(path) -> tuple[Constellation, Optional[BitLabeling], str]:
    """Parse a GSHAPE v1 file.

    Returns (constellation, labeling or None, name).  Any deviation from
    the format raises ValueError mentioning the offending line number.
    """
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # single trailing newline is fine

    if len(lines) < 3:
        _fail(len(lines) + 1, "unexpected end of file")
    if lines[0] != FILE_MAGIC:
        _fail(1, f"expected {FILE_MAGIC!r}")
    if not lines[1].startswith("name="):
        _fail(2, "expected name=<string>")
    name = lines[1][len("name="):]
    header = _HEADER_RE.match(lines[2])
    if header is None:
        _fail(3, "expected M=<int> N=<int> m=<int>")
    m_points, n_dims, m_bits = (int(g) for g in header.groups())
    if m_points < 1:
        _fail(3, "M must be >= 1")
    if n_dims < 1:
        _fail(3, "N must be >= 1")

    expected = 3 + m_points + (m_points if m_bits > 0 else 0)
    if len(lines) > expected:
        _fail(expected + 1, "trailing content after constellation data")

    pts = np.empty((m_points, n_dims), dtype=np.float64)
    for i in range(m_points):
        lineno = 4 + i
        if 3 + i >= len(lines):
            _fail(lineno, "unexpected end of file")
        fields = lines[3 + i].split()
        if len(fields) != n_dims:
            _fail(lineno, f"expected {n_dims} coordinates, got {len(fields)}")
        try:
            row = [float(f) for f in fields]
        except ValueError:
            _fail(lineno, "invalid float")
        if not all(math.isfinite(v) for v in row):
            _fail(lineno, "non-finite coordinate")
        pts[i] = row

    labeling = None
    if m_bits > 0:
        bits = np.empty((m_points, m_bits), dtype=np.uint8)
        for i in range(m_points):
            lineno = 4 + m_points + i
            if 3 + m_points + i >= len(lines):
                _fail(lineno, "unexpected end of file")
            s = lines[3 + m_points + i]
            if len(s) != m_bits or not _BITS_RE.match(s):
                _fail(lineno, f"expected {m_bits}-character bit string")
            bits[i] = [1 if ch == "1" else 0 for ch in s]
        labeling = BitLabeling(bits)

    return Constellation(pts), labeling, name
