"""SNR sweeps, dB-gain readout, operating points, and shape statistics.

This module turns estimator calls into plot-ready data: sweeps over an
SNR grid, piecewise-linear interpolation of the SNR needed to reach a
target rate, pairwise dB gains at a fixed rate, FEC-overhead operating
points, and a pooled-coordinate Gaussianity report (histogram, KS
distance against a matched-variance Gaussian, excess kurtosis).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .air import (
    EstimatorSpec,
    capacity_per_2d,
    evaluate_air,
    parse_estimator,
)
from .model import AirEstimate, BitLabeling, ChannelSpec, Constellation

__all__ = [
    "SweepRow",
    "SweepResult",
    "snr_sweep",
    "snr_at_air",
    "gain_db",
    "overhead_operating_point",
    "GaussianityReport",
    "coordinate_gaussianity",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_trace_csv",
    "write_gaussianity_csv",
]


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    value: float
    value_per_2d: float
    ngmi: float
    std_error: Optional[float]
    method: str


@dataclass(frozen=True)
class SweepResult:
    """AIR values over a strictly ascending SNR grid."""

    metric: str
    bits_per_symbol: float
    rows: tuple[SweepRow, ...]

    @property
    def snr_grid(self) -> np.ndarray:
        return np.array([r.snr_db for r in self.rows])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])


def snr_sweep(
    constellation: Constellation,
    labeling: Optional[BitLabeling],
    metric: str,
    snr_grid: Sequence[float],
    estimator: Union[str, EstimatorSpec],
    seed: int = 0,
) -> SweepResult:
    """Evaluate MI or GMI at every grid point with one estimator.

    Stochastic estimators get an independent substream per row, derived
    from ``seed``, so rows are uncorrelated but the whole sweep is
    reproducible.
    """
    if len(snr_grid) == 0:
        raise ValueError("snr_grid must not be empty")
    grid = [float(s) for s in snr_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("snr_grid must be strictly ascending")
    spec = parse_estimator(estimator) if isinstance(estimator, str) else estimator
    metric = metric.upper()
    if metric == "GMI":
        if labeling is None:
            raise ValueError("GMI requires a bit labeling")
        bits = float(labeling.bits_per_symbol)
    else:
        bits = math.log2(constellation.size)
    root = np.random.SeedSequence((spec.seed, seed))
    streams = root.spawn(len(grid))
    rows = []
    for snr_db, stream in zip(grid, streams):
        channel = ChannelSpec(snr_db, constellation.dims)
        entropy = stream if spec.kind in ("mc", "rq") else None
        est = evaluate_air(spec, constellation, labeling, metric, channel, entropy)
        rows.append(
            SweepRow(snr_db, est.value, est.value_per_2d, est.value / bits,
                     est.std_error, est.method)
        )
    return SweepResult(metric, bits, tuple(rows))


def snr_at_air(sweep: SweepResult, target_air: float) -> float:
    """SNR (dB) where the sweep crosses a target rate, by interpolation.

    Scans for the first grid interval bracketing the target and
    interpolates linearly in (SNR, value).  The target must lie within
    the sweep's value range.
    """
    rows = sweep.rows
    if len(rows) == 1:
        if rows[0].value == target_air:
            return rows[0].snr_db
        raise ValueError(f"target {target_air} outside sweep value range")
    for a, b in zip(rows, rows[1:]):
        lo, hi = sorted((a.value, b.value))
        if lo <= target_air <= hi:
            if a.value == b.value:
                return a.snr_db
            frac = (target_air - a.value) / (b.value - a.value)
            return a.snr_db + frac * (b.snr_db - a.snr_db)
    raise ValueError(f"target {target_air} outside sweep value range")


def gain_db(a: SweepResult, b: SweepResult, target_air: float) -> float:
    """SNR advantage of sweep ``a`` over sweep ``b`` at a target rate.

    Positive when ``a`` reaches the target at lower SNR than ``b``.
    """
    return snr_at_air(b, target_air) - snr_at_air(a, target_air)


def overhead_operating_point(
    sweep: SweepResult, bits_per_symbol: int, overhead: float
) -> tuple[float, float]:
    """(SNR, rate) where NGMI equals the rate of a code with this overhead.

    A code of overhead OH has rate 1/(1+OH), so the operating point is
    where the sweep's value crosses bits_per_symbol/(1+OH).
    """
    if overhead < 0:
        raise ValueError(f"overhead must be >= 0, got {overhead}")
    target = bits_per_symbol / (1.0 + overhead)
    return snr_at_air(sweep, target), target


@dataclass(frozen=True)
class GaussianityReport:
    """Pooled-coordinate shape statistics for a constellation.

    ``density`` holds the histogram as a probability density over
    ``bin_edges``; ``gauss_density`` is the zero-mean matched-variance
    Gaussian pdf at the bin centres.
    """

    bin_edges: np.ndarray
    density: np.ndarray
    gauss_density: np.ndarray
    ks_distance: float
    excess_kurtosis: float
    sigma: float

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def coordinate_gaussianity(constellation: Constellation, bins: int = 61) -> GaussianityReport:
    """How Gaussian the pooled per-coordinate distribution looks.

    Pools all M*N coordinates, then reports a histogram over a symmetric
    range, the Kolmogorov-Smirnov distance against a zero-mean Gaussian
    whose variance matches the pooled second moment, and the pooled
    excess kurtosis.  Capacity-approaching constellations drive all three
    toward their Gaussian values (kurtosis 0).
    """
    if bins < 8:
        raise ValueError(f"bins must be >= 8, got {bins}")
    coords = constellation.points.reshape(-1)
    sigma = math.sqrt(float((coords**2).mean()))
    if sigma <= 0:
        raise ValueError("degenerate constellation")
    span = 4.0 * sigma
    density, edges = np.histogram(coords, bins=bins, range=(-span, span), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    gauss = np.exp(-0.5 * (centers / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    ks = float(stats.kstest(coords, "norm", args=(0.0, sigma)).statistic)
    kurt = float(stats.kurtosis(coords, fisher=True, bias=True))
    return GaussianityReport(edges, density, gauss, ks, kurt, sigma)


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------

_SWEEP_FIELDS = ["snr_db", "value", "value_per_2d", "ngmi", "std_error", "method"]


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_sweep_csv(sweep: SweepResult, path, include_capacity: bool = False) -> None:
    """One row per sweep point; optionally with a per-2D capacity column."""
    fields = list(_SWEEP_FIELDS) + (["capacity_per_2d"] if include_capacity else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in sweep.rows:
            out = [
                _fmt(row.snr_db),
                _fmt(row.value),
                _fmt(row.value_per_2d),
                _fmt(row.ngmi),
                "" if row.std_error is None else _fmt(row.std_error),
                row.method,
            ]
            if include_capacity:
                out.append(_fmt(capacity_per_2d(row.snr_db)))
            writer.writerow(out)


def read_sweep_csv(path, metric: str = "MI", bits_per_symbol: float = 0.0) -> SweepResult:
    """Read a sweep CSV written by :func:`write_sweep_csv`."""
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"snr_db", "value"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: not a sweep CSV (need snr_db and value columns)")
        for rec in reader:
            rows.append(
                SweepRow(
                    float(rec["snr_db"]),
                    float(rec["value"]),
                    float(rec.get("value_per_2d") or "nan"),
                    float(rec.get("ngmi") or "nan"),
                    float(rec["std_error"]) if rec.get("std_error") else None,
                    rec.get("method", ""),
                )
            )
    return SweepResult(metric, bits_per_symbol, tuple(rows))


def write_trace_csv(trace, path) -> None:
    """Optimisation trace CSV: iteration, surrogate_loss, reference_air, wall_ms.

    ``reference_air`` is blank on iterations without a reference
    evaluation.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "surrogate_loss", "reference_air", "wall_ms"])
        for point in trace:
            writer.writerow(
                [
                    point.iteration,
                    _fmt(point.surrogate_loss),
                    "" if point.reference_air is None else _fmt(point.reference_air),
                    _fmt(point.wall_ms),
                ]
            )


def write_gaussianity_csv(report: GaussianityReport, path) -> None:
    """Histogram rows: bin_center, density, gauss_density."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_center", "density", "gauss_density"])
        for center, dens, gauss in zip(report.bin_centers, report.density,
                                       report.gauss_density):
            writer.writerow([_fmt(center), _fmt(dens), _fmt(gauss)])
