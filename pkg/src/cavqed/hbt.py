"""Correlation analysis of photon click streams.

Emulates the measurement electronics downstream of the detectors: a 50:50
beam splitter, start-stop (first-stop) or all-pairs delay histogramming over
a finite window, CW and pulsed g2 normalization, and pulsed peak-area
analysis.  Everything operates on plain sorted float arrays of click times
in ns, so the same code digests simulated and imported data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CorrelationTrace

__all__ = [
    "Histogram",
    "PeakAreaReport",
    "split_beam",
    "start_stop_histogram",
    "normalize_g2",
    "pulsed_peak_areas",
    "merge_histograms",
    "poisson_stream",
]


@dataclass
class Histogram:
    """Counts of start-stop delays with the totals needed for normalization."""

    bin_edges_ns: np.ndarray
    counts: np.ndarray
    n_starts: int
    n_stops: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bin_edges_ns = np.asarray(self.bin_edges_ns, dtype=float)
        self.counts = np.asarray(self.counts)
        if np.any(np.diff(self.bin_edges_ns) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if self.counts.size != self.bin_edges_ns.size - 1:
            raise ValueError("counts length must be number of bins")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def centers_ns(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ns[1:] + self.bin_edges_ns[:-1])

    @property
    def bin_width_ns(self) -> float:
        return float(self.bin_edges_ns[1] - self.bin_edges_ns[0])


@dataclass(frozen=True)
class PeakAreaReport:
    """Pulsed-autocorrelation peak areas around multiples of the pulse period."""

    central_area: float
    mean_side_area: float
    ratio: float
    peak_offsets: np.ndarray      # integer multiples of the period
    peak_areas: np.ndarray
    half_window_ns: float
    rep_period_ns: float


def split_beam(times_ns: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Route each click independently to output A or B with probability 1/2."""
    times = np.asarray(times_ns, dtype=float)
    # Fixed second key word so the splitter draws never collide with other
    # consumers of the same master seed.
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0x5011771E12], dtype=np.uint64)))
    to_a = rng.random(times.size) < 0.5
    return times[to_a], times[~to_a]


def _pairs_within(starts: np.ndarray, stops: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Delays stop - start for every pair with lo <= delay <= hi (vectorized)."""
    left = np.searchsorted(stops, starts + lo, side="left")
    right = np.searchsorted(stops, starts + hi, side="right")
    counts = right - left
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    offsets = np.repeat(left, counts)
    within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return stops[offsets + within] - np.repeat(starts, counts)


def _first_stops(starts: np.ndarray, stops: np.ndarray, window: float) -> np.ndarray:
    """First stop after each start (classic TAC), within the window."""
    idx = np.searchsorted(stops, starts, side="right")
    valid = idx < stops.size
    delays = stops[idx[valid]] - starts[valid]
    return delays[delays <= window]


def start_stop_histogram(starts_ns: np.ndarray, stops_ns: np.ndarray,
                         bin_ns: float = 0.25, window_ns: float = 100.0,
                         estimator: str = "all-pairs") -> Histogram:
    """Two-sided delay histogram between a start and a stop stream.

    Positive delays are stop-after-start; negative delays come from the
    mirrored role assignment, as in a two-detector timer that is started by
    whichever stream fires first.  ``estimator`` selects ``"all-pairs"``
    (every pair inside the window; unbiased at high rates) or
    ``"start-stop"`` (first stop per start, the hardware TAC behaviour).
    """
    starts = np.asarray(starts_ns, dtype=float)
    stops = np.asarray(stops_ns, dtype=float)
    if starts.size == 0 or stops.size == 0:
        raise ValueError("both click streams must be non-empty")
    if np.any(np.diff(starts) < 0) or np.any(np.diff(stops) < 0):
        raise ValueError("click streams must be time-sorted")
    if bin_ns <= 0 or window_ns <= bin_ns:
        raise ValueError("need bin_ns > 0 and window_ns > bin_ns")
    n_bins = int(round(window_ns / bin_ns))
    edges = bin_ns * np.arange(-n_bins, n_bins + 1)
    if estimator == "all-pairs":
        pos = _pairs_within(starts, stops, 0.0, edges[-1])
        neg = _pairs_within(stops, starts, 0.0, edges[-1])
    elif estimator == "start-stop":
        pos = _first_stops(starts, stops, edges[-1])
        neg = _first_stops(stops, starts, edges[-1])
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    neg = neg[neg > 0]  # exact-zero pairs belong to the positive side only
    counts = (np.histogram(pos, bins=edges)[0]
              + np.histogram(-neg, bins=edges)[0])
    return Histogram(edges, counts, n_starts=starts.size, n_stops=stops.size,
                     meta={"estimator": estimator, "bin_ns": bin_ns,
                           "window_ns": window_ns})


def normalize_g2(h: Histogram, duration_ns: float | None = None,
                 rates_per_ns: tuple[float, float] | None = None,
                 mode: str = "cw", rep_period_ns: float | None = None,
                 half_window_ns: float | None = None) -> CorrelationTrace:
    """Histogram to normalized g2.

    CW mode divides by n_starts * r_stop * bin, the uncorrelated coincidence
    level; pass either the acquisition ``duration_ns`` (rates are inferred
    from the recorded totals) or explicit ``rates_per_ns``.  Pulsed mode
    divides by the mean side-peak level from :func:`pulsed_peak_areas`.
    """
    if mode == "cw":
        if rates_per_ns is not None:
            r_stop = rates_per_ns[1]
        elif duration_ns:
            r_stop = h.n_stops / duration_ns
        else:
            raise ValueError("cw normalization needs duration_ns or rates_per_ns")
        denom = h.n_starts * r_stop * h.bin_width_ns
    elif mode == "pulsed":
        if not rep_period_ns:
            raise ValueError("pulsed normalization needs rep_period_ns")
        report = pulsed_peak_areas(h, rep_period_ns,
                                   half_window_ns or rep_period_ns / 4.0)
        denom = report.mean_side_area * h.bin_width_ns / (2.0 * report.half_window_ns)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if denom <= 0:
        raise ValueError("zero normalization: no uncorrelated coincidence level")
    return CorrelationTrace(h.centers_ns, h.counts / denom, normalization=float(denom),
                            meta=dict(h.meta, mode=mode))


def pulsed_peak_areas(h: Histogram, rep_period_ns: float,
                      half_window_ns: float) -> PeakAreaReport:
    """Integrate counts around every multiple of the pulse period in range."""
    if half_window_ns <= 0 or 2.0 * half_window_ns > rep_period_ns:
        raise ValueError("peak windows overlap: need 2*half_window <= rep_period")
    lo, hi = h.bin_edges_ns[0], h.bin_edges_ns[-1]
    k_min = int(math.ceil((lo + half_window_ns) / rep_period_ns))
    k_max = int(math.floor((hi - half_window_ns) / rep_period_ns))
    offsets = np.arange(k_min, k_max + 1)
    if offsets.size < 4 or 0 not in offsets:
        raise ValueError("histogram window must cover the central and >= 3 side peaks")
    centers = h.centers_ns
    areas = np.array([
        float(h.counts[np.abs(centers - k * rep_period_ns) <= half_window_ns].sum())
        for k in offsets
    ])
    central = float(areas[offsets == 0][0])
    side = areas[offsets != 0]
    mean_side = float(side.mean())
    if mean_side <= 0:
        raise ValueError("no counts in the side peaks; cannot form a ratio")
    return PeakAreaReport(central_area=central, mean_side_area=mean_side,
                          ratio=central / mean_side, peak_offsets=offsets,
                          peak_areas=areas, half_window_ns=half_window_ns,
                          rep_period_ns=rep_period_ns)


def merge_histograms(parts: list[Histogram]) -> Histogram:
    """Sum shard histograms accumulated over disjoint start ranges."""
    if not parts:
        raise ValueError("nothing to merge")
    first = parts[0]
    for h in parts[1:]:
        if not np.array_equal(h.bin_edges_ns, first.bin_edges_ns):
            raise ValueError("histograms have different binning")
    return Histogram(
        first.bin_edges_ns.copy(),
        np.sum([h.counts for h in parts], axis=0),
        n_starts=sum(h.n_starts for h in parts),
        n_stops=sum(h.n_stops for h in parts),
        meta=dict(first.meta),
    )


def poisson_stream(rate_per_ns: float, duration_ns: float, seed: int,
                   stream_index: int = 0) -> np.ndarray:
    """Homogeneous Poisson click times on [0, duration); the uncorrelated reference."""
    if rate_per_ns <= 0 or duration_ns <= 0:
        raise ValueError("rate and duration must be positive")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, stream_index],
                                                            dtype=np.uint64)))
    n_expected = rate_per_ns * duration_ns
    gaps = rng.exponential(1.0 / rate_per_ns, size=int(n_expected + 6 * math.sqrt(n_expected) + 10))
    times = np.cumsum(gaps)
    while times[-1] < duration_ns:
        gaps = rng.exponential(1.0 / rate_per_ns, size=gaps.size)
        times = np.concatenate([times, times[-1] + np.cumsum(gaps)])
    return times[times < duration_ns]
