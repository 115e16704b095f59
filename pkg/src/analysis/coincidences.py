"""Write/read coincidence counting from click records or pattern codes.

Two counting modes:

  side_peaks    write x read coincidences between the E and L side peaks,
                either detector, giving C[b_w][b_r] with b in (E, L)
  central_peak  detector-pair coincidences in the central peak C,
                giving N[i][j] with i, j in (+, -)

A trial with more than one counted click on either arm is discarded and
tallied instead of counted.
"""

from dataclasses import dataclass, field
from itertools import groupby

import numpy as np

from ..core.errors import StatisticsError
from ..sim.events import DETECTORS, PEAKS, EventStream
from ..sim.montecarlo import N_PATTERNS, cell_index

MODES = ("side_peaks", "central_peak")
BIN_LABELS = {"side_peaks": ("E", "L"), "central_peak": ("+", "-")}


@dataclass
class CoincidenceTable:
    mode: str
    counts: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=np.int64))
    trials: int = 0
    discarded: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise StatisticsError(f"unknown coincidence mode '{self.mode}'")
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (2, 2):
            raise StatisticsError("coincidence table must be 2x2")
        if np.any(self.counts < 0):
            raise StatisticsError("coincidence counts must be non-negative")

    def __add__(self, other):
        if not isinstance(other, CoincidenceTable):
            return NotImplemented
        if other.mode != self.mode:
            raise StatisticsError(f"cannot merge {self.mode} and {other.mode} tables")
        return CoincidenceTable(
            self.mode,
            self.counts + other.counts,
            self.trials + other.trials,
            self.discarded + other.discarded,
        )

    def __eq__(self, other):
        if not isinstance(other, CoincidenceTable):
            return NotImplemented
        return (
            self.mode == other.mode
            and np.array_equal(self.counts, other.counts)
            and self.trials == other.trials
            and self.discarded == other.discarded
        )

    @property
    def total(self):
        return self.counts.sum()

    def count(self, write_bin, read_bin):
        labels = BIN_LABELS[self.mode]
        return self.counts[labels.index(write_bin), labels.index(read_bin)]

    def as_dict(self):
        labels = BIN_LABELS[self.mode]
        return {f"{a}{b}": self.counts[i, j] for i, a in enumerate(labels) for j, b in enumerate(labels)}


def histogram(events):
    """Click counts per (peak, detector), in canonical order."""
    records = events.records if isinstance(events, EventStream) else events
    counts = {(p, d): 0 for p in PEAKS for d in DETECTORS}
    for r in records:
        counts[(r.peak, r.detector)] += 1
    return counts


def _counted_cells(mode, arm):
    """(cell index, bin index) pairs that count for one arm."""
    dets = DETECTORS[:2] if arm == "write" else DETECTORS[2:]
    if mode == "side_peaks":
        return [(cell_index(d, p), b) for d in dets for b, p in enumerate(("E", "L"))]
    return [(cell_index(d, "C"), b) for b, d in enumerate(dets)]


def coincidences(events, mode="side_peaks", trials=None):
    """CoincidenceTable from DetectionRecords (or an EventStream)."""
    if mode not in MODES:
        raise StatisticsError(f"unknown coincidence mode '{mode}'")
    if isinstance(events, EventStream):
        trials = events.trials if trials is None else trials
        events = events.records
    write_cells = dict(_counted_cells(mode, "write"))
    read_cells = dict(_counted_cells(mode, "read"))

    counts = np.zeros((2, 2), dtype=np.int64)
    discarded = 0
    last_trial = -1
    for trial_id, group in groupby(sorted(events), key=lambda r: r.trial_id):
        last_trial = trial_id
        cells = {cell_index(r.detector, r.peak) for r in group}
        w = [write_cells[c] for c in cells if c in write_cells]
        r = [read_cells[c] for c in cells if c in read_cells]
        if len(w) > 1 or len(r) > 1:
            discarded += 1
        elif w and r:
            counts[w[0], r[0]] += 1
    if trials is None:
        trials = last_trial + 1
    return CoincidenceTable(mode, counts, int(trials), discarded)


def coincidences_from_patterns(codes, mode="side_peaks", weights=None):
    """CoincidenceTable from per-trial pattern codes.

    With `weights`, codes are distinct patterns and each carries a
    (possibly fractional) number of trials; counts are then floats.
    """
    if mode not in MODES:
        raise StatisticsError(f"unknown coincidence mode '{mode}'")
    codes = np.asarray(codes, dtype=np.int64)
    w = np.ones(len(codes), dtype=np.int64) if weights is None else np.asarray(weights)

    def arm_bins(arm):
        hits = np.zeros(len(codes), dtype=np.int64)
        bins = np.full(len(codes), -1)
        for cell, b in _counted_cells(mode, arm):
            on = ((codes >> cell) & 1).astype(bool)
            hits += on
            bins = np.where(on, b, bins)
        return hits, bins

    w_hits, w_bins = arm_bins("write")
    r_hits, r_bins = arm_bins("read")
    multi = (w_hits > 1) | (r_hits > 1)
    counted = ~multi & (w_hits == 1) & (r_hits == 1)

    counts = np.zeros((2, 2), dtype=w.dtype)
    np.add.at(counts, (w_bins[counted], r_bins[counted]), w[counted])
    return CoincidenceTable(mode, counts, w.sum(), w[multi].sum())


def expected_table(dist, n_trials, mode="side_peaks"):
    """Expected (float) coincidence table of n_trials drawn from dist."""
    return coincidences_from_patterns(np.arange(N_PATTERNS), mode, dist.probabilities * n_trials)
