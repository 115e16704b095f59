"""Exact click-pattern distribution of one trial, and seeded sampling from it.

A trial is summarised by which of the twelve detection cells clicked
(detectors DW+, DW-, DR+, DR- times output peaks E, C, L), encoded as a
12-bit pattern code: bit `3 * detector_index + peak_index`.

The joint source state is a sum of product terms over pair numbers
(n_E, n_L). Each side (write photons; spin-wave -> read photons) is
evolved term by term, and threshold detection with finite efficiency is
diagonal in the Fock basis, so per-side Gram tensors

    G[A, s, t] = <side_s| Pi_A |side_t>

give the pair-click distribution P(Aw, Ar) = sum_st rho_st Gw[Aw,s,t] Gr[Ar,s,t].
Dark counts and background photons are independent click sources. For
an OR of independent sources the functions F(S) = P(no click outside S)
multiply, so noise is folded in with the subset-sum transform and
undone with its inverse.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import chi2

from ..core.errors import ModelError
from ..core.logs import log
from ..optics.interferometer import (
    InterferometerSetting,
    OUTPUT_LABELS,
    PEAKS,
    apply_mzi,
    background_cell_probabilities,
    jittered_settings,
)
from ..physics.dephasing import DephasingModel
from ..physics.modes import ModeRegister
from ..physics.source import (
    ATOMIC_E,
    ATOMIC_L,
    WRITE_E,
    WRITE_L,
    apply_readout,
    pair_terms,
)
from .events import DETECTORS, DetectionRecord

N_CELLS = 12
SIDE_CELLS = 6
N_PATTERNS = 1 << N_CELLS
CELLS = tuple((d, p) for d in DETECTORS for p in PEAKS)
WRITE_MASK = (1 << SIDE_CELLS) - 1
READ_MASK = WRITE_MASK << SIDE_CELLS
DISTRIBUTION_TOLERANCE = 1e-9
DEFAULT_BLOCK_SIZE = 65536

_SIDE_BITS = np.array([[(a >> c) & 1 for c in range(SIDE_CELLS)] for a in range(1 << SIDE_CELLS)], dtype=bool)
_POPCOUNT = np.array([bin(code).count("1") for code in range(N_PATTERNS)])


class MeasurementSettings(NamedTuple):
    write: InterferometerSetting
    read: InterferometerSetting

    @classmethod
    def from_config(cls, config, write_phase=None, read_phase=None):
        return cls(
            InterferometerSetting.from_config(config, "write", write_phase),
            InterferometerSetting.from_config(config, "read", read_phase),
        )


def cell_index(detector, peak):
    return DETECTORS.index(detector) * 3 + PEAKS.index(peak)


def pattern_code(cells):
    """Pattern code of an iterable of (detector, peak) pairs."""
    code = 0
    for detector, peak in cells:
        code |= 1 << cell_index(detector, peak)
    return code


def pattern_cells(code):
    return frozenset(CELLS[c] for c in range(N_CELLS) if (code >> c) & 1)


def _side_cell(label):
    """Side-local cell index of an output label such as 'C-'."""
    peak, port = label[0], label[1]
    return ("+", "-").index(port) * 3 + PEAKS.index(peak)


@dataclass(frozen=True, eq=False)
class TrialOutcomeDistribution:
    probabilities: np.ndarray
    cutoff: int = 0
    leakage: float = 0.0

    def __post_init__(self):
        p = self.probabilities
        if p.shape != (N_PATTERNS,):
            raise ModelError(f"distribution must have {N_PATTERNS} entries")
        if np.any(p < 0):
            raise ModelError(f"negative pattern probability {p.min():.3g}")
        if abs(p.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
            raise ModelError(f"pattern probabilities sum to {p.sum():.12g}")

    @property
    def entries(self):
        """Mapping from click pattern (frozenset of (detector, peak)) to probability."""
        return {pattern_cells(int(c)): float(self.probabilities[c]) for c in np.flatnonzero(self.probabilities)}

    def probability(self, cells):
        return float(self.probabilities[pattern_code(cells)])

    def click_probability(self, detector, peak):
        """Marginal probability that one cell clicks."""
        bit = 1 << cell_index(detector, peak)
        codes = np.arange(N_PATTERNS)
        return float(self.probabilities[(codes & bit) != 0].sum())

    def arm_click_probability(self, arm):
        mask = WRITE_MASK if arm == "write" else READ_MASK
        codes = np.arange(N_PATTERNS)
        return float(self.probabilities[(codes & mask) != 0].sum())

    def joint_click_probability(self):
        codes = np.arange(N_PATTERNS)
        both = ((codes & WRITE_MASK) != 0) & ((codes & READ_MASK) != 0)
        return float(self.probabilities[both].sum())


def _click_given_counts(counts, efficiency):
    """P(side pattern A | cell photon counts) for every A, shape (n, 64)."""
    q = 1.0 - (1.0 - efficiency) ** counts  # per-cell click probability
    return np.prod(np.where(_SIDE_BITS[None, :, :], q[:, None, :], 1.0 - q[:, None, :]), axis=2)


def side_gram(registers, arm, efficiency):
    """Gram tensor G[A, s, t] of a list of per-term side registers."""
    n_terms = len(registers)
    gram = np.zeros((1 << SIDE_CELLS, n_terms, n_terms), dtype=complex)
    modes = registers[0].modes
    cell_of = [
        _side_cell(m.label) if m.kind == arm and m.label in OUTPUT_LABELS else None
        for m in modes
    ]

    by_number = {}
    for t, register in enumerate(registers):
        if register.modes != modes:
            raise ModelError("side registers have inconsistent modes")
        for occ, amp in register.amplitudes.items():
            block = by_number.setdefault(sum(occ), {})
            block.setdefault(occ, {})[t] = amp

    for block in by_number.values():
        occs = list(block)
        terms = sorted({t for entry in block.values() for t in entry})
        amps = np.zeros((len(occs), len(terms)), dtype=complex)
        counts = np.zeros((len(occs), SIDE_CELLS))
        for i, occ in enumerate(occs):
            for j, t in enumerate(terms):
                amps[i, j] = block[occ].get(t, 0j)
            for n, cell in zip(occ, cell_of):
                if cell is not None:
                    counts[i, cell] += n
        click = _click_given_counts(counts, efficiency)
        sub = np.einsum("oa,os,ot->ast", click, amps.conj(), amps)
        gram[np.ix_(range(1 << SIDE_CELLS), terms, terms)] += sub
    return gram


@lru_cache(maxsize=256)
def _write_gram(numbers, setting, efficiency, bin_separation, jitter_nodes):
    gram = 0
    for node, weight in jittered_settings(setting, jitter_nodes):
        registers = [
            apply_mzi(ModeRegister.fock((WRITE_E, WRITE_L), n), "write", node, bin_separation)
            for n in numbers
        ]
        gram = gram + weight * side_gram(registers, "write", efficiency)
    return gram


@lru_cache(maxsize=256)
def _read_gram(numbers, cfg, model, setting, jitter_nodes):
    retrieved = [apply_readout(ModeRegister.fock((ATOMIC_E, ATOMIC_L), n), cfg, model) for n in numbers]
    gram = 0
    for node, weight in jittered_settings(setting, jitter_nodes):
        registers = [apply_mzi(r, "read", node, cfg.bin_separation) for r in retrieved]
        gram = gram + weight * side_gram(registers, "read", cfg.read_detection_efficiency)
    return gram


def subset_sum(values):
    """F(S) = sum over A subset of S of values[A]."""
    arr = np.asarray(values, dtype=float).reshape((2,) * N_CELLS)
    for axis in range(N_CELLS):
        arr = np.cumsum(arr, axis=axis)
    return arr.reshape(N_PATTERNS)


def subset_difference(values):
    """Inverse of subset_sum."""
    arr = np.asarray(values, dtype=float).reshape((2,) * N_CELLS)
    for axis in range(N_CELLS):
        arr = np.diff(arr, axis=axis, prepend=0.0)
    return arr.reshape(N_PATTERNS)


def _background_no_click(cell_probs, offset, prob, efficiency):
    """F(S) for one optional background photon landing in side cells at `offset`."""
    per_cell = np.zeros(N_CELLS)
    for label, p in zip(OUTPUT_LABELS, cell_probs):
        per_cell[offset + _side_cell(label)] += prob * efficiency * p
    codes = np.arange(N_PATTERNS)
    outside = np.array([[(~codes >> c) & 1 for c in range(N_CELLS)]]).reshape(N_CELLS, N_PATTERNS)
    return 1.0 - per_cell @ outside


def pair_distribution(cfg, settings, model=None, jitter_nodes=7):
    """Click-pattern probabilities from the pair source alone (no noise), shape (4096,)."""
    model = model or DephasingModel.default(cfg.rephasing_period)
    terms, cutoff, leakage = pair_terms(cfg)
    numbers = tuple(n for n, _ in terms)
    coeffs = np.array([a for _, a in terms])
    rho = np.outer(coeffs.conj(), coeffs)

    gw = _write_gram(numbers, settings.write, cfg.write_detection_efficiency, cfg.bin_separation, jitter_nodes)
    gr = _read_gram(numbers, cfg, model, settings.read, jitter_nodes)
    joint = np.einsum("st,ast,bst->ba", rho, gw, gr).real
    return joint.reshape(N_PATTERNS), cutoff, leakage


def outcome_distribution(cfg, settings, model=None, jitter_nodes=7):
    """Exact TrialOutcomeDistribution for one trial under cfg and settings."""
    pair, cutoff, leakage = pair_distribution(cfg, settings, model, jitter_nodes)
    if cfg.dark_count_prob == 0 and cfg.background_photon_prob == 0:
        # keep impossible patterns at exactly zero
        probs = np.clip(pair, 0.0, None)
        return TrialOutcomeDistribution(probs / probs.sum(), cutoff, leakage)

    f = subset_sum(pair)
    f *= (1.0 - cfg.dark_count_prob) ** (N_CELLS - _POPCOUNT)
    if cfg.background_photon_prob > 0:
        for offset, setting, eff in (
            (0, settings.write, cfg.write_detection_efficiency),
            (SIDE_CELLS, settings.read, cfg.read_detection_efficiency),
        ):
            cells = background_cell_probabilities(
                setting, cfg.background_coherence, cfg.background_phase, jitter_nodes
            )
            f *= _background_no_click(cells, offset, cfg.background_photon_prob, eff)

    probs = subset_difference(f)
    if probs.min() < -1e-12:
        raise ModelError(f"negative pattern probability {probs.min():.3g}")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return TrialOutcomeDistribution(probs, cutoff, leakage)


def _sample_block(cdf, seed, block, size):
    rng = np.random.default_rng([seed, block])
    codes = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(codes, N_PATTERNS - 1).astype(np.uint16)


def sample_patterns(dist, n_trials, seed, block_size=DEFAULT_BLOCK_SIZE, n_jobs=1):
    """Per-trial pattern codes. Block b of trials draws from the substream (seed, b)."""
    if n_trials <= 0:
        raise ValueError("n_trials must be positive")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    cdf = np.cumsum(dist.probabilities)
    cdf /= cdf[-1]
    sizes = [min(block_size, n_trials - start) for start in range(0, n_trials, block_size)]
    blocks = Parallel(n_jobs=n_jobs)(
        delayed(_sample_block)(cdf, seed, b, size) for b, size in enumerate(sizes)
    )
    return np.concatenate(blocks)


def patterns_to_records(codes):
    """DetectionRecords for pattern codes, in trial order then cell order."""
    codes = np.asarray(codes)
    for trial_id in np.flatnonzero(codes):
        code = int(codes[trial_id])
        for c in range(N_CELLS):
            if (code >> c) & 1:
                detector, peak = CELLS[c]
                yield DetectionRecord(int(trial_id), detector, peak)


def run_trials(cfg, settings, n_trials, seed, model=None, block_size=DEFAULT_BLOCK_SIZE, n_jobs=1):
    """Stream of DetectionRecords for n_trials i.i.d. trials."""
    dist = outcome_distribution(cfg, settings, model)
    log(f"sampling {n_trials} trials (seed={seed}, mu={cfg.mu}, cutoff={dist.cutoff})")
    codes = sample_patterns(dist, n_trials, seed, block_size, n_jobs)
    yield from patterns_to_records(codes)


def chi_square_test(dist, codes, min_expected=5.0):
    """Goodness of fit of sampled codes against dist.

    Patterns with expected count below `min_expected` are pooled into one
    bin. Returns (statistic, dof, p_value).
    """
    codes = np.asarray(codes)
    n = len(codes)
    observed = np.bincount(codes, minlength=N_PATTERNS).astype(float)
    expected = n * dist.probabilities
    if np.any(observed[expected == 0] > 0):
        return float("inf"), 0, 0.0
    big = expected >= min_expected
    obs_bins = list(observed[big])
    exp_bins = list(expected[big])
    rare = (~big) & (expected > 0)
    if expected[rare].sum() > 0:
        obs_bins.append(observed[rare].sum())
        exp_bins.append(expected[rare].sum())
    obs_bins = np.array(obs_bins)
    exp_bins = np.array(exp_bins)
    statistic = float(np.sum((obs_bins - exp_bins) ** 2 / exp_bins))
    dof = len(exp_bins) - 1
    return statistic, dof, float(chi2.sf(statistic, dof))
