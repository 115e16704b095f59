"""Photon / spin-wave pair source and spin-wave readout.

The write pulse has two peaks (early and late bin). Each bin produces a
two-mode squeezed state between a write photon mode and an atomic
spin-wave mode; the late bin carries the write-pulse phase difference.
Readout maps each atomic bin onto the read photon bin of the same index
through a beam splitter whose transmission is set by the retrieval
efficiency, the pi/2-pi transfer ceiling and the spin-wave overlap.
"""

from dataclasses import dataclass, replace
from math import log, sqrt

import numpy as np
from scipy.special import erf

from ..core.errors import ConfigError, ModelError
from ..core.logs import log as run_log
from .dephasing import overlap_efficiency
from .modes import Mode, ModeRegister, apply_linear_map, isometry_completion

BINS = ("E", "L")
FWHM_TO_SIGMA = 1.0 / (2.0 * sqrt(2.0 * log(2.0)))
TRANSFER_CEILING = 0.5
MAX_CUTOFF = 8

WRITE_E = Mode("write", "E")
WRITE_L = Mode("write", "L")
ATOMIC_E = Mode("atomic", "E")
ATOMIC_L = Mode("atomic", "L")
READ_E = Mode("read", "E")
READ_L = Mode("read", "L")
# Cross-talk retrievals land in the other read bin without a fixed phase
# relation to the collective readout; tags keep them from interfering.
READ_L_FROM_E = Mode("read", "L", "xE")
READ_E_FROM_L = Mode("read", "E", "xL")
LOST_E = Mode("lost", "E")
LOST_L = Mode("lost", "L")


@dataclass(frozen=True)
class ExperimentConfig:
    """Physical and statistical parameters of one simulated run, SI units."""

    mu: float = 0.02
    write_phase_diff: float = 0.0
    read_phase_diff: float = 0.0
    bin_separation: float = 172e-9
    rephasing_period: float = 344e-9
    readout_time: float = 344e-9
    readout_transfer: float = 0.5
    retrieval_efficiency: float = 0.5
    readout_crosstalk: float = 0.0
    detector_efficiency: float = 0.5
    dark_count_prob: float = 0.0
    background_photon_prob: float = 0.0
    background_coherence: float = 0.0
    background_phase: float = 0.0
    write_gate: float = 30e-9
    read_gate: float = 40e-9
    write_photon_fwhm: float = 0.0
    read_photon_fwhm: float = 0.0
    time_bin_encoding: bool = True
    fock_cutoff: int = 2
    max_leakage: float = 1e-3
    auto_cutoff: bool = True
    allow_transfer_override: bool = False

    def __post_init__(self):
        probabilities = {
            "readout_transfer": self.readout_transfer,
            "retrieval_efficiency": self.retrieval_efficiency,
            "readout_crosstalk": self.readout_crosstalk,
            "detector_efficiency": self.detector_efficiency,
            "dark_count_prob": self.dark_count_prob,
            "background_photon_prob": self.background_photon_prob,
            "background_coherence": self.background_coherence,
        }
        for name, value in probabilities.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.mu < 0:
            raise ConfigError(f"mu must be non-negative, got {self.mu}")
        times = {
            "bin_separation": self.bin_separation,
            "rephasing_period": self.rephasing_period,
            "write_gate": self.write_gate,
            "read_gate": self.read_gate,
        }
        for name, value in times.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.readout_time < 0:
            raise ConfigError(f"readout_time must be non-negative, got {self.readout_time}")
        if self.write_photon_fwhm < 0 or self.read_photon_fwhm < 0:
            raise ConfigError("photon durations must be non-negative")
        if self.readout_transfer > TRANSFER_CEILING and not self.allow_transfer_override:
            raise ConfigError(
                f"readout_transfer {self.readout_transfer} exceeds the pi/2-pi ceiling "
                f"{TRANSFER_CEILING}; set allow_transfer_override to model another scheme"
            )
        if self.fock_cutoff < 1:
            raise ConfigError("fock_cutoff must be at least 1")
        if not 0 < self.max_leakage < 1:
            raise ConfigError("max_leakage must lie in (0, 1)")

    @classmethod
    def from_config(cls, config):
        src = config["source"]
        timing = config["timing"]
        readout = config["readout"]
        det = config["detection"]
        ns = 1e-9
        try:
            return cls(
                mu=float(src["mu"]),
                write_phase_diff=float(src["write_phase_diff_rad"]),
                read_phase_diff=float(src["read_phase_diff_rad"]),
                bin_separation=float(timing["bin_separation_ns"]) * ns,
                rephasing_period=float(timing["rephasing_period_ns"]) * ns,
                readout_time=float(timing["readout_time_ns"]) * ns,
                readout_transfer=float(readout["transfer"]),
                retrieval_efficiency=float(readout["retrieval_efficiency"]),
                readout_crosstalk=float(readout["crosstalk"]),
                detector_efficiency=float(det["detector_efficiency"]),
                dark_count_prob=float(det["dark_count_prob"]),
                background_photon_prob=float(det["background_photon_prob"]),
                background_coherence=float(det["background_coherence"]),
                background_phase=float(det["background_phase_rad"]),
                write_gate=float(timing["write_gate_ns"]) * ns,
                read_gate=float(timing["read_gate_ns"]) * ns,
                write_photon_fwhm=float(timing["write_photon_fwhm_ns"]) * ns,
                read_photon_fwhm=float(timing["read_photon_fwhm_ns"]) * ns,
                time_bin_encoding=bool(src["time_bin_encoding"]),
                fock_cutoff=int(src["fock_cutoff"]),
                max_leakage=float(src["max_truncation_leakage"]),
                auto_cutoff=bool(src["auto_cutoff"]),
                allow_transfer_override=bool(readout["allow_transfer_override"]),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid experiment parameter: {e}") from e

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def squeezing(self):
        """λ with λ² = μ/(1+μ): the per-bin pair amplitude ratio."""
        return sqrt(self.mu / (1.0 + self.mu))

    @property
    def write_detection_efficiency(self):
        return self.detector_efficiency * gate_capture(self.write_gate, self.write_photon_fwhm)

    @property
    def read_detection_efficiency(self):
        return self.detector_efficiency * gate_capture(self.read_gate, self.read_photon_fwhm)


def gate_capture(gate, fwhm):
    """Fraction of a Gaussian photon of the given FWHM inside a centred gate."""
    if fwhm <= 0:
        return 1.0
    sigma = fwhm * FWHM_TO_SIGMA
    return float(erf(gate / (2.0 * sqrt(2.0) * sigma)))


def truncation_leakage(mu, cutoff):
    """Thermal probability of more than `cutoff` pairs in one bin."""
    lam2 = mu / (1.0 + mu)
    return lam2 ** (cutoff + 1)


def resolve_cutoff(cfg):
    """Fock cut-off honouring the leakage bound; escalates only if auto_cutoff."""
    cutoff = cfg.fock_cutoff
    leakage = truncation_leakage(cfg.mu, cutoff)
    if leakage <= cfg.max_leakage:
        return cutoff, leakage
    if not cfg.auto_cutoff:
        raise ModelError(
            f"truncation leakage {leakage:.3g} at mu={cfg.mu} exceeds {cfg.max_leakage:g} "
            f"with fock_cutoff={cutoff}"
        )
    while leakage > cfg.max_leakage:
        cutoff += 1
        if cutoff > MAX_CUTOFF:
            raise ModelError(f"mu={cfg.mu} needs a Fock cut-off above {MAX_CUTOFF}")
        leakage = truncation_leakage(cfg.mu, cutoff)
    run_log(f"fock cut-off raised to {cutoff} for mu={cfg.mu} (leakage {leakage:.2e})")
    return cutoff, leakage


def pair_terms(cfg):
    """Product terms of the truncated two-bin source.

    Returns (terms, cutoff, leakage) with terms a list of ((n_E, n_L), amplitude).
    """
    cutoff, leakage = resolve_cutoff(cfg)
    lam = cfg.squeezing
    weights = np.array([lam ** n for n in range(cutoff + 1)])
    weights /= np.sqrt(np.sum(weights ** 2))
    # single-peak write pulse: the late bin stays in vacuum
    late_weights = weights if cfg.time_bin_encoding else np.ones(1)
    terms = []
    for n_e in range(cutoff + 1):
        for n_l, late in enumerate(late_weights):
            amp = weights[n_e] * late * np.exp(1j * n_l * cfg.write_phase_diff)
            terms.append(((n_e, n_l), complex(amp)))
    return terms, cutoff, leakage


def build_joint_state(cfg):
    """Truncated two-bin two-mode squeezed state over write and atomic modes."""
    terms, cutoff, leakage = pair_terms(cfg)
    modes = (WRITE_E, WRITE_L, ATOMIC_E, ATOMIC_L)
    amplitudes = {(n_e, n_l, n_e, n_l): amp for (n_e, n_l), amp in terms if amp != 0}
    register = ModeRegister(modes, amplitudes, cutoff, leakage)
    register.check_norm()
    return register


def readout_delays(cfg):
    """Storage time seen by read bin b' for atomic bin b, as a 2x2 [b', b] array."""
    t_r = cfg.readout_time
    t_b = cfg.bin_separation
    return np.array([[t_r, t_r - t_b], [t_r + t_b, t_r]])


def readout_matrix(cfg, model):
    """Isometry from (atomic E, atomic L) to the read, cross-talk and loss modes.

    Returns (outputs, matrix) for apply_linear_map.
    """
    eta0 = cfg.retrieval_efficiency * cfg.readout_transfer
    c = cfg.readout_crosstalk
    amps = model.amplitude(readout_delays(cfg))
    rows = np.array([1.0, np.exp(1j * cfg.read_phase_diff)])
    coherent = np.sqrt(eta0 * (1.0 - c)) * amps * rows[:, None]
    if not cfg.time_bin_encoding:
        coherent[1, :] = 0.0

    diag_eff = eta0 * np.abs(np.diag(amps)) ** 2
    cross = np.sqrt(c * diag_eff)
    if not cfg.time_bin_encoding:
        cross[0] = 0.0  # no late read peak to land in
    loss = isometry_completion(coherent, np.diag(np.abs(cross) ** 2))

    outputs = (READ_E, READ_L, READ_L_FROM_E, READ_E_FROM_L, LOST_E, LOST_L)
    matrix = np.zeros((6, 2), dtype=complex)
    matrix[0:2, :] = coherent
    matrix[2, 0] = cross[0]
    matrix[3, 1] = cross[1]
    matrix[4:6, :] = loss
    return outputs, matrix


def apply_readout(state, cfg, model):
    """Map atomic bins onto read photon bins; reflected amplitude goes to loss modes."""
    for mode in (ATOMIC_E, ATOMIC_L):
        if not state.has(mode):
            raise ModelError(f"register has no {mode} mode to read out")
    outputs, matrix = readout_matrix(cfg, model)
    return apply_linear_map(state, (ATOMIC_E, ATOMIC_L), outputs, matrix)


def bin_transfer_probability(cfg, model, bin_label="E"):
    """Per-bin collective transfer η_b = η_0 · transfer · overlap at the matched delay."""
    delay = readout_delays(cfg)[BINS.index(bin_label), BINS.index(bin_label)]
    eta = cfg.retrieval_efficiency * cfg.readout_transfer * overlap_efficiency(model, delay)
    return eta * (1.0 - cfg.readout_crosstalk)


def conditional_single_pair_state(register):
    """Normalised one-pair component of a joint (write, atomic) register.

    Returns a dict keyed by (write bin, atomic bin), e.g. ("E", "E").
    """
    idx = {m: register.index(m) for m in (WRITE_E, WRITE_L, ATOMIC_E, ATOMIC_L)}
    component = {}
    for occ, amp in register.amplitudes.items():
        w = (occ[idx[WRITE_E]], occ[idx[WRITE_L]])
        a = (occ[idx[ATOMIC_E]], occ[idx[ATOMIC_L]])
        if sum(w) != 1 or sum(a) != 1:
            continue
        key = (BINS[w.index(1)], BINS[a.index(1)])
        component[key] = component.get(key, 0j) + amp
    total = sqrt(sum(abs(a) ** 2 for a in component.values()))
    if total == 0:
        raise ModelError("register has no single-pair component")
    return {k: v / total for k, v in component.items()}
