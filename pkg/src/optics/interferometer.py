"""Imbalanced Mach-Zehnder analysis of time-bin photons.

The long arm delays a photon by one bin separation, so an early photon
leaves in peak E (short arm) or peak C (long arm) and a late photon in
peak C (short arm) or peak L (long arm). Only peak C mixes the two bins;
its two detector ports project onto the equator of the Bloch sphere.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

from ..core.errors import ConfigError, ModelError
from ..physics.modes import Mode, apply_linear_map

PEAKS = ("E", "C", "L")
PORTS = ("+", "-")
OUTPUT_LABELS = tuple(f"{p}{d}" for p in PEAKS for d in PORTS)
DELAY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class InterferometerSetting:
    arm_phase: float = 0.0
    delay: float = 172e-9
    splitting_ratio: float = 0.5
    piezo_voltage: float | None = None
    jitter: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.splitting_ratio < 1.0:
            raise ConfigError(f"splitting_ratio must lie in (0, 1), got {self.splitting_ratio}")
        if not self.delay > 0:
            raise ConfigError(f"interferometer delay must be positive, got {self.delay}")
        if self.jitter < 0:
            raise ConfigError("phase jitter must be non-negative")

    @classmethod
    def from_config(cls, config, arm, phase=None):
        """Setting for arm 'write' or 'read'; `phase` overrides the configured phase."""
        section = config["interferometers"]
        return cls(
            arm_phase=float(section[f"{arm}_phase_rad"] if phase is None else phase),
            delay=float(config["timing"]["interferometer_delay_ns"]) * 1e-9,
            splitting_ratio=float(section["splitting_ratio"]),
            jitter=float(section[f"{arm}_jitter_rad"]),
        )

    def with_phase(self, phase):
        return InterferometerSetting(phase, self.delay, self.splitting_ratio, None, self.jitter)

    def with_voltage(self, voltage, calibration):
        return InterferometerSetting(
            voltage_to_phase(voltage, calibration),
            self.delay,
            self.splitting_ratio,
            voltage,
            self.jitter,
        )


@dataclass(frozen=True)
class PiezoCalibration:
    radians_per_volt: float = 5.34
    offset: float = 0.0

    def __post_init__(self):
        if self.radians_per_volt == 0:
            raise ConfigError("piezo calibration slope must be non-zero")

    @classmethod
    def from_config(cls, config):
        section = config["interferometers"]
        return cls(float(section["radians_per_volt"]), float(section["calibration_offset_rad"]))


def voltage_to_phase(v, cal):
    """Arm phase produced by fiber-stretcher voltage v."""
    return cal.radians_per_volt * v + cal.offset


def phase_to_voltage(phase, cal):
    return (phase - cal.offset) / cal.radians_per_volt


def output_modes(arm, tag=""):
    return tuple(Mode(arm, label, tag) for label in OUTPUT_LABELS)


def mzi_matrix(setting):
    """6x2 isometry from (E, L) inputs to OUTPUT_LABELS.

    Both couplers have transmission `splitting_ratio` into the short arm /
    the + port; the long arm picks up exp(i·arm_phase).
    """
    s = setting.splitting_ratio
    short = sqrt(s)
    long_ = sqrt(1.0 - s) * np.exp(1j * setting.arm_phase)
    # (short arm, long arm) -> (+, -)
    from_short = np.array([sqrt(s), -sqrt(1.0 - s)])
    from_long = np.array([sqrt(1.0 - s), sqrt(s)])

    m = np.zeros((6, 2), dtype=complex)
    # early bin: short -> E, long -> C
    m[0:2, 0] = short * from_short
    m[2:4, 0] = long_ * from_long
    # late bin: short -> C, long -> L
    m[2:4, 1] += short * from_short
    m[4:6, 1] = long_ * from_long
    return m


def _bin_groups(state, arm):
    """Same-tag (E, L) input groups of an arm present in the register."""
    groups = {}
    for mode in state.modes:
        if mode.kind == arm and mode.label in ("E", "L"):
            groups.setdefault(mode.tag, {})[mode.label] = mode
    return groups


def apply_mzi(state, arm, setting, bin_separation=None):
    """Send the arm's early/late modes through the interferometer."""
    if arm not in ("write", "read"):
        raise ModelError(f"unknown arm '{arm}'")
    if bin_separation is not None and abs(setting.delay - bin_separation) > DELAY_TOLERANCE:
        raise ModelError(
            f"interferometer delay {setting.delay * 1e9:.3f} ns does not match the bin "
            f"separation {bin_separation * 1e9:.3f} ns; early and late modes would not overlap"
        )
    groups = _bin_groups(state, arm)
    if not groups:
        raise ModelError(f"register has no {arm} time-bin modes")

    matrix = mzi_matrix(setting)
    for tag in sorted(groups):
        group = groups[tag]
        inputs = tuple(group[b] for b in ("E", "L") if b in group)
        columns = [0 if m.label == "E" else 1 for m in inputs]
        state = apply_linear_map(state, inputs, output_modes(arm, tag), matrix[:, columns])
    return state


def phase_jitter_nodes(sigma, n_nodes=7):
    """Gauss-Hermite phase offsets and weights for a Gaussian phase error of rms sigma."""
    if sigma <= 0:
        return np.zeros(1), np.ones(1)
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    return sigma * nodes, weights / weights.sum()


def jittered_settings(setting, n_nodes=7):
    """(setting, weight) pairs covering the setting's Gaussian phase jitter."""
    offsets, weights = phase_jitter_nodes(setting.jitter, n_nodes)
    return [(setting.with_phase(setting.arm_phase + o), w) for o, w in zip(offsets, weights)]


def background_cell_probabilities(setting, coherence, phase=0.0, n_nodes=7):
    """Output-cell distribution (over OUTPUT_LABELS) of one background photon.

    With weight `coherence` the photon is (|E> + e^{i phase}|L>)/sqrt(2);
    otherwise it sits in either bin with probability 1/2.
    """
    probs = np.zeros(6)
    for node, weight in jittered_settings(setting, n_nodes):
        m = mzi_matrix(node)
        coherent = m @ (np.array([1.0, np.exp(1j * phase)]) / sqrt(2.0))
        mixed = 0.5 * (np.abs(m[:, 0]) ** 2 + np.abs(m[:, 1]) ** 2)
        probs += weight * (coherence * np.abs(coherent) ** 2 + (1.0 - coherence) * mixed)
    return probs
