"""Zeeman dephasing and rephasing of the stored spin-wave.

Each excitation path k of the collective excitation picks up a phase
Δω_k·t; retrieval is collective only while the paths are back in phase,
so the retrieval efficiency follows |Σ_k w_k exp(iΔω_k t)|².
"""

from dataclasses import dataclass

import numpy as np

from ..core.errors import ConfigError

WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DephasingModel:
    paths: tuple  # ((detuning_rad_per_s, weight), ...)
    rephasing_period: float

    def __post_init__(self):
        if not self.paths:
            raise ConfigError("dephasing model needs at least one path")
        if self.rephasing_period <= 0:
            raise ConfigError("rephasing period must be positive")
        weights = np.array([w for _, w in self.paths], dtype=float)
        if np.any(weights < 0):
            raise ConfigError("dephasing path weights must be non-negative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ConfigError(f"dephasing path weights sum to {weights.sum():.15g}, expected 1")

    @classmethod
    def default(cls, rephasing_period=344e-9):
        """Two symmetric paths at ±π/T_r: retrieval beats as cos²(πt/T_r)."""
        detuning = np.pi / rephasing_period
        return cls(((detuning, 0.5), (-detuning, 0.5)), rephasing_period)

    @classmethod
    def no_field(cls, rephasing_period=344e-9):
        """Magnetic field off: a single undetuned path, flat retrieval."""
        return cls(((0.0, 1.0),), rephasing_period)

    @classmethod
    def from_harmonics(cls, rephasing_period, harmonics, weights):
        """Paths at detunings h·2π/T_r for each harmonic h."""
        if len(harmonics) != len(weights):
            raise ConfigError("dephasing harmonics and weights differ in length")
        omega_r = 2 * np.pi / rephasing_period
        return cls(
            tuple((float(h) * omega_r, float(w)) for h, w in zip(harmonics, weights)),
            rephasing_period,
        )

    @classmethod
    def from_config(cls, config):
        period = float(config["timing"]["rephasing_period_ns"]) * 1e-9
        section = config["dephasing"]
        if not section["field_on"]:
            return cls.no_field(period)
        return cls.from_harmonics(period, section["harmonics"], section["weights"])

    @property
    def detunings(self):
        return np.array([d for d, _ in self.paths], dtype=float)

    @property
    def weights(self):
        return np.array([w for _, w in self.paths], dtype=float)

    def amplitude(self, t):
        """Complex overlap ⟨Ψ_a(0)|Ψ_a(t)⟩; zero for t < 0 (nothing stored yet)."""
        t_arr = np.asarray(t, dtype=float)
        amp = np.exp(1j * np.multiply.outer(t_arr, self.detunings)) @ self.weights
        amp = np.where(t_arr < 0, 0.0, amp)
        return amp if amp.ndim else complex(amp)

    def is_commensurate(self, tolerance=1e-9):
        """True if every pairwise detuning difference is a multiple of 2π/T_r."""
        cycles = self.detunings * self.rephasing_period / (2 * np.pi)
        diffs = np.subtract.outer(cycles, cycles)
        return bool(np.all(np.abs(diffs - np.round(diffs)) < tolerance))


def overlap_efficiency(model, t):
    """Collective retrieval efficiency |Σ_k w_k e^{iΔω_k t}|² at storage time t ≥ 0."""
    if np.any(np.asarray(t) < 0):
        raise ConfigError("storage time must be non-negative")
    value = np.abs(model.amplitude(t)) ** 2
    value = np.clip(value, 0.0, 1.0)
    return float(value) if np.ndim(value) == 0 else value
