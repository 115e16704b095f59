"""Tests for the pair source and the spin-wave readout map."""

from math import sqrt

import numpy as np
import pytest

from src.core.errors import ConfigError, ModelError
from src.physics.dephasing import DephasingModel
from src.physics.modes import ModeRegister
from src.physics.source import (
    ATOMIC_E,
    ATOMIC_L,
    READ_E,
    READ_L,
    READ_L_FROM_E,
    WRITE_E,
    WRITE_L,
    ExperimentConfig,
    apply_readout,
    bin_transfer_probability,
    build_joint_state,
    conditional_single_pair_state,
    gate_capture,
    pair_terms,
    readout_delays,
    readout_matrix,
    resolve_cutoff,
    truncation_leakage,
)

MODEL = DephasingModel.default(344e-9)


def test_vacuum_at_zero_mu():
    state = build_joint_state(ExperimentConfig(mu=0.0))

    assert state.amplitude((0, 0, 0, 0)) == pytest.approx(1.0)
    assert state.norm() == pytest.approx(1.0)


def test_write_and_atomic_numbers_are_paired():
    state = build_joint_state(ExperimentConfig(mu=0.1, auto_cutoff=True))

    for occ in state.amplitudes:
        assert occ[0] == occ[2] and occ[1] == occ[3]


def test_pair_statistics_are_thermal_per_bin():
    mu = 0.05
    state = build_joint_state(ExperimentConfig(mu=mu, fock_cutoff=4))
    dist = state.marginal((WRITE_E,))
    lam2 = mu / (1 + mu)

    assert dist[(1,)] / dist[(0,)] == pytest.approx(lam2)
    assert dist[(2,)] / dist[(1,)] == pytest.approx(lam2)


def test_single_pair_component_is_bell_state():
    cfg = ExperimentConfig(mu=0.02, write_phase_diff=0.7)
    component = conditional_single_pair_state(build_joint_state(cfg))

    assert set(component) == {("E", "E"), ("L", "L")}
    assert abs(component[("E", "E")]) == pytest.approx(1 / sqrt(2))
    ratio = component[("L", "L")] / component[("E", "E")]
    assert np.angle(ratio) == pytest.approx(0.7)


def test_truncation_leakage_formula():
    assert truncation_leakage(0.02, 2) == pytest.approx((0.02 / 1.02) ** 3)


def test_cutoff_escalates_only_when_allowed():
    strict = ExperimentConfig(mu=0.2, auto_cutoff=False)
    with pytest.raises(ModelError, match="leakage"):
        resolve_cutoff(strict)

    cutoff, leakage = resolve_cutoff(strict.replace(auto_cutoff=True))
    assert cutoff > 2
    assert leakage <= strict.max_leakage


def test_cutoff_escalation_is_logged(isolated_home):
    resolve_cutoff(ExperimentConfig(mu=0.2, auto_cutoff=True))

    assert "fock cut-off raised" in (isolated_home / "spinbin.log").read_text()


def test_single_bin_mode_has_empty_late_bin():
    terms, _, _ = pair_terms(ExperimentConfig(mu=0.05, time_bin_encoding=False))

    assert all(n_l == 0 for (_, n_l), _ in terms)
    assert sum(abs(a) ** 2 for _, a in terms) == pytest.approx(1.0)


def test_readout_delays():
    delays = readout_delays(ExperimentConfig(readout_time=344e-9, bin_separation=172e-9))

    np.testing.assert_allclose(delays, [[344e-9, 172e-9], [516e-9, 344e-9]])


def test_readout_matrix_is_an_isometry():
    cfg = ExperimentConfig(readout_crosstalk=0.1, readout_time=250e-9)
    _, matrix = readout_matrix(cfg, MODEL)

    np.testing.assert_allclose(matrix.conj().T @ matrix, np.eye(2), atol=1e-12)


def test_readout_has_no_cross_bin_leak_at_rephasing():
    # early read peak sees late atoms stored T_r - T_b = T_r / 2: fully dephased
    cfg = ExperimentConfig(readout_time=344e-9)
    outputs, matrix = readout_matrix(cfg, MODEL)

    assert matrix[outputs.index(READ_E), 1] == pytest.approx(0.0, abs=1e-12)
    assert matrix[outputs.index(READ_L), 0] == pytest.approx(0.0, abs=1e-12)
    assert abs(matrix[outputs.index(READ_E), 0]) ** 2 == pytest.approx(0.25)


def test_single_excitation_retrieval_probability():
    cfg = ExperimentConfig(retrieval_efficiency=0.8, readout_transfer=0.5, readout_time=100e-9)
    state = apply_readout(ModeRegister.fock((ATOMIC_E, ATOMIC_L), (1, 0)), cfg, MODEL)
    expected = 0.8 * 0.5 * np.cos(np.pi * 100 / 344) ** 2

    assert state.marginal((READ_E,))[(1,)] == pytest.approx(expected)
    assert bin_transfer_probability(cfg, MODEL, "E") == pytest.approx(expected)
    state.check_norm()


def test_crosstalk_goes_to_tagged_mode():
    cfg = ExperimentConfig(readout_crosstalk=0.2, readout_time=344e-9)
    state = apply_readout(ModeRegister.fock((ATOMIC_E, ATOMIC_L), (1, 0)), cfg, MODEL)

    assert state.marginal((READ_L_FROM_E,))[(1,)] == pytest.approx(0.2 * 0.25)
    assert state.marginal((READ_E,))[(1,)] == pytest.approx(0.8 * 0.25)


def test_readout_requires_atomic_modes():
    with pytest.raises(ModelError):
        apply_readout(ModeRegister.fock((WRITE_E, WRITE_L), (1, 0)), ExperimentConfig(), MODEL)


def test_readout_keeps_write_modes_and_norm():
    cfg = ExperimentConfig(mu=0.05, readout_crosstalk=0.05)
    state = apply_readout(build_joint_state(cfg), cfg, MODEL)

    assert state.has(WRITE_E) and not state.has(ATOMIC_E) and not state.has(ATOMIC_L)
    state.check_norm()


@pytest.mark.parametrize(
    "changes",
    [
        {"mu": -0.1},
        {"readout_transfer": 0.6},
        {"detector_efficiency": 1.5},
        {"bin_separation": 0.0},
        {"readout_time": -1e-9},
        {"fock_cutoff": 0},
    ],
)
def test_invalid_parameters_are_rejected(changes):
    with pytest.raises(ConfigError):
        ExperimentConfig(**changes)


def test_transfer_override():
    cfg = ExperimentConfig(readout_transfer=0.9, allow_transfer_override=True)

    assert cfg.readout_transfer == 0.9


def test_gate_capture():
    assert gate_capture(30e-9, 0.0) == 1.0
    assert 0.9 < gate_capture(30e-9, 20e-9) < 1.0
    assert gate_capture(40e-9, 30e-9) < gate_capture(40e-9, 20e-9)


def test_from_config_converts_units(default_config):
    cfg = ExperimentConfig.from_config(default_config)

    assert cfg.rephasing_period == pytest.approx(344e-9)
    assert cfg.bin_separation == pytest.approx(172e-9)
    assert cfg.readout_crosstalk == 0.15
    assert cfg.write_detection_efficiency < cfg.detector_efficiency
