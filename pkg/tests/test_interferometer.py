"""Tests for the imbalanced Mach-Zehnder analysis of time bins."""

from math import sqrt

import numpy as np
import pytest

from src.core.errors import ConfigError, ModelError
from src.optics.interferometer import (
    OUTPUT_LABELS,
    InterferometerSetting,
    PiezoCalibration,
    apply_mzi,
    background_cell_probabilities,
    mzi_matrix,
    output_modes,
    phase_jitter_nodes,
    phase_to_voltage,
    voltage_to_phase,
)
from src.physics.modes import Mode, ModeRegister
from src.physics.source import READ_E, READ_L, READ_L_FROM_E, WRITE_E, WRITE_L


def _cell_probs(state, arm="write", tag=""):
    return {m.label: state.marginal((m,)).get((1,), 0.0) for m in output_modes(arm, tag)}


def test_matrix_is_isometry():
    m = mzi_matrix(InterferometerSetting(arm_phase=0.4, splitting_ratio=0.3))

    np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-12)


def test_early_photon_splits_over_e_and_c_peaks():
    state = apply_mzi(ModeRegister.fock((WRITE_E, WRITE_L), (1, 0)), "write", InterferometerSetting())
    probs = _cell_probs(state)

    assert probs["E+"] + probs["E-"] == pytest.approx(0.5)
    assert probs["C+"] + probs["C-"] == pytest.approx(0.5)
    assert probs["L+"] + probs["L-"] == pytest.approx(0.0)


def test_superposition_interferes_in_central_peak_only():
    amp = 1 / sqrt(2)
    for phase in np.linspace(0, 2 * np.pi, 7):
        register = ModeRegister((WRITE_E, WRITE_L), {(1, 0): amp, (0, 1): amp})
        probs = _cell_probs(apply_mzi(register, "write", InterferometerSetting(arm_phase=phase)))

        assert probs["E+"] + probs["E-"] == pytest.approx(0.25)
        assert probs["L+"] + probs["L-"] == pytest.approx(0.25)
        assert probs["C+"] == pytest.approx(0.25 * (1 + np.cos(phase)))
        assert probs["C-"] == pytest.approx(0.25 * (1 - np.cos(phase)))


def test_tagged_modes_do_not_interfere_with_untagged():
    register = ModeRegister((READ_E, READ_L_FROM_E), {(1, 0): 1 / sqrt(2), (0, 1): 1 / sqrt(2)})
    state = apply_mzi(register, "read", InterferometerSetting(arm_phase=0.0))
    untagged = _cell_probs(state, "read")
    tagged = _cell_probs(state, "read", "xE")

    assert untagged["C+"] == pytest.approx(0.125)
    assert tagged["C+"] == pytest.approx(0.125)
    assert sum(untagged.values()) + sum(tagged.values()) == pytest.approx(1.0)


def test_delay_mismatch_is_rejected():
    register = ModeRegister.fock((WRITE_E, WRITE_L), (1, 0))

    with pytest.raises(ModelError, match="does not match"):
        apply_mzi(register, "write", InterferometerSetting(delay=170e-9), bin_separation=172e-9)


def test_missing_arm_modes_are_rejected():
    with pytest.raises(ModelError):
        apply_mzi(ModeRegister.fock((READ_E, READ_L), (1, 0)), "write", InterferometerSetting())
    with pytest.raises(ModelError):
        apply_mzi(ModeRegister.fock((WRITE_E, WRITE_L), (1, 0)), "idler", InterferometerSetting())


def test_output_labels():
    assert OUTPUT_LABELS == ("E+", "E-", "C+", "C-", "L+", "L-")
    assert output_modes("read", "xL")[0] == Mode("read", "E+", "xL")


@pytest.mark.parametrize("changes", [{"splitting_ratio": 0.0}, {"delay": 0.0}, {"jitter": -0.1}])
def test_invalid_settings_are_rejected(changes):
    with pytest.raises(ConfigError):
        InterferometerSetting(**changes)


def test_piezo_calibration_round_trip():
    cal = PiezoCalibration(5.34, 0.2)

    assert voltage_to_phase(0.268, cal) == pytest.approx(5.34 * 0.268 + 0.2)
    assert phase_to_voltage(voltage_to_phase(0.333, cal), cal) == pytest.approx(0.333)
    with pytest.raises(ConfigError):
        PiezoCalibration(0.0)


def test_with_voltage_records_voltage():
    setting = InterferometerSetting().with_voltage(0.268, PiezoCalibration())

    assert setting.piezo_voltage == 0.268
    assert setting.arm_phase == pytest.approx(1.431, abs=1e-3)


def test_jitter_nodes_average_cosine():
    sigma = 0.3
    offsets, weights = phase_jitter_nodes(sigma, 7)

    assert weights.sum() == pytest.approx(1.0)
    assert np.sum(weights * np.cos(offsets)) == pytest.approx(np.exp(-sigma ** 2 / 2), rel=1e-8)


def test_zero_jitter_is_a_single_node():
    offsets, weights = phase_jitter_nodes(0.0)

    assert offsets.tolist() == [0.0] and weights.tolist() == [1.0]


def test_incoherent_background_does_not_interfere():
    setting = InterferometerSetting(arm_phase=1.0)
    probs = background_cell_probabilities(setting, coherence=0.0)

    assert probs.sum() == pytest.approx(1.0)
    assert probs[2] == pytest.approx(probs[3])


def test_coherent_background_follows_the_fringe():
    probs = background_cell_probabilities(InterferometerSetting(arm_phase=0.0), coherence=1.0, phase=0.0)

    assert probs[2] == pytest.approx(0.5)
    assert probs[3] == pytest.approx(0.0, abs=1e-12)


def test_from_config(default_config):
    setting = InterferometerSetting.from_config(default_config, "read", phase=0.5)

    assert setting.arm_phase == 0.5
    assert setting.delay == pytest.approx(172e-9)
    assert setting.jitter == 0.2
