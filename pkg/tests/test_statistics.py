"""Tests for selectivity, correlation, fringe fitting and CHSH."""

from math import sqrt

import numpy as np
import pytest

from src.analysis.coincidences import CoincidenceTable, expected_table
from src.analysis.statistics import (
    BELL_VISIBILITY,
    TSIRELSON,
    FringeScan,
    bootstrap_correlation,
    chsh,
    coincidence_rate,
    correlation,
    fit_visibility,
    optimal_bell_settings,
    selectivity,
)
from src.core.errors import StatisticsError
from src.optics.interferometer import InterferometerSetting
from src.physics.source import ExperimentConfig
from src.sim.montecarlo import MeasurementSettings, outcome_distribution


def _side(ee, el, le, ll):
    return CoincidenceTable("side_peaks", np.array([[ee, el], [le, ll]]), trials=1000)


def _central(pp, pm, mp, mm):
    return CoincidenceTable("central_peak", np.array([[pp, pm], [mp, mm]]), trials=1000)


def _synthetic_scan(V, phi0, n=12, sigma=0.01):
    phases = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return FringeScan(phases, V * np.cos(phases + phi0), np.full(n, sigma))


class TestSelectivity:
    def test_perfect_correlation(self):
        assert selectivity(_side(50, 0, 0, 50))[0] == 1.0

    def test_uncorrelated_limit(self):
        assert selectivity(_side(25, 25, 25, 25))[0] == 0.5

    def test_binomial_error(self):
        s, sigma = selectivity(_side(40, 5, 5, 50))

        assert s == pytest.approx(0.9)
        assert sigma == pytest.approx(sqrt(0.9 * 0.1 / 100))

    def test_empty_table_is_undefined(self):
        with pytest.raises(StatisticsError):
            selectivity(_side(0, 0, 0, 0))

    def test_wrong_mode(self):
        with pytest.raises(StatisticsError, match="side_peaks"):
            selectivity(_central(1, 0, 0, 1))


class TestCorrelation:
    def test_perfect_correlation(self):
        e, sigma = correlation(_central(100, 0, 0, 100))

        assert e == 1.0
        assert sigma == pytest.approx(0.0)

    def test_equal_counts(self):
        assert correlation(_central(30, 30, 30, 30))[0] == 0.0

    def test_error_formula(self):
        e, sigma = correlation(_central(80, 20, 20, 80))

        assert e == pytest.approx(0.6)
        assert sigma == pytest.approx(sqrt(4 * 160 * 40 / 200 ** 3))

    def test_empty_table_is_undefined(self):
        with pytest.raises(StatisticsError):
            correlation(_central(0, 0, 0, 0))

    def test_sampled_counts_recover_visibility(self):
        rng = np.random.default_rng(0)
        V = 0.82
        p = np.array([1 + V, 1 - V, 1 - V, 1 + V]) / 4
        counts = rng.multinomial(4000, p).reshape(2, 2)
        e, sigma = correlation(CoincidenceTable("central_peak", counts))

        assert abs(e - V) < 4 * sigma

    def test_bootstrap_agrees_with_propagation(self):
        table = _central(300, 60, 70, 310)
        _, sigma = correlation(table)

        assert bootstrap_correlation(table, n_resamples=2000, seed=1) == pytest.approx(sigma, rel=0.15)


@pytest.mark.parametrize("k", [2, 7])
def test_scale_invariance(k):
    side = _side(40, 7, 5, 48)
    central = _central(90, 12, 15, 80)
    scaled_side = _side(*(k * side.counts).ravel())
    scaled_central = _central(*(k * central.counts).ravel())

    assert selectivity(scaled_side)[0] == selectivity(side)[0]
    assert correlation(scaled_central)[0] == correlation(central)[0]


def test_coincidence_rate():
    rate, sigma = coincidence_rate(_central(10, 10, 10, 10))

    assert rate == pytest.approx(0.04)
    assert sigma == pytest.approx(sqrt(40) / 1000)


class TestFitVisibility:
    def test_noiseless_scan_is_recovered(self):
        fit = fit_visibility(_synthetic_scan(0.82, 0.3))

        assert fit.V == pytest.approx(0.82, abs=1e-6)
        assert fit.phi0 == pytest.approx(0.3, abs=1e-6)
        assert fit.sigma_V > 0

    def test_zero_phase_offset(self):
        fit = fit_visibility(_synthetic_scan(0.82, 0.0))

        assert fit.V == pytest.approx(0.82, abs=1e-6)
        assert fit.phi0 == pytest.approx(0.0, abs=1e-6)
        assert 0 < fit.sigma_phi0 < 0.1

    def test_negative_amplitude_is_folded(self):
        fit = fit_visibility(_synthetic_scan(0.7, 0.3 + np.pi))

        assert fit.V == pytest.approx(0.7, abs=1e-6)
        assert -np.pi <= fit.phi0 < np.pi
        assert np.cos(fit.phi0) == pytest.approx(np.cos(0.3 + np.pi), abs=1e-6)

    def test_phase_shift_between_scans(self):
        shift = 5.34 * 0.268
        a = fit_visibility(_synthetic_scan(0.8, 0.1))
        b = fit_visibility(_synthetic_scan(0.8, 0.1 + shift))

        assert np.degrees(b.phi0 - a.phi0) == pytest.approx(82.0, abs=0.5)

    def test_zero_sigma_points_are_floored(self):
        scan = _synthetic_scan(0.5, 0.0)
        scan.sigma_E[0] = 0.0

        assert fit_visibility(scan).V == pytest.approx(0.5, abs=1e-6)

    def test_degenerate_scan_is_rejected(self):
        with pytest.raises(StatisticsError):
            fit_visibility(FringeScan(np.zeros(6), np.full(6, 0.3), np.full(6, 0.01)))

    def test_too_few_points(self):
        with pytest.raises(StatisticsError):
            fit_visibility(_synthetic_scan(0.5, 0.0, n=3))

    def test_invalid_scan_values(self):
        with pytest.raises(StatisticsError):
            FringeScan([0.0], [1.5], [0.1])

    def test_from_points(self):
        scan = FringeScan.from_points([(0.0, 0.5, 0.1), (1.0, 0.2, 0.1)])

        assert len(scan) == 2
        assert scan.E.tolist() == [0.5, 0.2]

    @pytest.mark.slow
    def test_noisy_scan_coverage(self):
        rng = np.random.default_rng(42)
        V, phi0, n = 0.82, 0.3, 500
        phases = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        hits = 0
        repeats = 1000
        for _ in range(repeats):
            e = np.empty(12)
            s = np.empty(12)
            for i, phase in enumerate(phases):
                c = V * np.cos(phase + phi0)
                counts = rng.multinomial(n, np.array([1 + c, 1 - c, 1 - c, 1 + c]) / 4).reshape(2, 2)
                e[i], s[i] = correlation(CoincidenceTable("central_peak", counts))
            fit = fit_visibility(FringeScan(phases, e, s))
            hits += abs(fit.V - V) < 2 * fit.sigma_V
        assert hits / repeats >= 0.93


class TestChsh:
    def test_ideal_quantum_value(self):
        r = 1 / sqrt(2)
        result = chsh([("a", r, 0.0), ("b", r, 0.0), ("c", r, 0.0), ("d", -r, 0.0)])

        assert result.S == pytest.approx(TSIRELSON)

    def test_no_violation(self):
        result = chsh([(s, 0.5, 0.01) for s in "abcd"])

        assert result.S == pytest.approx(1.0)
        assert result.sigma_S == pytest.approx(0.02)
        assert result.violation_sigmas < 0

    def test_wrong_number_of_components(self):
        with pytest.raises(StatisticsError):
            chsh([("a", 0.5, 0.1)] * 3)

    def test_tsirelson_excess_is_flagged(self, isolated_home):
        result = chsh([(s, 0.9, 0.001) for s in "abc"] + [("d", -0.9, 0.001)])

        assert not result.within_tsirelson
        assert "Tsirelson" in (isolated_home / "spinbin.log").read_text()


def test_optimal_settings_structure():
    settings = optimal_bell_settings(phi0=0.4, write_phase=0.2)
    (w, r), (w2, r2), (w3, r3), (w4, r4) = settings

    assert w == w2 == 0.2 and w3 == w4 == pytest.approx(0.2 + np.pi / 2)
    assert r == r3 and r2 == r4 == pytest.approx(r + np.pi / 2)
    assert w + r + 0.4 == pytest.approx(-np.pi / 4)


def test_optimal_settings_give_tsirelson_for_pure_fringe():
    V, phi0 = 0.9, 0.4
    components = [
        (f"{w},{r}", V * np.cos(w + r + phi0), 0.0) for w, r in optimal_bell_settings(phi0, write_phase=1.0)
    ]

    assert chsh(components).S == pytest.approx(TSIRELSON * V)


@pytest.fixture(scope="module")
def noisy_cfg():
    return ExperimentConfig(
        mu=0.05,
        retrieval_efficiency=0.8,
        readout_crosstalk=0.05,
        dark_count_prob=1e-5,
        background_photon_prob=1e-3,
        background_coherence=0.3,
    )


class TestVisibilityBellIdentity:
    """Exact distributions: S at optimal settings equals 2√2 times the fitted V."""

    @staticmethod
    def _e(cfg, write_phase, read_phase):
        settings = MeasurementSettings(
            InterferometerSetting(arm_phase=write_phase, jitter=0.1),
            InterferometerSetting(arm_phase=read_phase, jitter=0.1),
        )
        table = expected_table(outcome_distribution(cfg, settings), 1e6, "central_peak")
        return correlation(table)

    def test_identity_and_bell_threshold(self, noisy_cfg):
        phases = np.linspace(0, 2 * np.pi, 12, endpoint=False)
        points = [(p, *self._e(noisy_cfg, 0.0, p)) for p in phases]
        fit = fit_visibility(FringeScan.from_points(points))
        components = [(f"{w},{r}", *self._e(noisy_cfg, w, r)) for w, r in optimal_bell_settings(fit.phi0)]
        result = chsh(components)

        assert result.S == pytest.approx(TSIRELSON * fit.V, rel=0.02)
        assert result.within_tsirelson
        assert (fit.V > BELL_VISIBILITY) == (result.S > 2)
