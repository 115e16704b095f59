"""Selectivity, correlation coefficients, fringe fits and the CHSH parameter.

Error bars follow photon-counting (binomial / Poisson) statistics.
"""

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.optimize import curve_fit

from ..core.errors import StatisticsError
from ..core.logs import log

TSIRELSON = 2.0 * sqrt(2.0)
BELL_VISIBILITY = 1.0 / sqrt(2.0)


def _require_mode(table, mode):
    if table.mode != mode:
        raise StatisticsError(f"expected a {mode} table, got {table.mode}")


def selectivity(table):
    """(C_EE + C_LL) / total with its binomial standard error."""
    _require_mode(table, "side_peaks")
    n = float(table.total)
    if n <= 0:
        raise StatisticsError("selectivity is undefined for an empty table")
    s = float(np.trace(table.counts)) / n
    return s, sqrt(s * (1.0 - s) / n)


def correlation(table):
    """E = (N++ - N+- - N-+ + N--) / sum, σ² = 4ab/N³ (a same-sign, b opposite-sign)."""
    _require_mode(table, "central_peak")
    a = float(np.trace(table.counts))
    b = float(table.counts[0, 1] + table.counts[1, 0])
    n = a + b
    if n <= 0:
        raise StatisticsError("correlation is undefined without central-peak coincidences")
    return (a - b) / n, sqrt(4.0 * a * b / n ** 3)


def coincidence_rate(table):
    """Coincidences per trial with Poisson error."""
    if table.trials <= 0:
        raise StatisticsError("table records no trials")
    n = float(table.total)
    return n / table.trials, sqrt(n) / table.trials


def bootstrap_correlation(table, n_resamples=1000, seed=0):
    """Standard deviation of E over multinomial resamples of the table."""
    _require_mode(table, "central_peak")
    n = int(round(float(table.total)))
    if n <= 0:
        raise StatisticsError("cannot bootstrap an empty table")
    rng = np.random.default_rng(seed)
    p = np.asarray(table.counts, dtype=float).ravel() / float(table.total)
    draws = rng.multinomial(n, p, size=n_resamples)
    same = draws[:, 0] + draws[:, 3]
    opposite = draws[:, 1] + draws[:, 2]
    return float(np.std((same - opposite) / n, ddof=1))


@dataclass
class FringeScan:
    phases: np.ndarray
    E: np.ndarray
    sigma_E: np.ndarray

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        self.E = np.asarray(self.E, dtype=float)
        self.sigma_E = np.asarray(self.sigma_E, dtype=float)
        if not self.phases.shape == self.E.shape == self.sigma_E.shape:
            raise StatisticsError("fringe scan arrays differ in length")
        if np.any(np.abs(self.E) > 1.0 + 1e-12):
            raise StatisticsError("correlation coefficients must lie in [-1, 1]")

    @classmethod
    def from_points(cls, points):
        """From (phase, E, sigma_E) triples."""
        points = list(points)
        if not points:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        return cls(*map(np.array, zip(*points)))

    def __len__(self):
        return len(self.phases)


@dataclass
class VisibilityFit:
    V: float
    phi0: float
    covariance: np.ndarray

    @property
    def sigma_V(self):
        return float(sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def sigma_phi0(self):
        return float(sqrt(max(self.covariance[1, 1], 0.0)))

    def predict(self, phase):
        return self.V * np.cos(np.asarray(phase) + self.phi0)


def _fringe(phase, V, phi0):
    return V * np.cos(phase + phi0)


def _fringe_jacobian(phase, V, phi0):
    # MINPACK's difference step is proportional to |phi0|, so the phi0 column needs this
    return np.column_stack([np.cos(phase + phi0), -V * np.sin(phase + phi0)])


def fit_visibility(scan):
    """Weighted fit of E(φ) = V cos(φ + φ0); V >= 0 and φ0 folded into [-π, π)."""
    if len(scan) < 4:
        raise StatisticsError(f"fringe fit needs at least 4 points, got {len(scan)}")
    if np.ptp(scan.phases) <= np.pi:
        raise StatisticsError("fringe scan must span more than π of phase")

    sigma = scan.sigma_E.copy()
    positive = sigma[sigma > 0]
    sigma[sigma <= 0] = positive.min() if positive.size else 1.0

    # linear start: E = a cos φ + b sin φ
    design = np.column_stack([np.cos(scan.phases), np.sin(scan.phases)]) / sigma[:, None]
    (a, b), *_ = np.linalg.lstsq(design, scan.E / sigma, rcond=None)
    p0 = [np.hypot(a, b), np.arctan2(-b, a)]

    try:
        popt, pcov = curve_fit(
            _fringe, scan.phases, scan.E, p0=p0, sigma=sigma, absolute_sigma=True, jac=_fringe_jacobian
        )
    except (RuntimeError, ValueError) as e:
        raise StatisticsError(f"fringe fit failed: {e}") from e
    if not np.all(np.isfinite(pcov)):
        raise StatisticsError("fringe fit covariance is undefined")

    V, phi0 = popt
    if V < 0:
        V, phi0 = -V, phi0 + np.pi
        pcov = pcov * np.array([[1.0, -1.0], [-1.0, 1.0]])
    phi0 = (phi0 + np.pi) % (2 * np.pi) - np.pi
    return VisibilityFit(float(V), float(phi0), pcov)


@dataclass
class BellResult:
    S: float
    sigma_S: float
    components: list = field(default_factory=list)  # [(setting, E, sigma_E)] x 4

    @property
    def within_tsirelson(self):
        return self.S <= TSIRELSON + 3.0 * self.sigma_S

    @property
    def violation_sigmas(self):
        """Standard deviations by which S exceeds the local bound 2."""
        return (self.S - 2.0) / self.sigma_S if self.sigma_S > 0 else float("inf")


def chsh(components):
    """S = |E1 + E2 + E3 - E4| from four (setting, E, sigma_E) components.

    Components come in the order (φw, φr), (φw, φr'), (φw', φr), (φw', φr').
    """
    components = list(components)
    if len(components) != 4:
        raise StatisticsError(f"CHSH needs 4 correlation coefficients, got {len(components)}")
    e = np.array([c[1] for c in components], dtype=float)
    s = np.array([c[2] for c in components], dtype=float)
    result = BellResult(float(abs(e[0] + e[1] + e[2] - e[3])), float(np.sqrt(np.sum(s ** 2))), components)
    if not result.within_tsirelson:
        log(f"CHSH value {result.S:.4f} +/- {result.sigma_S:.4f} exceeds the Tsirelson bound")
    return result


def optimal_bell_settings(phi0, write_phase=0.0):
    """The four (write phase, read phase) pairs maximising S for E = V cos(φw + φr + φ0)."""
    read_phase = -np.pi / 4 - phi0 - write_phase
    w = (write_phase, write_phase + np.pi / 2)
    r = (read_phase, read_phase + np.pi / 2)
    return [(w[0], r[0]), (w[0], r[1]), (w[1], r[0]), (w[1], r[1])]
