"""Figure-data sweeps: each function returns the rows of one output table."""

import os

import numpy as np
from scipy.optimize import brentq

from .analysis.coincidences import coincidences, coincidences_from_patterns, expected_table
from .analysis.statistics import (
    FringeScan,
    chsh,
    coincidence_rate,
    correlation,
    fit_visibility,
    optimal_bell_settings,
    selectivity,
)
from .core.config import apply_overrides, config_hash
from .core.errors import ConfigError, StatisticsError
from .core.logs import log
from .optics.interferometer import PiezoCalibration, voltage_to_phase
from .physics.dephasing import DephasingModel
from .physics.source import ExperimentConfig, bin_transfer_probability
from .sim.montecarlo import (
    READ_MASK,
    WRITE_MASK,
    MeasurementSettings,
    outcome_distribution,
    sample_patterns,
)


def point_seed(seed, index):
    """Independent seed for the index-th point of a sweep."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _run_options(config):
    run = config["run"]
    return int(run["block_size"]), int(run["n_jobs"])


def _jitter_nodes(config):
    return int(config["interferometers"]["jitter_nodes"])


def sample_codes(config, cfg, settings, trials, seed, model=None):
    """Pattern codes of `trials` trials under cfg and settings."""
    block_size, n_jobs = _run_options(config)
    model = model or DephasingModel.from_config(config)
    dist = outcome_distribution(cfg, settings, model, _jitter_nodes(config))
    return sample_patterns(dist, trials, seed, block_size, n_jobs)


def retrieval_sweep(config, trials, seed, no_field=False):
    """Rows (readout_time_ns, model, mc, mc_sigma) of conditional retrieval vs storage time."""
    sweep = config["sweeps"]
    base = ExperimentConfig.from_config(config).replace(
        mu=float(sweep["retrieval_mu"]), time_bin_encoding=False
    )
    model = DephasingModel.no_field(base.rephasing_period) if no_field else DephasingModel.from_config(config)
    settings = MeasurementSettings.from_config(config)
    times = np.arange(
        float(sweep["retrieval_time_start_ns"]),
        float(sweep["retrieval_time_stop_ns"]) + 0.5 * float(sweep["retrieval_time_step_ns"]),
        float(sweep["retrieval_time_step_ns"]),
    )
    if times.size == 0:
        raise ConfigError("retrieval sweep grid is empty")

    rows = []
    for i, t_ns in enumerate(times):
        cfg = base.replace(readout_time=t_ns * 1e-9)
        codes = sample_codes(config, cfg, settings, trials, point_seed(seed, i), model)
        wrote = (codes & WRITE_MASK) != 0
        n_w = int(wrote.sum())
        expected = bin_transfer_probability(cfg, model, "E")
        if n_w == 0:
            rows.append((t_ns, expected, float("nan"), float("nan")))
            continue
        p = float(((codes & READ_MASK) != 0)[wrote].mean())
        eta = cfg.read_detection_efficiency
        rows.append((t_ns, expected, p / eta, np.sqrt(p * (1.0 - p) / n_w) / eta))
    log(f"retrieval sweep: {len(rows)} points, field {'off' if no_field else 'on'}")
    return rows


def selectivity_sweep(config, trials, seed):
    """Rows (mu, selectivity, sigma, C_EE, C_EL, C_LE, C_LL)."""
    base = ExperimentConfig.from_config(config)
    settings = MeasurementSettings.from_config(config)
    rows = []
    for i, mu in enumerate(config["sweeps"]["mu_values"]):
        cfg = base.replace(mu=float(mu))
        table = coincidences_from_patterns(sample_codes(config, cfg, settings, trials, point_seed(seed, i)))
        s, sigma = selectivity(table)
        rows.append((float(mu), s, sigma, *table.counts.ravel()))
    return rows


def read_phase_grid(config):
    n = int(config["sweeps"]["read_phase_points"])
    if n < 4:
        raise ConfigError("read_phase_points must be at least 4")
    return np.linspace(0.0, 2 * np.pi, n, endpoint=False)


def scan_read_phase(config, cfg, write_phase, trials, seed, seed_offset=0):
    """FringeScan over the read phase grid at one write phase, plus the summed table."""
    points = []
    total = None
    for j, read_phase in enumerate(read_phase_grid(config)):
        settings = MeasurementSettings.from_config(config, write_phase, read_phase)
        codes = sample_codes(config, cfg, settings, trials, point_seed(seed, seed_offset + j))
        table = coincidences_from_patterns(codes, "central_peak")
        total = table if total is None else total + table
        try:
            e, sigma = correlation(table)
        except StatisticsError:
            e, sigma = 0.0, 1.0
        points.append((read_phase, e, sigma, int(table.total)))
    scan = FringeScan.from_points(p[:3] for p in points)
    return scan, points, total


def fringe_scan(config, trials, seed):
    """Two read-phase fringes at the configured write voltages.

    Returns (scan rows, fit rows) with scan rows
    (write_phase_rad, read_phase_rad, E, sigma_E, coincidences) and fit rows
    (write_phase_rad, V, sigma_V, phi0_rad, sigma_phi0_rad).
    """
    cfg = ExperimentConfig.from_config(config)
    cal = PiezoCalibration.from_config(config)
    n_points = int(config["sweeps"]["read_phase_points"])
    scan_rows, fit_rows = [], []
    for i, voltage in enumerate(config["sweeps"]["fringe_write_voltages_v"]):
        write_phase = voltage_to_phase(float(voltage), cal)
        scan, points, _ = scan_read_phase(config, cfg, write_phase, trials, seed, i * n_points)
        scan_rows.extend((write_phase, *p) for p in points)
        fit = fit_visibility(scan)
        fit_rows.append((write_phase, fit.V, fit.sigma_V, fit.phi0, fit.sigma_phi0))
        log(f"fringe at write phase {write_phase:.3f} rad: V={fit.V:.3f}+/-{fit.sigma_V:.3f}")
    return scan_rows, fit_rows


def visibility_sweep(config, trials, seed):
    """Rows (mu, V, sigma_V, coincidence_rate, sigma_rate)."""
    base = ExperimentConfig.from_config(config)
    write_phase = float(config["interferometers"]["write_phase_rad"])
    n_points = int(config["sweeps"]["read_phase_points"])
    rows = []
    for i, mu in enumerate(config["sweeps"]["mu_values"]):
        cfg = base.replace(mu=float(mu))
        scan, _, total = scan_read_phase(config, cfg, write_phase, trials, seed, i * n_points)
        fit = fit_visibility(scan)
        rate, sigma_rate = coincidence_rate(total)
        rows.append((float(mu), fit.V, fit.sigma_V, rate, sigma_rate))
    return rows


def bell_settings(config):
    """The four (write, read) phase pairs of the CHSH measurement."""
    section = config["interferometers"]
    voltages = section["bell_settings_v"]
    if voltages:
        if len(voltages) != 4:
            raise ConfigError("bell_settings_v must list [U_w, U_w', U_r, U_r']")
        cal = PiezoCalibration.from_config(config)
        w = [voltage_to_phase(float(v), cal) for v in voltages[:2]]
        r = [voltage_to_phase(float(v), cal) for v in voltages[2:]]
        return [(w[0], r[0]), (w[0], r[1]), (w[1], r[0]), (w[1], r[1])]
    cfg = ExperimentConfig.from_config(config)
    phi0 = -(cfg.write_phase_diff + cfg.read_phase_diff)
    return optimal_bell_settings(phi0, float(section["write_phase_rad"]))


def bell_codes(config, trials, seed):
    """(setting label, pattern codes) at each of the four Bell settings."""
    cfg = ExperimentConfig.from_config(config)
    runs = []
    for i, (wp, rp) in enumerate(bell_settings(config)):
        settings = MeasurementSettings.from_config(config, wp, rp)
        runs.append((f"w={wp:.4f},r={rp:.4f}", sample_codes(config, cfg, settings, trials, point_seed(seed, i))))
    return runs


def bell_measurement(config, trials, seed):
    """Correlation coefficients at the four Bell settings and the CHSH result."""
    components = []
    for label, codes in bell_codes(config, trials, seed):
        e, sigma = correlation(coincidences_from_patterns(codes, "central_peak"))
        components.append((label, e, sigma))
    return chsh(components)


def bell_from_streams(streams, labels=None):
    """CHSH result from four event streams, one per setting in CHSH order."""
    streams = list(streams)
    if len({s.config_hash for s in streams}) > 1:
        raise StatisticsError("Bell event streams come from different configs")
    labels = list(labels) if labels is not None else [f"stream {i + 1}" for i in range(len(streams))]
    if len(labels) != len(streams):
        raise StatisticsError("one label per event stream is needed")
    components = []
    for label, stream in zip(labels, streams):
        e, sigma = correlation(coincidences(stream, "central_peak"))
        components.append((label, e, sigma))
    return chsh(components)


def exact_fringe(config, cfg, write_phase, trials=None, model=None):
    """FringeScan of exact correlation coefficients over the read phase grid.

    Errors are those expected for `trials` trials per point (the configured
    count by default), so the fit uncertainties predict a sampled run.
    """
    trials = int(config["run"]["trials"]) if trials is None else trials
    model = model or DephasingModel.from_config(config)
    points = []
    for read_phase in read_phase_grid(config):
        settings = MeasurementSettings.from_config(config, write_phase, read_phase)
        dist = outcome_distribution(cfg, settings, model, _jitter_nodes(config))
        points.append((read_phase, *correlation(expected_table(dist, trials, "central_peak"))))
    return FringeScan.from_points(points)


def _experiment(config, mu=None):
    cfg = ExperimentConfig.from_config(config)
    return cfg if mu is None else cfg.replace(mu=float(mu))


def exact_visibility(config, mu=None):
    """Fitted visibility of the exact fringe at the configured write phase."""
    write_phase = float(config["interferometers"]["write_phase_rad"])
    return fit_visibility(exact_fringe(config, _experiment(config, mu), write_phase)).V


def exact_bell(config, mu=None, trials=None):
    """CHSH result from exact distributions at the four Bell settings.

    Errors are those expected for `trials` trials per setting.
    """
    cfg = _experiment(config, mu)
    trials = int(config["run"]["trials"]) if trials is None else trials
    model = DephasingModel.from_config(config)
    components = []
    for wp, rp in bell_settings(config):
        settings = MeasurementSettings.from_config(config, wp, rp)
        dist = outcome_distribution(cfg, settings, model, _jitter_nodes(config))
        e, sigma = correlation(expected_table(dist, trials, "central_peak"))
        components.append((f"w={wp:.4f},r={rp:.4f}", e, sigma))
    return chsh(components)


def _with_jitter(config, sigma):
    return apply_overrides(
        config, {"interferometers": {"write_jitter_rad": float(sigma), "read_jitter_rad": float(sigma)}}
    )


def calibrate_jitter(config, target_visibility, mu=None, max_jitter=1.0):
    """Copy of config whose equal write/read jitter gives the target exact visibility at mu."""
    def excess(sigma):
        return exact_visibility(_with_jitter(config, sigma), mu) - target_visibility

    ceiling = excess(0.0)
    if ceiling < 0:
        raise ConfigError(
            f"visibility {target_visibility} is out of reach: {ceiling + target_visibility:.4f} without jitter"
        )
    if excess(max_jitter) > 0:
        raise ConfigError(f"visibility {target_visibility} needs more than {max_jitter} rad of jitter")
    sigma = brentq(excess, 0.0, max_jitter, xtol=1e-5)
    log(f"calibrated jitter {sigma:.4f} rad per arm for V={target_visibility}")
    return _with_jitter(config, sigma)


def format_value(value):
    if isinstance(value, (float, np.floating)):
        return f"{value:.10g}"
    return str(value)


def write_table(path, columns, rows, config, seed):
    """CSV with a '# config_hash=... seed=...' header line.

    `config` is a config dict or an already computed config hash.
    """
    digest = config if isinstance(config, str) else config_hash(config)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# config_hash={digest} seed={seed}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(format_value(v) for v in row) + "\n")
    log(f"wrote {path} ({len(rows)} rows)")
    return path
