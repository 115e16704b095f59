#!/usr/bin/env python3
"""Spinbin CLI: figure-data sweeps for the time-bin spin-photon entanglement simulator."""

import os
import sys

# Add spinbin package to path
SPINBIN_HOME = os.environ.get("SPINBIN_HOME", os.path.expanduser("~/.spinbin"))
sys.path.insert(0, SPINBIN_HOME)

DEFAULT_OUT = "spinbin-out"
COMMON_OPTIONS = ("config", "seed", "trials", "out")


def _bootstrap_package():
    """Make `spinbin` importable when running from a source checkout."""
    if "spinbin" in sys.modules:
        return
    try:
        import spinbin  # noqa: F401
    except ImportError:
        repo = os.path.dirname(os.path.abspath(__file__))
        sys.path.insert(0, repo)
        import src

        sys.modules["spinbin"] = src


def _parse_args(args, flags=(), values=()):
    """Split options from positional arguments.

    Every command takes --config, --seed, --trials and --out. `flags` names
    the command's bare switches and `values` its extra valued options
    (underscored, so --no-field is "no_field"). Anything else starting with
    -- is a ConfigError.
    """
    from spinbin.core.errors import ConfigError

    valued = COMMON_OPTIONS + tuple(values)
    options = {"config": None, "seed": None, "trials": None, "out": DEFAULT_OUT}
    options.update({name: None for name in values})
    options.update({name: False for name in flags})
    positional = []
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--"):
            positional.append(arg)
            i += 1
            continue
        name = arg[2:].replace("-", "_")
        if name in valued:
            if i + 1 >= len(args):
                raise ConfigError(f"{arg} needs a value")
            options[name] = args[i + 1]
            i += 2
        elif name in flags:
            options[name] = True
            i += 1
        else:
            raise ConfigError(f"unknown option {arg}")
    return options, positional


def _load(options):
    """Config plus the resolved seed and trial count for a run."""
    from spinbin.core.config import config_hash, load_config
    from spinbin.core.errors import ConfigError
    from spinbin.core.logs import log

    config = load_config(options["config"])
    try:
        seed = int(options["seed"]) if options["seed"] is not None else int(config["run"]["seed"])
        trials = int(float(options["trials"])) if options["trials"] is not None else int(config["run"]["trials"])
    except ValueError as e:
        raise ConfigError(f"invalid --seed/--trials value: {e}") from e
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    if trials <= 0:
        raise ConfigError("trials must be positive")
    log(f"config_hash={config_hash(config)} seed={seed} trials={trials}")
    return config, seed, trials


def _out(options, name):
    return os.path.join(options["out"], name)


def cmd_retrieval_sweep(args):
    """Conditional retrieval efficiency vs readout time: retrieval-sweep [--no-field]"""
    from spinbin.sweeps import retrieval_sweep, write_table

    options, _ = _parse_args(args, flags=("no_field",))
    config, seed, trials = _load(options)
    no_field = options["no_field"]
    rows = retrieval_sweep(config, trials, seed, no_field=no_field)
    path = write_table(
        _out(options, "retrieval_sweep.csv"),
        ("readout_time_ns", "model", "mc", "mc_sigma"),
        rows,
        config,
        seed,
    )
    print(f"Wrote {len(rows)} points to {path}" + (" (field off)" if no_field else ""))


def cmd_selectivity_sweep(args):
    """Side-peak selectivity vs mu."""
    from spinbin.sweeps import selectivity_sweep, write_table

    options, _ = _parse_args(args)
    config, seed, trials = _load(options)
    rows = selectivity_sweep(config, trials, seed)
    path = write_table(
        _out(options, "selectivity_sweep.csv"),
        ("mu", "selectivity", "sigma", "C_EE", "C_EL", "C_LE", "C_LL"),
        rows,
        config,
        seed,
    )
    for mu, s, sigma, *_ in rows:
        print(f"  mu={mu:<6g} S={s:.4f} +/- {sigma:.4f}")
    print(f"Wrote {path}")


def cmd_fringe_scan(args):
    """Read-phase fringes at the configured write voltages, with fits."""
    from spinbin.sweeps import fringe_scan, write_table

    options, _ = _parse_args(args)
    config, seed, trials = _load(options)
    scan_rows, fit_rows = fringe_scan(config, trials, seed)
    write_table(
        _out(options, "fringe_scan.csv"),
        ("write_phase_rad", "read_phase_rad", "E", "sigma_E", "coincidences"),
        scan_rows,
        config,
        seed,
    )
    path = write_table(
        _out(options, "fringe_fit.csv"),
        ("write_phase_rad", "V", "sigma_V", "phi0_rad", "sigma_phi0_rad"),
        fit_rows,
        config,
        seed,
    )
    for wp, v, sv, phi0, sphi in fit_rows:
        print(f"  write phase {wp:.3f} rad: V={v:.3f} +/- {sv:.3f}, phi0={phi0:.3f} +/- {sphi:.3f} rad")
    if len(fit_rows) >= 2:
        import numpy as np

        shift = (fit_rows[1][3] - fit_rows[0][3] + np.pi) % (2 * np.pi) - np.pi
        print(f"  fringe shift: {np.degrees(shift):.1f} deg")
    print(f"Wrote {path}")


def cmd_visibility_sweep(args):
    """Fringe visibility and coincidence rate vs mu."""
    from spinbin.analysis.statistics import BELL_VISIBILITY
    from spinbin.sweeps import visibility_sweep, write_table

    options, _ = _parse_args(args)
    config, seed, trials = _load(options)
    rows = visibility_sweep(config, trials, seed)
    path = write_table(
        _out(options, "visibility_sweep.csv"),
        ("mu", "V", "sigma_V", "coincidence_rate", "sigma_rate"),
        rows,
        config,
        seed,
    )
    for mu, v, sv, rate, _ in rows:
        mark = "*" if v > BELL_VISIBILITY else " "
        print(f"  {mark} mu={mu:<6g} V={v:.3f} +/- {sv:.3f} rate={rate:.3e}")
    print(f"Wrote {path}")


def cmd_bell(args):
    """CHSH measurement: bell [--target-visibility V] | bell --events F1 F2 F3 F4"""
    from spinbin.core.errors import ConfigError
    from spinbin.sweeps import bell_from_streams, bell_measurement, calibrate_jitter, write_table

    options, files = _parse_args(args, flags=("events",), values=("target_visibility",))
    if options["events"]:
        from spinbin.sim.events import read_events

        if len(files) != 4:
            raise ConfigError("bell --events needs four event files in CHSH setting order")
        streams = [read_events(f) for f in files]
        result = bell_from_streams(streams, [os.path.basename(f) for f in files])
        config, seed = streams[0].config_hash, streams[0].seed
    else:
        config, seed, trials = _load(options)
        if options["target_visibility"] is not None:
            try:
                target = float(options["target_visibility"])
            except ValueError as e:
                raise ConfigError(f"invalid --target-visibility value: {e}") from e
            config = calibrate_jitter(config, target)
            jitter = config["interferometers"]["write_jitter_rad"]
            print(f"  jitter calibrated to {jitter:.4f} rad per arm for V={target}")
        result = bell_measurement(config, trials, seed)
    write_table(
        _out(options, "bell_correlations.csv"),
        ("setting", "E", "sigma_E"),
        result.components,
        config,
        seed,
    )
    path = write_table(_out(options, "bell.csv"), ("S", "sigma_S"), [(result.S, result.sigma_S)], config, seed)
    for setting, e, sigma in result.components:
        print(f"  {setting}: E={e:+.4f} +/- {sigma:.4f}")
    print(f"S = {result.S:.4f} +/- {result.sigma_S:.4f} ({result.violation_sigmas:.1f} sigma above 2)")
    if not result.within_tsirelson:
        print("Warning: S exceeds the Tsirelson bound by more than 3 sigma")
    print(f"Wrote {path}")


def cmd_lock_sim(args):
    """Simulate the interferometer lock: trajectory and hold-window jitter."""
    from spinbin.control.lockloop import LockConfig, simulate_lock, visibility_factor, write_trajectory_csv
    from spinbin.core.config import config_hash
    from spinbin.core.logs import log
    from spinbin.sweeps import write_table

    options, _ = _parse_args(args)
    config, seed, _ = _load(options)
    cfg = LockConfig.from_config(config)
    result = simulate_lock(cfg, float(config["lock"]["total_time_s"]), seed)
    write_trajectory_csv(
        _out(options, "lock_trajectory.csv"),
        result,
        header=f"# config_hash={config_hash(config)} seed={seed}",
    )
    log(f"wrote {_out(options, 'lock_trajectory.csv')}")
    rows = [(i, rms) for i, rms in enumerate(result.hold_window_rms)]
    rows.append(("all", result.hold_rms))
    path = write_table(_out(options, "lock_summary.csv"), ("window", "rms_rad"), rows, config, seed)
    if result.failed:
        print("Lock FAILED: phase diverged")
    else:
        print(f"Hold-window rms phase error: {result.hold_rms:.4f} rad over {len(result.hold_window_rms)} windows")
        print(f"Visibility factor for two such interferometers: {visibility_factor(result.hold_rms, result.hold_rms):.4f}")
    print(f"Wrote {path}")


def cmd_simulate(args):
    """Sample trials into event-stream files: simulate [--bell]

    With --bell, one file per CHSH setting (bell_events_1..4.csv) drawn
    with the same streams as the bell command.
    """
    from spinbin.core.config import config_hash
    from spinbin.core.logs import log
    from spinbin.physics.source import ExperimentConfig
    from spinbin.sim.events import write_events
    from spinbin.sim.montecarlo import MeasurementSettings, patterns_to_records
    from spinbin.sweeps import bell_codes, sample_codes

    options, _ = _parse_args(args, flags=("bell",))
    config, seed, trials = _load(options)
    if options["bell"]:
        for i, (label, codes) in enumerate(bell_codes(config, trials, seed), start=1):
            path = _out(options, f"bell_events_{i}.csv")
            n = write_events(path, patterns_to_records(codes), config_hash(config), seed, trials)
            log(f"wrote {path}")
            print(f"  {label}: {n} detection records to {path}")
        return
    cfg = ExperimentConfig.from_config(config)
    codes = sample_codes(config, cfg, MeasurementSettings.from_config(config), trials, seed)
    path = _out(options, "events.csv")
    n = write_events(path, patterns_to_records(codes), config_hash(config), seed, trials)
    log(f"wrote {path}")
    print(f"Wrote {n} detection records from {trials} trials to {path}")


def cmd_analyze(args):
    """Histogram, coincidences and correlations of event-stream files: analyze FILE [FILE ...]"""
    from spinbin.analysis.coincidences import coincidences, histogram
    from spinbin.analysis.statistics import correlation, selectivity
    from spinbin.core.errors import StatisticsError
    from spinbin.sim.events import combine_streams, read_events

    options, files = _parse_args(args)
    if not files:
        print("Usage: spinbin analyze EVENTS_FILE [EVENTS_FILE ...] [--out DIR]")
        return
    from spinbin.sweeps import write_table

    stream = combine_streams([read_events(f) for f in files])
    config, seed = stream.config_hash, stream.seed

    counts = histogram(stream)
    write_table(
        _out(options, "histogram.csv"),
        ("peak", "detector", "count"),
        [(p, d, n) for (p, d), n in counts.items()],
        config,
        seed,
    )

    side = coincidences(stream, "side_peaks")
    central = coincidences(stream, "central_peak")
    rows = [("trials", side.trials, ""), ("discarded_side", side.discarded, ""), ("discarded_central", central.discarded, "")]
    rows += [(f"C_{k}", v, "") for k, v in side.as_dict().items()]
    rows += [(f"N_{k}", v, "") for k, v in central.as_dict().items()]
    for name, fn, table in (("selectivity", selectivity, side), ("E", correlation, central)):
        try:
            value, sigma = fn(table)
            rows.append((name, value, sigma))
        except StatisticsError as e:
            print(f"  {name}: {e}")
    path = write_table(_out(options, "analysis.csv"), ("quantity", "value", "sigma"), rows, config, seed)
    for name, value, sigma in rows:
        print(f"  {name:<18} {value}" + (f" +/- {sigma:.4g}" if sigma != "" else ""))
    print(f"Wrote {path}")


COMMANDS = {
    "retrieval-sweep": cmd_retrieval_sweep,
    "selectivity-sweep": cmd_selectivity_sweep,
    "fringe-scan": cmd_fringe_scan,
    "visibility-sweep": cmd_visibility_sweep,
    "bell": cmd_bell,
    "lock-sim": cmd_lock_sim,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print("Spinbin: time-bin spin-photon entanglement simulator\n")
        print("Commands:")
        print("  retrieval-sweep    Retrieval efficiency vs readout time [--no-field]")
        print("  selectivity-sweep  Side-peak selectivity vs mu")
        print("  fringe-scan        Read-phase fringes at two write voltages, with fits")
        print("  visibility-sweep   Visibility and coincidence rate vs mu")
        print("  bell               CHSH parameter at four phase settings [--target-visibility V | --events F1..F4]")
        print("  lock-sim           Interferometer lock trajectory and hold-window jitter")
        print("  simulate           Write an event-stream file [--bell: one file per CHSH setting]")
        print("  analyze            Analyze event-stream files: analyze FILE [FILE ...]")
        print("\nFlags: --config PATH --seed N --trials N --out DIR")
        return 0

    _bootstrap_package()
    from spinbin.core.errors import SpinbinError
    from spinbin.core.logs import log, log_error

    command, args = argv[0], argv[1:]
    if command not in COMMANDS:
        print(f"Unknown command: {command}")
        print(f"Available: {', '.join(COMMANDS)}")
        return 1

    log(f"{command} {' '.join(args)}")
    try:
        COMMANDS[command](args)
    except SpinbinError as e:
        log_error(command, e)
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
