"""Settings loader for spinbin."""

from copy import deepcopy
import hashlib
import json
import os

from .errors import ConfigError

SPINBIN_HOME = os.environ.get("SPINBIN_HOME", os.path.expanduser("~/.spinbin"))
CONFIG_PATH = os.path.join(SPINBIN_HOME, "config.json")
LOG_PATH = os.path.join(SPINBIN_HOME, "spinbin.log")

_config_cache = None


DEFAULT_CONFIG = {
    "source": {
        "mu": 0.02,
        "write_phase_diff_rad": 0.0,
        "read_phase_diff_rad": 0.0,
        "time_bin_encoding": True,
        "fock_cutoff": 2,
        "max_truncation_leakage": 1e-3,
        "auto_cutoff": True,
    },
    "timing": {
        "rephasing_period_ns": 344.0,
        "bin_separation_ns": 172.0,
        "readout_time_ns": 344.0,
        "interferometer_delay_ns": 172.0,
        "write_gate_ns": 30.0,
        "read_gate_ns": 40.0,
        "write_photon_fwhm_ns": 20.0,
        "read_photon_fwhm_ns": 30.0,
    },
    "dephasing": {
        "field_on": True,
        "harmonics": [0.5, -0.5],
        "weights": [0.5, 0.5],
    },
    "readout": {
        "transfer": 0.5,
        "allow_transfer_override": False,
        "retrieval_efficiency": 0.5,
        "crosstalk": 0.15,
    },
    "detection": {
        "detector_efficiency": 0.5,
        "dark_count_prob": 1e-5,
        "background_photon_prob": 1e-3,
        "background_coherence": 0.3,
        "background_phase_rad": 0.0,
    },
    "interferometers": {
        "write_phase_rad": 0.0,
        "read_phase_rad": 0.0,
        "write_jitter_rad": 0.2,
        "read_jitter_rad": 0.2,
        "splitting_ratio": 0.5,
        "radians_per_volt": 5.34,
        "calibration_offset_rad": 0.0,
        "jitter_nodes": 7,
        "bell_settings_v": [],
    },
    "lock": {
        "drift_random_walk_rad2_per_s": 0.5,
        "drift_sine_amplitude_rad": 0.5,
        "drift_sine_frequency_hz": 2.0,
        "kp": 0.8,
        "ki": 400.0,
        "kd": 0.0,
        "loop_rate_hz": 20000.0,
        "lock_duration_ms": 13.3,
        "hold_duration_ms": 1.4,
        "lock_setpoint": 0.5,
        "photodiode_noise": 0.0,
        "initial_phase_error_rad": 0.0,
        "total_time_s": 1.0,
    },
    "sweeps": {
        "retrieval_time_start_ns": 0.0,
        "retrieval_time_stop_ns": 800.0,
        "retrieval_time_step_ns": 8.0,
        "retrieval_mu": 0.01,
        "mu_values": [0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
        "read_phase_points": 12,
        "fringe_write_voltages_v": [0.0, 0.268],
    },
    "run": {
        "seed": 1,
        "trials": 1000000,
        "block_size": 65536,
        "n_jobs": 1,
    },
}


def _merge_config(base, overrides, path=""):
    """Recursively merge user overrides into defaults.

    Keys missing from the defaults are rejected so that a typo in a unit
    suffix does not silently fall back to the default value.
    """
    for key, value in overrides.items():
        key_path = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key '{key_path}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section '{key_path}' must be an object")
            _merge_config(base[key], value, key_path)
        else:
            base[key] = value
    return base


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}") from e
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return loaded


def load_config(path=None):
    """Load config from a JSON file, with defaults.

    Without a path the user config under SPINBIN_HOME is used (if present)
    and the merged result is cached.
    """
    global _config_cache
    if path is None and _config_cache is not None:
        return deepcopy(_config_cache)

    config = deepcopy(DEFAULT_CONFIG)
    source = path or CONFIG_PATH
    if path is not None or os.path.exists(source):
        _merge_config(config, _read_json(source))

    if path is None:
        _config_cache = deepcopy(config)
    return config


def apply_overrides(config, overrides):
    """Return a copy of config with nested overrides merged in."""
    return _merge_config(deepcopy(config), overrides)


def config_hash(config):
    """Short content digest of a config, written into every output header."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def save_config(config, path):
    """Persist a config as indented JSON."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")
