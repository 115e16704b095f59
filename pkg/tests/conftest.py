"""Shared fixtures for model, analysis and CLI tests."""

import sys
from copy import deepcopy

import pytest

# Module alias: `from spinbin.X.Y import Z` resolves to `from src.X.Y import Z`.
# Set up package-level aliases BEFORE importing submodules so that cli.py,
# which imports through `spinbin`, sees the same module objects as the tests.
import src
import src.core
import src.physics
import src.optics
import src.sim
import src.control
import src.analysis

sys.modules["spinbin"] = src
for subpkg in ("core", "physics", "optics", "sim", "control", "analysis"):
    sys.modules[f"spinbin.{subpkg}"] = getattr(src, subpkg)

import src.core.config
import src.core.errors
import src.core.logs
import src.physics.dephasing
import src.physics.modes
import src.physics.source
import src.optics.interferometer
import src.sim.events
import src.sim.montecarlo
import src.control.lockloop
import src.analysis.coincidences
import src.analysis.statistics
import src.sweeps

for subpkg, modules in {
    "core": ["config", "errors", "logs"],
    "physics": ["dephasing", "modes", "source"],
    "optics": ["interferometer"],
    "sim": ["events", "montecarlo"],
    "control": ["lockloop"],
    "analysis": ["coincidences", "statistics"],
}.items():
    for mod in modules:
        sys.modules[f"spinbin.{subpkg}.{mod}"] = getattr(getattr(src, subpkg), mod)
sys.modules["spinbin.sweeps"] = src.sweeps

from src.core import config
from src.physics.source import ExperimentConfig


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep the run log and user config out of the real SPINBIN_HOME."""
    monkeypatch.setattr(config, "LOG_PATH", str(tmp_path / "home" / "spinbin.log"))
    monkeypatch.setattr(config, "CONFIG_PATH", str(tmp_path / "home" / "config.json"))
    monkeypatch.setattr(config, "_config_cache", None)
    return tmp_path / "home"


@pytest.fixture
def default_config():
    return deepcopy(config.DEFAULT_CONFIG)


@pytest.fixture
def ideal_cfg():
    """Lossless-readout, noise-free experiment at small mu."""
    return ExperimentConfig(
        mu=0.01,
        readout_transfer=0.5,
        retrieval_efficiency=1.0,
        detector_efficiency=1.0,
    )


@pytest.fixture
def small_config(default_config):
    """Default config with short sweeps for CLI tests."""
    default_config["run"]["trials"] = 200000
    default_config["run"]["block_size"] = 65536
    default_config["sweeps"]["mu_values"] = [0.01, 0.1]
    default_config["sweeps"]["read_phase_points"] = 6
    default_config["sweeps"]["retrieval_time_start_ns"] = 0.0
    default_config["sweeps"]["retrieval_time_stop_ns"] = 344.0
    default_config["sweeps"]["retrieval_time_step_ns"] = 172.0
    default_config["lock"]["total_time_s"] = 0.05
    return default_config
