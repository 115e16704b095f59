"""Side-of-fringe phase lock of one imbalanced interferometer.

Lock light through the interferometer lands on a photodiode reading
P = cos²(φ/2). A PID controller drives the fiber stretcher so that P sits
at the setpoint during lock windows; during hold windows (when photons
are measured) the actuator and integrator are frozen and the phase
drifts freely.
"""

from dataclasses import dataclass, field
import os

import numpy as np

from ..core.errors import ConfigError
from ..core.logs import log

DIVERGENCE_LIMIT = 1e3
WINDOWS = ("lock", "hold")


@dataclass(frozen=True)
class LockConfig:
    drift_random_walk: float = 0.5  # rad²/s
    drift_sine: tuple = (0.5, 2.0)  # (amplitude rad, frequency Hz)
    pid_gains: tuple = (0.8, 400.0, 0.0)
    loop_rate: float = 20000.0
    lock_duration: float = 13.3e-3
    hold_duration: float = 1.4e-3
    lock_setpoint: float = 0.5
    photodiode_noise: float = 0.0
    initial_phase_error: float = 0.0

    def __post_init__(self):
        if self.lock_duration <= 0 or self.hold_duration <= 0:
            raise ConfigError("lock and hold durations must be positive")
        if self.loop_rate <= 0:
            raise ConfigError("loop_rate must be positive")
        if self.drift_random_walk < 0:
            raise ConfigError("drift_random_walk must be non-negative")
        if not 0.0 < self.lock_setpoint < 1.0:
            raise ConfigError(f"lock_setpoint must lie in (0, 1), got {self.lock_setpoint}")
        if self.photodiode_noise < 0:
            raise ConfigError("photodiode_noise must be non-negative")
        if len(self.pid_gains) != 3:
            raise ConfigError("pid_gains must be (kp, ki, kd)")
        if self.lock_samples < 1 or self.hold_samples < 1:
            raise ConfigError("lock and hold windows must each span at least one loop sample")

    @classmethod
    def from_config(cls, config):
        s = config["lock"]
        try:
            return cls(
                drift_random_walk=float(s["drift_random_walk_rad2_per_s"]),
                drift_sine=(float(s["drift_sine_amplitude_rad"]), float(s["drift_sine_frequency_hz"])),
                pid_gains=(float(s["kp"]), float(s["ki"]), float(s["kd"])),
                loop_rate=float(s["loop_rate_hz"]),
                lock_duration=float(s["lock_duration_ms"]) * 1e-3,
                hold_duration=float(s["hold_duration_ms"]) * 1e-3,
                lock_setpoint=float(s["lock_setpoint"]),
                photodiode_noise=float(s["photodiode_noise"]),
                initial_phase_error=float(s["initial_phase_error_rad"]),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid lock parameter: {e}") from e

    @property
    def dt(self):
        return 1.0 / self.loop_rate

    @property
    def lock_samples(self):
        return int(round(self.lock_duration * self.loop_rate))

    @property
    def hold_samples(self):
        return int(round(self.hold_duration * self.loop_rate))

    @property
    def setpoint_phase(self):
        """Phase on the falling side of the fringe where cos²(φ/2) equals the setpoint."""
        return 2.0 * np.arccos(np.sqrt(self.lock_setpoint))

    @property
    def error_slope(self):
        """d(setpoint - P)/dφ at the setpoint phase."""
        return 0.5 * np.sin(self.setpoint_phase)


@dataclass
class LockResult:
    t: np.ndarray
    phase: np.ndarray
    actuator: np.ndarray
    in_lock: np.ndarray
    setpoint_phase: float
    hold_window_rms: list = field(default_factory=list)
    hold_rms: float = 0.0
    failed: bool = False

    @property
    def phase_error(self):
        return fold_phase(self.phase - self.setpoint_phase)


def fold_phase(phi):
    """Fold phases into [-π, π)."""
    return (np.asarray(phi) + np.pi) % (2 * np.pi) - np.pi


def _drift(cfg, n, rng):
    t = np.arange(n) * cfg.dt
    steps = rng.normal(0.0, np.sqrt(cfg.drift_random_walk * cfg.dt), n)
    steps[0] = 0.0
    amplitude, frequency = cfg.drift_sine
    return t, cfg.initial_phase_error + np.cumsum(steps) + amplitude * np.sin(2 * np.pi * frequency * t)


def simulate_lock(cfg, total_time, seed):
    """Run the lock loop for total_time seconds; returns a LockResult.

    The controller output set in one sample is applied from the next one.
    A phase beyond ±1e3 rad marks the lock as failed and ends the run.
    """
    period = cfg.lock_samples + cfg.hold_samples
    n = int(round(total_time * cfg.loop_rate))
    if n < period:
        raise ConfigError(
            f"total_time {total_time:g} s is shorter than one lock/hold cycle "
            f"({period / cfg.loop_rate:g} s)"
        )
    rng = np.random.default_rng(seed)
    t, drift = _drift(cfg, n, rng)
    noise = rng.normal(0.0, cfg.photodiode_noise, n) if cfg.photodiode_noise > 0 else np.zeros(n)
    in_lock = (np.arange(n) % period) < cfg.lock_samples

    kp, ki, kd = cfg.pid_gains
    target = cfg.setpoint_phase
    phase = np.empty(n)
    actuator = np.empty(n)
    u = target
    integral = 0.0
    prev_error = None
    failed = False
    for k in range(n):
        phi = drift[k] + u
        phase[k] = phi
        actuator[k] = u
        if not abs(phi) <= DIVERGENCE_LIMIT:
            failed = True
            n = k + 1
            break
        if not in_lock[k]:
            prev_error = None
            continue
        error = cfg.lock_setpoint - np.cos(phi / 2.0) ** 2 + noise[k]
        integral += error * cfg.dt
        derivative = 0.0 if prev_error is None else (error - prev_error) / cfg.dt
        prev_error = error
        u = target - (kp * error + ki * integral + kd * derivative)

    result = LockResult(t[:n], phase[:n], actuator[:n], in_lock[:n], target, failed=failed)
    if failed:
        log(f"lock failed at t={t[n - 1]:.4g} s (|phase| > {DIVERGENCE_LIMIT:g} rad)")
        result.hold_rms = float("inf")
        return result

    errors = result.phase_error
    windows = []
    for start in range(cfg.lock_samples, n, period):
        chunk = errors[start:start + cfg.hold_samples]
        if len(chunk) == cfg.hold_samples:
            windows.append(float(np.sqrt(np.mean(chunk ** 2))))
    result.hold_window_rms = windows
    held = errors[~in_lock[:n]]
    result.hold_rms = float(np.sqrt(np.mean(held ** 2))) if held.size else 0.0
    return result


def closed_loop_rejection(cfg, frequency):
    """|S| of the linearised sampled loop at `frequency` (Hz).

    S(z) = 1 / (1 + g z⁻¹ K(z)), K the discrete PID and g the error slope.
    """
    kp, ki, kd = cfg.pid_gains
    dt = cfg.dt
    z_inv = np.exp(-1j * 2 * np.pi * np.asarray(frequency, dtype=float) * dt)
    controller = kp + ki * dt / (1.0 - z_inv) + kd * (1.0 - z_inv) / dt
    return np.abs(1.0 / (1.0 + cfg.error_slope * z_inv * controller))


def visibility_factor(sigma_write, sigma_read=0.0):
    """Fringe contrast left after Gaussian phase jitter on both interferometers."""
    return float(np.exp(-(sigma_write ** 2 + sigma_read ** 2) / 2.0))


def write_trajectory_csv(path, result, header=""):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header:
            f.write(header + "\n")
        f.write("t_s,phase_rad,actuator_rad,window\n")
        for t, phi, u, locked in zip(result.t, result.phase, result.actuator, result.in_lock):
            f.write(f"{t:.10g},{phi:.10g},{u:.10g},{WINDOWS[0] if locked else WINDOWS[1]}\n")
