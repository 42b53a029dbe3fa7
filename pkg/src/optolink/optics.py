"""Electro-optic conversion: dual-drive MZM, lossy fiber path, PIN photodiode."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .waveform import Waveform

Q_ELECTRON = 1.602176634e-19


@dataclass(frozen=True)
class MzmConfig:
    """Intensity transfer of the modulator.

    The dual-drive push-pull pair is collapsed into one effective
    differential drive voltage, so ``v_pi`` is the effective half-wave
    voltage seen by that drive.
    """

    v_pi: float = 4.260764
    bias_phase: float = -np.pi / 2
    insertion_loss: float = 4.0
    static_er: float = 25.0

    def __post_init__(self):
        if self.v_pi <= 0:
            raise ValueError("v_pi must be > 0")
        if self.static_er <= 0:
            raise ValueError("static_er must be > 0")
        if self.insertion_loss < 0:
            raise ValueError("insertion_loss must be >= 0")


@dataclass(frozen=True)
class OpticalPath:
    laser_power: float = 10.0
    fiber_loss: float = 0.2
    voa_atten: float = 0.0

    def __post_init__(self):
        if self.laser_power <= 0:
            raise ValueError("laser_power must be > 0")
        if self.fiber_loss < 0 or self.voa_atten < 0:
            raise ValueError("losses must be >= 0")

    @property
    def total_loss_db(self) -> float:
        return self.fiber_loss + self.voa_atten


@dataclass(frozen=True)
class PdConfig:
    responsivity: float = 0.35
    capacitance: float = 80.0
    dark_current: float = 0.0

    def __post_init__(self):
        if not 0 < self.responsivity <= 1.2:
            raise ValueError("responsivity out of (0,1.2]")
        if self.capacitance <= 0:
            raise ValueError("capacitance must be > 0")
        if self.dark_current < 0:
            raise ValueError("dark_current must be >= 0")


@dataclass(frozen=True)
class NoiseConfig:
    shot: bool = True
    tia: bool = True

    @classmethod
    def off(cls) -> NoiseConfig:
        return cls(shot=False, tia=False)


def mzm_transfer(v, cfg: MzmConfig, laser_power: float):
    """Static optical power (mW) for drive voltage ``v``."""
    p_max = laser_power * 10.0 ** (-cfg.insertion_loss / 10.0)
    p_floor = p_max * 10.0 ** (-cfg.static_er / 10.0)
    span = p_max - p_floor
    return p_floor + 0.5 * span * (1.0 + np.cos(np.pi * np.asarray(v) / cfg.v_pi + cfg.bias_phase))


def mzm_modulate(drive: Waveform, cfg: MzmConfig, laser_power: float) -> Waveform:
    if drive.unit != "V":
        raise ValueError("MZM drive must be in volts")
    return drive.with_samples(mzm_transfer(drive.samples, cfg, laser_power), unit="mW")


def calibrate_v_pi(target_er_db: float = 4.3, diff_swing: float = 1.3, cfg: MzmConfig | None = None) -> float:
    """Half-wave voltage at which a ±swing/2 drive gives ``target_er_db`` extinction."""
    base = cfg or MzmConfig()
    v = diff_swing / 2.0

    def er_error(v_pi: float) -> float:
        c = MzmConfig(v_pi, base.bias_phase, base.insertion_loss, base.static_er)
        hi, lo = mzm_transfer(v, c, 1.0), mzm_transfer(-v, c, 1.0)
        return 10.0 * np.log10(hi / lo) - target_er_db

    # v_pi > 2*v keeps the drive on the monotone segment
    return float(brentq(er_error, 2.0 * v * 1.0001, 100.0 * v, xtol=1e-12))


def propagate(optical: Waveform, path: OpticalPath) -> Waveform:
    if optical.unit != "mW":
        raise ValueError("propagate expects an optical waveform")
    if np.any(optical.samples < 0):
        raise AssertionError("negative optical power sample")
    return optical.with_samples(optical.samples * 10.0 ** (-path.total_loss_db / 10.0))


def photodetect(optical: Waveform, pd: PdConfig, noise: NoiseConfig, rng_seed=None) -> Waveform:
    """Photocurrent in mA with Gaussian shot noise over the sample bandwidth."""
    if optical.unit != "mW":
        raise ValueError("photodetect expects an optical waveform")
    i = pd.responsivity * optical.samples + pd.dark_current * 1e-6
    if noise.shot and i.size:
        i_mean_a = float(np.mean(i)) * 1e-3
        sigma_ma = np.sqrt(2.0 * Q_ELECTRON * max(i_mean_a, 0.0) * optical.fs / 2.0) * 1e3
        i = i + sigma_ma * np.random.default_rng(rng_seed).standard_normal(i.size)
    return optical.with_samples(i, unit="mA")
