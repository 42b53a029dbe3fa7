"""Receive path: TIA with DC compensation, adaptive PAM-4 slicer, 1:8 deserializer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pattern import SymbolStream, as_levels
from .tx_chain import N_LANES, LaneGroup
from .waveform import Waveform, single_pole_lowpass

MIN_TRAINING_SYMBOLS = 500


@dataclass(frozen=True)
class TiaConfig:
    """Composite analog front end.

    ``bandwidth`` is the single pole standing in for the PD RC, T-coil and
    the amplifier stages. ``input_noise_density`` is input-referred, in
    pA/sqrt(Hz). ``dc_comp_cutoff`` is the corner of the DC-removal loop.
    """

    transimpedance: float = 2100.0
    bandwidth: float = 19.6e9
    input_noise_density: float = 32.634
    dc_comp_cutoff: float = 1e6
    dc_comp: bool = True

    def __post_init__(self):
        if self.transimpedance <= 0:
            raise ValueError("transimpedance must be > 0")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        if self.input_noise_density < 0:
            raise ValueError("input_noise_density must be >= 0")
        if not 0 < self.dc_comp_cutoff < 0.01 * self.bandwidth:
            raise ValueError("dc_comp_cutoff must be well below bandwidth")


@dataclass(frozen=True)
class SlicerThresholds:
    t_low: float
    t_mid: float
    t_high: float

    def __post_init__(self):
        if not self.t_low < self.t_mid < self.t_high:
            raise ValueError("thresholds must satisfy t_low < t_mid < t_high")

    def as_array(self) -> np.ndarray:
        return np.array([self.t_low, self.t_mid, self.t_high])


def tia_amplify(current: Waveform, cfg: TiaConfig, rng_seed=None, noise: bool = True) -> Waveform:
    """Current (mA) to volts: pole, transimpedance, then DC removal.

    The DC loop is assumed settled before the capture starts: its
    integrator begins at the record mean.
    """
    if current.unit != "mA":
        raise ValueError("tia_amplify expects a current waveform")
    i = current.samples
    if noise and cfg.input_noise_density > 0 and i.size:
        sigma_ma = cfg.input_noise_density * 1e-12 * np.sqrt(current.fs / 2.0) * 1e3
        i = i + sigma_ma * np.random.default_rng(rng_seed).standard_normal(i.size)
    v = single_pole_lowpass(i, cfg.bandwidth, current.fs) * cfg.transimpedance * 1e-3
    if cfg.dc_comp and v.size:
        v = v - single_pole_lowpass(v, cfg.dc_comp_cutoff, current.fs, initial=float(np.mean(v)))
    return current.with_samples(v, unit="V")


def thresholds_from_samples(values: np.ndarray, iterations: int = 10) -> SlicerThresholds:
    """Four-cluster split of sampled amplitudes.

    Clusters start at the means of the sorted quartiles and are refined by
    a few 1-D k-means passes; thresholds sit at adjacent cluster midpoints.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if v.size < MIN_TRAINING_SYMBOLS:
        raise ValueError(f"training needs >= {MIN_TRAINING_SYMBOLS} symbols")
    means = np.array([q.mean() for q in np.array_split(v, 4)])
    spread = means[-1] - means[0]
    if spread <= 0 or np.min(np.diff(means)) < 0.1 * spread:
        raise ValueError("insufficient level coverage")
    for _ in range(iterations):
        cuts = 0.5 * (means[1:] + means[:-1])
        groups = np.split(v, np.searchsorted(v, cuts))
        if min(g.size for g in groups) < 0.05 * v.size:
            raise ValueError("insufficient level coverage")
        means = np.array([g.mean() for g in groups])
    cuts = 0.5 * (means[1:] + means[:-1])
    return SlicerThresholds(*cuts)


def adapt_thresholds(training: Waveform, baud: float, phase: float) -> SlicerThresholds:
    """Thresholds from samples taken at ``k + phase`` UI over the training record."""
    if baud != training.baud:
        raise ValueError("baud does not match the training waveform")
    last = (len(training) - 1) / training.osr
    instants = np.arange(np.ceil(-phase), np.floor(last - phase) + 1) + phase
    return thresholds_from_samples(training.sample_at(instants))


def decide(values: np.ndarray, thresholds: SlicerThresholds) -> np.ndarray:
    """Level = number of thresholds at or below the value (ties go up)."""
    return np.searchsorted(thresholds.as_array(), np.asarray(values, dtype=float), side="right")


def slice_pam4(signal: Waveform, thresholds: SlicerThresholds, sample_instants: np.ndarray) -> SymbolStream:
    return SymbolStream(decide(signal.sample_at(sample_instants), thresholds))


def deserialize_lanes(serial) -> LaneGroup:
    """Inverse of the round-robin serializer; a partial tail frame is dropped."""
    s = as_levels(serial)
    n = (s.size // N_LANES) * N_LANES
    return LaneGroup(s[:n].reshape(-1, N_LANES).T)
