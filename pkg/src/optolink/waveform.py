"""Uniformly sampled waveforms and the single-pole filter shared by TX and RX."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, lfilter_zi

UNITS = ("V", "mW", "mA")


@dataclass(frozen=True)
class Waveform:
    """Samples on a uniform grid of ``osr`` samples per unit interval.

    Sample ``n`` sits at time ``n / osr`` UI. ``unit`` is one of ``V``
    (volts), ``mW`` (optical power) or ``mA`` (photocurrent).
    """

    samples: np.ndarray
    unit: str
    osr: int
    baud: float

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit domain {self.unit!r}")
        if self.osr < 1:
            raise ValueError("osr must be >= 1")
        if self.baud <= 0:
            raise ValueError("baud must be > 0")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    @property
    def fs(self) -> float:
        return self.baud * self.osr

    @property
    def n_ui(self) -> float:
        return len(self.samples) / self.osr

    def __len__(self) -> int:
        return len(self.samples)

    def with_samples(self, samples: np.ndarray, unit: str | None = None) -> Waveform:
        return Waveform(samples, unit or self.unit, self.osr, self.baud)

    def sample_at(self, instants_ui: np.ndarray) -> np.ndarray:
        """Linearly interpolate the waveform at times given in UI."""
        x = np.asarray(instants_ui, dtype=float) * self.osr
        if x.size and (x.min() < 0 or x.max() > len(self.samples) - 1):
            raise ValueError("sample instant outside waveform span")
        return np.interp(x, np.arange(len(self.samples)), self.samples)


def single_pole_lowpass(x: np.ndarray, cutoff: float, fs: float, initial: float | None = None) -> np.ndarray:
    """First-order low-pass, exact for a zero-order-held input.

    ``y[n] = p*y[n-1] + (1-p)*x[n-1]`` with ``p = exp(-2*pi*cutoff/fs)``, so a
    step reaches ``1 - exp(-2*pi*cutoff*t)`` at every sample time ``t``.
    The filter starts in steady state at ``initial`` (default ``x[0]``).
    """
    x = np.asarray(x, dtype=float)
    if cutoff <= 0:
        raise ValueError("cutoff must be > 0")
    if x.size == 0:
        return x.copy()
    p = np.exp(-2.0 * np.pi * cutoff / fs)
    b = np.array([0.0, 1.0 - p])
    a = np.array([1.0, -p])
    x0 = x[0] if initial is None else initial
    y, _ = lfilter(b, a, x, zi=lfilter_zi(b, a) * x0)
    return y


def noise_bandwidth(cutoff: float) -> float:
    """Equivalent noise bandwidth of a single-pole response, (pi/2) * f3dB."""
    return 0.5 * np.pi * cutoff
