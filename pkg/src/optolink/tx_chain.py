"""Transmit path: 8:1 lane serialization, 3-tap FFE and the output driver."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .pattern import SymbolStream, as_levels
from .waveform import Waveform, single_pole_lowpass

N_LANES = 8

# PAM-4 level -> normalized amplitude
LEVEL_AMPLITUDE = np.array([-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0])


@dataclass(frozen=True)
class FfeTaps:
    """PRE / MAIN / POST weights as fractions of driver full scale."""

    pre: float = 0.0
    main: float = 1.0
    post: float = 0.0
    idac_bits: int = 6

    def __post_init__(self):
        if self.main <= 0:
            raise ValueError("main tap must be > 0")
        if self.idac_bits < 1:
            raise ValueError("idac_bits must be >= 1")
        if abs(self.pre) + abs(self.main) + abs(self.post) > 1.0 + 1e-12:
            raise ValueError("swing overflow")

    def quantized(self) -> FfeTaps:
        """Round each tap magnitude to the IDAC grid of ``2**idac_bits - 1`` steps.

        The main tap keeps at least one step. If rounding pushes the total
        past full scale, the tap rounded up the most loses a step.
        """
        steps = 2**self.idac_bits - 1
        w = np.array([self.pre, self.main, self.post])
        exact = np.abs(w) * steps
        n = np.round(exact).astype(np.int64)
        n[1] = max(n[1], 1)
        while n.sum() > steps:
            excess = (n - exact) + np.where(n > (np.arange(3) == 1), 0.0, -np.inf)
            n[int(np.argmax(excess))] -= 1
        pre, main, post = (np.sign(w) * n / steps).tolist()
        return replace(self, pre=pre, main=main, post=post)

    @property
    def dc_gain(self) -> float:
        return self.pre + self.main + self.post


@dataclass(frozen=True)
class LaneGroup:
    """Eight parallel lanes, shape ``(8, L)``; lane rate is ``baud / 8``."""

    lanes: np.ndarray

    def __post_init__(self):
        lanes = [np.asarray(lane, dtype=np.int64) for lane in self.lanes]
        if len(lanes) != N_LANES:
            raise ValueError(f"expected {N_LANES} lanes, got {len(lanes)}")
        if len({len(lane) for lane in lanes}) != 1:
            raise ValueError("unequal lane lengths")
        object.__setattr__(self, "lanes", np.vstack(lanes))

    @property
    def lane_length(self) -> int:
        return self.lanes.shape[1]

    @staticmethod
    def lane_rate(baud: float) -> float:
        return baud / N_LANES


@dataclass(frozen=True)
class DriverConfig:
    diff_swing: float = 1.3
    bandwidth: float = 21e9

    def __post_init__(self):
        if self.diff_swing <= 0:
            raise ValueError("diff_swing must be > 0")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")

    @property
    def rise_time(self) -> float:
        """10-90 % rise time of the single-pole stage, seconds."""
        return np.log(9.0) / (2.0 * np.pi * self.bandwidth)


def serialize_lanes(group: LaneGroup) -> SymbolStream:
    """Round-robin interleave: ``serial[k] = lanes[k % 8][k // 8]``."""
    if group.lane_length == 0:
        raise ValueError("lanes are empty")
    return SymbolStream(group.lanes.T.reshape(-1))


def apply_ffe(symbols, taps: FfeTaps) -> np.ndarray:
    """3-tap FIR on normalized PAM-4 amplitudes with edge-hold boundaries.

    ``out[k] = pre*a[k+1] + main*a[k] + post*a[k-1]`` using the IDAC-quantized
    taps.
    """
    a = LEVEL_AMPLITUDE[as_levels(symbols)]
    if a.size == 0:
        return a
    t = taps.quantized()
    padded = np.concatenate(([a[0]], a, [a[-1]]))
    return t.pre * padded[2:] + t.main * padded[1:-1] + t.post * padded[:-2]


def drive_waveform(amplitudes: np.ndarray, cfg: DriverConfig, osr: int, baud: float) -> Waveform:
    """Zero-order hold at ``osr`` samples/UI, scale to ±swing/2, single-pole low-pass."""
    if osr < 8:
        raise ValueError("osr must be >= 8")
    held = np.repeat(np.asarray(amplitudes, dtype=float), osr) * (cfg.diff_swing / 2.0)
    v = single_pole_lowpass(held, cfg.bandwidth, baud * osr)
    return Waveform(v, "V", osr, baud)
