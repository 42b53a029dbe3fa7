"""End-to-end chain assembly.

Stages, in order, and the waveform each one produces:

    ffe           normalized FFE output amplitudes (one per symbol)
    drive         differential driver voltage
    tx_optical    MZM output power
    rx_optical    power at the photodiode after fiber and VOA
    photocurrent  photodiode current
    rx_electrical TIA output after DC compensation
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from ..cdr import AcquisitionError, RecoveredClock, recover_clock
from ..metrics import PhaseCapture, eye_center, level_samples
from ..optics import mzm_modulate, mzm_transfer, photodetect, propagate
from ..pattern import PRBS7_PERIOD, BerReport, Lfsr7State, SymbolStream, ber_check, prbs7q_generate
from ..rx_chain import SlicerThresholds, deserialize_lanes, slice_pam4, thresholds_from_samples, tia_amplify
from ..tx_chain import LaneGroup, apply_ffe, drive_waveform, serialize_lanes
from ..waveform import Waveform
from .config import LinkConfig

STAGES = ("ffe", "drive", "tx_optical", "rx_optical", "photocurrent", "rx_electrical")


def stage_seeds(cfg: LinkConfig) -> dict[str, np.random.SeedSequence]:
    """Independent, fixed RNG streams per noisy stage."""
    pd, tia, cdr = np.random.SeedSequence(cfg.seed).spawn(3)
    return {"photocurrent": pd, "rx_electrical": tia, "cdr": cdr}


def _step(cfg: LinkConfig, stage: str, x):
    seeds = stage_seeds(cfg)
    if stage == "ffe":
        return apply_ffe(x, cfg.ffe)
    if stage == "drive":
        return drive_waveform(x, cfg.driver, cfg.osr, cfg.baud)
    if stage == "tx_optical":
        return mzm_modulate(x, cfg.mzm, cfg.path.laser_power)
    if stage == "rx_optical":
        return propagate(x, cfg.path)
    if stage == "photocurrent":
        return photodetect(x, cfg.pd, cfg.noise, seeds["photocurrent"])
    if stage == "rx_electrical":
        return tia_amplify(x, cfg.tia, seeds["rx_electrical"], noise=cfg.noise.tia)
    raise ValueError(f"unknown stage {stage!r}")


def front_end(cfg: LinkConfig, symbols, start_after: str | None = None, start_value=None) -> dict[str, object]:
    """Run the analog chain and return every stage output.

    With ``start_after`` set, ``start_value`` is taken as that stage's
    output and only the downstream stages run.
    """
    outputs: dict[str, object] = {}
    x = symbols
    todo = STAGES
    if start_after is not None:
        todo = STAGES[STAGES.index(start_after) + 1 :]
        x = start_value
    for stage in todo:
        x = _step(cfg, stage, x)
        outputs[stage] = x
    return outputs


def nominal_oma_mw(cfg: LinkConfig, include_voa: bool = True) -> float:
    """Outer OMA at the photodiode from the static MZM transfer at settled drive."""
    v = cfg.ffe.quantized().dc_gain * cfg.driver.diff_swing / 2.0
    span = float(mzm_transfer(v, cfg.mzm, cfg.path.laser_power) - mzm_transfer(-v, cfg.mzm, cfg.path.laser_power))
    loss = cfg.path.total_loss_db if include_voa else cfg.path.fiber_loss
    return span * 10.0 ** (-loss / 10.0)


def set_oma(cfg: LinkConfig, oma_dbm: float) -> LinkConfig:
    """Choose the VOA so the PD sees ``oma_dbm`` of outer OMA."""
    atten = 10.0 * np.log10(nominal_oma_mw(cfg, include_voa=False)) - oma_dbm
    if atten < 0:
        raise ValueError(f"OMA {oma_dbm} dBm exceeds what the laser and modulator deliver")
    return replace(cfg, path=replace(cfg.path, voa_atten=float(atten)))


def oma_dbm(cfg: LinkConfig) -> float:
    return float(10.0 * np.log10(nominal_oma_mw(cfg)))


@dataclass(frozen=True)
class LinkRun:
    report: BerReport
    received: SymbolStream
    lanes: LaneGroup
    clock: RecoveredClock
    thresholds: SlicerThresholds
    locked: bool
    taps: dict[str, object]


def prbs_symbols(cfg: LinkConfig, n_symbols: int) -> SymbolStream:
    return prbs7q_generate(Lfsr7State(cfg.prbs_seed), n_symbols)


def transport(cfg: LinkConfig, symbols, on_unlock: str = "raise") -> tuple[SymbolStream, RecoveredClock, SlicerThresholds, bool, dict]:
    """Send ``symbols`` through the chain and the closed-loop CDR.

    Returns the symbols decided after lock. With ``on_unlock="report"`` a
    failed acquisition is not raised; slicing then starts at the end of the
    acquisition budget.
    """
    outs = front_end(cfg, symbols)
    rx = outs["rx_electrical"]
    locked = True
    try:
        clock = recover_clock(rx, cfg.cdr, "closed", rng_seed=stage_seeds(cfg)["cdr"])
    except AcquisitionError as exc:
        if on_unlock == "raise":
            raise
        locked = False
        t = exc.trace
        instants = np.arange(t.phase.size) + 1.0 + t.phase
        clock = RecoveredClock(instants, t, min(cfg.cdr.acquisition_budget, t.phase.size - 1))
    instants = clock.locked_instants
    thresholds = thresholds_from_samples(rx.sample_at(instants))
    received = slice_pam4(rx, thresholds, instants)
    return received, clock, thresholds, locked, outs


def run_link_e2e(cfg: LinkConfig, n_symbols: int, tap_points=(), on_unlock: str = "raise") -> LinkRun:
    """PRBS7Q through the full link, closed-loop CDR, 1:8 demux and the checker."""
    for t in tap_points:
        if t not in STAGES:
            raise ValueError(f"unknown tap point {t!r}")
    symbols = prbs_symbols(cfg, n_symbols)
    received, clock, thresholds, locked, outs = transport(cfg, symbols, on_unlock)
    lanes = deserialize_lanes(received)
    checked = serialize_lanes(lanes)
    report = ber_check(symbols.symbols[:PRBS7_PERIOD], checked, "auto")
    taps = {t: outs[t] for t in tap_points}
    return LinkRun(report, received, lanes, clock, thresholds, locked, taps)


class FixedPhaseLink:
    """External-clock receiver for bathtub sweeps.

    The waveform is simulated once; ``capture(phase)`` samples it at
    ``k + center + phase``. ``center`` is the timing center of the
    noiseless eye unless given.
    """

    def __init__(self, cfg: LinkConfig, n_symbols: int, center: float | None = None, thresholds: SlicerThresholds | None = None):
        self.cfg = cfg
        self.symbols = prbs_symbols(cfg, n_symbols)
        self._center = center
        self._thresholds = thresholds

    @cached_property
    def signal(self) -> Waveform:
        return front_end(self.cfg, self.symbols)["rx_electrical"]

    @property
    def center(self) -> float:
        if self._center is None:
            clean = front_end(self.cfg.with_noise(False), self.symbols)["rx_electrical"]
            self._center = eye_center(clean, self.symbols.symbols)
        return self._center

    @property
    def thresholds(self) -> SlicerThresholds:
        if self._thresholds is None:
            _, values = level_samples(self.signal, self.symbols.symbols, self.center)
            self._thresholds = thresholds_from_samples(values)
        return self._thresholds

    def capture(self, phase: float) -> PhaseCapture:
        levels, values = level_samples(self.signal, self.symbols.symbols, self.center + phase)
        return PhaseCapture(levels, values, self.thresholds)

    __call__ = capture
