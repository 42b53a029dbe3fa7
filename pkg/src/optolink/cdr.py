"""Half-rate bang-bang CDR with a banked LC VCO.

Vote labels follow the Alexander table on mid-slicer decisions::

    d_prev == d_curr           -> HOLD
    edge == d_curr (crossing already passed at the edge sample) -> EARLY
    edge == d_prev             -> LATE

EARLY means the data edge arrives early relative to the clock, so the
loop speeds the VCO up (``+1``); LATE slows it down (``-1``). Phase is
tracked as the sampling instant minus its nominal grid position, in UI:
a faster VCO pulls the instants earlier.

Each half-rate VCO period carries two data samples (0 and 180 degrees)
and two edge samples (90 and 270 degrees). The loop is stepped once per
data sample, i.e. per half period.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .waveform import Waveform

EARLY = 1
LATE = -1
HOLD = 0

INTEGRATOR_LIMIT = 1.0


class AcquisitionError(RuntimeError):
    def __init__(self, message: str, trace: LoopTrace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class VcoConfig:
    f_min: float = 13.5e9
    f_max: float = 14.6e9
    bank_bits: int = 5
    kvco: float = 100e6
    code: int = 0
    vctrl: float = 0.0

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError("VCO range must satisfy 0 < f_min < f_max")
        if self.bank_bits < 1:
            raise ValueError("bank_bits must be >= 1")
        if self.kvco <= 0:
            raise ValueError("kvco must be > 0")
        if not 0 <= self.code <= self.max_code:
            raise ValueError(f"code out of range 0..{self.max_code}")

    @property
    def max_code(self) -> int:
        return 2**self.bank_bits - 1

    @property
    def band_step(self) -> float:
        return (self.f_max - self.f_min) / self.max_code


@dataclass(frozen=True)
class CdrConfig:
    vco: VcoConfig = field(default_factory=VcoConfig)
    kp: float = 0.2
    ki: float = 0.002
    freq_offset_ppm: float = 0.0
    initial_phase: float = 0.0
    jitter_ui: float = 0.0
    lock_window: int = 500
    lock_vote_max: float = 0.3
    lock_wander_ui: float = 0.1
    acquisition_budget: int = 4000
    mid_threshold: float = 0.0

    def __post_init__(self):
        if self.kp <= 0 or self.ki <= 0:
            raise ValueError("kp and ki must be > 0")
        if self.kp / self.ki < 50:
            raise ValueError("kp/ki must be >= 50")
        if self.lock_window < 1 or self.acquisition_budget < self.lock_window:
            raise ValueError("acquisition_budget must cover at least one lock window")
        if self.jitter_ui < 0:
            raise ValueError("jitter_ui must be >= 0")


@dataclass(frozen=True)
class LoopState:
    phase: float = 0.0
    integrator: float = 0.0
    vctrl: float = 0.0
    saturated: bool = False
    locked: bool = False


@dataclass(frozen=True)
class LoopTrace:
    """Per data sample: loop phase (UI), control voltage and vote."""

    phase: np.ndarray
    vctrl: np.ndarray
    vote: np.ndarray
    code: int
    lock_index: int | None

    @property
    def locked(self) -> bool:
        return self.lock_index is not None

    def rows(self) -> list[tuple[int, float, float, int]]:
        return [(k, float(p), float(v), int(s)) for k, (p, v, s) in enumerate(zip(self.phase, self.vctrl, self.vote))]


@dataclass(frozen=True)
class RecoveredClock:
    instants: np.ndarray
    trace: LoopTrace | None
    lock_index: int

    @property
    def locked_instants(self) -> np.ndarray:
        return self.instants[self.lock_index :]

    @property
    def locked_phase(self) -> float:
        """Circular mean of the sampling phase (mod 1 UI) after lock."""
        frac = np.mod(self.locked_instants, 1.0)
        ang = np.angle(np.mean(np.exp(2j * np.pi * frac)))
        return float(np.mod(ang / (2 * np.pi), 1.0))


def _vco_hz(vco: VcoConfig, code: int, vctrl: float) -> float:
    return vco.f_min + code * vco.band_step + vco.kvco * vctrl


def vco_frequency(cfg: VcoConfig) -> float:
    return _vco_hz(cfg, cfg.code, cfg.vctrl)


def band_select(target: float, cfg: VcoConfig) -> int:
    """Bank code closest to ``target`` at vctrl = 0; ties go to the lower code."""
    half = cfg.band_step / 2.0
    if not cfg.f_min - half <= target <= cfg.f_max + half:
        raise ValueError("band unreachable")
    freqs = cfg.f_min + np.arange(cfg.max_code + 1) * cfg.band_step
    dist = np.abs(freqs - target)
    # lowest code within rounding of the minimum, so exact ties go down
    return int(np.flatnonzero(dist <= dist.min() + 1e-9 * cfg.band_step)[0])


def bbpd_vote(d_prev: int, edge: int, d_curr: int) -> int:
    if d_prev == d_curr:
        return HOLD
    return EARLY if edge == d_curr else LATE


def loop_update(state: LoopState, vote: int, cfg: CdrConfig, code: int, baud: float) -> LoopState:
    """One PI step followed by one half-period of phase accumulation."""
    integ = state.integrator + cfg.ki * vote
    saturated = abs(integ) > INTEGRATOR_LIMIT
    integ = min(max(integ, -INTEGRATOR_LIMIT), INTEGRATOR_LIMIT)
    vctrl = integ + cfg.kp * vote
    f = _vco_hz(cfg.vco, code, vctrl) * (1.0 + cfg.freq_offset_ppm * 1e-6)
    # half a VCO period, in data UI, minus the nominal 1 UI
    phase = state.phase + baud / (2.0 * f) - 1.0
    return LoopState(phase, integ, vctrl, saturated, state.locked)


def _lock_index(phase: np.ndarray, vote: np.ndarray, cfg: CdrConfig) -> int | None:
    w = cfg.lock_window
    if phase.size < w:
        return None
    mean_vote = np.abs(sliding_window_view(vote.astype(float), w).mean(axis=1))
    pw = sliding_window_view(phase, w)
    wander = pw.max(axis=1) - pw.min(axis=1)
    ok = np.flatnonzero((mean_vote < cfg.lock_vote_max) & (wander < cfg.lock_wander_ui))
    if ok.size == 0:
        return None
    return int(ok[0] + w)


def phase_votes(signal: Waveform, phase: float, threshold: float = 0.0) -> np.ndarray:
    """Open-loop votes with data sampled at ``k + phase`` and edges half a UI earlier."""
    last = (len(signal) - 1) / signal.osr
    k = np.arange(np.ceil(0.5 - phase), np.floor(last - phase) + 1)
    data = signal.sample_at(k + phase) >= threshold
    edge = signal.sample_at(k + phase - 0.5) >= threshold
    d_prev, d_curr, e = data[:-1], data[1:], edge[1:]
    votes = np.where(d_prev == d_curr, HOLD, np.where(e == d_curr, EARLY, LATE))
    return votes.astype(np.int64)


def recover_clock(signal: Waveform, cfg: CdrConfig, mode: str = "closed", phase: float = 0.0, rng_seed=None) -> RecoveredClock:
    """Sampling instants (UI) for every data symbol.

    ``mode="external"`` mimics an off-chip clock: instants at ``k + phase``
    with no loop. ``mode="closed"`` runs the bang-bang loop and raises
    :class:`AcquisitionError` if lock is not declared within
    ``cfg.acquisition_budget`` symbols.
    """
    if signal.unit != "V":
        raise ValueError("recover_clock expects a voltage waveform")
    last = (len(signal) - 1) / signal.osr
    if mode == "external":
        instants = np.arange(np.ceil(-phase), np.floor(last - phase) + 1) + phase
        return RecoveredClock(instants, None, 0)
    if mode != "closed":
        raise ValueError(f"unknown CDR mode {mode!r}")
    if last < 2000:
        raise ValueError("closed-loop acquisition needs >= 2000 symbols")

    code = band_select(signal.baud / 2.0, cfg.vco)
    s = signal.samples.tolist()
    osr = signal.osr
    thr = cfg.mid_threshold
    rng = np.random.default_rng(rng_seed) if cfg.jitter_ui > 0 else None

    def sample(t: float) -> float:
        x = t * osr
        i = int(x)
        return s[i] + (x - i) * (s[i + 1] - s[i])

    state = LoopState(phase=cfg.initial_phase)
    instants, phases, vctrls, votes = [], [], [], []
    n = 1
    d_prev = sample(n + state.phase - 1.0) >= thr if n + state.phase - 1.0 >= 0 else False
    while True:
        t = n + state.phase
        if t - 0.5 < 0:
            state = LoopState(state.phase + 1.0, state.integrator, state.vctrl)
            continue
        if t >= last:
            break
        d = sample(t) >= thr
        e = sample(t - 0.5) >= thr
        vote = bbpd_vote(d_prev, e, d)
        instants.append(t)
        phases.append(state.phase)
        vctrls.append(state.vctrl)
        votes.append(vote)
        state = loop_update(state, vote, cfg, code, signal.baud)
        if rng is not None:
            state = LoopState(state.phase + cfg.jitter_ui * rng.standard_normal(), state.integrator, state.vctrl, state.saturated)
        d_prev = d
        n += 1

    phase_a = np.array(phases)
    vote_a = np.array(votes, dtype=np.int64)
    lock = _lock_index(phase_a[: cfg.acquisition_budget], vote_a[: cfg.acquisition_budget], cfg)
    trace = LoopTrace(phase_a, np.array(vctrls), vote_a, code, lock)
    if lock is None:
        raise AcquisitionError("acquisition failure", trace)
    return RecoveredClock(np.array(instants), trace, lock)
