"""Measurements: eye rasters, bathtubs, OMA/ER, energy per bit, heat load, noise calibration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import erfc

from .pattern import gray_unmap
from .rx_chain import SlicerThresholds, decide
from .waveform import Waveform

MIN_LEVEL_SAMPLES = 50
BER_FLOOR = 1e-300


class InsufficientStatistics(ValueError):
    pass


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class EyeRaster:
    """2-D histogram over two UI; ``counts[amplitude_bin, phase_bin]``."""

    counts: np.ndarray
    phase_bins: int
    amplitude_bins: int
    amplitude_range: tuple[float, float]
    unit: str
    phase_ref: float = 0.0

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class BathtubPoint:
    phase: float
    ber: float
    method: str
    means: tuple[float, ...] = ()
    sigmas: tuple[float, ...] = ()


@dataclass(frozen=True)
class BathtubCurve:
    points: list[BathtubPoint]
    oma_dbm: float | None = None

    @property
    def phases(self) -> np.ndarray:
        return np.array([p.phase for p in self.points])

    @property
    def bers(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])


class OmaEr(NamedTuple):
    oma_dbm: float
    er_db: float
    degenerate: bool


class Opening(NamedTuple):
    width: float
    left: float
    right: float
    reached: bool


@dataclass(frozen=True)
class PhaseCapture:
    """What one clock phase yields: transmitted levels and the matching samples."""

    levels: np.ndarray
    values: np.ndarray
    thresholds: SlicerThresholds


@dataclass(frozen=True)
class EnergyEntry:
    label: str
    power_mw: float
    rate_gbps: float
    pj_per_bit: float


@dataclass(frozen=True)
class HeatLoadEntry:
    medium: str
    lanes: int
    load_4k_mw: float
    load_50k_mw: float


@dataclass(frozen=True)
class BudgetReport:
    energy: list[EnergyEntry] = field(default_factory=list)
    heat: list[HeatLoadEntry] = field(default_factory=list)


# --- eye geometry -----------------------------------------------------------


def eye_raster(signal: Waveform, baud: float, phase_ref: float = 0.0, phase_bins: int = 64,
               amplitude_bins: int = 64, amplitude_range: tuple[float, float] | None = None) -> EyeRaster:
    """Fold every sample modulo 2 UI (relative to ``phase_ref``) into a histogram."""
    if phase_bins < 8 or amplitude_bins < 8:
        raise ValueError("eye raster needs at least 8 bins per axis")
    if baud != signal.baud:
        raise ValueError("baud does not match the waveform")
    if signal.n_ui < 100:
        raise ValueError("eye raster needs >= 100 UI of signal")
    v = signal.samples
    if amplitude_range is None:
        lo, hi = float(v.min()), float(v.max())
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(lo), 1.0) * 0.05
        amplitude_range = (lo - pad, hi + pad)
    lo, hi = amplitude_range
    t = np.mod(np.arange(v.size) / signal.osr - phase_ref, 2.0)
    col = np.minimum((t / 2.0 * phase_bins).astype(np.int64), phase_bins - 1)
    row = np.clip(((v - lo) / (hi - lo) * amplitude_bins).astype(np.int64), 0, amplitude_bins - 1)
    counts = np.zeros((amplitude_bins, phase_bins), dtype=np.int64)
    np.add.at(counts, (row, col), 1)
    return EyeRaster(counts, phase_bins, amplitude_bins, (lo, hi), signal.unit, phase_ref)


def level_samples(signal: Waveform, levels: np.ndarray, offset: float, margin: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Sample symbol ``k`` at ``k + offset`` UI; returns (levels, values) for in-range k."""
    levels = np.asarray(levels)
    last = (len(signal) - 1) / signal.osr
    k = np.arange(levels.size)
    ok = (k >= margin) & (k + offset >= 0) & (k + offset <= last)
    k = k[ok]
    return levels[k], signal.sample_at(k + offset)


def eye_heights(levels: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Worst-case vertical opening of each of the three PAM-4 eyes."""
    h = []
    for j in range(3):
        lo, hi = values[levels == j], values[levels == j + 1]
        if lo.size == 0 or hi.size == 0:
            raise ValueError("insufficient level coverage")
        h.append(hi.min() - lo.max())
    return np.array(h)


def opening_sweep(signal: Waveform, levels: np.ndarray, n_phases: int = 41, max_latency: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Vertical eye opening (min over the three eyes) on a grid of sampling offsets.

    Symbol ``k`` is sampled at ``k + offset`` for offsets ``0 .. max_latency`` UI
    in steps of ``1 / n_phases``, so the open region is found whatever the
    channel latency.
    """
    offsets = np.arange(max_latency * n_phases) / n_phases
    openings = np.array([eye_heights(*level_samples(signal, levels, o)).min() for o in offsets])
    return offsets, openings


def eye_center(signal: Waveform, levels: np.ndarray, n_phases: int = 41, max_latency: int = 4) -> float:
    """Sampling offset (UI) at the middle of the longest open stretch of the sweep.

    Edges of the stretch are placed at the linearly interpolated zero
    crossings of the opening. If the eye is nowhere open, the offset of the
    largest (least negative) opening is returned.
    """
    offsets, op = opening_sweep(signal, levels, n_phases, max_latency)
    is_open = op > 0
    if not is_open.any():
        return float(offsets[int(np.argmax(op))])
    best_len, best_i, run_len = 0, 0, 0
    for i, o in enumerate(is_open):
        run_len = run_len + 1 if o else 0
        if run_len > best_len:
            best_len, best_i = run_len, i - run_len + 1
    i0, i1 = best_i, best_i + best_len - 1
    step = 1.0 / n_phases
    left = offsets[i0] if i0 == 0 else offsets[i0] - step * op[i0] / (op[i0] - op[i0 - 1])
    right = offsets[i1] if i1 == op.size - 1 else offsets[i1] + step * op[i1] / (op[i1] - op[i1 + 1])
    return float(0.5 * (left + right))


# --- optical levels ---------------------------------------------------------


def oma_er(levels: Sequence[float]) -> OmaEr:
    """Outer OMA (dBm) and extinction ratio (dB) from four optical level powers in mW."""
    p = np.asarray(levels, dtype=float)
    if p.size != 4:
        raise ValueError("expected four optical levels")
    if p[0] <= 0:
        raise ValueError("extinction undefined")
    if np.any(np.diff(p) < 0):
        raise ValueError("levels must be ordered P0 <= P1 <= P2 <= P3")
    span = p[3] - p[0]
    er = 10.0 * np.log10(p[3] / p[0])
    if span <= 0:
        return OmaEr(-np.inf, er, True)
    return OmaEr(10.0 * np.log10(span), er, False)


# --- BER ----------------------------------------------------------------------


def q_function(x):
    """Gaussian tail probability ``0.5 * erfc(x / sqrt(2))``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _tails(distance: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """``Q(distance / sigma)`` with the sigma = 0 limit (a step) handled."""
    with np.errstate(divide="ignore", invalid="ignore"):
        q = q_function(distance / sigma)
    step = np.where(distance > 0, 0.0, np.where(distance == 0, 0.5, 1.0))
    return np.where(sigma > 0, q, step)


def extrapolated_ber(levels: np.ndarray, values: np.ndarray, thresholds: SlicerThresholds, context: int = 1) -> BathtubPoint:
    """Gaussian-tail BER estimate; BER = SER / 2 (Gray: adjacent-level errors flip one bit).

    Samples are grouped by transmitted level and, for ``context = 1``, also
    by the levels of the neighbouring symbols, so deterministic ISI shifts
    the class mean instead of inflating sigma. ``context = 0`` fits one
    Gaussian per level. Each class contributes ``Q(d / sigma)`` toward
    both adjacent thresholds, weighted by its frequency.
    """
    levels = np.asarray(levels)
    values = np.asarray(values, dtype=float)
    for j in range(4):
        if np.count_nonzero(levels == j) < MIN_LEVEL_SAMPLES:
            raise InsufficientStatistics("insufficient statistics")
    if context == 0:
        keys = levels
    elif context == 1:
        prev = np.concatenate(([levels[0]], levels[:-1]))
        nxt = np.concatenate((levels[1:], [levels[-1]]))
        keys = 16 * prev + 4 * levels + nxt
    else:
        raise ValueError("context must be 0 or 1")
    classes, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if counts.min() < MIN_LEVEL_SAMPLES:
        raise InsufficientStatistics("insufficient statistics")
    mu = np.bincount(inv, values) / counts
    resid = values - mu[inv]
    sigma = np.sqrt(np.bincount(inv, resid**2) / (counts - 1))
    lev = classes % 16 // 4 if context == 1 else classes
    t = np.concatenate(([-np.inf], thresholds.as_array(), [np.inf]))
    p_err = _tails(t[lev + 1] - mu, sigma) + _tails(mu - t[lev], sigma)
    ser = float(np.sum(p_err * counts) / values.size)
    means = tuple(float(values[levels == j].mean()) for j in range(4))
    sigmas = tuple(float(np.sqrt(np.mean(resid[levels == j] ** 2))) for j in range(4))
    return BathtubPoint(0.0, min(ser / 2.0, 0.5), "extrapolated", means, sigmas)


def counted_ber(levels: np.ndarray, values: np.ndarray, thresholds: SlicerThresholds) -> float:
    rx = decide(values, thresholds)
    return float(np.count_nonzero(gray_unmap(rx) != gray_unmap(levels)) / (2 * levels.size))


def bathtub(link_run: Callable[[float], PhaseCapture], phases: Sequence[float], mode: str = "extrapolated",
            oma_dbm: float | None = None, context: int = 1) -> BathtubCurve:
    """BER against sampling-phase offset.

    ``link_run(phase)`` returns the capture for a fixed external clock at
    that offset from the eye center. Phases are evaluated independently and
    merged in the given order.
    """
    if mode not in ("counted", "extrapolated"):
        raise ValueError(f"unknown bathtub mode {mode!r}")
    points = []
    for ph in phases:
        if not -0.5 <= ph <= 0.5:
            raise ValueError("bathtub phases must lie within ±0.5 UI")
        cap = link_run(float(ph))
        if mode == "counted":
            points.append(BathtubPoint(float(ph), min(counted_ber(cap.levels, cap.values, cap.thresholds), 0.5), "counted"))
        else:
            pt = extrapolated_ber(cap.levels, cap.values, cap.thresholds, context)
            points.append(BathtubPoint(float(ph), pt.ber, pt.method, pt.means, pt.sigmas))
    return BathtubCurve(points, oma_dbm)


def ui_opening(curve: BathtubCurve, target_ber: float) -> Opening:
    """Width of the contiguous phase interval around the minimum with BER <= target.

    Crossings are interpolated linearly in log10(BER). A curve that never
    reaches the target reports zero width with ``reached=False``.
    """
    order = np.argsort(curve.phases)
    ph = curve.phases[order]
    lb = np.log10(np.maximum(curve.bers[order], BER_FLOOR))
    lt = np.log10(target_ber)
    i_min = int(np.argmin(lb))
    if lb[i_min] > lt:
        return Opening(0.0, float(ph[i_min]), float(ph[i_min]), False)

    def edge(step: int) -> float:
        i = i_min
        while 0 <= i + step < len(ph) and lb[i + step] <= lt:
            i += step
        j = i + step
        if not 0 <= j < len(ph):
            return float(ph[i])
        frac = (lt - lb[i]) / (lb[j] - lb[i])
        return float(ph[i] + frac * (ph[j] - ph[i]))

    left, right = edge(-1), edge(+1)
    return Opening(right - left, left, right, True)


# --- budgets ----------------------------------------------------------------


def energy_efficiency(power_mw: float, rate_gbps: float) -> float:
    """pJ/bit; mW per Gb/s is numerically pJ per bit."""
    if rate_gbps <= 0:
        raise ValueError("rate must be > 0")
    return power_mw / rate_gbps


def energy_entry(label: str, power_mw: float, rate_gbps: float) -> EnergyEntry:
    return EnergyEntry(label, power_mw, rate_gbps, energy_efficiency(power_mw, rate_gbps))


# per-cable passive load of one coaxial line, mW at (4 K, 50 K)
COAX_LOAD_MW = (0.35, 7.0)


def heat_load_compare(medium: str, lanes: int, fiber_load_mw: tuple[float, float] = (0.0, 0.0)) -> HeatLoadEntry:
    if lanes < 1:
        raise ValueError("lanes must be >= 1")
    if medium == "coax":
        per = COAX_LOAD_MW
    elif medium == "fiber":
        per = fiber_load_mw
    else:
        raise ValueError(f"unknown medium {medium!r}")
    return HeatLoadEntry(medium, lanes, per[0] * lanes, per[1] * lanes)


# --- calibration ------------------------------------------------------------


def calibrate_noise(target_opening: float, target_ber: float, curve_for_density: Callable[[float], BathtubCurve],
                    bracket: tuple[float, float] = (0.1, 1000.0), tol_ui: float = 0.002,
                    max_iter: int = 60) -> tuple[float, BathtubCurve]:
    """Bisect (in log density) for the noise density giving ``target_opening``.

    ``curve_for_density`` must be deterministic and its opening must shrink
    as density grows.
    """
    lo, hi = bracket
    op_lo = ui_opening(curve_for_density(lo), target_ber).width
    op_hi = ui_opening(curve_for_density(hi), target_ber).width
    if not op_hi - tol_ui <= target_opening <= op_lo + tol_ui:
        raise CalibrationError("target unreachable with current link settings")
    if abs(op_lo - target_opening) <= tol_ui:
        # target only met in the low-noise limit
        return lo, curve_for_density(lo)
    best = None
    for _ in range(max_iter):
        mid = float(np.sqrt(lo * hi))
        curve = curve_for_density(mid)
        op = ui_opening(curve, target_ber).width
        best = (mid, curve)
        if abs(op - target_opening) <= tol_ui:
            break
        if op > target_opening:
            lo = mid
        else:
            hi = mid
    return best
