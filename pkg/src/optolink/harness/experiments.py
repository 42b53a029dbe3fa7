"""Experiment runners: bathtub, eye, OMA sweep, end-to-end run, budget,
noise calibration and the qubit-envelope transport demo."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from ..metrics import (
    BathtubCurve,
    EyeRaster,
    bathtub,
    calibrate_noise,
    energy_entry,
    eye_center,
    eye_heights,
    eye_raster,
    heat_load_compare,
    level_samples,
    oma_er,
    opening_sweep,
    ui_opening,
)
from ..pattern import SymbolStream, gray_map, gray_unmap
from ..tx_chain import FfeTaps
from . import svg
from .config import LinkConfig
from .pipeline import STAGES, FixedPhaseLink, front_end, prbs_symbols, run_link_e2e, set_oma, transport

DEFAULT_PHASES = tuple(float(p) for p in np.linspace(-0.5, 0.5, 41))

# driver pole used for the FFE comparison, as a fraction of the baud rate
BAND_LIMITED_DRIVER = 0.3

CALIBRATION_TARGET = (-1.0, 0.18, 1e-8)  # OMA dBm, UI opening, BER


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row has {len(r)} fields, table declares {len(self.columns)}")

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass(frozen=True)
class ExperimentResult:
    kind: str
    tables: dict[str, Table] = field(default_factory=dict)
    rasters: dict[str, EyeRaster] = field(default_factory=dict)
    figures: dict[str, str] = field(default_factory=dict)
    summary: dict[str, object] = field(default_factory=dict)

    KINDS = ("bathtub", "eye", "oma_sweep", "e2e_ber", "rabi_demo", "budget", "calibrate")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        for name, r in self.rasters.items():
            if r.counts.shape != (r.amplitude_bins, r.phase_bins):
                raise ValueError(f"raster {name!r} does not match its declared bins")


# --- bathtub ----------------------------------------------------------------


def bathtub_link(cfg: LinkConfig, oma_dbm: float, n_symbols: int, center: float | None = None) -> FixedPhaseLink:
    return FixedPhaseLink(set_oma(cfg, oma_dbm), n_symbols, center)


def bathtub_curve(cfg: LinkConfig, oma_dbm: float, n_symbols: int = 100_000, phases: Sequence[float] = DEFAULT_PHASES,
                  mode: str = "extrapolated", center: float | None = None) -> BathtubCurve:
    """External-clock bathtub at ``oma_dbm``; phases are offsets from the noiseless eye center."""
    link = bathtub_link(cfg, oma_dbm, n_symbols, center)
    return bathtub(link, phases, mode, oma_dbm)


def experiment_bathtub(cfg: LinkConfig, oma_list: Sequence[float], target_ber: float = 1e-8,
                       n_symbols: int = 100_000, phases: Sequence[float] = DEFAULT_PHASES,
                       mode: str = "extrapolated") -> ExperimentResult:
    curves = [bathtub_curve(cfg, oma, n_symbols, phases, mode) for oma in oma_list]
    points = Table(("oma_dbm", "phase_ui", "ber", "method"),
                   [(float(c.oma_dbm), p.phase, p.ber, p.method) for c in curves for p in c.points])
    openings = []
    for c in curves:
        o = ui_opening(c, target_ber)
        openings.append((float(c.oma_dbm), target_ber, o.width, o.left, o.right, o.reached))
    opening = Table(("oma_dbm", "target_ber", "opening_ui", "left_ui", "right_ui", "reached"), openings)
    fig = svg.line_plot(
        [(f"{c.oma_dbm:g} dBm", c.phases, c.bers) for c in curves],
        title=f"BER bathtub ({mode})", xlabel="phase offset (UI)", ylabel="BER", logy=True,
        hline=target_ber,
    )
    summary = {f"opening_ui@{o[0]:g}dBm": o[2] for o in openings}
    return ExperimentResult("bathtub", {"bathtub": points, "opening": opening}, figures={"bathtub": fig}, summary=summary)


# --- eye --------------------------------------------------------------------


def eye_levels(wave, symbols: SymbolStream) -> tuple[float, np.ndarray, np.ndarray]:
    """Offset of the widest vertical opening, the level means there and the three eye heights."""
    offsets, op = opening_sweep(wave, symbols.symbols)
    best = float(offsets[int(np.argmax(op))])
    lv, vals = level_samples(wave, symbols.symbols, best)
    means = np.array([vals[lv == j].mean() for j in range(4)])
    return best, means, eye_heights(lv, vals)


def experiment_eye(cfg: LinkConfig, stage: str = "tx_optical", n_symbols: int = 4000,
                   phase_bins: int = 64, amplitude_bins: int = 64) -> ExperimentResult:
    if stage not in STAGES[1:]:
        raise ValueError(f"eye needs an analog stage, got {stage!r}")
    symbols = prbs_symbols(cfg, n_symbols)
    wave = front_end(cfg, symbols)[stage]
    best, means, heights = eye_levels(wave, symbols)
    raster = eye_raster(wave, cfg.baud, phase_ref=best - 1.0, phase_bins=phase_bins, amplitude_bins=amplitude_bins)
    summary: dict[str, object] = {
        "stage": stage,
        "sample_offset_ui": best,
        "eye_height_low": float(heights[0]),
        "eye_height_mid": float(heights[1]),
        "eye_height_high": float(heights[2]),
        "eye_height_min": float(heights.min()),
    }
    if stage in ("tx_optical", "rx_optical"):
        r = oma_er(means)
        summary["outer_er_db"] = float(r.er_db)
        summary["outer_oma_dbm"] = float(r.oma_dbm)
    levels = Table(("level", "mean", "unit"), [(j, float(m), wave.unit) for j, m in enumerate(means)])
    fig = svg.heatmap(raster.counts, title=f"eye at {stage}", x_range=(0.0, 2.0),
                      y_range=raster.amplitude_range, xlabel="time (UI)", ylabel=wave.unit)
    return ExperimentResult("eye", {"levels": levels}, {stage: raster}, {f"eye_{stage}": fig}, summary)


def ffe_comparison(cfg: LinkConfig, taps: Sequence[FfeTaps] = (FfeTaps(), FfeTaps(-0.1, 0.8, -0.1)),
                   stage: str = "tx_optical", n_symbols: int = 4000,
                   driver_bandwidth: float | None = None) -> Table:
    """Eye heights per tap set with the driver pole pulled down to ``driver_bandwidth``."""
    bw = BAND_LIMITED_DRIVER * cfg.baud if driver_bandwidth is None else driver_bandwidth
    base = replace(cfg.with_noise(False), driver=replace(cfg.driver, bandwidth=bw))
    symbols = prbs_symbols(base, n_symbols)
    rows = []
    for t in taps:
        wave = front_end(replace(base, ffe=t), symbols)[stage]
        _, _, h = eye_levels(wave, symbols)
        q = t.quantized()
        rows.append((q.pre, q.main, q.post, bw, float(h[0]), float(h[1]), float(h[2]), float(h.min())))
    return Table(("pre", "main", "post", "driver_bandwidth_hz", "eye_low", "eye_mid", "eye_high", "eye_min"), rows)


# --- link runs --------------------------------------------------------------


def experiment_e2e(cfg: LinkConfig, n_symbols: int = 100_000) -> ExperimentResult:
    run = run_link_e2e(cfg, n_symbols)
    r = run.report
    report = Table(("bits_compared", "bit_errors", "ber", "symbol_errors", "offset", "lock_index"),
                   [(r.bits_compared, r.bit_errors, r.ber, r.symbol_errors, r.offset, run.clock.lock_index)])
    trace = Table(("symbol", "phase_ui", "vctrl_v", "vote"), run.clock.trace.rows())
    summary = {"ber": r.ber, "lock_index": run.clock.lock_index, "locked_phase_ui": run.clock.locked_phase,
               "confidence": r.confidence_note}
    return ExperimentResult("e2e_ber", {"report": report, "cdr_trace": trace}, summary=summary)


def experiment_oma_sweep(cfg: LinkConfig, oma_list: Sequence[float], n_symbols: int = 100_000) -> ExperimentResult:
    """Closed-loop counted BER per OMA; acquisition failures are recorded, not raised."""
    rows = []
    for oma in oma_list:
        run = run_link_e2e(set_oma(cfg, oma), n_symbols, on_unlock="report")
        r = run.report
        rows.append((float(oma), r.bits_compared, r.bit_errors, r.ber, run.locked))
    table = Table(("oma_dbm", "bits_compared", "bit_errors", "ber", "locked"), rows)
    bers = np.array([max(r[3], 0.5 / max(r[1], 1)) for r in rows])
    fig = svg.line_plot([("counted", np.array(oma_list, dtype=float), bers)], title="BER against OMA",
                        xlabel="OMA (dBm)", ylabel="BER", logy=True)
    return ExperimentResult("oma_sweep", {"oma_sweep": table}, figures={"oma_sweep": fig},
                            summary={"points": len(rows)})


# --- budget -----------------------------------------------------------------

# (label, power mW, rate Gb/s) rows of the link summary table
BUDGET_ROWS = (
    ("this_work/tx_front_end", 30.0, 56.0),
    ("this_work/tx_data_clock", 21.6, 56.0),
    ("this_work/rx_front_end", 15.2, 56.0),
    ("this_work/rx_data_clock", 23.1, 56.0),
    ("this_work/tx_total", 51.6, 56.0),
    ("this_work/rx_total", 38.3, 56.0),
    ("this_work/link_total", 89.9, 56.0),
    ("wireline/tx_front_end", 28.7, 40.0),
    ("wireline/tx_data_clock", 69.9, 40.0),
    ("thz/tx_front_end", 0.86, 4.0),
    ("thz/rx_front_end", 0.15, 4.4),
)


def experiment_budget(cfg: LinkConfig, lanes: Sequence[int] = (1, 8)) -> ExperimentResult:
    energy = [energy_entry(label, p, r) for label, p, r in BUDGET_ROWS]
    e_table = Table(("label", "power_mw", "rate_gbps", "pj_per_bit", "pj_per_bit_2dp"),
                    [(e.label, e.power_mw, e.rate_gbps, e.pj_per_bit, f"{e.pj_per_bit:.2f}") for e in energy])
    heat = [heat_load_compare(m, n) for m in ("coax", "fiber") for n in lanes]
    h_table = Table(("medium", "lanes", "load_4k_mw", "load_50k_mw"),
                    [(h.medium, h.lanes, h.load_4k_mw, h.load_50k_mw) for h in heat])
    summary = {"tx_pj_per_bit": energy[4].pj_per_bit, "rx_pj_per_bit": energy[5].pj_per_bit,
               "link_rate_gbps": cfg.rate_gbps}
    return ExperimentResult("budget", {"energy": e_table, "heat_load": h_table}, summary=summary)


# --- calibration ------------------------------------------------------------


def calibrate_link_noise(cfg: LinkConfig, target: tuple[float, float, float] = CALIBRATION_TARGET,
                         n_symbols: int = 100_000, phases: Sequence[float] = DEFAULT_PHASES,
                         bracket: tuple[float, float] = (0.1, 1000.0)) -> tuple[float, BathtubCurve]:
    """Front-end noise density (pA/sqrt(Hz)) giving ``target`` = (OMA dBm, opening, BER).

    Every other link parameter is held fixed; the eye center is taken once
    from the noiseless link.
    """
    oma, opening, ber = target
    center = bathtub_link(cfg, oma, n_symbols).center

    def curve(density: float) -> BathtubCurve:
        c = cfg.with_values(**{"tia.input_noise_density": density})
        return bathtub_curve(c, oma, n_symbols, phases, "extrapolated", center)

    return calibrate_noise(opening, ber, curve, bracket)


def experiment_calibrate(cfg: LinkConfig, target: tuple[float, float, float] = CALIBRATION_TARGET,
                         n_symbols: int = 100_000) -> ExperimentResult:
    density, curve = calibrate_link_noise(cfg, target, n_symbols)
    o = ui_opening(curve, target[2])
    table = Table(("phase_ui", "ber", "method"), [(p.phase, p.ber, p.method) for p in curve.points])
    summary = {"input_noise_density_pa_rthz": density, "opening_ui": o.width,
               "target_oma_dbm": target[0], "target_opening_ui": target[1], "target_ber": target[2]}
    return ExperimentResult("calibrate", {"bathtub": table}, summary=summary)


# --- qubit envelope demo ----------------------------------------------------

CODE_FULL_SCALE = 255
# four zero symbols carry eight zero bits, longer than any PRBS7 zero run,
# so the word cannot occur inside the preamble or straddle its end
SYNC_WORD = (0, 0, 0, 0, 3, 3, 3, 3)
LENGTH_SYMBOLS = 8  # 16-bit payload byte count
SYMBOLS_PER_BYTE = 4
TAIL_SYMBOLS = 64


@dataclass(frozen=True)
class EnvelopeFrame:
    """8-bit Gaussian envelope, ``length`` samples wide, ``sigma`` samples rms."""

    samples: np.ndarray
    amplitude: float
    sigma: float
    length: int

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (self.length,):
            raise ValueError("sample count does not match length")
        if s.size and (s.min() < 0 or s.max() > CODE_FULL_SCALE):
            raise ValueError("codes must be in [0, 255]")
        if not np.array_equal(s, s[::-1]):
            raise ValueError("envelope must be symmetric about its center")

    @classmethod
    def gaussian(cls, amplitude: float, sigma: float, length: int = 64) -> EnvelopeFrame:
        if not 0.0 <= amplitude <= 1.0:
            raise ValueError("amplitude must be in [0, 1]")
        return cls(np.round(CODE_FULL_SCALE * ideal_envelope(amplitude, sigma, length)).astype(np.int64),
                   amplitude, sigma, length)


def ideal_envelope(amplitude: float, sigma: float, length: int) -> np.ndarray:
    k = np.arange(length) - (length - 1) / 2.0
    return amplitude * np.exp(-0.5 * (k / sigma) ** 2)


def bytes_to_symbols(data: np.ndarray) -> np.ndarray:
    """Each byte as four Gray-mapped symbols, most significant bit pair first."""
    return gray_map(np.unpackbits(np.asarray(data, dtype=np.uint8)))


def symbols_to_bytes(symbols: np.ndarray) -> np.ndarray:
    return np.packbits(gray_unmap(symbols).astype(np.uint8)).astype(np.int64)


def build_frame(cfg: LinkConfig, frame: EnvelopeFrame) -> np.ndarray:
    """PRBS preamble for CDR lock, sync word, length, payload, PRBS tail."""
    preamble = cfg.cdr.acquisition_budget + 256
    pad = prbs_symbols(cfg, preamble + TAIL_SYMBOLS).symbols
    n = frame.length
    header = bytes_to_symbols(np.array([n >> 8, n & 0xFF]))
    return np.concatenate([pad[:preamble], SYNC_WORD, header, bytes_to_symbols(frame.samples), pad[preamble:]])


def parse_frame(received: np.ndarray) -> np.ndarray | None:
    """Payload codes after the first sync word, or None if the frame cannot be recovered."""
    rx = np.asarray(received)
    w = len(SYNC_WORD)
    if rx.size < w:
        return None
    windows = np.lib.stride_tricks.sliding_window_view(rx, w)
    hits = np.flatnonzero((windows == np.array(SYNC_WORD)).all(axis=1))
    if hits.size == 0:
        return None
    start = int(hits[0]) + w
    header = rx[start : start + LENGTH_SYMBOLS]
    if header.size < LENGTH_SYMBOLS:
        return None
    hi, lo = symbols_to_bytes(header)
    n = int(hi) << 8 | int(lo)
    body = rx[start + LENGTH_SYMBOLS : start + LENGTH_SYMBOLS + SYMBOLS_PER_BYTE * n]
    if body.size < SYMBOLS_PER_BYTE * n:
        return None
    return symbols_to_bytes(body)


def rabi_population(theta):
    return np.sin(np.asarray(theta, dtype=float) / 2.0) ** 2


def demo_quantum_control(cfg: LinkConfig, amplitudes: Sequence[float] = tuple(np.linspace(0.0, 1.0, 17)),
                         sigma: float = 8.0, induced_ber: float | None = None, length: int = 64) -> ExperimentResult:
    """Send Gaussian-envelope frames through the closed-loop link and drive an ideal Rabi response.

    The pulse area of each recovered envelope sets the rotation angle;
    the angle scale is fixed so the largest ideal pulse in the sweep gives
    a full 2 pi rotation. ``induced_ber`` flips that fraction of received
    symbols before frame parsing.
    """
    amps = [float(a) for a in amplitudes]
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(4)[3])
    max_area = max(ideal_envelope(a, sigma, length).sum() for a in amps)
    kappa = 2.0 * np.pi / max_area if max_area > 0 else 0.0
    rows = []
    for a in amps:
        frame = EnvelopeFrame.gaussian(a, sigma, length)
        received, *_ = transport(cfg, build_frame(cfg, frame))
        rx = received.symbols.copy()
        if induced_ber:
            hit = rng.random(rx.size) < induced_ber
            rx[hit] = (rx[hit] + rng.integers(1, 4, hit.sum())) % 4
        codes = parse_frame(rx)
        ideal = ideal_envelope(a, sigma, length)
        if codes is None or codes.size != length:
            rows.append((a, float("nan"), float("nan"), float(rabi_population(kappa * ideal.sum())), "frame lost"))
            continue
        env = codes / CODE_FULL_SCALE
        nrmse = float(np.sqrt(np.mean((env - ideal) ** 2)))
        rows.append((a, nrmse, float(rabi_population(kappa * env.sum())), float(rabi_population(kappa * ideal.sum())), "ok"))
    table = Table(("amplitude", "nrmse", "p_excited", "p_ideal", "status"), rows)
    good = [(r[0], r[2]) for r in rows if r[4] == "ok"]
    summary: dict[str, object] = {"frames": len(rows), "frames_ok": len(good),
                                  "max_nrmse": max((r[1] for r in rows if r[4] == "ok"), default=float("nan"))}
    if len(good) >= 4:
        x, y = np.array(good).T
        summary.update(zip(("fit_omega", "fit_contrast", "fit_r2"), fit_rabi(x, y, kappa * max_area / max(amps))))
    fig = svg.line_plot([("recovered", np.array([r[0] for r in rows]), np.array([r[2] for r in rows])),
                         ("ideal", np.array([r[0] for r in rows]), np.array([r[3] for r in rows]))],
                        title="Rabi response", xlabel="envelope amplitude", ylabel="P(excited)")
    return ExperimentResult("rabi_demo", {"rabi": table}, figures={"rabi": fig}, summary=summary)


def fit_rabi(amplitude: np.ndarray, p: np.ndarray, omega0: float) -> tuple[float, float, float]:
    """Least-squares fit of ``c * sin^2(omega * A / 2)``; returns (omega, c, R^2)."""

    def model(a, omega, c):
        return c * np.sin(omega * a / 2.0) ** 2

    (omega, c), _ = curve_fit(model, amplitude, p, p0=(omega0, 1.0))
    resid = p - model(amplitude, omega, c)
    ss_tot = float(np.sum((p - p.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else float("nan")
    return float(omega), float(c), r2
