from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chi2

from optolink.harness import experiments as ex
from optolink.harness.cli import main
from optolink.harness.config import (
    PROVENANCE,
    ConfigError,
    LinkConfig,
    config_report,
    dump_config,
    flatten,
    load_config,
    parse_config,
)
from optolink.harness.emit import emit_outputs, raster_csv, table_csv, write_atomic
from optolink.harness.pipeline import (
    STAGES,
    FixedPhaseLink,
    front_end,
    oma_dbm,
    prbs_symbols,
    run_link_e2e,
    set_oma,
    transport,
)
from optolink.metrics import counted_ber, extrapolated_ber, eye_raster
from optolink.pattern import PRBS7_PERIOD, ber_check

QUIET = LinkConfig().with_noise(False)


# --- config -----------------------------------------------------------------


def test_empty_config_is_defaults(tmp_path):
    f = tmp_path / "empty.cfg"
    f.write_text("# nothing here\n\n")
    assert load_config(f) == LinkConfig()
    assert load_config(None) == LinkConfig()


def test_config_value_and_comment():
    cfg = parse_config("pd.responsivity = 0.3  # tuned\nnoise.shot = false\nlink.seed = 0x10\n")
    assert cfg.pd.responsivity == 0.3
    assert cfg.noise.shot is False
    assert cfg.seed == 16


@pytest.mark.parametrize(
    "text,match",
    [
        ("pd.responsivity = -0.1", r"responsivity out of \(0,1.2\]"),
        ("pd.nonsense = 1", "unknown config key"),
        ("tia.bandwidth = 1e10\ntia.bandwidth = 2e10", "duplicate config key"),
        ("noise.shot = maybe", "cannot parse"),
        ("just words", "expected 'key = value'"),
        ("vco.code = 3", "unknown config key"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_config_round_trip():
    cfg = LinkConfig().with_values(**{"tia.input_noise_density": 12.5, "cdr.freq_offset_ppm": -200.0, "noise.tia": False})
    assert parse_config(dump_config(cfg)) == cfg


def test_provenance_covers_every_key():
    keys = set(flatten(LinkConfig()))
    assert keys == set(PROVENANCE)
    assert {tag for tag, _ in PROVENANCE.values()} <= {"published", "calibrated", "invented"}
    report = config_report(LinkConfig())
    assert report.count("\n") == len(keys) + 1
    assert "tia.input_noise_density | 32.634 | 32.634 | calibrated" in report


def test_with_values_rejects_unknown():
    with pytest.raises(ConfigError):
        LinkConfig().with_values(**{"tia.nope": 1})


def test_config_invariants_become_config_errors():
    with pytest.raises(ConfigError, match="swing overflow"):
        parse_config("ffe.pre = -0.4\nffe.main = 0.5\nffe.post = -0.2")


# --- pipeline ---------------------------------------------------------------


def test_stage_composition():
    sym = prbs_symbols(LinkConfig(), 600)
    full = front_end(LinkConfig(), sym)
    assert list(full) == list(STAGES)
    for i, stage in enumerate(STAGES[:-1]):
        rest = front_end(LinkConfig(), sym, start_after=stage, start_value=full[stage])
        assert list(rest) == list(STAGES[i + 1 :])
        assert np.array_equal(rest["rx_electrical"].samples, full["rx_electrical"].samples)


def test_stage_units():
    units = {k: getattr(v, "unit", None) for k, v in front_end(QUIET, prbs_symbols(QUIET, 300)).items()}
    assert units == {"ffe": None, "drive": "V", "tx_optical": "mW", "rx_optical": "mW",
                     "photocurrent": "mA", "rx_electrical": "V"}


def test_set_oma_hits_request():
    for target in (-9.0, -1.0, 1.0):
        assert oma_dbm(set_oma(LinkConfig(), target)) == pytest.approx(target, abs=1e-9)
    with pytest.raises(ValueError):
        set_oma(LinkConfig(), 30.0)


def test_e2e_deterministic_and_tapped():
    a = run_link_e2e(LinkConfig(), 6000, tap_points=("tx_optical",))
    b = run_link_e2e(LinkConfig(), 6000)
    assert a.report == b.report
    assert np.array_equal(a.received.symbols, b.received.symbols)
    assert set(a.taps) == {"tx_optical"}
    with pytest.raises(ValueError):
        run_link_e2e(LinkConfig(), 6000, tap_points=("bogus",))


def test_low_oma_is_a_bad_ber_not_a_crash():
    run = run_link_e2e(set_oma(LinkConfig(), -15.0), 20_000, on_unlock="report")
    assert run.report.ber > 1e-2


def test_closed_loop_count_agrees_with_extrapolation():
    """2e6 symbols at the calibrated -1 dBm point.

    The expected count is below one error, so agreement means the x3 band
    around the extrapolated BER overlaps the exact 95% Poisson interval of
    the counted BER.
    """
    cfg = set_oma(LinkConfig(), -1.0)
    sym = prbs_symbols(cfg, 2_000_000)
    received, clock, thr, _, outs = transport(cfg, sym)
    rep = ber_check(sym.symbols[:PRBS7_PERIOD], received, "auto")
    sent = sym.symbols[:PRBS7_PERIOD][(np.arange(received.symbols.size) + rep.offset) % PRBS7_PERIOD]
    ext = extrapolated_ber(sent, outs["rx_electrical"].sample_at(clock.locked_instants), thr).ber
    k, n = rep.bit_errors, rep.bits_compared
    lo = chi2.ppf(0.025, 2 * k) / 2 / n if k else 0.0
    hi = chi2.ppf(0.975, 2 * k + 2) / 2 / n
    assert 0 < ext < 1e-6
    assert ext / 3 <= hi and 3 * ext >= lo


def test_fixed_phase_link_noiseless_center_is_error_free():
    link = FixedPhaseLink(QUIET, 5000)
    cap = link.capture(0.0)
    assert np.array_equal(cap.levels, np.clip(cap.levels, 0, 3))
    assert counted_ber(cap.levels, cap.values, cap.thresholds) == 0.0


# --- experiments ------------------------------------------------------------


def test_table_validation():
    with pytest.raises(ValueError):
        ex.Table(("a", "b"), [(1,)])
    assert ex.Table(("a", "b"), [(1, 2), (3, 4)]).column("b") == [2, 4]


def test_result_kind_and_raster_guard():
    with pytest.raises(ValueError):
        ex.ExperimentResult("nonsense")
    r = eye_raster(front_end(QUIET, prbs_symbols(QUIET, 300))["drive"], QUIET.baud, phase_bins=16, amplitude_bins=8)
    bad = replace(r, phase_bins=17)
    with pytest.raises(ValueError):
        ex.ExperimentResult("eye", rasters={"x": bad})


def test_eye_experiment_tables_and_raster():
    res = ex.experiment_eye(LinkConfig(), "tx_optical", 2000, 48, 32)
    (raster,) = res.rasters.values()
    assert raster.counts.shape == (32, 48)
    lines = raster_csv(raster).splitlines()
    assert [ln.split(":")[0] for ln in lines[:3]] == ["# bins", "# ranges", "# units"]
    assert all(len(ln.split(",")) == 48 for ln in lines[3:])
    assert len(lines) == 3 + 32
    assert res.summary["eye_height_min"] > 0
    assert {"outer_er_db", "outer_oma_dbm"} <= set(res.summary)


def test_eye_rejects_symbol_stage():
    with pytest.raises(ValueError):
        ex.experiment_eye(LinkConfig(), "ffe")


def test_counted_bathtub_without_noise_is_clean_in_center():
    res = ex.experiment_bathtub(QUIET, [-1.0], 1e-8, 8000, (-0.1, 0.0, 0.1), "counted")
    assert res.tables["bathtub"].column("ber") == [0.0, 0.0, 0.0]
    assert res.tables["bathtub"].column("method") == ["counted"] * 3


def test_budget_experiment():
    res = ex.experiment_budget(LinkConfig())
    e = dict(zip(res.tables["energy"].column("label"), res.tables["energy"].column("pj_per_bit_2dp")))
    assert e["this_work/tx_total"] == "0.92" and e["this_work/rx_total"] == "0.68"
    assert e["this_work/link_total"] == "1.61"
    heat = res.tables["heat_load"].rows
    assert ("coax", 8, pytest.approx(2.8), pytest.approx(56.0)) in heat


def test_envelope_frame():
    f = ex.EnvelopeFrame.gaussian(1.0, 8.0)
    assert f.samples.max() == 255 and f.samples.size == 64
    assert np.array_equal(f.samples, f.samples[::-1])
    assert ex.EnvelopeFrame.gaussian(0.0, 8.0).samples.sum() == 0
    with pytest.raises(ValueError):
        ex.EnvelopeFrame(np.arange(64), 1.0, 8.0, 64)
    with pytest.raises(ValueError):
        ex.EnvelopeFrame.gaussian(1.2, 8.0)


def test_frame_round_trip_and_sync_uniqueness():
    cfg = LinkConfig()
    f = ex.EnvelopeFrame.gaussian(0.7, 8.0)
    frame = ex.build_frame(cfg, f)
    assert np.array_equal(ex.parse_frame(frame), f.samples)
    # the sync word cannot appear inside a PRBS7Q stream
    pad = prbs_symbols(cfg, 5000).symbols
    w = np.lib.stride_tricks.sliding_window_view(pad, len(ex.SYNC_WORD))
    assert not (w == np.array(ex.SYNC_WORD)).all(axis=1).any()
    assert ex.parse_frame(pad) is None


def test_byte_symbol_codec():
    data = np.arange(256)
    assert np.array_equal(ex.symbols_to_bytes(ex.bytes_to_symbols(data)), data)


def test_rabi_population_landmarks():
    assert ex.rabi_population(0.0) == 0.0
    assert ex.rabi_population(np.pi) == pytest.approx(1.0)
    assert ex.rabi_population(2 * np.pi) == pytest.approx(0.0, abs=1e-30)


def test_qdemo_small_sweep():
    res = ex.demo_quantum_control(LinkConfig(), (0.0, 0.5, 1.0))
    t = res.tables["rabi"]
    assert t.column("status") == ["ok"] * 3
    assert t.column("p_excited")[0] == 0.0
    assert max(t.column("nrmse")) <= 2**-8


def test_qdemo_flags_lost_frames():
    res = ex.demo_quantum_control(LinkConfig(), (0.3, 0.6, 0.9), induced_ber=0.05)
    t = res.tables["rabi"]
    assert "frame lost" in t.column("status")
    for status, nrmse in zip(t.column("status"), t.column("nrmse")):
        assert (status == "frame lost") == math.isnan(nrmse)


# --- emission and CLI -------------------------------------------------------


def test_write_atomic_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "a" / "x.csv"
    write_atomic(p, "one\n")
    write_atomic(p, "two\n")
    assert p.read_text() == "two\n"
    assert [q.name for q in p.parent.iterdir()] == ["x.csv"]


def test_table_csv_formatting():
    text = table_csv(ex.Table(("a", "b", "c"), [(1, 0.1, True), ("x,y", float("nan"), False)]))
    assert text == 'a,b,c\n1,0.1,true\n"x,y",nan,false\n'


def test_emit_outputs_and_rerun_bytes(tmp_path):
    res = ex.experiment_budget(LinkConfig())
    first = emit_outputs(res, tmp_path / "one", LinkConfig())
    names = sorted(p.name for p in first)
    assert names == ["budget_energy.csv", "budget_heat_load.csv", "budget_summary.csv", "config-report"]
    second = emit_outputs(ex.experiment_budget(LinkConfig()), tmp_path / "two", LinkConfig())
    for a, b in zip(sorted(first), sorted(second)):
        assert a.read_bytes() == b.read_bytes()


def test_cli_ok(tmp_path, capsys):
    assert main(["budget", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "budget_energy.csv").exists()
    assert "tx_pj_per_bit" in capsys.readouterr().out


def test_cli_config_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("pd.responsivity = 2\n")
    assert main(["budget", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_cli_invalid_arguments(tmp_path):
    assert main(["bathtub", "--symbols", "400", "--phases", "5", "--out", str(tmp_path)]) == 2


def test_cli_acquisition_failure(tmp_path):
    cfg = tmp_path / "dark.cfg"
    cfg.write_text("path.voa_atten = 30\ncdr.freq_offset_ppm = 1000\n")
    assert main(["run", "--config", str(cfg), "--symbols", "8000", "--out", str(tmp_path)]) == 3


def test_cli_insufficient_statistics(tmp_path):
    assert main(["bathtub", "--symbols", "1000", "--phases", "5", "--out", str(tmp_path)]) == 4


def test_cli_seed_override(tmp_path, capsys):
    assert main(["eye", "--stage", "rx_electrical", "--symbols", "1500", "--seed", "9", "--out", str(tmp_path)]) == 0
    assert "link.seed | 9 | 1 | invented" in (tmp_path / "config-report").read_text()
