from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from optolink.metrics import eye_center
from optolink.rx_chain import (
    SlicerThresholds,
    TiaConfig,
    adapt_thresholds,
    decide,
    deserialize_lanes,
    slice_pam4,
    thresholds_from_samples,
    tia_amplify,
)
from optolink.tx_chain import serialize_lanes
from optolink.waveform import Waveform, noise_bandwidth

BAUD = 28e9
NOISELESS_NO_DC = TiaConfig(dc_comp=False)


def current(samples, osr: int = 16, baud: float = BAUD) -> Waveform:
    return Waveform(np.asarray(samples, dtype=float), "mA", osr, baud)


def test_transimpedance_arithmetic():
    v = tia_amplify(current(np.full(64, 0.35)), NOISELESS_NO_DC, noise=False).samples
    assert v == pytest.approx(np.full(64, 0.735))


def test_dc_compensation_removes_constant():
    v = tia_amplify(current(np.full(4096, 0.35)), TiaConfig(), noise=False).samples
    assert np.max(np.abs(v)) < 1e-12


def test_dc_compensation_is_first_order_high_pass():
    fs = 8e7
    cfg = TiaConfig(bandwidth=1e7, dc_comp_cutoff=5e4)
    i = np.concatenate((np.zeros(4000), np.ones(40_000)))
    w = Waveform(i, "mA", 8, fs / 8)
    v = tia_amplify(w, cfg, noise=False).samples
    v0 = v.max()
    t = (np.arange(v.size) - v.argmax()) / fs
    # the 50 us lead-in is many DC-loop time constants, so the step starts from 0 V
    assert v0 == pytest.approx(cfg.transimpedance * 1e-3, rel=0.05)
    late = slice(v.argmax() + 1000, None)
    # after the front-end pole has settled, the tail decays at the DC-loop corner
    expect = v[v.argmax() + 1000] * np.exp(-2 * np.pi * 5e4 * (t[late] - t[v.argmax() + 1000]))
    assert np.allclose(v[late], expect, rtol=2e-3, atol=1e-6)


def test_input_noise_rms_matches_noise_bandwidth():
    cfg = TiaConfig(input_noise_density=30.0, dc_comp=False)
    v = tia_amplify(current(np.zeros(1_000_000)), cfg, rng_seed=11).samples
    expect = 30e-12 * np.sqrt(noise_bandwidth(cfg.bandwidth)) * cfg.transimpedance
    assert v.std() == pytest.approx(expect, rel=0.05)


def test_tia_seeded():
    x = current(np.zeros(2048))
    a = tia_amplify(x, TiaConfig(), rng_seed=1).samples
    assert np.array_equal(a, tia_amplify(x, TiaConfig(), rng_seed=1).samples)
    assert not np.array_equal(a, tia_amplify(x, TiaConfig(), rng_seed=2).samples)


@settings(max_examples=25)
@given(arrays(np.float64, st.integers(16, 200), elements=st.floats(0, 1)), st.floats(0.0, 3.0))
def test_tia_gain_linear_without_noise(i, alpha):
    cfg = TiaConfig()
    y1 = tia_amplify(current(alpha * i), cfg, noise=False).samples
    y2 = alpha * tia_amplify(current(i), cfg, noise=False).samples
    assert np.allclose(y1, y2, atol=1e-12)


def test_tia_invariants():
    with pytest.raises(ValueError):
        TiaConfig(transimpedance=0)
    with pytest.raises(ValueError):
        TiaConfig(dc_comp_cutoff=1e9)
    with pytest.raises(ValueError):
        tia_amplify(Waveform(np.zeros(4), "V", 16, BAUD), TiaConfig())


IDEAL = np.array([-0.6, -0.2, 0.2, 0.6])


def test_thresholds_ideal_levels():
    v = np.tile(IDEAL, 200)
    assert thresholds_from_samples(v).as_array() == pytest.approx([-0.4, 0.0, 0.4], abs=1e-12)


def test_thresholds_with_noise():
    rng = np.random.default_rng(5)
    v = IDEAL[rng.integers(0, 4, 4000)] + 0.01 * rng.standard_normal(4000)
    t = thresholds_from_samples(v).as_array()
    assert np.all(np.abs(t - [-0.4, 0.0, 0.4]) < 0.005)


def test_thresholds_need_four_levels():
    with pytest.raises(ValueError, match="insufficient level coverage"):
        thresholds_from_samples(np.tile([-0.6, 0.6], 400))
    with pytest.raises(ValueError):
        thresholds_from_samples(np.tile(IDEAL, 10))


def test_adapt_thresholds_on_waveform():
    osr = 16
    lv = np.random.default_rng(0).integers(0, 4, 1000)
    w = Waveform(np.repeat(IDEAL[lv], osr), "V", osr, BAUD)
    t = adapt_thresholds(w, BAUD, 0.5)
    assert t.as_array() == pytest.approx([-0.4, 0.0, 0.4], abs=1e-12)


def test_decide_examples_and_ties():
    t = SlicerThresholds(-0.4, 0.0, 0.4)
    assert decide([-0.65], t).tolist() == [0]
    assert decide([0.0], t).tolist() == [2]
    assert decide([-0.4, 0.4, 0.9], t).tolist() == [1, 3, 3]


def test_threshold_order_invariant():
    with pytest.raises(ValueError):
        SlicerThresholds(0.0, 0.0, 0.4)


@given(arrays(np.float64, st.integers(2, 100), elements=st.floats(-2, 2)))
def test_slicing_monotone(v):
    t = SlicerThresholds(-0.4, 0.0, 0.4)
    order = np.argsort(v, kind="stable")
    assert np.all(np.diff(decide(v[order], t)) >= 0)


def test_slice_out_of_range():
    w = Waveform(np.zeros(160), "V", 16, BAUD)
    t = SlicerThresholds(-0.4, 0.0, 0.4)
    with pytest.raises(ValueError, match="outside waveform span"):
        slice_pam4(w, t, np.array([10.5]))


def test_noiseless_link_slices_exactly(clean_link):
    c = eye_center(clean_link.rx, clean_link.symbols.symbols)
    k = np.arange(10, 19_000)
    t = thresholds_from_samples(clean_link.rx.sample_at(k + c))
    rx = slice_pam4(clean_link.rx, t, k + c).symbols
    assert np.array_equal(rx, clean_link.symbols.symbols[k])


def test_deserialize_examples():
    g = deserialize_lanes([0, 1, 2, 3, 0, 1, 2, 3])
    assert g.lanes.tolist() == [[0], [1], [2], [3], [0], [1], [2], [3]]
    assert deserialize_lanes(list(range(4)) * 2 + [3]).lane_length == 1


@given(arrays(np.int64, st.integers(8, 400), elements=st.integers(0, 3)))
def test_deserialize_serialize_identity(s):
    n = s.size // 8 * 8
    assert np.array_equal(serialize_lanes(deserialize_lanes(s)).symbols, s[:n])
