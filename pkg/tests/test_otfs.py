import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from railsim6g.core.rng import stream
from railsim6g.otfs import (DdSpreadingFunction, Tap, TdlChannel, TfGrid, isfft, leakage_metrics,
                            sfft, tdl_to_tf, write_dd_csv)

GRID = TfGrid.critical(32, 16, 15e3)


def _single(k, l, **kw):
    return TdlChannel.on_grid(GRID, [(k, l, 1.0)], **kw)


def test_grid_invariants():
    with pytest.raises(ValueError):
        TfGrid.critical(24, 16, 15e3)
    with pytest.raises(ValueError):
        TfGrid(32, 16, 15e3, 1e-3)
    assert GRID.delay_resolution == pytest.approx(1 / (32 * 15e3))
    assert GRID.doppler_resolution == pytest.approx(15e3 / 16)


def test_flat_channel_is_all_ones():
    assert np.allclose(tdl_to_tf(_single(0, 0), GRID), 1.0, atol=0, rtol=0)


def test_delay_gives_linear_phase_across_subcarriers():
    H = tdl_to_tf(_single(3, 0), GRID)
    assert np.allclose(H, H[:, :1])                      # constant across symbols
    steps = np.angle(H[1:, 0] / H[:-1, 0])
    assert np.allclose(steps, -2 * math.pi * 3 / 32)


def test_two_taps_match_pointwise_sum():
    taps = (Tap(2.3e-6, 210.0, 0.8 - 0.1j), Tap(11e-6, -400.0, 0.3j))
    ch = TdlChannel(taps)
    H = tdl_to_tf(ch, GRID)
    rng = stream(0, "points")
    for m, n in zip(rng.integers(0, 32, 16), rng.integers(0, 16, 16)):
        direct = sum(t.gain * np.exp(2j * math.pi * (t.doppler * n * GRID.symbol_duration
                                                      - t.delay * m * GRID.subcarrier_spacing))
                     for t in taps)
        assert H[m, n] == pytest.approx(direct, abs=1e-12)


def test_tap_outside_guard_rejected():
    with pytest.raises(ValueError):
        tdl_to_tf(TdlChannel((Tap(1.0 / 15e3, 0.0),)), GRID)
    with pytest.raises(ValueError):
        tdl_to_tf(TdlChannel((Tap(0.0, 1e6),)), GRID)


def test_dc_maps_to_origin():
    dd = sfft(np.ones((32, 16)), GRID)
    e = dd.energy
    assert e[0, 0] == pytest.approx(e.sum(), rel=1e-12)
    assert e.sum() - e[0, 0] < 1e-20


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sfft_unitary(seed):
    rng = stream(seed, "H")
    H = rng.standard_normal((32, 16)) + 1j * rng.standard_normal((32, 16))
    dd = sfft(H, GRID)
    assert np.sum(dd.energy) == pytest.approx(np.sum(np.abs(H) ** 2), rel=1e-9)
    assert np.linalg.norm(isfft(dd) - H) <= 1e-9 * np.linalg.norm(H)


@pytest.mark.parametrize("k,l", [(0, 0), (5, 3), (17, -4), (31, 7)])
def test_on_grid_tap_is_impulse(k, l):
    dd = sfft(tdl_to_tf(_single(k, l), GRID), GRID)
    e = dd.energy
    peak = (k, l % 16)
    assert np.unravel_index(np.argmax(e), e.shape) == peak
    assert e.sum() - e[peak] < 1e-9 * e.sum()


def test_static_on_grid_taps_exactly_sparse():
    ch = TdlChannel.on_grid(GRID, [(1, 0, 1.0), (4, 2, 0.7j), (9, -3, 0.5)])
    m = leakage_metrics(sfft(tdl_to_tf(ch, GRID), GRID), ch)
    assert m.effective_path_count == 3
    assert m.compactness >= 1 - 1e-9
    assert max(m.peak_offset) < 1e-9


def test_half_bin_offset_leaks():
    ch = _single(4.5, 2)
    m = leakage_metrics(sfft(tdl_to_tf(ch, GRID), GRID), ch)
    assert m.effective_path_count > 1
    assert m.compactness < 0.9
    # Dirichlet kernel: the two neighbours each carry sin^2(pi/2)/(M^2 sin^2(pi/(2M))) of the energy
    M = 32
    side = 1 / (M * math.sin(math.pi / (2 * M))) ** 2
    assert m.compactness == pytest.approx(side, rel=1e-9)


def test_compactness_non_increasing_in_offset():
    values = []
    for off in np.arange(6) / 10:
        ch = _single(6 + off, 3 + off)
        values.append(leakage_metrics(sfft(tdl_to_tf(ch, GRID), GRID), ch).compactness)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_time_variation_reduces_compactness():
    bins = [(2, 1, 1.0), (7, -2, 0.6 + 0.2j)]
    static = TdlChannel.on_grid(GRID, bins)
    varying = TdlChannel.on_grid(GRID, bins, coherence_time=0.25 * GRID.frame_duration, fading_seed=3)
    c_static = leakage_metrics(sfft(tdl_to_tf(static, GRID), GRID), static).compactness
    c_vary = leakage_metrics(sfft(tdl_to_tf(varying, GRID), GRID), varying).compactness
    assert c_vary < c_static


def test_doubling_m_doubles_delay_bin():
    tau = 6 / (32 * 15e3)
    for M in (32, 64):
        grid = TfGrid.critical(M, 16, 15e3)
        dd = sfft(tdl_to_tf(TdlChannel((Tap(tau, 0.0),)), grid), grid)
        k, _ = np.unravel_index(np.argmax(dd.energy), dd.energy.shape)
        assert k == 6 * M // 32


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        sfft(np.ones((16, 16)), GRID)


def test_dd_csv_dump(tmp_path):
    dd = DdSpreadingFunction(np.zeros((4, 4), dtype=complex), TfGrid.critical(4, 4, 1.0))
    dd.values[1, 2] = 3 + 4j
    lines = write_dd_csv(dd, tmp_path / "dd.csv").read_text().splitlines()
    assert lines[0] == "delay_bin,doppler_bin,magnitude"
    assert len(lines) == 17
    assert "1,2,5.0" in lines
