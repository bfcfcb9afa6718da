import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from squintbook.array import ArrayGeometry, CoverageGrid, Direction, SubcarrierGrid, steering_matrix
from squintbook.channel import synth_los_user, synth_nearfield_si
from squintbook.metrics import (
    LinkBudget,
    avg_inr_codebooks,
    coverage_variance,
    db,
    evaluate_pair,
    inr_rx,
    normalized_sum_se,
    select_beams,
    snr_rx,
    snr_tx,
    sum_se,
    undb,
)
from squintbook.quantize import box_project

FC = 60e9
BUDGET = LinkBudget(10, 10, 80)


def unit_modulus(rng, shape):
    return np.exp(2j * np.pi * rng.uniform(size=shape))


def test_db_round_trip():
    assert undb(db(123.0)) == pytest.approx(123.0)
    assert db(0.0) == -math.inf
    assert LinkBudget(10, 10, -math.inf).inr_bar_rx == 0.0
    with pytest.raises(ValueError):
        LinkBudget(math.nan, 10, 80)
    with pytest.raises(ValueError):
        LinkBudget(10, math.inf, 80)


def test_matched_beam_reaches_bound():
    geom = ArrayGeometry.planar(4, 4, FC)
    d = Direction(0.3, 0.1)
    user = synth_los_user(geom, d, SubcarrierGrid(FC, 0, 1))
    a = user.entries[0]
    assert snr_tx(BUDGET, user, a)[0] == pytest.approx(10.0, rel=1e-12)
    assert snr_rx(BUDGET, user, a)[0] == pytest.approx(10.0, rel=1e-12)
    assert snr_tx(BUDGET, user, np.zeros(16))[0] == 0.0


def test_orthogonal_beam_zero():
    h = np.array([[1.0, 1.0]])
    f = np.array([1.0, -1.0])
    assert snr_tx(BUDGET, h, f)[0] == 0
    assert snr_rx(BUDGET, h, f)[0] == 0


def test_snr_errors():
    with pytest.raises(ValueError):
        snr_tx(BUDGET, np.ones((1, 3)), np.ones(2))
    with pytest.raises(ValueError):
        snr_rx(BUDGET, np.ones((1, 2)), np.zeros(2))


def test_inr_cases():
    h = np.ones((1, 1, 1))
    assert inr_rx(BUDGET, h, np.ones(1), np.ones(1))[0] == pytest.approx(1e8)
    assert np.all(inr_rx(LinkBudget(10, 10, -math.inf), h, np.ones(1), np.ones(1)) == 0)
    # w in the null space of H f
    hh = np.array([[[1.0, 0.0], [0.0, 0.0]]])
    assert inr_rx(BUDGET, hh, np.array([1.0, 0]), np.array([0, 1.0]))[0] == 0


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), c_re=st.floats(-5, 5), c_im=st.floats(-5, 5))
def test_receive_scale_invariance(seed, c_re, c_im):
    c = complex(c_re, c_im)
    if abs(c) < 1e-3:
        c = 1.7
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    hr = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    f = box_project(rng.standard_normal(5) + 1j * rng.standard_normal(5))
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(snr_rx(BUDGET, hr, c * w), snr_rx(BUDGET, hr, w), rtol=1e-12, atol=0)
    assert np.allclose(inr_rx(BUDGET, h, f, c * w), inr_rx(BUDGET, h, f, w), rtol=1e-12, atol=0)


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000))
def test_bound_compliance(seed):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry.planar(3, 3, FC)
    sub = SubcarrierGrid(FC, 4e9, 6)
    d = Direction(rng.uniform(-1.5, 1.5), rng.uniform(-0.7, 0.7))
    user = synth_los_user(geom, d, sub)
    f = box_project(rng.standard_normal(9) + 1j * rng.standard_normal(9))
    w = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    assert np.mean(snr_tx(BUDGET, user, f)) <= 10 * (1 + 1e-9)
    assert np.mean(snr_rx(BUDGET, user, w)) <= 10 * (1 + 1e-9)
    h = synth_nearfield_si(geom, geom, 10, sub, 10, seed=seed)
    assert np.mean(inr_rx(BUDGET, h, f, unit_modulus(rng, 9))) <= 1e8 * (1 + 1e-9)


def test_avg_inr_codebooks():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((4, 3, 5)) + 1j * rng.standard_normal((4, 3, 5))
    f = box_project(rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
    w = unit_modulus(rng, (3, 4))
    exact, approx = avg_inr_codebooks(BUDGET, h, f, w)
    direct = np.mean([inr_rx(BUDGET, h, f[:, i], w[:, j]) for i in range(2) for j in range(4)])
    assert exact == pytest.approx(direct, rel=1e-12)
    assert approx == pytest.approx(exact, rel=1e-9)
    assert avg_inr_codebooks(BUDGET, h, np.zeros((5, 2)), w) == (0.0, 0.0)
    single = avg_inr_codebooks(BUDGET, h, f[:, :1], w[:, :1])[0]
    assert single == pytest.approx(np.mean(inr_rx(BUDGET, h, f[:, 0], w[:, 0])))
    w[:, 1] = 0
    with pytest.raises(ValueError):
        avg_inr_codebooks(BUDGET, h, f, w)


def test_sum_se_closed_forms():
    r, mean = sum_se([10.0], [10.0], [0.0])
    assert r[0] == pytest.approx(2 * math.log2(11))
    assert r[0] == pytest.approx(6.919, abs=1e-3)
    assert sum_se([0.0], [0.0], [0.0])[0][0] == 0
    r, _ = sum_se([10.0], [10.0], [math.inf])
    assert r[0] == pytest.approx(math.log2(11))
    with pytest.raises(ValueError):
        sum_se([-1.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        sum_se([1.0, 2.0], [1.0], [0.0])


@given(inr=st.lists(st.floats(0, 1e9), min_size=2, max_size=2))
def test_rate_decreasing_in_inr(inr):
    lo, hi = sorted(inr)
    r_lo = sum_se([10.0], [10.0], [lo])[0][0]
    r_hi = sum_se([10.0], [10.0], [hi])[0][0]
    assert r_hi <= r_lo + 1e-15


def test_normalized_sum_se_cases():
    st_, sr = np.array([10.0]), np.array([5.0])
    full = math.log2(11) + math.log2(6)
    assert normalized_sum_se([full], st_, sr)[0] == pytest.approx(1.0)
    assert normalized_sum_se([0.0], st_, sr)[0] == 0.0
    assert normalized_sum_se([full / 2], st_, sr)[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        normalized_sum_se([1.0], [0.0], [1.0])


def test_coverage_variance_cases():
    geom = ArrayGeometry.planar(4, 4, FC)
    grid = CoverageGrid.from_ranges_deg(-60, 60, 60, -30, 30, 30)
    a = steering_matrix(geom, grid, FC)
    assert coverage_variance(a, geom, grid, FC) == pytest.approx(0.0, abs=1e-20)
    assert coverage_variance(np.zeros_like(a), geom, grid, FC) == pytest.approx(1.0)
    # independently coded evaluator
    f = 1.03 * FC
    af = steering_matrix(geom, grid, f)
    direct = sum(abs(16 - np.vdot(af[:, j], a[:, j])) ** 2 for j in range(9)) / (16 ** 2 * 9)
    assert coverage_variance(a, geom, grid, f) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ValueError):
        coverage_variance(a[:, :3], geom, grid, FC)


def test_select_beams_exhaustive():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((6, 7)) + 1j * rng.standard_normal((6, 7))
    h = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
    for side in ("transmit", "receive"):
        idx, gain = select_beams(x, h, side)
        scores = []
        for j in range(7):
            g = [abs(np.vdot(h[k], x[:, j])) ** 2 for k in range(5)]
            norm = 6 if side == "transmit" else np.vdot(x[:, j], x[:, j]).real
            scores.append(np.mean(g) / norm)
        assert idx == int(np.argmax(scores))
        assert np.allclose(gain * (6 if side == "transmit" else np.vdot(x[:, idx], x[:, idx]).real),
                           [abs(np.vdot(h[k], x[:, idx])) ** 2 for k in range(5)])
    assert select_beams(x[:, :1], h, "transmit")[0] == 0
    # ties resolve to the lowest index
    assert select_beams(np.ones((6, 3)), h, "transmit")[0] == 0


def test_select_beams_on_grid_user():
    geom = ArrayGeometry.planar(4, 4, FC)
    grid = CoverageGrid.from_ranges_deg(-60, 60, 30, -30, 30, 30)
    a = steering_matrix(geom, grid, FC)
    for j, d in enumerate(grid.directions):
        user = synth_los_user(geom, d, SubcarrierGrid(FC, 0, 1))
        assert select_beams(a, user)[0] == j


def test_evaluate_pair_cbf_gamma_one_without_interference():
    geom = ArrayGeometry.planar(2, 2, FC)
    sub = SubcarrierGrid(FC, 1e9, 3)
    grid = CoverageGrid.from_degrees([(-30, 0), (30, 0)])
    a = steering_matrix(geom, grid, FC)
    h = synth_nearfield_si(geom, geom, 10, sub, math.inf)
    htx = synth_los_user(geom, Direction.from_degrees(25, 3), sub)
    hrx = synth_los_user(geom, Direction.from_degrees(-20, -5), sub, "receive")
    rep = evaluate_pair(LinkBudget(10, 10, -math.inf), h, a, a, htx, hrx, cbf_pair=(a, a))
    assert np.allclose(rep.gamma, 1.0)
    rep80 = evaluate_pair(BUDGET, h, a, a, htx, hrx, cbf_pair=(a, a))
    assert np.all((rep80.gamma >= 0) & (rep80.gamma <= 1))
    assert np.all(rep80.rate >= 0)
