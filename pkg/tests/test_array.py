import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from squintbook.array import (
    ArrayGeometry,
    CoverageGrid,
    Direction,
    SubcarrierGrid,
    element_response,
    steering_matrix,
    steering_tensor,
    steering_vector,
    subcarrier_frequencies,
)

FC = 60e9


def test_element_at_origin_is_one():
    geom = ArrayGeometry([(0, 0, 0)], FC)
    assert element_response(geom, 0, Direction(0.7, -0.3), 1.3 * FC) == 1 + 0j


def test_element_response_half_wavelength_x():
    geom = ArrayGeometry([(0.5, 0, 0)], FC)
    d = Direction(math.pi / 6, 0.0)
    assert element_response(geom, 0, d, FC) == pytest.approx(1j, abs=1e-12)
    assert element_response(geom, 0, d, 1.5 * FC) == pytest.approx(np.exp(1j * 3 * np.pi / 4), abs=1e-12)


def test_element_response_index_error():
    geom = ArrayGeometry.planar(2, 2, FC)
    with pytest.raises(IndexError):
        element_response(geom, 4, Direction(0, 0), FC)


def test_planar_constructor_spacing():
    geom = ArrayGeometry.planar(4, 3, FC)
    pos = geom.elements
    assert pos.shape == (12, 3)
    assert np.all(pos[:, 1] == 0)
    assert np.allclose(np.diff(np.unique(pos[:, 0])), 0.5)
    assert np.allclose(np.diff(np.unique(pos[:, 2])), 0.5)


def test_broadside_all_ones():
    geom = ArrayGeometry.planar(2, 2, FC)
    assert np.allclose(steering_vector(geom, Direction(0, 0), 1.2 * FC), np.ones(4))


def test_norm_and_self_inner_product():
    geom = ArrayGeometry.planar(8, 8, FC)
    a = steering_vector(geom, Direction(0.4, -0.2), 0.95 * FC)
    assert np.vdot(a, a).real == pytest.approx(64, rel=1e-9)
    assert np.allclose(np.abs(a), 1, atol=1e-12)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((0, 3)), FC)
    with pytest.raises(ValueError):
        ArrayGeometry([(0, np.nan, 0)], FC)
    with pytest.raises(ValueError):
        Direction(math.pi, 0)
    with pytest.raises(ValueError):
        CoverageGrid((Direction(0, 0), Direction(0, 0)))


def test_section_iv_grid_has_45_beams():
    grid = CoverageGrid.from_ranges_deg(-60, 60, 15, -30, 30, 15)
    geom = ArrayGeometry.planar(8, 8, FC)
    assert steering_matrix(geom, grid, FC).shape == (64, 45)


def test_steering_matrix_columns():
    geom = ArrayGeometry.planar(3, 2, FC)
    grid = CoverageGrid.from_degrees([(-20, 5), (0, 0), (35, -10)])
    a = steering_matrix(geom, grid, 1.02 * FC)
    for j, d in enumerate(grid.directions):
        assert np.allclose(a[:, j], steering_vector(geom, d, 1.02 * FC))
    single = CoverageGrid((grid.directions[2],))
    assert np.allclose(steering_matrix(geom, single, FC)[:, 0], steering_vector(geom, grid.directions[2], FC))
    # permutation consistency
    rev = CoverageGrid(tuple(reversed(grid.directions)))
    assert np.allclose(steering_matrix(geom, rev, 1.02 * FC), a[:, ::-1])


def test_steering_depends_on_frequency():
    geom = ArrayGeometry.planar(4, 4, FC)
    grid = CoverageGrid.from_degrees([(30, 10)])
    assert not np.allclose(steering_matrix(geom, grid, FC), steering_matrix(geom, grid, 1.05 * FC))
    broadside = CoverageGrid.from_degrees([(0, 0)])
    assert np.allclose(steering_matrix(geom, broadside, FC), steering_matrix(geom, broadside, 1.05 * FC))


def test_steering_tensor_stacks_matrices():
    geom = ArrayGeometry.planar(2, 3, FC)
    grid = CoverageGrid.from_ranges_deg(-30, 30, 30, 0, 0, 1)
    freqs = np.array([0.97, 1.0, 1.03]) * FC
    t = steering_tensor(geom, grid, freqs)
    for k, f in enumerate(freqs):
        assert np.allclose(t[k], steering_matrix(geom, grid, f))


@pytest.mark.parametrize(
    "k, bw, expected, k0",
    [
        (1, 4e9, [60e9], 0),
        (3, 6e9, [58e9, 60e9, 62e9], 1),
        (2, 2e9, [59.5e9, 60.5e9], 0),
    ],
)
def test_subcarrier_frequencies(k, bw, expected, k0):
    grid = SubcarrierGrid(FC, bw, k)
    assert np.allclose(subcarrier_frequencies(grid), expected, rtol=0, atol=1e-3)
    assert grid.center_index == k0


def test_subcarrier_grid_validation():
    with pytest.raises(ValueError):
        SubcarrierGrid(FC, -1.0, 4)
    with pytest.raises(ValueError):
        SubcarrierGrid(FC, 1e9, 0)


@given(k=st.integers(1, 64), bw=st.floats(0, 10e9))
def test_center_index_is_nearest(k, bw):
    grid = SubcarrierGrid(FC, bw, k)
    f = grid.frequencies
    if k > 1 and bw > 1.0:
        assert np.all(np.diff(f) > 0)
    dist = np.abs(f - FC)
    assert dist[grid.center_index] <= dist.min() * (1 + 1e-12) + 1e-3


@settings(max_examples=50)
@given(
    az=st.floats(-math.pi, math.pi - 1e-9),
    el=st.floats(-math.pi / 2, math.pi / 2),
    alpha=st.floats(0.5, 1.5),
)
def test_unit_modulus_and_phase_linearity(az, el, alpha):
    geom = ArrayGeometry.planar(4, 4, FC)
    d = Direction(az, el)
    a1 = steering_vector(geom, d, FC)
    a2 = steering_vector(geom, d, alpha * FC)
    assert np.allclose(np.abs(a2), 1, atol=1e-12)
    assert np.vdot(a2, a2).real == pytest.approx(16, rel=1e-9)
    # arg a(alpha fc) = alpha * arg a(fc), compared through the unwrapped phase Phi
    phase1 = np.angle(a1)
    phase2 = np.angle(a2)
    x, y, z = geom.elements.T
    phi = x * math.sin(az) * math.cos(el) + y * math.cos(az) * math.cos(el) + z * math.sin(el)
    assert np.allclose(np.exp(1j * phase1), np.exp(2j * np.pi * phi))
    assert np.allclose(np.exp(1j * phase2), np.exp(1j * alpha * 2 * np.pi * phi))
