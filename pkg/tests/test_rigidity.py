"""
Tests for TwoWell Core - Rigidity Diagnostics
"""

import math

import numpy as np
import pytest

from twowell.cli.commands import probe_ball
from twowell.core import (
    Ball,
    ConfigError,
    DomainError,
    GridPolicy,
    GridSpec,
    HypothesisError,
    RelaxConfig,
    Rhombus,
    RigidityConstants,
    ScalarField,
    VectorField,
    WellPair,
    all_covering_radii,
    bad_set_measure,
    ball_mask,
    bilip_constant,
    build_configuration,
    covering_radius,
    disc_field,
    elastic_density_field,
    elastic_energy_ball,
    find_good_rhombus,
    good_horizontal_lines,
    good_vertical_lines,
    lower_bound_ratio,
    nonsingular_points,
    radius_bound,
    relax,
    rigid_fit,
    rotation,
    vitali_cover,
    weighted_energy,
)

SHEAR = WellPair.from_lambda(0.8).normal_form()


def _strip(grid, row):
    values = np.zeros((grid.n, grid.n))
    values[:, row] = 1.0
    return ScalarField(grid, values)


def _wavy(grid, a, b, p, q):
    """x + 0.02 (sin(a x2 + p), sin(b x1 + q))"""
    def func(X):
        return X + 0.02 * np.stack([np.sin(a * X[..., 1] + p), np.sin(b * X[..., 0] + q)], axis=-1)
    return VectorField.from_function(grid, func)


def test_rigidity_constants():
    """Test defaults and ranges"""
    constants = RigidityConstants()
    assert constants.alpha == pytest.approx(0.05)
    assert RigidityConstants(delta=0.4).alpha == pytest.approx(0.1)
    assert RigidityConstants(alpha=0.2).alpha == 0.2

    for kwargs in ({"delta": 0.5}, {"delta": 0.0}, {"theta": 1.0}, {"eta": 0.0},
                   {"eta0": -1.0}, {"alpha": 1.5}):
        with pytest.raises(ConfigError):
            RigidityConstants(**kwargs)


def test_rhombus_geometry():
    """Test corners, scaling and membership"""
    T = Rhombus(np.array([1.0, 2.0]), 0.5, 0.2)
    a, b, c, d = T.corners
    assert np.allclose(a, [0.5, 2.0])
    assert np.allclose(b, [1.5, 2.0])
    assert np.allclose(c, [1.0, 2.2])
    assert np.allclose(d, [1.0, 1.8])
    assert T.scaled(0.5).half_long == 0.25
    assert T.contains(np.array([1.0, 2.0]))
    assert not T.contains(np.array([1.4, 2.15]))

    ball = Ball(np.zeros(2), 1.0)
    assert ball.contains(np.array([0.6, 0.7]))
    assert not ball.contains(np.array([0.8, 0.8]))


def test_lines_in_parent_phase(small_grid):
    """Test that nearly every line is good without an inclusion"""
    chi = ScalarField.zeros(small_grid)
    v = VectorField.identity(small_grid)
    horizontal = good_horizontal_lines(chi, v, SHEAR, 0.2, 0.1)
    vertical = good_vertical_lines(chi, v, SHEAR, 0.2, 0.1)
    assert horizontal.fraction >= 0.85
    assert vertical.fraction >= 0.85
    assert np.all(horizontal.avoids_M)
    assert np.all(np.abs(horizontal.offsets) < 0.2 * 0.9)
    assert np.all(np.abs(vertical.offsets) < 0.45)


def test_lines_avoid_strip(small_grid):
    """Test that lines through the dilated strip are rejected"""
    h = small_grid.h
    row = 35
    r0 = -small_grid.L + (row + 0.5) * h
    chi = _strip(small_grid, row)
    v = VectorField.identity(small_grid)

    selection = good_horizontal_lines(chi, v, SHEAR, 0.2, 0.1)
    accepted = selection.accepted
    assert len(accepted) > 0
    assert np.all(np.abs(accepted - r0) >= 1.4 * h)
    far = selection.offsets[np.abs(selection.offsets - r0) >= 1.6 * h]
    assert set(far.tolist()) <= set(accepted.tolist())

    # every vertical segment crosses the strip
    with pytest.raises(HypothesisError):
        good_vertical_lines(chi, v, SHEAR, 0.2, 0.1)


def test_lines_inside_inclusion(small_grid):
    """Test that a full inclusion leaves no good line"""
    with pytest.raises(HypothesisError):
        good_horizontal_lines(ScalarField.ones(small_grid), VectorField.identity(small_grid),
                              SHEAR, 0.2, 0.1)


def test_probe_ball_inside_window(small_grid):
    """Test that probe balls must fit in the window"""
    with pytest.raises(DomainError):
        good_horizontal_lines(ScalarField.zeros(small_grid), VectorField.identity(small_grid),
                              SHEAR, 0.2, 0.1, ball=Ball(np.array([0.5, 0.0]), 0.8))


def test_weighted_energy(small_grid):
    """Test the singular weight on a constant density"""
    chi = ScalarField.zeros(small_grid)
    v = VectorField.identity(small_grid)
    ball = Ball(np.zeros(2), 0.5)
    assert weighted_energy(chi, v, SHEAR, ball, np.zeros(2)) < 1e-12

    density = np.ones((64, 64))
    value = weighted_energy(chi, v, SHEAR, ball, np.zeros(2), density=density)
    # integral of 1/|z| over the disc of radius 0.5 is pi
    assert value == pytest.approx(math.pi, rel=0.05)


def test_rigid_fit():
    """Test recovery of a rotation and shift"""
    rng = np.random.default_rng(0)
    X = rng.uniform(-1.0, 1.0, size=(50, 2))
    Q = rotation(0.35)
    p = np.array([0.2, -0.7])
    Q_fit, p_fit = rigid_fit(X, X @ Q.T + p)
    assert np.max(np.abs(Q_fit - Q)) < 1e-12
    assert np.max(np.abs(p_fit - p)) < 1e-12


def test_rhombus_on_rigid_motion(small_grid):
    """Test that a rigid motion has no distortion on any rhombus segment"""
    chi = ScalarField.zeros(small_grid)
    v = VectorField.affine(small_grid, rotation(0.2), p=(0.05, -0.03))
    report = find_good_rhombus(chi, v, SHEAR, 0.2, 1.0)

    assert len(report.distortions) == 6
    assert report.max_length_distortion <= 1e-9
    assert max(report.segment_energies) <= 1e-9
    assert report.rigid_deviation <= 1e-9
    assert not any(report.intersects_M)
    assert not any(report.image_intersects)
    assert 0.25 <= report.rho <= 0.75
    assert 0.0 < report.good_fraction <= 1.0

    lines = report.to_lines()
    assert any(line.startswith("rho=") for line in lines)
    assert any(line.startswith("C_vii=") for line in lines)


def test_rhombus_in_parent_phase(small_grid):
    """Test the share of good scales without an inclusion"""
    chi = ScalarField.zeros(small_grid)
    v = VectorField.identity(small_grid)
    report = find_good_rhombus(chi, v, SHEAR, 0.2, 1.0)
    assert report.good_fraction >= 0.6
    assert report.max_length_distortion <= 1e-9


def test_rhombus_refuses_large_inclusion(small_grid):
    """Test the small-set gate"""
    chi = disc_field(small_grid, 0.3)
    with pytest.raises(HypothesisError):
        find_good_rhombus(chi, VectorField.identity(small_grid), SHEAR, 0.2, 1.0)


def test_lens_probe(lens64):
    """Test lines and rhombi in a ball above the lens"""
    chi, v, lens, _ = lens64
    ball = probe_ball(chi.grid, lens, 64.0)
    assert ball.center[1] - ball.radius > lens.T / 2.0
    assert ball.center[1] + ball.radius <= chi.grid.L

    horizontal = good_horizontal_lines(chi, v, SHEAR, 0.2, 0.1, ball=ball)
    assert horizontal.fraction >= 0.9 - 1e-12

    report = find_good_rhombus(chi, v, SHEAR, 0.2, 1.0, ball=ball, eta=1.0)
    assert not any(report.intersects_M)
    assert report.ball_energy > 0.0
    assert all(np.isfinite(value) for value in report.constants.values())

    density = elastic_density_field(chi, v, SHEAR)
    regular, _ = nonsingular_points(density, chi.grid, ball.center, ball.radius, 0.1)
    cells = chi.grid.cell_of(np.array([report.a, report.b, report.c, report.d]))
    assert np.all(regular[cells[:, 0], cells[:, 1]])


def test_bad_set_measure(small_grid):
    """Test the set where grad v prefers the inclusion well"""
    chi = ScalarField.zeros(small_grid)
    ball = Ball(np.zeros(2), 0.5)
    assert bad_set_measure(chi, VectorField.identity(small_grid), SHEAR, ball) == 0.0

    v = VectorField.affine(small_grid, SHEAR.F)
    count = np.count_nonzero(ball_mask(small_grid, ball.center, ball.radius))
    assert bad_set_measure(chi, v, SHEAR, ball) == pytest.approx(small_grid.h ** 2 * count)

    inner = bad_set_measure(chi, v, SHEAR, Ball(np.zeros(2), 0.3))
    assert inner <= bad_set_measure(chi, v, SHEAR, ball)
    assert bad_set_measure(chi, v, SHEAR, np.ones((64, 64), dtype=bool)) == pytest.approx(4.0)

    with pytest.raises(DomainError):
        bad_set_measure(chi, v, SHEAR, np.ones((32, 32), dtype=bool))


def test_lower_bound_ratio_missing_inclusion():
    """Test the inf sentinel when the inner ball misses M"""
    grid = GridSpec(256, 1.0)
    chi = disc_field(grid, 0.03, center=(0.5, 0.0))
    ratio = lower_bound_ratio(chi, VectorField.identity(grid), SHEAR,
                              Ball(np.zeros(2), 0.95), alpha=0.05, eta=0.5)
    assert ratio == float("inf")


def test_lower_bound_ratio_refused():
    """Test the small-set hypothesis with the default eta"""
    grid = GridSpec(256, 1.0)
    ball = Ball(np.zeros(2), 0.95)
    chi = disc_field(grid, 0.05 * 0.95)
    with pytest.raises(HypothesisError):
        lower_bound_ratio(chi, VectorField.identity(grid), SHEAR, ball, alpha=0.05)


def test_lower_bound_ratio_scales_with_energy():
    """Test the ratio against the ball energy"""
    grid = GridSpec(256, 1.0)
    ball = Ball(np.zeros(2), 0.95)
    chi = disc_field(grid, 0.04)
    inner = ball_mask(grid, ball.center, 0.05 * 0.95)
    mass = grid.h ** 2 * np.sum(chi.values[inner])

    v = VectorField.identity(grid)
    ratio = lower_bound_ratio(chi, v, SHEAR, ball, alpha=0.05, eta=0.5)
    energy = elastic_energy_ball(chi, v, SHEAR, ball.center, ball.radius)
    assert ratio == pytest.approx(energy * 0.95 ** 2 / mass ** 2)

    stretched = VectorField.affine(grid, 1.5 * np.eye(2))
    assert lower_bound_ratio(chi, stretched, SHEAR, ball, alpha=0.05, eta=0.5) > ratio


def test_covering_radius_single_cell(small_grid):
    """Test the radius of an isolated cell"""
    values = np.zeros((64, 64))
    values[32, 32] = 1.0
    chi = ScalarField(small_grid, values)
    info = covering_radius(chi, np.array([0.01, 0.01]), 0.01)
    assert info.radius == pytest.approx(small_grid.h / 0.1)
    assert np.allclose(info.center, [small_grid.h / 2.0, small_grid.h / 2.0])
    assert info.regime == "area"

    with pytest.raises(DomainError):
        covering_radius(chi, np.array([-0.5, 0.5]), 0.01)
    with pytest.raises(DomainError):
        covering_radius(chi, np.array([0.01, 0.01]), 0.0)


def test_covering_radius_disc(small_grid):
    """Test that a small disc is swallowed whole"""
    chi = disc_field(small_grid, 0.1)
    info = covering_radius(chi, np.zeros(2), 0.01)
    assert info.mass == pytest.approx(chi.mass)
    assert info.radius == pytest.approx(math.sqrt(chi.mass / 0.01))
    assert info.regime == "area"
    assert info.balance == pytest.approx(1.0)
    assert info.dichotomy_ok

    infos = all_covering_radii(chi, 0.01)
    assert len(infos) == int(np.sum(chi.values))
    assert all(i.radius == pytest.approx(info.radius) for i in infos)


def test_covering_radius_lens(lens64):
    """Test the uniform radius bound on the lens"""
    chi, _, _, _ = lens64
    info = covering_radius(chi, np.zeros(2), 0.01)
    assert info.regime == "volume"
    assert info.radius <= radius_bound(chi.mass, 0.01) * (1.0 + 1e-12)


def test_radius_bound():
    """Test both branches of the radius bound"""
    assert radius_bound(0.25, 0.01) == pytest.approx(5.0)
    assert radius_bound(64.0, 0.01) == pytest.approx(160.0)


def test_vitali_single_disc(small_grid):
    """Test that one ball covers a small disc"""
    chi = disc_field(small_grid, 0.1)
    report = vitali_cover(chi, 0.01)
    assert len(report.radii) == 1
    assert report.disjoint
    assert report.covers
    assert report.dichotomy_ok
    assert report.bound_ok
    assert report.regimes == ["area"]
    assert len(report.rows()) == 1


def test_vitali_two_discs():
    """Test two far-apart discs"""
    grid = GridSpec(256, 1.0)
    values = np.maximum(disc_field(grid, 0.05, (-0.8, 0.0)).values,
                        disc_field(grid, 0.05, (0.8, 0.0)).values)
    chi = ScalarField(grid, values)
    report = vitali_cover(chi, 0.01)
    assert len(report.radii) == 2
    assert report.disjoint
    assert report.covers
    assert report.dichotomy_ok
    assert report.bound_ok
    assert report.centers[0][0] * report.centers[1][0] < 0.0


def test_vitali_lens(lens64):
    """Test the cover of the lens inclusion"""
    chi, v, _, _ = lens64
    report = vitali_cover(chi, 0.01, v, SHEAR)
    assert report.disjoint
    assert report.covers
    assert report.dichotomy_ok
    assert report.bound_ok
    assert set(report.regimes) == {"volume"}
    assert np.all(report.local_energies > 0.0)
    assert report.chain_constant > 0.0
    entries = report.as_dict()
    assert entries["balls"] == len(report.radii)


def test_vitali_empty(small_grid):
    """Test that an empty inclusion has no cover"""
    with pytest.raises(DomainError):
        vitali_cover(ScalarField.zeros(small_grid), 0.01)


@pytest.mark.slow
def test_lens_diagnostics_stable_under_refinement():
    """Test that lens diagnostics change by at most a factor 4 across grids"""
    W = WellPair.from_lambda(0.8)
    ratios, bad_sets = [], []
    for n in (256, 512, 1024):
        grid = GridPolicy(n=n).grid_for(64.0)
        chi, v, _, _ = build_configuration(64.0, W, grid)
        ball = Ball(np.zeros(2), 0.95 * grid.L)
        ratios.append(lower_bound_ratio(chi, v, SHEAR, ball, alpha=0.05, eta=2.0))
        bad_sets.append(bad_set_measure(chi, v, SHEAR, ball))

    for values in (ratios, bad_sets):
        assert min(values) > 0.0
        assert max(values) / min(values) <= 4.0


def test_inverse_ball_energy_bounded(small_grid):
    """Test E_inverse <= m^4 E on smooth perturbations of the identity"""
    rng = np.random.default_rng(5)
    chi = ScalarField.zeros(small_grid)
    ball = Ball(np.zeros(2), 0.6)
    for _ in range(3):
        a, b = rng.uniform(2.0, 4.0, size=2)
        p, q = rng.uniform(0.0, 2.0 * np.pi, size=2)
        v = _wavy(small_grid, a, b, p, q)
        m = bilip_constant(v)
        report = find_good_rhombus(chi, v, SHEAR, 0.2, 1.0, ball=ball)

        # v^-1 maps B_R(v(0)) into B_mR(0)
        reach = m * ball.radius + 2.0 * small_grid.h
        forward = elastic_energy_ball(chi, v, SHEAR, ball.center, reach)
        assert report.inverse_ball_energy > 0.0
        assert report.inverse_ball_energy <= 1.1 * m ** 4 * forward

        C_v = report.constants["C_v"]
        assert np.isfinite(C_v) and C_v >= 0.0
        assert C_v == pytest.approx(
            max(report.image_energies) * ball.radius / report.inverse_ball_energy)


@pytest.mark.slow
def test_lower_bound_ratio_on_relaxed_lenses():
    """Test that the ratio stays within a factor 4 for relaxed lenses at mu = 4, 16, 64"""
    W = WellPair.from_lambda(0.8)
    policy = GridPolicy(n=256)
    ratios = []
    for mu in (4.0, 16.0, 64.0):
        chi, v, lens, shear = build_configuration(mu, W, policy.grid_for(mu))
        relaxed = relax(chi, v, shear, RelaxConfig(max_iters=1000)).v_final
        # the inner ball of radius 0.55 Rlen holds the whole lens
        ball = Ball(np.zeros(2), 2.2 * lens.Rlen)
        ratios.append(lower_bound_ratio(chi, relaxed, shear, ball, alpha=0.25, eta=2.0))

    assert min(ratios) > 0.0
    assert max(ratios) / min(ratios) <= 4.0


@pytest.mark.slow
def test_rhombus_distortion_stable_under_refinement():
    """Test that C_vii above the mu = 64 lens is stable across three grids"""
    W = WellPair.from_lambda(0.8)
    values = []
    for n in (256, 512, 1024):
        grid = GridPolicy(n=n).grid_for(64.0)
        chi, v, lens, shear = build_configuration(64.0, W, grid)
        ball = probe_ball(grid, lens, 64.0)
        report = find_good_rhombus(chi, v, shear, 0.2, 1.0, ball=ball, eta=1.0)
        values.append(report.constants["C_vii"])

    assert min(values) > 0.0
    assert max(values) / min(values) <= 2.0
