from __future__ import annotations

import math

import numpy as np
import pytest

from caplab.capacity_solver import (
    AxisymDomainSpec,
    capacity_axisym_fd,
    capacity_radial,
    chebyshev_thresholds,
    extract_level_sets,
)
from caplab.geometry_models import RadialConformalMetric, SchwarzschildSpec, schwarzschild_metric
from caplab.meridian import MeridianCurve
from caplab.profiles import PowerSeriesProfile
from caplab.symmetrization import (
    IsoperimetricProfile,
    SymmetrizationError,
    enclosed_signed_volume,
    pfs_flat_bound,
    rearranged_energy,
    signed_volume_schwarzschild,
    symmetric_counterpart,
    szego_schwarzschild_compare,
)


@pytest.mark.smoke
def test_signed_volume_of_flat_ball_and_horizon() -> None:
    assert signed_volume_schwarzschild(0.0, 2.0) == pytest.approx(4.0 * math.pi * 8.0 / 3.0)
    assert signed_volume_schwarzschild(2.0, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert signed_volume_schwarzschild(2.0, 0.5) < 0.0
    assert signed_volume_schwarzschild(2.0, 3.0) > 0.0


def test_radius_for_volume_inverts_both_sides_of_horizon() -> None:
    profile = IsoperimetricProfile(2.0)

    for r0 in (0.4, 1.0, 3.0, 12.0):
        volume = signed_volume_schwarzschild(2.0, r0)
        assert profile.radius_for_volume(volume) == pytest.approx(r0, rel=1e-10)
    assert symmetric_counterpart(profile, signed_volume_schwarzschild(2.0, 3.0)).r0 == pytest.approx(3.0)
    assert profile.capacity_for_volume(signed_volume_schwarzschild(2.0, 3.0)) == pytest.approx(4.0)


def test_area_for_volume_of_schwarzschild_sphere() -> None:
    profile = IsoperimetricProfile(2.0)

    area = profile.area_for_volume(signed_volume_schwarzschild(2.0, 3.0))

    # Area radius (1 + 1/3)^2 * 3 = 16/3.
    assert area == pytest.approx(4.0 * math.pi * (16.0 / 3.0) ** 2, rel=1e-10)


def test_flat_profile_matches_ball_capacity() -> None:
    profile = IsoperimetricProfile(0.0)
    volume = 4.0 * math.pi * 27.0 / 3.0

    assert profile.radius_for_volume(volume) == pytest.approx(3.0, rel=1e-10)
    assert pfs_flat_bound(volume) == pytest.approx(3.0)


def test_enclosed_volume_of_coordinate_sphere() -> None:
    profile = IsoperimetricProfile(2.0)

    assert enclosed_signed_volume(profile, MeridianCurve.round(3.0)) == pytest.approx(
        signed_volume_schwarzschild(2.0, 3.0), rel=1e-12
    )


def test_other_metrics_must_be_declared_isoperimetric() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -2.0: 0.1})
    metric = RadialConformalMetric(u=u, r_b=1.0)

    with pytest.raises(SymmetrizationError, match="declared isoperimetric"):
        IsoperimetricProfile(0.0, metric=metric)
    profile = IsoperimetricProfile(0.0, metric=metric, assume_isoperimetric=True)
    assert profile.reference_radius == 1.0
    assert profile.radius_for_volume(float(profile.volume(2.0)[0])) == pytest.approx(2.0, rel=1e-9)


@pytest.mark.parametrize("method", ["spline", "pchip"])
def test_rearrangement_of_round_potential_is_an_equality(method: str) -> None:
    sol = capacity_radial(schwarzschild_metric(SchwarzschildSpec(2.0)), 2.0)
    levels = extract_level_sets(sol, chebyshev_thresholds(32))

    result = rearranged_energy(levels, IsoperimetricProfile(2.0), method=method)

    assert result.chain_monotone
    assert result.symmetrized_capacity == pytest.approx(3.0, rel=1e-9)
    assert result.gap == pytest.approx(0.0, abs=1e-7)
    assert result.energy_chain[0] == pytest.approx(result.energy_chain[1], rel=1e-7)
    assert result.symmetric_radius == pytest.approx(2.0, rel=1e-8)
    assert result.to_dict()["derivative_method"] == method


def test_rearrangement_needs_enough_thresholds() -> None:
    sol = capacity_radial(schwarzschild_metric(SchwarzschildSpec(2.0)), 2.0)
    levels = extract_level_sets(sol, np.linspace(0.1, 0.9, 8))

    with pytest.raises(SymmetrizationError, match="at least 32"):
        rearranged_energy(levels, IsoperimetricProfile(2.0))


def test_szego_comparison_is_equality_for_coordinate_sphere() -> None:
    sol = capacity_radial(schwarzschild_metric(SchwarzschildSpec(2.0)), 2.0)

    report = szego_schwarzschild_compare(sol, 2.0)

    assert report.direction == ">="
    assert report.satisfied
    assert report.equality


@pytest.mark.slow
def test_flat_spheroid_capacity_exceeds_equal_volume_ball() -> None:
    curve = MeridianCurve.spheroid(1.0, 2.0)
    flat = RadialConformalMetric(u=PowerSeriesProfile.from_mapping({0.0: 1.0}), r_b=1.0)
    sol = capacity_axisym_fd(AxisymDomainSpec(boundary_curve=curve, metric=flat, grid=(128, 64)))
    levels = extract_level_sets(sol, chebyshev_thresholds(32, 0.1))

    result = rearranged_energy(levels, IsoperimetricProfile(0.0))

    # Ball with the spheroid's volume, a^2 c = 2.
    assert result.symmetrized_capacity == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-5)
    assert result.gap > 0.0
    assert result.chain_monotone
    assert szego_schwarzschild_compare(sol, 0.0).satisfied


BATTERY = [
    (2.0, MeridianCurve.spheroid(2.0, 3.0), True),
    (2.0, MeridianCurve.spheroid(3.0, 2.0), True),
    (2.0, MeridianCurve.spheroid(1.5, 2.25), True),
    (2.0, MeridianCurve.bumped(2.0, 0.1, 2), False),
    (2.0, MeridianCurve.bumped(2.5, 0.15, 3), False),
    (1.0, MeridianCurve.spheroid(1.0, 1.5), True),
    (1.0, MeridianCurve.spheroid(1.5, 1.0), True),
    (1.0, MeridianCurve.spheroid(1.2, 1.8), True),
    (1.0, MeridianCurve.bumped(1.0, 0.2, 2), False),
    (1.0, MeridianCurve.bumped(1.5, 0.1, 4), False),
]


@pytest.mark.slow
@pytest.mark.parametrize("m, curve, eccentric", BATTERY, ids=[f"m={m:g}-{c.label}" for m, c, _ in BATTERY])
def test_schwarzschild_boundaries_beat_their_symmetric_counterpart(
    m: float, curve: MeridianCurve, eccentric: bool
) -> None:
    # Every spheroid here has axis ratio 3/2, eccentricity sqrt(5)/3 > 0.3.
    metric = schwarzschild_metric(SchwarzschildSpec(m), r_start=0.5 * m)
    sol = capacity_axisym_fd(AxisymDomainSpec(boundary_curve=curve, metric=metric, grid=(128, 64)))
    levels = extract_level_sets(sol, chebyshev_thresholds(32, 0.2))

    result = rearranged_energy(levels, IsoperimetricProfile(m))

    assert result.chain_monotone
    assert result.gap >= -5.0 * sol.grid_error
    if eccentric:
        assert result.gap > 3.0 * sol.grid_error
