from __future__ import annotations

import math

import numpy as np
import pytest

from caplab.axisym_grid import AxisymGrid
from caplab.capacity_solver import CapacitySolution, LevelSetError, MeridianField, extract_level_sets
from caplab.contours import ContourError, trace_level
from caplab.geometry_models import RadialConformalMetric
from caplab.meridian import MeridianCurve
from caplab.profiles import PowerSeriesProfile

FLAT = PowerSeriesProfile.from_mapping({0.0: 1.0})


def _grid(r_b: float, n_rho: int, n_mu: int) -> AxisymGrid:
    return AxisymGrid(boundary=MeridianCurve.round(r_b), truncation_radius=20.0, n_rho=n_rho, n_mu=n_mu)


def _node_rho_z(grid: AxisymGrid):
    r = grid.radii()
    return r * np.sin(grid.theta)[None, :], r * np.cos(grid.theta)[None, :]


def _two_charge_solution() -> CapacitySolution:
    # Equal charges at the origin and at z = 3; the saddle at z = 1.5 sits at phi = 2/3.
    grid = _grid(0.5, 256, 257)
    rho, z = _node_rho_z(grid)
    phi = 0.5 / np.hypot(rho, z) + 0.5 / np.hypot(rho, z - 3.0)
    return CapacitySolution(
        capacity=1.0,
        potential=MeridianField(grid=grid, phi=phi, u=FLAT),
        flux_samples=(),
        asymptotic_coefficient=1.0,
        boundary=MeridianCurve.round(0.5),
        metric=RadialConformalMetric(u=FLAT, r_b=0.5),
        method="fd",
    )


def test_single_charge_contour_integrals() -> None:
    grid = _grid(1.0, 128, 129)
    rho, z = _node_rho_z(grid)
    t = 0.25

    contour = trace_level(grid, 1.0 / np.hypot(rho, z), t)

    assert contour.star_shaped
    assert np.allclose(contour.radius, 1.0 / t, rtol=1e-3)
    assert contour.z[0] > 0.0 > contour.z[-1]
    assert contour.area(FLAT) == pytest.approx(4.0 * math.pi / t**2, rel=5e-3)
    assert contour.flux(FLAT) == pytest.approx(1.0, rel=5e-3)
    assert contour.coarea(FLAT) == pytest.approx(4.0 * math.pi / t**4, rel=5e-3)
    volume = contour.enclosed_volume(lambda r: 4.0 * math.pi * np.asarray(r) ** 3 / 3.0)
    assert volume == pytest.approx(4.0 * math.pi / (3.0 * t**3), rel=5e-3)


def test_level_that_misses_the_grid_is_rejected() -> None:
    grid = _grid(1.0, 64, 65)
    rho, z = _node_rho_z(grid)

    with pytest.raises(ContourError, match="does not cross"):
        trace_level(grid, 1.0 / np.hypot(rho, z), 2.0)
    with pytest.raises(ContourError, match="does not match grid"):
        trace_level(grid, np.zeros((8, 8)), 0.5)


def test_level_set_that_is_not_star_shaped_is_traced() -> None:
    sol = _two_charge_solution()
    t = 0.66

    levels = extract_level_sets(sol, [t])

    assert levels.curves[0] is None
    contour = levels.contours[0]
    assert not contour.star_shaped
    # Both charges sit inside, so the flux is their total.
    assert levels.fluxes[0] == pytest.approx(1.0, rel=1e-2)
    # 0.66 z^2 - 2.98 z + 1.5 = 0 on the axis above the second charge.
    north = (2.98 + math.sqrt(2.98**2 - 4.0 * 0.66 * 1.5)) / (2.0 * 0.66)
    assert contour.z[0] == pytest.approx(north, rel=1e-3)
    assert contour.z[-1] == pytest.approx(3.0 - north, rel=1e-3)
    neck = np.abs(contour.z - 1.5) < 0.1
    assert float(np.min(contour.rho[neck])) == pytest.approx(math.sqrt(1.0 / 0.66**2 - 2.25), abs=0.02)

    row = levels.rows()[0]
    assert row["traced"]
    assert row["r_max"] == pytest.approx(north, rel=1e-3)
    assert levels.areas[0] > 0.0 and levels.volumes[0] > 0.0
    with pytest.raises(LevelSetError, match="not star-shaped"):
        levels.curve(0)


def test_star_shaped_levels_keep_their_meridian_curve() -> None:
    sol = _two_charge_solution()

    levels = extract_level_sets(sol, [0.1])

    assert levels.contours[0] is None
    assert levels.curve(0).extent()[1] > 10.0
    assert not levels.rows()[0]["traced"]


def test_sphere_mean_of_single_charge_field() -> None:
    grid = _grid(1.0, 128, 129)
    rho, z = _node_rho_z(grid)
    field = MeridianField(grid=grid, phi=1.0 / np.hypot(rho, z), u=FLAT)

    for r in (1.5, 4.0, 12.0):
        assert field.sphere_mean(r) == pytest.approx(1.0 / r, rel=1e-4)
