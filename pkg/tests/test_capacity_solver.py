from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from caplab.capacity_solver import (
    AxisymDomainSpec,
    DivergentIntegralError,
    LevelSetError,
    NotHarmonicError,
    asymptotic_fit,
    boundary_gradient,
    capacity_axisym_fd,
    capacity_harmonically_flat,
    capacity_radial,
    chebyshev_thresholds,
    extract_level_sets,
)
from caplab.geometry_models import (
    DomainError,
    RadialConformalMetric,
    SchwarzschildSpec,
    WarpedProductMetric,
    schwarzschild_metric,
)
from caplab.meridian import MeridianCurve
from caplab.profiles import PowerSeriesProfile
from caplab.report_store import ReportStore, read_field


def _flat(r_b: float) -> RadialConformalMetric:
    return RadialConformalMetric(u=PowerSeriesProfile.from_mapping({0.0: 1.0}), r_b=r_b)


def _schwarzschild(m: float = 2.0, r_start: float | None = None) -> RadialConformalMetric:
    return schwarzschild_metric(SchwarzschildSpec(m), r_start=r_start)


@pytest.mark.smoke
@pytest.mark.parametrize("r0", [0.5, 1.0, 2.0, 5.0])
def test_radial_capacity_of_schwarzschild_spheres(r0: float) -> None:
    sol = capacity_radial(_schwarzschild(r_start=min(1.0, r0)), r0)

    assert sol.capacity == pytest.approx(r0 + 1.0, rel=1e-10)
    assert sol.method == "radial"
    assert sol.flux_spread < 1e-4


def test_radial_capacity_of_flat_sphere() -> None:
    sol = capacity_radial(_flat(1.5), 1.5)

    assert sol.capacity == pytest.approx(1.5, rel=1e-10)
    assert asymptotic_fit(sol) == pytest.approx(1.5, rel=1e-6)


def test_harmonically_flat_shortcut_matches_quadrature() -> None:
    metric = _schwarzschild()

    assert capacity_harmonically_flat(metric, 2.0) == pytest.approx(3.0)
    assert capacity_radial(metric, 2.0).capacity == pytest.approx(3.0, rel=1e-10)


def test_harmonically_flat_shortcut_rejects_other_profiles() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -2.0: 1.0})
    metric = RadialConformalMetric(u=u, r_b=1.0)

    with pytest.raises(NotHarmonicError):
        capacity_harmonically_flat(metric, 1.0)


def test_non_flat_end_is_reported_as_divergent() -> None:
    cone = WarpedProductMetric(
        f=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        h=lambda r: np.sqrt(np.asarray(r, dtype=float)),
        r_b=1.0,
    )

    with pytest.raises(DivergentIntegralError):
        capacity_radial(cone, 1.0)


def test_radial_level_radius_and_boundary_gradient() -> None:
    sol = capacity_radial(_schwarzschild(), 2.0)

    # phi = 3 / (r + 1)
    assert sol.potential.level_radius(0.5) == pytest.approx(5.0, rel=1e-10)
    gradient = boundary_gradient(sol)
    assert gradient.grad_phi[0] == pytest.approx(3.0 / 4.5**2, rel=1e-9)
    assert gradient.mean_curvature[0] == pytest.approx(4.0 / 27.0, rel=1e-12)
    assert gradient.margin_capacity() > 0.0


def test_level_outside_unit_interval_is_rejected() -> None:
    sol = capacity_radial(_schwarzschild(), 2.0)

    with pytest.raises(LevelSetError):
        sol.potential.level_radius(1.0)
    with pytest.raises(LevelSetError):
        extract_level_sets(sol, [0.2, 1.2])


def test_chebyshev_thresholds_are_sorted_inside_band() -> None:
    t = chebyshev_thresholds(32, 0.02)

    assert t.size == 32
    assert np.all(np.diff(t) > 0)
    assert t[0] > 0.02 and t[-1] < 0.98


def test_radial_level_sets_carry_constant_flux() -> None:
    sol = capacity_radial(_schwarzschild(), 2.0)
    levels = extract_level_sets(sol, [0.25, 0.5, 0.75])

    assert np.allclose(levels.fluxes, 3.0, rtol=1e-8)
    radii = [curve.coefficients[0] for curve in levels.curves]
    assert radii == pytest.approx([11.0, 5.0, 3.0], rel=1e-10)
    # phi = 1/2 sits at r = 5, where the area radius is 1.2^2 * 5.
    assert levels.areas[1] == pytest.approx(4.0 * math.pi * (1.2**2 * 5.0) ** 2, rel=1e-10)
    assert np.all(np.diff(levels.volumes) < 0)
    assert levels.boundary_volume > 0
    assert len(levels.rows()) == 3


def test_domain_spec_defaults_and_validation() -> None:
    curve = MeridianCurve.round(2.0)
    spec = AxisymDomainSpec(boundary_curve=curve, metric=_flat(2.0))

    assert spec.truncation_radius == pytest.approx(20.0)
    with pytest.raises(DomainError, match="10x"):
        AxisymDomainSpec(boundary_curve=curve, metric=_flat(2.0), truncation_radius=15.0)
    with pytest.raises(DomainError, match="64x64"):
        AxisymDomainSpec(boundary_curve=curve, metric=_flat(2.0), grid=(32, 64))
    with pytest.raises(DomainError, match="below the metric domain"):
        AxisymDomainSpec(boundary_curve=curve, metric=_flat(3.0))


@pytest.mark.slow
def test_meridian_solve_reproduces_flat_sphere() -> None:
    sol = capacity_axisym_fd(
        AxisymDomainSpec(boundary_curve=MeridianCurve.round(1.0), metric=_flat(1.0), grid=(128, 64))
    )

    assert sol.method == "fd"
    assert sol.capacity == pytest.approx(1.0, rel=2e-3)
    assert sol.dirichlet_capacity == pytest.approx(sol.capacity, rel=5e-3)
    assert sol.maximum_principle
    assert sol.grid_error < 5e-3


@pytest.mark.slow
def test_meridian_solve_converges_under_grid_doubling() -> None:
    errors = []
    for grid in ((128, 64), (256, 128)):
        sol = capacity_axisym_fd(
            AxisymDomainSpec(boundary_curve=MeridianCurve.round(1.0), metric=_flat(1.0), grid=grid)
        )
        errors.append(abs(sol.capacity - 1.0))

    assert errors[0] / errors[1] >= 3.0
    assert sol.flux_spread < 1e-3


@pytest.mark.slow
def test_meridian_solve_reproduces_schwarzschild_sphere() -> None:
    sol = capacity_axisym_fd(
        AxisymDomainSpec(boundary_curve=MeridianCurve.round(2.0), metric=_schwarzschild(), grid=(128, 64))
    )

    assert sol.capacity == pytest.approx(3.0, rel=2e-3)


@pytest.mark.slow
def test_prolate_spheroid_capacity(tmp_path: Path) -> None:
    a, c = 1.0, 2.0
    focal = math.sqrt(c**2 - a**2)
    expected = focal / math.acosh(c / a)
    curve = MeridianCurve.spheroid(a, c)

    sol = capacity_axisym_fd(AxisymDomainSpec(boundary_curve=curve, metric=_flat(a), grid=(128, 64)))

    assert sol.capacity == pytest.approx(expected, rel=5e-3)
    levels = extract_level_sets(sol, [0.3, 0.6])
    assert np.allclose(levels.fluxes, sol.capacity, rtol=2e-2)
    assert np.all(levels.min_gradient > 0)

    store = ReportStore(tmp_path, "spheroid")
    path = store.write_field("01-capacity", sol.potential, "f" * 64)
    field = read_field(path)
    assert (field["n_rho"], field["n_mu"]) == (128, 64)
    assert np.array_equal(field["phi"], sol.potential.phi)
    assert (tmp_path / "spheroid" / "data" / "01-capacity-field.csv").exists()


@pytest.mark.smoke
@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("factor", [0.25, 1.0, 8.0])
def test_radial_capacity_on_both_sides_of_horizon(m: float, factor: float) -> None:
    r0 = factor * 0.5 * m
    metric = _schwarzschild(m, r_start=min(0.5 * m, r0))

    assert capacity_radial(metric, r0).capacity == pytest.approx(r0 + 0.5 * m, rel=1e-8)
    assert capacity_harmonically_flat(metric, r0) == pytest.approx(r0 + 0.5 * m, rel=1e-12)
