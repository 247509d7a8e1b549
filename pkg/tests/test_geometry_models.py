from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from caplab.capacity_solver import capacity_radial
from caplab.geometry_models import (
    AdmFitError,
    CoordinateSphere,
    DomainError,
    RadialConformalMetric,
    SchwarzschildSpec,
    WarpedProductMetric,
    adm_mass,
    area_radius,
    capacity_from_area_radius,
    euclidean_mean_curvature_round,
    kelvin_invert,
    load_warped_csv,
    locate_horizon,
    mean_curvature_sphere,
    scalar_curvature_radial,
    schwarzschild_metric,
    schwarzschild_potential,
    signed_volume_function,
)
from caplab.profiles import PowerSeriesProfile


def _flat(r_b: float = 1.0) -> RadialConformalMetric:
    return RadialConformalMetric(u=PowerSeriesProfile.from_mapping({0.0: 1.0}), r_b=r_b)


@pytest.mark.smoke
def test_horizon_sphere_closed_forms() -> None:
    spec = SchwarzschildSpec(2.0)
    horizon = CoordinateSphere(1.0)

    assert area_radius(spec, horizon) == pytest.approx(4.0)
    assert mean_curvature_sphere(spec, horizon) == pytest.approx(0.0, abs=1e-15)
    assert capacity_from_area_radius(2.0, 4.0) == pytest.approx(2.0)


@pytest.mark.parametrize("r0", [0.5, 1.0, 2.0, 5.0])
def test_capacity_from_area_radius_matches_coordinate_form(r0: float) -> None:
    m = 2.0
    spec = SchwarzschildSpec(m)
    r_a = area_radius(spec, CoordinateSphere(r0))

    outside = r0 >= 0.5 * m
    assert capacity_from_area_radius(m, r_a, outside=outside) == pytest.approx(r0 + 0.5 * m, rel=1e-12)


def test_capacity_below_horizon_area_fails() -> None:
    with pytest.raises(DomainError, match="below the horizon"):
        capacity_from_area_radius(2.0, 3.0)


def test_negative_mass_needs_domain_start() -> None:
    with pytest.raises(DomainError, match="r_min is required"):
        SchwarzschildSpec(-1.0)
    with pytest.raises(DomainError, match="must exceed"):
        SchwarzschildSpec(-1.0, r_min=0.4)

    spec = SchwarzschildSpec(-1.0, r_min=1.0)
    with pytest.raises(DomainError, match="outside the domain"):
        area_radius(spec, CoordinateSphere(0.8))


def test_potential_is_one_on_the_sphere_and_decays() -> None:
    spec = SchwarzschildSpec(2.0)
    values = schwarzschild_potential(spec, 2.0, np.array([2.0, 5.0, 1e6]))

    assert values[0] == pytest.approx(1.0)
    assert values[1] == pytest.approx(0.5)
    assert values[2] * 1e6 == pytest.approx(3.0, rel=1e-5)


def test_schwarzschild_is_scalar_flat_with_adm_mass_m() -> None:
    metric = schwarzschild_metric(SchwarzschildSpec(2.0))

    curvature = scalar_curvature_radial(metric, np.geomspace(1.0, 1e3, 16))
    assert np.max(np.abs(curvature)) < 1e-12
    assert adm_mass(metric) == pytest.approx(2.0, rel=1e-10)


def test_adm_mass_ignores_faster_decaying_terms() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -1.0: 1.0, -2.0: 1.0})
    metric = RadialConformalMetric(u=u, r_b=1.0)

    assert adm_mass(metric) == pytest.approx(2.0, rel=1e-8)


def test_adm_fit_fails_for_slow_decay() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -0.6: 1.0})
    metric = RadialConformalMetric(u=u, r_b=1.0, tau=0.6)

    with pytest.raises(AdmFitError, match="not converged"):
        adm_mass(metric)


def test_locate_horizon_finds_minimal_sphere() -> None:
    metric = schwarzschild_metric(SchwarzschildSpec(2.0), r_start=0.25)

    assert locate_horizon(metric) == pytest.approx(1.0, abs=1e-10)
    assert locate_horizon(_flat()) is None


def test_signed_volume_changes_sign_at_horizon() -> None:
    metric = schwarzschild_metric(SchwarzschildSpec(2.0), r_start=0.25)
    volume = signed_volume_function(metric)

    values = volume(np.array([0.5, 1.0, 2.0]))
    assert values[0] < 0.0
    assert values[1] == pytest.approx(0.0, abs=1e-8)
    assert values[2] > 0.0


def test_flat_signed_volume_is_ball_volume() -> None:
    volume = signed_volume_function(_flat(0.5))

    assert volume(2.0)[0] == pytest.approx(4.0 * math.pi * 8.0 / 3.0, rel=1e-12)


def test_kelvin_inversion_of_schwarzschild() -> None:
    metric = schwarzschild_metric(SchwarzschildSpec(2.0))
    v = kelvin_invert(metric)

    assert v.value(0.25) == pytest.approx(4.0 + 1.0)


def test_warped_product_from_conformal_matches_sphere_curvature() -> None:
    spec = SchwarzschildSpec(2.0)
    warped = schwarzschild_metric(spec).to_warped()

    for r0 in (1.0, 2.0, 7.5):
        assert float(warped.mean_curvature(r0)) == pytest.approx(
            mean_curvature_sphere(spec, CoordinateSphere(r0)), abs=1e-14
        )


def test_metric_rejects_non_positive_factor() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -1.0: -1.0})

    with pytest.raises(DomainError, match="positive"):
        RadialConformalMetric(u=u, r_b=0.5)


def test_warped_csv_flat_metric(tmp_path: Path) -> None:
    path = tmp_path / "warped.csv"
    rows = ["r,f,h"] + [f"{r},1.0,{r}" for r in np.linspace(1.0, 5.0, 9).tolist()]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")

    metric = load_warped_csv(path)

    assert isinstance(metric, WarpedProductMetric)
    assert float(metric.h(20.0)) == pytest.approx(20.0)
    assert float(metric.mean_curvature(2.0)) == pytest.approx(1.0, rel=1e-6)
    assert capacity_radial(metric, 1.0).capacity == pytest.approx(1.0, rel=1e-8)


def test_warped_csv_needs_enough_rows(tmp_path: Path) -> None:
    path = tmp_path / "warped.csv"
    path.write_text("1,1,1\n2,1,2\n", encoding="utf-8")

    with pytest.raises(DomainError, match="four"):
        load_warped_csv(path)


def test_locate_horizon_of_perturbed_profile() -> None:
    # (u^2 r)' = 0 reduces to r^3 - r^2 + 0.1 = 0.
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -1.0: 1.0, -3.0: -0.02})
    horizon = locate_horizon(RadialConformalMetric(u=u, r_b=0.3))

    assert horizon is not None
    assert horizon**3 - horizon**2 + 0.1 == pytest.approx(0.0, abs=1e-10)
    assert horizon > 0.8


def test_locate_horizon_without_critical_sphere() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0, -1.0: 1.0, -3.0: -0.05})

    assert locate_horizon(RadialConformalMetric(u=u, r_b=0.3)) is None


def test_euclidean_mean_curvature_of_round_sphere() -> None:
    assert euclidean_mean_curvature_round(4.5) == pytest.approx(2.0 / 4.5)
    with pytest.raises(DomainError, match="positive"):
        euclidean_mean_curvature_round(0.0)
