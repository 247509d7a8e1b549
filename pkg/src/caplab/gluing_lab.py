"""Schwarzschild exteriors glued onto smaller Schwarzschild annuli.

The exterior of the m-horizon is attached along that horizon to the annulus
m'/2 <= r <= r' of Schwarzschild mass m' < m, where r' is the coordinate
sphere with the same area. The result has a Lipschitz metric, ADM mass m and
a boundary that is the round m'-horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Tuple

import numpy as np
from scipy import optimize

from caplab.geometry_models import (
    CoordinateSphere,
    SchwarzschildSpec,
    adm_mass,
    area_radius,
    mean_curvature_sphere,
    schwarzschild_metric,
)
from caplab.inequality_harness import InequalityReport
from caplab.quasilocal import RevolutionSurfaceMetric, lambda_invariant


class GluingError(ValueError):
    """Raised for mass pairs that do not define a glued manifold."""


_logger = logging.getLogger("GluingLab")

INTERFACE_TOLERANCE = 1e-10


def _check_masses(m: float, m_prime: float) -> None:
    if not (m > m_prime > 0):
        raise GluingError(f"Gluing needs m > m' > 0, got m={m}, m'={m_prime}")


def solve_interface_radius(m: float, m_prime: float) -> float:
    """Root r' > m'/2 of (1 + m'/2r)^2 r = 2m."""
    _check_masses(m, m_prime)
    half = 0.5 * m_prime

    def mismatch(r: float) -> float:
        return (1.0 + half / r) ** 2 * r - 2.0 * m

    # u^2 r equals 2m' < 2m at r = m'/2 and grows linearly beyond.
    hi = max(2.0 * m, 1.0)
    while mismatch(hi) < 0:
        hi *= 2.0
    root = optimize.brentq(mismatch, half, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    residual = abs(mismatch(root))
    if residual > 1e-12 * max(1.0, m):
        raise GluingError(f"Interface radius residual {residual:.3e} for m={m}, m'={m_prime}")
    return float(root)


@dataclass(frozen=True)
class GluedManifold:
    m: float
    m_prime: float
    interface_radius: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "interface_radius", solve_interface_radius(self.m, self.m_prime))

    @property
    def outer(self) -> SchwarzschildSpec:
        return SchwarzschildSpec(self.m)

    @property
    def inner(self) -> SchwarzschildSpec:
        return SchwarzschildSpec(self.m_prime)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "m_prime": self.m_prime,
            "interface_radius": self.interface_radius,
            "diagnostics": interface_diagnostics(self),
        }


@dataclass(frozen=True)
class CornerReport:
    """Mean curvatures of the interface seen from the outer (+) and inner (-) side."""

    h_plus: float
    h_minus: float
    mirror: bool = False

    @property
    def jump(self) -> float:
        return self.h_minus - self.h_plus

    @property
    def passes(self) -> bool:
        return self.h_plus <= self.h_minus

    def to_dict(self) -> dict:
        return {
            "h_plus": self.h_plus,
            "h_minus": self.h_minus,
            "jump": self.jump,
            "passes": self.passes,
            "mirror": self.mirror,
        }


def corner_jump_check(glued: GluedManifold, mirror: bool = False) -> CornerReport:
    """H+ <= H- at the interface, both for the normal pointing to the outer end.

    The mirror variant attaches the pieces the other way round (the r'-sphere
    faces outward and the m-horizon inward), which breaks the condition.
    """
    horizon = mean_curvature_sphere(glued.outer, CoordinateSphere(0.5 * glued.m))
    interface = mean_curvature_sphere(glued.inner, CoordinateSphere(glued.interface_radius))
    if mirror:
        report = CornerReport(h_plus=interface, h_minus=horizon, mirror=True)
    else:
        report = CornerReport(h_plus=horizon, h_minus=interface)
    _logger.debug("Corner check m=%g m'=%g: %s", glued.m, glued.m_prime, report.to_dict())
    return report


def interface_diagnostics(glued: GluedManifold) -> dict:
    """Matching of the two sides at the interface.

    Each side induces u^4 r^2 times the unit round metric on its interface
    sphere; the pieces glue isometrically when these coefficients agree.
    """
    outer_r = 0.5 * glued.m
    inner_r = glued.interface_radius
    outer_u4 = float(glued.outer.conformal_factor(outer_r)) ** 4
    inner_u4 = float(glued.inner.conformal_factor(inner_r)) ** 4
    outer_coefficient = outer_u4 * outer_r**2
    inner_coefficient = inner_u4 * inner_r**2
    coefficient_mismatch = abs(outer_coefficient - inner_coefficient) / outer_coefficient

    outer_radius = area_radius(glued.outer, CoordinateSphere(outer_r))
    inner_radius = area_radius(glued.inner, CoordinateSphere(inner_r))
    outer_area = 4.0 * math.pi * outer_radius**2
    inner_area = 4.0 * math.pi * inner_radius**2
    area_mismatch = abs(outer_area - inner_area) / outer_area
    mass = adm_mass(schwarzschild_metric(glued.outer))
    return {
        "u4_outer": outer_u4,
        "u4_inner": inner_u4,
        "metric_coefficient_outer": outer_coefficient,
        "metric_coefficient_inner": inner_coefficient,
        "metric_mismatch": coefficient_mismatch,
        "area_mismatch": area_mismatch,
        "area_radius_jump": abs(outer_radius - inner_radius),
        "adm_mass": mass,
        "isometric_interface": max(coefficient_mismatch, area_mismatch) <= INTERFACE_TOLERANCE,
    }


def adm_vs_lambda(glued: GluedManifold) -> InequalityReport:
    """m_ADM = m against half of Lambda of the boundary, the round m'-horizon."""
    corner = corner_jump_check(glued)
    boundary = area_radius(glued.inner, CoordinateSphere(0.5 * glued.m_prime))
    half_lambda = 0.5 * boundary
    return InequalityReport(
        name="adm_vs_lambda",
        hypotheses=(("corner condition H+ <= H-", corner.passes),),
        lhs=glued.m,
        rhs=half_lambda,
        direction=">=",
        notes={"m_prime": glued.m_prime, "interface_radius": glued.interface_radius, "boundary_area_radius": boundary},
    )


def minkowski_gap(metric: RevolutionSurfaceMetric) -> InequalityReport:
    """sqrt(|S|/16pi) <= Lambda/2 for a positive Gauss curvature sphere."""
    half_lambda = 0.5 * lambda_invariant(metric)
    return InequalityReport(
        name="minkowski",
        hypotheses=(("Gauss curvature > 0", True),),
        lhs=math.sqrt(metric.area / (16.0 * math.pi)),
        rhs=half_lambda,
        direction="<=",
        tolerance=1e-8 * max(1.0, metric.area_radius),
        path="embedding",
        notes={"label": metric.label},
    )


def glue_summary(m: float, m_prime: float) -> Tuple[GluedManifold, CornerReport, InequalityReport]:
    glued = GluedManifold(m, m_prime)
    return glued, corner_jump_check(glued), adm_vs_lambda(glued)
