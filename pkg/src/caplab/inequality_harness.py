"""One verifier per capacity inequality.

Every verifier evaluates its hypotheses first and both sides second, and
returns an InequalityReport. A report whose hypotheses fail never claims to
be satisfied; it only records the values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import optimize

from caplab.capacity_solver import (
    AxisymDomainSpec,
    BoundaryGradient,
    CLOSED_FORM_TOLERANCE,
    CapacitySolution,
    LevelSetError,
    boundary_gradient,
    capacity_axisym_fd,
    capacity_radial,
    extract_level_sets,
)
from caplab.geometry_models import (
    CoordinateSphere,
    RadialConformalMetric,
    SchwarzschildSpec,
    adm_mass,
    euclidean_mean_curvature_round,
    locate_horizon,
    scalar_curvature_radial,
)
from caplab.meridian import MeridianCurve
from caplab.profiles import PowerSeriesProfile
from caplab.quasilocal import (
    LambdaUnavailableError,
    QuasiLocalReport,
    schwarzschild_sphere_report,
    surface_report,
)
from caplab.symmetrization import IsoperimetricProfile, enclosed_signed_volume


class HarnessError(ValueError):
    """Raised for inputs a verifier cannot evaluate (mixed conventions, invalid signs)."""


_logger = logging.getLogger("InequalityHarness")

DIRECTIONS = ("<=", ">=")
_NUMERIC_REPORT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class InequalityReport:
    """lhs <direction> rhs, with the gap oriented so that satisfied means gap >= -tolerance."""

    name: str
    hypotheses: Tuple[Tuple[str, bool], ...]
    lhs: float
    rhs: float
    direction: str = "<="
    tolerance: float = CLOSED_FORM_TOLERANCE
    path: str = "closed-form"
    notes: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise HarnessError(f"Unknown direction {self.direction!r}")

    @property
    def gap(self) -> float:
        if self.direction == "<=":
            return self.rhs - self.lhs
        return self.lhs - self.rhs

    @property
    def hypotheses_hold(self) -> bool:
        return all(holds for _, holds in self.hypotheses)

    @property
    def equality(self) -> bool:
        return abs(self.gap) <= self.tolerance

    @property
    def satisfied(self) -> bool:
        return self.hypotheses_hold and self.gap >= -self.tolerance

    @property
    def violated(self) -> bool:
        return self.hypotheses_hold and self.gap < -self.tolerance

    @property
    def status(self) -> str:
        if not self.hypotheses_hold:
            return "hypothesis-failed"
        return "satisfied" if self.satisfied else "violated"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "hypotheses": [{"condition": text, "holds": bool(holds)} for text, holds in self.hypotheses],
            "lhs": self.lhs,
            "rhs": self.rhs,
            "direction": self.direction,
            "gap": self.gap,
            "tolerance": self.tolerance,
            "equality": self.equality,
            "satisfied": self.satisfied,
            "status": self.status,
            "path": self.path,
            "notes": dict(self.notes),
        }


def _require_normal(report: QuasiLocalReport, normal: str, name: str) -> None:
    if report.normal != normal:
        raise HarnessError(f"{name} needs a surface report with normal={normal!r}, got {report.normal!r}")


def _tolerance(sol: CapacitySolution, report: QuasiLocalReport, factor: float = 1.0) -> float:
    tol = factor * sol.tolerance
    if report.path != "closed-form":
        tol += _NUMERIC_REPORT_TOLERANCE * max(1.0, report.area_radius)
    return max(tol, CLOSED_FORM_TOLERANCE)


def _path(sol: CapacitySolution, report: QuasiLocalReport) -> str:
    return f"{sol.method}/{report.path}"


def verify_lc1(sol: CapacitySolution, report: QuasiLocalReport) -> InequalityReport:
    """2C <= Lambda + (1/8pi) int H, under H < 4|grad phi| on the boundary."""
    _require_normal(report, "infinity", "verify_lc1")
    if report.lambda_value is None:
        raise LambdaUnavailableError(f"Lambda unavailable for {report.label}")
    gradient = boundary_gradient(sol)
    return InequalityReport(
        name="lc1",
        hypotheses=(("H < 4|grad phi| on the boundary", gradient.margin_capacity() > 0.0),),
        lhs=2.0 * sol.capacity,
        rhs=report.lambda_value + report.total_H_g / (8.0 * math.pi),
        direction="<=",
        tolerance=_tolerance(sol, report, factor=2.0),
        path=_path(sol, report),
        notes={"hypothesis_margin": gradient.margin_capacity()},
    )


def verify_lc2(
    sol: CapacitySolution,
    c: float,
    level_report: QuasiLocalReport,
    level_tolerance: float = 1e-6,
) -> InequalityReport:
    """C/c <= Lambda(S_c) - (1/8pi) int_{S_c} H for the level set S_c = {(2 - phi)/2 = c}."""
    _require_normal(level_report, "compact", "verify_lc2")
    if level_report.lambda_value is None:
        raise LambdaUnavailableError(f"Lambda unavailable for {level_report.label}")
    threshold = 2.0 - 2.0 * c
    c_valid = 0.5 < c < 1.0
    boundary = boundary_gradient(sol)
    boundary_scale = 1.0 / sol.boundary.extent()[1]
    boundary_ok = float(np.max(boundary.mean_curvature)) <= max(sol.tolerance, 1e-8) * boundary_scale

    regular = False
    is_level_set = False
    level_margin = None
    level_area = None
    if c_valid:
        try:
            levels = extract_level_sets(sol, [threshold])
            level_area = float(levels.areas[0])
            level_margin = boundary_gradient(sol, level=threshold).margin_level()
            regular = True
            is_level_set = abs(level_area - level_report.area) <= level_tolerance * level_area
        except LevelSetError as exc:
            _logger.info("Level u=%s is not regular: %s", c, exc)

    return InequalityReport(
        name="lc2",
        hypotheses=(
            ("c in (1/2, 1)", c_valid),
            ("boundary has H <= 0", boundary_ok),
            ("c is a regular value of u", regular),
            ("surface is the level set u = c", is_level_set),
            ("H > -4|grad log u| on the level set", bool(level_margin is not None and level_margin > 0.0)),
        ),
        lhs=sol.capacity / c,
        rhs=level_report.lambda_value - level_report.total_H_g / (8.0 * math.pi),
        direction="<=",
        tolerance=_tolerance(sol, level_report, factor=1.0 / c),
        path=_path(sol, level_report),
        notes={"c": c, "phi_level": threshold, "level_area": level_area, "report_area": level_report.area},
    )


def verify_bray_miao(sol: CapacitySolution, report: QuasiLocalReport) -> InequalityReport:
    """C <= sqrt(|S|/16pi) (1 + sqrt((1/16pi) int H^2))."""
    _require_normal(report, "infinity", "verify_bray_miao")
    rhs = math.sqrt(report.area / (16.0 * math.pi)) * (
        1.0 + math.sqrt(report.total_H_g_sq / (16.0 * math.pi))
    )
    return InequalityReport(
        name="bray_miao",
        hypotheses=(("connected boundary", True),),
        lhs=sol.capacity,
        rhs=rhs,
        direction="<=",
        tolerance=_tolerance(sol, report),
        path=_path(sol, report),
    )


def verify_mass_capacity_and_penrose(
    metric: RadialConformalMetric, boundary_radius: Optional[float] = None
) -> Tuple[InequalityReport, InequalityReport]:
    """C <= m_ADM and sqrt(|S_H|/16pi) <= m_ADM at the outermost horizon."""
    radii = np.geomspace(metric.r_b, 1e4 * metric.r_b, 256)
    curvature = scalar_curvature_radial(metric, radii)
    scale = np.abs(metric.u.second(radii)) + np.abs(metric.u.first(radii) / radii)
    nonnegative = bool(np.all(curvature >= -1e-10 * np.maximum(scale, 1.0)))

    horizon = locate_horizon(metric)
    if horizon is None:
        raise HarnessError("No horizon found; mass-capacity and Penrose checks need one")
    radius = horizon if boundary_radius is None else float(boundary_radius)
    at_horizon = abs(radius - horizon) <= 1e-9 * horizon
    mass = adm_mass(metric)

    sol = capacity_radial(metric.to_warped(), radius)
    area = 4.0 * math.pi * float(metric.u.value(radius)) ** 4 * radius**2
    hypotheses = (
        ("scalar curvature R(g) >= 0", nonnegative),
        ("boundary is the outermost horizon", at_horizon),
    )
    notes = {"horizon_radius": horizon, "boundary_radius": radius, "adm_mass": mass}
    if not at_horizon:
        notes["flag"] = "hypothesis violated: boundary not a horizon"
    tolerance = max(sol.tolerance, 1e-8 * max(1.0, mass))
    return (
        InequalityReport(
            name="mass_capacity",
            hypotheses=hypotheses,
            lhs=sol.capacity,
            rhs=mass,
            tolerance=tolerance,
            path="radial",
            notes=dict(notes),
        ),
        InequalityReport(
            name="penrose",
            hypotheses=hypotheses,
            lhs=math.sqrt(area / (16.0 * math.pi)),
            rhs=mass,
            tolerance=tolerance,
            path="radial",
            notes=dict(notes),
        ),
    )


def verify_capacity_upper_bounds(sol: CapacitySolution, report: QuasiLocalReport) -> InequalityReport:
    """The total Euclidean mean curvature bound that applies to the boundary data."""
    _require_normal(report, "infinity", "verify_capacity_upper_bounds")
    if report.total_H_g0 is None:
        raise HarnessError(f"{report.label} has no flat embedding; int H_0 is unavailable")
    gradient = boundary_gradient(sol)
    h = gradient.mean_curvature
    scale = 1.0 / report.area_radius
    positive_k = bool(report.min_gauss_curvature is not None and report.min_gauss_curvature > 0)
    metric = sol.conformal_metric
    flat = metric is not None and metric.is_flat

    if float(np.max(np.abs(h))) <= max(sol.tolerance, 1e-8) * scale:
        name, factor = "capacity_horizon_bound", 16.0
        hypotheses = (("boundary is minimal (H = 0)", True), ("Gauss curvature > 0", positive_k))
    elif flat and float(np.min(h)) > 0:
        name, factor = "szego", 8.0
        hypotheses = (("flat ambient metric", True), ("boundary is convex", positive_k and float(np.min(h)) > 0))
    elif float(np.min(h)) > 0 and gradient.margin_capacity() > 0:
        name, factor = "capacity_mean_convex_bound", 8.0
        hypotheses = (("0 < H < 4|grad phi| on the boundary", True), ("Gauss curvature > 0", positive_k))
    else:
        raise HarnessError(
            f"No capacity upper bound applies to {report.label}: "
            f"H in [{np.min(h):.4g}, {np.max(h):.4g}], margin {gradient.margin_capacity():.4g}"
        )
    return InequalityReport(
        name=name,
        hypotheses=hypotheses,
        lhs=sol.capacity,
        rhs=report.total_H_g0 / (factor * math.pi),
        direction="<=",
        tolerance=_tolerance(sol, report),
        path=_path(sol, report),
    )


def _report_for(spec: SchwarzschildSpec, curve: MeridianCurve, sol: CapacitySolution, normal: str) -> QuasiLocalReport:
    if curve.is_round:
        return schwarzschild_sphere_report(spec, CoordinateSphere(float(curve.coefficients[0])), normal=normal)
    return surface_report(sol, curve, normal=normal)


def verify_schwarzschild_corollaries(
    sol: CapacitySolution, m: float, c: float = 0.75
) -> Tuple[InequalityReport, InequalityReport]:
    """Total mean curvature and Brown-York comparisons of S with its symmetric counterpart S*."""
    spec = SchwarzschildSpec(m)
    profile = IsoperimetricProfile(m)
    curve = sol.boundary
    volume = enclosed_signed_volume(profile, curve)
    r_star = profile.radius_for_volume(volume)
    gradient = boundary_gradient(sol)
    report = _report_for(spec, curve, sol, "infinity")
    positive_k = bool(report.min_gauss_curvature is not None and report.min_gauss_curvature > 0)
    encloses = curve.extent()[0] >= 0.5 * m * (1.0 - 1e-12)

    if report.total_H_g0 is None:
        raise HarnessError(f"{report.label} has no flat embedding")
    total_mean = InequalityReport(
        name="total_mean_curvature_symmetric",
        hypotheses=(
            ("boundary encloses the horizon", encloses),
            ("H < 4|grad phi| on the boundary", gradient.margin_capacity() > 0.0),
            ("Gauss curvature > 0", positive_k),
        ),
        lhs=2.0 * r_star + m,
        rhs=(report.total_H_g0 + report.total_H_g) / (8.0 * math.pi),
        direction="<=",
        tolerance=_tolerance(sol, report, factor=2.0),
        path=_path(sol, report),
        notes={"signed_volume": volume, "symmetric_radius": r_star},
    )

    brown_york = _brown_york_symmetric(sol, spec, profile, c, gradient)
    return total_mean, brown_york


def _brown_york_symmetric(
    sol: CapacitySolution,
    spec: SchwarzschildSpec,
    profile: IsoperimetricProfile,
    c: float,
    gradient: BoundaryGradient,
) -> InequalityReport:
    """m_BY(S_c) against the round sphere S_c* with the signed volume of the level set S_c itself."""
    m = spec.m
    threshold = 2.0 - 2.0 * c
    weakly_trapped = float(np.max(gradient.mean_curvature)) <= max(sol.tolerance, 1e-8) / sol.boundary.extent()[1]
    level_report = None
    level_margin = None
    r_c_star = by_star = None
    rhs = float("nan")
    try:
        levels = extract_level_sets(sol, [threshold])
        level_curve = levels.curves[0]
        if level_curve is not None:
            level_volume = enclosed_signed_volume(profile, level_curve)
        else:
            level_volume = levels.contours[0].enclosed_volume(profile.volume)
        r_c_star = profile.radius_for_volume(level_volume)
        by_star = m * (1.0 + 0.5 * m / r_c_star)
        # (1/c - 1) * (m_BY* / m - 1)^-1 * m_BY* reduces to this for m > 0.
        rhs = 2.0 * (1.0 / c - 1.0) * (r_c_star + 0.5 * m)
        level_report = _report_for(spec, levels.curve(0), sol, "compact")
        level_margin = boundary_gradient(sol, level=threshold).margin_level()
    except LevelSetError as exc:
        _logger.info("Level set u=%s unavailable: %s", c, exc)
    lhs = None if level_report is None else level_report.brown_york
    positive_k = bool(
        level_report is not None
        and level_report.min_gauss_curvature is not None
        and level_report.min_gauss_curvature > 0.0
    )
    return InequalityReport(
        name="brown_york_symmetric",
        hypotheses=(
            ("c in (1/2, 1)", 0.5 < c < 1.0),
            ("boundary weakly outer trapped (H <= 0)", weakly_trapped),
            ("level set is regular with H > -4|grad log u|", bool(level_margin is not None and level_margin > 0)),
            ("level set has positive Gauss curvature", positive_k),
            ("level set has a flat embedding", lhs is not None),
        ),
        lhs=float("nan") if lhs is None else lhs,
        rhs=rhs,
        direction=">=",
        tolerance=sol.tolerance if level_report is None else _tolerance(sol, level_report, factor=max(1.0, m) / c),
        path=sol.method,
        notes={"symmetric_level_radius": r_c_star, "symmetric_brown_york": by_star, "c": c},
    )


def verify_capacity_hawking_bounds(
    sol: CapacitySolution, report: QuasiLocalReport, m: float
) -> Tuple[InequalityReport, InequalityReport]:
    """Two-sided bound of C through area radius and Hawking mass of S* (below) and S (above)."""
    _require_normal(report, "infinity", "verify_capacity_hawking_bounds")
    profile = IsoperimetricProfile(m)
    volume = enclosed_signed_volume(profile, sol.boundary)
    r_star = profile.radius_for_volume(volume)
    star = schwarzschild_sphere_report(SchwarzschildSpec(m), CoordinateSphere(r_star))
    lower = 0.5 * star.area_radius * (1.0 + math.sqrt(max(1.0 - 2.0 * star.hawking / star.area_radius, 0.0)))
    upper = 0.5 * report.area_radius * (1.0 + math.sqrt(max(1.0 - 2.0 * report.hawking / report.area_radius, 0.0)))
    encloses = sol.boundary.extent()[0] >= 0.5 * m * (1.0 - 1e-12)
    tolerance = _tolerance(sol, report)
    return (
        InequalityReport(
            name="capacity_hawking_lower",
            hypotheses=(("boundary encloses the horizon", encloses),),
            lhs=sol.capacity,
            rhs=lower,
            direction=">=",
            tolerance=tolerance,
            path=_path(sol, report),
            notes={"symmetric_radius": r_star, "symmetric_hawking": star.hawking},
        ),
        InequalityReport(
            name="capacity_hawking_upper",
            hypotheses=(("boundary encloses the horizon", encloses),),
            lhs=sol.capacity,
            rhs=upper,
            direction="<=",
            tolerance=tolerance,
            path=_path(sol, report),
            notes={"hawking": report.hawking},
        ),
    )


def verify_shi_tam(report: QuasiLocalReport, metric: Optional[RadialConformalMetric] = None) -> InequalityReport:
    """int H_g <= int H_0 for a mean-convex sphere with positive Gauss curvature."""
    _require_normal(report, "infinity", "verify_shi_tam")
    if report.total_H_g0 is None:
        raise HarnessError(f"{report.label} has no flat embedding")
    hypotheses = [
        ("H > 0", bool(report.min_H_g is not None and report.min_H_g > 0)),
        ("Gauss curvature > 0", bool(report.min_gauss_curvature is not None and report.min_gauss_curvature > 0)),
    ]
    if metric is not None:
        radii = np.geomspace(metric.r_b, 1e4 * metric.r_b, 128)
        hypotheses.append(
            ("exterior scalar curvature >= 0", bool(np.all(scalar_curvature_radial(metric, radii) >= -1e-10)))
        )
    tolerance = CLOSED_FORM_TOLERANCE if report.path == "closed-form" else _NUMERIC_REPORT_TOLERANCE
    return InequalityReport(
        name="shi_tam",
        hypotheses=tuple(hypotheses),
        lhs=report.total_H_g / (8.0 * math.pi),
        rhs=report.total_H_g0 / (8.0 * math.pi),
        direction="<=",
        tolerance=tolerance * max(1.0, report.area_radius),
        path=report.path,
    )


def _rigidity_polynomial(A: float, b: float, c: float, n: int):
    def f(x: float) -> float:
        return A * (2.0 - n) * x ** (2.0 - n) + b * x + c * (n - 1.0)

    def df(x: float) -> float:
        return A * (2.0 - n) ** 2 * x ** (1.0 - n) + b

    return f, df


def rigidity_radius(A: float, b: float, c: float, n: int = 3) -> float:
    """Unique positive root of A(2-n) r^(2-n) + b r + c(n-1), which is increasing in r."""
    if not A > 0 or b < 0 or not c > 0 or n < 3:
        raise HarnessError(f"Need A > 0, b >= 0, c > 0 and n >= 3; got A={A}, b={b}, c={c}, n={n}")
    if b == 0:
        return (A * (n - 2.0) / (c * (n - 1.0))) ** (1.0 / (n - 2.0))
    f, df = _rigidity_polynomial(A, b, c, n)
    lo, hi = 1.0, 1.0
    while f(lo) > 0:
        lo *= 0.5
    while f(hi) < 0:
        hi *= 2.0
    root = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        root -= f(root) / df(root)
    return float(root)


@dataclass(frozen=True, eq=False)
class BlowdownData:
    """Boundary data of a flat domain with a harmonic pole psi ~ A/|y| at the origin."""

    theta: np.ndarray
    normal_derivative: np.ndarray
    mean_curvature: np.ndarray
    enclosing_radius: float
    enclosed_radius: float
    A: float
    label: str = "blowdown"
    tolerance: float = 1e-10


def schwarzschild_blowdown(spec: SchwarzschildSpec, r0: float) -> BlowdownData:
    """The exterior of {r = r0} blown down by phi^4 is the flat ball of radius (r0 + m/2)^2 / r0."""
    b = r0 + 0.5 * spec.m
    a = b**2 / r0
    return BlowdownData(
        theta=np.array([0.5 * math.pi]),
        normal_derivative=np.array([-b / a**2]),
        mean_curvature=np.array([euclidean_mean_curvature_round(a)]),
        enclosing_radius=a,
        enclosed_radius=a,
        A=b,
        label=f"blowdown(m={spec.m:g}, r0={r0:g})",
    )


def blowdown_boundary(sol: CapacitySolution, A: float) -> BlowdownData:
    """Blowdown data of the flat domain whose Kelvin image is the solved exterior.

    With x = y/|y|^2 and phi' the flat capacity potential of the inverted
    boundary, psi(y) = A |y|^-1 (1 - phi'(x)) vanishes on the domain boundary,
    and d_nu psi = -A |x|^3 |grad phi'(x)|.
    """
    metric = sol.conformal_metric
    if metric is None or not metric.is_flat:
        raise HarnessError("blowdown_boundary needs a flat exterior solution")
    gradient = boundary_gradient(sol)
    theta = gradient.theta
    r_x = sol.boundary.radius(theta)
    domain = sol.boundary.inverted()
    r_min, r_max = domain.extent()
    return BlowdownData(
        theta=theta,
        normal_derivative=-A * r_x**3 * gradient.grad_phi,
        mean_curvature=domain.euclidean_mean_curvature(theta),
        enclosing_radius=r_max,
        enclosed_radius=r_min,
        A=A,
        label=f"blowdown({domain.label})",
        tolerance=max(5.0 * sol.grid_error / sol.capacity, 1e-10),
    )


def solve_blowdown(domain: MeridianCurve, A: float, grid: Tuple[int, int] = (256, 128)) -> BlowdownData:
    """Solve the inverted exterior problem for a star-shaped flat domain and return its blowdown data."""
    inverted = domain.inverted()
    flat = RadialConformalMetric(u=PowerSeriesProfile.from_mapping({0.0: 1.0}), r_b=inverted.extent()[0])
    sol = capacity_axisym_fd(AxisymDomainSpec(boundary_curve=inverted, metric=flat, grid=grid))
    return blowdown_boundary(sol, A)


def rigidity_reports(data: BlowdownData, A: float, c: float, n: int = 3) -> Tuple[InequalityReport, InequalityReport]:
    """sup(d_nu psi + c H) and inf(d_nu psi + c H) against their enclosing- and enclosed-radius bounds."""
    if data is None or data.normal_derivative.size == 0:
        raise HarnessError("Boundary bounds need solved blowdown data")
    if not A > 0 or not c > 0:
        raise HarnessError(f"Need A > 0 and c > 0; got A={A}, c={c}")
    q = data.normal_derivative + c * data.mean_curvature
    big_r, small_r = data.enclosing_radius, data.enclosed_radius
    sup_bound = A * (2.0 - n) * big_r ** (1.0 - n) + c * (n - 1.0) / big_r
    inf_bound = A * (2.0 - n) * small_r ** (1.0 - n) + c * (n - 1.0) / small_r
    tolerance = data.tolerance * max(abs(sup_bound), abs(inf_bound), 1.0)
    notes = {"A": A, "c": c, "n": n, "enclosing_radius": big_r, "enclosed_radius": small_r}
    hypotheses = (("A > 0 and c > 0", True),)
    return (
        InequalityReport(
            name="boundary_sup_bound",
            hypotheses=hypotheses,
            lhs=float(np.max(q)),
            rhs=sup_bound,
            direction=">=",
            tolerance=tolerance,
            path=data.label,
            notes=notes,
        ),
        InequalityReport(
            name="boundary_inf_bound",
            hypotheses=hypotheses,
            lhs=float(np.min(q)),
            rhs=inf_bound,
            direction="<=",
            tolerance=tolerance,
            path=data.label,
            notes=notes,
        ),
    )


def rigidity_bounds_check(data: BlowdownData, A: float, c: float, n: int = 3) -> Tuple[float, float]:
    """(sup-side, inf-side) residuals of the boundary bounds on d_nu psi + c H; both must be >= 0."""
    upper, lower = rigidity_reports(data, A, c, n)
    if not (upper.satisfied and lower.satisfied):
        raise HarnessError(
            f"Boundary bounds fail for {data.label}: sup residual {upper.gap:.3e}, inf residual {lower.gap:.3e}"
        )
    return upper.gap, lower.gap
