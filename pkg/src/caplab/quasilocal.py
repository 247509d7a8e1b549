"""Surface geometry and quasi-local masses of axisymmetric spheres.

A closed axisymmetric surface carries the metric ds^2 + rho(s)^2 dtheta^2 with
s the meridian arclength. rho is stored as a Chebyshev series on [0, L].
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import logging
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.typing import ArrayLike

from caplab.capacity_solver import CapacitySolution
from caplab.geometry_models import (
    CoordinateSphere,
    RadialConformalMetric,
    SchwarzschildSpec,
    area_radius,
    mean_curvature_sphere,
)
from caplab.meridian import CurveError, MeridianCurve


class EmbeddingError(ValueError):
    """Raised when a revolution metric has no isometric embedding as a surface of revolution."""


class LambdaUnavailableError(EmbeddingError):
    """Raised when the Gauss curvature is not positive, so Lambda has no closed formula."""


_logger = logging.getLogger("Quasilocal")

NORMALS = ("infinity", "compact")
DEFAULT_DEGREE = 128
_QUADRATURE_NODES = 256


def _gauss_nodes(a: float, b: float, count: int = _QUADRATURE_NODES) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(count)
    return a + 0.5 * (b - a) * (x + 1.0), 0.5 * (b - a) * w


@dataclass(frozen=True, eq=False)
class RevolutionSurfaceMetric:
    rho: Chebyshev
    length: float
    label: str = "surface"

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise CurveError(f"Meridian length must be positive: {self.length}")
        slope = self.rho.deriv()
        ends = np.abs(self.rho(np.array([0.0, self.length])))
        if np.any(ends > 1e-8 * self.length):
            raise CurveError(f"rho must vanish at both poles ({self.label}): {ends}")
        if abs(slope(0.0) - 1.0) > 1e-6 or abs(slope(self.length) + 1.0) > 1e-6:
            raise CurveError(
                f"rho' must be +1 and -1 at the poles ({self.label}): "
                f"{slope(0.0):.9g}, {slope(self.length):.9g}"
            )
        interior = self.rho(np.linspace(0.0, self.length, 513)[1:-1])
        if np.any(interior <= 0):
            raise CurveError(f"rho must stay positive between the poles ({self.label})")

    @classmethod
    def from_function(
        cls, rho: Callable[[np.ndarray], np.ndarray], length: float, degree: int = DEFAULT_DEGREE, label: str = "surface"
    ) -> "RevolutionSurfaceMetric":
        series = Chebyshev.interpolate(rho, degree, domain=[0.0, length])
        return cls(rho=series, length=float(length), label=label)

    @classmethod
    def round(cls, r_A: float) -> "RevolutionSurfaceMetric":
        return cls.from_function(
            lambda s: r_A * np.sin(s / r_A), math.pi * r_A, degree=48, label=f"round(r={r_A:g})"
        )

    @property
    def area(self) -> float:
        return float(2.0 * math.pi * self.rho.integ(lbnd=0.0)(self.length))

    @property
    def area_radius(self) -> float:
        return math.sqrt(self.area / (4.0 * math.pi))

    def rows(self, count: int = 201) -> list:
        s = np.linspace(0.0, self.length, count)
        return [{"s": float(a), "rho": float(b)} for a, b in zip(s, self.rho(s))]


@dataclass(frozen=True, eq=False)
class EmbeddedRevolutionSurface:
    rho: Chebyshev
    z: Chebyshev
    length: float
    source: RevolutionSurfaceMetric

    def rows(self, count: int = 201) -> list:
        s = np.linspace(0.0, self.length, count)
        return [
            {"s": float(a), "rho": float(b), "z": float(c)}
            for a, b, c in zip(s, self.rho(s), self.z(s))
        ]


@dataclass(frozen=True)
class QuasiLocalReport:
    area: float
    area_radius: float
    total_H_g: float
    total_H_g_sq: float
    hawking: float
    total_H_g0: Optional[float] = None
    brown_york: Optional[float] = None
    lambda_value: Optional[float] = None
    min_gauss_curvature: Optional[float] = None
    min_H_g: Optional[float] = None
    normal: str = "infinity"
    label: str = "surface"
    path: str = "numeric"

    def to_dict(self) -> dict:
        return asdict(self)


def _conformal_metric(source: Union[RadialConformalMetric, CapacitySolution]) -> RadialConformalMetric:
    if isinstance(source, CapacitySolution):
        metric = source.conformal_metric
        if metric is None:
            raise CurveError("Solution carries no conformal metric to restrict")
        return metric
    return source


def induced_metric(
    source: Union[RadialConformalMetric, CapacitySolution],
    curve: MeridianCurve,
    degree: int = DEFAULT_DEGREE,
) -> RevolutionSurfaceMetric:
    """Restrict u^4 g0 to the surface swept by curve and reparametrize by arclength."""
    metric = _conformal_metric(source)
    u = metric.u
    metric.check_radius(curve.extent()[0])

    def speed(theta: np.ndarray) -> np.ndarray:
        r = curve.radius(theta)
        return u.value(r) ** 2 * np.sqrt(r**2 + curve.d_theta(theta) ** 2)

    arclength = Chebyshev.interpolate(speed, degree, domain=[0.0, math.pi]).integ(lbnd=0.0)
    length = float(arclength(math.pi))

    def theta_of_s(s: np.ndarray) -> np.ndarray:
        theta = math.pi * np.asarray(s, dtype=float) / length
        for _ in range(50):
            step = (arclength(theta) - s) / speed(theta)
            theta = np.clip(theta - step, 0.0, math.pi)
            if np.max(np.abs(step)) < 1e-15:
                break
        return theta

    def rho_of_s(s: np.ndarray) -> np.ndarray:
        theta = theta_of_s(s)
        r = curve.radius(theta)
        return u.value(r) ** 2 * r * np.sin(theta)

    surface = RevolutionSurfaceMetric.from_function(rho_of_s, length, degree=degree, label=curve.label)
    theta, weights = _gauss_nodes(0.0, math.pi)
    direct = float(weights @ curve.area_density(u, theta))
    if abs(surface.area - direct) > 1e-6 * direct:
        raise CurveError(
            f"Induced metric area {surface.area:.12g} disagrees with direct area {direct:.12g} ({curve.label})"
        )
    return surface


def gauss_curvature(m: RevolutionSurfaceMetric) -> Callable[[ArrayLike], np.ndarray]:
    """K(s) = -rho''/rho, with the pole limit -rho'''/rho' where rho vanishes."""
    d1 = m.rho.deriv()
    d2 = m.rho.deriv(2)
    d3 = m.rho.deriv(3)
    guard = 1e-6 * m.length

    def curvature(s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        rho = m.rho(s)
        near_pole = np.abs(rho) < guard
        safe = np.where(near_pole, 1.0, rho)
        return np.where(near_pole, -d3(s) / d1(s), -d2(s) / safe)

    return curvature


def total_gauss_curvature(m: RevolutionSurfaceMetric) -> float:
    s, weights = _gauss_nodes(0.0, m.length)
    return float(2.0 * math.pi * weights @ (gauss_curvature(m)(s) * m.rho(s)))


def min_gauss_curvature(m: RevolutionSurfaceMetric, samples: int = 1025) -> float:
    return float(np.min(gauss_curvature(m)(np.linspace(0.0, m.length, samples))))


def embed_revolution(m: RevolutionSurfaceMetric, degree: int = DEFAULT_DEGREE) -> EmbeddedRevolutionSurface:
    slope = m.rho.deriv()
    dense = np.linspace(0.0, m.length, 4097)
    steepest = float(np.max(np.abs(slope(dense))))
    if steepest > 1.0 + 1e-8:
        raise EmbeddingError(f"|rho'| reaches {steepest:.6g} > 1; no surface of revolution realizes {m.label}")

    def height_rate(s: np.ndarray) -> np.ndarray:
        return np.sqrt(np.clip(1.0 - slope(s) ** 2, 0.0, None))

    z = Chebyshev.interpolate(height_rate, degree, domain=[0.0, m.length]).integ(lbnd=0.0)
    mismatch = float(np.max(np.abs(slope(dense) ** 2 + z.deriv()(dense) ** 2 - 1.0)))
    if mismatch > 1e-8:
        _logger.warning("Embedding of %s reproduces the metric only to %.2e", m.label, mismatch)
    return EmbeddedRevolutionSurface(rho=m.rho, z=z, length=m.length, source=m)


def total_euclidean_mean_curvature(e: EmbeddedRevolutionSurface) -> float:
    """int H_0 dsigma with H_0 = -rho''/z' + z'/rho for the outward normal."""
    s, weights = _gauss_nodes(0.0, e.length)
    d1 = e.rho.deriv()(s)
    d2 = e.rho.deriv(2)(s)
    rate = np.sqrt(np.clip(1.0 - d1**2, 0.0, None))
    if np.min(rate) < 1e-12:
        raise EmbeddingError(f"Degenerate embedding of {e.source.label}: meridian turns horizontal inside")
    rho = e.rho(s)
    return float(2.0 * math.pi * weights @ (-d2 * rho / rate + rate))


def lambda_invariant(m: RevolutionSurfaceMetric) -> float:
    k_min = min_gauss_curvature(m)
    if k_min <= 0:
        raise LambdaUnavailableError(f"Lambda unavailable: Gauss curvature reaches {k_min:.6g} on {m.label}")
    return total_euclidean_mean_curvature(embed_revolution(m)) / (8.0 * math.pi)


def hawking_mass(area: float, total_H_sq: float) -> float:
    if not area > 0:
        raise CurveError(f"Area must be positive: {area}")
    return math.sqrt(area / (16.0 * math.pi)) * (1.0 - total_H_sq / (16.0 * math.pi))


def brown_york_mass(m: RevolutionSurfaceMetric, total_H_g: float) -> float:
    total_h0 = total_euclidean_mean_curvature(embed_revolution(m))
    return (total_h0 - total_H_g) / (8.0 * math.pi)


def mean_curvature_profile(
    source: Union[RadialConformalMetric, CapacitySolution],
    curve: MeridianCurve,
    count: int = _QUADRATURE_NODES,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gauss nodes, weights, H_g (normal toward infinity) and dA/dtheta on the surface."""
    metric = _conformal_metric(source)
    theta, weights = _gauss_nodes(0.0, math.pi, count)
    return (
        theta,
        weights,
        curve.conformal_mean_curvature(metric.u, theta),
        curve.area_density(metric.u, theta),
    )


def surface_report(
    source: Union[RadialConformalMetric, CapacitySolution],
    curve: MeridianCurve,
    normal: str = "infinity",
) -> QuasiLocalReport:
    """All quasi-local quantities of the surface swept by curve.

    H is always computed for the normal pointing toward infinity, and every
    number in the report is the same for both conventions. normal is only
    recorded: "infinity" tags the boundary of the noncompact exterior,
    "compact" the outer boundary of the region between the horizon and a
    level set, whose outward normal also points toward infinity. Verifiers
    check the tag and read H in the sign convention it names.
    """
    if normal not in NORMALS:
        raise CurveError(f"Unknown normal convention {normal!r}; expected one of {NORMALS}")
    _, weights, mean_curvature, density = mean_curvature_profile(source, curve)
    area = float(weights @ density)
    total_h = float(weights @ (mean_curvature * density))
    total_h_sq = float(weights @ (mean_curvature**2 * density))

    surface = induced_metric(source, curve)
    k_min = min_gauss_curvature(surface)
    total_h0 = brown_york = lambda_value = None
    try:
        total_h0 = total_euclidean_mean_curvature(embed_revolution(surface))
        brown_york = (total_h0 - total_h) / (8.0 * math.pi)
        if k_min > 0:
            lambda_value = total_h0 / (8.0 * math.pi)
    except EmbeddingError as exc:
        _logger.info("No flat embedding for %s: %s", curve.label, exc)

    return QuasiLocalReport(
        area=area,
        area_radius=math.sqrt(area / (4.0 * math.pi)),
        total_H_g=total_h,
        total_H_g_sq=total_h_sq,
        hawking=hawking_mass(area, total_h_sq),
        total_H_g0=total_h0,
        brown_york=brown_york,
        lambda_value=lambda_value,
        min_gauss_curvature=k_min,
        min_H_g=float(np.min(mean_curvature)),
        normal=normal,
        label=curve.label,
    )


def schwarzschild_sphere_report(
    spec: SchwarzschildSpec, sphere: CoordinateSphere, normal: str = "infinity"
) -> QuasiLocalReport:
    """Closed-form report for a coordinate sphere: the induced metric is round of radius r_A."""
    if normal not in NORMALS:
        raise CurveError(f"Unknown normal convention {normal!r}; expected one of {NORMALS}")
    r_a = area_radius(spec, sphere)
    area = 4.0 * math.pi * r_a**2
    h = mean_curvature_sphere(spec, sphere)
    total_h0 = 8.0 * math.pi * r_a
    return QuasiLocalReport(
        area=area,
        area_radius=r_a,
        total_H_g=h * area,
        total_H_g_sq=h**2 * area,
        hawking=hawking_mass(area, h**2 * area),
        total_H_g0=total_h0,
        brown_york=(total_h0 - h * area) / (8.0 * math.pi),
        lambda_value=r_a,
        min_gauss_curvature=1.0 / r_a**2,
        min_H_g=h,
        normal=normal,
        label=f"sphere(m={spec.m:g}, r0={sphere.r0:g})",
        path="closed-form",
    )
