"""Rotationally symmetric metric families and their pointwise geometry.

All conformally flat metrics are written g = u^4 g0 with u a radial profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

from caplab.profiles import KelvinProfile, PowerSeriesProfile, ProfileError, RadialProfile, csv_header_rows


class DomainError(ValueError):
    """Raised when a radius or parameter lies outside a metric's domain."""


class AdmFitError(RuntimeError):
    """Raised when the far-field fit of the conformal factor is not converged."""


_logger = logging.getLogger("GeometryModels")


@dataclass(frozen=True)
class SchwarzschildSpec:
    """Schwarzschild manifold of mass m in isotropic coordinates, u = 1 + m/(2r).

    For m >= 0 every r > 0 is admissible (r < m/2 is the reflected sheet of
    the doubled manifold). For m < 0 the metric degenerates at r = |m|/2 and
    r_min is mandatory.
    """

    m: float
    r_min: Optional[float] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.m):
            raise DomainError(f"Mass must be finite: {self.m}")
        if self.m < 0:
            if self.r_min is None:
                raise DomainError(f"r_min is required for negative mass m={self.m}")
            if self.r_min <= abs(self.m) / 2.0:
                raise DomainError(
                    f"r_min={self.r_min} must exceed |m|/2={abs(self.m) / 2.0} for m={self.m}"
                )
        elif self.r_min is not None and self.r_min <= 0:
            raise DomainError(f"r_min must be positive: {self.r_min}")

    @property
    def domain_start(self) -> float:
        if self.r_min is not None:
            return self.r_min
        return self.m / 2.0 if self.m > 0 else 0.0

    def conformal_factor(self, r: ArrayLike) -> np.ndarray:
        return 1.0 + self.m / (2.0 * np.asarray(r, dtype=float))

    def profile(self, r_start: Optional[float] = None) -> PowerSeriesProfile:
        start = self.domain_start if r_start is None else r_start
        return PowerSeriesProfile.from_mapping({0.0: 1.0, -1.0: self.m / 2.0}, r_start=start)


@dataclass(frozen=True)
class CoordinateSphere:
    r0: float

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise DomainError(f"Coordinate radius must be positive: {self.r0}")


@dataclass(frozen=True)
class RadialConformalMetric:
    """g = u^4 g0 on r >= r_b with u -> 1 at rate r^-tau."""

    u: RadialProfile
    r_b: float
    tau: float = 1.0

    def __post_init__(self) -> None:
        if not self.r_b > 0:
            raise DomainError(f"Domain start r_b must be positive: {self.r_b}")
        if not 0.5 < self.tau <= 1.0:
            raise DomainError(f"Decay order tau must lie in (1/2, 1]: {self.tau}")
        radii = np.geomspace(self.r_b, self.r_b * 1e6, 64)
        try:
            values = self.u.value(radii)
        except ProfileError as exc:
            raise DomainError(f"Profile not defined on [{self.r_b}, inf): {exc}") from exc
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise DomainError("Conformal factor must be positive on the whole domain")

    @property
    def r_domain(self) -> Tuple[float, float]:
        return (self.r_b, math.inf)

    @property
    def is_flat(self) -> bool:
        radii = np.geomspace(self.r_b, self.r_b * 1e6, 32)
        return bool(np.all(np.abs(self.u.value(radii) - 1.0) <= 1e-14))

    def check_radius(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_b * (1.0 - 1e-12)):
            raise DomainError(f"Radius {np.min(r)} below domain start {self.r_b}")
        return r

    def to_warped(self) -> "WarpedProductMetric":
        return WarpedProductMetric.from_conformal(self)

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"u": self.u.describe(), "r_b": self.r_b, "tau": self.tau}, sort_keys=True
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def describe(self) -> dict:
        return {"u": self.u.describe(), "r_b": self.r_b, "tau": self.tau}


@dataclass(frozen=True)
class WarpedProductMetric:
    """g = f(r)^2 dr^2 + h(r)^2 g_S2 on r >= r_b."""

    f: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    r_b: float
    source: Optional[RadialConformalMetric] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.r_b > 0:
            raise DomainError(f"Domain start r_b must be positive: {self.r_b}")
        radii = np.geomspace(self.r_b, self.r_b * 1e6, 64)
        f_vals = np.asarray(self.f(radii))
        h_vals = np.asarray(self.h(radii))
        if np.any(f_vals <= 0) or np.any(h_vals <= 0):
            raise DomainError("Warped product needs f > 0 and h > 0 on the domain")

    @classmethod
    def from_conformal(cls, metric: RadialConformalMetric) -> "WarpedProductMetric":
        u = metric.u
        return cls(
            f=lambda r: u.value(r) ** 2,
            h=lambda r: u.value(r) ** 2 * np.asarray(r, dtype=float),
            r_b=metric.r_b,
            source=metric,
        )

    @classmethod
    def flat(cls, r_b: float) -> "WarpedProductMetric":
        return cls(
            f=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            h=lambda r: np.asarray(r, dtype=float),
            r_b=r_b,
        )

    def check_radius(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_b * (1.0 - 1e-12)):
            raise DomainError(f"Radius {np.min(r)} below domain start {self.r_b}")
        return r

    def mean_curvature(self, r: ArrayLike) -> np.ndarray:
        """H of {r = const} toward infinity, 2 h' / (f h)."""
        r = self.check_radius(r)
        if self.source is not None:
            u = self.source.u
            u_val = u.value(r)
            return 2.0 * (u_val + 2.0 * r * u.first(r)) / (u_val**3 * r)
        step = 1e-5 * r
        # One-sided second-order difference keeps the stencil inside the domain.
        dh = (-3.0 * self.h(r) + 4.0 * self.h(r + step) - self.h(r + 2.0 * step)) / (2.0 * step)
        return 2.0 * dh / (self.f(r) * self.h(r))

    def volume_reference(self) -> float:
        if self.source is not None:
            return volume_reference_radius(self.source)
        return self.r_b


def schwarzschild_metric(spec: SchwarzschildSpec, r_start: Optional[float] = None) -> RadialConformalMetric:
    start = spec.domain_start if r_start is None else r_start
    if start <= 0:
        raise DomainError(f"A positive domain start is needed for m={spec.m}; pass r_start")
    if spec.m < 0 and start <= abs(spec.m) / 2.0:
        raise DomainError(f"r_start={start} must exceed |m|/2 for m={spec.m}")
    return RadialConformalMetric(u=spec.profile(start), r_b=start, tau=1.0)


def _check_sphere(spec: SchwarzschildSpec, s: CoordinateSphere) -> float:
    r0 = s.r0
    if spec.m < 0 and r0 < spec.domain_start:
        raise DomainError(f"r0={r0} outside the domain r >= {spec.domain_start} for m={spec.m}")
    return r0


def area_radius(spec: SchwarzschildSpec, s: CoordinateSphere) -> float:
    r0 = _check_sphere(spec, s)
    return (1.0 + spec.m / (2.0 * r0)) ** 2 * r0


def mean_curvature_sphere(spec: SchwarzschildSpec, s: CoordinateSphere) -> float:
    """Mean curvature of {r = r0} for the normal pointing to r = infinity."""
    r0 = _check_sphere(spec, s)
    u = 1.0 + spec.m / (2.0 * r0)
    return 2.0 * (1.0 - spec.m / (2.0 * r0)) / (u**3 * r0)


def euclidean_mean_curvature_round(r_A: float) -> float:
    if not r_A > 0:
        raise DomainError(f"Area radius must be positive: {r_A}")
    return 2.0 / r_A


def capacity_from_area_radius(m: float, r_A: float, outside: bool = True) -> float:
    """Capacity of a coordinate sphere from its area radius, on either side of the horizon."""
    if not r_A > 0:
        raise DomainError(f"Area radius must be positive: {r_A}")
    discriminant = 1.0 - 2.0 * m / r_A
    if discriminant < -1e-14:
        raise DomainError(f"Area radius {r_A} is below the horizon value 2m={2.0 * m}")
    root = math.sqrt(max(discriminant, 0.0))
    return 0.5 * r_A * (1.0 + root if outside else 1.0 - root)


def schwarzschild_potential(spec: SchwarzschildSpec, r0: float, r: ArrayLike) -> np.ndarray:
    """Boundary capacity potential of {r = r0}: (r0 + m/2) / (r + m/2)."""
    _check_sphere(spec, CoordinateSphere(r0))
    r = np.asarray(r, dtype=float)
    return (r0 + spec.m / 2.0) / (r + spec.m / 2.0)


def scalar_curvature_radial(metric: RadialConformalMetric, r: ArrayLike) -> np.ndarray:
    """R(u^4 g0) = -8 u^-5 (u'' + 2u'/r)."""
    r = metric.check_radius(r)
    u = metric.u.value(r)
    return -8.0 * u**-5 * (metric.u.second(r) + 2.0 * metric.u.first(r) / r)


def flat_laplacian_residual(metric: RadialConformalMetric, radii: Optional[np.ndarray] = None) -> float:
    """Largest |Lap0 u| relative to the size of its two terms, over sample radii."""
    if radii is None:
        radii = np.geomspace(metric.r_b, metric.r_b * 1e3, 32)
    u1 = metric.u.first(radii)
    u2 = metric.u.second(radii)
    lap = np.abs(u2 + 2.0 * u1 / radii)
    scale = np.maximum(np.abs(u2) + np.abs(2.0 * u1 / radii), 1.0)
    return float(np.max(lap / scale))


def adm_mass(metric: RadialConformalMetric, radius: Optional[float] = None, tol: float = 1e-6) -> float:
    """2a from u = 1 + a/r + ..., fitting r(u - 1) = a + b/r + c/r^2 at R, 2R, 4R."""
    base = radius if radius is not None else 1e3 * max(metric.r_b, 1.0)
    a_near = _far_field_coefficient(metric, base)
    a_far = _far_field_coefficient(metric, 2.0 * base)
    if abs(a_near - a_far) > tol * max(1.0, abs(a_far)):
        raise AdmFitError(
            f"ADM fit not converged: a(R={base:g})={a_near:.12g} vs a(2R)={a_far:.12g}"
        )
    return 2.0 * a_far


def _far_field_coefficient(metric: RadialConformalMetric, radius: float) -> float:
    radii = np.array([radius, 2.0 * radius, 4.0 * radius])
    q = radii * (metric.u.value(radii) - 1.0)
    design = np.column_stack([np.ones(3), 1.0 / radii, 1.0 / radii**2])
    return float(np.linalg.solve(design, q)[0])


def _areal_derivative(metric: RadialConformalMetric, r: ArrayLike) -> np.ndarray:
    # d/dr (u^2 r) = u (u + 2 r u')
    r = np.asarray(r, dtype=float)
    u = metric.u.value(r)
    return u * (u + 2.0 * r * metric.u.first(r))


def locate_horizon(
    metric: RadialConformalMetric,
    scan_points: int = 512,
    scan_decades: float = 6.0,
    xtol: float = 1e-12,
) -> Optional[float]:
    """Outermost coordinate sphere with d(u^2 r)/dr = 0, or None."""
    radii = np.geomspace(metric.r_b, metric.r_b * 10.0**scan_decades, scan_points)
    values = _areal_derivative(metric, radii)
    # Zero up to round-off.
    values[np.abs(values) <= 1e-13 * metric.u.value(radii) ** 2] = 0.0
    for i in range(scan_points - 1, -1, -1):
        if values[i] == 0.0:
            return float(radii[i])
        if i > 0 and np.sign(values[i - 1]) != np.sign(values[i]) and values[i - 1] != 0.0:
            root = optimize.bisect(
                lambda r: float(_areal_derivative(metric, r)),
                radii[i - 1],
                radii[i],
                xtol=xtol,
                rtol=4.0 * np.finfo(float).eps,
                maxiter=200,
            )
            _logger.debug("Horizon bracket [%s, %s] -> %s", radii[i - 1], radii[i], root)
            return float(root)
    return None


def kelvin_invert(metric: RadialConformalMetric) -> KelvinProfile:
    """Conformal factor v(s) = u(1/s)/s of the inverted metric on (0, 1/r_b]."""
    return KelvinProfile(metric.u)


def volume_reference_radius(metric: RadialConformalMetric) -> float:
    horizon = locate_horizon(metric)
    if horizon is not None:
        return horizon
    if getattr(metric.u, "regular_at_origin", False):
        return 0.0
    return metric.r_b


def signed_volume_function(
    metric: Union[RadialConformalMetric, WarpedProductMetric], r_ref: Optional[float] = None
) -> Callable[[ArrayLike], np.ndarray]:
    """W(r) = 4 pi int_{r_ref}^r dV/dr ds, vectorized over r.

    dV/dr is u^6 r^2 for conformal metrics and f h^2 for warped products.
    """
    if isinstance(metric, WarpedProductMetric):
        reference = metric.volume_reference() if r_ref is None else float(r_ref)

        def density(s: np.ndarray) -> np.ndarray:
            return metric.f(s) * metric.h(s) ** 2

    else:
        reference = volume_reference_radius(metric) if r_ref is None else float(r_ref)

        def density(s: np.ndarray) -> np.ndarray:
            return metric.u.value(s) ** 6 * s**2

    def volume(r: ArrayLike) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if reference > 0:
            log_ratio = np.log(r / reference)

            def integrand(t: float) -> np.ndarray:
                s = reference * np.exp(t * log_ratio)
                return density(s) * s * log_ratio

        else:

            def integrand(t: float) -> np.ndarray:
                return density(t * r) * r

        result, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
        return 4.0 * math.pi * result

    return volume


def load_warped_csv(path) -> WarpedProductMetric:
    """Read (r, f, h) columns; beyond the last row f is held fixed and h grows at rate f."""
    path = Path(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=csv_header_rows(path), ndmin=2)
    except (OSError, ValueError) as exc:
        raise DomainError(f"Cannot read warped metric file: {path}") from exc
    if data.shape[1] != 3 or data.shape[0] < 4:
        raise DomainError(f"Warped metric file needs at least four (r, f, h) rows: {path}")
    r, f, h = data.T
    if np.any(np.diff(r) <= 0):
        raise DomainError(f"Warped metric radii must be strictly increasing: {path}")
    f_spline = CubicSpline(r, f)
    h_spline = CubicSpline(r, h)
    r_end, f_end, h_end = float(r[-1]), float(f[-1]), float(h[-1])

    def f_of(s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s <= r_end, f_spline(np.minimum(s, r_end)), f_end)

    def h_of(s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s <= r_end, h_spline(np.minimum(s, r_end)), h_end + f_end * (s - r_end))

    return WarpedProductMetric(f=f_of, h=h_of, r_b=float(r[0]))
