"""Rearrangement of capacity potentials onto rotationally symmetric spheres.

Level sets of a solved potential are replaced by the coordinate spheres that
enclose the same signed volume with the horizon. Along the way the energy

    int |S_t*|^2 / |V'(t)| dt <= int |S_t|^2 / |V'(t)| dt <= int flux dt

can only grow, which gives C(S) >= C(S*) for the symmetrized boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline, PchipInterpolator

from caplab.capacity_solver import CapacitySolution, LevelSetData, capacity_radial
from caplab.geometry_models import (
    CoordinateSphere,
    RadialConformalMetric,
    signed_volume_function,
    volume_reference_radius,
)
from caplab.meridian import MeridianCurve


class SymmetrizationError(ValueError):
    """Raised when a volume, profile or level-set family cannot be symmetrized."""


_logger = logging.getLogger("Symmetrization")

MIN_THRESHOLDS = 32
DERIVATIVE_METHODS = ("spline", "pchip")


def signed_volume_schwarzschild(m: float, r0: float) -> float:
    """4 pi int_{m/2}^{r0} u^6 s^2 ds with u = 1 + m/(2s); negative inside the horizon."""
    if m < 0 or not r0 > 0:
        raise SymmetrizationError(f"Need m >= 0 and r0 > 0, got m={m}, r0={r0}")
    if m == 0:
        return 4.0 * math.pi * r0**3 / 3.0
    half = 0.5 * m

    def density(s: float) -> float:
        return (1.0 + half / s) ** 6 * s**2

    value, _ = integrate.quad(density, half, r0, epsabs=0.0, epsrel=1e-12, limit=200)
    return 4.0 * math.pi * value


@dataclass(frozen=True, eq=False)
class IsoperimetricProfile:
    """Volume-to-sphere map of a rotationally symmetric manifold.

    Without a metric this is Schwarzschild of mass m, whose coordinate spheres
    are isoperimetric. Any other radial metric has to be declared isoperimetric
    by the caller; only the monotonicity of area in volume is checked here.
    """

    m: float
    metric: Optional[RadialConformalMetric] = None
    assume_isoperimetric: bool = False
    reference_radius: float = field(init=False)
    _volume: Callable[[ArrayLike], np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.metric is None:
            if self.m < 0:
                raise SymmetrizationError(f"Schwarzschild profile needs m >= 0, got {self.m}")
            object.__setattr__(self, "reference_radius", 0.5 * self.m)
            volume = np.vectorize(lambda r: signed_volume_schwarzschild(self.m, float(r)), otypes=[float])
            object.__setattr__(self, "_volume", volume)
            return
        if not self.assume_isoperimetric:
            raise SymmetrizationError(
                "Coordinate spheres of a non-Schwarzschild metric must be declared isoperimetric"
            )
        reference = volume_reference_radius(self.metric)
        object.__setattr__(self, "reference_radius", reference)
        object.__setattr__(self, "_volume", signed_volume_function(self.metric, reference))
        radii = np.geomspace(max(reference, self.metric.r_b) * 1.01, 1e3 * max(reference, self.metric.r_b, 1.0), 64)
        if np.any(np.diff(self.area(radii)) <= 0) or np.any(np.diff(self.volume(radii)) <= 0):
            raise SymmetrizationError("Coordinate-sphere area is not monotone in enclosed volume")

    @property
    def is_schwarzschild(self) -> bool:
        return self.metric is None

    @property
    def lower_radius(self) -> float:
        if self.metric is not None:
            return self.metric.r_b
        return 1e-8 * self.reference_radius

    def volume(self, r: ArrayLike) -> np.ndarray:
        return np.atleast_1d(self._volume(np.asarray(r, dtype=float)))

    def area(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.metric is None:
            return 4.0 * math.pi * (1.0 + 0.5 * self.m / r) ** 4 * r**2
        return 4.0 * math.pi * self.metric.u.value(r) ** 4 * r**2

    def capacity(self, r: float) -> float:
        if self.metric is None:
            return float(r) + 0.5 * self.m
        return capacity_radial(self.metric.to_warped(), float(r)).capacity

    def radius_for_volume(self, volume: float) -> float:
        reference = self.reference_radius
        if volume == 0.0 and reference > 0:
            return reference
        if volume > 0:
            hi = max(2.0 * reference, 1.0)
            while float(self.volume(hi)[0]) < volume:
                hi *= 2.0
                if hi > 1e12:
                    raise SymmetrizationError(f"Volume {volume:g} not enclosed below r=1e12")
            # Flat space has no horizon; the origin encloses zero volume.
            lo = reference if reference > 0 else 1e-12 * hi
        else:
            hi = reference
            lo = 0.5 * reference
            while lo > self.lower_radius and float(self.volume(lo)[0]) > volume:
                lo *= 0.5
            lo = max(lo, self.lower_radius)
            if lo <= 0 or float(self.volume(lo)[0]) > volume:
                raise SymmetrizationError(
                    f"Volume {volume:g} lies below the attainable range (limit r={self.lower_radius:g})"
                )
        return float(
            optimize.brentq(lambda r: float(self.volume(r)[0]) - volume, lo, hi, xtol=1e-14, rtol=1e-13)
        )

    def area_for_volume(self, volume: float) -> float:
        return float(self.area(self.radius_for_volume(volume)))

    def capacity_for_volume(self, volume: float) -> float:
        return self.capacity(self.radius_for_volume(volume))


def symmetric_counterpart(profile: IsoperimetricProfile, volume: float) -> CoordinateSphere:
    return CoordinateSphere(profile.radius_for_volume(volume))


def enclosed_signed_volume(profile: IsoperimetricProfile, curve: MeridianCurve, count: int = 256) -> float:
    """Signed volume between the horizon and the surface swept by curve."""
    nodes, weights = np.polynomial.legendre.leggauss(count)
    theta = 0.5 * math.pi * (nodes + 1.0)
    values = profile.volume(curve.radius(theta))
    return float(0.25 * math.pi * weights @ (values * np.sin(theta)))


def pfs_flat_bound(volume: float) -> float:
    """(3V/4pi)^(1/3), the capacity of the flat ball of volume V."""
    if not volume > 0:
        raise SymmetrizationError(f"Volume must be positive: {volume}")
    return (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class SymmetrizationResult:
    original_capacity: float
    symmetrized_capacity: float
    energy_chain: Tuple[float, float, float]
    gap: float
    chain_monotone: bool
    chain_tolerance: float
    band: Tuple[float, float]
    derivative_method: str
    derivative_mismatch: float
    boundary_volume: float
    symmetric_radius: float

    def to_dict(self) -> dict:
        return {
            "original_capacity": self.original_capacity,
            "symmetrized_capacity": self.symmetrized_capacity,
            "energy_chain": {
                "symmetrized_area": self.energy_chain[0],
                "level_set_area": self.energy_chain[1],
                "dirichlet": self.energy_chain[2],
            },
            "gap": self.gap,
            "chain_monotone": self.chain_monotone,
            "chain_tolerance": self.chain_tolerance,
            "band": list(self.band),
            "derivative_method": self.derivative_method,
            "derivative_mismatch": self.derivative_mismatch,
            "boundary_volume": self.boundary_volume,
            "symmetric_radius": self.symmetric_radius,
        }


def _volume_rate(levels: LevelSetData, method: str) -> np.ndarray:
    """|dV/dt| at the thresholds."""
    t = levels.thresholds
    volumes = levels.volumes
    if method == "pchip":
        return np.abs(PchipInterpolator(t, volumes).derivative()(t))
    # V is close to a cubic in 1/t because phi decays like C/r.
    tau = 1.0 / t[::-1]
    spline = CubicSpline(tau, volumes[::-1])
    return np.abs(spline.derivative()(1.0 / t) / t**2)


def rearranged_energy(
    levels: LevelSetData,
    profile: IsoperimetricProfile,
    method: str = "spline",
    mismatch_warning: float = 1e-2,
) -> SymmetrizationResult:
    if method not in DERIVATIVE_METHODS:
        raise SymmetrizationError(f"Unknown derivative method {method!r}; expected one of {DERIVATIVE_METHODS}")
    t = levels.thresholds
    if t.size < MIN_THRESHOLDS:
        raise SymmetrizationError(f"Need at least {MIN_THRESHOLDS} thresholds, got {t.size}")

    steps = np.diff(levels.volumes)
    span = float(np.ptp(levels.volumes))
    if np.any(steps > 1e-9 * span):
        worst = int(np.argmax(steps))
        raise SymmetrizationError(
            f"V(t) is not decreasing between t={t[worst]:.4g} and t={t[worst + 1]:.4g}; "
            "a critical value contaminates the level family"
        )

    rate = _volume_rate(levels, method)
    mismatch = float(np.max(np.abs(rate - levels.coarea) / levels.coarea))
    if mismatch > mismatch_warning:
        _logger.warning("dV/dt differs from the coarea integral by %.2e (method %s)", mismatch, method)

    symmetric_areas = np.array([profile.area_for_volume(float(v)) for v in levels.volumes])
    width = float(t[-1] - t[0])
    chain = (
        float(integrate.trapezoid(symmetric_areas**2 / rate, t)) / width,
        float(integrate.trapezoid(levels.areas**2 / rate, t)) / width,
        float(integrate.trapezoid(levels.raw_fluxes, t)) / width,
    )
    scale = 4.0 * math.pi * levels.capacity
    tolerance = 3.0 * scale * max(levels.grid_error / levels.capacity, mismatch, 1e-8)
    monotone = chain[0] <= chain[1] + tolerance and chain[1] <= chain[2] + tolerance

    radius = profile.radius_for_volume(levels.boundary_volume)
    symmetrized = profile.capacity(radius)
    _logger.info(
        "Energy chain %.9g <= %.9g <= %.9g (monotone=%s); C=%.9g vs C*=%.9g",
        chain[0],
        chain[1],
        chain[2],
        monotone,
        levels.capacity,
        symmetrized,
    )
    return SymmetrizationResult(
        original_capacity=levels.capacity,
        symmetrized_capacity=symmetrized,
        energy_chain=chain,
        gap=levels.capacity - symmetrized,
        chain_monotone=monotone,
        chain_tolerance=tolerance,
        band=(float(t[0]), float(t[-1])),
        derivative_method=method,
        derivative_mismatch=mismatch,
        boundary_volume=levels.boundary_volume,
        symmetric_radius=radius,
    )


def szego_schwarzschild_compare(sol: CapacitySolution, m: float):
    """C(S) >= C(S*) = r0* + m/2 with S* enclosing the same signed volume."""
    from caplab.inequality_harness import InequalityReport

    profile = IsoperimetricProfile(m)
    r_min, _ = sol.boundary.extent()
    encloses = r_min >= 0.5 * m * (1.0 - 1e-12)
    volume = enclosed_signed_volume(profile, sol.boundary)
    radius = profile.radius_for_volume(volume)
    return InequalityReport(
        name="szego_schwarzschild",
        hypotheses=(("boundary encloses the horizon", encloses),),
        lhs=sol.capacity,
        rhs=radius + 0.5 * m,
        direction=">=",
        tolerance=sol.tolerance,
        path=sol.method,
        notes={"signed_volume": volume, "symmetric_radius": radius, "m": m},
    )
