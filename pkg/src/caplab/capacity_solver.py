"""Boundary capacity potentials: radial quadrature, closed form and meridian-grid solves.

The capacity potential phi of a boundary surface solves Lap_g phi = 0 outside
it with phi = 1 on the surface and phi -> 0 at infinity. Its capacity is
C = -(1/4pi) * flux of grad phi through any surface enclosing the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline
from scipy.sparse import linalg as splinalg

from caplab.axisym_grid import AxisymGrid, ROBIN_MODES, assemble_energy
from caplab.contours import ContourError, LevelContour, trace_level
from caplab.geometry_models import (
    DomainError,
    RadialConformalMetric,
    WarpedProductMetric,
    flat_laplacian_residual,
    signed_volume_function,
)
from caplab.meridian import MeridianCurve
from caplab.profiles import RadialProfile


class SolverError(RuntimeError):
    """Raised when a capacity solve fails or is under-resolved."""


class DivergentIntegralError(SolverError):
    """Raised when int f/h^2 diverges, i.e. the end is not asymptotically flat."""


class NotHarmonicError(ValueError):
    """Raised when a conformal factor is not flat-harmonic to tolerance."""


class FitError(RuntimeError):
    """Raised when the far-field fit and the flux capacity disagree."""


class LevelSetError(RuntimeError):
    """Raised when a requested level set is not a regular, resolved surface."""


_logger = logging.getLogger("CapacitySolver")

HARMONIC_TOLERANCE = 1e-10
FIT_TOLERANCE = 1e-3
CLOSED_FORM_TOLERANCE = 1e-8
_GRADIENT_FLOOR = 1e-6


@dataclass(frozen=True)
class AxisymDomainSpec:
    boundary_curve: MeridianCurve
    metric: RadialConformalMetric
    truncation_radius: Optional[float] = None
    grid: Tuple[int, int] = (256, 128)
    robin: str = "conformal"
    preconditioner: str = "lu"
    cg_rtol: float = 1e-12
    fd_tol: float = 1e-3
    n_extract: int = 6
    estimate_truncation: bool = False

    def __post_init__(self) -> None:
        r_min, r_max = self.boundary_curve.extent()
        if r_min < self.metric.r_b * (1.0 - 1e-12):
            raise DomainError(
                f"Boundary dips to r={r_min:g}, below the metric domain start {self.metric.r_b:g}"
            )
        if self.truncation_radius is None:
            object.__setattr__(self, "truncation_radius", 10.0 * r_max)
        elif self.truncation_radius < 10.0 * r_max * (1.0 - 1e-12):
            raise DomainError(
                f"Truncation radius {self.truncation_radius:g} must be at least 10x max r_b ({10.0 * r_max:g})"
            )
        n_rho, n_mu = self.grid
        if n_rho < 64 or n_mu < 64:
            raise DomainError(f"Grid must be at least 64x64, got {n_rho}x{n_mu}")
        if self.robin not in ROBIN_MODES:
            raise DomainError(f"Unknown Robin closure: {self.robin}")
        if self.preconditioner not in ("lu", "jacobi"):
            raise DomainError(f"Unknown preconditioner: {self.preconditioner}")
        if self.n_extract < 4:
            raise DomainError(f"Need at least 4 extraction radii, got {self.n_extract}")


@dataclass(frozen=True, eq=False)
class RadialPotential:
    """phi(r) = I(r) / I(r0) with I(r) = int_r^inf f/h^2 ds."""

    metric: WarpedProductMetric
    r0: float
    inverse_capacity: float
    radii: np.ndarray
    values: np.ndarray

    def value(self, r: ArrayLike) -> np.ndarray:
        r = np.atleast_1d(self.metric.check_radius(r))
        return np.array([_tail_integral(self.metric, float(x)) for x in r]) / self.inverse_capacity

    def derivative(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return -self.metric.f(r) / self.metric.h(r) ** 2 / self.inverse_capacity

    def level_radius(self, t: float) -> float:
        if not 0.0 < t < 1.0:
            raise LevelSetError(f"Level {t} must lie strictly inside (0, 1)")
        hi = 2.0 * self.r0
        for _ in range(80):
            if self.value(hi)[0] < t:
                break
            hi *= 2.0
        else:
            raise LevelSetError(f"Level {t} not reached below r={hi:g}")
        return float(
            optimize.brentq(lambda r: self.value(r)[0] - t, self.r0, hi, xtol=1e-14 * hi, rtol=1e-14)
        )


@dataclass(frozen=True, eq=False)
class MeridianField:
    """phi at the nodes of an AxisymGrid, shape (n_rho, n_mu)."""

    grid: AxisymGrid
    phi: np.ndarray
    u: RadialProfile
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.phi.shape != self.grid.shape:
            raise SolverError(f"Field shape {self.phi.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "_spline", CubicSpline(self.grid.xi, self.phi, axis=0))

    def rho_mu(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.grid.rho_mu()

    def column_eval(self, xi_cols: np.ndarray, nu: int = 0) -> np.ndarray:
        """phi (nu=0) or d phi/d xi (nu=1) at one xi per column."""
        xi_cols = np.asarray(xi_cols, dtype=float)
        idx = np.clip(np.searchsorted(self.grid.xi, xi_cols, side="right") - 1, 0, self.grid.n_rho - 2)
        dx = xi_cols - self.grid.xi[idx]
        c = self._spline.c[:, idx, np.arange(self.grid.n_mu)]
        if nu == 0:
            return ((c[0] * dx + c[1]) * dx + c[2]) * dx + c[3]
        return (3.0 * c[0] * dx + 2.0 * c[1]) * dx + c[2]

    def radial_derivative(self, r: float) -> np.ndarray:
        """d phi/dr along every ray at coordinate radius r."""
        xi_cols = self.grid.column_xi(r)
        return self.column_eval(xi_cols, nu=1) / (self.grid.span * r)

    def sphere_mean(self, r: float) -> float:
        values = self.column_eval(self.grid.column_xi(r))
        return 0.5 * float(integrate.simpson(values * np.sin(self.grid.theta), x=self.grid.theta))

    def coordinate_sphere_flux(self, r: float) -> float:
        """-(1/4pi) * flux of grad phi through {|x| = r}, i.e. the capacity seen at r."""
        phi_r = self.radial_derivative(r)
        integral = integrate.simpson(phi_r * np.sin(self.grid.theta), x=self.grid.theta)
        return float(-0.5 * self.u.value(r) ** 2 * r**2 * integral)


@dataclass(frozen=True, eq=False)
class CapacitySolution:
    capacity: float
    potential: Union[RadialPotential, MeridianField]
    flux_samples: Tuple[Tuple[float, float], ...]
    asymptotic_coefficient: float
    boundary: MeridianCurve
    metric: Union[RadialConformalMetric, WarpedProductMetric]
    method: str
    flux_spread: float = 0.0
    grid_error: float = 0.0
    truncation_error: Optional[float] = None
    dirichlet_capacity: Optional[float] = None
    iterations: int = 0
    maximum_principle: bool = True

    @property
    def is_axisymmetric(self) -> bool:
        return isinstance(self.potential, MeridianField)

    @property
    def conformal_metric(self) -> Optional[RadialConformalMetric]:
        if isinstance(self.metric, RadialConformalMetric):
            return self.metric
        return self.metric.source

    @property
    def tolerance(self) -> float:
        """Absolute tolerance to use when this capacity enters an equality check."""
        if self.method != "fd":
            return CLOSED_FORM_TOLERANCE * max(1.0, self.capacity)
        allowance = 5.0 * self.grid_error + (self.truncation_error or 0.0)
        return max(allowance, 1e-6 * self.capacity)

    def summary(self) -> dict:
        return {
            "capacity": self.capacity,
            "method": self.method,
            "asymptotic_coefficient": self.asymptotic_coefficient,
            "flux_spread": self.flux_spread,
            "grid_error": self.grid_error,
            "truncation_error": self.truncation_error,
            "dirichlet_capacity": self.dirichlet_capacity,
            "iterations": self.iterations,
            "maximum_principle": self.maximum_principle,
            "tolerance": self.tolerance,
            "boundary": self.boundary.describe(),
        }


@dataclass(frozen=True, eq=False)
class BoundaryGradient:
    """Hypothesis fields on a boundary (or level) surface, sampled in theta.

    mean_curvature uses the normal pointing toward infinity. potential_u is
    the derived potential (2 - phi)/2 and grad_log_u its log-gradient.
    """

    theta: np.ndarray
    grad_phi: np.ndarray
    mean_curvature: np.ndarray
    potential_u: np.ndarray
    grad_log_u: np.ndarray
    level: float = 1.0
    normal: str = "infinity"

    def margin_capacity(self) -> float:
        """min(4|grad phi| - H); positive means H < 4|grad phi| holds."""
        return float(np.min(4.0 * self.grad_phi - self.mean_curvature))

    def margin_level(self) -> float:
        """min(H + 4|grad log u|); positive means H > -4|grad log u| holds."""
        return float(np.min(self.mean_curvature + 4.0 * self.grad_log_u))


@dataclass(frozen=True, eq=False)
class LevelSetData:
    """Per-threshold integrals of the level sets {phi = t}.

    A level met once by every ray from the origin has a meridian curve and
    no contour. Any other level is traced by marching squares; its curve is
    None and its contour holds the traced arc.
    """

    thresholds: np.ndarray
    areas: np.ndarray
    volumes: np.ndarray
    fluxes: np.ndarray
    coarea: np.ndarray
    min_gradient: np.ndarray
    curves: Tuple[Optional[MeridianCurve], ...]
    capacity: float
    boundary_volume: float
    boundary_area: float
    grid_error: float = 0.0
    contours: Tuple[Optional[LevelContour], ...] = ()

    @property
    def raw_fluxes(self) -> np.ndarray:
        return 4.0 * math.pi * self.fluxes

    def curve(self, k: int) -> MeridianCurve:
        curve = self.curves[k]
        if curve is None:
            raise LevelSetError(
                f"Level {self.thresholds[k]:g} is not star-shaped about the origin; it has no meridian r(theta)"
            )
        return curve

    def extent(self, k: int) -> Tuple[float, float]:
        curve = self.curves[k]
        return curve.extent() if curve is not None else self.contours[k].extent()

    def rows(self) -> list:
        return [
            {
                "t": float(t),
                "area": float(a),
                "volume": float(v),
                "flux": float(f),
                "coarea": float(c),
                "r_min": self.extent(k)[0],
                "r_max": self.extent(k)[1],
                "traced": self.curves[k] is None,
            }
            for k, (t, a, v, f, c) in enumerate(
                zip(self.thresholds, self.areas, self.volumes, self.fluxes, self.coarea)
            )
        ]


def _tail_integral(metric: WarpedProductMetric, r: float) -> float:
    """int_r^inf f/h^2 ds, with the far part mapped to t = 1/s."""
    split = 10.0 * r

    def near(s: float) -> float:
        return float(metric.f(s) / metric.h(s) ** 2)

    def far(t: float) -> float:
        s = 1.0 / t
        return float(metric.f(s) / (metric.h(s) ** 2 * t**2))

    tail_samples = np.array([far(10.0**-k / split) for k in range(1, 7)])
    if not np.all(np.isfinite(tail_samples)) or tail_samples[-1] > 1e3 * max(tail_samples[0], 1e-300):
        raise DivergentIntegralError(
            f"int f/h^2 diverges at infinity (tail integrand grows to {tail_samples[-1]:.3g})"
        )
    inner, _ = integrate.quad(near, r, split, epsabs=1e-14, epsrel=1e-12, limit=200)
    outer, _ = integrate.quad(far, 0.0, 1.0 / split, epsabs=1e-14, epsrel=1e-12, limit=200)
    total = inner + outer
    if not math.isfinite(total) or total <= 0:
        raise DivergentIntegralError(f"Tail integral from r={r:g} is not finite and positive: {total}")
    return total


def _far_field_fit(radii: np.ndarray, q: np.ndarray) -> float:
    design = np.column_stack([np.ones_like(radii), 1.0 / radii, 1.0 / radii**2])
    coeffs, *_ = np.linalg.lstsq(design, q, rcond=None)
    return float(coeffs[0])


def _check_fit(fit: float, capacity: float, tolerance: float = FIT_TOLERANCE) -> None:
    if not fit > 0:
        raise FitError(f"Far-field coefficient must be positive, got {fit:.6g}")
    if abs(fit - capacity) > tolerance * capacity:
        raise FitError(
            f"Far-field coefficient {fit:.9g} disagrees with flux capacity {capacity:.9g}"
        )


def capacity_radial(
    metric: WarpedProductMetric, r0: float, samples: int = 257, decades: float = 4.0
) -> CapacitySolution:
    """Capacity of {r = r0} in f^2 dr^2 + h^2 g_S2 by adaptive quadrature."""
    if isinstance(metric, RadialConformalMetric):
        metric = metric.to_warped()
    metric.check_radius(r0)

    radii = np.geomspace(r0, r0 * 10.0**decades, samples)

    def density(s: float) -> float:
        return float(metric.f(s) / metric.h(s) ** 2)

    segments = np.array(
        [
            integrate.quad(density, a, b, epsabs=1e-15, epsrel=1e-12)[0]
            for a, b in zip(radii[:-1], radii[1:])
        ]
    )
    tail = _tail_integral(metric, float(radii[-1]))
    cumulative = np.concatenate([np.cumsum(segments[::-1])[::-1] + tail, [tail]])
    inverse = float(cumulative[0])
    capacity = 1.0 / inverse
    potential = RadialPotential(
        metric=metric, r0=float(r0), inverse_capacity=inverse, radii=radii, values=cumulative / inverse
    )

    spline = CubicSpline(np.log(radii), potential.values)
    extraction = np.geomspace(2.0 * r0, r0 * 10.0 ** (decades - 1.0), 6)
    slopes = spline.derivative()(np.log(extraction)) / extraction
    fluxes = metric.h(extraction) ** 2 * np.abs(slopes) / metric.f(extraction)
    spread = float((np.max(fluxes) - np.min(fluxes)) / capacity)

    outer = radii[radii >= r0 * 10.0 ** (decades - 1.0)]
    fit = _far_field_fit(outer, outer * potential.values[-outer.size :])
    _check_fit(fit, capacity)

    _logger.debug("Radial capacity r0=%g: C=%.12g (fit %.12g, spread %.2e)", r0, capacity, fit, spread)
    return CapacitySolution(
        capacity=capacity,
        potential=potential,
        flux_samples=tuple(zip(extraction.tolist(), fluxes.tolist())),
        asymptotic_coefficient=fit,
        boundary=MeridianCurve.round(r0),
        metric=metric,
        method="radial",
        flux_spread=spread,
    )


def capacity_harmonically_flat(metric: RadialConformalMetric, r0: float) -> float:
    """r0 * u(r0): for flat-harmonic u the product u*phi is the flat potential b/r."""
    metric.check_radius(r0)
    residual = flat_laplacian_residual(metric, np.geomspace(max(r0, metric.r_b), 1e3 * r0, 32))
    if residual > HARMONIC_TOLERANCE:
        raise NotHarmonicError(f"Conformal factor is not flat-harmonic (residual {residual:.3e})")
    return float(r0 * metric.u.value(r0))


@dataclass(frozen=True, eq=False)
class _GridSolve:
    field: MeridianField
    capacity: float
    energy: float
    flux_samples: Tuple[Tuple[float, float], ...]
    spread: float
    iterations: int
    maximum_principle: bool


def _solve_on_grid(
    grid: AxisymGrid,
    u: RadialProfile,
    robin: str,
    preconditioner: str,
    cg_rtol: float,
    n_extract: int,
) -> _GridSolve:
    matrix = assemble_energy(grid, u, robin)
    n_dir = grid.n_mu
    k_ff = matrix[n_dir:, n_dir:].tocsc()
    rhs = -(matrix[n_dir:, :n_dir] @ np.ones(n_dir))

    if preconditioner == "lu":
        factor = splinalg.splu(k_ff)
        precond = splinalg.LinearOperator(k_ff.shape, matvec=factor.solve)
    else:
        inv_diag = 1.0 / k_ff.diagonal()
        precond = splinalg.LinearOperator(k_ff.shape, matvec=lambda v: inv_diag * v)

    iterations = [0]

    def count(_: np.ndarray) -> None:
        iterations[0] += 1

    solution, info = splinalg.cg(
        k_ff, rhs, rtol=cg_rtol, atol=0.0, maxiter=20 * k_ff.shape[0], M=precond, callback=count
    )
    if info != 0:
        raise SolverError(f"Conjugate gradients did not converge (info={info}, {iterations[0]} iterations)")
    residual = np.linalg.norm(k_ff @ solution - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if residual > 10.0 * cg_rtol:
        raise SolverError(f"Linear solve residual {residual:.2e} above {cg_rtol:.1e}")

    phi = np.concatenate([np.ones(n_dir), solution]).reshape(grid.shape)
    energy = float(phi.ravel() @ (matrix @ phi.ravel()))
    meridian_field = MeridianField(grid=grid, phi=phi, u=u)

    _, r_max = grid.boundary.extent()
    radii = np.geomspace(2.0 * r_max, 0.5 * grid.truncation_radius, n_extract)
    fluxes = np.array([meridian_field.coordinate_sphere_flux(float(r)) for r in radii])
    capacity = float(np.mean(fluxes))
    spread = float((np.max(fluxes) - np.min(fluxes)) / capacity)
    interior = phi[1:]
    maximum_principle = bool(np.all(interior > 0.0) and np.all(interior < 1.0))
    if not maximum_principle:
        _logger.warning("Discrete maximum principle violated on a %dx%d grid", *grid.shape)
    return _GridSolve(
        field=meridian_field,
        capacity=capacity,
        energy=energy,
        flux_samples=tuple(zip(radii.tolist(), fluxes.tolist())),
        spread=spread,
        iterations=iterations[0],
        maximum_principle=maximum_principle,
    )


def _meridian_fit(meridian_field: MeridianField) -> float:
    grid = meridian_field.grid
    _, r_max = grid.boundary.extent()
    lower = max(grid.truncation_radius / 10.0, 2.0 * r_max)
    radii = np.geomspace(lower, grid.truncation_radius, 24)
    q = np.array(
        [r * float(meridian_field.u.value(r)) * meridian_field.sphere_mean(float(r)) for r in radii]
    )
    return _far_field_fit(radii, q)


def capacity_axisym_fd(domain: AxisymDomainSpec) -> CapacitySolution:
    """Capacity of an axisymmetric boundary from a second-order meridian-grid solve."""
    u = domain.metric.u
    grid = AxisymGrid(
        boundary=domain.boundary_curve,
        truncation_radius=float(domain.truncation_radius),
        n_rho=domain.grid[0],
        n_mu=domain.grid[1],
    )
    options = (domain.robin, domain.preconditioner, domain.cg_rtol, domain.n_extract)
    fine = _solve_on_grid(grid, u, *options)
    if fine.spread > 10.0 * domain.fd_tol:
        raise SolverError(
            f"Flux spread {fine.spread:.3e} exceeds 10x grid tolerance {domain.fd_tol:g}; refine the grid"
        )

    coarse_grid = grid.coarsened()
    coarse = _solve_on_grid(coarse_grid, u, *options)
    ratio = 0.5 * (
        (coarse_grid.h_xi / grid.h_xi) ** 2 + (coarse_grid.h_theta / grid.h_theta) ** 2
    )
    grid_error = abs(fine.capacity - coarse.capacity) / (ratio - 1.0)

    truncation_error = None
    if domain.estimate_truncation:
        far = _solve_on_grid(grid.with_truncation(2.0 * grid.truncation_radius), u, *options)
        truncation_error = abs(fine.capacity - far.capacity)

    fit = _meridian_fit(fine.field)
    _check_fit(fit, fine.capacity)

    _logger.info(
        "Meridian solve %dx%d: C=%.9g (energy %.9g, spread %.2e, grid error %.2e, %d CG iterations)",
        grid.n_rho,
        grid.n_mu,
        fine.capacity,
        fine.energy / (4.0 * math.pi),
        fine.spread,
        grid_error,
        fine.iterations,
    )
    return CapacitySolution(
        capacity=fine.capacity,
        potential=fine.field,
        flux_samples=fine.flux_samples,
        asymptotic_coefficient=fit,
        boundary=domain.boundary_curve,
        metric=domain.metric,
        method="fd",
        flux_spread=fine.spread,
        grid_error=grid_error,
        truncation_error=truncation_error,
        dirichlet_capacity=fine.energy / (4.0 * math.pi),
        iterations=fine.iterations,
        maximum_principle=fine.maximum_principle,
    )


def asymptotic_fit(sol: CapacitySolution, tolerance: float = FIT_TOLERANCE) -> float:
    """C from r*phi = C + D/r + E/r^2 over the outer decade, checked against the flux."""
    potential = sol.potential
    if isinstance(potential, RadialPotential):
        radii = np.geomspace(potential.radii[-1] / 10.0, potential.radii[-1], 24)
        fit = _far_field_fit(radii, radii * potential.value(radii))
    else:
        fit = _meridian_fit(potential)
    _check_fit(fit, sol.capacity, tolerance)
    return fit


def _ray_crossings(meridian_field: MeridianField, t: float) -> np.ndarray:
    """Grid intervals along every ray where phi crosses t, shape (n_rho - 1, n_mu)."""
    phi = meridian_field.phi
    if t <= float(np.max(phi[-1])):
        raise LevelSetError(f"Level {t:g} leaves the truncated domain (max outer phi {np.max(phi[-1]):.4g})")
    above = phi > t
    return above[:-1] != above[1:]


def _single_crossing(meridian_field: MeridianField, t: float) -> bool:
    return bool(np.all(_ray_crossings(meridian_field, t).sum(axis=0) == 1))


def _traced_level(meridian_field: MeridianField, t: float) -> LevelContour:
    try:
        return trace_level(meridian_field.grid, meridian_field.phi, t)
    except ContourError as exc:
        raise LevelSetError(str(exc)) from exc


def _level_crossings(meridian_field: MeridianField, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-column interval index and xi where phi = t; exactly one crossing per ray."""
    grid = meridian_field.grid
    crossings = _ray_crossings(meridian_field, t)
    counts = crossings.sum(axis=0)
    if np.any(counts != 1):
        bad = int(np.argmax(counts != 1))
        raise LevelSetError(
            f"Level {t:g} crosses ray theta={grid.theta[bad]:.4f} {int(counts[bad])} times"
        )
    idx = np.argmax(crossings, axis=0)
    c = meridian_field._spline.c[:, idx, np.arange(grid.n_mu)]
    lo = np.zeros(grid.n_mu)
    hi = np.full(grid.n_mu, grid.h_xi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        value = ((c[0] * mid + c[1]) * mid + c[2]) * mid + c[3] - t
        # phi decreases outward along every ray.
        lo = np.where(value > 0.0, mid, lo)
        hi = np.where(value > 0.0, hi, mid)
    return idx, grid.xi[idx] + 0.5 * (lo + hi)


def _level_gradient(
    meridian_field: MeridianField, idx: np.ndarray, xi_cols: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinate radius and flat |grad phi| at the level points."""
    grid = meridian_field.grid
    phi_xi = meridian_field.column_eval(xi_cols, nu=1)
    phi_theta_nodes = np.gradient(meridian_field.phi, grid.h_theta, axis=1, edge_order=2)
    phi_theta_nodes[:, 0] = 0.0
    phi_theta_nodes[:, -1] = 0.0
    cols = np.arange(grid.n_mu)
    weight = (xi_cols - grid.xi[idx]) / grid.h_xi
    phi_theta = (1.0 - weight) * phi_theta_nodes[idx, cols] + weight * phi_theta_nodes[idx + 1, cols]

    log_r = (1.0 - xi_cols) * grid.log_rb + xi_cols * math.log(grid.truncation_radius)
    radius = np.exp(log_r)
    l_theta = (1.0 - xi_cols) * grid.beta
    phi_l = phi_xi / grid.span
    phi_theta_l = phi_theta - l_theta * phi_l
    return radius, np.sqrt(phi_l**2 + phi_theta_l**2) / radius


def _gauss_theta(count: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(count)
    return 0.5 * math.pi * (nodes + 1.0), 0.5 * math.pi * weights


def _surface_area_volume(curve: MeridianCurve, u: RadialProfile, volume, count: int) -> Tuple[float, float]:
    theta, weights = _gauss_theta(count)
    area = float(weights @ curve.area_density(u, theta))
    enclosed = float(0.5 * weights @ (volume(curve.radius(theta)) * np.sin(theta)))
    return area, enclosed


def boundary_gradient(sol: CapacitySolution, level: Optional[float] = None) -> BoundaryGradient:
    """|grad phi|_g and H_g on the boundary (level=None) or on the level set {phi = level}."""
    if sol is None or sol.potential is None:
        raise SolverError("boundary_gradient needs a solved potential")
    phi_value = 1.0 if level is None else float(level)
    potential = sol.potential

    if isinstance(potential, RadialPotential):
        r = potential.r0 if level is None else potential.level_radius(phi_value)
        grad = float(abs(potential.derivative(r)) / potential.metric.f(r))
        theta = np.array([0.5 * math.pi])
        grad_phi = np.array([grad])
        mean_curvature = np.atleast_1d(potential.metric.mean_curvature(r)).astype(float)
    else:
        grid = potential.grid
        theta = grid.theta
        u = potential.u
        if level is None:
            phi = potential.phi
            phi_xi = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * grid.h_xi)
            r_b = np.exp(grid.log_rb)
            grad0 = np.abs(phi_xi) / grid.span * np.sqrt(1.0 + grid.beta**2) / r_b
            grad_phi = grad0 / u.value(r_b) ** 2
            mean_curvature = sol.boundary.conformal_mean_curvature(u, theta)
        else:
            idx, xi_cols = _level_crossings(potential, phi_value)
            radius, grad0 = _level_gradient(potential, idx, xi_cols)
            curve = MeridianCurve.from_samples(radius, label=f"phi={phi_value:g}")
            grad_phi = grad0 / u.value(radius) ** 2
            mean_curvature = curve.conformal_mean_curvature(u, theta)

    potential_u = np.full_like(grad_phi, (2.0 - phi_value) / 2.0)
    return BoundaryGradient(
        theta=theta,
        grad_phi=grad_phi,
        mean_curvature=mean_curvature,
        potential_u=potential_u,
        grad_log_u=grad_phi / (2.0 - phi_value),
        level=phi_value,
    )


def chebyshev_thresholds(count: int = 32, epsilon: float = 0.02) -> np.ndarray:
    """Chebyshev points of (epsilon, 1 - epsilon), ascending."""
    if count < 2 or not 0.0 < epsilon < 0.5:
        raise LevelSetError(f"Invalid threshold request: count={count}, epsilon={epsilon}")
    k = np.arange(count)
    nodes = np.cos((2.0 * k + 1.0) * math.pi / (2.0 * count))
    return np.sort(0.5 + (0.5 - epsilon) * nodes)


def extract_level_sets(sol: CapacitySolution, thresholds: Sequence[float]) -> LevelSetData:
    """Area, signed volume, flux and coarea integral of each level set {phi = t}."""
    levels = np.sort(np.asarray(thresholds, dtype=float))
    if levels.size == 0 or np.any(levels <= 0.0) or np.any(levels >= 1.0):
        raise LevelSetError("Thresholds must lie strictly inside (0, 1)")
    if np.any(np.diff(levels) <= 0.0):
        raise LevelSetError("Thresholds must be distinct")

    potential = sol.potential
    count = len(levels)
    areas = np.empty(count)
    volumes = np.empty(count)
    fluxes = np.empty(count)
    coarea = np.empty(count)
    min_gradient = np.empty(count)
    curves = []
    contours = []

    if isinstance(potential, RadialPotential):
        metric = potential.metric
        volume = signed_volume_function(metric)
        for k, t in enumerate(levels):
            r = potential.level_radius(float(t))
            h = float(metric.h(r))
            slope = float(abs(potential.derivative(r)))
            f = float(metric.f(r))
            areas[k] = 4.0 * math.pi * h**2
            volumes[k] = float(volume(r)[0])
            fluxes[k] = h**2 * slope / f
            coarea[k] = 4.0 * math.pi * h**2 * f / slope
            min_gradient[k] = r * slope
            curves.append(MeridianCurve.round(r))
            contours.append(None)
        r0 = potential.r0
        boundary_area = 4.0 * math.pi * float(metric.h(r0)) ** 2
        boundary_volume = float(volume(r0)[0])
    else:
        grid = potential.grid
        u = potential.u
        metric = sol.conformal_metric
        volume = signed_volume_function(metric)
        quadrature = 2 * grid.n_mu
        for k, t in enumerate(levels):
            if not _single_crossing(potential, float(t)):
                contour = _traced_level(potential, float(t))
                _logger.info("Level %.6g is not star-shaped about the origin; using its traced contour", t)
                min_gradient[k] = float(np.min(contour.radius * contour.grad0))
                if min_gradient[k] < _GRADIENT_FLOOR:
                    raise LevelSetError(f"Level {t:g} is near-critical (min r|grad phi| = {min_gradient[k]:.2e})")
                areas[k] = contour.area(u)
                volumes[k] = contour.enclosed_volume(volume)
                fluxes[k] = contour.flux(u)
                coarea[k] = contour.coarea(u)
                curves.append(None)
                contours.append(contour)
                continue
            idx, xi_cols = _level_crossings(potential, float(t))
            radius, grad0 = _level_gradient(potential, idx, xi_cols)
            min_gradient[k] = float(np.min(radius * grad0))
            if min_gradient[k] < _GRADIENT_FLOOR:
                raise LevelSetError(f"Level {t:g} is near-critical (min r|grad phi| = {min_gradient[k]:.2e})")
            curve = MeridianCurve.from_samples(radius, label=f"phi={t:.6g}")
            areas[k], volumes[k] = _surface_area_volume(curve, u, volume, quadrature)
            r_theta = curve.d_theta(grid.theta)
            d_sigma0 = 2.0 * math.pi * radius * np.sin(grid.theta) * np.sqrt(radius**2 + r_theta**2)
            u_val = u.value(radius)
            fluxes[k] = float(integrate.simpson(u_val**2 * grad0 * d_sigma0, x=grid.theta)) / (4.0 * math.pi)
            coarea[k] = float(integrate.simpson(u_val**6 * d_sigma0 / grad0, x=grid.theta))
            curves.append(curve)
            contours.append(None)
        boundary_area, boundary_volume = _surface_area_volume(sol.boundary, u, volume, quadrature)

    _logger.debug("Extracted %d level sets (capacity %.9g)", count, sol.capacity)
    return LevelSetData(
        thresholds=levels,
        areas=areas,
        volumes=volumes,
        fluxes=fluxes,
        coarea=coarea,
        min_gradient=min_gradient,
        curves=tuple(curves),
        capacity=sol.capacity,
        boundary_volume=boundary_volume,
        boundary_area=boundary_area,
        grid_error=sol.grid_error,
        contours=tuple(contours),
    )
