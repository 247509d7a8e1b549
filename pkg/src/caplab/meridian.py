"""Axisymmetric boundary surfaces described by their meridian r(theta)."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import fft

from caplab.profiles import RadialProfile, csv_header_rows


class CurveError(ValueError):
    """Raised when a meridian curve is not a valid pole-to-pole profile."""


# Below this sin(theta) the parallel curvature uses its pole limit.
_POLE_GUARD = 1e-7


@dataclass(frozen=True, eq=False)
class MeridianCurve:
    """r(theta) = sum_k a_k cos(k theta) on [0, pi], theta measured from the +z axis.

    Cosine coefficients come from a type-I DCT of samples at uniform theta
    nodes, so the curve interpolates its samples and is smooth through both
    poles with r'(0) = r'(pi) = 0.
    """

    coefficients: np.ndarray
    label: str = "meridian"
    _k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=float)
        if coefficients.ndim != 1 or coefficients.size < 1:
            raise CurveError("Meridian coefficients must be a non-empty 1-D array")
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "_k", np.arange(coefficients.size, dtype=float))
        check = self.radius(np.linspace(0.0, math.pi, 4 * coefficients.size + 1))
        if np.any(check <= 0) or not np.all(np.isfinite(check)):
            raise CurveError(f"Meridian radius must stay positive ({self.label})")

    @classmethod
    def from_samples(cls, radii: ArrayLike, label: str = "meridian") -> "MeridianCurve":
        """Build from radii at theta_j = j*pi/N, j = 0..N (poles included)."""
        radii = np.asarray(radii, dtype=float)
        if radii.ndim != 1 or radii.size < 3:
            raise CurveError("Need at least three meridian samples including both poles")
        n = radii.size - 1
        spectrum = fft.dct(radii, type=1)
        coefficients = spectrum / n
        coefficients[0] /= 2.0
        coefficients[-1] /= 2.0
        return cls(coefficients=coefficients, label=label)

    @classmethod
    def from_polar(
        cls, radius: Callable[[np.ndarray], np.ndarray], modes: int = 64, label: str = "meridian"
    ) -> "MeridianCurve":
        theta = np.linspace(0.0, math.pi, modes + 1)
        return cls.from_samples(np.asarray(radius(theta), dtype=float) + 0.0 * theta, label=label)

    @classmethod
    def from_mu(
        cls, radius: Callable[[np.ndarray], np.ndarray], modes: int = 64, label: str = "meridian"
    ) -> "MeridianCurve":
        return cls.from_polar(lambda theta: radius(np.cos(theta)), modes=modes, label=label)

    @classmethod
    def round(cls, r0: float) -> "MeridianCurve":
        if r0 <= 0:
            raise CurveError(f"Sphere radius must be positive: {r0}")
        return cls(coefficients=np.array([float(r0)]), label=f"sphere(r0={r0:g})")

    @classmethod
    def spheroid(cls, a: float, c: float, modes: int = 128) -> "MeridianCurve":
        """Spheroid with equatorial semi-axis a and polar semi-axis c."""
        if a <= 0 or c <= 0:
            raise CurveError(f"Spheroid semi-axes must be positive: a={a}, c={c}")
        return cls.from_polar(
            lambda theta: 1.0 / np.sqrt(np.sin(theta) ** 2 / a**2 + np.cos(theta) ** 2 / c**2),
            modes=modes,
            label=f"spheroid(a={a:g}, c={c:g})",
        )

    @classmethod
    def bumped(cls, r0: float, amplitude: float, degree: int, modes: int = 64) -> "MeridianCurve":
        """r0 * (1 + amplitude * P_degree(cos theta)) with a Legendre bump."""
        bump = np.polynomial.legendre.Legendre.basis(degree)
        return cls.from_mu(
            lambda mu: r0 * (1.0 + amplitude * bump(mu)),
            modes=modes,
            label=f"bumped(r0={r0:g}, eps={amplitude:g}, l={degree})",
        )

    @property
    def is_round(self) -> bool:
        scale = abs(self.coefficients[0])
        return bool(np.all(np.abs(self.coefficients[1:]) <= 1e-13 * scale))

    def radius(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.cos(np.multiply.outer(theta, self._k)) @ self.coefficients

    def d_theta(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return -np.sin(np.multiply.outer(theta, self._k)) @ (self._k * self.coefficients)

    def d2_theta(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return -np.cos(np.multiply.outer(theta, self._k)) @ (self._k**2 * self.coefficients)

    def extent(self, samples: int = 1025) -> Tuple[float, float]:
        values = self.radius(np.linspace(0.0, math.pi, samples))
        return float(np.min(values)), float(np.max(values))

    def inverted(self, samples: int = 129) -> "MeridianCurve":
        """The image under x -> x/|x|^2, i.e. r -> 1/r along every ray."""
        theta = np.linspace(0.0, math.pi, samples)
        return MeridianCurve.from_samples(1.0 / self.radius(theta), label=f"inverted {self.label}")

    def euclidean_curvatures(self, theta: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """Meridian and parallel principal curvatures for the outward normal in flat space."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        r1 = self.d_theta(theta)
        r2 = self.d2_theta(theta)
        speed = np.sqrt(r**2 + r1**2)
        kappa_m = (r**2 + 2.0 * r1**2 - r * r2) / speed**3
        sin_t = np.sin(theta)
        safe_sin = np.where(np.abs(sin_t) < _POLE_GUARD, 1.0, sin_t)
        kappa_p = (r * sin_t - r1 * np.cos(theta)) / (r * safe_sin * speed)
        # On the axis both principal curvatures agree.
        kappa_p = np.where(np.abs(sin_t) < _POLE_GUARD, kappa_m, kappa_p)
        return kappa_m, kappa_p

    def euclidean_mean_curvature(self, theta: ArrayLike) -> np.ndarray:
        kappa_m, kappa_p = self.euclidean_curvatures(theta)
        return kappa_m + kappa_p

    def radial_normal_component(self, theta: ArrayLike) -> np.ndarray:
        """n . r_hat for the outward Euclidean unit normal."""
        r = self.radius(theta)
        r1 = self.d_theta(theta)
        return r / np.sqrt(r**2 + r1**2)

    def area_density(self, u: RadialProfile, theta: ArrayLike) -> np.ndarray:
        """dA/dtheta of the surface in u^4 g0 (azimuth already integrated)."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        r1 = self.d_theta(theta)
        return 2.0 * math.pi * u.value(r) ** 4 * r * np.sin(theta) * np.sqrt(r**2 + r1**2)

    def conformal_mean_curvature(self, u: RadialProfile, theta: ArrayLike) -> np.ndarray:
        """H in u^4 g0 for the normal pointing away from the origin.

        H_g = u^-2 (H_0 + 4 d_n log u) with the Euclidean outward normal n.
        """
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        u_val = u.value(r)
        h0 = self.euclidean_mean_curvature(theta)
        dn_log_u = u.first(r) / u_val * self.radial_normal_component(theta)
        return (h0 + 4.0 * dn_log_u) / u_val**2

    def describe(self) -> dict:
        r_min, r_max = self.extent()
        return {
            "label": self.label,
            "modes": int(self.coefficients.size),
            "r_min": r_min,
            "r_max": r_max,
        }


def load_meridian_csv(path, label: Optional[str] = None) -> MeridianCurve:
    """Read (theta, r) rows at uniform theta from 0 to pi, poles included."""
    path = Path(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=csv_header_rows(path), ndmin=2)
    except (OSError, ValueError) as exc:
        raise CurveError(f"Cannot read meridian file: {path}") from exc
    if data.shape[1] != 2:
        raise CurveError(f"Meridian file must have (theta, r) columns: {path}")
    theta, radii = data.T
    expected = np.linspace(0.0, math.pi, theta.size)
    if np.max(np.abs(theta - expected)) > 1e-9:
        raise CurveError(f"Meridian samples must sit at uniform theta from 0 to pi: {path}")
    return MeridianCurve.from_samples(radii, label=label or path.stem)


def write_meridian_csv(path, curve: MeridianCurve, samples: int = 129) -> None:
    theta = np.linspace(0.0, math.pi, samples)
    table = np.column_stack([theta, curve.radius(theta)])
    np.savetxt(path, table, delimiter=",", header="theta,r", comments="", fmt="%.17g")
