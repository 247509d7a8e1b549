"""Radial profiles: scalar functions of the coordinate radius with two derivatives.

Every metric family in the package is built from one of these. Profiles are
vectorized: they accept scalars or numpy arrays and return the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Mapping, Protocol, Tuple, runtime_checkable

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline


class ProfileError(ValueError):
    """Raised when a radial profile cannot be built or evaluated."""


@runtime_checkable
class RadialProfile(Protocol):
    @property
    def domain(self) -> Tuple[float, float]: ...

    def value(self, r: ArrayLike) -> np.ndarray: ...

    def first(self, r: ArrayLike) -> np.ndarray: ...

    def second(self, r: ArrayLike) -> np.ndarray: ...

    def describe(self) -> dict: ...


@dataclass(frozen=True)
class PowerSeriesProfile:
    """f(r) = sum of c * r**p over the stored (p, c) terms."""

    terms: Tuple[Tuple[float, float], ...]
    r_start: float = 0.0

    def __post_init__(self) -> None:
        if not self.terms:
            raise ProfileError("Power series needs at least one term")
        if self.r_start < 0:
            raise ProfileError(f"r_start must be nonnegative: {self.r_start}")

    @classmethod
    def from_mapping(cls, terms: Mapping[float, float], r_start: float = 0.0) -> "PowerSeriesProfile":
        # Sorted so equal profiles compare and hash equal.
        items = tuple(sorted((float(p), float(c)) for p, c in terms.items() if c != 0.0))
        return cls(terms=items or ((0.0, 0.0),), r_start=float(r_start))

    @property
    def domain(self) -> Tuple[float, float]:
        return (self.r_start, math.inf)

    @property
    def regular_at_origin(self) -> bool:
        return all(p >= 0 for p, _ in self.terms)

    @property
    def is_harmonic(self) -> bool:
        # r**p is flat-harmonic only for p in {0, -1}.
        return all(p in (0.0, -1.0) for p, _ in self.terms)

    def value(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return sum(c * r**p for p, c in self.terms) + np.zeros_like(r)

    def first(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return sum(c * p * r ** (p - 1.0) for p, c in self.terms) + np.zeros_like(r)

    def second(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return sum(c * p * (p - 1.0) * r ** (p - 2.0) for p, c in self.terms) + np.zeros_like(r)

    def describe(self) -> dict:
        return {
            "kind": "power_series",
            "terms": [[p, c] for p, c in self.terms],
            "r_start": self.r_start,
        }


@dataclass(frozen=True, eq=False)
class SampledProfile:
    """Profile stored on a log-uniform grid with fourth-order derivative stencils.

    Samples that are not log-uniform are resampled with a cubic spline in
    x = ln r. Past the last sample the profile continues as the harmonic tail
    1 + (f(R) - 1) R / r, which keeps asymptotically flat data flat.
    """

    r: np.ndarray
    f: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False, compare=False)
    _spline_x: CubicSpline = field(init=False, repr=False, compare=False)
    _spline_xx: CubicSpline = field(init=False, repr=False, compare=False)

    MIN_SAMPLES = 6

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if r.ndim != 1 or r.shape != f.shape:
            raise ProfileError("Profile samples must be two equal-length 1-D arrays")
        if r.size < self.MIN_SAMPLES:
            raise ProfileError(
                f"Sampled profile needs at least {self.MIN_SAMPLES} samples, got {r.size}"
            )
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ProfileError("Sample radii must be positive and strictly increasing")
        if not np.all(np.isfinite(f)):
            raise ProfileError("Profile samples contain non-finite values")

        x = np.log(r)
        if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0.0):
            # Resample onto a log-uniform grid with the same node count.
            spline = CubicSpline(x, f)
            x = np.linspace(x[0], x[-1], x.size)
            f = spline(x)
            r = np.exp(x)
        h = x[1] - x[0]
        f_x, f_xx = _log_stencils(f, h)

        object.__setattr__(self, "r", r)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "_spline", CubicSpline(x, f))
        object.__setattr__(self, "_spline_x", CubicSpline(x, f_x))
        object.__setattr__(self, "_spline_xx", CubicSpline(x, f_xx))

    @property
    def domain(self) -> Tuple[float, float]:
        return (float(self.r[0]), math.inf)

    @property
    def sample_end(self) -> float:
        return float(self.r[-1])

    @property
    def regular_at_origin(self) -> bool:
        return False

    def _split(self, r: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r[0] * (1.0 - 1e-12)):
            raise ProfileError(
                f"Radius below sampled domain start {self.r[0]}: {np.min(r)}"
            )
        return r, r > self.r[-1]

    def value(self, r: ArrayLike) -> np.ndarray:
        r, tail = self._split(r)
        inside = self._spline(np.log(np.clip(r, self.r[0], self.r[-1])))
        a = (self.f[-1] - 1.0) * self.r[-1]
        return np.where(tail, 1.0 + a / r, inside)

    def first(self, r: ArrayLike) -> np.ndarray:
        r, tail = self._split(r)
        f_x = self._spline_x(np.log(np.clip(r, self.r[0], self.r[-1])))
        a = (self.f[-1] - 1.0) * self.r[-1]
        return np.where(tail, -a / r**2, f_x / r)

    def second(self, r: ArrayLike) -> np.ndarray:
        r, tail = self._split(r)
        x = np.log(np.clip(r, self.r[0], self.r[-1]))
        f_x = self._spline_x(x)
        f_xx = self._spline_xx(x)
        a = (self.f[-1] - 1.0) * self.r[-1]
        return np.where(tail, 2.0 * a / r**3, (f_xx - f_x) / r**2)

    def describe(self) -> dict:
        return {
            "kind": "sampled",
            "samples": int(self.r.size),
            "r_first": float(self.r[0]),
            "r_last": float(self.r[-1]),
        }


@dataclass(frozen=True)
class KelvinProfile:
    """v(s) = u(1/s) / s, the conformal factor seen in inverted coordinates."""

    base: RadialProfile

    @property
    def domain(self) -> Tuple[float, float]:
        start, end = self.base.domain
        lower = 0.0 if math.isinf(end) else 1.0 / end
        upper = math.inf if start == 0.0 else 1.0 / start
        return (lower, upper)

    @property
    def regular_at_origin(self) -> bool:
        return False

    def value(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.base.value(1.0 / s) / s

    def first(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        big_u = self.base.value(1.0 / s)
        big_u_s = -self.base.first(1.0 / s) / s**2
        return -big_u / s**2 + big_u_s / s

    def second(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        u1 = self.base.first(1.0 / s)
        u2 = self.base.second(1.0 / s)
        big_u = self.base.value(1.0 / s)
        big_u_s = -u1 / s**2
        big_u_ss = 2.0 * u1 / s**3 + u2 / s**4
        return 2.0 * big_u / s**3 - 2.0 * big_u_s / s**2 + big_u_ss / s

    def describe(self) -> dict:
        return {"kind": "kelvin", "base": self.base.describe()}


def _log_stencils(f: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """First and second derivatives in x on a uniform grid, fourth order throughout."""
    n = f.size
    d1 = np.empty(n)
    d2 = np.empty(n)
    d1[2:-2] = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)
    d2[2:-2] = (-f[4:] + 16.0 * f[3:-1] - 30.0 * f[2:-2] + 16.0 * f[1:-3] - f[:-4]) / (
        12.0 * h**2
    )

    one_sided_d1 = (
        np.array([-25.0, 48.0, -36.0, 16.0, -3.0, 0.0]),
        np.array([-3.0, -10.0, 18.0, -6.0, 1.0, 0.0]),
    )
    one_sided_d2 = (
        np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]),
        np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]),
    )
    head = f[:6]
    tail = f[::-1][:6]
    for i in range(2):
        d1[i] = one_sided_d1[i] @ head / (12.0 * h)
        d2[i] = one_sided_d2[i] @ head / (12.0 * h**2)
        # Mirrored stencils: odd derivative flips sign.
        d1[n - 1 - i] = -(one_sided_d1[i] @ tail) / (12.0 * h)
        d2[n - 1 - i] = one_sided_d2[i] @ tail / (12.0 * h**2)
    return d1, d2


def load_profile_csv(path) -> SampledProfile:
    """Read a two-column (r, u) CSV; a non-numeric first row is treated as a header."""
    path = Path(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=csv_header_rows(path), ndmin=2)
    except (OSError, ValueError) as exc:
        raise ProfileError(f"Cannot read profile file: {path}") from exc
    if data.shape[1] != 2:
        raise ProfileError(f"Profile file must have exactly two columns: {path}")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ProfileError(f"Profile radii must be strictly increasing: {path}")
    if np.any(data[:, 1] <= 0):
        raise ProfileError(f"Conformal factor must be positive: {path}")
    return SampledProfile(r=data[:, 0], f=data[:, 1])


def write_profile_csv(path, r: ArrayLike, u: ArrayLike) -> None:
    table = np.column_stack([np.asarray(r, dtype=float), np.asarray(u, dtype=float)])
    np.savetxt(path, table, delimiter=",", header="r,u", comments="", fmt="%.17g")


def csv_header_rows(path) -> int:
    """1 when the first line of a numeric CSV file is a header row, else 0."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        return 0
    try:
        [float(item) for item in lines[0].split(",")]
    except ValueError:
        return 1
    return 0
