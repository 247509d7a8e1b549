"""Level curves of a meridian-grid potential by marching squares.

Cells of the (xi, theta) node grid are classified by the corners lying above
the level, and every crossed edge carries a linearly interpolated point.
Segments are chained through shared edges into one arc running from the
north pole (theta = 0) to the south pole (theta = pi), which is then mapped
to the meridian half-plane (rho, z).
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable, Dict, List, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import RegularGridInterpolator

from caplab.axisym_grid import AxisymGrid
from caplab.profiles import RadialProfile


class ContourError(RuntimeError):
    """Raised when a level curve is not a single pole-to-pole arc."""


# ("xi", i, j) joins nodes (i, j) and (i + 1, j); ("theta", i, j) joins (i, j) and (i, j + 1).
Edge = Tuple[str, int, int]


@dataclass(frozen=True, eq=False)
class LevelContour:
    """Meridian polyline of {phi = level}, north pole first, with flat |grad phi| at its vertices."""

    level: float
    rho: np.ndarray
    z: np.ndarray
    grad0: np.ndarray

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.rho, self.z)

    @property
    def polar_angle(self) -> np.ndarray:
        return np.arctan2(self.rho, self.z)

    @property
    def star_shaped(self) -> bool:
        """True when every ray from the origin meets the arc once."""
        return bool(np.all(np.diff(self.polar_angle) > 0.0))

    def extent(self) -> Tuple[float, float]:
        radius = self.radius
        return float(np.min(radius)), float(np.max(radius))

    def _segments(self) -> Tuple[np.ndarray, ...]:
        rho = 0.5 * (self.rho[1:] + self.rho[:-1])
        z = 0.5 * (self.z[1:] + self.z[:-1])
        d_rho = np.diff(self.rho)
        d_z = np.diff(self.z)
        grad0 = 0.5 * (self.grad0[1:] + self.grad0[:-1])
        return rho, z, d_rho, d_z, np.hypot(d_rho, d_z), grad0

    def area(self, u: RadialProfile) -> float:
        rho, z, _, _, ds, _ = self._segments()
        return float(np.sum(u.value(np.hypot(rho, z)) ** 4 * 2.0 * math.pi * rho * ds))

    def flux(self, u: RadialProfile) -> float:
        """(1/4pi) * int |grad phi|_g dA_g."""
        rho, z, _, _, ds, grad0 = self._segments()
        return float(np.sum(u.value(np.hypot(rho, z)) ** 2 * grad0 * rho * ds)) / 2.0

    def coarea(self, u: RadialProfile) -> float:
        """int dA_g / |grad phi|_g."""
        rho, z, _, _, ds, grad0 = self._segments()
        return float(np.sum(u.value(np.hypot(rho, z)) ** 6 * 2.0 * math.pi * rho * ds / grad0))

    def enclosed_volume(self, volume: Callable[[ArrayLike], np.ndarray]) -> float:
        """Signed volume inside the arc, from the flux of W(r)/(4 pi r^2) * x/r through it.

        volume is the signed coordinate-ball volume W(r) of the ambient metric.
        """
        rho, z, d_rho, d_z, _, _ = self._segments()
        r = np.hypot(rho, z)
        return float(0.5 * np.sum(volume(r) * rho * (z * d_rho - rho * d_z) / r**3))


def _crosses(phi: np.ndarray, level: float, a: Tuple[int, int], b: Tuple[int, int]) -> bool:
    return bool((phi[a] > level) != (phi[b] > level))


def _edge_nodes(edge: Edge) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    kind, i, j = edge
    if kind == "xi":
        return (i, j), (i + 1, j)
    return (i, j), (i, j + 1)


def _edge_point(grid: AxisymGrid, phi: np.ndarray, level: float, edge: Edge) -> Tuple[float, float]:
    a, b = _edge_nodes(edge)
    s = (phi[a] - level) / (phi[a] - phi[b])
    xi = (a[0] + s * (b[0] - a[0])) * grid.h_xi
    theta = (a[1] + s * (b[1] - a[1])) * grid.h_theta
    return xi, theta


def _cell_segments(phi: np.ndarray, level: float, i: int, j: int) -> List[Tuple[Edge, Edge]]:
    bottom: Edge = ("xi", i, j)
    right: Edge = ("theta", i + 1, j)
    top: Edge = ("xi", i, j + 1)
    left: Edge = ("theta", i, j)
    crossed = [edge for edge in (bottom, right, top, left) if _crosses(phi, level, *_edge_nodes(edge))]
    if len(crossed) == 2:
        return [(crossed[0], crossed[1])]
    if len(crossed) != 4:
        return []
    # Saddle: the cell centre decides which diagonal stays connected.
    centre_above = float(np.mean(phi[i : i + 2, j : j + 2])) > level
    if centre_above == (phi[i, j] > level):
        return [(bottom, right), (top, left)]
    return [(left, bottom), (right, top)]


def _chain(adjacency: Dict[Edge, List[Edge]], start: Edge) -> List[Edge]:
    path = [start]
    previous = None
    current = start
    while True:
        onward = [edge for edge in adjacency[current] if edge != previous]
        if not onward:
            return path
        previous, current = current, onward[0]
        path.append(current)
        if len(path) > len(adjacency) + 1:
            raise ContourError("Level curve closes on itself")


def _node_gradients(grid: AxisymGrid, phi: np.ndarray) -> Tuple[RegularGridInterpolator, RegularGridInterpolator]:
    phi_xi = np.gradient(phi, grid.h_xi, axis=0, edge_order=2)
    phi_theta = np.gradient(phi, grid.h_theta, axis=1, edge_order=2)
    phi_theta[:, 0] = 0.0
    phi_theta[:, -1] = 0.0
    nodes = (grid.xi, grid.theta)
    return RegularGridInterpolator(nodes, phi_xi), RegularGridInterpolator(nodes, phi_theta)


def trace_level(grid: AxisymGrid, phi: np.ndarray, level: float) -> LevelContour:
    """The arc {phi = level} on grid, with phi sampled at the grid nodes."""
    if phi.shape != grid.shape:
        raise ContourError(f"Field shape {phi.shape} does not match grid {grid.shape}")
    above = phi > level
    cells = (above[:-1, :-1] != above[1:, :-1]) | (above[:-1, 1:] != above[1:, 1:])
    cells |= (above[:-1, :-1] != above[:-1, 1:]) | (above[1:, :-1] != above[1:, 1:])

    adjacency: Dict[Edge, List[Edge]] = {}
    for i, j in zip(*np.nonzero(cells)):
        for first, second in _cell_segments(phi, level, int(i), int(j)):
            adjacency.setdefault(first, []).append(second)
            adjacency.setdefault(second, []).append(first)
    if not adjacency:
        raise ContourError(f"Level {level:g} does not cross the grid")

    north = [edge for edge in adjacency if edge[0] == "xi" and edge[2] == 0]
    south = [edge for edge in adjacency if edge[0] == "xi" and edge[2] == grid.n_mu - 1]
    if len(north) != 1 or len(south) != 1:
        raise ContourError(
            f"Level {level:g} meets the axis {len(north)} times in the north and {len(south)} in the south"
        )
    path = _chain(adjacency, north[0])
    if path[-1] != south[0]:
        raise ContourError(f"Level {level:g} does not run from pole to pole")
    if len(path) != len(adjacency):
        raise ContourError(f"Level {level:g} has {len(adjacency) - len(path)} crossings off its main arc")

    points = np.array([_edge_point(grid, phi, level, edge) for edge in path])
    xi, theta = points[:, 0], points[:, 1]
    r_b = grid.boundary.radius(theta)
    log_rt = math.log(grid.truncation_radius)
    span = log_rt - np.log(r_b)
    beta = grid.boundary.d_theta(theta) / r_b
    radius = np.exp((1.0 - xi) * np.log(r_b) + xi * log_rt)

    d_xi, d_theta = _node_gradients(grid, phi)
    phi_l = d_xi(points) / span
    phi_theta_l = d_theta(points) - (1.0 - xi) * beta * phi_l
    grad0 = np.sqrt(phi_l**2 + phi_theta_l**2) / radius
    return LevelContour(
        level=float(level),
        rho=radius * np.sin(theta),
        z=radius * np.cos(theta),
        grad0=grad0,
    )
