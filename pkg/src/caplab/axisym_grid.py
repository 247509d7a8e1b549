"""Boundary-fitted meridian grid and the bilinear energy discretization on it.

Nodes sit on rays theta_j (uniform in [0, pi], poles included) at
r = r_b(theta)^(1 - xi) * R_T^xi with xi uniform in [0, 1]. In the log radius
l = ln r the Dirichlet energy of u^4 g0 reads

    E[phi] = 2 pi * int int u^2 r sin(theta) (phi_l^2 + phi_theta^2) dl dtheta,

which is assembled with Q1 elements and 2x2 Gauss points in (xi, theta).
The weight sin(theta) vanishes on the axis, so the poles need no special rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Tuple

import numpy as np
from scipy import sparse

from caplab.meridian import MeridianCurve
from caplab.profiles import RadialProfile


class GridError(ValueError):
    """Raised when a meridian grid cannot be built."""


_GAUSS = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])

# Local node order: (0,0), (1,0), (0,1), (1,1) in (xi, theta).
_DN_DP = lambda q: np.array([-(1.0 - q), 1.0 - q, -q, q])  # noqa: E731
_DN_DQ = lambda p: np.array([-(1.0 - p), -p, 1.0 - p, p])  # noqa: E731

ROBIN_MODES = ("conformal", "plain")


@dataclass(frozen=True, eq=False)
class AxisymGrid:
    boundary: MeridianCurve
    truncation_radius: float
    n_rho: int
    n_mu: int
    xi: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)
    log_rb: np.ndarray = field(init=False, repr=False)
    span: np.ndarray = field(init=False, repr=False)
    beta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n_rho < 8 or self.n_mu < 8:
            raise GridError(f"Grid too coarse: {self.n_rho}x{self.n_mu}")
        _, r_max = self.boundary.extent()
        if self.truncation_radius <= r_max:
            raise GridError(
                f"Truncation radius {self.truncation_radius} must exceed the boundary ({r_max})"
            )
        theta = np.linspace(0.0, math.pi, self.n_mu)
        r_b = self.boundary.radius(theta)
        object.__setattr__(self, "xi", np.linspace(0.0, 1.0, self.n_rho))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "log_rb", np.log(r_b))
        object.__setattr__(self, "span", math.log(self.truncation_radius) - np.log(r_b))
        object.__setattr__(self, "beta", self.boundary.d_theta(theta) / r_b)

    @property
    def h_xi(self) -> float:
        return 1.0 / (self.n_rho - 1)

    @property
    def h_theta(self) -> float:
        return math.pi / (self.n_mu - 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_rho, self.n_mu)

    def radii(self) -> np.ndarray:
        """Node radii, shape (n_rho, n_mu)."""
        log_r = np.outer(1.0 - self.xi, self.log_rb) + np.outer(self.xi, np.full(self.n_mu, math.log(self.truncation_radius)))
        return np.exp(log_r)

    def rho_mu(self) -> Tuple[np.ndarray, np.ndarray]:
        """Compactified coordinates rho = 1/r and mu = cos(theta) at every node."""
        rho = 1.0 / self.radii()
        mu = np.broadcast_to(np.cos(self.theta), rho.shape)
        return rho, np.array(mu)

    def column_xi(self, r: float) -> np.ndarray:
        """xi at which each ray reaches coordinate radius r."""
        return (math.log(r) - self.log_rb) / self.span

    def coarsened(self) -> "AxisymGrid":
        return AxisymGrid(
            boundary=self.boundary,
            truncation_radius=self.truncation_radius,
            n_rho=(self.n_rho - 1) // 2 + 1,
            n_mu=(self.n_mu - 1) // 2 + 1,
        )

    def with_truncation(self, truncation_radius: float) -> "AxisymGrid":
        return AxisymGrid(
            boundary=self.boundary,
            truncation_radius=truncation_radius,
            n_rho=self.n_rho,
            n_mu=self.n_mu,
        )

    def node_index(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return i * self.n_mu + j


def assemble_energy(grid: AxisymGrid, u: RadialProfile, robin: str = "conformal") -> sparse.csr_matrix:
    """Matrix K with phi^T K phi equal to the discrete Dirichlet energy plus the far-field term."""
    if robin not in ROBIN_MODES:
        raise GridError(f"Unknown Robin closure {robin!r}; expected one of {ROBIN_MODES}")
    n_el_xi = grid.n_rho - 1
    n_el_th = grid.n_mu - 1
    h_xi, h_th = grid.h_xi, grid.h_theta
    log_rt = math.log(grid.truncation_radius)
    xi0 = grid.xi[:-1][:, None]
    th0 = grid.theta[:-1][None, :]

    local = np.zeros((n_el_xi, n_el_th, 4, 4))
    for p in _GAUSS:
        for q in _GAUSS:
            xi_g = xi0 + p * h_xi
            th_g = th0 + q * h_th
            r_b = grid.boundary.radius(th_g[0])[None, :]
            beta = (grid.boundary.d_theta(th_g[0]) / grid.boundary.radius(th_g[0]))[None, :]
            span = log_rt - np.log(r_b)
            r = np.exp((1.0 - xi_g) * np.log(r_b) + xi_g * log_rt)
            l_theta = (1.0 - xi_g) * beta
            weight = 2.0 * math.pi * u.value(r) ** 2 * r * np.sin(th_g) * span
            a_xx = weight * (1.0 + l_theta**2) / span**2
            a_xt = -weight * l_theta / span
            a_tt = weight

            g_xi = _DN_DP(q) / h_xi
            g_th = _DN_DQ(p) / h_th
            scale = 0.25 * h_xi * h_th
            local += scale * (
                np.einsum("ij,ab->ijab", a_xx, np.outer(g_xi, g_xi))
                + np.einsum("ij,ab->ijab", a_xt, np.outer(g_xi, g_th) + np.outer(g_th, g_xi))
                + np.einsum("ij,ab->ijab", a_tt, np.outer(g_th, g_th))
            )

    ii, jj = np.meshgrid(np.arange(n_el_xi), np.arange(n_el_th), indexing="ij")
    nodes = np.stack(
        [
            grid.node_index(ii, jj),
            grid.node_index(ii + 1, jj),
            grid.node_index(ii, jj + 1),
            grid.node_index(ii + 1, jj + 1),
        ],
        axis=-1,
    )
    rows = np.broadcast_to(nodes[..., :, None], local.shape)
    cols = np.broadcast_to(nodes[..., None, :], local.shape)
    size = grid.n_rho * grid.n_mu
    matrix = sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(size, size))
    return (matrix + _robin_term(grid, u, robin)).tocsr()


def robin_coefficient(u: RadialProfile, radius: float, robin: str) -> float:
    u_r = float(u.value(radius))
    if robin == "plain":
        return u_r**2 / radius
    # Exact for the monopole of u*phi when u is flat-harmonic.
    return u_r * float(u.first(radius)) + u_r**2 / radius


def _robin_term(grid: AxisymGrid, u: RadialProfile, robin: str) -> sparse.coo_matrix:
    radius = grid.truncation_radius
    kappa = robin_coefficient(u, radius, robin)
    h_th = grid.h_theta
    th0 = grid.theta[:-1]
    local = np.zeros((grid.n_mu - 1, 2, 2))
    for q in _GAUSS:
        shape = np.array([1.0 - q, q])
        local += 0.5 * h_th * np.sin(th0 + q * h_th)[:, None, None] * np.outer(shape, shape)
    local *= 2.0 * math.pi * kappa * radius**2
    j = np.arange(grid.n_mu - 1)
    outer_row = grid.n_rho - 1
    nodes = np.stack([grid.node_index(outer_row, j), grid.node_index(outer_row, j + 1)], axis=-1)
    rows = np.broadcast_to(nodes[:, :, None], local.shape)
    cols = np.broadcast_to(nodes[:, None, :], local.shape)
    size = grid.n_rho * grid.n_mu
    return sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(size, size))
