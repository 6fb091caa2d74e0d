"""Gabor transform ``F(alpha) = <alpha|psi>``, its inverse, and the projection onto Gabor space.

All phase-space integrals use the product midpoint rule on a :class:`PhaseGrid`
with the measure ``d^2 alpha / pi``, so the discrete resolution of identity
``sum_cells |alpha><alpha| da1 da2 / pi`` approximates the unit operator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .phase_grid import DIMENSIONLESS, PositionGrid, TruncationWarning, WaveFunction, as_position

GABOR_PREFACTOR = (2.0 / math.pi) ** 0.25
# relative |F|^2 at the phase-grid edge above which the grid is flagged as too small
EDGE_DENSITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform cell-centred grid over ``(alpha1, alpha2)``.

    Node ``(i, j)`` sits at the centre of its cell:
    ``a1_i = a1_min + (i + 1/2) da1`` and likewise for ``a2``.
    """

    a1_min: float
    a1_max: float
    n1: int
    a2_min: float
    a2_max: float
    n2: int

    def __post_init__(self):
        if self.n1 < 16 or self.n2 < 16:
            raise ValueError(f"phase grid needs at least 16 nodes per axis, got {self.n1}x{self.n2}")
        if not (self.a1_max > self.a1_min and self.a2_max > self.a2_min):
            raise ValueError("phase grid intervals must be non-degenerate")

    @classmethod
    def square(cls, half_width: float = 6.0, n: int = 96) -> "PhaseGrid":
        return cls(-half_width, half_width, n, -half_width, half_width, n)

    @classmethod
    def conjugate(cls, grid: PositionGrid, a1_min: float, a1_max: float, n1: int) -> "PhaseGrid":
        """Grid whose ``alpha2`` axis is exactly conjugate to ``grid`` under kappa = 2.

        With ``da2 = pi / (n dx)`` and ``n2 = n`` the discrete sum
        ``sum_j exp(2 i a2_j (x - x')) da2`` is ``(pi/dx) delta_{x x'}`` on the
        position nodes, which makes discrete completeness checks exact in the
        momentum direction.
        """
        da2 = math.pi / (grid.n * grid.dx)
        half = 0.5 * grid.n * da2
        return cls(a1_min, a1_max, n1, -half, half, grid.n)

    @property
    def da1(self) -> float:
        return (self.a1_max - self.a1_min) / self.n1

    @property
    def da2(self) -> float:
        return (self.a2_max - self.a2_min) / self.n2

    @cached_property
    def a1(self) -> np.ndarray:
        nodes = self.a1_min + (np.arange(self.n1) + 0.5) * self.da1
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def a2(self) -> np.ndarray:
        nodes = self.a2_min + (np.arange(self.n2) + 0.5) * self.da2
        nodes.setflags(write=False)
        return nodes

    @property
    def cell_area(self) -> float:
        return self.da1 * self.da2

    @property
    def weight(self) -> float:
        """Quadrature weight of one cell under ``d^2 alpha / pi``."""
        return self.cell_area / math.pi

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    def same_as(self, other: "PhaseGrid", rtol: float = 1e-12) -> bool:
        mine = np.array([self.a1_min, self.a1_max, self.a2_min, self.a2_max])
        theirs = np.array([other.a1_min, other.a1_max, other.a2_min, other.a2_max])
        return self.shape == other.shape and np.allclose(mine, theirs, rtol=rtol, atol=rtol)


@dataclass(frozen=True, eq=False)
class GaborField:
    """Complex function on a :class:`PhaseGrid`, ``values[i, j] = F(a1_i, a2_j)``."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "GaborField") -> "GaborField":
        _check_same_grid(self, other)
        return GaborField(self.grid, self.values + other.values)

    def __sub__(self, other: "GaborField") -> "GaborField":
        _check_same_grid(self, other)
        return GaborField(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "GaborField":
        return GaborField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    @property
    def husimi(self) -> np.ndarray:
        """``|F|^2``: the Husimi-style phase-space density of the preimage state."""
        return np.abs(self.values) ** 2


def _check_same_grid(f: GaborField, g: GaborField) -> None:
    if not f.grid.same_as(g.grid):
        raise ValueError("Gabor fields live on different phase grids")


def _warn_if_truncated(field: GaborField) -> None:
    dens = field.husimi
    peak = dens.max()
    if peak == 0.0:
        return
    edge = max(dens[0].max(), dens[-1].max(), dens[:, 0].max(), dens[:, -1].max())
    if edge > EDGE_DENSITY_TOLERANCE * peak:
        warnings.warn(
            f"phase grid truncates the state's phase-space support: edge/peak |F|^2 = {edge / peak:.2e}",
            TruncationWarning,
            stacklevel=3,
        )


def gabor_forward(psi: WaveFunction, pgrid: PhaseGrid, warn: bool = True) -> GaborField:
    """``F(alpha) = <alpha|psi>`` at every node of ``pgrid`` by position-grid quadrature."""
    if not psi.units.is_dimensionless:
        raise ValueError("the Gabor transform needs a dimensionless state")
    pos = as_position(psi)
    values = kernels.gabor_analysis(
        pos.amplitudes, pos.grid.x, pos.grid.dx, pgrid.a1, pgrid.a2, c=1.0, kappa=2.0, k=0.5
    )
    field = GaborField(pgrid, GABOR_PREFACTOR * values)
    if warn:
        _warn_if_truncated(field)
    return field


def gabor_inverse(field: GaborField, grid: PositionGrid) -> WaveFunction:
    """``psi(x) = pi^-1 int d^2 alpha <x|alpha> F(alpha)`` (resolution of identity)."""
    pg = field.grid
    amps = kernels.gabor_synthesis(field.values, pg.a1, pg.a2, grid.x, c=1.0, kappa=2.0, k=0.5)
    return WaveFunction(grid, DIMENSIONLESS, GABOR_PREFACTOR * pg.weight * amps)


# constant that makes the alpha1-marginal inverse exact for the phase-free transform
_MARGINAL_INVERSE_CONSTANT = (2.0 * math.pi**5) ** -0.25
_PRINTED_MARGINAL_CONSTANT = (math.pi**5 / 2.0) ** 0.25


def gabor_inverse_printed(field: GaborField, grid: PositionGrid, constant: str = "printed") -> WaveFunction:
    """Diagnostic marginal inverse ``f(x) = C int da2 exp(2 i a2 x) int da1 F0(a1, a2)``.

    ``F0`` is the phase-free transform, obtained from ``F`` by removing the
    ``exp(i a1 a2)`` factor of the coherent-state phase convention. With
    ``constant="printed"`` the prefactor is ``(pi^5/2)^(1/4)``; with
    ``constant="consistent"`` it is ``(2 pi^5)^(-1/4)``, the value for which the
    formula is an exact inverse. The two differ by ``pi^(5/2)``.
    Only points whose Gaussian window fits inside the ``alpha1`` range are
    reconstructed faithfully.
    """
    if constant == "printed":
        c = _PRINTED_MARGINAL_CONSTANT
    elif constant == "consistent":
        c = _MARGINAL_INVERSE_CONSTANT
    else:
        raise ValueError("constant must be 'printed' or 'consistent'")
    pg = field.grid
    phase_free = field.values * np.exp(-1j * np.outer(pg.a1, pg.a2))
    marginal = phase_free.sum(axis=0) * pg.da1
    amps = c * pg.da2 * (np.exp(2j * np.outer(grid.x, pg.a2)) @ marginal)
    return WaveFunction(grid, DIMENSIONLESS, amps)


def project_G(field: GaborField) -> GaborField:
    """``(P_G F)(a') = pi^-1 int d^2 a'' <a'|a''> F(a'')`` by 2D quadrature."""
    pg = field.grid
    out = kernels.reproducing_kernel(field.values, pg.a1, pg.a2)
    return GaborField(pg, pg.weight * out)


def gabor_dot(f: GaborField, g: GaborField) -> complex:
    """``<F|G> = pi^-1 int d^2 alpha conj(F) G``."""
    _check_same_grid(f, g)
    return complex(np.vdot(f.values, g.values) * f.grid.weight)


def gabor_norm(f: GaborField) -> float:
    return math.sqrt(max(gabor_dot(f, f).real, 0.0))
