"""Coherent states, detector wavefunctions, test states and overlaps.

Coherent states use the phase convention

    <x|alpha> = (2/pi)^(1/4) exp(2 i a2 (x - a1/2)) exp(-(x - a1)^2)

(dimensionless units). With this phase the position-space overlap of two
coherent states equals the closed form
``exp(-(|a'|^2 + |a''|^2)/2 + conj(a') a'')`` exactly, including its phase,
which the Gabor-space and Kraus-operator code relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phase_grid import (
    BOUNDARY_TOLERANCE,
    DIMENSIONLESS,
    PositionGrid,
    UnitSystem,
    WaveFunction,
    inner_product,
)

# coherent-state centres must stay this far from the grid edges
COHERENT_MARGIN = 4.0


@dataclass(frozen=True)
class PhasePoint:
    """Measurement outcome ``alpha = (x_m, p_m)`` in dimensionless units."""

    a1: float
    a2: float

    def __post_init__(self):
        if not (math.isfinite(self.a1) and math.isfinite(self.a2)):
            raise ValueError("phase-space point must be finite")

    @property
    def complex(self) -> complex:
        return complex(self.a1, self.a2)


@dataclass(frozen=True)
class WeaknessConfig:
    """Squeezing ``b`` and weakness ``lam`` with the broadened detector widths.

    ``b1 = (lam + 2)/lam * b`` and ``b2 = lam/(lam + 2) * b``, so that
    ``b1 * b2 = b**2`` and both tend to ``b`` as ``lam`` grows.
    """

    b: float
    lam: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def b1(self) -> float:
        return (self.lam + 2.0) / self.lam * self.b

    @property
    def b2(self) -> float:
        return self.lam / (self.lam + 2.0) * self.b


def coherent_amplitude(alpha: PhasePoint, x: np.ndarray) -> np.ndarray:
    return (
        (2.0 / math.pi) ** 0.25
        * np.exp(2j * alpha.a2 * (x - 0.5 * alpha.a1))
        * np.exp(-((x - alpha.a1) ** 2))
    )


def coherent_state(alpha: PhasePoint, grid: PositionGrid) -> WaveFunction:
    if alpha.a1 - grid.x_min <= COHERENT_MARGIN or grid.x_max - alpha.a1 <= COHERENT_MARGIN:
        raise ValueError(
            f"coherent state at a1={alpha.a1} is within {COHERENT_MARGIN} of the grid edge"
        )
    p_edge = math.pi / (2.0 * grid.dx)
    if abs(alpha.a2) + COHERENT_MARGIN >= p_edge:
        raise ValueError(f"coherent state at a2={alpha.a2} is not resolved (|p| limit {p_edge:.3g})")
    return WaveFunction(grid, DIMENSIONLESS, coherent_amplitude(alpha, grid.x))


def coherent_overlap(a: PhasePoint, b: PhasePoint) -> complex:
    """Closed-form ``<a|b>``."""
    za, zb = a.complex, b.complex
    return complex(np.exp(-(abs(za) ** 2 + abs(zb) ** 2) / 2.0 + za.conjugate() * zb))


def detector_d1(b1: float, grid: PositionGrid, units: UnitSystem | None = None) -> WaveFunction:
    """Position-detector wavefunction ``(2/(pi b1))^(1/4) exp(-x^2/b1)``."""
    if not b1 > 0:
        raise ValueError("b1 must be positive")
    amps = (2.0 / (math.pi * b1)) ** 0.25 * np.exp(-grid.x**2 / b1)
    return WaveFunction(grid, units or UnitSystem.dimensioned(b1), amps)


def detector_d2_momentum(b2: float, grid: PositionGrid, units: UnitSystem | None = None) -> WaveFunction:
    """Momentum-detector wavefunction ``(2 b2/pi)^(1/4) exp(-b2 p^2)`` on the conjugate nodes."""
    if not b2 > 0:
        raise ValueError("b2 must be positive")
    units = units or UnitSystem.dimensioned(b2)
    p = grid.p(units.kappa)
    amps = (2.0 * b2 / math.pi) ** 0.25 * np.exp(-b2 * p**2)
    return WaveFunction(grid, units, amps, rep="p")


def detector_d2_position(b2: float, grid: PositionGrid, units: UnitSystem | None = None) -> WaveFunction:
    """Position form ``(1/(2 pi b2))^(1/4) exp(-x^2/(4 b2))`` of the momentum detector."""
    if not b2 > 0:
        raise ValueError("b2 must be positive")
    amps = (1.0 / (2.0 * math.pi * b2)) ** 0.25 * np.exp(-grid.x**2 / (4.0 * b2))
    return WaveFunction(grid, units or UnitSystem.dimensioned(b2), amps)


def fidelity(phi: WaveFunction, psi: WaveFunction) -> float:
    """``|<phi|psi>| / (|phi| |psi|)``: insensitive to global phases."""
    denom = phi.norm * psi.norm
    if denom == 0.0:
        raise ValueError("fidelity of a zero state is undefined")
    return min(1.0, abs(inner_product(phi, psi)) / denom)


def make_test_state(
    kind: str,
    grid: PositionGrid,
    units: UnitSystem = DIMENSIONLESS,
    *,
    center: float = 0.0,
    width: float = 1.0,
    momentum: float = 0.0,
    sep: float = 4.0,
) -> WaveFunction:
    """Normalized test states in the coordinates of ``units``.

    ``gaussian``:  exp(-((x - center)/width)^2) exp(i kappa momentum x)
    ``two_peak``:  sum of two such Gaussians at ``center +- sep/2`` (even cat state)
    ``hermite1``:  (x - center) exp(-((x - center)/width)^2), odd about ``center``

    With dimensionless units, ``gaussian`` at width 1 is the coherent state
    at ``(center, momentum)`` up to a global phase.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    x = grid.x
    envelope = lambda c: np.exp(-(((x - c) / width) ** 2))  # noqa: E731
    kind = kind.lower().replace("-", "_")
    if kind == "gaussian":
        amps = envelope(center).astype(np.complex128)
    elif kind == "two_peak":
        amps = (envelope(center - sep / 2.0) + envelope(center + sep / 2.0)).astype(np.complex128)
    elif kind == "hermite1":
        amps = ((x - center) * envelope(center)).astype(np.complex128)
    else:
        raise ValueError(f"unknown test state kind {kind!r}")
    amps = amps * np.exp(1j * units.kappa * momentum * x)
    mags = np.abs(amps)
    if max(mags[0], mags[-1]) > BOUNDARY_TOLERANCE * mags.max():
        raise ValueError(f"{kind} state is truncated by the grid [{grid.x_min}, {grid.x_max}]")
    return WaveFunction(grid, units, amps).normalized()
