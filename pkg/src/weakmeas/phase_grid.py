"""Uniform position/momentum grids, Fourier interconversion, quadrature and units.

Two unit systems are supported. In dimensioned units (hbar = 1, squeezing
parameter ``b`` with dimension length^2) plane waves are ``exp(i p x)``. In
dimensionless units, obtained by ``x = xbar / sqrt(2 b)``, ``p = pbar sqrt(b/2)``
and ``psi(x) = (2 b)^(1/4) psibar(xbar)``, the product ``xbar pbar`` equals
``2 x p`` so plane waves are ``exp(2 i p x)``. The factor in the exponent is the
unit system's Fourier factor ``kappa``; it is stored on :class:`UnitSystem`
and nowhere else.

The unitary transform used throughout is::

    psi_p(p) = sqrt(kappa / 2 pi) * integral dx exp(-i kappa p x) psi(x)

evaluated on the conjugate grid ``p_k = (k - n/2) dp`` with
``dp = 2 pi / (n dx kappa)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

BOUNDARY_TOLERANCE = 1e-8
NORMALIZED_TOLERANCE = 1e-6


class TruncationWarning(UserWarning):
    """A state has non-negligible amplitude at the edge of its grid."""


@dataclass(frozen=True)
class PositionGrid:
    """Uniform periodic grid ``x_j = x_min + j dx`` for ``j = 0..n-1``."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (self.x_max > self.x_min):
            raise ValueError(f"degenerate interval [{self.x_min}, {self.x_max}]")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @cached_property
    def x(self) -> np.ndarray:
        nodes = self.x_min + self.dx * np.arange(self.n)
        nodes.setflags(write=False)
        return nodes

    def dp(self, kappa: float) -> float:
        return 2.0 * math.pi / (self.n * self.dx * kappa)

    def p(self, kappa: float) -> np.ndarray:
        """Conjugate momentum nodes for Fourier factor ``kappa``."""
        return (np.arange(self.n) - self.n // 2) * self.dp(kappa)

    def same_as(self, other: "PositionGrid", rtol: float = 1e-12) -> bool:
        scale = max(abs(self.x_min), abs(self.x_max), 1.0)
        return (
            self.n == other.n
            and abs(self.x_min - other.x_min) <= rtol * scale
            and abs(self.x_max - other.x_max) <= rtol * scale
        )


def make_grid(x_min: float, x_max: float, n: int) -> PositionGrid:
    return PositionGrid(float(x_min), float(x_max), int(n))


@dataclass(frozen=True)
class UnitSystem:
    """Either dimensioned with squeezing parameter ``b`` or dimensionless."""

    kind: str
    b: float | None = None

    def __post_init__(self):
        if self.kind not in ("dimensioned", "dimensionless"):
            raise ValueError(f"unknown unit system {self.kind!r}")
        if self.kind == "dimensioned":
            if self.b is None or not self.b > 0:
                raise ValueError("dimensioned units need b > 0")

    @classmethod
    def dimensioned(cls, b: float) -> "UnitSystem":
        return cls("dimensioned", float(b))

    @classmethod
    def dimensionless(cls) -> "UnitSystem":
        return cls("dimensionless", None)

    @property
    def kappa(self) -> float:
        return 1.0 if self.kind == "dimensioned" else 2.0

    @property
    def is_dimensionless(self) -> bool:
        return self.kind == "dimensionless"


DIMENSIONLESS = UnitSystem.dimensionless()


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Samples of a 1D state on a :class:`PositionGrid`.

    ``rep`` is ``"x"`` when ``amplitudes`` are position samples and ``"p"``
    when they sit on the conjugate momentum nodes ``grid.p(units.kappa)``.
    The amplitude array is made read-only; transforms return new objects.
    """

    grid: PositionGrid
    units: UnitSystem
    amplitudes: np.ndarray
    rep: str = "x"
    norm_cache: float | None = field(default=None, compare=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} amplitudes, got shape {amps.shape}")
        if self.rep not in ("x", "p"):
            raise ValueError(f"rep must be 'x' or 'p', got {self.rep!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.x if self.rep == "x" else self.grid.p(self.units.kappa)

    @property
    def weight(self) -> float:
        return self.grid.dx if self.rep == "x" else self.grid.dp(self.units.kappa)

    @cached_property
    def norm(self) -> float:
        if self.norm_cache is not None:
            return self.norm_cache
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * self.weight)

    def with_amplitudes(self, amplitudes, rep: str | None = None) -> "WaveFunction":
        return WaveFunction(self.grid, self.units, amplitudes, rep or self.rep)

    def normalized(self) -> "WaveFunction":
        nrm = self.norm
        if nrm == 0.0:
            raise ValueError("cannot normalize a zero state")
        return WaveFunction(self.grid, self.units, self.amplitudes / nrm, self.rep, 1.0)

    def __mul__(self, scalar):
        return self.with_amplitudes(self.amplitudes * scalar)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# Fourier machinery
# ---------------------------------------------------------------------------


def _alternating(n: int) -> np.ndarray:
    return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)


def _expand(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def fourier_forward(values, x0: float, dx: float, kappa: float, axis: int = -1, sign: int = -1):
    """``sqrt(kappa/2pi) dx sum_j exp(sign i kappa p_k x_j) values_j`` on the conjugate nodes."""
    values = np.asarray(values, dtype=np.complex128)
    axis = axis % values.ndim
    n = values.shape[axis]
    dp = 2.0 * math.pi / (n * dx * kappa)
    p = (np.arange(n) - n // 2) * dp
    alt = _expand(_alternating(n), axis, values.ndim)
    if sign < 0:
        core = np.fft.fft(values * alt, axis=axis)
    else:
        core = np.fft.ifft(values * alt, axis=axis) * n
    phase = _expand(np.exp(sign * 1j * kappa * p * x0), axis, values.ndim)
    return math.sqrt(kappa / (2.0 * math.pi)) * dx * phase * core


def fourier_inverse(values, x0: float, dx: float, kappa: float, axis: int = -1, sign: int = -1):
    """Inverse of :func:`fourier_forward` with the same ``sign`` argument."""
    values = np.asarray(values, dtype=np.complex128)
    axis = axis % values.ndim
    n = values.shape[axis]
    dp = 2.0 * math.pi / (n * dx * kappa)
    p = (np.arange(n) - n // 2) * dp
    alt = _expand(_alternating(n), axis, values.ndim)
    phase = _expand(np.exp(-sign * 1j * kappa * p * x0), axis, values.ndim)
    if sign < 0:
        core = np.fft.ifft(values * phase, axis=axis) * n
    else:
        core = np.fft.fft(values * phase, axis=axis)
    return math.sqrt(kappa / (2.0 * math.pi)) * dp * alt * core


def to_momentum(psi: WaveFunction) -> WaveFunction:
    if psi.rep != "x":
        raise ValueError("state is already in the momentum representation")
    kappa = psi.units.kappa
    amps = fourier_forward(psi.amplitudes, psi.grid.x_min, psi.grid.dx, kappa)
    return WaveFunction(psi.grid, psi.units, amps, "p")


def to_position(psi: WaveFunction) -> WaveFunction:
    if psi.rep != "p":
        raise ValueError("state is already in the position representation")
    kappa = psi.units.kappa
    amps = fourier_inverse(psi.amplitudes, psi.grid.x_min, psi.grid.dx, kappa)
    return WaveFunction(psi.grid, psi.units, amps, "x")


def as_position(psi: WaveFunction) -> WaveFunction:
    return psi if psi.rep == "x" else to_position(psi)


def upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited (zero-padded FFT) refinement of periodic samples by ``factor``.

    The refined samples sit at ``x_min + j dx / factor`` and reproduce the
    originals at every ``factor``-th node.
    """
    if factor == 1:
        return np.asarray(values, dtype=np.complex128)
    n = values.shape[0]
    coeffs = np.fft.fft(values)
    padded = np.zeros(n * factor, dtype=np.complex128)
    half = n // 2
    padded[:half] = coeffs[:half]
    padded[-half:] = coeffs[-half:]
    # split the Nyquist bin symmetrically
    padded[half] = 0.5 * coeffs[half]
    padded[-half] = 0.5 * coeffs[half]
    return np.fft.ifft(padded) * factor


def resample(psi: WaveFunction, grid: PositionGrid) -> WaveFunction:
    """Evaluate the band-limited interpolant of ``psi`` on another grid.

    Points outside the source interval are set to zero (the interpolant is
    periodic, so its images there are not part of the state).
    """
    pos = as_position(psi)
    src = pos.grid
    if src.same_as(grid):
        return pos
    kappa = pos.units.kappa
    mom = fourier_forward(pos.amplitudes, src.x_min, src.dx, kappa)
    p = src.p(kappa)
    weights = np.full(src.n, 1.0)
    weights[0] = 0.5  # split the Nyquist mode symmetrically
    x = grid.x
    kernel = np.exp(1j * kappa * np.outer(x, p))
    amps = math.sqrt(kappa / (2.0 * math.pi)) * src.dp(kappa) * (kernel @ (weights * mom))
    amps = amps + 0.5 * math.sqrt(kappa / (2.0 * math.pi)) * src.dp(kappa) * mom[0] * np.exp(-1j * kappa * p[0] * x)
    amps[(x < src.x_min) | (x > src.x_max - src.dx)] = 0.0
    return WaveFunction(grid, pos.units, amps)


def spectral_radius(psi: WaveFunction, rel_tol: float = 1e-13) -> float:
    """Largest |kappa p| at which the momentum amplitude exceeds ``rel_tol`` of its peak."""
    mom = np.abs(to_momentum(as_position(psi)).amplitudes)
    if mom.max() == 0.0:
        return 0.0
    k = np.abs(psi.grid.p(psi.units.kappa)) * psi.units.kappa
    return float(k[mom > rel_tol * mom.max()].max())


def refinement_factor(dx: float, bandwidth: float) -> int:
    """Power-of-two subdivision of ``dx`` for which the trapezoid rule does not alias ``bandwidth``."""
    needed = bandwidth * dx / (2.0 * math.pi) * 1.15
    factor = 1
    while factor < needed:
        factor *= 2
    return factor


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def check_truncation(psi: WaveFunction, tol: float = BOUNDARY_TOLERANCE, what: str = "state") -> bool:
    """Warn with :class:`TruncationWarning` if edge amplitudes exceed ``tol`` of the peak."""
    mags = np.abs(psi.amplitudes)
    peak = mags.max()
    if peak == 0.0:
        return False
    edge = max(mags[0], mags[-1])
    if edge > tol * peak:
        warnings.warn(
            f"{what} is truncated by its grid: edge/peak amplitude {edge / peak:.2e} > {tol:.0e}",
            TruncationWarning,
            stacklevel=3,
        )
        return True
    return False


def _check_compatible(phi: WaveFunction, psi: WaveFunction) -> None:
    if not phi.grid.same_as(psi.grid):
        raise ValueError("states live on different grids")
    if phi.units != psi.units:
        raise ValueError("states use different unit systems")
    if phi.rep != psi.rep:
        raise ValueError("states are in different representations")


def inner_product(phi: WaveFunction, psi: WaveFunction) -> complex:
    """``<phi|psi>`` by the uniform-grid rule (trapezoid for decaying states)."""
    _check_compatible(phi, psi)
    return complex(np.vdot(phi.amplitudes, psi.amplitudes) * phi.weight)


def convert_units(psi: WaveFunction, target: UnitSystem) -> WaveFunction:
    """Rescale a state between dimensioned and dimensionless units.

    Grid endpoints are scaled by ``1/sqrt(2b)`` (or ``sqrt(2b)`` going back)
    and amplitudes by ``(2b)^(1/4)`` so the norm is unchanged. Converting
    between two dimensioned systems goes through dimensionless units.
    """
    source = psi.units
    if source == target:
        return psi
    if psi.rep != "x":
        return to_momentum(convert_units(to_position(psi), target))
    if source.kind == "dimensioned" and target.kind == "dimensioned":
        return convert_units(convert_units(psi, DIMENSIONLESS), target)
    if source.kind == "dimensioned":
        scale = math.sqrt(2.0 * source.b)
        grid = make_grid(psi.grid.x_min / scale, psi.grid.x_max / scale, psi.grid.n)
        return WaveFunction(grid, target, psi.amplitudes * math.sqrt(scale))
    if target.b is None:
        raise ValueError("conversion to dimensioned units needs b")
    scale = math.sqrt(2.0 * target.b)
    grid = make_grid(psi.grid.x_min * scale, psi.grid.x_max * scale, psi.grid.n)
    return WaveFunction(grid, target, psi.amplitudes / math.sqrt(scale))


def moment(psi: WaveFunction, observable: str, order: int) -> float:
    """``<x^order>`` or ``<p^order>`` of a normalized state, by grid quadrature."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if abs(psi.norm - 1.0) > NORMALIZED_TOLERANCE:
        raise ValueError(f"moment needs a normalized state, norm = {psi.norm:.8f}")
    observable = observable.upper()
    if observable == "X":
        pos = as_position(psi)
        check_truncation(pos)
        dens, nodes, weight = np.abs(pos.amplitudes) ** 2, pos.grid.x, pos.grid.dx
    elif observable == "P":
        mom = psi if psi.rep == "p" else to_momentum(psi)
        kappa = psi.units.kappa
        dens, nodes, weight = np.abs(mom.amplitudes) ** 2, psi.grid.p(kappa), psi.grid.dp(kappa)
    else:
        raise ValueError(f"observable must be 'X' or 'P', got {observable!r}")
    return float(np.sum(dens * nodes**order) * weight)


def variance(psi: WaveFunction, observable: str) -> float:
    return moment(psi, observable, 2) - moment(psi, observable, 1) ** 2
