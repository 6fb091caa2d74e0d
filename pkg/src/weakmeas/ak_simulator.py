"""Two-detector measurement protocol on a 3D grid.

The system (coordinate ``x``) is coupled to detector 1 (``x1``) and detector 2
(``x2``) by ``H = K (p1 x + x2 p)`` for a time ``t``; ``tau = K t``. Detector 1
is then read in position and detector 2 in momentum. Everything here is in
dimensioned units (hbar = 1, Fourier factor 1).

Detector 2 is moved to momentum space with the kernel
``exp(+i p2 x2) / sqrt(2 pi)``. With this sign the momentum detector registers
``+tau p`` and the readout at ``tau = 1`` reproduces the coherent-state
projection formula, including the ``exp(i p_m x)`` phase.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kraus_measure import JointDistribution
from .gabor_space import PhaseGrid
from .phase_grid import (
    PositionGrid,
    UnitSystem,
    WaveFunction,
    as_position,
    fourier_forward,
    fourier_inverse,
    make_grid,
    moment,
    refinement_factor,
    spectral_radius,
    upsample,
    variance,
)
from .quantum_state import WeaknessConfig

# relative norm loss tolerated when shifted arguments leave the grid
SHIFT_NORM_TOLERANCE = 1e-6
# grid spacing must not exceed sigma / MIN_POINTS_PER_SIGMA for each Gaussian factor
MIN_POINTS_PER_SIGMA = 1.25
# spectral oversampling of psi_B before cubic interpolation
SHIFT_OVERSAMPLING = 8
SHORT_TIME_LIMIT = 0.2
# peak memory of a tri-state pipeline is about this many copies of one array
PEAK_ARRAY_COPIES = 6
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


class MemoryBudgetError(RuntimeError):
    """A tri-state would exceed the configured memory budget."""


class ShortTimeWarning(UserWarning):
    """The short-time formula was evaluated outside its regime of validity."""


@dataclass(frozen=True)
class AKConfig:
    """Coupling ``K``, duration ``t`` and detector widths ``b1``, ``b2``; ``tau = K t``."""

    K: float
    t: float
    b: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("K", "t", "b", "b1", "b2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def tau(self) -> float:
        return self.K * self.t

    @classmethod
    def canonical(cls, b: float, tau: float = 1.0) -> "AKConfig":
        """Unbroadened detectors, ``b1 = b2 = b``."""
        return cls(K=1.0, t=tau, b=b, b1=b, b2=b)

    @classmethod
    def from_lambda(cls, b: float, lam: float, tau: float = 1.0) -> "AKConfig":
        w = WeaknessConfig(b, lam)
        return cls(K=1.0, t=tau, b=b, b1=w.b1, b2=w.b2)


def lambda_from_widths(b: float, b1: float | None = None, b2: float | None = None) -> float:
    """Invert the detector-width relations: ``lam = 2 b2/(b - b2) = 2 b/(b1 - b)``."""
    values = []
    if b1 is not None:
        if not b1 > b:
            raise ValueError("b1 must exceed b")
        values.append(2.0 * b / (b1 - b))
    if b2 is not None:
        if not 0 < b2 < b:
            raise ValueError("b2 must lie in (0, b)")
        values.append(2.0 * b2 / (b - b2))
    if not values:
        raise ValueError("give b1 or b2")
    if len(values) == 2 and not math.isclose(values[0], values[1], rel_tol=1e-9):
        raise ValueError(f"b1 and b2 imply different lambdas {values[0]} and {values[1]}")
    return values[0]


@dataclass(frozen=True)
class TriGrids:
    """Grids for the system coordinate and the two detector coordinates."""

    x: PositionGrid
    x1: PositionGrid
    x2: PositionGrid

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.x.n, self.x1.n, self.x2.n)

    @property
    def cell_volume(self) -> float:
        return self.x.dx * self.x1.dx * self.x2.dx

    @property
    def nbytes(self) -> int:
        return 16 * self.x.n * self.x1.n * self.x2.n

    def check_budget(self, budget: int = DEFAULT_MEMORY_BUDGET) -> None:
        need = PEAK_ARRAY_COPIES * self.nbytes
        if need > budget:
            raise MemoryBudgetError(
                f"grids {self.shape} need about {need / 2**20:.0f} MiB, budget is {budget / 2**20:.0f} MiB"
            )


@dataclass(frozen=True, eq=False)
class TriState:
    """Three-body amplitude ``phi[i, j, k]`` at ``(x_i, x1_j, x2_k)`` or ``(x_i, x1_j, p2_k)``.

    ``factors`` keeps ``(psi_B, b1, b2)`` for states still in product form,
    which the closed-form shift evolution requires.
    """

    grids: TriGrids
    amplitudes: np.ndarray
    units: UnitSystem
    det2_rep: str = "x"
    factors: tuple | None = field(default=None)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != self.grids.shape:
            raise ValueError(f"amplitude shape {amps.shape} does not match grids {self.grids.shape}")
        if self.det2_rep not in ("x", "p"):
            raise ValueError("det2_rep must be 'x' or 'p'")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def det2_nodes(self) -> np.ndarray:
        g = self.grids.x2
        return g.x if self.det2_rep == "x" else g.p(1.0)

    @property
    def det2_spacing(self) -> float:
        g = self.grids.x2
        return g.dx if self.det2_rep == "x" else g.dp(1.0)

    @property
    def norm(self) -> float:
        vol = self.grids.x.dx * self.grids.x1.dx * self.det2_spacing
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * vol)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _d1(b1: float, s):
    return (2.0 / (math.pi * b1)) ** 0.25 * np.exp(-np.square(s) / b1)


def _d2(b2: float, s):
    return (1.0 / (2.0 * math.pi * b2)) ** 0.25 * np.exp(-np.square(s) / (4.0 * b2))


def _d2_tilde(b2: float, q):
    return (2.0 * b2 / math.pi) ** 0.25 * np.exp(-b2 * np.square(q))


def _pow2_at_least(value: float, floor: int) -> int:
    n = floor
    while n < value:
        n *= 2
    return n


def default_tri_grids(
    center: float,
    sigma: float,
    cfg: AKConfig,
    n: int = 64,
    n_sigma: float = 8.0,
    points_per_sigma: float = 3.0,
    det2_half_width: float = 20.0,
) -> TriGrids:
    """Boxes spanning ``n_sigma`` standard deviations of every factor after the shift.

    ``center`` and ``sigma`` describe the system's position density. Each axis
    gets at least ``n`` points, more if needed to place ``points_per_sigma``
    nodes across the narrowest Gaussian along that axis. The detector-2 box is
    at least ``2 det2_half_width`` wide so that its conjugate momentum grid is
    fine enough for interpolated readout.
    """
    tau = cfg.tau
    s1 = math.sqrt(cfg.b1) / 2.0
    s2 = math.sqrt(cfg.b2)
    half_x = (n_sigma + 1.0) * sigma + n_sigma * tau * s2
    half_x1 = n_sigma * (s1 + tau * sigma + 0.5 * tau**2 * s2)
    half_x2 = max(n_sigma * s2, det2_half_width)

    def axis(c, half, narrowest):
        count = _pow2_at_least(2.0 * half * points_per_sigma / narrowest, n)
        return make_grid(c - half, c + half, count)

    return TriGrids(
        x=axis(center, half_x, min(sigma, s1 / tau if tau > 0 else sigma)),
        x1=axis(tau * center, half_x1, s1),
        x2=axis(0.0, half_x2, s2),
    )


def _check_resolution(spacing: float, sigma: float, what: str) -> None:
    if spacing * MIN_POINTS_PER_SIGMA > sigma:
        raise ValueError(
            f"{what} is not resolved: spacing {spacing:.4g} exceeds sigma/{MIN_POINTS_PER_SIGMA} "
            f"with sigma {sigma:.4g}"
        )


def initial_tri_state(
    psi_b: WaveFunction, b1: float, b2: float, grids: TriGrids, budget: int = DEFAULT_MEMORY_BUDGET
) -> TriState:
    """Product state ``psi_B(x) D1(x1) D2(x2)``.

    Raises :class:`MemoryBudgetError` before allocating if the grids are too
    large, and ``ValueError`` if a Gaussian factor is under-resolved.
    """
    grids.check_budget(budget)
    if psi_b.units.is_dimensionless:
        raise ValueError("the protocol simulator works in dimensioned units")
    pos = as_position(psi_b)
    if not pos.grid.same_as(grids.x):
        raise ValueError("psi_B must live on the system grid of the tri-state")
    _check_resolution(grids.x1.dx, math.sqrt(b1) / 2.0, "detector 1")
    _check_resolution(grids.x2.dx, math.sqrt(b2), "detector 2")
    _check_resolution(grids.x.dx, math.sqrt(max(variance(pos.normalized(), "X"), 0.0)), "system state")
    amps = (
        pos.amplitudes[:, None, None]
        * _d1(b1, grids.x1.x)[None, :, None]
        * _d2(b2, grids.x2.x)[None, None, :]
    )
    return TriState(grids, amps, pos.units, "x", (pos, float(b1), float(b2)))


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def evolve_shift(phi0: TriState, cfg: AKConfig) -> TriState:
    """Closed-form evolved state ``psi_B(x - x2 tau) D1(x1 - x tau + x2 tau^2/2) D2(x2)``.

    The Gaussian detector factors are evaluated analytically; ``psi_B`` is
    shifted by cubic interpolation on a spectrally oversampled copy.
    """
    if phi0.factors is None or phi0.det2_rep != "x":
        raise ValueError("closed-form evolution needs a product-form state with detector 2 in position space")
    psi_b, b1, b2 = phi0.factors
    g = phi0.grids
    tau = cfg.tau
    x, x1, x2 = g.x.x, g.x1.x, g.x2.x
    fine = upsample(psi_b.amplitudes, SHIFT_OVERSAMPLING)
    shifted = kernels.cubic_interp(
        fine, g.x.x_min, g.x.dx / SHIFT_OVERSAMPLING, x[:, None] - tau * x2[None, :]
    )
    d2 = _d2(b2, x2)
    amps = np.empty(g.shape, dtype=np.complex128)
    # one system node at a time keeps temporaries two-dimensional
    for i in range(g.x.n):
        d1 = _d1(b1, x1[:, None] - tau * x[i] + 0.5 * tau**2 * x2[None, :])
        amps[i] = d1 * (shifted[i] * d2)[None, :]
    out = TriState(g, amps, phi0.units, "x", None)
    before = phi0.norm
    if abs(out.norm - before) > SHIFT_NORM_TOLERANCE * before:
        raise ValueError(
            f"shifted state leaves the grid: norm {before:.10f} -> {out.norm:.10f}; enlarge the boxes"
        )
    return out


def trotter_oracle(phi0: TriState, cfg: AKConfig, steps: int) -> TriState:
    """Symmetric split-step propagation of ``exp(-i t K (p1 x + x2 p))``.

    Each step applies ``exp(-i dt K p1 x / 2)`` (diagonal after a Fourier
    transform along ``x1``), ``exp(-i dt K x2 p)`` (diagonal after a Fourier
    transform along ``x``), then the first half step again; adjacent half
    steps are merged. Grids are treated as periodic.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if phi0.det2_rep != "x":
        raise ValueError("the propagator needs detector 2 in position space")
    g = phi0.grids
    h = cfg.t / steps
    x, x2 = g.x.x, g.x2.x
    k = 2.0 * math.pi * np.fft.fftfreq(g.x.n, g.x.dx)
    k1 = 2.0 * math.pi * np.fft.fftfreq(g.x1.n, g.x1.dx)

    def phase_a(frac):
        return np.exp(-1j * frac * h * cfg.K * x[:, None, None] * k1[None, :, None])

    half_a, full_a = phase_a(0.5), phase_a(1.0)
    step_b = np.exp(-1j * h * cfg.K * k[:, None, None] * x2[None, None, :])

    psi = np.fft.fft(phi0.amplitudes, axis=1)
    psi *= half_a
    for s in range(steps):
        psi = np.fft.ifft(psi, axis=1)
        psi = np.fft.fft(psi, axis=0)
        psi *= step_b
        psi = np.fft.ifft(psi, axis=0)
        psi = np.fft.fft(psi, axis=1)
        psi *= full_a if s < steps - 1 else half_a
    psi = np.fft.ifft(psi, axis=1)
    return TriState(g, psi, phi0.units, "x", None)


def to_detector_momentum(phi: TriState) -> TriState:
    """Transform detector 2 with ``exp(+i p2 x2)/sqrt(2 pi)``."""
    if phi.det2_rep != "x":
        raise ValueError("detector 2 is already in momentum space")
    g2 = phi.grids.x2
    amps = fourier_forward(phi.amplitudes, g2.x_min, g2.dx, 1.0, axis=2, sign=+1)
    return TriState(phi.grids, amps, phi.units, "p", None)


def to_detector_position(phi: TriState) -> TriState:
    if phi.det2_rep != "p":
        raise ValueError("detector 2 is already in position space")
    g2 = phi.grids.x2
    amps = fourier_inverse(phi.amplitudes, g2.x_min, g2.dx, 1.0, axis=2, sign=+1)
    return TriState(phi.grids, amps, phi.units, "x", None)


def tri_state_fidelity(a: TriState, b: TriState) -> float:
    if a.det2_rep != b.det2_rep or a.grids != b.grids:
        raise ValueError("tri-states are not comparable")
    overlap = abs(np.vdot(a.amplitudes, b.amplitudes))
    return float(min(1.0, overlap / math.sqrt(np.vdot(a.amplitudes, a.amplitudes).real * np.vdot(b.amplitudes, b.amplitudes).real)))


def tri_state_distance(a: TriState, b: TriState) -> float:
    """L2 distance with the 3D quadrature weight."""
    if a.det2_rep != b.det2_rep or a.grids != b.grids:
        raise ValueError("tri-states are not comparable")
    vol = a.grids.x.dx * a.grids.x1.dx * a.det2_spacing
    return math.sqrt(float(np.sum(np.abs(a.amplitudes - b.amplitudes) ** 2)) * vol)


# ---------------------------------------------------------------------------
# Readout
# ---------------------------------------------------------------------------


def _bracket(nodes: np.ndarray, value: float, what: str) -> tuple[int, float]:
    h = nodes[1] - nodes[0]
    t = (value - nodes[0]) / h
    i = int(math.floor(t))
    if t < 0 or i > nodes.size - 1 or (i == nodes.size - 1 and t > i):
        raise ValueError(f"{what} = {value} lies outside the detector grid [{nodes[0]:.4g}, {nodes[-1]:.4g}]")
    if i == nodes.size - 1:
        return i - 1, 1.0
    return i, t - i


def readout(phi: TriState, xm: float, pm: float) -> tuple[WaveFunction, float]:
    """Unnormalized system state ``phi(x, xm, pm)`` and its density ``int dx |.|^2``.

    Values between detector nodes are bilinearly interpolated.
    """
    if phi.det2_rep != "p":
        raise ValueError("convert detector 2 to momentum space before readout")
    i, fi = _bracket(phi.grids.x1.x, xm, "x_m")
    j, fj = _bracket(phi.det2_nodes, pm, "p_m")
    a = phi.amplitudes
    sl = (
        (1 - fi) * (1 - fj) * a[:, i, j]
        + fi * (1 - fj) * a[:, i + 1, j]
        + (1 - fi) * fj * a[:, i, j + 1]
        + fi * fj * a[:, i + 1, j + 1]
    )
    state = WaveFunction(phi.grids.x, phi.units, sl)
    return state, state.norm**2


def detector_phase_grid(phi: TriState) -> PhaseGrid:
    """Cell-centred grid whose nodes coincide with the detector nodes ``(x1, p2)``."""
    g1, g2 = phi.grids.x1, phi.grids.x2
    dp = g2.dp(1.0)
    p0 = -0.5 * g2.n * dp
    return PhaseGrid(
        g1.x_min - 0.5 * g1.dx, g1.x_min + (g1.n - 0.5) * g1.dx, g1.n, p0 - 0.5 * dp, p0 + (g2.n - 0.5) * dp, g2.n
    )


def readout_distribution(phi: TriState) -> JointDistribution:
    """``P(x1, p2) = int dx |phi|^2`` at every detector node."""
    if phi.det2_rep != "p":
        raise ValueError("convert detector 2 to momentum space before readout")
    dens = np.sum(np.abs(phi.amplitudes) ** 2, axis=0) * phi.grids.x.dx
    return JointDistribution(detector_phase_grid(phi), dens, phi.units)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def post_state_closed_form(
    psi_b: WaveFunction, xm: float, pm: float, b1: float, b2: float, b: float | None = None
) -> WaveFunction:
    """Post-measurement state of the protocol at ``tau = 1`` with detector widths ``b1``, ``b2``.

    Evaluates

        C int dw exp(-(xm - x + w/2)^2 / b1) exp(-w^2 / (4 b2)) exp(i pm w) psi_B(x - w)

    as a sum over offsets ``w`` on a refined copy of the state grid, with
    ``C = 1 / (pi sqrt(2) (b1 b2)^(1/4))``, which is ``1/(pi sqrt(2b))`` when
    ``b1 b2 = b^2``. Returns the unnormalized state.
    """
    if b is not None and not math.isclose(b1 * b2, b * b, rel_tol=1e-12):
        raise ValueError("detector widths must satisfy b1 * b2 = b^2")
    pos = as_position(psi_b)
    g = pos.grid
    bandwidth = abs(pm) + spectral_radius(pos) + math.sqrt(28.0 / b2) + math.sqrt(112.0 / b1)
    factor = refinement_factor(g.dx, bandwidth)
    h = g.dx / factor
    fine = upsample(pos.amplitudes, factor)
    # fine[m] = psi(x_min + m h); psi(x_i - w_j) = fine[i * factor - j]
    reach = int(math.ceil(math.sqrt(30.0 * 4.0 * b2) / h))
    x = g.x
    base = np.arange(g.n) * factor
    acc = np.zeros(g.n, dtype=np.complex128)
    for j in range(-reach, reach + 1):
        w = j * h
        idx = base - j
        inside = (idx >= 0) & (idx < fine.size)
        if not inside.any():
            continue
        vals = np.zeros(g.n, dtype=np.complex128)
        vals[inside] = fine[idx[inside]]
        acc += np.exp(-((xm - x + 0.5 * w) ** 2) / b1) * (math.exp(-w * w / (4.0 * b2)) * np.exp(1j * pm * w)) * vals
    pref = 1.0 / (math.pi * math.sqrt(2.0) * (b1 * b2) ** 0.25)
    return WaveFunction(g, pos.units, pref * h * acc)


def post_state_strong_closed_form(psi_b: WaveFunction, xm: float, pm: float, b: float) -> WaveFunction:
    """``1/(pi sqrt(2b)) exp(-(xm-x)^2/2b) exp(i pm x) int du psi_B(u) exp(-(xm-u)^2/2b) exp(-i pm u)``."""
    pos = as_position(psi_b)
    x, dx = pos.grid.x, pos.grid.dx
    overlap = np.sum(pos.amplitudes * np.exp(-((xm - x) ** 2) / (2.0 * b)) * np.exp(-1j * pm * x)) * dx
    amps = np.exp(-((xm - x) ** 2) / (2.0 * b)) * np.exp(1j * pm * x) * overlap / (math.pi * math.sqrt(2.0 * b))
    return WaveFunction(pos.grid, pos.units, amps)


def collapsed_state(xm: float, pm: float, b: float, grid: PositionGrid) -> WaveFunction:
    """Normalized ``(1/(pi b))^(1/4) exp(i pm x) exp(-(x - xm)^2 / 2b)``."""
    x = grid.x
    amps = (1.0 / (math.pi * b)) ** 0.25 * np.exp(1j * pm * x) * np.exp(-((x - xm) ** 2) / (2.0 * b))
    return WaveFunction(grid, UnitSystem.dimensioned(b), amps)


def short_time_state(psi_b: WaveFunction, xm: float, pm: float, tau: float, b: float) -> WaveFunction:
    """Post-measurement state with the order-``tau^2`` detector-1 shift dropped.

    ``D1(xm - x tau) (2 pi)^(-1/2) int dp exp(i p x) psi_B(p) D2(pm - p tau)``,
    evaluated spectrally from the momentum representation of ``psi_B``.
    Unnormalized. Warns with :class:`ShortTimeWarning` for ``tau > 0.2``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if tau > SHORT_TIME_LIMIT:
        warnings.warn(
            f"short-time formula used at tau = {tau} > {SHORT_TIME_LIMIT}", ShortTimeWarning, stacklevel=2
        )
    pos = as_position(psi_b)
    g = pos.grid
    mom = fourier_forward(pos.amplitudes, g.x_min, g.dx, 1.0)
    filtered = mom * _d2_tilde(b, pm - tau * g.p(1.0))
    amps = _d1(b, xm - tau * g.x) * fourier_inverse(filtered, g.x_min, g.dx, 1.0)
    return WaveFunction(g, pos.units, amps)


def short_time_tri_state(psi_b: WaveFunction, tau: float, b: float, grids: TriGrids) -> TriState:
    """The short-time formula at every detector node, as a tri-state with detector 2 in momentum space."""
    pos = as_position(psi_b)
    if not pos.grid.same_as(grids.x):
        raise ValueError("psi_B must live on the system grid of the tri-state")
    if tau > SHORT_TIME_LIMIT:
        warnings.warn(
            f"short-time formula used at tau = {tau} > {SHORT_TIME_LIMIT}", ShortTimeWarning, stacklevel=2
        )
    g = pos.grid
    p = g.p(1.0)
    p2 = grids.x2.p(1.0)
    mom = fourier_forward(pos.amplitudes, g.x_min, g.dx, 1.0)
    filtered = mom[None, :] * _d2_tilde(b, p2[:, None] - tau * p[None, :])
    system = fourier_inverse(filtered, g.x_min, g.dx, 1.0, axis=1)  # [k, i]
    d1 = _d1(b, grids.x1.x[None, :] - tau * g.x[:, None])  # [i, j]
    amps = d1[:, :, None] * system.T[:, None, :]
    return TriState(grids, amps, pos.units, "p", None)
