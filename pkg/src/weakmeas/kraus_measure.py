"""Measurement operators, POVM checks, outcome distributions, moments and sampling.

Conventions
-----------
Outcome densities are ``P(alpha_m) = ||K_{alpha_m} psi||^2``. In dimensionless
units the outcome measure is ``d alpha1 d alpha2`` (no ``1/pi``); in dimensioned
units it is ``dxbar_m dpbar_m``. Since ``dxbar dpbar = 2 dx dp`` the two
densities differ by a factor of two, ``Pbar = P / 2``, and the dimensioned
weak Kraus kernel carries the prefactor ``1/(pi sqrt(2b))`` instead of
``sqrt(2)/pi``. Both integrate to one.

The weak simultaneous Kraus operator acts as the single integral

    Psi_A(x) = sqrt(2)/pi int du exp(-a (x_m - (x+u)/2)^2) exp(-c (x-u)^2)
               exp(2 i p_m (x-u)) psi(u)

with ``a = 2 lam/(lam+2)`` and ``c = (lam+2)/(2 lam)`` (dimensionless units).
It equals ``N int d^2 alpha exp(-lam |alpha_m - alpha|^2) |alpha><alpha|``
with ``N = sqrt(lam (lam+2) / pi^3)``; that double integral is kept as
:func:`weak_kraus_projection` for cross-checking.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .gabor_space import PhaseGrid, gabor_forward, gabor_inverse
from .phase_grid import (
    DIMENSIONLESS,
    NORMALIZED_TOLERANCE,
    PositionGrid,
    TruncationWarning,
    UnitSystem,
    WaveFunction,
    as_position,
    check_truncation,
    fourier_forward,
    fourier_inverse,
    make_grid,
    moment,
    refinement_factor,
    spectral_radius,
    upsample,
    variance,
)
from .quantum_state import PhasePoint, WeaknessConfig, coherent_state

# Gaussian exponents beyond this are treated as zero when sizing windows
_WINDOW_EXPONENT = 30.0
# total outcome mass below 1 - this flags a phase grid that cuts off the distribution
MASS_TOLERANCE = 1e-3


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleKrausConfig:
    """Gaussian measurement of one observable with strength ``lambda_s`` and result ``a``."""

    lambda_s: float
    observable: str
    a: float

    def __post_init__(self):
        if not self.lambda_s > 0:
            raise ValueError("lambda_s must be positive")
        if self.observable.upper() not in ("X", "P"):
            raise ValueError("observable must be 'X' or 'P'")
        object.__setattr__(self, "observable", self.observable.upper())


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result ``alpha_m``, its probability density, and the normalized post-measurement state."""

    alpha_m: PhasePoint
    density: float
    post_state: WaveFunction


@dataclass(frozen=True)
class Strong:
    """Strongest simultaneous measurement (coherent-state projection) with squeezing ``b``."""

    b: float = 1.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")


@dataclass(frozen=True)
class Weak:
    """Weak simultaneous measurement with squeezing ``b`` and weakness ``lam``."""

    b: float
    lam: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def widths(self) -> WeaknessConfig:
        return WeaknessConfig(self.b, self.lam)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Outcome density on a :class:`PhaseGrid` (axes ``x_m``, ``p_m`` in the stated units)."""

    pgrid: PhaseGrid
    density: np.ndarray
    units: UnitSystem

    def __post_init__(self):
        dens = np.array(self.density, dtype=np.float64)
        if dens.shape != self.pgrid.shape:
            raise ValueError(f"density shape {dens.shape} does not match grid {self.pgrid.shape}")
        if (dens < 0).any():
            raise ValueError("density must be nonnegative")
        dens.setflags(write=False)
        object.__setattr__(self, "density", dens)

    @property
    def cell_masses(self) -> np.ndarray:
        return self.density * self.pgrid.cell_area

    @property
    def mass(self) -> float:
        return float(self.cell_masses.sum())


@dataclass(frozen=True)
class Moments:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float


@dataclass(frozen=True)
class POVMReport:
    """Outcome of :func:`povm_check`.

    ``max_identity_deviation`` is ``max |M - I|`` over the interior block, with
    ``M`` the quadrature matrix ``dx k(x_i, x_j)`` of the summed operator.
    ``kraus_integral_constant`` is the mean interior diagonal of the summed
    Kraus operators in the same basis; ``expected_constant`` is ``pi^2 N / lam``.
    """

    lam: float
    max_identity_deviation: float
    kraus_integral_constant: float
    expected_constant: float
    kraus_integral_offdiag: float

    @property
    def constant_ratio(self) -> float:
        return self.kraus_integral_constant / self.expected_constant


# ---------------------------------------------------------------------------
# Single-observable Gaussian Kraus operator
# ---------------------------------------------------------------------------


def _single_gate(lam: float, a: float, nodes: np.ndarray) -> np.ndarray:
    return (2.0 * lam / math.pi) ** 0.25 * np.exp(-lam * (a - nodes) ** 2)


def single_kraus_apply(psi: WaveFunction, cfg: SingleKrausConfig) -> tuple[WaveFunction, float]:
    """Apply ``(2 lam/pi)^(1/4) exp(-lam (a - A)^2)``; returns the unnormalized state and ``||post||^2``."""
    pos = as_position(psi)
    if cfg.observable == "X":
        post = pos.with_amplitudes(pos.amplitudes * _single_gate(cfg.lambda_s, cfg.a, pos.grid.x))
    else:
        g, kappa = pos.grid, pos.units.kappa
        mom = fourier_forward(pos.amplitudes, g.x_min, g.dx, kappa)
        mom = mom * _single_gate(cfg.lambda_s, cfg.a, g.p(kappa))
        post = pos.with_amplitudes(fourier_inverse(mom, g.x_min, g.dx, kappa))
    return post, post.norm**2


def single_kraus_completeness(lam: float, nodes: np.ndarray, a_values: np.ndarray) -> np.ndarray:
    """``sum_a da K_a^2`` on ``nodes`` (diagonal of the operator); ideally all ones."""
    a_values = np.asarray(a_values, dtype=np.float64)
    da = a_values[1] - a_values[0]
    gates = _single_gate(lam, a_values[:, None], np.asarray(nodes)[None, :])
    return (gates**2).sum(axis=0) * da


# ---------------------------------------------------------------------------
# Simultaneous Kraus operators
# ---------------------------------------------------------------------------


def normalization_N(lam: float) -> float:
    """``sqrt(lam (lam + 2) / pi^3)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return math.sqrt(lam * (lam + 2.0) / math.pi**3)


def weak_kernel_coefficients(lam: float) -> tuple[float, float]:
    """``(a, c)`` of the dimensionless closed-form kernel; note ``a * c = 1``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return 2.0 * lam / (lam + 2.0), (lam + 2.0) / (2.0 * lam)


def _require_dimensionless_normalized(psi: WaveFunction) -> WaveFunction:
    if not psi.units.is_dimensionless:
        raise ValueError("expected a dimensionless state")
    if abs(psi.norm - 1.0) > NORMALIZED_TOLERANCE:
        raise ValueError(f"expected a normalized state, norm = {psi.norm:.8f}")
    return as_position(psi)


def _check_outcome_on_grid(alpha: PhasePoint, grid: PositionGrid, kappa: float) -> None:
    if not grid.x_min < alpha.a1 < grid.x_max:
        raise ValueError(f"x_m = {alpha.a1} lies outside the grid [{grid.x_min}, {grid.x_max}]")
    if kappa * abs(alpha.a2) >= 0.8 * math.pi / grid.dx:
        raise ValueError(f"p_m = {alpha.a2} is not resolvable on a grid with dx = {grid.dx:.4g}")


def strong_kraus_apply(psi: WaveFunction, alpha_m: PhasePoint) -> MeasurementOutcome:
    """``K = pi^(-1/2) |alpha_m><alpha_m|``: post state is ``|alpha_m>``, density ``|<alpha_m|psi>|^2 / pi``."""
    pos = _require_dimensionless_normalized(psi)
    target = coherent_state(alpha_m, pos.grid)
    overlap = np.vdot(target.amplitudes, pos.amplitudes) * pos.grid.dx
    return MeasurementOutcome(alpha_m, float(abs(overlap) ** 2 / math.pi), target)


def _weak_apply_amplitudes(
    psi: WaveFunction, xm: float, pm: float, g1: float, g2: float, kappa: float, prefactor: float
) -> np.ndarray:
    """``prefactor * int du exp(-g1 (xm-(x+u)/2)^2 - g2 (x-u)^2 + i kappa pm (x-u)) psi(u)`` on psi's nodes.

    The ``u`` integral runs on a spectrally refined copy of ``psi`` fine enough
    for the narrowest kernel factor and the ``pm`` oscillation.
    """
    g = psi.grid
    bandwidth = kappa * abs(pm) + spectral_radius(psi) + math.sqrt(112.0 * g2) + math.sqrt(28.0 * g1)
    factor = refinement_factor(g.dx, bandwidth)
    h = g.dx / factor
    fine = upsample(psi.amplitudes, factor)
    u = g.x_min + h * np.arange(g.n * factor)
    x = g.x
    half = math.sqrt(_WINDOW_EXPONENT / g2) + h
    out = np.empty(g.n, dtype=np.complex128)
    plane_u = np.exp(-1j * kappa * pm * u) * fine
    # blocks of rows keep the kernel matrix small
    block = max(1, 2_000_000 // u.size)
    for start in range(0, g.n, block):
        xs = x[start : start + block, None]
        lo = max(0, int(np.searchsorted(u, xs.min() - half)))
        hi = int(np.searchsorted(u, xs.max() + half))
        uu = u[None, lo:hi]
        kern = np.exp(-g1 * (xm - 0.5 * (xs + uu)) ** 2 - g2 * (xs - uu) ** 2)
        out[start : start + block] = kern @ plane_u[lo:hi]
    return prefactor * h * np.exp(1j * kappa * pm * x) * out


def weak_kraus_apply(psi: WaveFunction, alpha_m: PhasePoint, lam: float) -> MeasurementOutcome:
    """Weak simultaneous Kraus operator by its closed-form single integral."""
    pos = _require_dimensionless_normalized(psi)
    a, c = weak_kernel_coefficients(lam)
    _check_outcome_on_grid(alpha_m, pos.grid, 2.0)
    check_truncation(pos)
    amps = _weak_apply_amplitudes(pos, alpha_m.a1, alpha_m.a2, a, c, 2.0, math.sqrt(2.0) / math.pi)
    post = pos.with_amplitudes(amps)
    density = post.norm**2
    if density == 0.0:
        raise ValueError("outcome has zero probability density on this grid")
    return MeasurementOutcome(alpha_m, density, post.normalized())


def weak_kraus_projection(psi: WaveFunction, alpha_m: PhasePoint, lam: float, pgrid: PhaseGrid) -> WaveFunction:
    """Unnormalized ``N int d^2 alpha exp(-lam |alpha_m - alpha|^2) |alpha><alpha|psi>`` by phase-grid quadrature."""
    pos = _require_dimensionless_normalized(psi)
    field = gabor_forward(pos, pgrid)
    gate = np.exp(
        -lam * ((pgrid.a1[:, None] - alpha_m.a1) ** 2 + (pgrid.a2[None, :] - alpha_m.a2) ** 2)
    )
    weighted = type(field)(pgrid, field.values * gate)
    # gabor_inverse integrates with d^2 alpha / pi
    return gabor_inverse(weighted, pos.grid) * (math.pi * normalization_N(lam))


# ---------------------------------------------------------------------------
# POVM completeness
# ---------------------------------------------------------------------------


def povm_check(
    lam: float,
    grid: PositionGrid,
    pgrid: PhaseGrid,
    N: float | None = None,
    interior: float = 0.8,
) -> POVMReport:
    """Discrete completeness ``sum_cells da1 da2 K^dagger K`` against the identity.

    Each ``K`` is Hermitian (``R`` below is real and symmetric in ``x, u``), so
    ``K^dagger K = K K^dagger``.

    The Kraus kernel factorizes as ``R_{xm}(x, u) exp(2 i pm (x - u))`` with
    ``R`` real, so the cell sum splits exactly into a Hadamard product of
    ``sum_xm da1 R R^T`` and ``S(x, x') = sum_pm da2 exp(2 i pm (x - x'))``.
    Operators are represented by the quadrature matrices ``dx k(x_i, x_j)``,
    in which the identity is the unit matrix.
    """
    if N is None:
        N = normalization_N(lam)
    a, c = weak_kernel_coefficients(lam)
    x, dx = grid.x, grid.dx
    # closed-form prefactor sqrt(2)/pi scales linearly with N
    pref = math.sqrt(2.0) / math.pi * N / normalization_N(lam)
    diff = x[:, None] - x[None, :]
    mid = 0.5 * (x[:, None] + x[None, :])
    envelope = np.exp(-c * diff**2)
    gram = np.zeros((grid.n, grid.n))
    summed_r = np.zeros((grid.n, grid.n))
    for xm in pgrid.a1:
        r = pref * np.exp(-a * (xm - mid) ** 2) * envelope * dx
        gram += r @ r.T
        summed_r += r
    gram *= pgrid.da1
    summed_r *= pgrid.da1
    s = np.exp(2j * np.outer(pgrid.a2, diff.ravel())).sum(axis=0).reshape(diff.shape) * pgrid.da2
    m = gram * s
    k_sum = summed_r * s

    n = grid.n
    cut = int(round(n * (1.0 - interior) / 2.0))
    inner = slice(cut, n - cut)
    block = m[inner, inner]
    deviation = float(np.abs(block - np.eye(block.shape[0])).max())
    k_block = k_sum[inner, inner]
    diag = np.real(np.diag(k_block))
    offdiag = float(np.abs(k_block - np.diag(np.diag(k_block))).max())
    return POVMReport(
        lam=lam,
        max_identity_deviation=deviation,
        kraus_integral_constant=float(diag.mean()),
        expected_constant=math.pi**2 * normalization_N(lam) / lam,
        kraus_integral_offdiag=offdiag,
    )


def povm_check_bruteforce(lam: float, grid: PositionGrid, pgrid: PhaseGrid) -> np.ndarray:
    """``sum_cells da1 da2 K^dagger K`` by an explicit loop over cells (tiny grids only)."""
    a, c = weak_kernel_coefficients(lam)
    x, dx = grid.x, grid.dx
    diff = x[:, None] - x[None, :]
    mid = 0.5 * (x[:, None] + x[None, :])
    total = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for xm in pgrid.a1:
        for pm in pgrid.a2:
            k = (
                math.sqrt(2.0) / math.pi
                * np.exp(-a * (xm - mid) ** 2 - c * diff**2 + 2j * pm * diff)
                * dx
            )
            total += k.conj().T @ k
    return total * pgrid.cell_area


# ---------------------------------------------------------------------------
# Joint outcome distributions
# ---------------------------------------------------------------------------


def _weak_parameters(psi: WaveFunction, mode: Weak) -> tuple[float, float, float, float]:
    """``(g1, g2, kappa, prefactor)`` of the weak kernel in psi's units."""
    if psi.units.is_dimensionless:
        a, c = weak_kernel_coefficients(mode.lam)
        return a, c, 2.0, math.sqrt(2.0) / math.pi
    w = mode.widths
    return 1.0 / w.b1, 1.0 / (4.0 * w.b2), 1.0, 1.0 / (math.pi * math.sqrt(2.0 * mode.b))


def joint_distribution(psi: WaveFunction, mode: Strong | Weak, pgrid: PhaseGrid) -> JointDistribution:
    """Outcome density ``||K_{alpha_m} psi||^2`` at every node of ``pgrid``.

    Strong mode uses the closed-form coherent-state overlap; weak mode
    integrates ``|Psi_A(x)|^2`` of the closed-form Kraus kernel over ``x``.
    Dimensioned states give densities per ``dxbar_m dpbar_m`` (``b`` from the
    mode), dimensionless states per ``d alpha1 d alpha2``.
    """
    pos = as_position(psi)
    if abs(pos.norm - 1.0) > NORMALIZED_TOLERANCE:
        raise ValueError(f"expected a normalized state, norm = {pos.norm:.8f}")
    check_truncation(pos)
    g = pos.grid
    if isinstance(mode, Strong):
        if pos.units.is_dimensionless:
            dens = np.abs(gabor_forward(pos, pgrid, warn=False).values) ** 2 / math.pi
        else:
            b = mode.b
            amp = kernels.gabor_analysis(
                pos.amplitudes, g.x, g.dx, pgrid.a1, pgrid.a2, c=1.0 / (2.0 * b), kappa=1.0, k=0.0
            )
            dens = np.abs(amp) ** 2 / (2.0 * math.sqrt(math.pi**3 * b))
        return _checked(JointDistribution(pgrid, dens, pos.units))
    if not isinstance(mode, Weak):
        raise TypeError(f"unknown measurement mode {mode!r}")
    g1, g2, kappa, pref = _weak_parameters(pos, mode)
    pm_max = float(np.abs(pgrid.a2).max())
    bandwidth = kappa * pm_max + spectral_radius(pos) + math.sqrt(112.0 * g2) + math.sqrt(28.0 * g1)
    factor = refinement_factor(g.dx, bandwidth)
    h = g.dx / factor
    fine = upsample(pos.amplitudes, factor) * h
    margin = math.ceil(math.sqrt(_WINDOW_EXPONENT / g2) / g.dx) * g.dx
    n_out = g.n + 2 * int(round(margin / g.dx))
    x_out = g.x_min - margin + g.dx * np.arange(n_out)
    dens = kernels.smeared_density(fine, g.x_min, h, x_out, g.dx, pgrid.a1, pgrid.a2, g1, g2, kappa)
    return _checked(JointDistribution(pgrid, pref**2 * dens, pos.units))


def _checked(dist: JointDistribution) -> JointDistribution:
    if dist.mass < 1.0 - MASS_TOLERANCE:
        warnings.warn(
            f"outcome grid holds only {dist.mass:.6f} of the probability mass",
            TruncationWarning,
            stacklevel=3,
        )
    return dist


def predicted_moments(psi: WaveFunction, mode: Strong | Weak) -> Moments:
    """Closed-form outcome moments: state moments plus the detector excess variances.

    Dimensioned excesses are ``(b1+b2)/4`` in position and ``1/(4 b1) + 1/(4 b2)``
    in momentum (``b1 = b2 = b`` for strong mode). Dimensionless excesses follow
    from the unit scaling: ``(b1+b2)/(8b)`` and ``b (1/b1 + 1/b2)/8``.
    """
    pos = as_position(psi)
    b1, b2 = (mode.b, mode.b) if isinstance(mode, Strong) else (mode.widths.b1, mode.widths.b2)
    if pos.units.is_dimensionless:
        ex, ep = (b1 + b2) / (8.0 * mode.b), mode.b * (1.0 / b1 + 1.0 / b2) / 8.0
    else:
        ex, ep = (b1 + b2) / 4.0, 0.25 / b1 + 0.25 / b2
    return Moments(
        mean_x=moment(pos, "X", 1),
        mean_p=moment(pos, "P", 1),
        var_x=variance(pos, "X") + ex,
        var_p=variance(pos, "P") + ep,
    )


def outcome_grid(psi: WaveFunction, mode: Strong | Weak, n: int = 96, n_sigma: float = 8.0) -> PhaseGrid:
    """Square-cell-count outcome grid spanning ``n_sigma`` predicted standard deviations."""
    pred = predicted_moments(psi, mode)
    hx = n_sigma * math.sqrt(pred.var_x)
    hp = n_sigma * math.sqrt(pred.var_p)
    return PhaseGrid(pred.mean_x - hx, pred.mean_x + hx, n, pred.mean_p - hp, pred.mean_p + hp, n)


def distribution_moments(dist: JointDistribution) -> Moments:
    """Means and variances of the gridded distribution (midpoint rule, mass-normalized)."""
    w = dist.cell_masses
    total = w.sum()
    if total <= 0:
        raise ValueError("distribution has no mass")
    px = w.sum(axis=1) / total
    pp = w.sum(axis=0) / total
    a1, a2 = dist.pgrid.a1, dist.pgrid.a2
    mx, mp = float(px @ a1), float(pp @ a2)
    return Moments(mx, mp, float(px @ (a1 - mx) ** 2), float(pp @ (a2 - mp) ** 2))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_outcomes(dist: JointDistribution, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. outcomes as a ``(count, 2)`` array of ``(x_m, p_m)``.

    Cells are chosen by inverse CDF over the flattened cell masses and each
    draw is placed uniformly inside its cell.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(dist.cell_masses.ravel())
    if cdf[-1] <= 0:
        raise ValueError("distribution has no mass")
    cells = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
    cells = np.minimum(cells, cdf.size - 1)
    i, j = np.divmod(cells, dist.pgrid.n2)
    jitter = rng.random((count, 2))
    pg = dist.pgrid
    xm = pg.a1_min + (i + jitter[:, 0]) * pg.da1
    pm = pg.a2_min + (j + jitter[:, 1]) * pg.da2
    return np.column_stack([xm, pm])


def as_phase_points(samples: np.ndarray) -> list[PhasePoint]:
    return [PhasePoint(float(a), float(b)) for a, b in samples]


def default_dimensionless_grid() -> PositionGrid:
    return make_grid(-8.0, 8.0, 512)


__all__ = [
    "DIMENSIONLESS",
    "JointDistribution",
    "MeasurementOutcome",
    "Moments",
    "POVMReport",
    "SingleKrausConfig",
    "Strong",
    "Weak",
    "as_phase_points",
    "default_dimensionless_grid",
    "distribution_moments",
    "joint_distribution",
    "normalization_N",
    "outcome_grid",
    "povm_check",
    "povm_check_bruteforce",
    "predicted_moments",
    "sample_outcomes",
    "single_kraus_apply",
    "single_kraus_completeness",
    "strong_kraus_apply",
    "weak_kernel_coefficients",
    "weak_kraus_apply",
    "weak_kraus_projection",
]
