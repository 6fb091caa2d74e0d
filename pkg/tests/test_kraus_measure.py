import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakmeas.gabor_space import PhaseGrid, gabor_forward
from weakmeas.kraus_measure import (
    SingleKrausConfig,
    Strong,
    Weak,
    as_phase_points,
    distribution_moments,
    joint_distribution,
    normalization_N,
    outcome_grid,
    povm_check,
    povm_check_bruteforce,
    predicted_moments,
    sample_outcomes,
    single_kraus_apply,
    single_kraus_completeness,
    strong_kraus_apply,
    weak_kernel_coefficients,
    weak_kraus_apply,
    weak_kraus_projection,
)
from weakmeas.phase_grid import TruncationWarning, UnitSystem, make_grid, variance
from weakmeas.quantum_state import PhasePoint, coherent_state, fidelity, make_test_state


class TestSingleKraus:
    @pytest.mark.parametrize("lam", [0.3, 1.0, 5.0])
    def test_completeness(self, lam):
        nodes = np.linspace(-3, 3, 7)
        a = np.linspace(-15, 15, 3001)
        assert np.allclose(single_kraus_completeness(lam, nodes, a), 1.0, atol=1e-10)

    @pytest.mark.parametrize("observable", ["X", "P"])
    def test_outcome_density_integrates_to_one(self, two_peak, observable):
        outcomes = np.linspace(-8, 8, 161)
        total = sum(single_kraus_apply(two_peak, SingleKrausConfig(0.8, observable, a))[1] for a in outcomes)
        assert total * (outcomes[1] - outcomes[0]) == pytest.approx(1.0, abs=1e-6)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SingleKrausConfig(0.0, "X", 0.0)
        with pytest.raises(ValueError):
            SingleKrausConfig(1.0, "Y", 0.0)


class TestKernelConstants:
    @given(st.floats(1e-3, 1e3))
    def test_coefficients_are_reciprocal(self, lam):
        a, c = weak_kernel_coefficients(lam)
        assert a * c == pytest.approx(1.0)

    def test_normalization(self):
        assert normalization_N(2.0) == pytest.approx(math.sqrt(8 / math.pi**3))
        with pytest.raises(ValueError):
            normalization_N(-1.0)


class TestStrong:
    def test_post_state_is_coherent(self, two_peak):
        alpha = PhasePoint(0.5, 0.25)
        out = strong_kraus_apply(two_peak, alpha)
        assert fidelity(out.post_state, coherent_state(alpha, two_peak.grid)) == pytest.approx(1.0)
        # node (8, 8) of this cell-centred grid sits at alpha
        field = gabor_forward(two_peak, PhaseGrid(0.0, 1.0, 17, 0.0, 0.5, 17), warn=False)
        assert (field.grid.a1[8], field.grid.a2[8]) == pytest.approx((0.5, 0.25))
        assert out.density == pytest.approx(abs(field.values[8, 8]) ** 2 / math.pi, rel=1e-12)


class TestWeak:
    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_closed_form_matches_double_integral(self, two_peak, lam):
        alpha = PhasePoint(0.7, -0.4)
        closed = weak_kraus_apply(two_peak, alpha, lam)
        direct = weak_kraus_projection(two_peak, alpha, lam, PhaseGrid.square(8.0, 128))
        unnorm = closed.post_state.amplitudes * math.sqrt(closed.density)
        assert np.abs(unnorm - direct.amplitudes).max() < 1e-5

    def test_limits(self, two_peak):
        alpha = PhasePoint(0.2, 0.1)
        strong = strong_kraus_apply(two_peak, alpha).post_state
        assert fidelity(weak_kraus_apply(two_peak, alpha, 1e3).post_state, strong) > 0.999
        assert fidelity(weak_kraus_apply(two_peak, alpha, 1e-3).post_state, two_peak) > 0.999

    def test_outcome_off_grid(self, two_peak):
        with pytest.raises(ValueError):
            weak_kraus_apply(two_peak, PhasePoint(9.0, 0.0), 1.0)
        with pytest.raises(ValueError):
            weak_kraus_apply(two_peak, PhasePoint(0.0, 60.0), 1.0)

    def test_requires_dimensionless_normalized(self, two_peak, dimensioned_grid):
        with pytest.raises(ValueError):
            weak_kraus_apply(two_peak * 2.0, PhasePoint(0.0, 0.0), 1.0)
        psi = make_test_state("gaussian", dimensioned_grid, UnitSystem.dimensioned(1.0))
        with pytest.raises(ValueError):
            weak_kraus_apply(psi, PhasePoint(0.0, 0.0), 1.0)


@pytest.fixture(scope="module")
def grids():
    g = make_grid(-12.0, 12.0, 128)
    return g, PhaseGrid.conjugate(g, -16.0, 16.0, 128)


class TestPOVM:
    @pytest.mark.parametrize("lam", [0.5, 10.0])
    def test_completeness(self, grids, lam):
        rep = povm_check(lam, *grids)
        assert rep.max_identity_deviation < 1e-3
        assert rep.constant_ratio == pytest.approx(1.0, abs=1e-3)
        assert rep.kraus_integral_offdiag < 1e-6 * rep.kraus_integral_constant

    def test_wrong_normalization_detected(self, grids):
        rep = povm_check(1.0, *grids, N=2 * normalization_N(1.0))
        assert rep.max_identity_deviation == pytest.approx(3.0, rel=1e-2)

    def test_bruteforce_agrees(self):
        g = make_grid(-6.0, 6.0, 32)
        pg = PhaseGrid.conjugate(g, -9.0, 9.0, 48)
        rep = povm_check(1.0, g, pg)
        brute = povm_check_bruteforce(1.0, g, pg)
        inner = slice(3, 29)
        dev = np.abs(brute[inner, inner] - np.eye(26)).max()
        assert dev == pytest.approx(rep.max_identity_deviation, abs=1e-10)


def _husimi_oracle(psi, lam, points):
    """Weak density as the Husimi density smoothed by exp(-mu |alpha - alpha_m|^2), mu = lam (lam + 2)."""
    mu = lam * (lam + 2.0)
    fine = PhaseGrid.square(9.0, 180)
    q = gabor_forward(psi, fine).husimi
    a1, a2 = np.meshgrid(fine.a1, fine.a2, indexing="ij")
    out = []
    for xm, pm in points:
        kernel = np.exp(-mu * ((a1 - xm) ** 2 + (a2 - pm) ** 2))
        out.append(mu / math.pi**2 * np.sum(kernel * q) * fine.cell_area)
    return np.array(out)


class TestJointDistribution:
    def test_strong_dimensionless_is_husimi(self, two_peak):
        pg = PhaseGrid.square(8.0, 64)
        dist = joint_distribution(two_peak, Strong(), pg)
        assert np.allclose(dist.density, gabor_forward(two_peak, pg).husimi / math.pi)
        assert dist.mass == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.filterwarnings("ignore::weakmeas.phase_grid.TruncationWarning")
    @pytest.mark.parametrize("lam", [0.5, 3.0])
    def test_weak_matches_smoothed_husimi(self, two_peak, lam):
        pg = PhaseGrid(-1.0, 1.0, 16, -0.5, 0.5, 16)
        dist = joint_distribution(two_peak, Weak(1.0, lam), pg)
        pts = [(pg.a1[i], pg.a2[j]) for i, j in [(0, 0), (5, 9), (15, 3), (8, 8)]]
        expected = _husimi_oracle(two_peak, lam, pts)
        got = np.array([dist.density[i, j] for i, j in [(0, 0), (5, 9), (15, 3), (8, 8)]])
        assert np.allclose(got, expected, rtol=1e-6)

    @pytest.mark.filterwarnings("ignore::weakmeas.phase_grid.TruncationWarning")
    def test_dimensioned_strong_matches_dimensionless(self, dimensioned_grid):
        from weakmeas.phase_grid import convert_units, DIMENSIONLESS

        b = 1.0
        psi = make_test_state("two_peak", dimensioned_grid, UnitSystem.dimensioned(b), width=1.5)
        pg = PhaseGrid(-2.0, 2.0, 16, -1.0, 1.0, 16)
        dens = joint_distribution(psi, Strong(b), pg).density
        scaled = PhaseGrid(-2.0 / math.sqrt(2), 2.0 / math.sqrt(2), 16, -1.0 * math.sqrt(0.5), math.sqrt(0.5), 16)
        ref = joint_distribution(convert_units(psi, DIMENSIONLESS), Strong(b), scaled).density
        # per dxbar dpbar = 2 d alpha1 d alpha2
        assert np.allclose(dens, ref / 2.0, rtol=1e-10)

    def test_truncating_grid_warns(self, two_peak):
        with pytest.warns(TruncationWarning):
            joint_distribution(two_peak, Strong(), PhaseGrid.square(1.0, 16))

    def test_unnormalized_rejected(self, two_peak):
        with pytest.raises(ValueError):
            joint_distribution(two_peak * 3.0, Strong(), PhaseGrid.square())

    def test_weak_moments_match_prediction(self, two_peak):
        mode = Weak(1.0, 2.0)
        dist = joint_distribution(two_peak, mode, outcome_grid(two_peak, mode, n=64))
        got, want = distribution_moments(dist), predicted_moments(two_peak, mode)
        assert got.var_x == pytest.approx(want.var_x, rel=1e-6)
        assert got.var_p == pytest.approx(want.var_p, rel=1e-6)
        assert got.mean_p == pytest.approx(0.2, abs=1e-8)

    def test_dimensionless_excess_scaling(self, two_peak):
        # strong: dimensionless excess is 1/4 in each quadrature
        pred = predicted_moments(two_peak, Strong())
        assert pred.var_x - variance(two_peak, "X") == pytest.approx(0.25)
        assert pred.var_p - variance(two_peak, "P") == pytest.approx(0.25)


@pytest.fixture(scope="module")
def dist():
    g = make_grid(-8.0, 8.0, 256)
    psi = make_test_state("two_peak", g, sep=3.0)
    return joint_distribution(psi, Strong(), PhaseGrid.square(6.0, 48))


class TestSampling:
    def test_deterministic(self, dist):
        assert np.array_equal(sample_outcomes(dist, 100, 5), sample_outcomes(dist, 100, 5))
        assert not np.array_equal(sample_outcomes(dist, 100, 5), sample_outcomes(dist, 100, 6))

    def test_inside_grid(self, dist):
        s = sample_outcomes(dist, 5000, 1)
        assert s.shape == (5000, 2)
        assert s[:, 0].min() >= -6 and s[:, 0].max() <= 6
        points = as_phase_points(s[:3])
        assert points[0].a1 == s[0, 0]

    def test_invalid_count(self, dist):
        with pytest.raises(ValueError):
            sample_outcomes(dist, 0, 1)
