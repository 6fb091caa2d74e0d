import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakmeas import kernels
from weakmeas._backend import NUMBA_AVAILABLE, get_backend, set_backend, use_backend
from weakmeas.gabor_space import PhaseGrid
from weakmeas.phase_grid import make_grid
from weakmeas.quantum_state import make_test_state

needs_numba = pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")


@pytest.fixture(scope="module")
def inputs():
    g = make_grid(-8.0, 8.0, 128)
    psi = make_test_state("two_peak", g, momentum=0.3).amplitudes
    pg = PhaseGrid(-5.0, 5.0, 24, -4.0, 4.0, 20)
    return g, psi, pg


def _both(fn):
    with use_backend("numpy"):
        ref = fn()
    with use_backend("numba"):
        out = fn()
    return ref, out


@needs_numba
class TestBackendAgreement:
    def test_gabor_analysis(self, inputs):
        g, psi, pg = inputs
        ref, out = _both(lambda: kernels.gabor_analysis(psi, g.x, g.dx, pg.a1, pg.a2, 1.0, 2.0, 0.5))
        assert np.allclose(out, ref, atol=1e-13)

    def test_gabor_synthesis(self, inputs):
        g, psi, pg = inputs
        field = kernels.gabor_analysis(psi, g.x, g.dx, pg.a1, pg.a2)
        ref, out = _both(lambda: kernels.gabor_synthesis(field, pg.a1, pg.a2, g.x, 1.0, 2.0, 0.5))
        assert np.allclose(out, ref, atol=1e-12)

    def test_reproducing_kernel(self, inputs):
        g, psi, pg = inputs
        field = kernels.gabor_analysis(psi, g.x, g.dx, pg.a1, pg.a2)
        ref, out = _both(lambda: kernels.reproducing_kernel(field, pg.a1, pg.a2))
        assert np.allclose(out, ref, atol=1e-12)

    @pytest.mark.parametrize("g1, g2", [(0.67, 1.5), (2.0, 0.25)])
    def test_smeared_density(self, inputs, g1, g2):
        g, psi, pg = inputs
        fine = np.repeat(psi, 2) * g.dx / 2
        ref, out = _both(lambda: kernels.smeared_density(fine, g.x_min, g.dx / 2, g.x, g.dx, pg.a1, pg.a2, g1, g2, 2.0))
        assert np.allclose(out, ref, rtol=1e-12, atol=1e-15)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(-7.9, 7.8), min_size=1, max_size=50))
    def test_cubic_interp(self, inputs, points):
        g, psi, _ = inputs
        xq = np.array(points)
        ref, out = _both(lambda: kernels.cubic_interp(psi, g.x_min, g.dx, xq))
        assert np.allclose(out, ref, atol=1e-14)


class TestCubicInterp:
    def test_exact_for_cubics(self):
        x0, h = -1.0, 0.1
        nodes = x0 + h * np.arange(30)
        poly = lambda x: 0.3 * x**3 - x**2 + 2 * x - 1  # noqa: E731
        xq = np.linspace(-0.8, 1.6, 37)
        assert np.allclose(kernels.cubic_interp(poly(nodes).astype(complex), x0, h, xq), poly(xq), atol=1e-12)

    def test_outside_is_zero(self):
        vals = np.ones(16, dtype=complex)
        out = kernels.cubic_interp(vals, 0.0, 1.0, np.array([-5.0, 40.0]))
        assert np.all(out == 0)


class TestBackendSelection:
    def test_set_and_restore(self):
        before = get_backend()
        with use_backend("numpy"):
            assert get_backend() == "numpy"
        assert get_backend() == before

    def test_invalid_name(self):
        with pytest.raises(ValueError):
            set_backend("fortran")

    def test_environment_variable(self):
        env = dict(os.environ, WEAKMEAS_BACKEND="numpy")
        code = "from weakmeas._backend import get_backend; print(get_backend())"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"
