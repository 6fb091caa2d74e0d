import json

import numpy as np
import pytest

from weakmeas import io
from weakmeas.gabor_space import PhaseGrid, gabor_forward
from weakmeas.kraus_measure import Strong, joint_distribution
from weakmeas.phase_grid import UnitSystem, make_grid
from weakmeas.quantum_state import make_test_state


class TestWaveFunctionFiles:
    @pytest.mark.parametrize("units", [UnitSystem.dimensionless(), UnitSystem.dimensioned(0.7)])
    def test_round_trip_is_exact(self, tmp_path, units):
        g = make_grid(-8.0, 8.0, 128)
        psi = make_test_state("two_peak", g, units, momentum=0.3)
        csv, side = io.write_wavefunction(psi, tmp_path / "psi.csv")
        back = io.read_wavefunction(csv)
        assert np.array_equal(back.amplitudes, psi.amplitudes)
        assert back.units == psi.units
        meta = json.loads(side.read_text())
        assert meta["n"] == 128 and meta["units"] == units.kind

    def test_missing_files(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            io.read_wavefunction(tmp_path / "nope.csv")
        (tmp_path / "a.csv").write_text("x,re,im\n")
        with pytest.raises(FileNotFoundError, match="sidecar"):
            io.read_wavefunction(tmp_path / "a.csv")

    def test_bad_header_and_shape(self, tmp_path):
        g = make_grid(-4.0, 4.0, 16)
        psi = make_test_state("gaussian", g, width=0.5)
        csv, _ = io.write_wavefunction(psi, tmp_path / "psi.csv")
        lines = csv.read_text().splitlines()
        csv.write_text("\n".join(["x,real,imag"] + lines[1:]) + "\n")
        with pytest.raises(ValueError, match="header"):
            io.read_wavefunction(csv)
        csv.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(ValueError, match="rows"):
            io.read_wavefunction(csv)


class TestOtherWriters:
    def test_distribution_round_trip(self, tmp_path, two_peak):
        pg = PhaseGrid.square(8.0, 32)
        dist = joint_distribution(two_peak, Strong(), pg)
        rows = io.read_distribution_csv(io.write_distribution(dist, tmp_path / "d.csv"))
        assert rows.shape == (32 * 32, 3)
        assert np.array_equal(rows[:, 2].reshape(32, 32), dist.density)

    def test_gabor_field(self, tmp_path, two_peak):
        field = gabor_forward(two_peak, PhaseGrid.square(8.0, 16), warn=False)
        path = io.write_gabor_field(field, tmp_path / "f.csv")
        assert path.read_text().startswith("a1,a2,re,im\n")
        path = io.write_gabor_field(field, tmp_path / "q.csv", husimi=True)
        assert path.read_text().startswith("a1,a2,density\n")

    def test_seventeen_digits(self, tmp_path):
        path = io.write_samples(np.array([[1 / 3, 2 / 3]]), tmp_path / "s.csv")
        assert path.read_text().splitlines()[1] == "0.33333333333333331,0.66666666666666663"

    def test_json_numpy_types(self, tmp_path):
        path = io.write_json({"a": np.float64(1.5), "b": np.arange(2), "c": np.bool_(True)}, tmp_path / "o.json")
        assert json.loads(path.read_text()) == {"a": 1.5, "b": [0, 1], "c": True}
