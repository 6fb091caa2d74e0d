"""CSV/JSON import and export. Numbers are written with 17 significant digits."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gabor_space import GaborField
from .kraus_measure import JointDistribution
from .phase_grid import PositionGrid, UnitSystem, WaveFunction, as_position, make_grid

FLOAT_FORMAT = "%.17g"


def _write_csv(path: Path, header: str, columns: list[np.ndarray]) -> None:
    data = np.column_stack(columns)
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FORMAT, delimiter=",")


def _read_csv(path: Path, header: str) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != header:
            raise ValueError(f"{path}: expected header {header!r}, found {first!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def units_to_dict(units: UnitSystem) -> dict:
    return {"units": units.kind, "b": units.b}


def units_from_dict(meta: dict) -> UnitSystem:
    kind = meta.get("units")
    if kind == "dimensionless":
        return UnitSystem.dimensionless()
    if kind == "dimensioned":
        return UnitSystem.dimensioned(float(meta["b"]))
    raise ValueError(f"unknown unit system {kind!r}")


def write_wavefunction(psi: WaveFunction, path: str | Path) -> tuple[Path, Path]:
    """CSV ``x,re,im`` plus a JSON sidecar ``{units, b, n, x_min, x_max}``."""
    path = Path(path)
    pos = as_position(psi)
    g = pos.grid
    _write_csv(path, "x,re,im", [g.x, pos.amplitudes.real, pos.amplitudes.imag])
    meta = {**units_to_dict(pos.units), "n": g.n, "x_min": g.x_min, "x_max": g.x_max}
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def read_wavefunction(path: str | Path) -> WaveFunction:
    path = Path(path)
    side = sidecar_path(path)
    if not path.exists():
        raise FileNotFoundError(f"state file {path} not found")
    if not side.exists():
        raise FileNotFoundError(f"state sidecar {side} not found")
    meta = json.loads(side.read_text())
    grid: PositionGrid = make_grid(meta["x_min"], meta["x_max"], int(meta["n"]))
    data = _read_csv(path, "x,re,im")
    if data.shape != (grid.n, 3):
        raise ValueError(f"{path}: expected {grid.n} rows of x,re,im, found shape {data.shape}")
    if not np.allclose(data[:, 0], grid.x, rtol=0, atol=1e-9 * max(1.0, abs(grid.x_max))):
        raise ValueError(f"{path}: x column does not match the sidecar grid")
    return WaveFunction(grid, units_from_dict(meta), data[:, 1] + 1j * data[:, 2])


def write_gabor_field(field: GaborField, path: str | Path, husimi: bool = False) -> Path:
    """CSV ``a1,a2,re,im``, or ``a1,a2,density`` with ``|F|^2`` when ``husimi`` is set."""
    path = Path(path)
    pg = field.grid
    a1, a2 = np.meshgrid(pg.a1, pg.a2, indexing="ij")
    if husimi:
        _write_csv(path, "a1,a2,density", [a1.ravel(), a2.ravel(), field.husimi.ravel()])
    else:
        v = field.values.ravel()
        _write_csv(path, "a1,a2,re,im", [a1.ravel(), a2.ravel(), v.real, v.imag])
    return path


def write_distribution(dist: JointDistribution, path: str | Path) -> Path:
    path = Path(path)
    pg = dist.pgrid
    a1, a2 = np.meshgrid(pg.a1, pg.a2, indexing="ij")
    _write_csv(path, "xm,pm,density", [a1.ravel(), a2.ravel(), dist.density.ravel()])
    return path


def read_distribution_csv(path: str | Path) -> np.ndarray:
    """Rows ``(xm, pm, density)``."""
    return _read_csv(Path(path), "xm,pm,density")


def write_samples(samples: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    _write_csv(path, "xm,pm", [samples[:, 0], samples[:, 1]])
    return path


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
