"""CSV and manifest persistence (17 significant digits, one-line headers)."""
from __future__ import annotations

import json
import math
import platform
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .spectral import GridFunction, discrete_norms, shift

FMT = "%.17g"
BRANCH_COLUMNS = ("kappa", "arclength", "residual_sup", "c1_norm", "holder_seminorm", "clearance")
BULK_COLUMNS = ("x", "y", "q", "u_x", "u_y", "p")
TIMESERIES_COLUMNS = ("t", "sup_norm", "c1_norm", "l2_norm", "mean", "drift")


def write_table(path, columns: Sequence[str], rows) -> Path:
    path = Path(path)
    data = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=",".join(columns), comments="")
    return path


def read_table(path):
    """Return ``(columns, data)`` for a CSV written by :func:`write_table`."""
    path = Path(path)
    with path.open() as fh:
        columns = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return columns, data


def write_profile(path, eta: GridFunction) -> Path:
    return write_table(path, ("x", "eta"), np.column_stack([eta.x, eta.values]))


def read_profile(path) -> GridFunction:
    cols, data = read_table(path)
    if cols != ["x", "eta"]:
        raise ValueError(f"{path}: expected columns x,eta, got {cols}")
    return GridFunction(data[:, 1].copy())


def write_branch(path, points) -> Path:
    rows = [(p.kappa, p.arclength, p.diagnostics.residual_sup, p.diagnostics.c1_norm,
             p.diagnostics.holder_seminorm, p.diagnostics.bottom_clearance) for p in points]
    return write_table(path, BRANCH_COLUMNS, rows)


def write_bulk(path, bulk) -> Path:
    return write_table(path, BULK_COLUMNS, np.column_stack([bulk.columns()[c] for c in BULK_COLUMNS]))


def timeseries_rows(traj, reference: GridFunction | None = None, speed: float = 0.0) -> List[tuple]:
    """Norms per sample plus drift ``sup|eta(x + speed t, t) - reference|``."""
    rows = []
    for t, s in traj:
        nm = discrete_norms(s)
        drift = (shift(s, -speed * t) - reference).sup() if reference is not None else math.nan
        rows.append((t, nm.sup_norm, nm.c1_norm, nm.l2_norm, s.mean(), drift))
    return rows


def write_trajectory(directory, traj, reference: GridFunction | None = None, speed: float = 0.0) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = [write_profile(directory / f"profile_{i:05d}.csv", s) for i, s in enumerate(traj.states)]
    files.append(write_table(directory / "timeseries.csv", TIMESERIES_COLUMNS,
                             timeseries_rows(traj, reference, speed)))
    return files


def software_versions() -> Dict[str, str]:
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "darcy_waves": __version__}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(path, record: Dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> Dict:
    return json.loads(Path(path).read_text())
