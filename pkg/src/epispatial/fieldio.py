"""Plain-text snapshot files for grid fields and masks.

Layout::

    field <name> nx <nx> ny <ny> hx <hx> hy <hy> t <time>
    <nx values for row j = 0>
    ...
    <nx values for row j = ny - 1>

Mask files use the same header with 0/1 entries.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import CellMask, Grid2D

_FMT = "%.15g"


def format_field(values: np.ndarray, grid: Grid2D, name: str, t: float = 0.0, integer: bool = False) -> str:
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    header = f"field {name} nx {grid.nx} ny {grid.ny} hx {_FMT % grid.hx} hy {_FMT % grid.hy} t {_FMT % t}"
    fmt = "%d" if integer else _FMT
    rows = [" ".join(fmt % v for v in row) for row in values]
    return "\n".join([header, *rows]) + "\n"


def write_field(path, values: np.ndarray, grid: Grid2D, name: str, t: float = 0.0) -> Path:
    path = Path(path)
    path.write_text(format_field(values, grid, name, t))
    return path


def write_mask(path, mask: CellMask, name: str = "mask") -> Path:
    path = Path(path)
    path.write_text(format_field(mask.membership.astype(int), mask.grid, name, integer=True))
    return path


def read_field(path) -> tuple[np.ndarray, dict]:
    """Return ``(values, header)`` where header has name, nx, ny, hx, hy, t."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty snapshot file")
    tokens = lines[0].split()
    if len(tokens) != 12 or tokens[0] != "field":
        raise ValueError(f"{path}:1: malformed header {lines[0]!r}")
    keys = tokens[2::2]
    if keys != ["nx", "ny", "hx", "hy", "t"]:
        raise ValueError(f"{path}:1: malformed header {lines[0]!r}")
    header = {
        "name": tokens[1],
        "nx": int(tokens[3]),
        "ny": int(tokens[5]),
        "hx": float(tokens[7]),
        "hy": float(tokens[9]),
        "t": float(tokens[11]),
    }
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != header["ny"]:
        raise ValueError(f"{path}: expected {header['ny']} rows, found {len(rows)}")
    values = np.array([[float(v) for v in row.split()] for row in rows])
    if values.shape != (header["ny"], header["nx"]):
        raise ValueError(f"{path}: expected {header['nx']} values per row")
    return values, header


def read_mask(path, grid: Grid2D) -> CellMask:
    values, header = read_field(path)
    if (header["nx"], header["ny"]) != (grid.nx, grid.ny):
        raise ValueError(f"{path}: mask resolution does not match the grid")
    if not np.isin(values, (0.0, 1.0)).all():
        raise ValueError(f"{path}: mask entries must be 0 or 1")
    return CellMask(grid, values.astype(bool))
