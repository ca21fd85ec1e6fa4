"""Structured grids, subregion masks, coefficient fields and quadrature.

Grid functions are plain numpy arrays. A field on the whole grid has shape
``(ny, nx)`` with row ``j`` holding the cells at height ``y0 + (j + 1/2) hy``.
A field restricted to a :class:`CellMask` is a 1-D array of length
``mask.cell_count`` ordered by flat (row-major) cell index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import ndimage

from .errors import ConfigError

EPS_COEF = 1e-12

_FOUR_NEIGHBOURS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centred discretisation of the rectangle
    ``[x0, x0 + lx] x [y0, y0 + ly]``."""

    lx: float
    ly: float
    nx: int
    ny: int
    x0: float = 0.0
    y0: float = 0.0

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(ny, nx)`` arrays."""
        x = self.x0 + (np.arange(self.nx) + 0.5) * self.hx
        y = self.y0 + (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def build_grid(lx: float, ly: float, nx: int, ny: int, x0: float = 0.0, y0: float = 0.0) -> Grid2D:
    errors = []
    for name, value in (("lx", lx), ("ly", ly)):
        if not np.isfinite(value) or value <= 0:
            errors.append(f"{name} must be positive (got {value})")
    for name, value in (("nx", nx), ("ny", ny)):
        if int(value) != value:
            errors.append(f"{name} must be an integer (got {value})")
        elif value < 2:
            errors.append(f"{name}: resolution too small (got {value}, need >= 2)")
    if errors:
        raise ConfigError(errors)
    return Grid2D(float(lx), float(ly), int(nx), int(ny), float(x0), float(y0))


@dataclass(frozen=True, eq=False)
class CellMask:
    """Edge-connected set of grid cells standing in for the reservoir habitat."""

    grid: Grid2D
    membership: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=bool)
        if m.shape != self.grid.shape:
            raise ConfigError(f"mask shape {m.shape} does not match grid {self.grid.shape}")
        if not m.any():
            raise ConfigError("mask is empty: no cell centre lies inside the shape")
        _, ncomp = ndimage.label(m, structure=_FOUR_NEIGHBOURS)
        if ncomp != 1:
            raise ConfigError(f"mask is disconnected ({ncomp} components)")
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @property
    def cell_count(self) -> int:
        return int(self.membership.sum())

    @property
    def indices(self) -> np.ndarray:
        """Flat (row-major) indices of the member cells."""
        return np.flatnonzero(self.membership)

    @property
    def area(self) -> float:
        return self.cell_count * self.grid.cell_area

    @property
    def is_proper(self) -> bool:
        return not self.membership.all()


def build_mask(grid: Grid2D, shape: Mapping[str, Any]) -> CellMask:
    """Mask of all cells whose centres lie inside a rectangle or disk.

    ``shape`` is ``{"kind": "rectangle", "x0", "x1", "y0", "y1"}`` or
    ``{"kind": "disk", "cx", "cy", "radius"}``. The shape must sit strictly
    inside the grid rectangle.
    """
    kind = shape.get("kind", "rectangle")
    gx0, gx1 = grid.x0, grid.x0 + grid.lx
    gy0, gy1 = grid.y0, grid.y0 + grid.ly
    X, Y = grid.centers()
    if kind == "rectangle":
        x0, x1, y0, y1 = (float(shape[k]) for k in ("x0", "x1", "y0", "y1"))
        if not (x0 < x1 and y0 < y1):
            raise ConfigError("rectangle mask needs x0 < x1 and y0 < y1")
        bbox = (x0, x1, y0, y1)
        member = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    elif kind == "disk":
        cx, cy, r = (float(shape[k]) for k in ("cx", "cy", "radius"))
        if r <= 0:
            raise ConfigError("disk mask needs a positive radius")
        bbox = (cx - r, cx + r, cy - r, cy + r)
        member = (X - cx) ** 2 + (Y - cy) ** 2 < r * r
    else:
        raise ConfigError(f"unknown mask shape kind {kind!r}")
    x0, x1, y0, y1 = bbox
    if not (gx0 < x0 and x1 < gx1 and gy0 < y0 and y1 < gy1):
        raise ConfigError("mask must be a proper subregion of the grid rectangle")
    mask = CellMask(grid, member)
    if not mask.is_proper:
        raise ConfigError("mask must be a proper subregion: it covers every cell")
    return mask


def restrict(f: np.ndarray, mask: CellMask) -> np.ndarray:
    return np.asarray(f, dtype=float)[mask.membership]


def extend_by_zero(f: np.ndarray, grid: Grid2D, mask: CellMask) -> np.ndarray:
    """Full-grid field equal to ``f`` on the mask and exactly zero elsewhere."""
    f = np.asarray(f, dtype=float)
    if mask.grid != grid:
        raise ValueError("mask/grid mismatch")
    if f.shape != (mask.cell_count,):
        raise ValueError(f"field of shape {f.shape} does not match mask with {mask.cell_count} cells")
    out = np.zeros(grid.shape)
    out[mask.membership] = f
    return out


def integrate_field(f: np.ndarray, grid: Grid2D, region: CellMask | None = None) -> float:
    """Midpoint-rule integral of a cell-centred field over the grid or a mask."""
    f = np.asarray(f, dtype=float)
    if region is not None and region.grid != grid:
        raise ValueError("mask/grid mismatch")
    if f.shape == grid.shape:
        values = f if region is None else f[region.membership]
    elif region is not None and f.shape == (region.cell_count,):
        values = f
    else:
        raise ValueError(f"field of shape {f.shape} does not live on this grid/mask")
    return float(values.sum()) * grid.cell_area


# -- coefficients -------------------------------------------------------------

COEFFICIENT_KINDS = ("constant", "piecewise", "tabulated", "profile")
PROFILES = ("cosine", "linear", "gaussian", "step", "box")


@dataclass(frozen=True)
class CoefficientSpec:
    """Recipe for a coefficient or initial-condition field.

    kinds and their parameters:

    * ``constant``: ``value``
    * ``piecewise``: ``inside``, ``outside`` (inside = on the mask)
    * ``tabulated``: ``values`` (array of shape ``(ny, nx)``) or ``file`` (snapshot path)
    * ``profile``: ``name`` in :data:`PROFILES` plus profile parameters.
      Coordinates are normalised to ``u, v`` in ``[0, 1]``:
      ``cosine`` = base + amplitude cos(pi u) cos(pi v);
      ``linear`` = base + slope_x u + slope_y v;
      ``gaussian`` = base + amplitude exp(-((u-cx)^2 + (v-cy)^2) / (2 width^2));
      ``step`` = left for u < split, right otherwise;
      ``box`` = inside on [x0, x1] x [y0, y1], outside elsewhere.
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def constant(cls, value: float) -> "CoefficientSpec":
        return cls("constant", {"value": float(value)})

    @classmethod
    def piecewise(cls, inside: float, outside: float) -> "CoefficientSpec":
        return cls("piecewise", {"inside": float(inside), "outside": float(outside)})

    @classmethod
    def tabulated(cls, values) -> "CoefficientSpec":
        return cls("tabulated", {"values": np.asarray(values, dtype=float)})

    @classmethod
    def profile(cls, name: str, **params) -> "CoefficientSpec":
        return cls("profile", {"name": name, **params})


_PROFILE_DEFAULTS = {
    "cosine": {"base": 1.0, "amplitude": 0.5},
    "linear": {"base": 1.0, "slope_x": 0.0, "slope_y": 0.0},
    "gaussian": {"base": 0.0, "amplitude": 1.0, "cx": 0.5, "cy": 0.5, "width": 0.1},
    "step": {"left": 1.0, "right": 0.0, "split": 0.5},
    "box": {"inside": 1.0, "outside": 0.0, "x0": 0.0, "x1": 0.5, "y0": 0.0, "y1": 0.5},
}


def _profile(name: str, params: Mapping[str, Any], grid: Grid2D) -> np.ndarray:
    if name not in _PROFILE_DEFAULTS:
        raise ConfigError(f"unknown profile {name!r}; expected one of {PROFILES}")
    p = dict(_PROFILE_DEFAULTS[name])
    unknown = set(params) - set(p) - {"name"}
    if unknown:
        raise ConfigError(f"profile {name!r} got unknown parameters {sorted(unknown)}")
    p.update({k: float(v) for k, v in params.items() if k != "name"})
    X, Y = grid.centers()
    u = (X - grid.x0) / grid.lx
    v = (Y - grid.y0) / grid.ly
    if name == "cosine":
        return p["base"] + p["amplitude"] * np.cos(np.pi * u) * np.cos(np.pi * v)
    if name == "linear":
        return p["base"] + p["slope_x"] * u + p["slope_y"] * v
    if name == "gaussian":
        r2 = (u - p["cx"]) ** 2 + (v - p["cy"]) ** 2
        return p["base"] + p["amplitude"] * np.exp(-r2 / (2.0 * p["width"] ** 2))
    if name == "step":
        return np.where(u < p["split"], p["left"], p["right"])
    inside = (u >= p["x0"]) & (u <= p["x1"]) & (v >= p["y0"]) & (v <= p["y1"])
    return np.where(inside, p["inside"], p["outside"])


ROLES = ("any", "positive", "nonnegative", "kappa")


def evaluate_coefficient(
    spec: CoefficientSpec,
    grid: Grid2D,
    mask: CellMask | None = None,
    *,
    role: str = "any",
    name: str = "coefficient",
    floor: float = EPS_COEF,
    restrict_to_mask: bool = False,
) -> np.ndarray:
    """Evaluate ``spec`` at the cell centres of ``grid``.

    ``role`` enforces the sign constraint of the field: ``positive`` requires
    values >= ``floor``; ``nonnegative`` requires values >= 0; ``kappa``
    requires values >= ``floor`` on the mask and exactly zero off it. With
    ``restrict_to_mask`` the result (and the sign check) is limited to the
    mask cells.
    """
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    kind, p = spec.kind, spec.params
    if kind == "constant":
        values = np.full(grid.shape, float(p["value"]))
    elif kind == "piecewise":
        if mask is None:
            raise ConfigError(f"{name}: piecewise coefficient needs a mask")
        values = np.where(mask.membership, float(p["inside"]), float(p["outside"]))
    elif kind == "tabulated":
        if "values" in p:
            values = np.array(p["values"], dtype=float)
        else:
            from .fieldio import read_field

            try:
                values, _ = read_field(p["file"])
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"{name}: cannot read tabulated values ({exc})") from exc
        if values.shape != grid.shape:
            raise ConfigError(f"{name}: tabulated values have shape {values.shape}, grid is {grid.shape}")
    elif kind == "profile":
        values = _profile(p["name"], p, grid)
    else:
        raise ConfigError(f"{name}: unknown coefficient kind {kind!r}")

    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{name} has non-finite values")

    if restrict_to_mask:
        if mask is None:
            raise ConfigError(f"{name}: restriction requested without a mask")
        values = values[mask.membership]

    if role == "positive":
        if values.min() < floor:
            raise ConfigError(f"{name} must be positive (min {values.min():.6g} < floor {floor:g})")
    elif role == "nonnegative":
        if values.min() < 0:
            raise ConfigError(f"{name} must be nonnegative (min {values.min():.6g})")
    elif role == "kappa":
        if mask is None:
            raise ConfigError(f"{name}: kappa needs the reservoir mask")
        inside = values if restrict_to_mask else values[mask.membership]
        if inside.min() < floor:
            raise ConfigError(f"{name} must be positive on Omega_star")
        if not restrict_to_mask and np.any(values[~mask.membership] != 0.0):
            raise ConfigError("kappa must vanish off Omega_star")
    values.setflags(write=False)
    return values
