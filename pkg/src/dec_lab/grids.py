"""Axis-aligned chart grids, tensor component fields, and finite differencing.

Every other module consumes these primitives.  A field stores raw component
arrays with the grid axes leading and the tensor index axes trailing, so that
``np.einsum('...ij,...jk->...ik', a, b)`` works pointwise over the whole grid.

Derivatives are central differences.  Values are only defined where the
stencil fits; the unusable rim is filled with NaN so that accidental use of
edge values surfaces immediately.  All quadratures and residual norms in this
package restrict to the grid interior (the ``stencil_margin`` rim excluded).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ChartGrid",
    "TensorField",
    "MetricField",
    "fd_derivative",
    "partial_jet",
    "save_fields",
    "load_fields",
]


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class ChartGrid:
    """A uniform axis-aligned box grid in a single coordinate chart.

    Parameters
    ----------
    dimension : int
        Number of coordinates, at least 2.
    box : tuple of (float, float)
        Per-axis coordinate bounds (min, max).
    spacing : tuple of float
        Per-axis grid step, strictly positive.  ``(max - min) / h`` must be
        an integer up to round-off.
    stencil_margin : int
        Width of the rim (in points) excluded from derivative evaluation.
    """

    dimension: int
    box: tuple
    spacing: tuple
    stencil_margin: int = 2

    def __post_init__(self):
        if self.dimension < 2:
            raise GridError("grid dimension must be >= 2")
        if self.stencil_margin < 2:
            raise GridError("stencil_margin must be >= 2")
        if len(self.box) != self.dimension or len(self.spacing) != self.dimension:
            raise GridError("box and spacing must have one entry per axis")
        object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        for (a, b), h in zip(self.box, self.spacing):
            if not h > 0:
                raise GridError("spacing must be strictly positive on every axis")
            npts = (b - a) / h + 1
            if abs(npts - round(npts)) > 1e-8:
                raise GridError(f"box [{a}, {b}] is not an integer number of steps {h}")
            if round(npts) < 2 * self.stencil_margin + 3:
                raise GridError(
                    f"axis with bounds [{a}, {b}] has {round(npts)} points; "
                    f"needs at least {2 * self.stencil_margin + 3}"
                )

    @classmethod
    def cube(cls, dimension, lo, hi, npoints, stencil_margin=2):
        """Same bounds and point count on every axis."""
        h = (hi - lo) / (npoints - 1)
        return cls(dimension, ((lo, hi),) * dimension, (h,) * dimension, stencil_margin)

    @property
    def shape(self):
        return tuple(
            int(round((b - a) / h)) + 1 for (a, b), h in zip(self.box, self.spacing)
        )

    @property
    def num_points(self):
        return int(np.prod(self.shape))

    def axis_coords(self, axis):
        a, _ = self.box[axis]
        return a + self.spacing[axis] * np.arange(self.shape[axis])

    def points(self):
        """Coordinates of all grid points, shape ``grid.shape + (n,)``."""
        axes = [self.axis_coords(i) for i in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def interior_slices(self, extra=0):
        m = self.stencil_margin + extra
        return tuple(slice(m, s - m) for s in self.shape)

    def interior(self, values, extra=0):
        """Restrict a grid-shaped array to the interior region."""
        return values[self.interior_slices(extra)]

    def interior_points(self, extra=0):
        return self.points()[self.interior_slices(extra)]

    def cell_volume(self):
        return float(np.prod(self.spacing))

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "box": [list(b) for b in self.box],
            "spacing": list(self.spacing),
            "stencil_margin": self.stencil_margin,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["dimension"],
            tuple(tuple(b) for b in d["box"]),
            tuple(d["spacing"]),
            d["stencil_margin"],
        )


@dataclass
class TensorField:
    """Component array of a tensor field sampled on a chart grid.

    ``values`` has shape ``grid.shape + (n,) * (cov_rank + con_rank)`` with
    covariant index slots first.  ``symmetric`` flags rank-2 fields that are
    symmetric in their index pair.
    """

    grid: ChartGrid
    cov_rank: int
    con_rank: int
    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        if self.cov_rank < 0 or self.con_rank < 0:
            raise GridError("tensor ranks must be nonnegative")
        n = self.grid.dimension
        expected = self.grid.shape + (n,) * self.rank
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected:
            raise GridError(f"component array shape {self.values.shape} != {expected}")
        if self.symmetric:
            if self.rank != 2:
                raise GridError("symmetric flag only supported for rank-2 fields")
            self.check_symmetry()

    @property
    def rank(self):
        return self.cov_rank + self.con_rank

    def check_symmetry(self, rtol=1e-12):
        sym_err = np.nanmax(np.abs(self.values - np.swapaxes(self.values, -1, -2)))
        scale = np.nanmax(np.abs(self.values))
        if scale > 0 and sym_err > rtol * scale:
            raise GridError(f"field flagged symmetric but asymmetry is {sym_err:.3e}")

    def interior_values(self, extra=0):
        return self.grid.interior(self.values, extra=extra)

    def copy(self):
        return TensorField(self.grid, self.cov_rank, self.con_rank, self.values.copy(), self.symmetric)


class MetricField(TensorField):
    """Symmetric covariant rank-2 field, positive definite on the interior."""

    def __init__(self, grid, values):
        super().__init__(grid, 2, 0, values, symmetric=True)

    def check_spd(self):
        interior = self.interior_values()
        eigs = np.linalg.eigvalsh(interior.reshape(-1, self.grid.dimension, self.grid.dimension))
        lo = float(eigs.min())
        if not lo > 0:
            raise GridError(f"metric not positive definite on interior (min eigenvalue {lo:.3e})")
        return lo


# ---------------------------------------------------------------------------
# Finite differencing
# ---------------------------------------------------------------------------
#
# Interior points use the 4th-order central stencils by default; the single
# layer of points adjacent to the rim where those do not fit falls back to the
# 2nd-order stencils.  Points where no centered stencil fits are NaN.

_D1 = {
    2: (np.array([-0.5, 0.0, 0.5]), 1),
    4: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 2),
}
_D2 = {
    2: (np.array([1.0, -2.0, 1.0]), 1),
    4: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
}


def _apply_stencil(values, axis, coeffs, halfwidth, h, power):
    out = np.full_like(values, np.nan)
    core = [slice(None)] * values.ndim
    core[axis] = slice(halfwidth, values.shape[axis] - halfwidth)
    acc = np.zeros_like(values[tuple(core)])
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        off = k - halfwidth
        src = [slice(None)] * values.ndim
        src[axis] = slice(halfwidth + off, values.shape[axis] - halfwidth + off)
        acc = acc + c * values[tuple(src)]
    out[tuple(core)] = acc / h**power
    return out


def _diff_axis(values, axis, h, order, accuracy):
    table = _D1 if order == 1 else _D2
    coeffs4, hw4 = table[4]
    coeffs2, hw2 = table[2]
    if accuracy == 2:
        return _apply_stencil(values, axis, coeffs2, hw2, h, order)
    low = _apply_stencil(values, axis, coeffs2, hw2, h, order)
    high = _apply_stencil(values, axis, coeffs4, hw4, h, order)
    return np.where(np.isnan(high), low, high)


def fd_derivative(fld, axis, order=1, accuracy=4):
    """Partial derivative of a tensor field along one coordinate axis.

    Parameters
    ----------
    fld : TensorField
    axis : int
        Coordinate axis, ``0 <= axis < n``.
    order : {1, 2}
        First or second derivative.
    accuracy : {2, 4}
        Global accuracy order of the central stencil.  With 4, the layer of
        points where only the compact stencil fits falls back to accuracy 2;
        the outermost layer is NaN.

    Returns
    -------
    TensorField
        Componentwise derivative, same ranks as the input.  The result is a
        partial (not covariant) derivative.
    """
    n = fld.grid.dimension
    if not 0 <= axis < n:
        raise GridError(f"axis {axis} out of range for dimension {n}")
    if order not in (1, 2):
        raise GridError("derivative order must be 1 or 2")
    if accuracy not in (2, 4):
        raise GridError("accuracy must be 2 or 4")
    if fld.grid.shape[axis] < 2 * (accuracy // 2) + 1:
        raise GridError("grid too small for the requested stencil")
    h = fld.grid.spacing[axis]
    out = _diff_axis(fld.values, axis, h, order, accuracy)
    return TensorField(fld.grid, fld.cov_rank, fld.con_rank, out)


def partial_jet(values, grid, accuracy=4):
    """First and second partial derivatives of a component array.

    Returns ``(d1, d2)`` where ``d1[..., k] = ∂_k values`` and
    ``d2[..., k, l] = ∂_k ∂_l values``.  Mixed second derivatives compose two
    first-derivative passes; same-axis ones use the one-shot stencil so the
    usable region is the same for every entry.
    """
    n = grid.dimension
    shape = values.shape
    d1 = np.full(shape + (n,), np.nan)
    d2 = np.full(shape + (n, n), np.nan)
    firsts = []
    for k in range(n):
        dk = _diff_axis(values, k, grid.spacing[k], 1, accuracy)
        firsts.append(dk)
        d1[..., k] = dk
        d2[..., k, k] = _diff_axis(values, k, grid.spacing[k], 2, accuracy)
    for k in range(n):
        for l in range(k + 1, n):
            mixed = _diff_axis(firsts[k], l, grid.spacing[l], 1, accuracy)
            d2[..., k, l] = mixed
            d2[..., l, k] = mixed
    return d1, d2


# ---------------------------------------------------------------------------
# Serialization: one CSV per component plus a JSON header.
# ---------------------------------------------------------------------------

_FMT = "%.17g"  # round-trips IEEE binary64 exactly


def _component_indices(n, rank):
    if rank == 0:
        return [()]
    idx = [()]
    for _ in range(rank):
        idx = [t + (i,) for t in idx for i in range(n)]
    return idx


def save_fields(path, fields):
    """Write named tensor fields under ``path`` (a directory).

    Layout: ``header.json`` plus one CSV per tensor component, each a single
    column in C order over the grid points.  Round trip is bit exact.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    header = {"schema_version": 1, "fields": []}
    grid = None
    for name, fld in fields.items():
        if grid is None:
            grid = fld.grid
            header["grid"] = grid.to_dict()
        elif fld.grid != grid:
            raise GridError("all fields in one file set must share a grid")
        n = grid.dimension
        comp_entries = []
        for idx in _component_indices(n, fld.rank):
            suffix = "".join(str(i) for i in idx)
            fname = f"{name}_{suffix}.csv" if suffix else f"{name}.csv"
            comp = fld.values[(Ellipsis,) + idx] if idx else fld.values
            np.savetxt(path / fname, comp.reshape(-1), fmt=_FMT)
            comp_entries.append({"index": list(idx), "file": fname})
        header["fields"].append(
            {
                "name": name,
                "cov_rank": fld.cov_rank,
                "con_rank": fld.con_rank,
                "symmetric": fld.symmetric,
                "components": comp_entries,
            }
        )
    with open(path / "header.json", "w") as fh:
        json.dump(header, fh, indent=2)


def load_fields(path):
    path = Path(path)
    with open(path / "header.json") as fh:
        header = json.load(fh)
    grid = ChartGrid.from_dict(header["grid"])
    n = grid.dimension
    out = {}
    for entry in header["fields"]:
        rank = entry["cov_rank"] + entry["con_rank"]
        values = np.empty(grid.shape + (n,) * rank)
        for comp in entry["components"]:
            data = np.loadtxt(path / comp["file"]).reshape(grid.shape)
            values[(Ellipsis,) + tuple(comp["index"])] = data
        out[entry["name"]] = TensorField(
            grid, entry["cov_rank"], entry["con_rank"], values, entry["symmetric"]
        )
    return out
