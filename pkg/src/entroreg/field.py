"""Regular tensor-product grids, nodal fields and multilinear (Q1) machinery.

Arrays are stored row-major with the last axis fastest, matching the FLD1
on-disk layout.  Vector fields keep their components on a leading axis, i.e.
``components.shape == (d, *grid.dims)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Box ``origin + [0, L_1] x ... x [0, L_d]`` sampled at ``n_i`` nodes per axis."""

    dims: tuple[int, ...]
    lengths: tuple[float, ...]
    origin: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(L) for L in self.lengths)
        if len(dims) not in (1, 2, 3) or len(lengths) != len(dims):
            raise GridError(f"need 1 to 3 axes with one length each, got {dims}, {lengths}")
        if any(n < 2 for n in dims):
            raise GridError(f"every axis needs at least 2 nodes, got {dims}")
        if not all(np.isfinite(L) and L > 0 for L in lengths):
            raise GridError(f"lengths must be positive and finite, got {lengths}")
        origin = (0.0,) * len(dims) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != len(dims):
            raise GridError("origin has wrong dimension")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def unit(cls, n: int | Sequence[int], d: int | None = None) -> "Grid":
        """Unit box; ``Grid.unit(65, 2)`` is a 65x65 grid on (0,1)^2."""
        if np.ndim(n) == 0:
            dims = (int(n),) * (d or 1)
        else:
            dims = tuple(n)
        return cls(dims, (1.0,) * len(dims))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_dims(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.dims)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([L / (n - 1) for n, L in zip(self.dims, self.lengths)])

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid (mass-lumped) node weights; they sum to the box volume."""
        w = np.ones(())
        for n, h in zip(self.dims, self.spacing):
            w1 = np.full(n, h)
            w1[[0, -1]] = 0.5 * h
            w = np.multiply.outer(w, w1)
        w.setflags(write=False)
        return w

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.dims)]

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(d, *dims)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates flattened to ``(d, size)`` in storage order."""
        return self.coords().reshape(self.ndim, -1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.dims, dtype=bool)
        for ax in range(self.ndim):
            idx = [slice(None)] * self.ndim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    def is_nested_in(self, fine: "Grid") -> bool:
        if self.ndim != fine.ndim or not np.allclose(self.lengths, fine.lengths, rtol=1e-13, atol=0):
            return False
        if not np.allclose(self.origin, fine.origin, rtol=0, atol=1e-13 * max(self.lengths)):
            return False
        return all((nf - 1) % (nc - 1) == 0 for nc, nf in zip(self.dims, fine.dims))

    def with_dims(self, dims: Sequence[int]) -> "Grid":
        return Grid(tuple(dims), self.lengths, self.origin)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.dims:
            raise GridError(f"field shape {values.shape} does not match grid {self.grid.dims}")
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, fn(*grid.coords()))


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=np.float64)
        if comps.shape != (self.grid.ndim, *self.grid.dims):
            raise GridError(
                f"vector field needs shape {(self.grid.ndim, *self.grid.dims)}, got {comps.shape}"
            )
        if not np.all(np.isfinite(comps)):
            raise GridError("vector field values must be finite")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.ndim, *grid.dims)))

    def boundary_max(self) -> float:
        mask = self.grid.boundary_mask()
        return float(np.max(np.abs(self.components[:, mask]))) if mask.any() else 0.0

    def is_admissible(self) -> bool:
        """True when every boundary node carries exactly zero velocity."""
        return self.boundary_max() == 0.0

    def with_zero_boundary(self) -> "VectorField":
        comps = self.components.copy()
        comps[:, self.grid.boundary_mask()] = 0.0
        return VectorField(self.grid, comps)


# ---------------------------------------------------------------------------
# multilinear interpolation
# ---------------------------------------------------------------------------

@dataclass
class Stencil:
    """Corner indices and weights of the Q1 interpolant at a batch of points.

    Arrays are corner-major: ``index[c, p]`` is the flat node index of corner
    ``c`` of point ``p``'s cell, ``weight[c, p]`` its weight and
    ``dweight[c, i, p]`` the derivative of that weight with respect to the
    ``i``-th coordinate of the point.
    """

    index: np.ndarray
    weight: np.ndarray
    dweight: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Evaluate a flat nodal array (or a ``(k, size)`` stack) at the points."""
        corner = values[..., self.index[0]]
        out = corner * self.weight[0]
        lo = corner
        hi = corner
        for c in range(1, len(self.index)):
            corner = values[..., self.index[c]]
            out += corner * self.weight[c]
            lo = np.minimum(lo, corner)
            hi = np.maximum(hi, corner)
        # keep the result inside the corner hull so the max principle is exact
        return np.minimum(np.maximum(out, lo), hi)

    def apply_grad(self, values: np.ndarray) -> np.ndarray:
        """Spatial gradient of the interpolant, shape ``(..., d, npoints)``."""
        out = 0.0
        for c in range(len(self.index)):
            out = out + values[..., None, self.index[c]] * self.dweight[c]
        return out

    def scatter(self, coeff: np.ndarray, size: int) -> np.ndarray:
        """Transpose of :meth:`apply`: accumulate ``coeff[p] * weight[c, p]`` into nodes."""
        return np.bincount(self.index.ravel(), weights=(self.weight * coeff).ravel(), minlength=size)


def clamp_points(grid: Grid, points: np.ndarray) -> np.ndarray:
    """Clip ``(d, npoints)`` coordinates to the box."""
    lo = np.asarray(grid.origin)[:, None]
    hi = lo + np.asarray(grid.lengths)[:, None]
    return np.minimum(np.maximum(points, lo), hi)


def stencil(grid: Grid, points: np.ndarray) -> Stencil:
    """Q1 stencil for coordinates of shape ``(d, npoints)``; points are clamped to the box."""
    points = np.asarray(points, dtype=np.float64)
    d = grid.ndim
    h = grid.spacing[:, None]
    local = (clamp_points(grid, points) - np.asarray(grid.origin)[:, None]) / h
    cell = np.floor(local).astype(np.int64)
    np.clip(cell, 0, np.asarray(grid.cell_dims)[:, None] - 1, out=cell)
    t = local - cell
    strides = [int(np.prod(grid.dims[i + 1:])) for i in range(d)]
    base = sum(cell[i] * strides[i] for i in range(d))
    factors = [(1.0 - t[i], t[i]) for i in range(d)]

    ncorner = 2 ** d
    npts = points.shape[1]
    index = np.empty((ncorner, npts), dtype=np.int64)
    weight = np.empty((ncorner, npts))
    dweight = np.empty((ncorner, d, npts))
    for c, bits in enumerate(itertools.product((0, 1), repeat=d)):
        index[c] = base + sum(b * s for b, s in zip(bits, strides))
        fac = [factors[i][b] for i, b in enumerate(bits)]
        weight[c] = np.prod(fac, axis=0) if d > 1 else fac[0]
        for i in range(d):
            others = 1.0
            for k in range(d):
                if k != i:
                    others = others * fac[k]
            dweight[c, i] = (1.0 if bits[i] else -1.0) / h[i, 0] * others
    return Stencil(index, weight, dweight)


def interpolate(f: ScalarField, p) -> float:
    """Evaluate the multilinear interpolant of ``f`` at a single point."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape != (f.grid.ndim,) or not np.all(np.isfinite(p)):
        raise ValueError(f"invalid point {p!r}")
    return float(stencil(f.grid, p[:, None]).apply(f.values.ravel())[0])


def interpolate_many(f: ScalarField, points: np.ndarray) -> np.ndarray:
    """Evaluate at ``(npoints, d)`` coordinates."""
    points = np.asarray(points, dtype=np.float64).T
    if not np.all(np.isfinite(points)):
        raise ValueError("invalid point")
    return stencil(f.grid, points).apply(f.values.ravel())


# ---------------------------------------------------------------------------
# differences and quadrature
# ---------------------------------------------------------------------------

def _cell_average(a: np.ndarray, skip: int) -> np.ndarray:
    """Average neighbouring node pairs along every axis except ``skip``."""
    for ax in range(a.ndim):
        if ax == skip:
            continue
        lo = [slice(None)] * a.ndim
        hi = [slice(None)] * a.ndim
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        a = 0.5 * (a[tuple(lo)] + a[tuple(hi)])
    return a


def _cell_average_T(a: np.ndarray, skip: int) -> np.ndarray:
    for ax in range(a.ndim):
        if ax == skip:
            continue
        shape = list(a.shape)
        shape[ax] += 1
        out = np.zeros(shape)
        lo = [slice(None)] * a.ndim
        hi = [slice(None)] * a.ndim
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] += 0.5 * a
        out[tuple(hi)] += 0.5 * a
        a = out
    return a


def cell_gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Cell-averaged forward differences of a nodal array, shape ``(d, *cell_dims)``."""
    out = []
    for i, h in enumerate(grid.spacing):
        diff = np.diff(values, axis=i) / h
        out.append(_cell_average(diff, skip=i))
    return np.stack(out)


def cell_gradient_T(grid: Grid, cell_values: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`cell_gradient` (Euclidean pairing on both sides)."""
    out = np.zeros(grid.dims)
    for i, h in enumerate(grid.spacing):
        a = _cell_average_T(cell_values[i], skip=i) / h
        pad = [(0, 0)] * grid.ndim
        pad[i] = (1, 0)
        lower = np.pad(a, pad)
        pad[i] = (0, 1)
        upper = np.pad(a, pad)
        out += lower - upper
    return out


def gradient_fd(f: ScalarField) -> np.ndarray:
    return cell_gradient(f.grid, f.values)


def quadrature_mean(f: ScalarField) -> float:
    w = f.grid.weights
    return float(np.sum(w * f.values) / np.sum(w))


def l2_norm_sq(f: ScalarField) -> float:
    return float(np.sum(f.grid.weights * f.values ** 2))


# ---------------------------------------------------------------------------
# transfer between nested grids
# ---------------------------------------------------------------------------

def prolong_values(coarse: Grid, values: np.ndarray, fine: Grid) -> np.ndarray:
    """Q1 prolongation, applied one axis at a time.

    Local coordinates come from integer node ratios, so fine nodes that
    coincide with coarse nodes copy the coarse value bit for bit.
    """
    if not coarse.is_nested_in(fine):
        raise GridError(f"grid {coarse.dims} is not nested in {fine.dims}")
    out = np.asarray(values, dtype=np.float64).reshape(coarse.dims)
    for ax, (nc, nf) in enumerate(zip(coarse.dims, fine.dims)):
        r = (nf - 1) // (nc - 1)
        j = np.arange(nf)
        lo = np.minimum(j // r, nc - 2)
        t = (j - lo * r) / r
        a = np.take(out, lo, axis=ax)
        b = np.take(out, lo + 1, axis=ax)
        shape = [1] * out.ndim
        shape[ax] = nf
        t = t.reshape(shape)
        out = np.clip((1.0 - t) * a + t * b, np.minimum(a, b), np.maximum(a, b))
    return out


def restrict_values(fine: Grid, values: np.ndarray, coarse: Grid) -> np.ndarray:
    if not coarse.is_nested_in(fine):
        raise GridError(f"grid {coarse.dims} is not nested in {fine.dims}")
    idx = tuple(slice(None, None, (nf - 1) // (nc - 1)) for nc, nf in zip(coarse.dims, fine.dims))
    return np.array(values[idx], copy=True)


def prolong(f: ScalarField | VectorField, fine: Grid):
    if isinstance(f, VectorField):
        comps = [prolong_values(f.grid, c, fine) for c in f.components]
        return VectorField(fine, np.stack(comps))
    return ScalarField(fine, prolong_values(f.grid, f.values, fine))


def restrict(f: ScalarField | VectorField, coarse: Grid):
    if isinstance(f, VectorField):
        comps = [restrict_values(f.grid, c, coarse) for c in f.components]
        return VectorField(coarse, np.stack(comps))
    return ScalarField(coarse, restrict_values(f.grid, f.values, coarse))
