"""Synthetic inputs: bumps, vortices, translations and random fields."""

from __future__ import annotations

import numpy as np

from .field import Grid, ScalarField, VectorField


def gaussian_bump(grid: Grid, center, width: float, amplitude: float = 1.0) -> ScalarField:
    coords = grid.coords()
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    return ScalarField(grid, amplitude * np.exp(-r2 / (2.0 * width ** 2)))


def translated_pair(grid: Grid, shift: float = 0.1, width: float = 0.1, axis: int = 0):
    """Gaussian bump and the same bump moved by ``shift`` along ``axis``."""
    center = [0.5 * L for L in grid.lengths]
    center[axis] -= 0.5 * shift
    moved = list(center)
    moved[axis] += shift
    return gaussian_bump(grid, center, width), gaussian_bump(grid, moved, width)


def compact_bump(grid: Grid, center, radius: float) -> ScalarField:
    """C^3 bump (1 - r^2/R^2)^4 supported in a ball."""
    coords = grid.coords()
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center)) / radius ** 2
    return ScalarField(grid, np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 4, 0.0))


def vortex_velocity(grid: Grid, center=None, radius: float = 0.3, strength: float = 1.0) -> VectorField:
    """Divergence-free rotation in the first two axes, compactly supported.

    The stream function is ``strength * (1 - r^2/R^2)^4`` inside the disc and
    the velocity is its rotated gradient, so it is C^2 and vanishes with its
    derivatives at the edge of the support.
    """
    if grid.ndim < 2:
        raise ValueError("a vortex needs at least two axes")
    if center is None:
        center = [0.5 * L for L in grid.lengths]
    coords = grid.coords()
    dx, dy = coords[0] - center[0], coords[1] - center[1]
    s = 1.0 - (dx ** 2 + dy ** 2) / radius ** 2
    inside = s > 0
    # d/dx of (1 - r^2/R^2)^4 = -8 x / R^2 (1 - r^2/R^2)^3
    common = np.where(inside, -8.0 * strength / radius ** 2 * np.maximum(s, 0.0) ** 3, 0.0)
    comps = np.zeros((grid.ndim, *grid.dims))
    comps[0] = common * dy
    comps[1] = -common * dx
    return VectorField(grid, comps).with_zero_boundary()


def interior_constant_velocity(grid: Grid, c) -> VectorField:
    """Constant velocity on interior nodes, zero on the boundary."""
    c = np.broadcast_to(np.asarray(c, dtype=np.float64), (grid.ndim,))
    comps = np.empty((grid.ndim, *grid.dims))
    for j in range(grid.ndim):
        comps[j] = c[j]
    return VectorField(grid, comps).with_zero_boundary()


def random_velocity(grid: Grid, rng: np.random.Generator, amplitude: float) -> VectorField:
    """Random signs with magnitudes in [amplitude/2, amplitude] at interior nodes.

    Keeping every component away from zero means no characteristic stage
    lingers on a cell face, where the discrete transport map has kinks.
    """
    shape = (grid.ndim, *grid.dims)
    comps = rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.5 * amplitude, amplitude, size=shape)
    return VectorField(grid, comps).with_zero_boundary()


def random_smooth_field(grid: Grid, rng: np.random.Generator, modes: int = 3) -> ScalarField:
    """Sum of a few random low-frequency cosines, values within [-1, 1]."""
    coords = grid.coords()
    out = np.zeros(grid.dims)
    for _ in range(modes):
        phase = rng.uniform(0, 2 * np.pi)
        arg = sum(rng.integers(0, 3) * np.pi * x / L for x, L in zip(coords, grid.lengths))
        out += rng.uniform(-1, 1) * np.cos(arg + phase)
    return ScalarField(grid, out / modes)


def two_valued(grid: Grid, low: float, high: float) -> ScalarField:
    """``high`` on the first half of the nodes along axis 0, ``low`` on the rest.

    With an even node count the two halves carry exactly equal trapezoid weight.
    """
    n = grid.dims[0]
    if n % 2:
        raise ValueError("two_valued needs an even node count along axis 0")
    vals = np.full(grid.dims, float(low))
    vals[: n // 2] = high
    return ScalarField(grid, vals)
