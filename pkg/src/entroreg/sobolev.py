"""Fractional H^{1+s} penalty with homogeneous Dirichlet sine modes.

Interior nodal values are expanded in the sine basis sin(k pi x / L) through
an orthonormal DST-I.  With the scaling used here the squared coefficients
sum to the L^2 norm squared of the sine interpolant, and the penalty is the
diagonal quadratic form with multipliers (1 + |xi|^2)^(1+s).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.fft import dstn, idstn

from .field import Grid, VectorField

BOUNDARY_RTOL = 1e-12


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 0.0 < sigma < 0.5:
        raise ValueError(f"sigma must lie in (0, 1/2), got {sigma}")
    return sigma


@lru_cache(maxsize=64)
def _xi_sq(dims: tuple[int, ...], lengths: tuple[float, ...]) -> np.ndarray:
    out = np.zeros(tuple(n - 2 for n in dims))
    for ax, (n, L) in enumerate(zip(dims, lengths)):
        k = np.arange(1, n - 1) * np.pi / L
        shape = [1] * len(dims)
        shape[ax] = n - 2
        out = out + (k ** 2).reshape(shape)
    out.setflags(write=False)
    return out


def spectral_weights(grid: Grid, sigma: float) -> np.ndarray:
    """Multipliers (1 + |xi|^2)^(1+sigma) over the interior sine modes."""
    return (1.0 + _xi_sq(grid.dims, grid.lengths)) ** (1.0 + sigma)


def _interior(grid: Grid):
    return (slice(None),) + tuple(slice(1, -1) for _ in grid.dims)


def _check_boundary(v: VectorField) -> None:
    scale = max(1.0, float(np.max(np.abs(v.components))))
    if v.boundary_max() > BOUNDARY_RTOL * scale:
        raise ValueError("velocity must vanish on the boundary for the sine expansion")


def sine_coefficients(v: VectorField) -> np.ndarray:
    """Per-component coefficients whose squares sum to the interpolant's L^2 norm squared."""
    grid = v.grid
    inner = v.components[_interior(grid)]
    if inner.size == 0:
        return inner
    axes = tuple(range(1, grid.ndim + 1))
    return np.sqrt(grid.cell_measure) * dstn(inner, type=1, axes=axes, norm="ortho")


def hs_norm_sq(v: VectorField, sigma: float = 0.25) -> float:
    sigma = _check_sigma(sigma)
    _check_boundary(v)
    coef = sine_coefficients(v)
    if coef.size == 0:
        return 0.0
    return float(np.sum(spectral_weights(v.grid, sigma) * coef ** 2))


def hs_grad(v: VectorField, sigma: float = 0.25) -> VectorField:
    """Euclidean gradient of :func:`hs_norm_sq` with respect to all nodal values."""
    sigma = _check_sigma(sigma)
    _check_boundary(v)
    grid = v.grid
    out = np.zeros_like(v.components)
    coef = sine_coefficients(v)
    if coef.size:
        axes = tuple(range(1, grid.ndim + 1))
        scaled = 2.0 * spectral_weights(grid, sigma) * coef
        # the orthonormal DST-I is symmetric, so its transpose is itself
        out[_interior(grid)] = np.sqrt(grid.cell_measure) * idstn(scaled, type=1, axes=axes, norm="ortho")
    return VectorField(grid, out)
