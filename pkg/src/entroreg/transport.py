"""Semi-Lagrangian transport by a stationary velocity field.

The terminal image is obtained by tracing every node backwards along the
characteristics of ``v`` (RK4, clamped to the box) and interpolating the
initial image once at the foot points.  Because the forward map is explicit,
its exact discrete adjoint is a reversal of the recorded RK4 tape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .field import Grid, GridError, ScalarField, Stencil, VectorField, clamp_points, l2_norm_sq, stencil


class CharacteristicBlowUp(FloatingPointError):
    pass


@dataclass(frozen=True)
class TransportSetup:
    T: float = 1.0
    nsub: int = 8

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"final time must be positive, got {self.T}")
        if int(self.nsub) < 1:
            raise ValueError(f"nsub must be >= 1, got {self.nsub}")
        object.__setattr__(self, "nsub", int(self.nsub))


def default_nsub(v: VectorField, T: float, minimum: int = 8) -> int:
    """ceil(4 T max|v| / min h), at least ``minimum``."""
    vmax = float(np.max(np.abs(v.components))) if v.components.size else 0.0
    return max(int(minimum), int(math.ceil(4.0 * T * vmax / float(np.min(v.grid.spacing)))))


@dataclass
class FlowMap:
    grid: Grid
    feet: np.ndarray  # (d, size) backward foot point of every node


@dataclass
class _Stage:
    st: Stencil
    inside: np.ndarray  # clamp mask of the stage point (True where not clamped)


@dataclass
class _Tape:
    steps: list  # per RK4 step: (stage list, inside mask of the new position)


def _inside(grid: Grid, pts: np.ndarray) -> np.ndarray:
    lo = np.asarray(grid.origin)[:, None]
    hi = lo + np.asarray(grid.lengths)[:, None]
    return (pts >= lo) & (pts <= hi)


def _trace(v: VectorField, setup: TransportSetup, record: bool):
    grid = v.grid
    vflat = v.components.reshape(grid.ndim, -1)
    X = grid.points()
    dt = setup.T / setup.nsub
    tape = _Tape([]) if record else None

    def vel(P):
        st = stencil(grid, P)
        return -st.apply(vflat), st

    # overflow surfaces as a non-finite position and is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(setup.nsub):
            k1, s1 = vel(X)
            A2 = X + 0.5 * dt * k1
            k2, s2 = vel(clamp_points(grid, A2))
            A3 = X + 0.5 * dt * k2
            k3, s3 = vel(clamp_points(grid, A3))
            A4 = X + dt * k3
            k4, s4 = vel(clamp_points(grid, A4))
            # dt * (...) / 6 keeps dyadic data exact
            Anew = X + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not np.all(np.isfinite(Anew)):
                raise CharacteristicBlowUp("characteristic blow-up")
            X = clamp_points(grid, Anew)
            if record:
                tape.steps.append((
                    [_Stage(s1, np.ones_like(A2, dtype=bool)), _Stage(s2, _inside(grid, A2)),
                     _Stage(s3, _inside(grid, A3)), _Stage(s4, _inside(grid, A4))],
                    _inside(grid, Anew),
                ))
    return X, tape


def _check_admissible(v: VectorField) -> None:
    if not v.is_admissible():
        raise ValueError("velocity must vanish on the boundary")


def trace_characteristics(v: VectorField, setup: TransportSetup) -> FlowMap:
    _check_admissible(v)
    feet, _ = _trace(v, setup, record=False)
    return FlowMap(v.grid, feet)


def solve_forward(v: VectorField, phi0: ScalarField, setup: TransportSetup) -> ScalarField:
    if phi0.grid != v.grid:
        raise GridError("velocity and image live on different grids")
    flow = trace_characteristics(v, setup)
    return apply_flow(flow, phi0)


def apply_flow(flow: FlowMap, phi0: ScalarField) -> ScalarField:
    vals = stencil(flow.grid, flow.feet).apply(phi0.values.ravel())
    return ScalarField(flow.grid, vals.reshape(flow.grid.dims))


def ssd(phiT: ScalarField, target: ScalarField) -> float:
    r = phiT.values - target.values
    return 0.5 * float(np.sum(phiT.grid.weights * r * r))


def ssd_and_gradient(
    v: VectorField, phi0: ScalarField, target: ScalarField, setup: TransportSetup
) -> tuple[float, ScalarField, VectorField]:
    """SSD of the transported image, the image itself, and d(SSD)/d(nodal v).

    Boundary nodes of the gradient are zero: they are not free variables.
    """
    grid = v.grid
    if phi0.grid != grid or target.grid != grid:
        raise GridError("velocity and images live on different grids")
    _check_admissible(v)
    X, tape = _trace(v, setup, record=True)
    final = stencil(grid, X)
    phiT = final.apply(phi0.values.ravel())
    resid = grid.weights.ravel() * (phiT - target.values.ravel())
    phiT = ScalarField(grid, phiT.reshape(grid.dims))
    value = ssd(phiT, target)

    d = grid.ndim
    size = grid.size
    vflat = v.components.reshape(d, -1)
    gv = np.zeros((d, size))
    bar_X = resid * final.apply_grad(phi0.values.ravel())
    dt = setup.T / setup.nsub

    def back_stage(stage: _Stage, bar_k: np.ndarray) -> np.ndarray:
        # k = -v(P): accumulate into v and return the adjoint of P
        for j in range(d):
            gv[j] -= stage.st.scatter(bar_k[j], size)
        jac = stage.st.apply_grad(vflat)  # (j, i, p)
        return -np.sum(bar_k[:, None, :] * jac, axis=0)

    for stages, inside_new in reversed(tape.steps):
        bar_A = bar_X * inside_new
        bar_X = bar_A.copy()
        bar_k = [dt / 6.0 * bar_A, dt / 3.0 * bar_A, dt / 3.0 * bar_A, dt / 6.0 * bar_A]
        coeff = [0.5 * dt, 0.5 * dt, dt]
        for m in (3, 2, 1):
            bar_P = back_stage(stages[m], bar_k[m]) * stages[m].inside
            bar_X += bar_P
            bar_k[m - 1] = bar_k[m - 1] + coeff[m - 1] * bar_P
        bar_X += back_stage(stages[0], bar_k[0])

    grad = gv.reshape(v.components.shape)
    grad[:, grid.boundary_mask()] = 0.0
    return value, phiT, VectorField(grid, grad)


def terminal_sensitivity_adjoint(
    v: VectorField, phi0: ScalarField, target: ScalarField, setup: TransportSetup
) -> VectorField:
    return ssd_and_gradient(v, phi0, target, setup)[2]


def renormalization_check(
    v: VectorField, phi0: ScalarField, setup: TransportSetup, beta: Callable[[np.ndarray], np.ndarray]
) -> tuple[ScalarField, ScalarField]:
    """(beta of the transported image, transport of beta of the image)."""
    flow = trace_characteristics(v, setup)
    lhs = ScalarField(v.grid, beta(apply_flow(flow, phi0).values))
    rhs = apply_flow(flow, ScalarField(v.grid, beta(phi0.values)))
    return lhs, rhs


def stability_ratio(v, w, phi0, setup, deltas=(0.1, 0.01, 0.001)) -> float:
    """Largest ``n_k / bound_k`` for perturbation norms ``n_k`` of the transported
    image, with ``bound_k = min(n_{k-1}, C delta_k)`` and ``C = 2 n_0 / delta_0``.

    A value <= 1 means the norms are nonincreasing and linearly bounded.
    """
    base = solve_forward(v, phi0, setup)
    norms = []
    for delta in deltas:
        pert = solve_forward(VectorField(v.grid, v.components + delta * w.components), phi0, setup)
        diff = ScalarField(v.grid, pert.values - base.values)
        norms.append(math.sqrt(l2_norm_sq(diff)))
    c = 2.0 * norms[0] / deltas[0]
    worst = 0.0
    for k in range(1, len(deltas)):
        bound = min(norms[k - 1], c * deltas[k])
        worst = max(worst, norms[k] / bound if bound > 0 else (0.0 if norms[k] == 0 else math.inf))
    return worst
