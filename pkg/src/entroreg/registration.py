"""Optical-flow registration with the smoothed W^{1,inf} regularizer.

The reduced objective is

    f(v) = SSD(phi(T; v), phi_tar) + beta * Psi_gamma(v) + alpha/2 * |v|^2_{H^{1+sigma}}

and is minimized over the interior nodal values of a stationary velocity by
L-BFGS.  :func:`continuation_solve` lowers gamma geometrically while moving
from coarse to fine grids, warm-starting every stage from the previous one.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .field import Grid, GridError, ScalarField, VectorField, prolong, restrict
from .optim import lbfgs
from .smoothmax import grad_psi_gamma, psi_gamma, psi_zero
from .sobolev import hs_grad, hs_norm_sq
from .transport import TransportSetup, default_nsub, solve_forward, ssd, ssd_and_gradient

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RegistrationConfig:
    alpha: float = 1e-2
    beta: float = 1e-3
    sigma: float = 0.25
    time: float = 1.0
    gamma0: float = 1.0
    rho: float = 0.5
    levels: tuple[int, ...] = (9, 17, 33, 65)
    max_iters: int = 100
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    backtrack_tau: float = 0.5
    nsub_min: int = 8

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        checks = {
            "alpha": self.alpha > 0,
            "beta": self.beta >= 0,
            "sigma": 0 < self.sigma < 0.5,
            "time": self.time > 0,
            "gamma0": self.gamma0 > 0,
            "rho": 0 < self.rho < 1,
            "levels": len(self.levels) > 0 and all(n >= 2 for n in self.levels)
            and all((b - 1) % (a - 1) == 0 and b > a for a, b in zip(self.levels, self.levels[1:])),
            "max_iters": self.max_iters >= 0,
            "grad_tol": self.grad_tol >= 0,
            "armijo_c1": 0 < self.armijo_c1 < 0.5,
            "backtrack_tau": 0 < self.backtrack_tau < 1,
            "nsub_min": self.nsub_min >= 1,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ConfigError(f"invalid value for {', '.join(bad)}")

    def gammas(self) -> list[float]:
        return [self.gamma0 * self.rho ** k for k in range(len(self.levels))]

    # -- flat key = value files ------------------------------------------

    KEYS = (
        "alpha", "beta", "sigma", "time", "gamma0", "rho", "levels",
        "max_iters", "grad_tol", "armijo_c1", "backtrack_tau", "nsub_min",
    )

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RegistrationConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls.KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
            if key in raw:
                raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
            raw[key] = value
        missing = [k for k in cls.KEYS if k not in raw]
        if missing:
            raise ConfigError(f"{source}: missing key(s): {', '.join(missing)}")
        kwargs = {}
        for f in dataclasses.fields(cls):
            value = raw[f.name]
            try:
                if f.name == "levels":
                    kwargs[f.name] = tuple(int(s) for s in value.replace(",", " ").split())
                elif f.name in ("max_iters", "nsub_min"):
                    kwargs[f.name] = int(value)
                else:
                    kwargs[f.name] = float(value)
            except ValueError as exc:
                raise ConfigError(f"{source}: cannot parse '{f.name}' = {value!r}") from exc
        try:
            return cls(**kwargs)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    @classmethod
    def read(cls, path) -> "RegistrationConfig":
        path = Path(path)
        return cls.parse(path.read_text(), str(path))

    def dumps(self) -> str:
        lines = []
        for key in self.KEYS:
            value = getattr(self, key)
            if key == "levels":
                value = ", ".join(str(n) for n in value)
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RegistrationData:
    phi0: ScalarField
    target: ScalarField

    def __post_init__(self):
        if self.phi0.grid != self.target.grid:
            raise GridError("source and target images live on different grids")

    @property
    def grid(self) -> Grid:
        return self.phi0.grid

    def restricted(self, grid: Grid) -> "RegistrationData":
        if grid == self.grid:
            return self
        return RegistrationData(restrict(self.phi0, grid), restrict(self.target, grid))


@dataclass
class ObjectiveParts:
    j: float
    reg_psi: float
    reg_hs: float

    @property
    def f(self) -> float:
        return self.j + self.reg_psi + self.reg_hs


def _setup(v: VectorField, cfg: RegistrationConfig, nsub: int | None) -> TransportSetup:
    if nsub is None:
        nsub = default_nsub(v, cfg.time, cfg.nsub_min)
    return TransportSetup(cfg.time, nsub)


def reduced_objective(
    v: VectorField, data: RegistrationData, gamma: float, cfg: RegistrationConfig, nsub: int | None = None
) -> tuple[float, ObjectiveParts]:
    """Objective value and its three parts.  ``gamma = 0`` uses the unrelaxed functional."""
    phiT = solve_forward(v, data.phi0, _setup(v, cfg, nsub))
    psi = psi_zero(v) if gamma == 0 else psi_gamma(v, gamma)
    parts = ObjectiveParts(ssd(phiT, data.target), cfg.beta * psi, 0.5 * cfg.alpha * hs_norm_sq(v, cfg.sigma))
    return parts.f, parts


def reduced_value_and_gradient(
    v: VectorField, data: RegistrationData, gamma: float, cfg: RegistrationConfig, nsub: int | None = None
) -> tuple[float, ObjectiveParts, VectorField]:
    j, _, gj = ssd_and_gradient(v, data.phi0, data.target, _setup(v, cfg, nsub))
    parts = ObjectiveParts(j, cfg.beta * psi_gamma(v, gamma), 0.5 * cfg.alpha * hs_norm_sq(v, cfg.sigma))
    g = gj.components + cfg.beta * grad_psi_gamma(v, gamma).components
    g = g + 0.5 * cfg.alpha * hs_grad(v, cfg.sigma).components
    g[:, v.grid.boundary_mask()] = 0.0
    return parts.f, parts, VectorField(v.grid, g)


def reduced_gradient(
    v: VectorField, data: RegistrationData, gamma: float, cfg: RegistrationConfig, nsub: int | None = None
) -> VectorField:
    return reduced_value_and_gradient(v, data, gamma, cfg, nsub)[2]


# ---------------------------------------------------------------------------
# single-level solve
# ---------------------------------------------------------------------------

@dataclass
class StageRecord:
    level: int
    dims: tuple[int, ...]
    gamma: float
    iters: int
    j: float
    reg_psi: float
    reg_hs: float
    f: float
    grad_norm: float
    wall_ms: float
    status: str
    nsub: int
    f_start: float
    history: list[float] = field(default_factory=list)

    CSV_HEADER = "level,gamma,iters,j,reg_psi,reg_hs,f,grad_norm,wall_ms"

    def csv_row(self) -> str:
        vals = [self.level, self.gamma, self.iters, self.j, self.reg_psi, self.reg_hs,
                self.f, self.grad_norm, self.wall_ms]
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in vals)


@dataclass
class ContinuationTrace:
    stages: list[StageRecord] = field(default_factory=list)
    psi0_final: float = float("nan")
    f0_final: float = float("nan")

    def to_csv(self) -> str:
        return "\n".join([StageRecord.CSV_HEADER] + [s.csv_row() for s in self.stages]) + "\n"


def _interior_index(grid: Grid) -> np.ndarray:
    return np.broadcast_to(~grid.boundary_mask(), (grid.ndim, *grid.dims))


def lbfgs_minimize(
    v0: VectorField,
    data: RegistrationData,
    gamma: float,
    cfg: RegistrationConfig,
    *,
    level: int = 0,
    nsub: int | None = None,
) -> tuple[VectorField, StageRecord]:
    """Minimize the relaxed objective on ``v0``'s grid; the RK4 substep count is
    frozen for the whole stage so that the objective is a fixed function."""
    if not v0.is_admissible():
        raise ValueError("initial velocity must vanish on the boundary")
    grid = v0.grid
    data = data.restricted(grid)
    nsub = default_nsub(v0, cfg.time, cfg.nsub_min) if nsub is None else nsub
    mask = _interior_index(grid)
    template = np.zeros_like(v0.components)

    def unpack(x):
        comps = template.copy()
        comps[mask] = x
        return VectorField(grid, comps)

    def fun(x):
        f, _, g = reduced_value_and_gradient(unpack(x), data, gamma, cfg, nsub)
        return f, g.components[mask]

    t0 = time.perf_counter()
    res = lbfgs(
        fun, v0.components[mask], max_iters=cfg.max_iters, grad_tol=cfg.grad_tol,
        c1=cfg.armijo_c1, tau=cfg.backtrack_tau,
    )
    wall = 1e3 * (time.perf_counter() - t0)
    v = unpack(res.x)
    _, parts = reduced_objective(v, data, gamma, cfg, nsub)
    rec = StageRecord(
        level=level, dims=grid.dims, gamma=gamma, iters=res.iters, j=parts.j,
        reg_psi=parts.reg_psi, reg_hs=parts.reg_hs, f=parts.f,
        grad_norm=float(np.linalg.norm(res.g)), wall_ms=wall, status=res.status,
        nsub=nsub, f_start=res.history[0], history=list(res.history),
    )
    log.info("level %d %s gamma=%g: %d iters, f=%.6g (%s)", level, grid.dims, gamma, res.iters, rec.f, res.status)
    return v, rec


# ---------------------------------------------------------------------------
# continuation over gamma and mesh levels
# ---------------------------------------------------------------------------

def level_grids(fine: Grid, levels) -> list[Grid]:
    """Nested grids; each level value is the node count along the longest axis."""
    big = max(fine.dims)
    if levels[-1] != big:
        raise GridError(f"finest level {levels[-1]} does not match data grid {fine.dims}")
    grids = []
    for n in levels:
        dims = []
        for nf in fine.dims:
            cells = (nf - 1) * (n - 1)
            if cells % (big - 1):
                raise GridError(f"level {n} does not nest in data grid {fine.dims}")
            dims.append(cells // (big - 1) + 1)
        g = fine.with_dims(dims)
        if not g.is_nested_in(fine):
            raise GridError(f"level {n} does not nest in data grid {fine.dims}")
        grids.append(g)
    return grids


def continuation_solve(
    data: RegistrationData, cfg: RegistrationConfig
) -> tuple[VectorField, ContinuationTrace]:
    grids = level_grids(data.grid, cfg.levels)
    trace = ContinuationTrace()
    v = None
    for k, (grid, gamma) in enumerate(zip(grids, cfg.gammas())):
        v = VectorField.zeros(grid) if v is None else prolong(v, grid).with_zero_boundary()
        v, rec = lbfgs_minimize(v, data, gamma, cfg, level=k)
        trace.stages.append(rec)
    final_nsub = trace.stages[-1].nsub
    trace.psi0_final = psi_zero(v)
    trace.f0_final, _ = reduced_objective(v, data, 0.0, cfg, final_nsub)
    return v, trace


def transported(v: VectorField, data: RegistrationData, cfg: RegistrationConfig, nsub: int | None = None) -> ScalarField:
    return solve_forward(v, data.phi0, _setup(v, cfg, nsub))
