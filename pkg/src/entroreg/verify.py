"""Self-check suite behind ``entroreg verify``.

Every check draws its random inputs from a generator seeded with the run
seed and the check name, so a report is reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fixtures
from .field import (
    Grid,
    ScalarField,
    VectorField,
    interpolate,
    prolong,
    quadrature_mean,
    restrict,
)
from .orlicz import PHI_EXP, PHI_LOG, holder_pair, luxemburg_norm, phi_exp, phi_log
from .registration import RegistrationConfig, RegistrationData, reduced_value_and_gradient
from .smoothmax import (
    chi_gamma,
    dv_supremum_oracle,
    grad_chi_gamma,
    grad_psi_gamma,
    lexp_bound,
    log_mean_exp,
    psi_gamma,
    psi_zero,
)
from .sobolev import hs_grad, hs_norm_sq
from .transport import (
    TransportSetup,
    renormalization_check,
    solve_forward,
    ssd_and_gradient,
    stability_ratio,
)

SCOPES = ("field", "orlicz", "smoothmax", "sobolev", "transport", "registration")


@dataclass
class CheckResult:
    scope: str
    name: str
    measured: float
    bound: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.scope}.{self.name}: measured={self.measured:.6e} {self.relation} bound={self.bound:.6e}"


_REGISTRY: list[tuple[str, str, Callable]] = []


def check(scope: str, name: str):
    def deco(fn):
        _REGISTRY.append((scope, name, fn))
        return fn
    return deco


def _le(scope, name, measured, bound) -> CheckResult:
    return CheckResult(scope, name, float(measured), float(bound), bool(measured <= bound))


def _rng(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def central_difference(fun, x, w, step=1e-5):
    """Fourth-order central difference of ``fun`` at ``x`` along ``w``.

    The plain two-point stencil carries an O(step^2) error that dominates the
    relative error whenever ``w`` is nearly orthogonal to the gradient.
    """
    d1 = (fun(x + step * w) - fun(x - step * w)) / (2 * step)
    d2 = (fun(x + 2 * step * w) - fun(x - 2 * step * w)) / (4 * step)
    return (4.0 * d1 - d2) / 3.0


def fd_rel_error(fun, grad, x, directions, step=1e-5):
    """Worst relative mismatch between ``<grad, w>`` and finite differences."""
    worst = 0.0
    for w in directions:
        fd = central_difference(fun, x, w, step)
        an = float(np.sum(grad * w))
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-300))
    return worst


# -- field ---------------------------------------------------------------------

@check("field", "trapezoid_linear_mean")
def _(rng):
    g = Grid.unit(int(rng.integers(3, 40)))
    return abs(quadrature_mean(ScalarField(g, g.coords()[0])) - 0.5), 1e-15


@check("field", "interpolation_convexity")
def _(rng):
    g = Grid.unit(9, 2)
    f = ScalarField(g, rng.standard_normal(g.dims))
    worst = -np.inf
    for p in rng.uniform(0, 1, size=(200, 2)):
        i, j = np.minimum((p / g.spacing).astype(int), 7)
        corners = f.values[i:i + 2, j:j + 2]
        val = interpolate(f, p)
        worst = max(worst, corners.min() - val, val - corners.max())
    return worst, 0.0


@check("field", "prolong_restrict_roundtrip")
def _(rng):
    coarse, fine = Grid.unit(9, 2), Grid.unit(33, 2)
    f = ScalarField(coarse, rng.standard_normal(coarse.dims))
    back = restrict(prolong(f, fine), coarse)
    return float(np.max(np.abs(back.values - f.values))), 0.0


# -- orlicz --------------------------------------------------------------------

@check("orlicz", "closed_forms")
def _(rng):
    g = Grid.unit(64)
    c = float(rng.uniform(0.5, 3.0))
    t_star = _root(lambda t: t * math.log(t) - 1.0, 1.0, 3.0)
    errs = [
        abs(luxemburg_norm(ScalarField(g, np.full(64, c)), PHI_EXP) - c),
        abs(luxemburg_norm(ScalarField(g, np.full(64, c)), PHI_LOG) - c / t_star),
        abs(luxemburg_norm(fixtures.two_valued(g, 0.0, 2.0), PHI_EXP) - 2.0 / (1.0 + math.log(2.0))),
    ]
    return max(errs), 1e-8


@check("orlicz", "holder")
def _(rng):
    g = Grid.unit(16, 2)
    worst = -np.inf
    for _ in range(50):
        f = ScalarField(g, rng.uniform(-2, 2, g.dims))
        h = ScalarField(g, rng.uniform(-2, 2, g.dims))
        lhs, rhs = holder_pair(f, h)
        worst = max(worst, lhs - rhs)
    return worst, 1e-10


@check("orlicz", "fenchel_young")
def _(rng):
    y, z = rng.uniform(0, 6, 10_000), rng.uniform(0, 60, 10_000)
    return float(np.max(y * z - phi_exp(y) - phi_log(z))), 1e-12


def _root(fn, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fn(lo) * fn(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- smoothmax -----------------------------------------------------------------

@check("smoothmax", "sandwich")
def _(rng):
    g = Grid.unit(12, 2)
    worst = -np.inf
    for _ in range(100):
        u = ScalarField(g, rng.uniform(-3, 3) + rng.standard_normal(g.dims))
        for gamma in (0.01, 0.1, 1.0, 10.0):
            e = log_mean_exp(u, gamma)
            worst = max(worst, quadrature_mean(u) - e, e - u.values.max())
    return worst, 1e-12


@check("smoothmax", "gamma_monotonicity")
def _(rng):
    g = Grid.unit(8, 2)
    worst = -np.inf
    for _ in range(40):
        u = ScalarField(g, rng.standard_normal(g.dims))
        v = fixtures.random_velocity(g, rng, 1.0)
        g1, g2 = sorted(rng.uniform(0.01, 5.0, 2))
        worst = max(worst, chi_gamma(u, g2) - chi_gamma(u, g1), psi_gamma(v, g2) - psi_gamma(v, g1))
    return worst, 1e-12


@check("smoothmax", "relaxation_below_sup")
def _(rng):
    g = Grid.unit(8, 2)
    worst = -np.inf
    for _ in range(40):
        v = fixtures.random_velocity(g, rng, 1.0)
        worst = max(worst, psi_gamma(v, float(rng.uniform(0.01, 5))) - psi_zero(v))
    return worst, 1e-12


@check("smoothmax", "dv_duality")
def _(rng):
    # the oracle works with equally weighted points, so compare against a plain mean
    worst = 0.0
    for _ in range(5):
        u = rng.uniform(0, 1, int(rng.integers(2, 9)))
        gamma = float(rng.uniform(0.1, 2.0))
        closed = _plain_lme(u, gamma) + _plain_lme(-u, gamma)
        worst = max(worst, abs(dv_supremum_oracle(u, gamma, iters=3000) - closed))
    return worst, 1e-6


@check("smoothmax", "shift_covariance")
def _(rng):
    g = Grid.unit(10, 2)
    worst = 0.0
    for _ in range(50):
        u = ScalarField(g, rng.standard_normal(g.dims))
        c, gamma = float(rng.uniform(-10, 10)), float(rng.uniform(0.01, 5))
        shifted = log_mean_exp(ScalarField(g, u.values + c), gamma)
        worst = max(worst, abs(shifted - log_mean_exp(u, gamma) - c))
    return worst, 1e-12


@check("smoothmax", "lexp_bound")
def _(rng):
    g = Grid.unit(16, 2)
    worst = -np.inf
    for _ in range(50):
        u = ScalarField(g, rng.uniform(-1, 1, g.dims) * rng.uniform(0.1, 4.0))
        gamma = float(rng.uniform(0.05, 5.0))
        worst = max(worst, luxemburg_norm(u, PHI_EXP) + 1e-8 - lexp_bound(u, gamma))
    return worst, 0.0


def _plain_lme(u, gamma):
    m = u.max()
    return m + gamma * math.log(np.mean(np.exp((u - m) / gamma)))


@check("smoothmax", "gradients")
def _(rng):
    g = Grid.unit(8, 2)
    u = ScalarField(g, rng.uniform(-1, 1, g.dims))
    dirs = [rng.standard_normal(g.dims) for _ in range(5)]
    e1 = fd_rel_error(lambda x: chi_gamma(ScalarField(g, x), 0.3), grad_chi_gamma(u, 0.3).values, u.values, dirs)
    # amplitude h keeps the cell derivatives of unit scale
    v = fixtures.random_velocity(g, rng, float(g.spacing[0]))
    vdirs = [VectorField(g, rng.standard_normal(v.components.shape)).with_zero_boundary().components
             for _ in range(5)]
    e2 = fd_rel_error(lambda x: psi_gamma(VectorField(g, x), 0.3),
                       grad_psi_gamma(v, 0.3).components, v.components, vdirs)
    return max(e1, e2), 1e-6


# -- sobolev ---------------------------------------------------------------------

@check("sobolev", "single_mode")
def _(rng):
    g = Grid.unit(257)
    x = g.coords()[0]
    v = VectorField(g, np.sin(np.pi * x)[None]).with_zero_boundary()
    return abs(hs_norm_sq(v, 0.25) - 0.5 * (1 + np.pi ** 2) ** 1.25), 1e-3


@check("sobolev", "gradient")
def _(rng):
    g = Grid.unit(9, 2)
    v = VectorField(g, rng.standard_normal((2, 9, 9))).with_zero_boundary()
    dirs = [VectorField(g, rng.standard_normal((2, 9, 9))).with_zero_boundary().components for _ in range(5)]
    # exact on a quadratic at any step; a large one keeps roundoff down
    return fd_rel_error(lambda x: hs_norm_sq(VectorField(g, x), 0.25), hs_grad(v, 0.25).components,
                        v.components, dirs, step=1e-2), 1e-7


# -- transport -------------------------------------------------------------------

@check("transport", "maximum_principle")
def _(rng):
    g = Grid.unit(12, 2)
    worst = -np.inf
    for _ in range(50):
        v = VectorField(g, rng.uniform(-0.5, 0.5, (2, 12, 12))).with_zero_boundary()
        phi0 = ScalarField(g, rng.uniform(-1, 1, g.dims))
        phiT = solve_forward(v, phi0, TransportSetup(1.0, 8))
        worst = max(worst, phiT.values.max() - phi0.values.max(), phi0.values.min() - phiT.values.min())
    return worst, 0.0


@check("transport", "adjoint_gradient")
def _(rng):
    g = Grid.unit(8, 2)
    v = fixtures.random_velocity(g, rng, 0.05)
    phi0 = fixtures.random_smooth_field(g, rng)
    tar = fixtures.random_smooth_field(g, rng)
    setup = TransportSetup(1.0, 8)
    grad = ssd_and_gradient(v, phi0, tar, setup)[2].components
    dirs = [VectorField(g, rng.standard_normal(v.components.shape)).with_zero_boundary().components
            for _ in range(5)]
    return fd_rel_error(lambda x: ssd_and_gradient(VectorField(g, x), phi0, tar, setup)[0],
                         grad, v.components, dirs), 1e-6


@check("transport", "renormalization_node_aligned")
def _(rng):
    g = Grid.unit(33, 2)
    v = fixtures.interior_constant_velocity(g, (0.25, -0.25))
    phi0 = fixtures.compact_bump(g, (0.5, 0.5), 0.2)
    lhs, rhs = renormalization_check(v, phi0, TransportSetup(0.125, 8), np.exp)
    return float(np.max(np.abs(lhs.values - rhs.values))), 0.0


@check("transport", "stability")
def _(rng):
    g = Grid.unit(33, 2)
    v = fixtures.vortex_velocity(g, radius=0.3, strength=0.02)
    w = fixtures.random_velocity(g, rng, 0.01)
    phi0 = fixtures.gaussian_bump(g, (0.4, 0.5), 0.12)
    ratio = stability_ratio(v, w, phi0, TransportSetup(1.0, 8))
    return ratio, 1.0


# -- registration ----------------------------------------------------------------

@check("registration", "reduced_gradient")
def _(rng):
    g = Grid.unit(8, 2)
    phi0, tar = fixtures.translated_pair(g, 0.1, 0.15)
    data = RegistrationData(phi0, tar)
    cfg = RegistrationConfig(levels=(8,))
    v = fixtures.random_velocity(g, rng, 0.05)
    grad = reduced_value_and_gradient(v, data, 0.5, cfg, 8)[2].components
    dirs = [VectorField(g, rng.standard_normal(v.components.shape)).with_zero_boundary().components
            for _ in range(5)]
    return fd_rel_error(lambda x: reduced_value_and_gradient(VectorField(g, x), data, 0.5, cfg, 8)[0],
                         grad, v.components, dirs), 1e-5


def run_checks(scope: str = "all", seed: int = 0) -> list[CheckResult]:
    if scope != "all" and scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}; choose from all, {', '.join(SCOPES)}")
    results = []
    for sc, name, fn in _REGISTRY:
        if scope not in ("all", sc):
            continue
        measured, bound = fn(_rng(seed, f"{sc}.{name}"))
        results.append(_le(sc, name, measured, bound))
    return results
