"""Young functions of the exponential / L log L pair and Luxemburg norms."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .field import GridError, ScalarField


class Kind(enum.Enum):
    EXP = "exp"
    LOG = "log"


def phi_exp(t):
    """t on [0, 1), exp(t - 1) beyond."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        return np.where(t < 1.0, t, np.exp(np.maximum(t, 1.0) - 1.0))


def phi_log(t):
    """t ln+ t, the convex conjugate of :func:`phi_exp`."""
    t = np.asarray(t, dtype=np.float64)
    safe = np.where(t > 1.0, t, 1.0)
    return np.where(t > 1.0, safe * np.log(safe), 0.0)


@dataclass(frozen=True)
class YoungFunction:
    kind: Kind

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise ValueError("Young functions are defined for t >= 0 only")
        return phi_exp(t) if self.kind is Kind.EXP else phi_log(t)


PHI_EXP = YoungFunction(Kind.EXP)
PHI_LOG = YoungFunction(Kind.LOG)


def phi_eval(phi: YoungFunction, t: float) -> float:
    return float(phi(t))


def _modular(phi: YoungFunction, absf: np.ndarray, w: np.ndarray, gamma: float) -> float:
    with np.errstate(over="ignore", divide="ignore"):
        return float(np.sum(w * phi(absf / gamma)) / np.sum(w))


def luxemburg_norm(f: ScalarField, phi: YoungFunction = PHI_EXP, tol: float = 1e-10) -> float:
    """inf{g > 0 : mean(phi(|f| / g)) <= 1} under the normalized measure, by bisection.

    The returned value is the upper end of the final bracket, so it is always
    feasible; the bracket is no wider than ``tol`` times the result.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    absf = np.abs(np.asarray(f.values, dtype=np.float64))
    if not np.all(np.isfinite(absf)):
        raise ValueError("field values must be finite")
    top = float(absf.max(initial=0.0))
    if top == 0.0:
        return 0.0
    w = f.grid.weights

    lo, hi = 1e-300, top + 1.0
    while _modular(phi, absf, w, hi) > 1.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _modular(phi, absf, w, mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def holder_pair(f: ScalarField, g: ScalarField, tol: float = 1e-10) -> tuple[float, float]:
    """Both sides of mean(f g) <= 2 ||f||_exp ||g||_log."""
    if f.grid != g.grid:
        raise GridError("fields live on different grids")
    w = f.grid.weights
    lhs = float(np.sum(w * f.values * g.values) / np.sum(w))
    rhs = 2.0 * luxemburg_norm(f, PHI_EXP, tol) * luxemburg_norm(g, PHI_LOG, tol)
    return lhs, rhs
