"""Limited-memory BFGS with Armijo backtracking on flat float vectors."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class LBFGSResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iters: int
    status: str  # "converged", "max_iters" or "stalled"
    history: list[float] = field(default_factory=list)
    nfev: int = 0


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def lbfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    *,
    max_iters: int = 100,
    grad_tol: float = 1e-6,
    c1: float = 1e-4,
    tau: float = 0.5,
    memory: int = 10,
    max_backtracks: int = 50,
) -> LBFGSResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    Stops when ``|g| <= grad_tol * max(1, |g0|)``.  A failed line search is
    retried once along the steepest-descent direction; if that fails too the
    run ends with status ``"stalled"``.
    """
    if not (0 < c1 < 0.5 and 0 < tau < 1):
        raise ValueError("need 0 < c1 < 1/2 and 0 < tau < 1")
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    nfev = 1
    history = [f]
    stop = grad_tol * max(1.0, float(np.linalg.norm(g)))
    pairs: deque = deque(maxlen=memory)

    def search(p, t):
        nonlocal nfev
        slope = float(np.dot(g, p))
        for _ in range(max_backtracks):
            xn = x + t * p
            fn, gn = fun(xn)
            nfev += 1
            if np.isfinite(fn) and fn <= f + c1 * t * slope:
                return xn, fn, gn
            t *= tau
        return None

    status = "max_iters"
    it = 0
    while True:
        if np.linalg.norm(g) <= stop:
            status = "converged"
            break
        if it >= max_iters:
            break
        p = _two_loop(g, list(pairs))
        if np.dot(p, g) >= 0:
            pairs.clear()
            p = -g
        t0 = 1.0 if pairs else min(1.0, 1.0 / float(np.linalg.norm(g)))
        step = search(p, t0)
        if step is None and pairs:
            log.debug("line search failed, retrying along -g")
            pairs.clear()
            step = search(-g, min(1.0, 1.0 / float(np.linalg.norm(g))))
        if step is None:
            status = "stalled"
            break
        xn, fn, gn = step
        s, y = xn - x, gn - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = xn, fn, gn
        history.append(f)
        it += 1
    return LBFGSResult(x, f, g, it, status, history, nfev)
