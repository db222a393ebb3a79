"""Built-in example systems with analytic minimum-time functions and support functions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from reachtime.convex_geometry import box, point, support_values
from reachtime.dynamics import LinearSystem


@dataclass(frozen=True, eq=False)
class Example:
    name: str
    system: LinearSystem
    description: str
    oracle: Optional[Callable] = None          # x -> T(x)
    exact_support: Optional[Callable] = None   # (L (k,n), t) -> δ*(l, R(t)) per row
    hoelder_k: int = 1


def inf_norm_time(x) -> float:
    """Minimum time to the origin for ``x' = u``, ``u in [-1,1]^2``."""
    return float(np.max(np.abs(x)))


def double_integrator_time(x) -> float:
    """Minimum time to the origin for ``x1' = x2, x2' = u``, ``|u| <= 1``."""
    x1, x2 = float(x[0]), float(x[1])
    curve = -x2 * abs(x2) / 2.0
    if x1 > curve:
        return x2 + 2.0 * math.sqrt(x1 + x2 * x2 / 2.0)
    if x1 < curve:
        return -x2 + 2.0 * math.sqrt(-x1 + x2 * x2 / 2.0)
    return abs(x2)


def double_integrator_support(L, t: float) -> np.ndarray:
    """``∫_0^t |l1 s - l2| ds`` for each row ``l``."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    out = np.empty(len(L))
    for k, (a, b) in enumerate(L):
        if a == 0.0:
            out[k] = abs(b) * t
            continue
        r = b / a
        if 0.0 < r < t:
            out[k] = abs(a) * (r * r + (t - r) ** 2) / 2.0
        else:
            out[k] = abs(a * t * t / 2.0 - b * t)
    return out


def scalar_product_support(L, t: float) -> np.ndarray:
    L = np.atleast_2d(np.asarray(L, dtype=float))
    return t * np.abs(L).sum(axis=1)


def lti_support(system: LinearSystem, L, t: float, n_nodes: int = 4000) -> np.ndarray:
    """Support function of the continuous backward reachable set at elapsed time ``t``.

    ``δ*(l, e^{Āt} S) + ∫_0^t δ*(l e^{Ār} B̄, U) dr`` with ``Ā = -A``, ``B̄ = -B``,
    integrated by composite Gauss-Legendre on ``n_nodes`` panels.
    """
    if not system.time_invariant:
        raise ValueError("closed-form support needs constant coefficients")
    L = np.atleast_2d(np.asarray(L, dtype=float))
    Ab, Bb = -np.asarray(system.A), -np.asarray(system.B)
    g, w = np.polynomial.legendre.leggauss(4)
    edges = np.linspace(0.0, t, n_nodes + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    r = (mid[:, None] + half[:, None] * g[None]).ravel()
    wr = (half[:, None] * w[None]).ravel()
    total = support_values(system.S, L @ expm(Ab * t))
    for rk, wk in zip(r, wr):
        total = total + wk * support_values(system.U, L @ expm(Ab * rk) @ Bb)
    return total


def _box(m):
    return box([-1.0] * m, [1.0] * m)


def _examples() -> dict[str, Example]:
    si = LinearSystem(np.zeros((1, 1)), np.ones((1, 1)), _box(1), point([0.0]), 0.0, 1.0,
                      name="scalar_integrator")
    sp = LinearSystem(np.zeros((2, 2)), np.eye(2), _box(2), point([0.0, 0.0]), 0.0, 1.0,
                      name="scalar_product")
    di = LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), _box(1),
                      point([0.0, 0.0]), 0.0, 1.0, name="double_integrator")
    rot = LinearSystem(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2), _box(2),
                       point([0.0, 0.0]), 0.0, 1.0, name="rotation")
    return {
        "scalar_integrator": Example(
            "scalar_integrator", si, "x' = u, |u| <= 1, target 0", lambda x: abs(float(np.ravel(x)[0])),
            lambda L, t: t * np.abs(np.atleast_2d(L)).sum(axis=1)),
        "scalar_product": Example(
            "scalar_product", sp, "x' = u, u in [-1,1]^2, target 0; T(x) = max|x_i|",
            inf_norm_time, scalar_product_support),
        "double_integrator": Example(
            "double_integrator", di, "x1' = x2, x2' = u, |u| <= 1, target 0",
            double_integrator_time, double_integrator_support, hoelder_k=2),
        "rotation": Example(
            "rotation", rot, "x' = [[0,1],[-1,0]] x + u, u in [-1,1]^2, target 0",
            None, lambda L, t, _s=rot: lti_support(_s, L, t)),
    }


EXAMPLES = _examples()
ORACLES = {
    "none": None,
    "scalar_product_inf_norm": inf_norm_time,
    "double_integrator": double_integrator_time,
}


def get(name: str) -> Example:
    key = name.removeprefix("builtin:")
    try:
        return EXAMPLES[key]
    except KeyError:
        raise KeyError(f"unknown built-in system {name!r}; choose from {sorted(EXAMPLES)}") from None
