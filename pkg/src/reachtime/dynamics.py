"""Linear control systems, time reversal and discrete one-step transition matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from reachtime.convex_geometry import Polytope, as_polytope

MatrixLike = Union[np.ndarray, Callable[[float], np.ndarray]]


class Tabulated:
    """Matrix-valued coefficient sampled at given times, looked up at the nearest sample."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 3 or len(self.values) != len(self.times):
            raise ValueError("tabulated coefficient needs one matrix per time")
        order = np.argsort(self.times)
        self.times, self.values = self.times[order], self.values[order]

    def __call__(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.times, t))
        if i == len(self.times) or (i > 0 and t - self.times[i - 1] <= self.times[i] - t):
            i -= 1
        return self.values[i]

    def to_json(self) -> dict:
        return {"times": self.times.tolist(), "values": self.values.tolist()}


class _Reversed:
    # t -> -M(t0 + tf - t); reentrant, no state beyond construction
    def __init__(self, base, t0: float, tf: float):
        self.base, self.t0, self.tf = base, t0, tf

    def __call__(self, t: float) -> np.ndarray:
        return -np.asarray(self.base(self.t0 + self.tf - t), dtype=float)


def _evaluate(M: MatrixLike, t: float) -> np.ndarray:
    if callable(M):
        return np.atleast_2d(np.asarray(M(t), dtype=float))
    return M


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``y' = A(t) y + B(t) u``, ``u in U``, target ``S``, horizon ``[t0, tf]``.

    ``A`` and ``B`` are either constant arrays or callables ``t -> matrix``;
    callables must be pure.
    """

    A: MatrixLike
    B: MatrixLike
    U: Polytope
    S: Polytope
    t0: float = 0.0
    tf: float = 1.0
    reversed: bool = False
    name: str = ""

    def __post_init__(self):
        for attr in ("A", "B"):
            M = getattr(self, attr)
            if not callable(M):
                M = np.atleast_2d(np.asarray(M, dtype=float))
                if M.ndim != 2:
                    raise ValueError(f"{attr} must be a matrix")
                M.setflags(write=False)
                object.__setattr__(self, attr, M)
        object.__setattr__(self, "U", as_polytope(self.U))
        object.__setattr__(self, "S", as_polytope(self.S))
        if not self.t0 < self.tf:
            raise ValueError(f"need t0 < tf, got t0={self.t0}, tf={self.tf}")
        A0, B0 = self.A_at(self.t0), self.B_at(self.t0)
        n = A0.shape[0]
        if A0.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A0.shape}")
        if B0.shape[0] != n:
            raise ValueError(f"B has {B0.shape[0]} rows, A has {n}")
        if self.U.dim != B0.shape[1]:
            raise ValueError(f"control set is {self.U.dim}-d but B has {B0.shape[1]} columns")
        if self.S.dim != n:
            raise ValueError(f"target is {self.S.dim}-d but the state is {n}-d")

    @property
    def dim(self) -> int:
        return self.A_at(self.t0).shape[0]

    @property
    def input_dim(self) -> int:
        return self.B_at(self.t0).shape[1]

    @property
    def time_invariant(self) -> bool:
        return not callable(self.A) and not callable(self.B)

    def A_at(self, t: float) -> np.ndarray:
        return _evaluate(self.A, t)

    def B_at(self, t: float) -> np.ndarray:
        return _evaluate(self.B, t)


def time_reverse(system: LinearSystem) -> LinearSystem:
    """``Ā(t) = -A(t0 + tf - t)``, ``B̄(t) = -B(t0 + tf - t)``; ``S`` becomes the initial set."""
    def flip(M):
        if not callable(M):
            return -M
        if isinstance(M, _Reversed) and (M.t0, M.tf) == (system.t0, system.tf):
            return M.base
        return _Reversed(M, system.t0, system.tf)

    return replace(system, A=flip(system.A), B=flip(system.B), reversed=not system.reversed)


@dataclass(frozen=True)
class Scheme:
    name: str
    order: int
    n_terms: int

    @classmethod
    def get(cls, name: "str | Scheme") -> "Scheme":
        if isinstance(name, Scheme):
            return name
        key = {"combination": "combination_trapezoid", "trapezoid": "combination_trapezoid"}.get(name, name)
        try:
            return SCHEMES[key]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


EULER = Scheme("euler", 1, 1)
HEUN = Scheme("heun", 2, 1)
COMBINATION_TRAPEZOID = Scheme("combination_trapezoid", 2, 2)
SCHEMES = {s.name: s for s in (EULER, HEUN, COMBINATION_TRAPEZOID)}


@dataclass(frozen=True)
class TimeGrid:
    """Coarse levels ``t_i = t0 + i Δt`` each split into ``N`` substeps of length ``h``."""

    t0: float
    tf: float
    K: int
    N: int

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise ValueError(f"need K >= 1 and N >= 1, got K={self.K}, N={self.N}")

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / self.K

    @property
    def h(self) -> float:
        return (self.tf - self.t0) / (self.K * self.N)

    @property
    def n_fine(self) -> int:
        return self.K * self.N

    def level_time(self, i: int) -> float:
        return self.t0 + i * self.dt

    def fine_time(self, q: int) -> float:
        """``t_ij`` for the flattened fine index ``q = i N + j``."""
        i, j = divmod(q, self.N)
        if i == self.K:
            return self.tf if j == 0 else self.level_time(i) + j * self.h
        return self.level_time(i) + j * self.h

    def fine_times(self, q_end: int | None = None) -> np.ndarray:
        q_end = self.n_fine if q_end is None else q_end
        return np.array([self.fine_time(q) for q in range(q_end + 1)])


def phi_step(scheme: "Scheme | str", A: MatrixLike, t: float, h: float) -> np.ndarray:
    """One-step transition matrix Φ_h(t + h, t) of the requested scheme."""
    scheme = Scheme.get(scheme)
    if h <= 0:
        raise ValueError("step size must be positive")
    A0 = _evaluate(A, t) if callable(A) else np.atleast_2d(np.asarray(A, dtype=float))
    eye = np.eye(A0.shape[0])
    if scheme.order == 1:
        return eye + h * A0
    A1 = _evaluate(A, t + h) if callable(A) else A0
    return eye + 0.5 * h * (A0 + A1) + 0.5 * h * h * (A1 @ A0)


def phi_invertibility_check(phi) -> bool:
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[0] != phi.shape[1]:
        raise ValueError("square matrix expected")
    s = np.linalg.svd(phi, compute_uv=False)
    return bool(s[0] > 0 and s[-1] > 1e-12 * s[0])


@dataclass(frozen=True)
class Substep:
    """``y_{+} = P y + sum_r G_r u_r`` with an independent control per input term."""

    P: np.ndarray
    G: tuple[np.ndarray, ...]


def substep(scheme: "Scheme | str", system: LinearSystem, s: float, h: float) -> Substep:
    """Transition and input matrices of one fine step ``[s, s + h]`` of ``system``.

    euler: Riemann-sum combination method, ``P (y + h B(s) u)``.
    heun: set-valued Heun with one piecewise-constant selection.
    combination_trapezoid: Heun transition, trapezoidal weights, two selections.
    """
    scheme = Scheme.get(scheme)
    P = phi_step(scheme, system.A, s, h)
    B0 = system.B_at(s)
    if scheme.name == "euler":
        return Substep(P, (h * (P @ B0),))
    B1 = system.B_at(s + h)
    if scheme.name == "heun":
        A1 = system.A_at(s + h)
        W = 0.5 * h * ((np.eye(len(P)) + h * A1) @ B0 + B1)
        return Substep(P, (W,))
    return Substep(P, (0.5 * h * (P @ B0), 0.5 * h * B1))


def default_direction_count(h: float, order: int, minimum: int = 16) -> int:
    """Smallest planar grid with ``2 sin(π/2N) <= h^p`` (roughly ``π / h^p``)."""
    return max(minimum, math.ceil(math.pi / h ** order))


def level_transition(scheme, system: LinearSystem, grid: TimeGrid, i: int) -> np.ndarray:
    """``Φ_h(t_{i+1}, t_i)`` as the product of the level's one-step matrices."""
    M = np.eye(system.dim)
    for j in range(grid.N):
        M = phi_step(scheme, system.A, grid.fine_time(i * grid.N + j), grid.h) @ M
    return M


def transition(scheme, system: LinearSystem, grid: TimeGrid, i: int, k: int) -> np.ndarray:
    """``Φ_h(t_k, t_i)`` composed level by level, so ``Φ(t_k,t_i) = Φ(t_k,t_j) Φ(t_j,t_i)``
    holds by definition for ``i <= j <= k``."""
    if k < i:
        raise ValueError("transition goes forward in the grid")
    if k - i <= 1:
        return np.eye(system.dim) if k == i else level_transition(scheme, system, grid, i)
    return level_transition(scheme, system, grid, k - 1) @ transition(scheme, system, grid, i, k - 1)
