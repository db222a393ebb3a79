"""Discrete time-optimal control reconstruction at front vertices."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from reachtime.convex_geometry import GeometryError, Polytope, scores
from reachtime.dynamics import LinearSystem, Scheme, TimeGrid
from reachtime.errors import UnsupportedError
from reachtime.reach import ReachRun, build_steps, pull_back, replay, rowmul

SINGULAR_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant control: ``values[j]`` on ``[breaks[j], breaks[j+1])``.

    The value at the final instant repeats the last interval.
    """

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if len(b) != len(v) + 1 or np.any(np.diff(b) <= 0):
            raise ValueError("need increasing breakpoints, one more than values")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        j = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.values) - 1)
        return self.values[j]

    def node_values(self) -> np.ndarray:
        """Values at every breakpoint with the final-point convention."""
        return np.vstack([self.values, self.values[-1:]])


@dataclass(eq=False)
class AdjointPath:
    zeta: np.ndarray
    times: np.ndarray          # fine nodes t_0 .. t_end
    etas: np.ndarray           # (n_nodes, n)
    switching: np.ndarray      # (n_steps, n_terms, m): covectors the controls maximize
    controls: np.ndarray       # (n_steps, n_terms, m)
    trajectory: np.ndarray     # (n_nodes, n)
    target: np.ndarray
    scheme: Scheme
    level: int
    direction_index: Optional[int] = None
    singular_steps: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def endpoint(self) -> np.ndarray:
        return self.trajectory[-1]

    @property
    def defect(self) -> float:
        return float(np.linalg.norm(self.endpoint - self.target))

    def control_signal(self, term: int = 0) -> ControlSignal:
        return ControlSignal(self.times, self.controls[:, term, :])

    def duality_gap(self) -> float:
        """``<η_end, y_end> - <η_0, y_0> - Σ σ·u``; zero up to rounding."""
        lhs = float(self.etas[-1] @ self.trajectory[-1]) - float(self.etas[0] @ self.trajectory[0])
        rhs = float((self.switching * self.controls).sum())
        return lhs - rhs


# --------------------------------------------------------------------------

def outer_normal_at_vertex(front, v) -> np.ndarray:
    """Bisector of the outward normals of the two edges meeting at vertex ``v``."""
    P = front.polytope if hasattr(front, "polytope") else front
    if not isinstance(P, Polytope) or P.dim != 2:
        raise GeometryError("outer normals are defined for planar polygons")
    V = P.vertices
    if len(V) < 3:
        raise GeometryError("the front is a point or segment; its vertex normal cones are not proper")
    v = np.asarray(v, dtype=float)
    d = np.linalg.norm(V - v, axis=1)
    i = int(d.argmin())
    if d[i] > 1e-12 * max(1.0, float(np.abs(V).max())):
        raise GeometryError(f"{v.tolist()} is not a vertex of the front")
    e_in, e_out = V[i] - V[i - 1], V[(i + 1) % len(V)] - V[i]
    n = np.array([e_in[1], -e_in[0]]) / np.linalg.norm(e_in) + np.array([e_out[1], -e_out[0]]) / np.linalg.norm(e_out)
    return n / np.linalg.norm(n)


def adjoint_sequence(zeta, phis) -> np.ndarray:
    """Backward recursion ``η_{q} = η_{q+1} Φ_q`` ending in ``η_end = zeta``.

    ``phis`` lists the one-step matrices in forward order; returns one covector per node.
    """
    zeta = np.asarray(zeta, dtype=float).reshape(1, -1)
    if np.linalg.norm(zeta) < 1e-12:
        raise GeometryError("terminal covector must be nonzero")
    etas = [zeta]
    for P in reversed(list(phis)):
        etas.append(rowmul(etas[-1], np.asarray(P, dtype=float)))
    return np.vstack(etas[::-1])


def bang_bang_control(eta, Bbar) -> np.ndarray:
    """``sign(η B̄)`` with ``sign(v) = 0`` for ``|v| < 1e-12``."""
    v = np.asarray(eta, dtype=float) @ np.atleast_2d(np.asarray(Bbar, dtype=float))
    return np.where(np.abs(v) < SINGULAR_TOL, 0.0, np.sign(v))


def maximum_condition_check(switching, controls, U: Polytope, tol: float = 1e-10) -> bool:
    """``σ·u >= max_{w in U} σ·w - tol`` at every step (σ = row of ``switching``)."""
    S = np.asarray(switching, dtype=float).reshape(-1, U.dim)
    C = np.asarray(controls, dtype=float).reshape(-1, U.dim)
    best = scores(S, U.vertices).max(axis=1)
    got = (S * C).sum(axis=1)
    scale = np.abs(S).sum(axis=1) * max(1.0, float(np.abs(U.vertices).max()))
    return bool(np.all(got >= best - tol * np.maximum(scale, 1.0)))


def replay_trajectory(system: LinearSystem, scheme, grid: TimeGrid, controls, y0) -> np.ndarray:
    """Forward discrete trajectory on all fine nodes for the given controls.

    ``controls`` has one entry per fine step, shaped ``(n_steps, m)`` or
    ``(n_steps, n_terms, m)`` for schemes with several selections per step.
    """
    scheme = Scheme.get(scheme)
    c = np.asarray(controls, dtype=float)
    if c.ndim == 2:
        c = c[:, None, :]
    if c.shape[1] != scheme.n_terms:
        raise ValueError(f"scheme {scheme.name} takes {scheme.n_terms} control(s) per step, got {c.shape[1]}")
    if len(c) > grid.n_fine:
        raise ValueError("more control steps than the grid has")
    steps = build_steps(system, scheme, grid)
    _, path = replay(np.asarray(y0, dtype=float)[None, :], steps, 0, c[:, None], keep_path=True)
    return path[0]


def normality_check(A, B) -> bool:
    """Rank test of ``[Bω, ABω, …, A^{n-1}Bω]`` for every signed unit ``ω`` of the control box."""
    if callable(A) or callable(B):
        raise UnsupportedError("normality is checked for constant coefficients only")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    B = B[:, None] if B.ndim == 1 else B
    n = A.shape[0]
    for mu in range(B.shape[1]):
        for sgn in (1.0, -1.0):
            cols = [sgn * B[:, mu]]
            for _ in range(n - 1):
                cols.append(A @ cols[-1])
            s = np.linalg.svd(np.column_stack(cols), compute_uv=False)
            if s[0] == 0 or s[-1] <= 1e-10 * s[0]:
                return False
    return True


def l1_control_distance(u1: ControlSignal, u2: ControlSignal, interval=None) -> float:
    """Exact ``∫ |u1 - u2|_1 dt`` for piecewise-constant signals."""
    lo = max(u1.breaks[0], u2.breaks[0]) if interval is None else interval[0]
    hi = min(u1.breaks[-1], u2.breaks[-1]) if interval is None else interval[1]
    if hi <= lo:
        return 0.0
    b = np.union1d(np.concatenate([u1.breaks, u2.breaks]), [lo, hi])
    b = b[(b >= lo) & (b <= hi)]
    mid = 0.5 * (b[:-1] + b[1:])
    return float((np.abs(u1(mid) - u2(mid)).sum(axis=1) * np.diff(b)).sum())


def switching_counts(controls) -> np.ndarray:
    """Sign changes per control component, ignoring zero values."""
    c = np.asarray(controls, dtype=float)
    c = c.reshape(len(c), -1)
    out = []
    for col in c.T:
        s = np.sign(col[np.abs(col) > 0])
        out.append(int((s[1:] != s[:-1]).sum()))
    return np.array(out)


# --------------------------------------------------------------------------

def reconstruct(run: ReachRun, level: int, direction_index: Optional[int] = None,
                zeta=None, scheme=None) -> AdjointPath:
    """Time-optimal discrete control steering ``S`` to a vertex of front ``level``.

    By default ``zeta`` is the grid direction ``direction_index`` that generated
    the vertex.  In ``global`` mode the replayed endpoint then coincides with
    the stored supporting point; in ``recursive`` mode it is the exact discrete
    supporting point, which may lie slightly outside the hulled front.
    """
    if scheme is not None and Scheme.get(scheme) != run.scheme:
        raise ValueError(f"fronts were built with {run.scheme.name}; cannot reconstruct with {Scheme.get(scheme).name}")
    if not run.system.time_invariant:
        raise UnsupportedError("control reconstruction needs a time-invariant system")
    if not 1 <= level <= run.K:
        raise ValueError(f"level must be in 1..{run.K}")
    front = run.fronts[level]
    if zeta is None:
        if direction_index is None:
            raise ValueError("give a direction index or a terminal covector")
        if not 0 <= direction_index < len(run.directions):
            raise IndexError(f"direction index {direction_index} out of range 0..{len(run.directions) - 1}")
        zeta = run.directions.directions[direction_index]
        target = front.points[direction_index]
    else:
        zeta = np.asarray(zeta, dtype=float)
        if np.linalg.norm(zeta) < 1e-12:
            raise GeometryError("terminal covector must be nonzero")
        target = front.polytope.vertices[int(np.argmax(front.polytope.vertices @ zeta))]
    q_end = level * run.grid.N
    _, controls, switching, etas = pull_back(zeta[None, :], run.steps, 0, q_end,
                                              run.U_delta.vertices, keep_etas=True)
    y0 = run.S_delta.vertices[int(np.argmax(scores(etas[:, 0], run.S_delta.vertices)[0]))]
    _, path = replay(y0[None, :], run.steps, 0, controls, keep_path=True)
    sw = switching[:, 0]
    gscale = max(float(np.abs(sw).max()), 1e-300)
    singular = int((np.abs(sw) < SINGULAR_TOL * gscale).any(axis=(1, 2)).sum())
    notes = []
    if singular:
        notes.append(f"{singular} step(s) with a vanishing switching function")
    return AdjointPath(zeta, run.grid.fine_times(q_end), etas[0], sw, controls[:, 0],
                       path[0], np.asarray(target, dtype=float), run.scheme, level,
                       direction_index, singular, notes)


def vertex_directions(run: ReachRun, level: int) -> np.ndarray:
    """For every hull vertex of front ``level`` one direction index that produced it."""
    f = run.fronts[level]
    V = f.polytope.vertices
    d = np.sqrt(((V[:, None, :] - f.points[None, :, :]) ** 2).sum(-1))
    return d.argmin(axis=1)
