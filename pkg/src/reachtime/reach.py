"""Supporting-point propagation of discrete reachable sets.

The reachable set of the time-reversed system is tracked through its supporting
points in a fixed grid of directions.  For a front direction ``l`` the covector
``η = l Φ_h(t_end, ·)`` is pulled back over the fine grid; at every substep the
control maximizing ``η G u`` over the discretized control set is selected and
the point is rebuilt by a forward replay.  This is the support-function
identity for Minkowski sums and linear images, so the full Minkowski vertex
cloud is never formed.
"""
from __future__ import annotations

import math
import logging
from dataclasses import dataclass, field

import numpy as np

from reachtime.convex_geometry import (
    DirectionGrid, Polytope, argmax_vertices, convex_hull_normalize,
    direction_grid, hausdorff_distance, polytope_from_directions,
    support_values, supporting_points,
)
from reachtime.dynamics import (
    LinearSystem, Scheme, Substep, TimeGrid, phi_invertibility_check, substep,
    time_reverse,
)
from reachtime.errors import PropagationError

log = logging.getLogger(__name__)

MODES = ("recursive", "global")


@dataclass(frozen=True, eq=False)
class Front:
    """Supporting points of ``R_hΔ(t_i)``, one per grid direction, plus their hull."""

    level: int
    time: float
    points: np.ndarray
    direction_index: np.ndarray
    polytope: Polytope

    def support(self, directions: np.ndarray) -> np.ndarray:
        return support_values(self.polytope, directions)


@dataclass(eq=False)
class ReachRun:
    system: LinearSystem          # time-reversed
    scheme: Scheme
    grid: TimeGrid
    directions: DirectionGrid
    control_grid: DirectionGrid
    U_delta: Polytope
    S_delta: Polytope
    fronts: list[Front]
    mode: str = "recursive"
    steps: list[Substep] = field(default_factory=list, repr=False)

    @property
    def K(self) -> int:
        return self.grid.K

    def support_table(self) -> np.ndarray:
        """``δ*(l^k, R_i)`` as a (K+1, n_dirs) array."""
        L = self.directions.directions
        return np.array([f.support(L) for f in self.fronts])

    def support_increments(self) -> np.ndarray:
        return np.diff(self.support_table(), axis=0)

    def diagnostics(self) -> dict:
        inc = self.support_increments()
        return {
            "max_support_increment": inc.max(axis=1).tolist(),
            "min_support_increment": inc.min(axis=1).tolist(),
            "strictly_expanding": bool(inc.min() > 0),
        }


# --------------------------------------------------------------------------
# low-level machinery shared with the adjoint module

def rowmul(E: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Row covectors times a matrix, ``E @ M``, with a fixed summation order."""
    return (E[:, :, None] * M[None, :, :]).sum(axis=1)


def select_controls(sigma: np.ndarray, U_vertices: np.ndarray) -> np.ndarray:
    """Maximizers of ``sigma u`` over the control polytope, ties → lexicographic max."""
    return U_vertices[argmax_vertices(U_vertices, sigma)]


def build_steps(system: LinearSystem, scheme: Scheme, grid: TimeGrid) -> list[Substep]:
    """Substep operators for every fine step; fails on a singular transition."""
    steps = []
    const = None
    for q in range(grid.n_fine):
        if system.time_invariant and const is not None:
            steps.append(const)
            continue
        st = substep(scheme, system, grid.fine_time(q), grid.h)
        if not phi_invertibility_check(st.P):
            i, j = divmod(q, grid.N)
            raise PropagationError(
                f"one-step matrix at level {i}, substep {j} (t={grid.fine_time(q):.6g}) "
                f"is singular; reduce the step size h={grid.h:.3g}")
        steps.append(st)
        if system.time_invariant:
            const = st
    return steps


def pull_back(E_end: np.ndarray, steps: list[Substep], q_start: int, q_end: int,
              U_vertices: np.ndarray, keep_etas: bool = False):
    """Backward covector pass over fine steps ``q_end-1 .. q_start``.

    Returns ``(E_start, controls, switching, etas)`` where ``controls[q - q_start]``
    has shape (n_dirs, n_terms, m) and ``etas`` (if kept) has one entry per node.
    """
    E = np.array(E_end, dtype=float)
    nq = q_end - q_start
    nterm = len(steps[q_start].G) if nq else 0
    m = U_vertices.shape[1]
    controls = np.empty((nq, len(E), nterm, m))
    switching = np.empty((nq, len(E), nterm, m))
    etas = [E] if keep_etas else None
    for q in range(q_end - 1, q_start - 1, -1):
        st = steps[q]
        for r, G in enumerate(st.G):
            sig = rowmul(E, G)
            switching[q - q_start, :, r] = sig
            controls[q - q_start, :, r] = select_controls(sig, U_vertices)
        E = rowmul(E, st.P)
        if keep_etas:
            etas.append(E)
    if keep_etas:
        etas = np.stack(etas[::-1], axis=1)  # (n_dirs, nq+1, n)
    return E, controls, switching, etas


def replay(x0: np.ndarray, steps: list[Substep], q_start: int, controls: np.ndarray,
           keep_path: bool = False):
    """Forward recursion ``x <- P x + sum_r G_r u_r`` for a batch of start points."""
    x = np.array(x0, dtype=float)
    path = [x] if keep_path else None
    for k in range(len(controls)):
        st = steps[q_start + k]
        x = x @ st.P.T
        for r, G in enumerate(st.G):
            x = x + controls[k, :, r] @ G.T
        if keep_path:
            path.append(x)
    if keep_path:
        return x, np.stack(path, axis=1)
    return x


def _make_front(level: int, time: float, raw: np.ndarray) -> Front:
    return Front(level, time, raw, np.arange(len(raw)),
                 convex_hull_normalize(raw, raw.shape[1]))


# --------------------------------------------------------------------------
# public operations

def discretize_control_set(U: Polytope, control_grid: DirectionGrid) -> Polytope:
    """``U_Δ = co{ y(η^r, U) }``."""
    return polytope_from_directions(U, control_grid)


def propagate_step(front: Front, scheme: Scheme, system: LinearSystem, t_i: float,
                   h: float, n_substeps: int, directions: DirectionGrid,
                   U_delta: Polytope) -> Front:
    """Advance one coarse level ``Δt = n_substeps h`` (Algorithm steps 2-3).

    ``system`` is the time-reversed system.  Each grid direction gets the
    supporting point of ``Φ_h(t_{i+1}, t_i) R_i + Σ_j W_j U_Δ`` computed
    exactly through the support identities; the hull of these points is the
    next front.
    """
    scheme = Scheme.get(scheme)
    steps = []
    for j in range(n_substeps):
        st = substep(scheme, system, t_i + j * h, h)
        if not phi_invertibility_check(st.P):
            raise PropagationError(
                f"one-step matrix at substep {j} of the level starting at t={t_i:.6g} is singular")
        steps.append(st)
    return _advance(front, steps, 0, n_substeps, directions.directions, U_delta,
                    front.level + 1, t_i + n_substeps * h)


def _advance(front, steps, q_start, q_end, L, U_delta, level, time) -> Front:
    E0, controls, _, _ = pull_back(L, steps, q_start, q_end, U_delta.vertices)
    start = supporting_points(front.polytope, E0)
    raw = replay(start, steps, q_start, controls)
    return _make_front(level, time, raw)


def _global_front(level, time, steps, N, L, U_delta, S_delta) -> Front:
    E0, controls, _, _ = pull_back(L, steps, 0, level * N, U_delta.vertices)
    start = supporting_points(S_delta, E0)
    return _make_front(level, time, replay(start, steps, 0, controls))


def run(system: LinearSystem, scheme="heun", K: int = 10, N: int = 10,
        n_directions: int | DirectionGrid = 128,
        n_control_directions: int | DirectionGrid | None = None,
        mode: str = "recursive", reverse: bool = True) -> ReachRun:
    """Compute fronts ``R_hΔ(t_i)``, ``i = 0..K``, of the backward reachable sets.

    ``system`` is the forward control problem; it is time-reversed here unless
    ``reverse=False``.  ``mode="recursive"`` hulls after every coarse level as
    in the algorithm; ``mode="global"`` takes supporting points of the exact
    discrete reachable set ``R_h(t_i)`` (no intermediate hull loss).
    """
    scheme = Scheme.get(scheme)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if K < 1 or N < 1:
        raise ValueError("need K >= 1 and N >= 1")
    rsys = time_reverse(system) if reverse else system
    n = rsys.dim
    grid = TimeGrid(rsys.t0, rsys.tf, K, N)

    if isinstance(n_directions, DirectionGrid):
        dgrid = n_directions
    else:
        if n == 2 and n_directions < 3:
            raise ValueError("need at least 3 directions")
        dgrid = direction_grid(n, int(n_directions))
    if isinstance(n_control_directions, DirectionGrid):
        ugrid = n_control_directions
    else:
        ugrid = direction_grid(rsys.input_dim, int(n_control_directions or len(dgrid)))

    U_delta = discretize_control_set(rsys.U, ugrid)
    L = dgrid.directions
    front0 = _make_front(0, grid.t0, supporting_points(rsys.S, L))
    S_delta = front0.polytope
    steps = build_steps(rsys, scheme, grid)

    fronts = [front0]
    for i in range(K):
        t_next = grid.level_time(i + 1)
        try:
            if mode == "recursive":
                f = _advance(fronts[-1], steps, i * N, (i + 1) * N, L, U_delta, i + 1, t_next)
            else:
                f = _global_front(i + 1, t_next, steps, N, L, U_delta, S_delta)
        except PropagationError as exc:
            raise PropagationError(f"level {i + 1}: {exc}") from exc
        fronts.append(f)
    run_ = ReachRun(rsys, scheme, grid, dgrid, ugrid, U_delta, S_delta, fronts, mode, steps)
    log.debug("reach run %s K=%d N=%d dirs=%d: %s", scheme.name, K, N, len(dgrid),
              run_.diagnostics()["strictly_expanding"])
    return run_


@dataclass(frozen=True)
class StudyRow:
    N: int
    K: int
    h: float
    error: float
    eoc: float | None = None

    @property
    def exact(self) -> bool:
        return self.error <= 1e-13

    def eoc_label(self) -> str:
        if self.eoc is None:
            return "exact" if self.exact else ""
        return f"{self.eoc:.4f}"


def eoc_sequence(errors, ratio: float = 2.0) -> list:
    """``log_ratio(e_j / e_{j+1})``; None where both errors vanish."""
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        if a <= 1e-13 and b <= 1e-13:
            out.append(None)
        elif b <= 0:
            out.append(math.inf)
        else:
            out.append(math.log(a / b) / math.log(ratio))
    return out


def self_convergence_study(system: LinearSystem, scheme, K: int, N_list, n_directions=128,
                           N_reference: int | None = None, mode: str = "recursive",
                           n_control_directions=None) -> list[StudyRow]:
    """Hausdorff distance of the final front to a reference run, with EOC per halving.

    The reference is the finest ``N`` in ``N_list`` unless ``N_reference`` is given.
    """
    N_list = sorted(int(n) for n in N_list)
    ref_N = N_reference or N_list[-1]
    ladder = [n for n in N_list if n != ref_N] if N_reference is None else N_list
    ref = run(system, scheme, K, ref_N, n_directions, n_control_directions, mode)
    ref_final = ref.fronts[-1].polytope
    errs, hs = [], []
    for n in ladder:
        r = run(system, scheme, K, n, n_directions, n_control_directions, mode)
        errs.append(hausdorff_distance(r.fronts[-1].polytope, ref_final))
        hs.append(r.grid.h)
    ratios = [hs[j] / hs[j + 1] for j in range(len(hs) - 1)]
    eocs = [None] + [
        None if (a <= 1e-13 and b <= 1e-13) else math.log(a / b) / math.log(rho)
        for a, b, rho in zip(errs[:-1], errs[1:], ratios)
    ]
    return [StudyRow(n, K, h, e, c) for n, h, e, c in zip(ladder, hs, errs, eocs)]


def set_error_vs_exact(run: ReachRun, exact_support, n_probe: int = 2048) -> float:
    """``max_i max_l |δ*(l, front_i) - δ*(l, R(t_i))|`` over a dense probe grid.

    ``exact_support(L, t)`` gives the continuous support function at elapsed time ``t``.
    """
    L = direction_grid(run.system.dim, n_probe).directions
    err = 0.0
    for f in run.fronts[1:]:
        err = max(err, float(np.abs(f.support(L) - exact_support(L, f.time - run.grid.t0)).max()))
    return err


def richardson_set_error(system: LinearSystem, scheme, K: int, N: int, n_directions=128,
                         mode: str = "recursive") -> float:
    """Estimate of the final-front error from runs at ``h`` and ``h/2``."""
    scheme = Scheme.get(scheme)
    a = run(system, scheme, K, N, n_directions, mode=mode).fronts[-1].polytope
    b = run(system, scheme, K, 2 * N, n_directions, mode=mode).fronts[-1].polytope
    d = hausdorff_distance(a, b)
    d = d.upper if hasattr(d, "upper") else d
    return float(d * 2 ** scheme.order / (2 ** scheme.order - 1))
