"""Fully discrete minimum-time function on nested planar fronts.

Front ``i`` carries the value ``t_i``.  The annulus between consecutive fronts
is triangulated with a ring zipper and the function is the piecewise-linear
interpolant of the vertex values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from reachtime.convex_geometry import Polytope, edge_halfspaces, point_distance, support_values
from reachtime.errors import StructuralError

NOT_IN_DOMAIN = None
BARY_TOL = 1e-9
NEST_TOL = 1e-9
AREA_TOL = 1e-14


@dataclass(eq=False)
class TimeSurface:
    """Piecewise-linear surface over the union of fronts.

    ``vertices[offsets[i]:offsets[i+1]]`` are the hull vertices of front ``i``
    (CCW); ``band[k] = i`` means triangle ``k`` joins fronts ``i`` and ``i+1``.
    """

    vertices: np.ndarray
    values: np.ndarray
    triangles: np.ndarray
    band: np.ndarray
    fronts: list[Polytope]
    level_times: np.ndarray
    offsets: np.ndarray
    delta_gamma: float
    fallback_bands: list[int] = field(default_factory=list)

    @property
    def target(self) -> Polytope:
        return self.fronts[0]

    @property
    def K(self) -> int:
        return len(self.fronts) - 1

    def triangle_points(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def triangle_diameters(self) -> np.ndarray:
        return _diameters(self.triangle_points())

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * _orient(self.triangle_points())


@dataclass(frozen=True)
class ErrorBudget:
    """Inputs of the a-priori bound ``ω(Δ_Γ) + ω(C h^p)``.

    ``modulus`` is ``"lipschitz"`` (``ω(δ) = L δ``) or ``"hoelder"``
    (``ω(δ) = H δ^(1/k)``); ``constant`` is L or H.
    """

    modulus: str
    constant: float
    C: float
    h: float
    p: int
    delta_gamma: float
    dt: float = 0.0
    k: int = 1

    def __post_init__(self):
        if self.modulus not in ("lipschitz", "hoelder"):
            raise ValueError("modulus must be 'lipschitz' or 'hoelder'")
        for name in ("constant", "C", "h", "delta_gamma", "dt"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.k < 1:
            raise ValueError("Hoelder exponent 1/k needs k >= 1")

    @property
    def exponent(self) -> float:
        return 1.0 if self.modulus == "lipschitz" else 1.0 / self.k

    def omega(self, delta: float) -> float:
        return self.constant * max(delta, 0.0) ** self.exponent


@dataclass(frozen=True)
class TwoDtBound:
    bound: float
    certified: bool
    eps: float
    min_margin: float
    warning: str = ""


# --------------------------------------------------------------------------
# small vectorized helpers

def _orient(tri: np.ndarray) -> np.ndarray:
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _diameters(tri: np.ndarray) -> np.ndarray:
    d = tri[..., [0, 1, 2], :] - tri[..., [1, 2, 0], :]
    return np.sqrt((d * d).sum(-1)).max(-1)


def _ori(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _diam(a, b, c) -> float:
    return max(math.dist(a, b), math.dist(b, c), math.dist(c, a))


def _vertex_normal(ring: np.ndarray, i: int) -> np.ndarray:
    """A unit outer normal at ring vertex ``i`` (bisector of the adjacent edge normals)."""
    m = len(ring)
    if m == 1:
        return np.array([1.0, 0.0])
    if m == 2:
        d = ring[i] - ring[1 - i]
        return d / np.linalg.norm(d)
    e_in = ring[i] - ring[i - 1]
    e_out = ring[(i + 1) % m] - ring[i]
    n = np.array([e_in[1], -e_in[0]]) / np.linalg.norm(e_in)
    n = n + np.array([e_out[1], -e_out[0]]) / np.linalg.norm(e_out)
    return n / np.linalg.norm(n)


# --------------------------------------------------------------------------
# triangulation

def _zipper(I: np.ndarray, O: np.ndarray, a0: int, b0: int, tol: float, greedy: bool):
    """Triangles between an inner ring I and an outer ring O (both CCW).

    Each step adds ``(I_a, O_b, I_{a+1})`` or ``(I_a, O_b, O_{b+1})``.  Any
    closed sequence of positively oriented steps tiles the annulus, so only
    orientation is checked.  ``greedy`` picks the smaller-diameter valid move;
    otherwise moves follow the edge-normal angle order.  Returns local index
    triples ``(ring, index)`` or None if the walk gets stuck.
    """
    m, n = len(I), len(O)
    inner_moves = m if m > 1 else 0
    if not greedy:
        # angular merge: next edge by outer-normal angle relative to the start normal
        theta0 = math.atan2(*_vertex_normal(I, a0)[::-1])

        def rel_angles(ring, start, count):
            out = []
            for k in range(count):
                p, q = ring[(start + k) % len(ring)], ring[(start + k + 1) % len(ring)]
                ang = math.atan2(-(q[0] - p[0]), q[1] - p[1])
                out.append((ang - theta0) % (2 * math.pi))
            return np.maximum.accumulate(np.array(out)) if out else np.array([])

        alpha = rel_angles(I, a0, inner_moves)
        beta = rel_angles(O, b0, n)
    tris = []
    ca = cb = 0
    while ca < inner_moves or cb < n:
        a, b = (a0 + ca) % m, (b0 + cb) % n
        cand = []
        if ca < inner_moves:
            t = (("I", a), ("O", b), ("I", (a + 1) % m))
            if _ori(I[a], O[b], I[(a + 1) % m]) > tol:
                cand.append((_diam(I[a], O[b], I[(a + 1) % m]), 0, t))
        if cb < n:
            t = (("I", a), ("O", b), ("O", (b + 1) % n))
            if _ori(I[a], O[b], O[(b + 1) % n]) > tol:
                cand.append((_diam(I[a], O[b], O[(b + 1) % n]), 1, t))
        if not cand:
            return None
        if greedy:
            _, move, t = min(cand)
        else:
            want = 0 if cb >= n or (ca < inner_moves and alpha[ca] <= beta[cb]) else 1
            match = [c for c in cand if c[1] == want]
            if not match:
                return None
            _, move, t = match[0]
        tris.append(t)
        if move == 0:
            ca += 1
        else:
            cb += 1
    return tris


def _check_nesting(inner: Polytope, outer: Polytope, i: int, probe: np.ndarray, scale: float):
    dirs = probe
    if outer.n_vertices >= 3:
        dirs = np.vstack([probe, edge_halfspaces(outer)[0]])
    if inner.n_vertices >= 3:
        dirs = np.vstack([dirs, edge_halfspaces(inner)[0]])
    gap = support_values(outer, dirs) - support_values(inner, dirs)
    if gap.min() < -NEST_TOL * scale:
        raise StructuralError(
            f"fronts {i} and {i + 1} are not nested (support drop {-gap.min():.3g}); "
            "reduce the step size h or refine the direction grid")
    if gap.max() <= 1e-12 * scale:
        raise StructuralError(
            f"band {i} is empty: fronts {i} and {i + 1} coincide, so the reachable sets "
            "do not expand strictly")


def assign_boundary_times(fronts: list[Polytope], level_times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack front vertices with values ``t_i``; returns ``(vertices, values, offsets)``."""
    level_times = np.asarray(level_times, dtype=float)
    scale = max(1.0, max(float(np.abs(f.vertices).max()) for f in fronts))
    for i in range(len(fronts) - 1):
        a, b = fronts[i].vertices, fronts[i + 1].vertices
        d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
        if d.min() <= 1e-12 * scale:
            raise StructuralError(
                f"a vertex lies on fronts {i} and {i + 1}; expansion is not strict")
    verts = np.vstack([f.vertices for f in fronts])
    values = np.concatenate([np.full(f.n_vertices, t) for f, t in zip(fronts, level_times)])
    offsets = np.cumsum([0] + [f.n_vertices for f in fronts])
    return verts, values, offsets


def triangulate(run, probe_directions: Optional[np.ndarray] = None, greedy: bool = True) -> TimeSurface:
    """Triangulate every band between consecutive fronts of a planar reach run.

    Accepts a :class:`~reachtime.reach.ReachRun` or a ``(fronts, times)`` pair.
    """
    if isinstance(run, tuple):
        fronts, times = list(run[0]), np.asarray(run[1], dtype=float)
        probe = probe_directions
    else:
        fronts = [f.polytope for f in run.fronts]
        times = np.array([f.time for f in run.fronts])
        probe = run.directions.directions if probe_directions is None else probe_directions
    if fronts[0].dim != 2:
        raise StructuralError(f"a time surface needs planar fronts, got dimension {fronts[0].dim}")
    if probe is None:
        ang = 2 * np.pi * np.arange(256) / 256
        probe = np.column_stack([np.cos(ang), np.sin(ang)])
    for i, f in enumerate(fronts[1:], start=1):
        if f.n_vertices < 3 or f.area() <= AREA_TOL:
            raise StructuralError(
                f"front {i} is lower-dimensional (area {f.area():.3g}); the planar surface is undefined")
    scale = max(1.0, max(f.diameter() for f in fronts))
    for i in range(len(fronts) - 1):
        _check_nesting(fronts[i], fronts[i + 1], i, probe, scale)
    verts, values, offsets = assign_boundary_times(fronts, times)

    tol = AREA_TOL * scale * scale
    tris, bands, fallback = [], [], []
    for i in range(len(fronts) - 1):
        I, O = fronts[i].vertices, fronts[i + 1].vertices
        a0 = 0
        b0 = int(np.argmax(O @ _vertex_normal(I, a0)))
        local = _zipper(I, O, a0, b0, tol, greedy) if greedy else None
        if local is None:
            local = _zipper(I, O, a0, b0, tol, greedy=False)
            if greedy:
                fallback.append(i)
        if local is None:
            raise StructuralError(
                f"band {i}: could not triangulate between fronts {i} and {i + 1}; "
                "fronts touch or are not strictly nested")
        base = {"I": offsets[i], "O": offsets[i + 1]}
        tris.extend([[base[r] + j for r, j in t] for t in local])
        bands.extend([i] * len(local))
    triangles = np.array(tris, dtype=int)
    band = np.array(bands, dtype=int)
    pts = verts[triangles]
    for i in range(len(fronts) - 1):
        got = 0.5 * _orient(pts[band == i]).sum()
        want = fronts[i + 1].area() - fronts[i].area()
        if abs(got - want) > 1e-6 * max(want, tol):
            raise StructuralError(
                f"band {i}: triangle areas sum to {got:.6g}, expected {want:.6g}")
    return TimeSurface(verts, values, triangles, band, fronts, times, offsets,
                       float(_diameters(pts).max()), fallback)


# --------------------------------------------------------------------------
# evaluation

def _level_of(surface: TimeSurface, X: np.ndarray):
    """Smallest level containing each point (-1 outside) and an on-boundary flag."""
    scale = max(1.0, float(np.abs(surface.vertices).max()))
    tol = 1e-12 * scale
    level = np.full(len(X), -1)
    on_bd = np.zeros(len(X), dtype=bool)
    todo = np.ones(len(X), dtype=bool)
    for i, f in enumerate(surface.fronts):
        if not todo.any():
            break
        idx = np.flatnonzero(todo)
        x = X[idx]
        if f.n_vertices >= 3 and f.area() > AREA_TOL:
            n, b = edge_halfspaces(f)
            slack = (x @ n.T - b).max(axis=1)
            inside = slack <= tol
            bd = slack >= -tol
        else:
            inside = point_distance(x, f) <= tol
            bd = inside
        hit = idx[inside]
        level[hit] = i
        on_bd[hit] = bd[inside]
        todo[hit] = False
    return level, on_bd


def evaluate_many(surface: TimeSurface, X) -> np.ndarray:
    """Vectorized :func:`evaluate`; points outside the domain give NaN."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.full(len(X), np.nan)
    level, on_bd = _level_of(surface, X)
    times = surface.level_times
    snap = (level >= 0) & (on_bd | (level == 0))
    out[snap] = times[level[snap]]
    pts = surface.triangle_points()
    for i in np.unique(level[(level > 0) & ~snap]):
        tk = np.flatnonzero(surface.band == i - 1)
        all_sel = np.flatnonzero((level == i) & ~snap)
        chunk = max(1, 1_000_000 // len(tk))
        for s in range(0, len(all_sel), chunk):
            sel = all_sel[s:s + chunk]
            lam = _barycentric(pts[tk], X[sel])            # (n_pts, n_tri, 3)
            best = lam.min(axis=2).argmax(axis=1)
            lb = lam[np.arange(len(sel)), best]
            ok = lb.min(axis=1) >= -BARY_TOL
            lb = np.maximum(lb, 0.0)
            lb /= lb.sum(axis=1, keepdims=True)
            vals = (lb * surface.values[surface.triangles[tk[best]]]).sum(axis=1)
            out[sel[ok]] = vals[ok]
    return out


def _barycentric(tri: np.ndarray, X: np.ndarray) -> np.ndarray:
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    det = _orient(tri)
    x = X[:, None, :]
    l1 = ((b[None, :, 0] - x[..., 0]) * (c[None, :, 1] - x[..., 1])
          - (b[None, :, 1] - x[..., 1]) * (c[None, :, 0] - x[..., 0])) / det
    l2 = ((c[None, :, 0] - x[..., 0]) * (a[None, :, 1] - x[..., 1])
          - (c[None, :, 1] - x[..., 1]) * (a[None, :, 0] - x[..., 0])) / det
    return np.stack([l1, l2, 1.0 - l1 - l2], axis=-1)


def evaluate(surface: TimeSurface, x) -> Optional[float]:
    """``T_hΔ(x)``, or ``None`` (not in domain) outside the last front."""
    v = evaluate_many(surface, np.asarray(x, dtype=float).reshape(1, 2))[0]
    return NOT_IN_DOMAIN if np.isnan(v) else float(v)


# --------------------------------------------------------------------------
# error estimates

def error_bound_general(budget: ErrorBudget) -> float:
    """``ω(Δ_Γ) + ω(C h^p)``."""
    return budget.omega(budget.delta_gamma) + budget.omega(budget.C * budget.h ** budget.p)


def error_bound_two_dt(run, eps: Optional[float] = None, c_hp: Optional[float] = None) -> TwoDtBound:
    """``2 Δt`` together with a check of ``R_i + (ε/3) B ⊂ int R_{i+1}`` on the fronts.

    ``eps`` is the expansion margin of the exact sets; when omitted the smallest
    observed support increment between fronts is used.  If ``c_hp`` (an estimate
    of ``C h^p``) is given, ``c_hp < ε/3`` is checked as well.
    """
    if isinstance(run, tuple):
        fronts, times, probe = list(run[0]), np.asarray(run[1], dtype=float), run[2]
    else:
        fronts = [f.polytope for f in run.fronts]
        times = np.array([f.time for f in run.fronts])
        probe = run.directions.directions
    dt = float(times[1] - times[0])
    gaps = []
    for i in range(len(fronts) - 1):
        dirs = probe
        if fronts[i + 1].dim == 2 and fronts[i + 1].n_vertices >= 3:
            dirs = np.vstack([probe, edge_halfspaces(fronts[i + 1])[0]])
        gaps.append((support_values(fronts[i + 1], dirs) - support_values(fronts[i], dirs)).min())
    min_gap = float(min(gaps))
    eps_used = min_gap if eps is None else float(eps)
    margin = min_gap - eps_used / 3.0
    ok = margin > 0 and eps_used > 0
    msgs = []
    if not ok:
        msgs.append(f"inclusion with margin eps/3={eps_used / 3:.3g} fails (smallest expansion {min_gap:.3g})")
    if c_hp is not None and not c_hp < eps_used / 3.0:
        ok = False
        msgs.append(f"C h^p = {c_hp:.3g} is not below eps/3 = {eps_used / 3:.3g}")
    return TwoDtBound(2.0 * dt, ok, eps_used, margin, "; ".join(msgs) + (" (bound not certified)" if msgs else ""))


def sup_error_vs_oracle(surface: TimeSurface, oracle: Callable, samples) -> float:
    """``max |oracle(x) - T_hΔ(x)|`` over the samples inside the domain."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    T = evaluate_many(surface, X)
    keep = ~np.isnan(T)
    if not keep.any():
        return 0.0
    ref = np.array([oracle(x) for x in X[keep]], dtype=float)
    return float(np.abs(ref - T[keep]).max())


def fit_hoelder(oracle: Callable, samples, k: int = 2, max_points: int = 600, seed: int = 0) -> float:
    """Estimate ``H`` in ``|T(x) - T(y)| <= H |x - y|^(1/k)`` from sample pairs (an estimate, not a bound)."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(X) > max_points:
        X = X[np.random.default_rng(seed).choice(len(X), max_points, replace=False)]
    T = np.array([oracle(x) for x in X], dtype=float)
    d = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
    dT = np.abs(T[:, None] - T[None])
    mask = d > 1e-12
    return float((dT[mask] / d[mask] ** (1.0 / k)).max()) if mask.any() else 0.0


def domain_samples(surface: TimeSurface, n: int, seed: int = 0) -> np.ndarray:
    """Scrambled-Sobol points of the bounding box that fall inside the last front."""
    from scipy.stats import qmc

    f = surface.fronts[-1]
    lo, hi = f.vertices.min(axis=0), f.vertices.max(axis=0)
    eng = qmc.Sobol(2, scramble=True, seed=seed)
    out = np.empty((0, 2))
    while len(out) < n:
        X = qmc.scale(eng.random(1 << max(6, int(math.ceil(math.log2(2 * n))))), lo, hi)
        n_, b = edge_halfspaces(f)
        X = X[(X @ n_.T - b).max(axis=1) <= 0]
        out = np.vstack([out, X])
    return out[:n]


def interval_time_function(fronts: list[Polytope], level_times) -> Callable:
    """Piecewise-linear time function for nested intervals on the line.

    The planar surface does not exist in one dimension; here ``t_i`` sits at
    both endpoints of front ``i`` and values in between are interpolated.
    """
    lo = np.array([float(f.vertices.min()) for f in fronts])
    hi = np.array([float(f.vertices.max()) for f in fronts])
    t = np.asarray(level_times, dtype=float)
    if np.any(np.diff(lo) >= 0) or np.any(np.diff(hi) <= 0):
        raise StructuralError("interval fronts do not expand strictly")
    knots = np.concatenate([lo[::-1], hi])
    vals = np.concatenate([t[::-1], t])
    if lo[0] == hi[0]:
        knots, vals = np.delete(knots, len(t)), np.delete(vals, len(t))

    def T(x):
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        out = np.interp(x, knots, vals)
        return np.where((x < lo[-1]) | (x > hi[-1]), np.nan, out)

    return T
