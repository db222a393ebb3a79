"""Convex compact polytopes stored as vertex clouds, and their support-function calculus.

Every set the rest of the package touches (target, control set, reachable
fronts) is a :class:`Polytope`.  In the plane the vertices are kept in
counterclockwise hull order; in higher dimensions only the extreme points are
kept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from reachtime.errors import GeometryError

DEDUP_TOL = 1e-9
COLLINEAR_TOL = 1e-12
UNIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of finitely many points.

    Build instances with :func:`convex_hull_normalize` (or the helpers
    :meth:`from_points`, :func:`box`, :func:`point`); the raw constructor trusts
    that ``vertices`` are already normalized.
    """

    vertices: np.ndarray
    hull_order: tuple[int, ...] | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[0] == 0:
            raise GeometryError("a polytope needs a nonempty (k, dim) vertex array")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, points) -> "Polytope":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return convex_hull_normalize(pts, pts.shape[1])

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def diameter(self) -> float:
        v = self.vertices
        if len(v) == 1:
            return 0.0
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d * d).sum(-1)).max())

    def centroid(self) -> np.ndarray:
        """Vertex average (always a relative-interior point)."""
        return self.vertices.mean(axis=0)

    def area(self) -> float:
        if self.dim != 2 or self.n_vertices < 3:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def to_json(self) -> dict:
        return {"dim": self.dim, "vertices": self.vertices.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "Polytope":
        pts = np.asarray(data["vertices"], dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if "dim" in data and pts.shape[1] != int(data["dim"]):
            raise GeometryError(
                f"vertex length {pts.shape[1]} disagrees with dim={data['dim']}")
        return convex_hull_normalize(pts, pts.shape[1])

    def __repr__(self):
        return f"Polytope(dim={self.dim}, n_vertices={self.n_vertices})"


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Finite set of unit directions with a certified density bound.

    ``density_eps`` bounds the Hausdorff distance between the unit sphere and
    the grid.
    """

    directions: np.ndarray
    density_eps: float

    def __post_init__(self):
        d = np.array(self.directions, dtype=float, copy=True)
        if d.ndim != 2 or len(d) == 0:
            raise GeometryError("direction grid must be a nonempty (N, dim) array")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise GeometryError("grid directions must have unit length")
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self):
        return self.directions.shape[0]


# --------------------------------------------------------------------------
# constructors

def point(p) -> Polytope:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return Polytope(p[None, :], (0,) if p.size == 2 else None)


def box(lo, hi) -> Polytope:
    """Axis-aligned box ``[lo, hi]`` (scalars broadcast only with 1-D input)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape:
        raise GeometryError("box bounds must have the same shape")
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(len(lo), -1).T
    return convex_hull_normalize(corners, len(lo))


def uniform_direction_grid(n: int) -> DirectionGrid:
    """Planar grid ``(cos 2πk/n, sin 2πk/n)``, k = 0..n-1."""
    if n < 3:
        raise GeometryError(f"a planar direction grid needs at least 3 directions, got {n}")
    ang = 2.0 * math.pi * np.arange(n) / n
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    return DirectionGrid(dirs, 2.0 * math.sin(math.pi / (2 * n)))


def interval_direction_grid() -> DirectionGrid:
    """The full unit sphere of the real line, ``{+1, -1}``."""
    return DirectionGrid(np.array([[1.0], [-1.0]]), 0.0)


def direction_grid(dim: int, n: int) -> DirectionGrid:
    """Default grid for any dimension.

    For ``dim >= 3`` a Fibonacci-type spiral is used and ``density_eps`` is a
    probe-based estimate, not a certificate.
    """
    if dim == 1:
        return interval_direction_grid()
    if dim == 2:
        return uniform_direction_grid(n)
    if dim != 3:
        rng = np.random.default_rng(0)
        d = rng.standard_normal((n, dim))
    else:
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = math.pi * (1.0 + 5 ** 0.5) * k
        r = np.sqrt(1.0 - z * z)
        d = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    probe = np.random.default_rng(1).standard_normal((20000, dim))
    probe /= np.linalg.norm(probe, axis=1, keepdims=True)
    chord = np.sqrt(np.maximum(2.0 - 2.0 * (probe @ d.T).max(axis=1), 0.0))
    return DirectionGrid(d, float(chord.max()))


# --------------------------------------------------------------------------
# normalization

def _chain(pts: list, tol: float) -> list:
    """One monotone chain keeping strict left turns only.

    A middle point within ``tol`` (max-norm) of a neighbour is a duplicate and is popped.
    """
    out: list = []
    for bx, by in pts:
        while len(out) >= 2:
            (ox, oy), (ax, ay) = out[-2], out[-1]
            ux, uy, vx, vy = ax - ox, ay - oy, bx - ax, by - ay
            if ((ux > tol or -ux > tol or uy > tol or -uy > tol)
                    and (vx > tol or -vx > tol or vy > tol or -vy > tol)
                    and ux * (by - oy) - uy * (bx - ox) > 0):
                break
            out.pop()
        out.append((bx, by))
    return out


def _drop_collinear(h: list) -> list:
    # near-collinear vertices lying between their neighbours go; repeat until stable
    changed = True
    while changed and len(h) > 2:
        changed = False
        n = len(h)
        keep = []
        for i in range(n):
            (ox, oy), (ax, ay), (bx, by) = h[i - 1], h[i], h[(i + 1) % n]
            ux, uy, vx, vy = ax - ox, ay - oy, bx - ax, by - ay
            c = ux * vy - uy * vx
            if abs(c) <= COLLINEAR_TOL * math.hypot(ux, uy) * math.hypot(bx - ox, by - oy) and ux * vx + uy * vy > 0:
                changed = True
            else:
                keep.append(h[i])
        h = keep if keep else h[:1]
    return h


def _hull_2d(pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = [tuple(q) for q in pts[order].tolist()]
    hull = _chain(p, tol)[:-1] + _chain(p[::-1], tol)[:-1]
    if not hull:
        hull = [p[0]]
    return np.array(_drop_collinear(hull), dtype=float)


def _drop_cyclic_duplicates(h: np.ndarray, tol: float) -> np.ndarray:
    if len(h) <= 1:
        return h
    pts = h.tolist()
    keep = [0]
    for i in range(1, len(pts)):
        q, r = pts[i], pts[keep[-1]]
        if max(abs(q[0] - r[0]), abs(q[1] - r[1])) > tol:
            keep.append(i)
    q, r = pts[keep[-1]], pts[keep[0]]
    if len(keep) > 1 and max(abs(q[0] - r[0]), abs(q[1] - r[1])) <= tol:
        keep.pop()
    return h[keep]


def _in_hull_of(p: np.ndarray, others: np.ndarray) -> bool:
    # feasibility of others^T lam = p, sum lam = 1, lam >= 0
    k = len(others)
    a_eq = np.vstack([others.T, np.ones((1, k))])
    b_eq = np.concatenate([p, [1.0]])
    res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def convex_hull_normalize(points, dim: int | None = None) -> Polytope:
    """Reduce a point cloud to the extreme points of its convex hull.

    Planar clouds go through a monotone chain with collinear elimination and
    come back counterclockwise, starting at the lexicographically smallest
    vertex.  Degenerate clouds give segments or singletons.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise GeometryError("cannot take the hull of an empty point list")
    if dim is not None and pts.shape[1] != dim:
        raise GeometryError(f"points have dimension {pts.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinates")
    dim = pts.shape[1]
    extent = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    tol = DEDUP_TOL * extent

    if extent == 0.0:
        return Polytope(pts[:1], (0,) if dim == 2 else None)
    if dim == 1:
        lo, hi = pts.min(), pts.max()
        return Polytope(np.array([[lo], [hi]]))
    if dim == 2:
        h = _drop_cyclic_duplicates(_hull_2d(pts, tol), tol)
        if len(h) == 2:
            h = h[np.lexsort((h[:, 1], h[:, 0]))]
        return Polytope(h, tuple(range(len(h))))

    # dim >= 3: dedup, then Qhull; flat or tiny clouds fall back to LP membership filtering
    uniq = [pts[0]]
    for q in pts[1:]:
        if np.min(np.max(np.abs(np.asarray(uniq) - q), axis=1)) > tol:
            uniq.append(q)
    cand = np.asarray(uniq)
    if len(cand) <= dim + 1 and np.linalg.matrix_rank(cand[1:] - cand[0], tol=tol) == len(cand) - 1:
        return Polytope(cand)    # affinely independent: every point is a vertex
    if len(cand) > dim:
        try:
            return Polytope(cand[np.sort(ConvexHull(cand).vertices)])
        except QhullError:
            pass
    keep = np.ones(len(cand), dtype=bool)
    for i in range(len(cand)):
        others = cand[keep & (np.arange(len(cand)) != i)]
        if len(others) and _in_hull_of(cand[i], others):
            keep[i] = False
    return Polytope(cand[keep])


# --------------------------------------------------------------------------
# support calculus

def scores(directions: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Inner products ``<d_k, v_j>`` as an (n_dirs, n_vertices) array.

    Written as multiply-then-sum so a single direction and a batch go through
    the same floating-point operations.
    """
    return (directions[:, None, :] * vertices[None, :, :]).sum(axis=-1)


def _lex_rank(vertices: np.ndarray) -> np.ndarray:
    # rank 0 = lexicographically largest
    order = np.lexsort(vertices.T[::-1])[::-1]
    rank = np.empty(len(vertices), dtype=int)
    rank[order] = np.arange(len(vertices))
    return rank


def argmax_vertices(vertices: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Index of the supporting vertex for every direction (exact ties → lex-max)."""
    directions = np.atleast_2d(directions)
    out = np.empty(len(directions), dtype=int)
    rank = _lex_rank(vertices)
    chunk = max(1, 2_000_000 // max(1, len(vertices)))
    for s in range(0, len(directions), chunk):
        sc = scores(directions[s:s + chunk], vertices)
        tie = sc == sc.max(axis=1, keepdims=True)
        out[s:s + chunk] = np.where(tie, rank[None, :], len(vertices)).argmin(axis=1)
    return out


def _check_direction(P: Polytope, l) -> np.ndarray:
    l = np.asarray(l, dtype=float).reshape(-1)
    if l.shape[0] != P.dim:
        raise GeometryError(f"direction of length {l.shape[0]} for a {P.dim}-d polytope")
    if abs(np.linalg.norm(l) - 1.0) > UNIT_TOL:
        raise GeometryError("support queries need a unit direction")
    return l


def support_function(P: Polytope, l) -> float:
    """``max_{x in P} <l, x>`` for a unit direction ``l``."""
    l = _check_direction(P, l)
    return float(scores(l[None, :], P.vertices).max())


def supporting_point(P: Polytope, l) -> np.ndarray:
    """A vertex attaining the support function; ties go to the lexicographically largest."""
    l = _check_direction(P, l)
    return P.vertices[argmax_vertices(P.vertices, l[None, :])[0]].copy()


def support_values(P: Polytope, directions) -> np.ndarray:
    """Batched support function; directions need not be normalized."""
    return scores(np.atleast_2d(np.asarray(directions, dtype=float)), P.vertices).max(axis=1)


def supporting_points(P: Polytope, directions) -> np.ndarray:
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    return P.vertices[argmax_vertices(P.vertices, d)]


def minkowski_sum(P: Polytope, Q: Polytope) -> Polytope:
    if P.dim != Q.dim:
        raise GeometryError(f"Minkowski sum of {P.dim}-d and {Q.dim}-d polytopes")
    cloud = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return convex_hull_normalize(cloud, P.dim)


def linear_image(M, P: Polytope) -> Polytope:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != P.dim:
        raise GeometryError(f"matrix with {M.shape[1]} columns applied to a {P.dim}-d polytope")
    return convex_hull_normalize(P.vertices @ M.T, M.shape[0])


def scale(lam: float, P: Polytope) -> Polytope:
    return linear_image(lam * np.eye(P.dim), P)


def polytope_from_directions(P: Polytope, grid: DirectionGrid) -> Polytope:
    """Inner approximation ``co{y(l, P) : l in grid}``."""
    if grid.dim != P.dim:
        raise GeometryError(f"{grid.dim}-d grid for a {P.dim}-d polytope")
    return convex_hull_normalize(supporting_points(P, grid.directions), P.dim)


# --------------------------------------------------------------------------
# distances

def edge_halfspaces(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals and offsets of the edges of a CCW polygon."""
    v = P.vertices
    e = np.roll(v, -1, axis=0) - v
    n = np.column_stack([e[:, 1], -e[:, 0]])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    return n, (n * v).sum(axis=1)


def _segment_distances(X: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points X (n,2) to segments a->b (m,2); returns (n, m)."""
    ab = b - a
    L2 = (ab * ab).sum(axis=1)
    safe = np.where(L2 > 0, L2, 1.0)
    ax = X[:, None, :] - a[None, :, :]
    t = np.clip((ax * ab[None]).sum(-1) / safe[None], 0.0, 1.0)
    t = np.where(L2[None] > 0, t, 0.0)
    d = ax - t[..., None] * ab[None]
    return np.sqrt((d * d).sum(-1))


def point_distance(X, P: Polytope) -> np.ndarray:
    """Euclidean distance from each row of X to a polytope of dimension <= 2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    v = P.vertices
    if P.dim == 1:
        return np.maximum(np.maximum(v.min() - X[:, 0], X[:, 0] - v.max()), 0.0)
    if P.dim != 2:
        raise GeometryError("exact point distance is implemented for dim <= 2")
    if len(v) == 1:
        return np.linalg.norm(X - v[0], axis=1)
    if len(v) == 2:
        return _segment_distances(X, v[:1], v[1:])[:, 0]
    out = np.empty(len(X))
    n, b = edge_halfspaces(P)
    a, bb = v, np.roll(v, -1, axis=0)
    chunk = max(1, 4_000_000 // len(v))
    for s in range(0, len(X), chunk):
        x = X[s:s + chunk]
        inside = (x @ n.T - b).max(axis=1) <= 0.0
        d = _segment_distances(x, a, bb).min(axis=1)
        out[s:s + chunk] = np.where(inside, 0.0, d)
    return out


@dataclass(frozen=True)
class HausdorffBracket:
    """Rigorous enclosure ``lower <= d_H <= upper`` for dimensions >= 3."""

    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _projection_upper(x: np.ndarray, V: np.ndarray) -> float:
    # any feasible convex combination gives an upper bound on d(x, co V)
    w = 1e3 * (1.0 + float(np.abs(V).max()) + float(np.abs(x).max()))
    A = np.vstack([V.T, w * np.ones((1, len(V)))])
    lam, _ = nnls(A, np.concatenate([x, [w]]))
    s = lam.sum()
    lam = lam / s if s > 0 else np.full(len(V), 1.0 / len(V))
    return float(np.linalg.norm(x - lam @ V))


def hausdorff_distance(P: Polytope, Q: Polytope, n_probe: int = 4000):
    """Hausdorff distance; exact float for dim <= 2, :class:`HausdorffBracket` above."""
    if P.dim != Q.dim:
        raise GeometryError(f"Hausdorff distance between {P.dim}-d and {Q.dim}-d sets")
    if P.dim <= 2:
        return float(max(point_distance(P.vertices, Q).max(),
                         point_distance(Q.vertices, P).max()))
    probe = direction_grid(P.dim, n_probe).directions
    lower = float(np.abs(support_values(P, probe) - support_values(Q, probe)).max())
    upper = max(max(_projection_upper(x, Q.vertices) for x in P.vertices),
                max(_projection_upper(y, P.vertices) for y in Q.vertices))
    return HausdorffBracket(lower, max(upper, lower))


def contains(P: Polytope, X, tol: float = 1e-10) -> np.ndarray:
    """Membership test for points of a polytope of dimension <= 2."""
    return point_distance(X, P) <= tol * (1.0 + P.diameter())


def vertex_set_equal(P: Polytope, Q: Polytope, tol: float = 1e-12) -> bool:
    if P.dim != Q.dim or P.n_vertices != Q.n_vertices:
        return False
    a = P.vertices[np.lexsort(P.vertices.T[::-1])]
    b = Q.vertices[np.lexsort(Q.vertices.T[::-1])]
    return bool(np.max(np.abs(a - b)) <= tol)


def as_polytope(obj) -> Polytope:
    if isinstance(obj, Polytope):
        return obj
    if isinstance(obj, dict):
        return Polytope.from_json(obj)
    return Polytope.from_points(obj)


__all__: Sequence[str] = [
    "Polytope", "DirectionGrid", "HausdorffBracket", "point", "box",
    "uniform_direction_grid", "interval_direction_grid", "direction_grid",
    "convex_hull_normalize", "support_function", "supporting_point",
    "support_values", "supporting_points", "argmax_vertices", "scores",
    "minkowski_sum", "linear_image", "scale", "polytope_from_directions",
    "hausdorff_distance", "point_distance", "edge_halfspaces", "contains",
    "vertex_set_equal", "as_polytope",
]
