"""Reachable sets, minimum-time functions and bang-bang control reconstruction
for linear control systems with polytopic controls."""
from reachtime.convex_geometry import (
    DirectionGrid, Polytope, box, convex_hull_normalize, hausdorff_distance, point,
    support_function, supporting_point, uniform_direction_grid,
)
from reachtime.dynamics import LinearSystem, Scheme, TimeGrid, time_reverse
from reachtime.errors import GeometryError, PropagationError, StructuralError, UnsupportedError
from reachtime.reach import Front, ReachRun, run, self_convergence_study
from reachtime.mintime import TimeSurface, evaluate, evaluate_many, triangulate
from reachtime.adjoint import reconstruct

__all__ = [
    "DirectionGrid", "Polytope", "box", "convex_hull_normalize", "hausdorff_distance", "point",
    "support_function", "supporting_point", "uniform_direction_grid",
    "LinearSystem", "Scheme", "TimeGrid", "time_reverse",
    "GeometryError", "PropagationError", "StructuralError", "UnsupportedError",
    "Front", "ReachRun", "run", "self_convergence_study",
    "TimeSurface", "evaluate", "evaluate_many", "triangulate", "reconstruct",
]
