"""Minimum-time function of the double integrator x'' = u, |u| <= 1.

Steers states to the origin.  The fronts R(t_i) are computed backward in time,
triangulated into a piecewise-linear surface T_h, and compared with the closed
form switching-curve solution.
"""
import numpy as np

from reachtime import catalog, mintime, reach

ex = catalog.get("double_integrator")

# 8 coarse levels of 25 Heun substeps each, 256 directions
run = reach.run(ex.system, scheme="heun", K=8, N=25, n_directions=256)
print(f"h = {run.grid.h:.4g}, dt = {run.grid.dt:.4g}, direction density eps = {run.directions.density_eps:.3g}")
for f in run.fronts:
    print(f"  t = {f.time:5.3f}: {f.polytope.n_vertices:4d} hull vertices, area {f.polytope.area():.4f}")

surface = mintime.triangulate(run)
print(f"\n{len(surface.triangles)} triangles, largest diameter {surface.delta_gamma:.4f}")

# a few probe points: the discrete value never exceeds the exact one by more than 2 dt
probe = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.35], [-0.2, 0.3], [0.3, -0.6], [0.2, -0.1]])
print("\n      x            T_h      T_exact")
for x in probe:
    th = mintime.evaluate(surface, x)
    shown = "outside" if th is None else f"{th:8.4f}"
    print(f"  ({x[0]:5.2f}, {x[1]:5.2f})  {shown}  {ex.oracle(x):8.4f}")

# global error against the oracle, and the two a-priori bounds
X = mintime.domain_samples(surface, 1000)
sup = mintime.sup_error_vs_oracle(surface, ex.oracle, X)
H = mintime.fit_hoelder(ex.oracle, X, k=2)
c_hp = reach.set_error_vs_exact(run, ex.exact_support)
budget = mintime.ErrorBudget("hoelder", H, c_hp / run.grid.h ** 2, run.grid.h, 2, surface.delta_gamma, run.grid.dt, k=2)
two = mintime.error_bound_two_dt(run)
print(f"\nsup |T - T_h| over 1000 points : {sup:.4f}")
print(f"Hoelder-1/2 bound (fitted H={H:.3f}): {mintime.error_bound_general(budget):.4f}")
print(f"2 dt bound                      : {two.bound:.4f} (inclusion check {'passed' if two.certified else 'failed'})")
