"""Time-optimal controls for the double integrator, read off the reachable-set fronts.

For a vertex of the last front, the generating direction is used as terminal
costate.  It is pulled back through the scheme, the bang-bang control is read
from the switching function, and the trajectory is replayed forward.  The
replay ends exactly at the vertex, and the controls converge in L1 as h -> 0.
"""
import numpy as np

from reachtime import adjoint, catalog, reach

di = catalog.get("double_integrator").system
run = reach.run(di, "heun", K=4, N=20, n_directions=64, mode="global")
print("normal system:", adjoint.normality_check(di.A, di.B))

for k in adjoint.vertex_directions(run, run.K)[:6]:
    path = adjoint.reconstruct(run, run.K, int(k))
    u = path.controls[:, 0, 0]
    flips = np.flatnonzero(np.diff(np.sign(u)) != 0)
    switch = f"switch at t = {path.times[flips[0] + 1]:.3f}" if len(flips) else "no switch"
    print(f"direction {int(k):2d}: u starts {u[0]:+.0f}, {switch}, "
          f"endpoint ({path.endpoint[0]:+.4f}, {path.endpoint[1]:+.4f}), defect {path.defect:.1e}, "
          f"PMP {adjoint.maximum_condition_check(path.switching, path.controls, run.U_delta)}")

# L1 distance between controls at consecutive refinements, averaged over all directions
print("\n  N -> 2N   max L1    mean L1")
prev = None
for N in (5, 10, 20, 40):
    r = reach.run(di, "euler", 4, N, 64, mode="global")
    sigs = [adjoint.reconstruct(r, r.K, k).control_signal() for k in range(64)]
    if prev is not None:
        d = np.array([adjoint.l1_control_distance(a, b) for a, b in zip(prev, sigs)])
        print(f"  {N // 2:2d} -> {N:2d}  {d.max():.4f}  {d.mean():.5f}")
    prev = sigs
