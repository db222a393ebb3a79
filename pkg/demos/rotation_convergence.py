"""Convergence order of the fronts for the rotation system x' = Ax + u, u in [-1,1]^2.

Each scheme is run on a ladder of substep counts and compared with a fine
reference run; the experimental order should be about 1 for Euler and 2 for
the two second-order schemes.  Second-order runs need many directions, or the
polygonal approximation error hides the time-stepping error.
"""
from reachtime import catalog, reach
from reachtime.dynamics import default_direction_count

rot = catalog.get("rotation").system
ladder = [10, 20, 40, 80]

for scheme, order in (("euler", 1), ("heun", 2), ("combination", 2)):
    dirs = 256 if order == 1 else default_direction_count(1 / ladder[-1], order)
    rows = reach.self_convergence_study(rot, scheme, 1, ladder, dirs, N_reference=320)
    print(f"\n{scheme} ({dirs} directions)")
    print("    N        h       d_H      EOC")
    for r in rows:
        print(f"  {r.N:3d}  {r.h:.5f}  {r.error:.3e}  {r.eoc_label():>7}")
