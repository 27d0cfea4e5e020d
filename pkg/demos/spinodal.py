"""Spinodal decomposition on a small strip, printed as a time table.

Run with ``python3 demos/spinodal.py``.  The mixture starts as small noise
about zero; within a few time units it splits into +-0.9 domains while the
energy falls and both masses stay fixed.
"""

import numpy as np

from bsch.experiments import execute, spinodal_scenario
from bsch.grid import Grid

sc = spinodal_scenario(grid=Grid(32, 16, 16.0, 8.0), dt=0.1, t_end=40.0, n_snapshots=4)
res = execute(sc)

print(f"{'t':>6} {'energy':>12} {'sep':>8} {'bulk mass':>12} {'surf mass':>12}")
for r in res.records[::40]:
    print(f"{r.t:6.1f} {r.energy:12.6f} {min(r.sep_bulk, r.sep_surf):8.4f} "
          f"{r.mass_bulk:12.2e} {r.mass_surf:12.2e}")

phi = res.state.phi
print(f"\nfinal max|phi| = {np.max(np.abs(phi)):.3f}, mass drift = {res.mass_drift:.1e}")
# a coarse picture of the final bulk field
for row in phi[::-2]:
    print("".join("#" if v > 0.3 else "." if v < -0.3 else "-" for v in row))
