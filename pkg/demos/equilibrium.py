"""Long-time behaviour: run to a steady state and compare with the mass formulas.

On a 4 x 4 box the interface energy outweighs the gain from separating, so
the state relaxes to the constant mixture.  The measured chemical potentials
match the values predicted from the conserved masses alone.
"""

from bsch.experiments import run_until_steady, spinodal_scenario
from bsch.grid import Grid

g = Grid(16, 8, 4.0, 4.0)
sc = spinodal_scenario(grid=g, dt=0.1, t_end=0.1)
sr = run_until_steady(g, sc.params, sc.stepper, sc.init.generate(g), t_max=2000.0)
rep = sr.steady

print(f"steady: {rep.converged} at t = {rep.t_detect:.1f} after {sr.steps} steps")
print(f"mu:    measured {rep.mu_inf_measured: .3e}  predicted {rep.mu_inf_formula: .3e}")
for ring, (m, f) in enumerate(zip(rep.theta_inf_measured, rep.theta_inf_formula)):
    print(f"theta ring {ring}: measured {m: .3e}  predicted {f: .3e}")
print(f"spread: mu {rep.mu_std:.1e}, theta {rep.theta_std:.1e}")
