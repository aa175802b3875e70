"""
Checking the scheme against a closed form
=========================================

With a constant kernel and pure coalescence from g_in = exp(-mu), the
density stays exponential: g(mu, t) = 4/(t+2)^2 exp(-2 mu/(t+2)).  We
compare cell averages at two resolutions.
"""

import numpy as np

from coagbreak import moment
from coagbreak.studies import analytic_compare, constant_kernel_reference_cells, relative_l1

rep = analytic_compare("constant_kernel_pure_coag", t_end=2.0, cells_per_decade=16, n=1000.0)
for level, err in zip(rep.sweep, rep.metrics["l1_error"]):
    print(f"{level:3d} cells/decade: relative L1 error {err:.3e}")
print(f"ratio {rep.metrics['l1_error'][0] / rep.metrics['l1_error'][1]:.2f} per doubling")

# %%
# The particle count follows 2/(t+2) throughout.
for t, m0, ex in zip(rep.series["t"], rep.series["M0"], rep.series["M0_exact"]):
    print(f"t={t:4.2f}  M0={m0:.6f}  exact={ex:.6f}")

# %%
# Elastic collisions change nothing but the clock: with E = 1/2 they
# reproduce pure coalescence at half the kernel.
el = analytic_compare("elastic_reduction", t_end=2.0, cells_per_decade=8, n=100.0)
print(f"\nelastic vs halved kernel, max relative distance {el.metrics['max_relative_distance']:.1e}")
print("verdicts:", {**rep.verdicts, **el.verdicts})
