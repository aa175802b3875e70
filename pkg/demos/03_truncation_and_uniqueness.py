"""
Truncation and stability
========================

Two questions about the truncated problem: do solutions settle down as the
domain [1/n, n] grows, and do nearby initial data stay nearby?
"""

import numpy as np

from coagbreak import KernelModel, SolverConfig
from coagbreak.studies import Scenario, truncation_sweep, uniqueness_experiment

sweep = truncation_sweep(Scenario(), [16, 64, 256, 1024])
for n, d in zip(sweep.series["n"], sweep.series["distance"]):
    print(f"n = {n:6g}: distance to previous truncation {d:.4f}")
print("verdicts:", sweep.verdicts)

# %%
# Perturb the initial data by 0.1% and track the weighted distance Xi(t).
# The estimate allows exponential growth at rate C; in this run Xi actually
# shrinks.
base = Scenario(kernel=KernelModel("uniqueness_class", 1.0, 0.2, 0.2), solver=SolverConfig(t_end=1.0))
uq = uniqueness_experiment(base, 1e-3)
xi = np.array(uq.metrics["xi"])
t = np.array(uq.metrics["times"])
for ti, x in zip(t[::2], xi[::2]):
    print(f"t={ti:3.1f}  Xi={x:.4e}  envelope={xi[0] * np.exp(uq.metrics['rate_C'] * ti):.3e}")
print("verdicts:", uq.verdicts)
