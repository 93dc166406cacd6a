"""How conditioning degrades as the per-bit decay exposure grows.

With a fixed readout error, longer selective pulses move more population
down the ladder between bits, and the confusion matrix drifts towards
singular. Past exposure ~0.5 the determinant of C crosses zero, so the
condition number is no longer a clean monotone curve.

Run: python3 demos/02_condition_sweep.py
"""

import numpy as np

from bitpnr.mitigation import condition_sweep

xs = np.linspace(0.01, 0.6, 60)
sweep = condition_sweep(xs, eps_g=0.01, eps_e=0.03)
for x, c in sweep[::3]:
    print(f"exposure {x:.3f}   cond {c:.3e}")

steps = np.diff(sweep[:, 1])
print("first decrease at exposure", xs[1:][steps <= 0][:1])
