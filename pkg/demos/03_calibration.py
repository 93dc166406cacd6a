"""Recover per-bit readout error rates from calibration data.

A Fock-state basis is well conditioned. A coherent-state basis spanning
alpha in [0, 3] overlaps too strongly and inversion is refused.

Run: python3 demos/03_calibration.py
"""

import numpy as np

import bitpnr as bp
from bitpnr.calibration import (calibrate, coherent_basis, extract_rates,
                                recover_emission, synthesize_calibration)

truth = bp.table1_params()
rng = np.random.default_rng(11)

sets = [synthesize_calibration(truth, k, shots=20_000, rng=rng) for k in range(4)]
est, rates = calibrate(sets, truth.kappa_t, truth.kappa_t_reset)
for k, r in enumerate(rates):
    print(f"bit {k}: eps_g {r.eps_g:.4f} +- {r.sigma_g:.4f} (true {truth.eps_g[k]}), "
          f"eps_e {r.eps_e:.4f} +- {r.sigma_e:.4f} (true {truth.eps_e[k]})")

# refit the confusion matrix with the recovered rates
print("extracted bits, recovered:", round(bp.extracted_bits(bp.confusion_matrix(est)), 3))

overlap = coherent_basis(np.linspace(0, 3, 16), 16)
try:
    cal = synthesize_calibration(truth, 0, overlap=overlap)
    extract_rates(recover_emission(cal))
except bp.IllConditionedBasis as err:
    print("coherent basis rejected: cond", f"{err.cond:.2e}")
