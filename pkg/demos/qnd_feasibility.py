"""Counting photons without absorbing them.

A dispersively coupled cavity shifts the phase of a probe by an amount
proportional to the number of photons it holds.  Homodyning the reflected
probe for a time T resolves neighbouring photon numbers once T exceeds a
minimum set by the coupling, while cavity decay sets a maximum.
"""
import numpy as np

from cvd.params import SqueezeSpec
from cvd.qnd import (feasibility_window, infer_number, misidentification_rate, noise_sigma,
                     reference_cavity, sample_homodyne, sde_ensemble, signal_slope)

cav = reference_cavity()
n_bar = SqueezeSpec.from_r(1.0).n_bar
rep = feasibility_window(cav, n_bar)
print("chi/2pi = 100 kHz, gamma/2pi = 100 MHz, kappa/2pi = 4 MHz, drive 100")
print(f"shortest useful window {rep.t_min_s * 1e9:.2f} ns, "
      f"longest before decay {rep.t_max_s * 1e9:.2f} ns")
print(f"T = {cav.t_meas * 1e9:.0f} ns feasible: {rep.feasible}, "
      f"resolution {rep.delta_n:.3f} photons")

slope, sigma = signal_slope(cav), noise_sigma(cav)
print(f"\nsignal {slope:.1f} per photon, noise {sigma:.1f}")
print(f"chance of misreading a count: {misidentification_rate(cav):.4f}")

for n_tot in range(4):
    ens = sample_homodyne(cav, n_tot, 50_000, rng_seed=n_tot)
    print(f"  n = {n_tot}: mean {ens.x_t.mean() / slope:6.3f} photons, "
          f"error rate {ens.error_rate:.4f}")

# the Gaussian model against a direct integration of the cavity equations
x = sde_ensemble(cav, 2, 1, 1000, rng_seed=7)
print("\nLangevin integration, 1000 runs with 2 + 1 photons:")
print(f"  mean {x.mean() / slope:.3f} photons, std {x.std(ddof=1):.1f} (model {sigma:.1f})")
counts = np.bincount(infer_number(x, slope), minlength=7)[:7]
print(f"  inferred totals 0..6: {counts.tolist()}")

# a longer window sharpens the count but eats into the decay budget
for t_ns in (4, 8, 16, 28):
    c = reference_cavity(t_ns * 1e-9)
    print(f"T = {t_ns:2d} ns: misread {misidentification_rate(c):.4f}, "
          f"feasible {feasibility_window(c, n_bar).feasible}")
