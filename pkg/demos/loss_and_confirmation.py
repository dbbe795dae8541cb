"""What photon loss does to the concentrated state, and how a second count helps.

A single lost photon changes the total on one side only, so comparing the
counts on both sides throws those events away.  What survives are branches
where one photon is lost on each side, which makes the infidelity quadratic
in the loss rate when both sides are lossy.
"""
import numpy as np

from cvd import analytic
from cvd.fock import make_tmss_pairs
from cvd.loss import (first_order_trajectories, infidelity_scan, posterior_confirmation_run,
                      two_sided_filter)
from cvd.params import LossParams, ProtocolParams, SqueezeSpec

spec = SqueezeSpec.from_lambda(0.5)
params = ProtocolParams(2, spec)
j = 2

loss = LossParams(0.02, 0.02, 1.0)
terms = first_order_trajectories(make_tmss_pairs(spec.lam, 2), loss)
res = two_sided_filter(terms, j, 2)
print(f"eta tau = 0.02 on both sides, j = {j}")
print(f"  kept probability {res.kept_probability:.6f}, "
      f"closed form {analytic.lossy_outcome_prob(j, 2, spec, loss):.6f}")
print(f"  fidelity of the first-order branches: {res.fidelity:.12f}")

taus = np.geomspace(1e-3, 5e-2, 6)
sym = infidelity_scan(params, LossParams(1.0, 1.0), taus, j)
print("\nsymmetric loss, exact channel")
for row in sym.rows:
    print(f"  tau = {row['tau']:.4f}  infidelity = {row['infidelity']:.3e}")
print(f"  log-log slope {sym.slope:.3f}")

one = infidelity_scan(params, LossParams(0.0, 1.0), taus, j)
print(f"only B lossy: largest infidelity {max(r['infidelity'] for r in one.rows):.1e}")

# strongly asymmetric loss: the small side sets the scale
print("\neta_B = 100 eta_A")
for x_a in (1e-4, 1e-3, 2e-3):
    s = infidelity_scan(params, LossParams(x_a, 100 * x_a), [1.0], j)
    ratio = s.rows[0]["infidelity"] / analytic.asymmetric_bound(spec, x_a, 1.0)
    print(f"  eta_A tau = {x_a:.0e}: infidelity / (n_bar eta_A tau) = {ratio:.3f}")

post = posterior_confirmation_run(params, LossParams(0.05, 0.05, 1.0), 20_000, rng_seed=3)
print(f"\nMonte Carlo with a confirming count on B: accepted {post.accept_total:.4f} of shots")
for row in post.per_j[:4]:
    print(f"  j = {row['j']}: accept rate {row['accept_rate']:.4f} "
          f"(p' = {row['p_prime']:.4f}), fidelity {row['fidelity']:.6f}")
