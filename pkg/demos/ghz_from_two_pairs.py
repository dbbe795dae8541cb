"""Three-party entanglement from two squeezed pairs.

Measuring the combined photon number of one mode from each of two pairs
leaves the remaining modes in a GHZ-like superposition of j + 1 terms.
"""
import math

from cvd.params import SqueezeSpec
from cvd.purification import GHZ_COLUMNS, ghz_prepare

spec = SqueezeSpec.from_lambda(0.5)
for j in range(1, 5):
    res = ghz_prepare(spec, spec, j)
    ents = ", ".join(f"{k} {v:.6f}" for k, v in res.entropies.items())
    print(f"j = {j}: probability {res.probability:.4f}, {ents}  (log2 {j + 1} = "
          f"{math.log2(j + 1):.6f})")

res = ghz_prepare(spec, spec, 2)
print("\nterms for j = 2, modes " + " ".join(GHZ_COLUMNS))
for occ, a in zip(res.occ, res.amps):
    print(f"  {occ.tolist()}  amplitude {a.real:+.5f}")

# unequal squeezing tilts the weights away from uniform
res = ghz_prepare(SqueezeSpec.from_lambda(0.3), SqueezeSpec.from_lambda(0.6), 2)
print(f"\nlambda 0.3 and 0.6: deviation from uniform weights {res.deviation:.4f}")
print("entropies", {k: round(v, 4) for k, v in res.entropies.items()})
