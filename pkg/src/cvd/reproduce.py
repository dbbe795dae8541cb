"""One-shot run of the reference numbers, each with a pass flag."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import analytic
from .fock import apply_annihilation, make_tmss_pairs, project_both, schmidt_entropy
from .loss import first_order_trajectories, infidelity_scan, two_sided_filter
from .params import LossParams, ProtocolParams, SqueezeSpec
from .purification import enumerate_outcomes, ghz_prepare, verify_maximal
from .qnd import (distinguishability, feasibility_window, misidentification_rate,
                  reference_cavity, sample_homodyne, signal_slope)

CHECK_COLUMNS = ("name", "value", "reference", "tolerance", "passed")


@dataclass
class Check:
    name: str
    value: float
    reference: float
    tolerance: float  # absolute unless the name ends in _rel
    passed: bool


def _close(name, value, reference, tol, rel=False):
    err = abs(value - reference) / (abs(reference) if rel else 1.0)
    return Check(name, float(value), float(reference), tol, bool(err <= tol))


def _bound(name, value, limit, below=True):
    ok = value < limit if below else value > limit
    return Check(name, float(value), float(limit), math.nan, bool(ok))


def reference_checks(seed: int = 0) -> list:
    out = []
    r1 = SqueezeSpec.from_r(1.0)
    single = make_tmss_pairs(r1.lam, 1)
    n_mean = float(np.sum(np.abs(single.amps) ** 2 * single.occ_a[:, 0]))
    out.append(_close("mean_photons_r1", n_mean, 1.4, 0.05))
    out.append(_close("mean_photons_r1_exact", n_mean, math.sinh(1.0) ** 2, 1e-8))
    out.append(_close("pair_entanglement_r1_bits", schmidt_entropy(single),
                      analytic.pure_entanglement(r1), 1e-9))

    half = SqueezeSpec.from_lambda(0.5)
    ket = make_tmss_pairs(0.5, 2)
    recs = {r.j: r for r in enumerate_outcomes(ket)}
    err = max(abs(recs[j].probability - analytic.outcome_prob(j, 2, half)) for j in range(9))
    out.append(_close("p_j_projection_max_err", err, 0.0, 1e-9))
    out.append(_close("outcome_entropy_m2_j2_bits", recs[2].entanglement_bits,
                      math.log2(3), 1e-9))
    dev = max(verify_maximal(recs[j].post_state, j, 2) for j in range(9))
    out.append(_close("outcome_uniformity_max_dev", dev, 0.0, 1e-12))

    loss = LossParams(0.05, 0.05, 1.0)
    traj = first_order_trajectories(ket, loss)
    res = two_sided_filter(traj[:1], 2, 2)
    out.append(_close("filtered_no_jump_fidelity", res.fidelity, 1.0, 1e-10))
    jump_mass = max(project_both(apply_annihilation(ket, s, i), j).norm_sq
                    for s in "AB" for i in range(2) for j in range(7))
    out.append(_bound("filtered_single_jump_mass", jump_mass, 1e-12))
    kept = two_sided_filter(traj, 1, 2).kept_probability
    out.append(_close("p_prime_m2_j1", kept, analytic.lossy_outcome_prob(1, 2, half, loss),
                      3 * 0.05 ** 2 * kept))

    scan = infidelity_scan(ProtocolParams(2, half), LossParams(1.0, 1.0),
                           [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2], 2)
    out.append(_close("double_jump_infidelity_slope", scan.slope, 2.0, 0.2))
    one_sided = infidelity_scan(ProtocolParams(2, half), LossParams(0.0, 1.0), [0.05, 0.2], 2)
    out.append(_bound("one_sided_loss_infidelity",
                      max(abs(r["infidelity"]) for r in one_sided.rows), 1e-10))

    out.append(_close("ghz_dimension_j1", analytic.ghz_dimension(1), 2, 0))
    ghz = ghz_prepare(half, half, 2)
    out.append(_close("ghz_entropy_j2_bits", max(ghz.entropies.values()), math.log2(3), 1e-9))

    yt = analytic.asymptotic_yield(range(1, 9), half)
    ys = [y for _, y in yt.rows]
    out.append(Check("yield_increasing_m1_to_8", float(ys[-1]), yt.limit, math.nan,
                     bool(all(b > a for a, b in zip(ys, ys[1:])) and ys[-1] < yt.limit)))

    cav = reference_cavity()
    rep = feasibility_window(cav, r1.n_bar)
    t_min = cav.gamma / (64 * cav.g ** 2 * cav.chi ** 2)
    out.append(_close("t_min_s_rel", rep.t_min_s, 2.49e-9, 0.01, rel=True))
    out.append(_close("t_max_s_rel", rep.t_max_s, 2.88e-8, 0.01, rel=True))
    out.append(Check("T_8ns_feasible", 1.0 if rep.feasible else 0.0, 1.0, 0.0, rep.feasible))
    out.append(_close("delta_n_8ns", rep.delta_n, 0.558, 0.001))
    out.append(_bound("delta_n_below_one", rep.delta_n, 1.0))
    out.append(_close("delta_n_at_t_min", distinguishability(cav.with_t(t_min)), 1.0, 1e-12))
    out.append(_close("signal_slope_rel", signal_slope(cav), 1.418e4, 0.001, rel=True))

    ens = sample_homodyne(cav, 3, 20000, seed)
    p = misidentification_rate(cav)
    se = math.sqrt(p * (1 - p) / len(ens))
    out.append(_close("misidentification_rate_mc", ens.error_rate, p, 4 * se))
    return out


def checks_csv(checks, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHECK_COLUMNS)
    for c in checks:
        w.writerow([c.name, repr(c.value), repr(c.reference), repr(c.tolerance),
                    int(c.passed)])
    return buf.getvalue()


def checks_json(checks, meta: dict | None = None) -> str:
    rows = []
    for c in checks:
        d = asdict(c)
        d["tolerance"] = None if math.isnan(c.tolerance) else c.tolerance
        rows.append(d)
    out = {"checks": rows, "all_passed": all(c.passed for c in checks)}
    if meta:
        out["meta"] = meta
    return json.dumps(out, indent=2, sort_keys=True)
