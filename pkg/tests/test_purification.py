import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

import oracles
from cvd import analytic
from cvd.errors import EmptyProjection, WrongSectorError
from cvd.fock import SparseKet, apply_number_damping, make_tmss_pairs, project_total_number
from cvd.params import ProtocolParams, SqueezeSpec
from cvd.purification import (enumerate_outcomes, ghz_prepare, protocol_run, sample_outcome,
                              sector_masses, verify_maximal)

HALF = SqueezeSpec.from_lambda(0.5)


def test_enumerate_matches_closed_forms():
    recs = {r.j: r for r in enumerate_outcomes(make_tmss_pairs(0.5, 2))}
    assert recs[1].probability == pytest.approx(0.28125, abs=1e-12)
    assert recs[1].entanglement_bits == pytest.approx(1.0, abs=1e-12)
    for j, r in recs.items():
        assert r.probability == pytest.approx(analytic.outcome_prob(j, 2, 0.5), abs=1e-12)
        assert 0 <= r.probability <= 1


def test_vacuum_input_single_outcome():
    recs = enumerate_outcomes(make_tmss_pairs(0.0, 3))
    assert len(recs) == 1
    assert (recs[0].j, recs[0].probability, recs[0].entanglement_bits) == (0, 1.0, 0.0)


@given(st.sampled_from([0.3, 0.5, 0.8]), st.integers(1, 3))
def test_every_outcome_is_maximal(lam, m):
    for r in enumerate_outcomes(make_tmss_pairs(lam, m, tail_tol=1e-10)):
        assert verify_maximal(r.post_state, r.j, m) < 1e-10
        assert r.entanglement_bits == pytest.approx(analytic.log2_multiset_coeff(r.j, m),
                                                    abs=1e-9)
        assert r.entanglement_bits <= math.log2(len(r.post_state)) + 1e-12


def test_verify_maximal_negative_controls():
    ket = make_tmss_pairs(0.5, 2)
    damped = apply_number_damping(ket, 0.0, 0.0)
    skew = SparseKet(damped.occ_a, damped.occ_b,
                     damped.amps * np.exp(-0.3 * damped.occ_a[:, 0]))
    post, _ = project_total_number(skew, "A", 2)
    assert verify_maximal(post, 2, 2) > 1e-3
    vac, _ = project_total_number(ket, "A", 0)
    assert verify_maximal(vac, 0, 2) == 0.0
    post, _ = project_total_number(ket, "A", 2)
    with pytest.raises(WrongSectorError):
        verify_maximal(post, 3, 2)
    # a missing tuple is a deviation of at least 1/f
    partial = SparseKet(post.occ_a[:2], post.occ_b[:2], [1 / math.sqrt(2)] * 2)
    assert verify_maximal(partial, 2, 2) >= 1 / 3


def test_sample_outcome_deterministic():
    ket = make_tmss_pairs(0.5, 2)
    assert sample_outcome(ket, "A", 7).j == sample_outcome(ket, "A", 7).j
    assert all(sample_outcome(make_tmss_pairs(0.0, 2), "A", s).j == 0 for s in range(20))
    with pytest.raises(EmptyProjection):
        sample_outcome(SparseKet.zero(2))


def test_sampled_frequencies_within_four_se():
    ket = make_tmss_pairs(0.5, 2)
    js, probs = sector_masses(ket)
    # the sampler is inverse CDF over these masses
    for j, p in zip(js[:8], probs[:8]):
        assert p == pytest.approx(analytic.outcome_prob(int(j), 2, 0.5), abs=1e-11)
    summ = protocol_run(ProtocolParams(2, HALF), 100_000, 11)
    for row in summ.histogram[:8]:
        se = math.sqrt(row["p_analytic"] * (1 - row["p_analytic"]) / 100_000)
        assert abs(row["p_emp"] - row["p_analytic"]) < 4 * se


@pytest.mark.parametrize("lam,m", [(0.3, 1), (0.5, 2), (0.8, 3), (0.6, 4)])
def test_chi_square_goodness_of_fit(lam, m):
    summ = protocol_run(ProtocolParams(m, SqueezeSpec.from_lambda(lam)), 100_000, 5)
    obs = np.array([r["count"] for r in summ.histogram], float)
    exp = np.array([r["p_analytic"] for r in summ.histogram]) * obs.sum()
    # pool the sparse tail so every expected count is at least 5
    cut = int(np.nonzero(exp >= 5)[0].max())
    o = np.append(obs[:cut], obs[cut:].sum())
    e = np.append(exp[:cut], exp[cut:].sum())
    e *= o.sum() / e.sum()
    assert chisquare(o, e).pvalue > 0.01


def test_protocol_run_gain_fraction_and_mean():
    summ = protocol_run(ProtocolParams(2, HALF), 100_000, 1)
    assert summ.frac_gain_analytic == pytest.approx(0.15625, abs=1e-9)
    assert abs(summ.frac_gain - 0.15625) < 4 * summ.frac_gain_se
    n_bar = HALF.n_bar
    assert summ.mean_j_analytic == pytest.approx(2 * n_bar, abs=1e-9)
    assert abs(summ.mean_j - 2 * n_bar) < 4 * summ.mean_j_se


def test_protocol_run_zero_squeezing_and_serialization():
    summ = protocol_run(ProtocolParams(2, SqueezeSpec.from_r(0.0)), 500, 0)
    assert summ.histogram[0]["count"] == 500
    assert json.loads(summ.to_json({"seed": 0}))["n_shots"] == 500
    assert summ.to_csv().splitlines()[0] == "j,count,p_emp,p_analytic"


def test_protocol_run_thread_independent():
    a = protocol_run(ProtocolParams(2, HALF), 4000, 9, workers=1)
    b = protocol_run(ProtocolParams(2, HALF), 4000, 9, workers=4)
    assert a.to_csv() == b.to_csv()


def brute_ghz(lam1, lam2, j):
    amps = {}
    for n in range(j + 1):
        amps[(n, n, j - n, j - n)] = lam1 ** n * lam2 ** (j - n)
    norm = math.sqrt(sum(a * a for a in amps.values()))
    return {k: a / norm for k, a in amps.items()}


def test_ghz_equal_squeezing():
    res = ghz_prepare(HALF, HALF, 2)
    assert len(res.amps) == 3
    assert res.deviation < 1e-12
    for v in res.entropies.values():
        assert v == pytest.approx(math.log2(3), abs=1e-9)
    ref = brute_ghz(0.5, 0.5, 2)
    got = {tuple(r): a for r, a in zip(res.occ.tolist(), res.amps)}
    for k, a in ref.items():
        assert got[k] == pytest.approx(a, abs=1e-12)


def test_ghz_vacuum_and_unequal():
    res = ghz_prepare(HALF, HALF, 0)
    assert all(v == 0.0 for v in res.entropies.values())
    res = ghz_prepare(0.3, 0.6, 3)
    ref = brute_ghz(0.3, 0.6, 3)
    got = {tuple(r): a for r, a in zip(res.occ.tolist(), res.amps)}
    assert all(got[k] == pytest.approx(a, abs=1e-12) for k, a in ref.items())
    assert res.deviation > 1e-3
    # SVD oracle on the B | rest cut
    occ = res.occ
    assert res.entropies["B|A1A2C"] == pytest.approx(
        oracles.svd_entropy(occ[:, :1], occ[:, 1:], res.amps), abs=1e-9)


def test_ghz_outside_support():
    with pytest.raises(EmptyProjection):
        ghz_prepare(0.5, 0.5, 50, cutoffs=(21, 21), tail_tol=1e-6)


@given(st.floats(0.1, 0.8), st.integers(0, 4))
def test_ghz_equal_squeezing_symmetric(lam, j):
    res = ghz_prepare(lam, lam, j)
    vals = list(res.entropies.values())
    assert max(vals) - min(vals) < 1e-9
    assert vals[0] == pytest.approx(math.log2(j + 1), abs=1e-9)
