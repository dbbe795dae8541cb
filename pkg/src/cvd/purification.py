"""Ideal total-number measurements on pure inputs.

Covers exhaustive and sampled measurement outcomes, the check that an
outcome state is maximally entangled, the three-party GHZ-like
construction and seeded Monte-Carlo protocol runs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .errors import EmptyProjection, WrongSectorError
from .fock import (SparseKet, dense_bipartite_entropy, make_tmss_pairs,
                   project_total_number, reduced_entropy_dense, schmidt_entropy)
from .params import ProtocolParams, SqueezeSpec
from .shots import as_rng, map_shots


@dataclass
class OutcomeRecord:
    j: int
    probability: float
    post_state: SparseKet
    entanglement_bits: float
    gain_ratio: float


def _entropy(ket: SparseKet) -> float:
    if ket.is_schmidt_paired():
        return schmidt_entropy(ket)
    return reduced_entropy_dense(ket)


def _pair_entanglement(ket: SparseKet) -> float:
    # per-pair entanglement of a product of identical pairs
    try:
        return schmidt_entropy(ket) / ket.m
    except ValueError:
        return math.nan


def sector_masses(ket: SparseKet, side: str = "A"):
    """Distinct totals on ``side`` and the normalized probability of each."""
    if ket.is_zero:
        return np.zeros(0, np.int64), np.zeros(0)
    totals = ket.totals(side)
    js, inv = np.unique(totals, return_inverse=True)
    mass = np.bincount(inv.reshape(-1), weights=np.abs(ket.amps) ** 2)
    return js, mass / mass.sum()


def _record(ket, side, j, pair_e) -> OutcomeRecord:
    post, prob = project_total_number(ket, side, int(j))
    e = _entropy(post)
    gain = e / pair_e if pair_e and pair_e > 0 else math.nan
    return OutcomeRecord(j=int(j), probability=prob, post_state=post,
                         entanglement_bits=e, gain_ratio=gain)


def enumerate_outcomes(ket: SparseKet, side: str = "A",
                       pair_entanglement: float | None = None) -> list:
    """One :class:`OutcomeRecord` per total number carrying nonzero weight.

    ``pair_entanglement`` normalizes the gain ratio; by default it is the
    input's entropy divided by ``m``, which is right for identical pairs.
    """
    pair_e = _pair_entanglement(ket) if pair_entanglement is None else pair_entanglement
    js, _ = sector_masses(ket, side)
    return [_record(ket, side, j, pair_e) for j in js]


def sample_outcome(ket: SparseKet, side: str = "A", rng_seed=0,
                   pair_entanglement: float | None = None) -> OutcomeRecord:
    """Draw one measurement outcome by inverse CDF over the sector masses."""
    js, probs = sector_masses(ket, side)
    if js.size == 0:
        raise EmptyProjection("cannot measure the zero ket")
    u = as_rng(rng_seed).random()
    k = min(int(np.searchsorted(np.cumsum(probs), u, side="right")), js.size - 1)
    pair_e = _pair_entanglement(ket) if pair_entanglement is None else pair_entanglement
    return _record(ket, side, js[k], pair_e)


def verify_maximal(post_state: SparseKet, j: int, m: int) -> float:
    """Largest deviation of ``|amplitude|^2`` from ``1/f_j`` over the sector.

    Tuples of the sector that are missing from ``post_state`` count as
    amplitude zero, so a wrong term count shows up as a deviation of at
    least ``1/f_j``.
    """
    if post_state.is_zero:
        raise ValueError("zero ket carries no outcome state")
    if (post_state.totals("A") != j).any() or (post_state.totals("B") != j).any():
        raise WrongSectorError(f"state has terms outside the total-number-{j} sector")
    f = analytic.multiset_coeff(j, m)
    q = np.abs(post_state.amps) ** 2
    dev = float(np.max(np.abs(q - 1.0 / f)))
    if len(post_state) != f:
        dev = max(dev, 1.0 / f)
    return dev


# -- GHZ-like states ------------------------------------------------------------

GHZ_COLUMNS = ("B", "A1", "A2", "C")


@dataclass
class GhzResult:
    occ: np.ndarray  # rows of (n_B, n_A1, n_A2, n_C)
    amps: np.ndarray
    probability: float
    entropies: dict  # bipartition label -> bits
    deviation: float  # max | |amp|^2 - 1/(j+1) |, counting missing terms as zero


def ghz_prepare(s1, s2, j: int, cutoffs=None, tail_tol: float = 1e-12) -> GhzResult:
    """Measure ``n_A1 + n_A2 = j`` on pairs ``(B, A1)`` and ``(A2, C)``.

    ``cutoffs`` optionally fixes the per-pair photon cutoffs; otherwise
    each pair is truncated at ``tail_tol``.
    """
    lam1 = s1.lam if isinstance(s1, SqueezeSpec) else float(s1)
    lam2 = s2.lam if isinstance(s2, SqueezeSpec) else float(s2)
    if cutoffs is None:
        cutoffs = (None, None)
    p1 = make_tmss_pairs(lam1, 1, cutoffs[0], tail_tol)
    p2 = make_tmss_pairs(lam2, 1, cutoffs[1], tail_tol)
    n1 = p1.occ_a[:, 0]
    n2 = p2.occ_a[:, 0]
    # product state over (n, k), kept where n + k == j
    i1, i2 = np.nonzero(n1[:, None] + n2[None, :] == j)
    if i1.size == 0:
        raise EmptyProjection(f"outcome j={j} lies outside the truncated support")
    amps = p1.amps[i1] * p2.amps[i2]
    prob = float(np.sum(np.abs(amps) ** 2))
    amps = amps / math.sqrt(prob)
    occ = np.stack([n1[i1], n1[i1], n2[i2], n2[i2]], axis=1)
    cuts = {"B|A1A2C": ([0], [1, 2, 3]), "C|BA1A2": ([3], [0, 1, 2]),
            "A1A2|BC": ([1, 2], [0, 3])}
    entropies = {name: dense_bipartite_entropy(occ[:, l], occ[:, r], amps)
                 for name, (l, r) in cuts.items()}
    q = np.abs(amps) ** 2
    dim = analytic.ghz_dimension(j)
    dev = float(np.max(np.abs(q - 1.0 / dim)))
    if amps.size != dim:
        dev = max(dev, 1.0 / dim)
    return GhzResult(occ=occ, amps=amps, probability=prob, entropies=entropies,
                     deviation=dev)


# -- Monte-Carlo runs -----------------------------------------------------------

@dataclass
class ProtocolSummary:
    params: dict
    seed: int
    n_shots: int
    histogram: list  # dicts with j, count, p_emp, p_analytic
    mean_E_bits: float
    mean_E_se: float
    frac_gain: float
    frac_gain_se: float
    frac_gain_analytic: float
    mean_j: float
    mean_j_se: float
    mean_j_analytic: float
    counts: np.ndarray = field(repr=False, default=None)

    def to_dict(self, meta: dict | None = None) -> dict:
        out = {
            "params": self.params,
            "seed": self.seed,
            "n_shots": self.n_shots,
            "histogram": self.histogram,
            "mean_E_bits": self.mean_E_bits,
            "mean_E_se": self.mean_E_se,
            "frac_gain": self.frac_gain,
            "frac_gain_se": self.frac_gain_se,
            "frac_gain_analytic": self.frac_gain_analytic,
            "mean_j": self.mean_j,
            "mean_j_se": self.mean_j_se,
            "mean_j_analytic": self.mean_j_analytic,
        }
        if meta:
            out["meta"] = meta
        return out

    def to_json(self, meta: dict | None = None) -> str:
        return json.dumps(self.to_dict(meta), indent=2, sort_keys=True)

    def to_csv(self, meta: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (meta or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "count", "p_emp", "p_analytic"])
        for row in self.histogram:
            w.writerow([row["j"], row["count"], repr(row["p_emp"]), repr(row["p_analytic"])])
        return buf.getvalue()


def protocol_run(params: ProtocolParams, n_shots: int, rng_seed: int,
                 workers: int | None = None) -> ProtocolSummary:
    """Sample ``n_shots`` ideal measurements of the A-side total number.

    Each shot uses its own generator seeded with ``rng_seed + shot``.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    spec, m = params.squeeze, params.m
    ket = make_tmss_pairs(spec.lam, m, params.j_max, params.tail_tol)
    js, probs = sector_masses(ket, "A")
    cdf = np.cumsum(probs)
    u = np.array(map_shots(lambda rng, i: rng.random(), n_shots, rng_seed, workers))
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), js.size - 1)
    sampled = js[idx]

    e_pair = analytic.pure_entanglement(spec)
    e_out = np.array([analytic.log2_multiset_coeff(int(j), m) for j in js])
    gain = e_out > e_pair
    shot_e = e_out[idx]
    shot_gain = gain[idx].astype(float)

    counts = np.bincount(sampled, minlength=int(js.max()) + 1)
    top = int(max(sampled.max(), js[probs >= 1e-12].max()))
    histogram = [{"j": j, "count": int(counts[j]) if j < counts.size else 0,
                  "p_emp": (int(counts[j]) if j < counts.size else 0) / n_shots,
                  "p_analytic": analytic.outcome_prob(j, m, spec)}
                 for j in range(top + 1)]

    def se(x):
        return float(np.std(x, ddof=1) / math.sqrt(n_shots)) if n_shots > 1 else math.nan

    return ProtocolSummary(
        params={"m": m, "r": spec.r, "lambda": spec.lam, "j_max": int(js.max()),
                "tail_tol": params.tail_tol},
        seed=int(rng_seed),
        n_shots=n_shots,
        histogram=histogram,
        mean_E_bits=float(shot_e.mean()),
        mean_E_se=se(shot_e),
        frac_gain=float(shot_gain.mean()),
        frac_gain_se=se(shot_gain),
        frac_gain_analytic=float(math.fsum(
            analytic.outcome_prob(int(j), m, spec) for j, g in zip(js, gain) if g)),
        mean_j=float(sampled.mean()),
        mean_j_se=se(sampled.astype(float)),
        mean_j_analytic=m * spec.n_bar,
        counts=counts,
    )
