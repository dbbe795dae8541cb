"""Photon loss during transmission and the two-sided ``j_A = j_B`` filter.

Two descriptions of the same loss are provided:

* :func:`first_order_trajectories` keeps the no-jump branch and the
  ``2m`` single-jump branches of the quantum-trajectory unraveling;
* :func:`exact_loss_channel` applies the exact amplitude-damping channel
  (transmissivity ``exp(-eta tau)``) to every mode through its Kraus
  decomposition, and serves as the reference for the first.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import analytic
from .errors import DimensionTooLarge, NoiseTooLarge
from .fock import (MAX_DENSE_DIM, DensityOperator, SparseKet, apply_annihilation,
                   apply_number_damping, make_tmss_pairs, maximal_state, project_both)
from .params import LossParams, ProtocolParams
from .purification import sector_masses
from .shots import map_shots

#: largest ``eta * tau`` accepted by the first-order expansion
FIRST_ORDER_GUARD = 0.2


@dataclass
class TrajectoryTerm:
    jumps: tuple  # ((side, mode), ...); empty for the no-jump branch
    weight: float
    state: SparseKet  # normalized, or the zero ket when the branch is empty


def first_order_trajectories(ket0: SparseKet, loss: LossParams,
                             guard: float = FIRST_ORDER_GUARD) -> list:
    """No-jump branch plus one branch per (side, mode) single jump.

    The no-jump weight is the squared norm of the damped state. Jump
    branches apply the lowering operator to the damped state and carry
    weight ``eta tau ||a damped||^2``; placing the jump before or after the
    damping only changes terms of second order.
    """
    if loss.x_a > guard or loss.x_b > guard:
        raise NoiseTooLarge(
            f"eta*tau = ({loss.x_a:.3g}, {loss.x_b:.3g}) exceeds the first-order guard {guard}")
    if loss.tau == 0 or (loss.eta_a == 0 and loss.eta_b == 0):
        return [TrajectoryTerm((), ket0.norm_sq, ket0)]
    damped = apply_number_damping(ket0, loss.x_a / 2, loss.x_b / 2)
    out = [TrajectoryTerm((), damped.norm_sq, damped.normalize())]
    for side, x in (("A", loss.x_a), ("B", loss.x_b)):
        for i in range(ket0.m):
            jumped = apply_annihilation(damped, side, i)
            out.append(TrajectoryTerm(((side, i),), x * jumped.norm_sq, jumped.normalize()))
    return out


def _loss_vectors(row: tuple, total: int | None):
    """Per-mode loss counts ``0 <= k_i <= row_i``, restricted to ``sum k = total`` if given."""
    if total is None:
        yield from itertools.product(*(range(n + 1) for n in row))
        return
    if total < 0 or total > sum(row):
        return
    if len(row) == 1:
        yield (total,)
        return
    rest = sum(row[1:])
    for k0 in range(max(0, total - rest), min(row[0], total) + 1):
        for tail in _loss_vectors(row[1:], total - k0):
            yield (k0,) + tail


@lru_cache(maxsize=200_000)
def _kraus_branches(row: tuple, log_t: float, log_1mt: float, total: int | None):
    """Loss vectors ``k <= row`` (summing to ``total`` if given) with Kraus weights.

    The weight for one mode holding ``n`` photons and losing ``k`` is
    ``sqrt(C(n, k) t^(n-k) (1-t)^k)``.
    """
    out = []
    for k in _loss_vectors(row, total):
        log_c = 0.0
        for n, kk in zip(row, k):
            if kk and log_1mt == -math.inf:
                break
            if n - kk and log_t == -math.inf:
                break
            log_c += math.log(math.comb(n, kk))
            log_c += (n - kk) * log_t if n - kk else 0.0
            log_c += kk * log_1mt if kk else 0.0
        else:
            out.append((k, tuple(n - kk for n, kk in zip(row, k)), math.exp(0.5 * log_c)))
    return tuple(out)


def _logs(x: float):
    # log t and log(1 - t) for t = exp(-x)
    return -x, (math.log(-math.expm1(-x)) if x > 0 else -math.inf)


def exact_loss_channel(ket0: SparseKet, loss: LossParams, sector: int | None = None,
                       max_dim: int = MAX_DENSE_DIM) -> DensityOperator:
    """Exact output of per-mode amplitude damping applied to ``ket0``.

    The output is ``Phi Phi^dagger`` where column ``(k_A, k_B)`` of ``Phi`` is
    the branch in which the modes lost ``k_A``, ``k_B`` photons. With
    ``sector=j`` only the block surviving ``P_A^(j) P_B^(j)`` is built
    (unnormalized, trace equal to the kept probability), which keeps the
    basis small for large inputs.
    """
    lt_a, l1_a = _logs(loss.x_a)
    lt_b, l1_b = _logs(loss.x_b)
    out_index, env_index = {}, {}
    rows, cols, vals = [], [], []
    tot_a = ket0.occ_a.sum(axis=1)
    tot_b = ket0.occ_b.sum(axis=1)
    for a, b, c, na, nb in zip(ket0.occ_a.tolist(), ket0.occ_b.tolist(), ket0.amps,
                               tot_a.tolist(), tot_b.tolist()):
        if sector is not None and (na < sector or nb < sector):
            continue
        la = None if sector is None else na - sector
        lb = None if sector is None else nb - sector
        br_a = _kraus_branches(tuple(a), lt_a, l1_a, la)
        br_b = _kraus_branches(tuple(b), lt_b, l1_b, lb)
        for ka, a2, ca in br_a:
            for kb, b2, cb in br_b:
                key = (a2, b2)
                r = out_index.get(key)
                if r is None:
                    r = out_index[key] = len(out_index)
                    if r >= max_dim:
                        raise DimensionTooLarge(
                            f"exact channel output exceeds {max_dim} basis states; "
                            "pass sector= to build one filtered block")
                e = env_index.setdefault((ka, kb), len(env_index))
                rows.append(r)
                cols.append(e)
                vals.append(c * ca * cb)
    m, m_b = ket0.m, ket0.m_b
    if not out_index:
        return DensityOperator(np.zeros((0, m), np.int64), np.zeros((0, m_b), np.int64),
                               np.zeros((0, 0)))
    phi = sp.coo_matrix((np.array(vals, dtype=np.complex128), (rows, cols)),
                        shape=(len(out_index), len(env_index))).tocsr()
    rho = (phi @ phi.conj().T).toarray()
    keys = list(out_index)
    return DensityOperator([k[0] for k in keys], [k[1] for k in keys], rho)


def trace_deficit(rho: DensityOperator) -> float:
    return 1.0 - rho.trace


@dataclass
class FilterResult:
    kept_probability: float
    kept_state: DensityOperator | None  # normalized; None when nothing passes
    fidelity: float  # <j| kept_state |j>, nan when nothing passes


def two_sided_filter(ensemble, j: int, m: int | None = None) -> FilterResult:
    """Keep only ``j_A = j_B = j`` and compare the survivor with the maximal state.

    ``ensemble`` is a list of :class:`TrajectoryTerm` or a
    :class:`DensityOperator` (possibly already restricted to the sector).
    """
    if isinstance(ensemble, DensityOperator):
        block = ensemble.project_both(j)
        m = ensemble.occ_a.shape[1] if m is None else m
    else:
        terms = list(ensemble)
        if m is None:
            m = terms[0].state.m
        kept = [(t.weight, project_both(t.state, j)) for t in terms if not t.state.is_zero]
        kept = [(w, k) for w, k in kept if w > 0 and not k.is_zero]
        if not kept:
            return FilterResult(0.0, None, math.nan)
        occ_a = np.concatenate([k.occ_a for _, k in kept])
        occ_b = np.concatenate([k.occ_b for _, k in kept])
        basis = np.unique(np.hstack([occ_a, occ_b]), axis=0)
        block = DensityOperator(basis[:, :m], basis[:, m:],
                                np.zeros((basis.shape[0],) * 2, np.complex128))
        mat = np.zeros_like(block.matrix)
        for w, k in kept:
            v = block.vector(k)
            mat += w * np.outer(v, v.conj())
        block = DensityOperator(block.occ_a, block.occ_b, mat)
    kept_prob = block.trace
    if block.dim == 0 or kept_prob <= 0:
        return FilterResult(0.0, None, math.nan)
    state = DensityOperator(block.occ_a, block.occ_b, block.matrix / kept_prob)
    return FilterResult(kept_prob, state, state.expectation(maximal_state(j, m)))


SCAN_COLUMNS = ("tau", "kept_prob", "fidelity", "infidelity", "analytic_p_prime",
                "kept_prob_first_order")


@dataclass
class ScanResult:
    rows: list  # dicts keyed by SCAN_COLUMNS
    slope: float  # log-log slope of infidelity against tau; nan if < 2 usable points

    def to_csv(self, meta: dict | None = None) -> str:
        return _table_csv(SCAN_COLUMNS, self.rows, meta)

    def to_dict(self, meta: dict | None = None) -> dict:
        out = {"rows": self.rows, "slope": _finite(self.slope)}
        if meta:
            out["meta"] = meta
        return out


def _finite(x):
    return x if math.isfinite(x) else None


def _table_csv(columns, rows, meta) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def loglog_slope(x, y, floor: float = 1e-14) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > floor)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def infidelity_scan(params: ProtocolParams, loss_base: LossParams, tau_list, j: int) -> ScanResult:
    """Filtered-state infidelity against ``tau`` using the exact channel.

    The first-order ensemble has no two-sided jumps, so it cannot show the
    infidelity; its kept probability is reported alongside for comparison.
    """
    spec, m = params.squeeze, params.m
    ket0 = make_tmss_pairs(spec.lam, m, params.j_max, params.tail_tol)
    rows = []
    for tau in tau_list:
        loss = LossParams(loss_base.eta_a, loss_base.eta_b, float(tau))
        res = two_sided_filter(exact_loss_channel(ket0, loss, sector=j), j, m)
        damped = apply_number_damping(ket0, loss.x_a / 2, loss.x_b / 2)
        rows.append({
            "tau": float(tau),
            "kept_prob": res.kept_probability,
            "fidelity": res.fidelity,
            "infidelity": 1.0 - res.fidelity,
            "analytic_p_prime": analytic.lossy_outcome_prob(j, m, spec, loss),
            "kept_prob_first_order": project_both(damped, j).norm_sq,
        })
    slope = loglog_slope([r["tau"] for r in rows], [r["infidelity"] for r in rows])
    return ScanResult(rows=rows, slope=slope)


@dataclass
class PosteriorSummary:
    params: dict
    seed: int
    n_shots: int
    events: list  # (shot, j_a, j_b, accepted)
    per_j: list  # dicts: j, accepted, accept_rate, accept_rate_se, p_prime, kept_prob_exact, fidelity
    accept_total: float
    extra: dict = field(default_factory=dict)

    def events_csv(self, meta: dict | None = None) -> str:
        rows = [dict(zip(("shot", "j_a", "j_b", "accepted"), e)) for e in self.events]
        return _table_csv(("shot", "j_a", "j_b", "accepted"), rows, meta)

    def to_csv(self, meta: dict | None = None) -> str:
        return _table_csv(POSTERIOR_COLUMNS, self.per_j, meta)

    def to_dict(self, meta: dict | None = None) -> dict:
        out = {"params": self.params, "seed": self.seed, "n_shots": self.n_shots,
               "per_j": self.per_j, "accept_total": self.accept_total}
        if meta:
            out["meta"] = meta
        return out

    def to_json(self, meta: dict | None = None) -> str:
        return json.dumps(self.to_dict(meta), indent=2, sort_keys=True)


POSTERIOR_COLUMNS = ("j", "accepted", "accept_rate", "accept_rate_se", "p_prime",
                     "kept_prob_exact", "fidelity")


def posterior_confirmation_run(params: ProtocolParams, loss: LossParams, n_shots: int,
                               rng_seed: int, workers: int | None = None,
                               max_fidelity_j: int = 12) -> PosteriorSummary:
    """Measure A at once, let B travel, measure B, accept iff the totals agree.

    Per shot the hidden pre-loss total ``J`` is drawn from the sector masses
    of the source; each side's surviving count is then binomial in ``J``
    with that side's transmissivity (loss acts photon by photon and
    commutes with the other side's number measurement). Conditional
    fidelities come from the exact filtered state, for ``j`` up to
    ``max_fidelity_j``.
    """
    spec, m = params.squeeze, params.m
    ket0 = make_tmss_pairs(spec.lam, m, params.j_max, params.tail_tol)
    js, probs = sector_masses(ket0, "A")
    cdf = np.cumsum(probs)
    t_a, t_b = loss.transmissivity_a, loss.transmissivity_b

    def shot(rng, i):
        u = rng.random()
        big_j = int(js[min(int(np.searchsorted(cdf, u, side="right")), js.size - 1)])
        j_a = int(rng.binomial(big_j, t_a))
        j_b = int(rng.binomial(big_j, t_b))
        return (i, j_a, j_b, int(j_a == j_b))

    events = map_shots(shot, n_shots, rng_seed, workers)
    acc = np.array([e[1] for e in events if e[3]], dtype=np.int64)
    top = int(acc.max()) if acc.size else 0
    counts = np.bincount(acc, minlength=top + 1)
    per_j = []
    for j in range(top + 1):
        rate = counts[j] / n_shots
        row = {"j": j, "accepted": int(counts[j]), "accept_rate": float(rate),
               "accept_rate_se": float(math.sqrt(rate * (1 - rate) / n_shots)),
               "p_prime": analytic.lossy_outcome_prob(j, m, spec, loss),
               "kept_prob_exact": math.nan, "fidelity": math.nan}
        if j <= max_fidelity_j:
            res = two_sided_filter(exact_loss_channel(ket0, loss, sector=j), j, m)
            row["kept_prob_exact"] = res.kept_probability
            row["fidelity"] = res.fidelity
        per_j.append(row)
    return PosteriorSummary(
        params={"m": m, "r": spec.r, "lambda": spec.lam, "eta_a": loss.eta_a,
                "eta_b": loss.eta_b, "tau": loss.tau},
        seed=int(rng_seed), n_shots=n_shots, events=events, per_j=per_j,
        accept_total=float(acc.size / n_shots))
