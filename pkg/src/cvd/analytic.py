"""Closed-form quantities of the total-number purification protocol.

Everything here is a pure function of ``(j, m, squeezing, loss)``.
Probabilities are assembled in log space and exponentiated at the end,
since ``(1 - lam^2)^m lam^(2j)`` underflows long before the sum over ``j``
has converged.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ZeroSqueezing
from .params import LossParams, SqueezeSpec, check_lambda

#: ``f_j^(m)`` is kept as an exact integer while ``j + m`` stays below this.
EXACT_LIMIT = 64

#: default threshold standing in for "much smaller than one"
SMALL = 0.01


def _lam(s) -> float:
    lam = s.lam if isinstance(s, SqueezeSpec) else float(s)
    check_lambda(lam)
    return lam


def _spec(s) -> SqueezeSpec:
    return s if isinstance(s, SqueezeSpec) else SqueezeSpec.from_lambda(float(s))


def multiset_coeff(j: int, m: int) -> int:
    """Number of ways to place ``j`` photons in ``m`` modes, ``C(j+m-1, j)``."""
    if j < 0 or m < 1:
        raise ValueError(f"need j >= 0 and m >= 1, got j={j}, m={m}")
    return math.comb(j + m - 1, j)


def ln_multiset_coeff(j: int, m: int) -> float:
    if j < 0 or m < 1:
        raise ValueError(f"need j >= 0 and m >= 1, got j={j}, m={m}")
    if j + m <= EXACT_LIMIT:
        return math.log(math.comb(j + m - 1, j))
    return math.lgamma(j + m) - math.lgamma(j + 1) - math.lgamma(m)


def log2_multiset_coeff(j: int, m: int) -> float:
    return ln_multiset_coeff(j, m) / math.log(2.0)


def log_outcome_prob(j: int, m: int, s) -> float:
    """Natural log of ``p_j``; ``-inf`` where the probability vanishes."""
    lam = _lam(s)
    if lam == 0.0:
        return 0.0 if j == 0 else -math.inf
    return (m * math.log1p(-lam * lam) + 2 * j * math.log(lam)
            + ln_multiset_coeff(j, m))


def outcome_prob(j: int, m: int, s) -> float:
    """Probability that the total number on one side of ``m`` pairs equals ``j``."""
    return math.exp(log_outcome_prob(j, m, s))


def pure_entanglement(s, base: float = 2.0) -> float:
    """Entropy of entanglement of one two-mode squeezed pair.

    Evaluated as ``c log c - n log n`` with ``c = cosh^2 r = 1/(1-lam^2)`` and
    ``n = sinh^2 r``.
    """
    lam = _lam(s)
    if lam == 0.0:
        return 0.0
    c = 1.0 / (1.0 - lam * lam)
    n = lam * lam * c
    return (c * math.log(c) - n * math.log(n)) / math.log(base)


def gain_ratio(j: int, m: int, s) -> float:
    """Entanglement of the outcome state over that of a single input pair."""
    e_pair = pure_entanglement(s)
    if e_pair == 0.0:
        raise ZeroSqueezing("gain ratio is undefined at zero squeezing")
    return log2_multiset_coeff(j, m) / e_pair


def lossy_outcome_prob(j: int, m: int, s, loss: LossParams) -> float:
    """``p_j`` reduced by the no-jump survival factor ``exp(-(eta_a+eta_b) tau j)``."""
    lp = log_outcome_prob(j, m, s)
    return math.exp(lp - (loss.eta_a + loss.eta_b) * loss.tau * j)


def double_jump_bound(m: int, s, loss: LossParams) -> float:
    """Scale ``m^2 n_bar^2 eta_a eta_b tau^2`` of the two-sided jump probability."""
    n_bar = _spec(s).n_bar
    return m * m * n_bar * n_bar * loss.eta_a * loss.eta_b * loss.tau ** 2


def small_noise_valid(m: int, s, loss: LossParams, threshold: float = SMALL) -> bool:
    return double_jump_bound(m, s, loss) < threshold


def asymmetric_bound(s, eta_a: float, tau: float) -> float:
    """Upper bound ``n_bar eta_a tau`` for equal nonzero jump counts on both sides.

    Independent of the far-side rate by construction.
    """
    return _spec(s).n_bar * eta_a * tau


def asymmetric_valid(s, eta_a: float, tau: float, threshold: float = SMALL) -> bool:
    return asymmetric_bound(s, eta_a, tau) < threshold


def significant_j_max(m: int, s, tol: float = 1e-16) -> int:
    """Smallest ``j_max`` whose neglected tail is below ``tol``."""
    from .fock import choose_j_max  # local: fock depends on this module

    return choose_j_max(_lam(s), m, tol)


@dataclass
class YieldTable:
    rows: list  # (m, expected outcome entanglement per pair in bits)
    limit: float  # entanglement of one input pair, the m -> infinity value


def asymptotic_yield(m_list, s, tol: float = 1e-15) -> YieldTable:
    """Expected ``log2 f_j`` per pair after one measurement, for each ``m``."""
    rows = []
    for m in m_list:
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        j_top = significant_j_max(m, s, tol)
        total = math.fsum(outcome_prob(j, m, s) * log2_multiset_coeff(j, m)
                          for j in range(j_top + 1))
        rows.append((m, total / m))
    return YieldTable(rows=rows, limit=pure_entanglement(s))


def ghz_dimension(j: int) -> int:
    """Local dimension of the GHZ-like state heralded by outcome ``j``."""
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    return j + 1


def _finite(x):
    return x if math.isfinite(x) else None


REPORT_COLUMNS = ("j", "f_j", "p_j", "E_out_bits", "gamma_j", "p_prime_j")


@dataclass
class ReportRow:
    j: int
    f_j: int
    p_j: float
    E_out_bits: float
    gamma_j: float
    p_prime_j: float


@dataclass
class AnalyticReport:
    m: int
    squeeze: SqueezeSpec
    loss: LossParams
    E_pair_bits: float
    rows: list = field(default_factory=list)
    tail: float = 0.0
    log_base: float = 2.0

    @property
    def entropy_column(self) -> str:
        return "E_out_bits" if self.log_base == 2.0 else "E_out_nats"

    def total_probability(self) -> float:
        return math.fsum(r.p_j for r in self.rows) + self.tail

    def to_csv(self, meta: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (meta or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "f_j", "p_j", self.entropy_column, "gamma_j", "p_prime_j"])
        for r in self.rows:
            w.writerow([r.j, r.f_j, repr(r.p_j), repr(r.E_out_bits),
                        repr(r.gamma_j), repr(r.p_prime_j)])
        return buf.getvalue()

    def to_dict(self, meta: dict | None = None) -> dict:
        out = {
            "m": self.m,
            "r": self.squeeze.r,
            "lambda": self.squeeze.lam,
            "n_bar": self.squeeze.n_bar,
            "loss": asdict(self.loss),
            "E_pair": self.E_pair_bits,
            "log_base": self.log_base,
            "tail": self.tail,
            "rows": [dict(zip(REPORT_COLUMNS, (r.j, str(r.f_j), r.p_j, r.E_out_bits,
                                                 _finite(r.gamma_j), r.p_prime_j)))
                     for r in self.rows],
        }
        if meta:
            out["meta"] = meta
        return out

    def to_json(self, meta: dict | None = None) -> str:
        return json.dumps(self.to_dict(meta), indent=2, sort_keys=True)


def analytic_report(m: int, s, loss: LossParams | None = None, j_max: int | None = None,
                    tail_tol: float = 1e-12, log_base: float = 2.0) -> AnalyticReport:
    """Per-``j`` table of ``f_j``, ``p_j``, outcome entanglement, gain and ``p'_j``."""
    from .fock import tail_mass

    spec = _spec(s)
    loss = loss or LossParams()
    if j_max is None:
        j_max = significant_j_max(m, spec, tail_tol)
    e_pair = pure_entanglement(spec, log_base)
    rows = []
    for j in range(j_max + 1):
        e_out = ln_multiset_coeff(j, m) / math.log(log_base)
        rows.append(ReportRow(
            j=j,
            f_j=multiset_coeff(j, m),
            p_j=outcome_prob(j, m, spec),
            E_out_bits=e_out,
            gamma_j=e_out / e_pair if e_pair > 0 else math.nan,
            p_prime_j=lossy_outcome_prob(j, m, spec, loss),
        ))
    return AnalyticReport(m=m, squeeze=spec, loss=loss, E_pair_bits=e_pair, rows=rows,
                          tail=tail_mass(spec.lam, m, j_max), log_base=log_base)
