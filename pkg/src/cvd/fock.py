"""Truncated Fock-space states of ``m`` entangled mode pairs.

A :class:`SparseKet` holds only the occupied basis states. Rows of
``occ_a``/``occ_b`` are occupation tuples for the A modes and B modes;
``amps`` carries the matching complex amplitudes. Every operation returns
a new ket; arrays are frozen on construction.

Truncation is by *total* photon number, since every object in the protocol
is block diagonal in total-number sectors.
"""
from __future__ import annotations

import itertools
import json
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .analytic import log_outcome_prob
from .errors import DimensionTooLarge, NotSchmidtForm, TailTooHeavy
from .params import check_lambda

PRUNE = 1e-15
MAX_DENSE_DIM = 4096
SIDES = ("A", "B")


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def compositions(j: int, m: int) -> np.ndarray:
    """All occupation tuples of ``m`` modes with total ``j``, shape ``(f_j, m)``.

    Rows come out in reverse lexicographic order (``(j,0,..)`` first).
    """
    if m == 1:
        return _frozen(np.array([[j]], dtype=np.int64))
    bars = np.array(list(itertools.combinations(range(j + m - 1), m - 1)),
                    dtype=np.int64).reshape(-1, m - 1)
    n = bars.shape[0]
    padded = np.hstack([np.full((n, 1), -1), bars, np.full((n, 1), j + m - 1)])
    return _frozen(np.diff(padded, axis=1) - 1)


class SparseKet:
    """Pure state of paired modes, stored as occupied basis rows only.

    ``normalized`` records intent, not a measurement: kernels that rescale
    (damping, annihilation) clear it, projections set it again.
    """

    __slots__ = ("occ_a", "occ_b", "amps", "normalized")

    def __init__(self, occ_a, occ_b, amps, normalized=False, prune=PRUNE):
        occ_a = np.asarray(occ_a, dtype=np.int64)
        occ_b = np.asarray(occ_b, dtype=np.int64)
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if occ_a.ndim != 2 or occ_b.ndim != 2:
            raise ValueError("occupations must be 2-d arrays (terms x modes)")
        if not (occ_a.shape[0] == occ_b.shape[0] == amps.shape[0]):
            raise ValueError("occupation rows and amplitudes differ in length")
        if (occ_a < 0).any() or (occ_b < 0).any():
            raise ValueError("negative occupation")
        if prune > 0 and amps.size:
            keep = np.abs(amps) >= prune
            if not keep.all():
                occ_a, occ_b, amps = occ_a[keep], occ_b[keep], amps[keep]
                if normalized and amps.size:
                    amps = amps / math.sqrt(_norm_sq(amps))
        if amps.size == 0:
            normalized = False
        self.occ_a = _frozen(occ_a)
        self.occ_b = _frozen(occ_b)
        self.amps = _frozen(amps)
        self.normalized = bool(normalized)

    @classmethod
    def zero(cls, m: int, m_b: int | None = None) -> "SparseKet":
        m_b = m if m_b is None else m_b
        return cls(np.zeros((0, m), np.int64), np.zeros((0, m_b), np.int64),
                   np.zeros(0, np.complex128))

    @classmethod
    def from_terms(cls, terms: dict, m: int | None = None, normalize=False) -> "SparseKet":
        """Build from ``{(occ_a, occ_b): amplitude}``."""
        if not terms:
            if m is None:
                raise ValueError("m is required for an empty term map")
            return cls.zero(m)
        keys = list(terms)
        ket = cls([k[0] for k in keys], [k[1] for k in keys],
                  [terms[k] for k in keys])
        return ket.normalize() if normalize else ket

    @property
    def m(self) -> int:
        return self.occ_a.shape[1]

    @property
    def m_b(self) -> int:
        return self.occ_b.shape[1]

    def __len__(self):
        return self.amps.shape[0]

    @property
    def is_zero(self) -> bool:
        return self.amps.size == 0

    @property
    def norm_sq(self) -> float:
        return _norm_sq(self.amps)

    @property
    def terms(self) -> dict:
        return {(tuple(a), tuple(b)): complex(c)
                for a, b, c in zip(self.occ_a.tolist(), self.occ_b.tolist(), self.amps)}

    def occ(self, side: str) -> np.ndarray:
        return self.occ_a if _side(side) == "A" else self.occ_b

    def totals(self, side: str) -> np.ndarray:
        return self.occ(side).sum(axis=1)

    def normalize(self) -> "SparseKet":
        if self.is_zero:
            return self
        return SparseKet(self.occ_a, self.occ_b, self.amps / math.sqrt(self.norm_sq),
                         normalized=True)

    def is_schmidt_paired(self) -> bool:
        """True when every A row and every B row occurs in a single term."""
        n = len(self)
        if n <= 1:
            return True
        return (np.unique(self.occ_a, axis=0).shape[0] == n
                and np.unique(self.occ_b, axis=0).shape[0] == n)

    def inner(self, other: "SparseKet") -> complex:
        """``<self|other>`` matched on identical basis rows."""
        if self.is_zero or other.is_zero:
            return 0j
        lookup = {(a.tobytes(), b.tobytes()): c
                  for a, b, c in zip(self.occ_a, self.occ_b, self.amps)}
        total = 0j
        for a, b, c in zip(other.occ_a, other.occ_b, other.amps):
            d = lookup.get((a.tobytes(), b.tobytes()))
            if d is not None:
                total += np.conj(d) * c
        return total

    def to_records(self) -> list:
        return [{"occ_a": a, "occ_b": b, "re": float(c.real), "im": float(c.imag)}
                for a, b, c in zip(self.occ_a.tolist(), self.occ_b.tolist(), self.amps)]

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text: str, m: int | None = None) -> "SparseKet":
        recs = json.loads(text)
        if not recs:
            return cls.zero(m or 1)
        return cls([r["occ_a"] for r in recs], [r["occ_b"] for r in recs],
                   [complex(r["re"], r["im"]) for r in recs])

    def __repr__(self):
        return (f"SparseKet(m={self.m}, terms={len(self)}, "
                f"norm_sq={self.norm_sq:.6g}, normalized={self.normalized})")


def _norm_sq(amps) -> float:
    return float(np.sum(amps.real ** 2 + amps.imag ** 2))


def _side(side: str) -> str:
    s = str(side).upper()
    if s not in SIDES:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return s


# -- truncation ---------------------------------------------------------------

def _log_pj(lam: float, m: int, j_top: int) -> np.ndarray:
    j = np.arange(j_top + 1)
    if lam == 0.0:
        out = np.full(j_top + 1, -np.inf)
        out[0] = 0.0
        return out
    return (m * math.log1p(-lam * lam) + 2 * j * math.log(lam)
            + gammaln(j + m) - gammaln(j + 1) - gammaln(m))


def tail_mass(lam: float, m: int, j_max: int) -> float:
    """Probability carried by total-number sectors above ``j_max``.

    Summed term by term in log space from ``j_max + 1`` until the remaining
    terms are past the distribution's mode and 40 e-folds below the sum.
    """
    check_lambda(lam)
    if lam == 0.0:
        return 0.0
    mode = (m - 1) * lam * lam / (1.0 - lam * lam)
    acc = -math.inf
    j = j_max + 1
    while True:
        lp = log_outcome_prob(j, m, lam)
        acc = np.logaddexp(acc, lp)
        if j > mode and lp < acc - 40.0:
            return math.exp(acc)
        j += 1


def choose_j_max(lam: float, m: int, tail_tol: float) -> int:
    """Smallest total-number cutoff whose discarded tail is at most ``tail_tol``."""
    check_lambda(lam)
    if lam == 0.0 or tail_tol >= 1.0:
        return 0
    mode = (m - 1) * lam * lam / (1.0 - lam * lam)
    target = math.log(tail_tol)
    j_top = max(16, int(2 * mode) + 16)
    while True:
        lp = _log_pj(lam, m, j_top)
        if j_top > mode and lp[-1] < target - 40.0:
            break
        j_top *= 2
    # log of sum_{k >= j}, then the tail beyond j is entry j+1
    suffix = np.logaddexp.accumulate(lp[::-1])[::-1]
    tails = np.append(suffix[1:], -np.inf)
    return int(np.argmax(tails <= target))


# -- state construction and kernels ------------------------------------------

def make_tmss_pairs(lam: float, m: int, j_max: int | None = None,
                    tail_tol: float = 1e-12) -> SparseKet:
    """``m`` copies of a two-mode squeezed pair, truncated at total number ``j_max``.

    With ``j_max`` omitted the cutoff is the smallest one meeting
    ``tail_tol``; an explicit ``j_max`` that discards more than ``tail_tol``
    raises :class:`TailTooHeavy`. The result is renormalized after
    truncation.
    """
    check_lambda(lam)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if j_max is None:
        j_max = choose_j_max(lam, m, tail_tol)
    else:
        tail = tail_mass(lam, m, j_max)
        if tail > tail_tol:
            raise TailTooHeavy(choose_j_max(lam, m, tail_tol), tail, tail_tol)
    if lam == 0.0:
        j_max = 0
    blocks, amps = [], []
    log_norm = 0.5 * m * math.log1p(-lam * lam)
    for j in range(j_max + 1):
        occ = compositions(j, m)
        a = math.exp(log_norm + j * math.log(lam)) if j else math.exp(log_norm)
        blocks.append(occ)
        amps.append(np.full(occ.shape[0], a))
    occ = np.concatenate(blocks)
    return SparseKet(occ, occ, np.concatenate(amps)).normalize()


def apply_annihilation(ket: SparseKet, side: str, mode: int) -> SparseKet:
    """Apply the lowering operator of one mode; the result is unnormalized."""
    s = _side(side)
    occ = ket.occ(s)
    if not 0 <= mode < occ.shape[1]:
        raise IndexError(f"mode {mode} out of range for {occ.shape[1]} modes")
    n = occ[:, mode]
    keep = n > 0
    new = occ[keep].copy()
    new[:, mode] -= 1
    amps = ket.amps[keep] * np.sqrt(n[keep])
    if s == "A":
        return SparseKet(new, ket.occ_b[keep], amps)
    return SparseKet(ket.occ_a[keep], new, amps)


def apply_number_damping(ket: SparseKet, kappa_a: float, kappa_b: float) -> SparseKet:
    """Scale each term by ``exp(-(kappa_a N_A + kappa_b N_B))``.

    With ``kappa = eta tau / 2`` this is the no-jump propagator of the loss
    master equation.
    """
    if not (kappa_a >= 0 and kappa_b >= 0 and math.isfinite(kappa_a)
            and math.isfinite(kappa_b)):
        raise ValueError("damping exponents must be finite and >= 0")
    if kappa_a == 0 and kappa_b == 0:
        return ket
    factor = np.exp(-(kappa_a * ket.occ_a.sum(axis=1) + kappa_b * ket.occ_b.sum(axis=1)))
    return SparseKet(ket.occ_a, ket.occ_b, ket.amps * factor)


def project_total_number(ket: SparseKet, side: str, j: int):
    """Project onto total number ``j`` on one side.

    Returns ``(state, probability)``; the probability is relative to the
    input's squared norm and an empty sector gives the zero ket with 0.
    """
    if ket.is_zero:
        return ket, 0.0
    keep = ket.totals(side) == j
    if not keep.any():
        return SparseKet.zero(ket.m, ket.m_b), 0.0
    kept = SparseKet(ket.occ_a[keep], ket.occ_b[keep], ket.amps[keep], prune=0)
    prob = kept.norm_sq / ket.norm_sq
    return kept.normalize(), prob


def project_both(ket: SparseKet, j: int) -> SparseKet:
    """Unnormalized ``P_A^(j) P_B^(j)`` applied to ``ket``."""
    if ket.is_zero:
        return ket
    keep = (ket.occ_a.sum(axis=1) == j) & (ket.occ_b.sum(axis=1) == j)
    return SparseKet(ket.occ_a[keep], ket.occ_b[keep], ket.amps[keep], prune=0)


def maximal_state(j: int, m: int) -> SparseKet:
    """Equal-weight superposition of all matched tuples with total ``j``."""
    occ = compositions(j, m)
    return SparseKet(occ, occ, np.full(occ.shape[0], 1.0 / math.sqrt(occ.shape[0])),
                     normalized=True)


# -- entropies ----------------------------------------------------------------

def _entropy(q: np.ndarray, base: float) -> float:
    q = q[q > 0]
    return float(-np.sum(q * np.log(q)) / math.log(base)) + 0.0


def schmidt_entropy(ket: SparseKet, base: float = 2.0) -> float:
    """Entanglement entropy read straight off the squared amplitudes.

    Valid only when the ket is already in Schmidt form; otherwise use
    :func:`reduced_entropy_dense`.
    """
    if ket.is_zero or abs(ket.norm_sq - 1.0) > 1e-12:
        raise ValueError("schmidt_entropy needs a normalized ket")
    if not ket.is_schmidt_paired():
        raise NotSchmidtForm("occupation rows repeat; use reduced_entropy_dense")
    return _entropy(np.abs(ket.amps) ** 2, base)


def dense_bipartite_entropy(left, right, amps, base: float = 2.0,
                            max_dim: int = MAX_DENSE_DIM) -> float:
    """Entropy across a cut, with rows of ``left``/``right`` labelling each side.

    Builds the reduced operator of the left party as a dense matrix and
    diagonalizes it. Both sides must have at most ``max_dim`` distinct rows.
    """
    _, li = np.unique(np.asarray(left), axis=0, return_inverse=True)
    _, ri = np.unique(np.asarray(right), axis=0, return_inverse=True)
    li, ri = li.reshape(-1), ri.reshape(-1)
    dl, dr = int(li.max()) + 1, int(ri.max()) + 1
    if dl > max_dim or dr > max_dim:
        raise DimensionTooLarge(
            f"reduced dimension {max(dl, dr)} exceeds the dense cap {max_dim}")
    mat = sp.coo_matrix((np.asarray(amps), (li, ri)), shape=(dl, dr)).tocsr()
    if dl <= dr:
        rho = (mat @ mat.conj().T).toarray()
    else:
        rho = (mat.conj().T @ mat).toarray()
    w = np.linalg.eigvalsh(rho)
    w = np.clip(w, 0.0, None)
    return _entropy(w / w.sum(), base)


def reduced_entropy_dense(ket: SparseKet, base: float = 2.0,
                          max_dim: int = MAX_DENSE_DIM) -> float:
    """Entropy of side A computed by dense diagonalization (independent check)."""
    if ket.is_zero:
        raise ValueError("entropy of the zero ket is undefined")
    return dense_bipartite_entropy(ket.occ_a, ket.occ_b, ket.amps, base, max_dim)


# -- density operators --------------------------------------------------------

class DensityOperator:
    """Dense operator over an explicit list of ``(occ_a, occ_b)`` basis rows."""

    def __init__(self, occ_a, occ_b, matrix):
        self.occ_a = _frozen(np.asarray(occ_a, dtype=np.int64))
        self.occ_b = _frozen(np.asarray(occ_b, dtype=np.int64))
        self.matrix = _frozen(np.asarray(matrix, dtype=np.complex128))
        n = self.occ_a.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {n} basis rows")

    @classmethod
    def from_ket(cls, ket: SparseKet) -> "DensityOperator":
        return cls(ket.occ_a, ket.occ_b, np.outer(ket.amps, ket.amps.conj()))

    @property
    def dim(self) -> int:
        return self.occ_a.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def check(self, herm_tol=1e-12, eig_tol=1e-10) -> None:
        """Raise ``ValueError`` unless Hermitian, positive and trace in (0, 1]."""
        mat = self.matrix
        scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
        if np.abs(mat - mat.conj().T).max(initial=0.0) > herm_tol * scale:
            raise ValueError("density operator is not Hermitian")
        if self.dim and np.linalg.eigvalsh(mat).min() < -eig_tol:
            raise ValueError("density operator has a negative eigenvalue")
        if not (0.0 < self.trace <= 1.0 + 1e-12):
            raise ValueError(f"trace {self.trace} outside (0, 1]")

    def _index(self) -> dict:
        return {(a.tobytes(), b.tobytes()): i
                for i, (a, b) in enumerate(zip(self.occ_a, self.occ_b))}

    def vector(self, ket: SparseKet) -> np.ndarray:
        """Coefficients of ``ket`` in this basis; rows outside the basis are dropped."""
        idx = self._index()
        v = np.zeros(self.dim, dtype=np.complex128)
        for a, b, c in zip(ket.occ_a, ket.occ_b, ket.amps):
            i = idx.get((a.tobytes(), b.tobytes()))
            if i is not None:
                v[i] += c
        return v

    def expectation(self, ket: SparseKet) -> float:
        """``<ket|rho|ket>``."""
        v = self.vector(ket)
        return float(np.real(np.conj(v) @ self.matrix @ v))

    def project_both(self, j: int) -> "DensityOperator":
        """Conjugate by ``P_A^(j) P_B^(j)`` and keep the surviving block."""
        keep = (self.occ_a.sum(axis=1) == j) & (self.occ_b.sum(axis=1) == j)
        return DensityOperator(self.occ_a[keep], self.occ_b[keep],
                               self.matrix[np.ix_(keep, keep)])

    def __repr__(self):
        return f"DensityOperator(dim={self.dim}, trace={self.trace:.6g})"
