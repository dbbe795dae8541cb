"""Parameter records shared across modules."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidLambda


@dataclass(frozen=True)
class SqueezeSpec:
    """Two-mode squeezing, stored redundantly as ``r``, ``lambda`` and ``n_bar``.

    Build it with :meth:`from_r` or :meth:`from_lambda`; the three fields
    are kept consistent (``lam = tanh r``, ``n_bar = sinh^2 r``).
    """

    r: float
    lam: float
    n_bar: float

    @classmethod
    def from_r(cls, r: float) -> "SqueezeSpec":
        if not r >= 0 or not math.isfinite(r):
            raise ValueError(f"squeezing r must be finite and >= 0, got {r}")
        lam = math.tanh(r)
        if lam >= 1.0:
            raise InvalidLambda(f"r={r} gives lambda == 1 in double precision")
        return cls(r=r, lam=lam, n_bar=math.sinh(r) ** 2)

    @classmethod
    def from_lambda(cls, lam: float) -> "SqueezeSpec":
        check_lambda(lam)
        # lam^2/(1-lam^2) is the same as sinh^2(atanh lam) but exact at small lam
        return cls(r=math.atanh(lam), lam=lam, n_bar=lam * lam / (1.0 - lam * lam))


def check_lambda(lam: float) -> None:
    if not (0.0 <= lam < 1.0):
        raise InvalidLambda(f"lambda must be in [0, 1), got {lam}")


@dataclass(frozen=True)
class ProtocolParams:
    """One purification instance: ``m`` pairs at squeezing ``squeeze``."""

    m: int
    squeeze: SqueezeSpec
    j_max: int | None = None
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")


@dataclass(frozen=True)
class LossParams:
    """Transmission loss: damping rates per side and the transmission time."""

    eta_a: float = 0.0
    eta_b: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("eta_a", "eta_b", "tau"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def x_a(self) -> float:
        """Dimensionless side-A loss exponent ``eta_a * tau``."""
        return self.eta_a * self.tau

    @property
    def x_b(self) -> float:
        return self.eta_b * self.tau

    @property
    def transmissivity_a(self) -> float:
        return math.exp(-self.x_a)

    @property
    def transmissivity_b(self) -> float:
        return math.exp(-self.x_b)
