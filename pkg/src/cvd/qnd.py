"""Cross-Kerr QND readout of the total photon number in two storage cavities.

A coherent drive passes two ring cavities in series. Ring cavity ``i``
picks up a phase proportional to the photon number ``n_i`` of its storage
cavity, and the output of the second ring is homodyned and integrated
over a window ``T``. Two models are provided:

* the adiabatic Gaussian model: integrated quadrature
  ``x_T ~ Normal(slope * (n1 + n2), 1 / (2T))``;
* an Euler-Maruyama integration of the two ring-cavity Langevin equations
  with classical complex white noise of per-quadrature density 1/2
  standing in for the vacuum input.

All rates are angular (rad/s). :meth:`CavityParams.from_hz` accepts
``nu / 2pi`` values in Hz.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import UnstableStep, WindowEmpty
from .shots import as_rng, shot_rng

TWO_PI = 2.0 * math.pi
#: adiabatic elimination is trusted while chi * n / gamma stays below this
ADIABATIC_LIMIT = 0.05
#: explicit Euler step cap, in units of 1/gamma
MAX_STEP = 0.02
#: cavity-fluctuation transient discarded before the window, in units of 1/gamma;
#: the cascaded response decays as t exp(-gamma t / 2), so 5/gamma is not enough
TRANSIENT = 20.0


@dataclass(frozen=True)
class CavityParams:
    chi: float
    gamma: float
    kappa: float
    g: float  # drive magnitude |g|; the drive itself is i|g|
    t_meas: float
    lo_phase: float = 0.0  # 0 selects the X quadrature

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.chi < 0 or self.kappa < 0 or self.g < 0:
            raise ValueError("chi, kappa and g must be >= 0")
        if not self.t_meas > 0:
            raise ValueError("t_meas must be > 0")

    @classmethod
    def from_hz(cls, chi_over_2pi_hz, gamma_over_2pi_hz, kappa_over_2pi_hz, g, t_meas_s,
                lo_phase=0.0) -> "CavityParams":
        return cls(chi=TWO_PI * chi_over_2pi_hz, gamma=TWO_PI * gamma_over_2pi_hz,
                   kappa=TWO_PI * kappa_over_2pi_hz, g=float(g), t_meas=float(t_meas_s),
                   lo_phase=float(lo_phase))

    @property
    def drive(self) -> complex:
        return 1j * self.g

    def adiabatic_ratio(self, n: float) -> float:
        return self.chi * n / self.gamma

    def with_t(self, t_meas: float) -> "CavityParams":
        return CavityParams(self.chi, self.gamma, self.kappa, self.g, t_meas, self.lo_phase)


# Reference working point: chi/2pi = 0.1 MHz, gamma/2pi = 100 MHz, kappa/2pi = 4 MHz
def reference_cavity(t_meas: float = 8e-9) -> CavityParams:
    return CavityParams.from_hz(1e5, 1e8, 4e6, 100.0, t_meas)


def signal_slope(c: CavityParams) -> float:
    """Mean integrated quadrature per photon, ``4 sqrt2 |g| chi / sqrt(gamma)``."""
    return 4.0 * math.sqrt(2.0) * c.g * c.chi / math.sqrt(c.gamma)


def noise_sigma(c: CavityParams) -> float:
    """Vacuum-limited standard deviation of the integrated quadrature."""
    return 1.0 / math.sqrt(2.0 * c.t_meas)


def distinguishability(c: CavityParams) -> float:
    """Photon-number resolution ``sqrt(gamma) / (8 |g| chi sqrt(T))``."""
    if c.g == 0 or c.chi == 0:
        return math.inf
    return math.sqrt(c.gamma) / (8.0 * c.g * c.chi * math.sqrt(c.t_meas))


def misidentification_rate(c: CavityParams) -> float:
    """Chance that rounding ``x_T / slope`` misses an interior ``n`` (``n >= 1``)."""
    return 2.0 * norm.cdf(-0.5 / distinguishability(c))


@dataclass
class FeasibilityReport:
    t_min_s: float
    t_max_s: float
    t_meas_s: float
    delta_n: float
    feasible: bool

    def to_dict(self) -> dict:
        return {"t_min_s": self.t_min_s,
                "t_max_s": self.t_max_s if math.isfinite(self.t_max_s) else None,
                "t_meas_s": self.t_meas_s, "delta_n": self.delta_n,
                "feasible": self.feasible}


def feasibility_window(c: CavityParams, n_bar: float) -> FeasibilityReport:
    """Window ``gamma / (64 g^2 chi^2) < T < 1 / (kappa n_bar)``.

    The lower edge is where ``delta_n`` reaches 1; the upper edge is where
    storage-cavity loss during the readout stops being negligible.
    """
    if c.g == 0 or c.chi == 0:
        raise WindowEmpty("no cross-Kerr signal: t_min is infinite")
    t_min = c.gamma / (64.0 * c.g ** 2 * c.chi ** 2)
    t_max = math.inf if c.kappa * n_bar == 0 else 1.0 / (c.kappa * n_bar)
    if t_min >= t_max:
        raise WindowEmpty(f"t_min {t_min:.3e} s >= t_max {t_max:.3e} s")
    return FeasibilityReport(t_min_s=t_min, t_max_s=t_max, t_meas_s=c.t_meas,
                             delta_n=distinguishability(c),
                             feasible=t_min < c.t_meas < t_max)


# -- noise-free cavity algebra -------------------------------------------------

def steady_state_mode(c: CavityParams, n_i: int) -> complex:
    """Stationary amplitude of the first ring cavity, ``-g gamma / (i chi n + gamma/2)``."""
    return -c.drive * c.gamma / (1j * c.chi * n_i + c.gamma / 2)


def reflection(c: CavityParams, n_i: int) -> complex:
    """Input-to-output factor of one ring cavity; unit modulus for every ``n_i``."""
    return (1j * c.chi * n_i - c.gamma / 2) / (1j * c.chi * n_i + c.gamma / 2)


def output_field(c: CavityParams, n1: int, n2: int) -> complex:
    """Stationary output of the second ring cavity for the drive ``g sqrt(gamma)``."""
    return c.drive * math.sqrt(c.gamma) * reflection(c, n1) * reflection(c, n2)


def quadrature(b: complex, phase: float = 0.0) -> float:
    return math.sqrt(2.0) * (b * np.exp(-1j * phase)).real


def composite_phase(c: CavityParams, n1: int, n2: int) -> float:
    """Phase lag accumulated over both ring cavities (exact arctangent form)."""
    return 2.0 * (math.atan(2 * c.chi * n1 / c.gamma) + math.atan(2 * c.chi * n2 / c.gamma))


def raw_signal(c: CavityParams, n1: int, n2: int) -> float:
    """Stationary output quadrature relative to the zero-photon baseline, raw sign."""
    return (quadrature(output_field(c, n1, n2), c.lo_phase)
            - quadrature(output_field(c, 0, 0), c.lo_phase))


def raw_sign(c: CavityParams) -> float:
    """Sign of the raw signal for one photon; the reported signal is made positive."""
    s = raw_signal(c, 1, 0)
    return 1.0 if s >= 0 else -1.0


# -- Gaussian homodyne model ---------------------------------------------------

@dataclass
class HomodyneRecord:
    x_t: float
    n_true: int
    n_inferred: int
    signal_mean: float
    noise_sigma: float


def infer_number(x, slope: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if slope == 0:
        return np.zeros(x.shape, dtype=np.int64)
    return np.maximum(np.rint(x / slope), 0).astype(np.int64)


class HomodyneEnsemble:
    """Column store of homodyne records; indexing yields :class:`HomodyneRecord`."""

    def __init__(self, x_t, n_true, slope, sigma):
        self.x_t = np.asarray(x_t, dtype=float)
        self.n_true = int(n_true)
        self.slope = float(slope)
        self.sigma = float(sigma)
        self.n_inferred = infer_number(self.x_t, self.slope)

    def __len__(self):
        return self.x_t.size

    def __getitem__(self, i) -> HomodyneRecord:
        return HomodyneRecord(float(self.x_t[i]), self.n_true, int(self.n_inferred[i]),
                              self.slope * self.n_true, self.sigma)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def error_rate(self) -> float:
        return float(np.mean(self.n_inferred != self.n_true))

    def to_csv(self, meta: dict | None = None, start_id: int = 0, header=True) -> str:
        buf = io.StringIO()
        for k, v in (meta or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["sample_id", "x_t", "n_true", "n_inferred"])
        for i, (x, n) in enumerate(zip(self.x_t, self.n_inferred)):
            w.writerow([start_id + i, repr(float(x)), self.n_true, int(n)])
        return buf.getvalue()


def sample_homodyne(c: CavityParams, n_tot: int, n_samples: int, rng_seed=0,
                    sigma: float | None = None) -> HomodyneEnsemble:
    """Draw integrated quadratures from the adiabatic Gaussian model.

    ``sigma`` overrides the vacuum noise level (``0`` switches noise off).
    """
    slope = signal_slope(c)
    sigma = noise_sigma(c) if sigma is None else sigma
    x = slope * n_tot + sigma * as_rng(rng_seed).standard_normal(n_samples)
    return HomodyneEnsemble(x, n_tot, slope, sigma)


# -- Langevin integration -----------------------------------------------------

@dataclass
class SdeState:
    b1: complex
    b2: complex
    time: float
    x_integral: float  # accumulated quadrature integral over the window so far


@dataclass
class SdeTrajectory:
    time: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    x_integral: np.ndarray

    def __len__(self):
        return self.time.size

    def __getitem__(self, i) -> SdeState:
        return SdeState(complex(self.b1[i]), complex(self.b2[i]), float(self.time[i]),
                        float(self.x_integral[i]))


def step_plan(c: CavityParams, dt: float | None = None):
    """``(dt, window_steps, transient_steps)`` honoring the step cap and window."""
    if c.gamma * c.t_meas < 5:
        raise ValueError(f"gamma * t_meas = {c.gamma * c.t_meas:.3g} < 5: "
                         "the ring-cavity transient does not decay within the window")
    if dt is None:
        n = math.ceil(c.t_meas * c.gamma / MAX_STEP - 1e-9)
        dt = c.t_meas / n
    else:
        n = round(c.t_meas / dt)
        if abs(n * dt - c.t_meas) > 1e-9 * c.t_meas:
            raise ValueError("t_meas must be an integer multiple of dt")
    if dt * c.gamma > MAX_STEP * (1 + 1e-9):
        raise ValueError(f"dt = {dt:.3e} exceeds {MAX_STEP}/gamma")
    return dt, n, math.ceil(TRANSIENT / (c.gamma * dt) - 1e-9)


def _noise(seed: int, n_traj: int, n_steps: int, dt: float) -> np.ndarray:
    # symmetric-ordered vacuum: each quadrature sqrt2 Re(e^-ip dW) has variance dt/2
    out = np.empty((n_traj, n_steps), dtype=np.complex128)
    for k in range(n_traj):
        z = shot_rng(seed, k).standard_normal((n_steps, 2))
        out[k] = (z[:, 0] + 1j * z[:, 1]) * (0.5 * math.sqrt(dt))
    return out


def sde_ensemble(c: CavityParams, n1: int, n2: int, n_traj: int, rng_seed: int = 0,
                 dt: float | None = None, noise: bool = True, record: bool = False):
    """Integrate ``n_traj`` independent trajectories; returns reported ``x_T`` per trajectory.

    Trajectory ``k`` draws its noise from seed ``rng_seed + k``. The ring
    cavities start in their noise-free stationary state (drive and photon
    numbers are constant), and the first ``TRANSIENT/gamma`` are discarded so that
    the cavity fluctuations are stationary when the window opens. With
    ``record=True`` the per-step history of trajectory 0 is also returned.
    """
    dt, n_win, n_tr = step_plan(c, dt)
    n_steps = n_tr + n_win
    gam, sg = c.gamma, math.sqrt(c.gamma)
    drive = c.drive
    rot = np.exp(-1j * c.lo_phase)
    d1 = 1j * c.chi * n1 + gam / 2
    d2 = 1j * c.chi * n2 + gam / 2
    b1 = np.full(n_traj, steady_state_mode(c, n1), dtype=np.complex128)
    b2 = np.full(n_traj, -sg * drive * sg * reflection(c, n1) / d2, dtype=np.complex128)
    dw = _noise(rng_seed, n_traj, n_steps, dt) if noise else np.zeros((n_traj, n_steps), complex)
    acc = np.zeros(n_traj)
    sentinel = 4.0 * c.g + 8.0
    hist = None
    if record:
        hist = {"t": np.empty(n_steps + 1), "b1": np.empty(n_steps + 1, complex),
                "b2": np.empty(n_steps + 1, complex), "x": np.empty(n_steps + 1)}
        hist["t"][0], hist["b1"][0], hist["b2"][0], hist["x"][0] = 0.0, b1[0], b2[0], 0.0
    for s in range(n_steps):
        w = dw[:, s]
        in2 = w + (drive * sg + sg * b1) * dt  # b_i2 dt = b_o1 dt
        if s >= n_tr:
            acc += math.sqrt(2.0) * ((in2 + sg * b2 * dt) * rot).real
        b1 = b1 - (d1 * b1 + drive * gam) * dt - sg * w
        b2 = b2 - d2 * b2 * dt - sg * in2
        if np.abs(b1).max() > sentinel or np.abs(b2).max() > sentinel:
            raise UnstableStep(f"ring-cavity amplitude exceeded {sentinel:.3g} at step {s}")
        if record:
            hist["t"][s + 1] = (s + 1) * dt
            hist["b1"][s + 1], hist["b2"][s + 1], hist["x"][s + 1] = b1[0], b2[0], acc[0]
    baseline = quadrature(output_field(c, 0, 0), c.lo_phase)
    x_t = raw_sign(c) * (acc / c.t_meas - baseline)
    if record:
        traj = SdeTrajectory(hist["t"], hist["b1"], hist["b2"], hist["x"])
        return x_t, traj
    return x_t


def sde_integrate(c: CavityParams, n1: int, n2: int, dt: float | None = None,
                  rng_seed: int = 0, noise: bool = True):
    """One trajectory: ``(SdeTrajectory, x_T)``."""
    x_t, traj = sde_ensemble(c, n1, n2, 1, rng_seed, dt, noise, record=True)
    return traj, float(x_t[0])
