import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import ks_2samp, norm

from cvd.errors import WindowEmpty
from cvd.qnd import (CavityParams, composite_phase, distinguishability, feasibility_window,
                     infer_number, misidentification_rate, noise_sigma, output_field,
                     quadrature, raw_signal, reference_cavity, reflection, sample_homodyne,
                     sde_ensemble, sde_integrate, signal_slope, step_plan, steady_state_mode)

REF = reference_cavity()
N_BAR_R1 = math.sinh(1.0) ** 2

cavities = st.builds(
    lambda chi, gam, g, t: CavityParams.from_hz(chi, gam, 4e6, g, t),
    st.floats(1e3, 1e6), st.floats(1e7, 1e9), st.floats(1, 1e3), st.floats(1e-9, 1e-7))


def test_from_hz_converts_to_angular():
    assert REF.chi == pytest.approx(2 * math.pi * 1e5)
    assert REF.gamma == pytest.approx(2 * math.pi * 1e8)
    assert REF.drive == 100j


def test_signal_slope():
    assert signal_slope(REF) == pytest.approx(1.418e4, rel=1e-3)
    assert signal_slope(CavityParams(0.0, 1.0, 0.0, 1.0, 1.0)) == 0.0
    base = signal_slope(REF)
    assert signal_slope(CavityParams(2 * REF.chi, REF.gamma, 0, REF.g, 1)) == pytest.approx(2 * base)
    assert signal_slope(CavityParams(REF.chi, REF.gamma, 0, 3 * REF.g, 1)) == pytest.approx(3 * base)
    assert signal_slope(CavityParams(REF.chi, 4 * REF.gamma, 0, REF.g, 1)) == pytest.approx(base / 2)


def test_distinguishability():
    assert distinguishability(REF) == pytest.approx(0.558, abs=1e-3)
    assert distinguishability(reference_cavity(32e-9)) == pytest.approx(distinguishability(REF) / 2)
    assert math.isinf(distinguishability(CavityParams(0.0, 1.0, 0.0, 1.0, 1.0)))


@given(cavities)
def test_resolution_identities(c):
    assert distinguishability(c) * signal_slope(c) == pytest.approx(noise_sigma(c), rel=1e-12)
    assert noise_sigma(c) == pytest.approx(1 / math.sqrt(2 * c.t_meas), rel=1e-12)
    t_min = c.gamma / (64 * c.g ** 2 * c.chi ** 2)
    assert distinguishability(c.with_t(t_min)) == pytest.approx(1.0, abs=1e-12)


def test_misidentification_rate():
    assert misidentification_rate(REF) == pytest.approx(2 * norm.cdf(-0.8969), abs=1e-4)
    assert misidentification_rate(REF) == pytest.approx(0.370, abs=1e-3)


def test_feasibility_reference_values():
    rep = feasibility_window(REF, N_BAR_R1)
    t_min = (2 * math.pi * 1e8) / (64 * 100 ** 2 * (2 * math.pi * 1e5) ** 2)
    t_max = 1 / (2 * math.pi * 4e6 * N_BAR_R1)
    assert rep.t_min_s == pytest.approx(t_min, rel=1e-12)
    assert rep.t_max_s == pytest.approx(t_max, rel=1e-12)
    assert rep.t_min_s == pytest.approx(2.49e-9, rel=0.01)
    assert rep.t_max_s == pytest.approx(2.88e-8, rel=0.01)
    assert rep.feasible and rep.delta_n < 1


def test_feasibility_edges():
    rep = feasibility_window(CavityParams.from_hz(1e5, 1e8, 0.0, 100, 8e-9), N_BAR_R1)
    assert math.isinf(rep.t_max_s) and rep.to_dict()["t_max_s"] is None
    assert not feasibility_window(reference_cavity(1e-9), N_BAR_R1).feasible
    assert not feasibility_window(reference_cavity(5e-8), N_BAR_R1).feasible
    with pytest.raises(WindowEmpty):
        feasibility_window(CavityParams.from_hz(1e5, 1e8, 4e8, 100, 8e-9), N_BAR_R1)
    with pytest.raises(WindowEmpty):
        feasibility_window(CavityParams.from_hz(0.0, 1e8, 4e6, 100, 8e-9), N_BAR_R1)


# -- cavity algebra --------------------------------------------------------------

def test_steady_state_resonant():
    assert steady_state_mode(REF, 0) == pytest.approx(-2 * REF.drive)


@given(st.integers(0, 50))
def test_reflection_unit_modulus(n):
    assert abs(reflection(REF, n)) == pytest.approx(1.0, abs=1e-15)


def test_composite_phase_linearization():
    for n1 in range(7):
        for n2 in range(7 - n1):
            if n1 + n2 == 0:
                continue
            exact = composite_phase(REF, n1, n2)
            lin = 4 * REF.chi * (n1 + n2) / REF.gamma
            assert abs(exact - lin) / lin < 1e-4
            rot = output_field(REF, n1, n2) / output_field(REF, 0, 0)
            assert np.angle(rot) == pytest.approx(-exact, abs=1e-12)


def test_raw_signal_rate_matches_slope():
    # the window-averaged quadrature shift is slope * n up to linearization error
    for n1, n2 in [(1, 0), (0, 2), (2, 1)]:
        x = raw_signal(REF, n1, n2)
        assert x == pytest.approx(signal_slope(REF) * (n1 + n2), rel=1e-3)
    assert quadrature(1j, math.pi / 2) == pytest.approx(math.sqrt(2))


# -- Gaussian homodyne model ----------------------------------------------------------

def test_noise_free_samples():
    ens = sample_homodyne(REF, 4, 10, 0, sigma=0.0)
    assert np.all(ens.x_t == signal_slope(REF) * 4)
    assert np.all(ens.n_inferred == 4)
    assert ens.error_rate == 0.0


def test_homodyne_statistics_n3():
    n = 100_000
    ens = sample_homodyne(REF, 3, n, 1)
    sigma = noise_sigma(REF)
    assert abs(ens.x_t.mean() - 3 * signal_slope(REF)) < 4 * sigma / math.sqrt(n)
    assert ens.x_t.std(ddof=1) == pytest.approx(sigma, rel=0.02)
    p = misidentification_rate(REF)
    assert abs(ens.error_rate - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_inference_rounding_and_clamp():
    assert list(infer_number([-3.0, 0.4, 0.6, 2.5, 3.5], 1.0)) == [0, 0, 1, 2, 4]
    assert list(infer_number([5.0, -5.0], 0.0)) == [0, 0]


def test_homodyne_seeded_and_records():
    a = sample_homodyne(REF, 2, 50, 9)
    b = sample_homodyne(REF, 2, 50, 9)
    assert a.to_csv() == b.to_csv()
    rec = a[3]
    assert rec.n_true == 2 and rec.signal_mean == pytest.approx(2 * signal_slope(REF))
    assert a.to_csv({"seed": 9}).splitlines()[1] == "sample_id,x_t,n_true,n_inferred"


# -- Langevin integration -------------------------------------------------------------

def test_step_plan():
    dt, n_win, n_tr = step_plan(REF)
    assert dt * REF.gamma <= 0.02 * (1 + 1e-12)
    assert n_win * dt == pytest.approx(REF.t_meas, rel=1e-12)
    assert n_tr * dt * REF.gamma >= 20 - 1e-9
    with pytest.raises(ValueError):
        step_plan(REF, dt=0.05 / REF.gamma)
    with pytest.raises(ValueError):
        step_plan(reference_cavity(5e-9), dt=REF.t_meas / 300.3)
    with pytest.raises(ValueError):
        step_plan(reference_cavity(1e-9))


def test_sde_noise_free():
    assert sde_ensemble(REF, 0, 0, 1, noise=False)[0] == pytest.approx(0.0, abs=1e-6)
    x = sde_ensemble(REF, 1, 1, 1, noise=False)[0]
    assert x == pytest.approx(2 * signal_slope(REF), rel=0.01)


def test_sde_record_and_reproducibility():
    traj, x = sde_integrate(REF, 2, 0, rng_seed=3)
    assert len(traj) == traj.time.size
    assert traj[len(traj) - 1].time == pytest.approx(traj.time[-1])
    traj2, x2 = sde_integrate(REF, 2, 0, rng_seed=3)
    assert x == x2
    assert np.all(np.abs(traj.b1) <= 4 * REF.g + 8)


@pytest.mark.parametrize("g_scale", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("chi_scale", [0.5, 1.0, 2.0])
def test_sde_matches_gaussian_model_on_grid(g_scale, chi_scale):
    c = CavityParams.from_hz(1e5 * chi_scale, 1e8, 4e6, 100 * g_scale, 8e-9)
    n_traj = 600
    x = sde_ensemble(c, 2, 1, n_traj, rng_seed=100)
    sigma = noise_sigma(c)
    assert abs(x.mean() - 3 * signal_slope(c)) < 4 * sigma / math.sqrt(n_traj)
    var_se = sigma ** 2 * math.sqrt(2 / (n_traj - 1))
    assert abs(x.var(ddof=1) - sigma ** 2) < 4 * var_se


def test_inference_depends_only_on_total():
    x30 = sde_ensemble(REF, 3, 0, 800, rng_seed=1)
    x12 = sde_ensemble(REF, 1, 2, 800, rng_seed=5000)
    assert ks_2samp(x30, x12).pvalue > 0.01
    slope = signal_slope(REF)
    a = np.bincount(infer_number(x30, slope), minlength=12)[:12]
    b = np.bincount(infer_number(x12, slope), minlength=12)[:12]
    assert ks_2samp(np.repeat(np.arange(12), a), np.repeat(np.arange(12), b)).pvalue > 0.01
