"""Acceptance criteria at their stated tolerances and runtime budgets."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from spinrelax.bloch import (
    relaxation_times_master, relaxation_times_redfield, run_equivalence, static_t1,
)
from spinrelax.channels import (
    amplitude_a, apply_channel, evolve_kraus, kraus_amplitude, kraus_phase, phase_p,
    phenomenological_norms, rate_integral_fg, reconstruct_phase, thermalizing_channel,
)
from spinrelax.control import ControlParams, decay_function
from spinrelax.lindblad import QuantumEnvironment, evolve_master, master_rhs
from spinrelax.modulation import ModulationProfile
from spinrelax.numerics import OdeStepperConfig
from spinrelax.redfield import NoiseEnvironment, kappa_q, longitudinal_rate

from conftest import random_density_matrix, trace_distance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@pytest.mark.criterion(1, "Kraus completeness on the phase and amplitude grids")
def test_kraus_completeness():
    with Timer() as timer:
        worst = max(kraus_phase(p).completeness_error() for p in np.linspace(0, 0.5, 21))
        for a in np.linspace(0, 0.99, 21):
            for g in np.linspace(0, 0.5, 23)[1:-1]:
                worst = max(worst, kraus_amplitude(a, g).completeness_error())
    assert worst < 1e-12
    assert timer.seconds < 1.0


@pytest.mark.criterion(2, "Kraus channel matches the master equation")
def test_channel_master_oracle():
    env = QuantumEnvironment(betaE=0.7, theta_a=0.25, theta_p=0.15, n_p=0.2)
    sigma0 = np.array([[0.35, 0.2 - 0.3j], [0.2 + 0.3j, 0.65]])
    with Timer() as timer:
        t = np.linspace(0, 5 / env.inv_t1(0), 50)
        kraus = evolve_kraus(env, sigma0, t)
        master = evolve_master(env, sigma0, (0, t[-1]), t_eval=t).rho
    assert max(trace_distance(a, b) for a, b in zip(kraus, master)) < 1e-6
    assert timer.seconds < 5.0


ENV = NoiseEnvironment.isotropic(1.0, 0.01, 1.0, beta=0.01)
PROFILES = {
    "static": ModulationProfile.static(1.0),
    # eta = 1/(T1 zeta) = 0.1 and chi/zeta = 1 with T1 = 100
    "modulated": ModulationProfile(1.0, chi=0.1, zeta=0.1),
}


@pytest.mark.criterion(3, "three-way equivalence of Redfield, master and Bloch")
@pytest.mark.parametrize("name", list(PROFILES))
def test_three_way_equivalence(name):
    p = PROFILES[name]
    t_end = 5 * static_t1(ENV, PROFILES["static"])
    sigma0 = np.array([[0.7, 0.3 + 0.1j], [0.3 - 0.1j, 0.3]])
    with Timer() as timer:
        res = run_equivalence(ENV, p, sigma0, (0, t_end), 0.01, n_samples=201,
                              cfg=OdeStepperConfig(rel_tol=1e-9, abs_tol=1e-12),
                              free_evolution=False)
    assert res.worst() < 1e-5, res.max_deviation()
    assert timer.seconds < 30.0


@pytest.mark.criterion(4, "static Lorentzian limit of 1/T1 and kappa_z")
def test_static_lorentzian_limit():
    env = NoiseEnvironment(1.3, (0.02, 0.02, 0.05), 0.8)
    p = ModulationProfile.static(2.0)
    with Timer() as timer:
        inv_t1 = longitudinal_rate(env, p, 50.0)
        kz = kappa_q(env, p, "z", 50.0).real
    g2l2 = 1.3**2 * 0.02
    assert inv_t1 == pytest.approx(2 * g2l2 * 0.8 / (1 + (2.0 * 0.8) ** 2), rel=1e-3)
    assert kz == pytest.approx(1.3**2 * 0.05 * 0.8, rel=1e-3)
    assert timer.seconds < 1.0


@pytest.mark.criterion(5, "1/T2 = 1/(2 T1) + kappa_z for both rate constructors")
def test_t2_identity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        env = NoiseEnvironment(rng.uniform(0.5, 2), tuple(rng.uniform(0, 0.05, 3)), rng.uniform(0.2, 2))
        p = ModulationProfile(rng.uniform(0.5, 2), chi=rng.uniform(0, 0.1), zeta=rng.uniform(0, 0.1))
        rf = relaxation_times_redfield(env, p)
        q = QuantumEnvironment(betaE=rng.uniform(0.01, 3), theta_a=rng.uniform(0, 1),
                               theta_p=rng.uniform(0, 1), n_p=rng.uniform(0, 2))
        me = relaxation_times_master(q)
        t = rng.uniform(0, 30)
        assert abs(1 / rf.t2(t) - (1 / (2 * rf.t1(t)) + rf.kappa_z)) < 1e-12
        kz = q.theta_p / math.pi * (2 * q.n_p + 1)
        assert abs(1 / me.t2(t) - (1 / (2 * me.t1(t)) + kz)) < 1e-12


@pytest.mark.criterion(6, "decay-function curves: calibration, ordering and closeness")
def test_decay_function_curves():
    with Timer() as timer:
        static = decay_function(ControlParams(eta=0.1), 1.0)
        a1 = decay_function(ControlParams(eta=0.1, chi_over_zeta=1.0), 1.0)
        a10 = decay_function(ControlParams(eta=0.1, chi_over_zeta=10.0), 1.0)
        taus = np.linspace(0, 3, 301)
        gaps = []
        for cz in (1.0, 10.0):
            slow = ControlParams(eta=0.01, chi_over_zeta=cz)
            fast = ControlParams(eta=0.1, chi_over_zeta=cz)
            gaps.append(np.max(np.abs(decay_function(fast, taus) - decay_function(slow, taus))))
    assert static == pytest.approx(0.632, abs=0.01)
    assert a10 < a1 < static
    assert max(gaps) < 0.05
    assert timer.seconds < 60.0


@pytest.mark.criterion(7, "thermal fixed point and the thermalizing amplitude limit")
def test_thermal_fixed_point():
    rng = np.random.default_rng(7)
    for betaE in (0.01, 0.5, 3.0):
        env = QuantumEnvironment(betaE=betaE, theta_a=0.4, theta_p=0.3, n_p=0.5)
        g = env.gamma_T
        thermal = np.diag([g, 1 - g]).astype(complex)
        assert np.max(np.abs(master_rhs(env, 1.0, thermal))) < 1e-12
        ks = thermalizing_channel(g)
        for _ in range(100):
            out = apply_channel(ks, random_density_matrix(rng))
            assert np.max(np.abs(out - thermal)) < 1e-9


@pytest.mark.criterion(8, "phenomenological norms against the Kraus channels")
def test_phenomenological_norms():
    rng = np.random.default_rng(8)
    gamma_p, t = 0.42, 1.9
    norms = phenomenological_norms("phase", t, gamma_p=gamma_p)
    ks = kraus_phase(phase_p(gamma_p, t))
    for _ in range(20):
        s = random_density_matrix(rng)
        assert np.max(np.abs(reconstruct_phase(norms, s) - apply_channel(ks, s))) < 1e-12

    # zero temperature: the excited state decays at 1/T1 = 2 Gamma_a
    env = QuantumEnvironment(betaE=40.0, theta_a=0.3)
    gamma_a = 0.5 * env.inv_t1(0.0)
    for t in (0.5, 2.0, 6.0):
        a = amplitude_a(rate_integral_fg(env, t))
        amp = phenomenological_norms("amplitude", t, gamma_a=gamma_a)
        assert amp.g_sq_sum == pytest.approx(1 - math.exp(-2 * gamma_a * t), abs=1e-15)
        assert abs(amp.g_sq_sum - a) < 1e-10


@pytest.mark.criterion(9, "repeated CLI runs give byte-identical CSV")
def test_cli_determinism(tmp_path):
    outputs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "spinrelax.cli", "evolve", "--config",
             str(CONFIGS / "modulated_equivalence.yaml"), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    sweep = []
    for i in range(2):
        out = tmp_path / f"sweep{i}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "spinrelax.cli", "control-sweep", "--config",
             str(CONFIGS / "control_sweep.yaml"), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        sweep.append(out.read_bytes())
    assert sweep[0] == sweep[1]
