import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinrelax.channels import (
    KrausSet, ParameterError, amplitude_a, amplitude_rate_from_a, apply_channel, evolve_kraus,
    kraus_amplitude, kraus_phase, phase_p, phenomenological_norms, rate_integral_fg,
    rate_integral_inv_t1, reconstruct_phase, reconstruct_populations, thermalizing_channel,
)
from spinrelax.lindblad import QuantumEnvironment, evolve_master
from spinrelax.numerics import IDENTITY, is_density_matrix

from conftest import random_density_matrix, trace_distance


class TestParameters:
    def test_phase_p_examples(self):
        assert phase_p(0.7, 0.0) == 0.0
        assert phase_p(1.0, math.log(2)) == pytest.approx(0.25, abs=1e-15)
        assert phase_p(1.0, 1e3) == 0.5

    def test_phase_p_monotone(self):
        vals = [phase_p(0.3, t) for t in np.linspace(0, 20, 50)]
        assert np.all(np.diff(vals) > 0)
        assert max(vals) <= 0.5

    def test_amplitude_a_examples(self):
        assert amplitude_a(0.0) == 0.0
        assert amplitude_a(1.0) == pytest.approx(0.632120558828558, abs=1e-15)
        assert amplitude_a(40.0) == pytest.approx(1.0, abs=1e-15)
        with pytest.raises(ParameterError):
            amplitude_a(-1e-3)

    def test_rate_integral_paths_agree(self):
        env = QuantumEnvironment(betaE=0.3, theta_a=lambda t: 0.2 * (1 + 0.5 * math.sin(t)))
        for t in (0.0, 1.3, 6.0):
            fg = rate_integral_fg(env, t)
            t1 = rate_integral_inv_t1(env.inv_t1, t)
            assert fg == pytest.approx(t1, rel=1e-14, abs=1e-15)
        closed = (2 * env.n_a + 1) / math.pi * 0.2 * (6.0 + 0.5 * (1 - math.cos(6.0)))
        assert rate_integral_fg(env, 6.0) == pytest.approx(closed, rel=1e-10)


class TestKrausSets:
    def test_phase_identity_at_zero(self, rng):
        ks = kraus_phase(0.0)
        s = random_density_matrix(rng)
        assert np.allclose(apply_channel(ks, s), s, atol=1e-15)

    def test_phase_half_erases_coherence(self):
        out = apply_channel(kraus_phase(0.5), 0.5 * np.ones((2, 2)))
        assert np.allclose(out, np.eye(2) / 2, atol=1e-16)

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.3, 0.5])
    def test_phase_action(self, p):
        out = apply_channel(kraus_phase(p), 0.5 * np.ones((2, 2)))
        expected = np.array([[0.5, (1 - 2 * p) * 0.5], [(1 - 2 * p) * 0.5, 0.5]])
        assert np.max(np.abs(out - expected)) < 1e-15

    def test_completeness_example(self):
        assert kraus_phase(0.3).completeness_error() < 1e-15

    def test_amplitude_identity_at_zero(self, rng):
        s = random_density_matrix(rng)
        assert np.allclose(apply_channel(kraus_amplitude(0.0, 0.2), s), s, atol=1e-15)

    def test_amplitude_action(self, rng):
        a, g = 0.37, 0.22
        s = random_density_matrix(rng)
        out = apply_channel(kraus_amplitude(a, g), s)
        assert out[0, 0].real == pytest.approx(g * a + (1 - a) * s[0, 0].real, abs=1e-15)
        assert abs(out[0, 1] - math.sqrt(1 - a) * s[0, 1]) < 1e-15

    def test_zero_temperature_limit(self):
        ks = kraus_amplitude(0.4, 1e-12)
        # weight of the absorbing pair vanishes; E2, E3 form the standard pair
        assert np.linalg.norm(ks.operators[0]) < 1e-5 and np.linalg.norm(ks.operators[1]) < 1e-5
        assert np.allclose(ks.operators[2], np.diag([math.sqrt(0.6), 1.0]), atol=1e-11)
        assert np.allclose(ks.operators[3], [[0, 0], [math.sqrt(0.4), 0]], atol=1e-11)

    def test_thermalizing_limit(self, rng):
        g = 0.31
        thermal = np.diag([g, 1 - g])
        for _ in range(20):
            out = apply_channel(thermalizing_channel(g), random_density_matrix(rng))
            assert np.max(np.abs(out - thermal)) < 1e-15
        near = apply_channel(kraus_amplitude(1 - 1e-12, g), random_density_matrix(rng))
        assert np.max(np.abs(near - thermal)) < 1e-5

    @pytest.mark.parametrize("kwargs", [dict(p=0.7), dict(p=-0.01), dict(p=float("nan"))])
    def test_phase_range_guard(self, kwargs):
        with pytest.raises(ParameterError):
            kraus_phase(**kwargs)

    @pytest.mark.parametrize("a,g", [(1.0, 0.2), (-0.1, 0.2), (0.5, 0.0), (0.5, 0.6)])
    def test_amplitude_range_guard(self, a, g):
        with pytest.raises(ParameterError):
            kraus_amplitude(a, g)

    def test_incomplete_set_rejected(self):
        with pytest.raises(ParameterError, match="completeness"):
            KrausSet((0.9 * IDENTITY,), "phase")


class TestProperties:
    def test_completeness_grid(self):
        for p in np.linspace(0, 0.5, 20):
            assert kraus_phase(p).completeness_error() < 1e-12
        for a in np.linspace(0, 0.999, 20):
            for g in np.linspace(1e-6, 0.5, 20):
                assert kraus_amplitude(a, g).completeness_error() < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
    def test_phase_composition(self, p1, p2, seed):
        s = random_density_matrix(np.random.default_rng(seed))
        p12 = 0.5 * (1 - (1 - 2 * p1) * (1 - 2 * p2))
        two = apply_channel(kraus_phase(p2), apply_channel(kraus_phase(p1), s))
        one = apply_channel(kraus_phase(p12), s)
        assert np.max(np.abs(two - one)) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 0.5))
    def test_amplitude_fixed_point(self, a, g):
        thermal = np.diag([g, 1 - g]).astype(complex)
        assert np.max(np.abs(apply_channel(kraus_amplitude(a, g), thermal) - thermal)) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 0.99), st.floats(1e-6, 0.5), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
    def test_output_is_state(self, a, g, p, seed):
        s = random_density_matrix(np.random.default_rng(seed))
        out = apply_channel(kraus_phase(p), apply_channel(kraus_amplitude(a, g), s))
        assert is_density_matrix(out, 1e-12)

    def test_coherence_factors_build_t2(self):
        inv_t1, kz, t = 0.4, 0.15, 2.5
        a = amplitude_a(inv_t1 * t)
        p = phase_p(kz, t)
        factor = math.sqrt(1 - a) * (1 - 2 * p)
        inv_t2 = inv_t1 / 2 + kz
        assert factor == pytest.approx(math.exp(-t * inv_t2), abs=1e-8)

    def test_channel_matches_master_equation(self):
        env = QuantumEnvironment(betaE=0.5, theta_a=0.3, theta_p=0.2, n_p=0.4)
        s0 = np.array([[0.2, 0.3 - 0.1j], [0.3 + 0.1j, 0.8]])
        t = np.linspace(0, 5 / env.inv_t1(0), 50)
        kraus = evolve_kraus(env, s0, t)
        master = evolve_master(env, s0, (0, t[-1]), t_eval=t).rho
        assert max(trace_distance(a, b) for a, b in zip(kraus, master)) < 1e-6

    def test_evolve_kraus_initial_row(self):
        env = QuantumEnvironment(betaE=0.5, theta_a=0.3, theta_p=0.2)
        s0 = np.array([[0.7, 0.3 + 0.1j], [0.3 - 0.1j, 0.3]])
        assert np.array_equal(evolve_kraus(env, s0, [0.0, 1.0])[0], s0)


class TestPhenomenological:
    def test_initial_norms(self):
        ph = phenomenological_norms("phase", 0.0, gamma_p=0.4)
        assert ph.t00 == 1 and ph.t11 == 1 and ph.f_sq_sum == 0
        am = phenomenological_norms("amplitude", 0.0, gamma_a=0.4, gamma_T=0.2)
        assert am.t00 == 1 and am.t11 == 1 and am.g_sq_sum == 0 and am.h_sq_sum == 0

    def test_phase_example(self):
        n = phenomenological_norms("phase", 1.0, gamma_p=1.0)
        assert n.t11 == pytest.approx(math.exp(-1))
        assert n.f_sq_sum == pytest.approx(0.8646647167633873, abs=1e-15)
        assert n.t11**2 + n.f_sq_sum == pytest.approx(1.0, abs=1e-15)

    def test_values_in_unit_interval(self):
        for t in np.linspace(0, 10, 11):
            for n in (phenomenological_norms("phase", t, gamma_p=0.3),
                      phenomenological_norms("amplitude", t, gamma_a=0.3, gamma_T=0.3)):
                assert all(0 <= v <= 1 for v in n.values().values())

    def test_phase_reconstruction_exact(self, rng):
        gp, t = 0.37, 2.1
        n = phenomenological_norms("phase", t, gamma_p=gp)
        ks = kraus_phase(phase_p(gp, t))
        for _ in range(20):
            s = random_density_matrix(rng)
            assert np.max(np.abs(reconstruct_phase(n, s) - apply_channel(ks, s))) < 1e-12

    def test_zero_temperature_norms_against_a(self):
        for a, t in ((0.3, 1.0), (0.9, 4.0), (1e-6, 0.5)):
            ga = amplitude_rate_from_a(a, t)
            n = phenomenological_norms("amplitude", t, gamma_a=ga)
            assert n.g_sq_sum == pytest.approx(1 - math.exp(-2 * ga * t), abs=1e-15)
            assert n.g_sq_sum == pytest.approx(a, abs=1e-10)

    def test_populations_only_at_finite_temperature(self, rng):
        a, g, t = 0.45, 0.27, 1.7
        n = phenomenological_norms("amplitude", t, gamma_a=amplitude_rate_from_a(a, t), gamma_T=g)
        ks = kraus_amplitude(a, g)
        for _ in range(10):
            s = random_density_matrix(rng)
            pops = reconstruct_populations(n, s)
            out = apply_channel(ks, s)
            assert np.max(np.abs(pops - [out[0, 0].real, out[1, 1].real])) < 1e-12

    def test_square_root_weights_stored_as_published(self):
        lost = 1 - math.exp(-2 * 0.2 * 3.0)
        n = phenomenological_norms("amplitude", 3.0, gamma_a=0.2, gamma_T=0.3)
        assert n.h_sq_sum == pytest.approx(math.sqrt(lost * 0.3))
        assert n.h_tilde_sq_sum == pytest.approx(math.sqrt(lost * 0.7))

    def test_guards(self):
        with pytest.raises(ParameterError):
            phenomenological_norms("phase", -1.0, gamma_p=0.1)
        with pytest.raises(ParameterError):
            phenomenological_norms("bitflip", 1.0)
