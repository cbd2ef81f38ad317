import math

import numpy as np
import pytest

from qpath_ais.densities import GaussianSpec, make_custom, make_gaussian
from qpath_ais.errors import PreconditionError, TrajectoryDivergedError
from qpath_ais.hmc import HmcConfig, RngStream, hmc_transition, leapfrog
from qpath_ais.paths import QPath


def standard_normal_path():
    h = make_gaussian(GaussianSpec(0.0, 1.0))
    return QPath(h, h, 1.0)


class TestRngStream:
    def test_same_pair_reproduces(self):
        a = RngStream(42, 7).generator().standard_normal(8)
        b = RngStream(42, 7).generator().standard_normal(8)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 7).generator().standard_normal(8)
        b = RngStream(42, 8).generator().standard_normal(8)
        assert not np.array_equal(a, b)

    def test_child_streams_are_stable(self):
        assert RngStream(1, 2).child(3) == RngStream(1, 2).child(3)
        assert RngStream(1, 2).child(3) != RngStream(1, 2).child(4)


class TestLeapfrog:
    def test_zero_momentum_zero_gradient_is_identity(self):
        z, p = leapfrog(lambda x: np.zeros_like(x), np.array([1.0, -2.0]),
                        np.zeros(2), 0.3, 7)
        np.testing.assert_array_equal(z, [1.0, -2.0])
        np.testing.assert_array_equal(p, [0.0, 0.0])

    def test_energy_drift_on_gaussian(self):
        # symplectic integration keeps the Hamiltonian error bounded
        grad = lambda x: -x
        z0, p0 = np.array([1.0]), np.array([0.5])
        h0 = 0.5 * float(z0**2) + 0.5 * float(p0**2)
        z1, p1 = leapfrog(grad, z0, p0, 0.1, 10)
        h1 = 0.5 * float(z1**2) + 0.5 * float(p1**2)
        assert abs(h1 - h0) <= 1e-3

    def test_reversibility(self, rng):
        grad = lambda x: -(x**3)
        for _ in range(20):
            z0 = rng.normal(size=3)
            p0 = rng.normal(size=3)
            z1, p1 = leapfrog(grad, z0, p0, 0.05, 13)
            z2, p2 = leapfrog(grad, z1, -p1, 0.05, 13)
            np.testing.assert_allclose(z2, z0, atol=1e-10)
            np.testing.assert_allclose(-p2, p0, atol=1e-10)

    def test_divergence_signalled(self):
        grad = lambda x: np.full_like(x, np.inf)
        with pytest.raises(TrajectoryDivergedError):
            leapfrog(grad, np.array([0.0]), np.array([1.0]), 0.1, 3)


class TestHmcTransition:
    def test_tiny_step_accepts_and_stays(self):
        path = standard_normal_path()
        cfg = HmcConfig(step_size=1e-12, n_leapfrog=2)
        z, accepted = hmc_transition(path, 0.5, 0.3, cfg, RngStream(1))
        assert accepted
        assert abs(float(z[0]) - 0.3) <= 1e-9

    def test_invariance_long_run(self):
        path = standard_normal_path()
        cfg = HmcConfig()
        gen = RngStream(99).generator()
        n = 10_000
        z = np.zeros((1, 1))
        samples = np.empty(n)
        for i in range(n):
            z, _ = hmc_transition(path, 0.5, z, cfg, gen)
            samples[i] = z[0, 0]
        assert abs(samples.mean()) <= 5.0 / math.sqrt(n)
        assert abs(samples.var() - 1.0) <= 0.1

    def test_determinism(self):
        path = standard_normal_path()
        cfg = HmcConfig()
        out1 = hmc_transition(path, 0.5, np.full((4, 1), 0.2), cfg, RngStream(5, 6))
        out2 = hmc_transition(path, 0.5, np.full((4, 1), 0.2), cfg, RngStream(5, 6))
        np.testing.assert_array_equal(out1[0], out2[0])
        np.testing.assert_array_equal(out1[1], out2[1])

    def test_acceptance_invariant_to_density_scaling(self, gaussian_pair):
        base, target = gaussian_pair
        shift = 7.25  # multiply both densities by e^7.25
        base2 = make_custom(1, lambda z: base.log_density(z) + shift,
                            base.grad_log_density, base.exact_sampler)
        target2 = make_custom(1, lambda z: target.log_density(z) + shift,
                              target.grad_log_density, target.exact_sampler)
        cfg = HmcConfig()
        z0 = np.linspace(-6, 6, 64)[:, None]
        _, acc1 = hmc_transition(QPath(base, target, 0.5), 0.4, z0, cfg, RngStream(3, 1))
        _, acc2 = hmc_transition(QPath(base2, target2, 0.5), 0.4, z0, cfg, RngStream(3, 1))
        np.testing.assert_array_equal(acc1, acc2)

    def test_acceptance_rate_gate(self, gaussian_pair):
        # tuning sanity gate for the frozen defaults at mid-path
        base, target = gaussian_pair
        path = QPath(base, target, 1.0)
        cfg = HmcConfig()
        gen = RngStream(123, 5).generator()
        z = base.exact_sampler(gen, 400)
        rates = []
        for i in range(200):
            z, acc = hmc_transition(path, 0.5, z, cfg, gen)
            if i >= 80:
                rates.append(acc.mean())
        assert 0.6 <= float(np.mean(rates)) <= 0.95

    def test_zero_density_input_rejected(self):
        def ld(z):
            z = np.asarray(z, float).reshape(-1)
            return np.where(np.abs(z) < 1.0, 0.0, -np.inf)

        h = make_custom(1, ld, grad_log_density=lambda z: np.zeros((np.atleast_2d(z).shape[0], 1)))
        path = QPath(h, h, 0.5)
        with pytest.raises(PreconditionError):
            hmc_transition(path, 0.5, 3.0, HmcConfig(), RngStream(0))

    def test_divergent_trajectory_is_rejection(self, gaussian_pair):
        # a huge step on the narrow target blows the trajectory up
        base, target = gaussian_pair
        path = QPath(base, target, 1.0)
        cfg = HmcConfig(step_size=1e6, n_leapfrog=5)
        z, accepted = hmc_transition(path, 1.0, 0.5, cfg, RngStream(8))
        assert not accepted
        assert float(z[0]) == 0.5


class TestHmcConfigValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(PreconditionError):
            HmcConfig(step_size=0.0)
        with pytest.raises(PreconditionError):
            HmcConfig(n_leapfrog=0)
        with pytest.raises(PreconditionError):
            HmcConfig(transitions_per_temperature=-1)
        with pytest.raises(PreconditionError):
            HmcConfig(mass=0.0)

    def test_zero_transitions_allowed(self):
        assert HmcConfig(transitions_per_temperature=0).transitions_per_temperature == 0
