import numpy as np
import pytest

from slmc.linalg import DivergenceError, EigenDecomposition, partition_matrix, sample_block, spd_sqrt
from slmc.metrics import ensemble_moments, plmc_gaussian_moment_recursion
from slmc.preconditioners import FixedSchedule, adagrad_schedule, fixed_schedule
from slmc.samplers import (
    ChainState,
    SamplerConfig,
    Trajectory,
    lmc_step,
    plmc_step,
    run_chain,
    run_coupled_pair,
    slmc_step,
    step_once,
    subspace_gd_step,
)
from slmc.streams import RandomStream
from slmc.targets import FunnelTarget, GaussianTarget, OracleCounter, ill_conditioned_problem

from conftest import random_spd


class TestKernels:
    def test_lmc_from_mode(self):
        pot = GaussianTarget(np.diag([2.0, 3.0]))
        xi = np.array([0.3, -1.1])
        s = lmc_step(ChainState.start(np.zeros(2)), pot, 0.05, xi=xi)
        np.testing.assert_array_equal(s.position, np.sqrt(0.1) * xi)
        assert s.step == 1 and s.oracle_calls == 2

    def test_lmc_deterministic_limb(self):
        s = lmc_step(ChainState.start([1.0]), GaussianTarget([[1.0]]), 0.1, xi=np.zeros(1))
        assert s.position[0] == pytest.approx(0.9)

    def test_plmc_identity_is_lmc_bitwise(self, rng):
        pot = GaussianTarget(random_spd(rng, 5))
        a = b = ChainState.start(rng.standard_normal(5))
        for _ in range(50):
            xi = rng.standard_normal(5)
            a = lmc_step(a, pot, 0.02, xi=xi)
            b = plmc_step(b, pot, np.eye(5), np.eye(5), 0.02, xi=xi)
        assert a.position.tobytes() == b.position.tobytes()

    def test_plmc_covariance_preconditioning(self, rng):
        pot = GaussianTarget(random_spd(rng, 4))
        Sigma = pot.covariance
        x, xi, h = rng.standard_normal(4), rng.standard_normal(4), 0.1
        s = plmc_step(ChainState.start(x), pot, Sigma, spd_sqrt(Sigma), h, xi=xi)
        np.testing.assert_allclose(s.position, (1 - h) * x + np.sqrt(2 * h) * spd_sqrt(Sigma) @ xi, atol=1e-12)

    def test_slmc_full_rank_matches_plmc(self, rng):
        pot = GaussianTarget(random_spd(rng, 4))
        A = random_spd(rng, 4, 0.3, 2.0)
        part = partition_matrix(A, 4)
        Q = part.W[0]
        a = b = ChainState.start(rng.standard_normal(4))
        for _ in range(100):
            xi = rng.standard_normal(4)
            a = plmc_step(a, pot, A, spd_sqrt(A), 0.05, xi=xi)
            b = slmc_step(b, pot, sample_block(part, 0.05, RandomStream(0)), xi=Q.T @ xi)
            assert np.max(np.abs(a.position - b.position)) < 1e-12

    def test_rclmc_moves_one_coordinate(self, rng):
        pot = GaussianTarget(random_spd(rng, 6))
        part = FixedSchedule(r=1, eig=EigenDecomposition(np.ones(6), np.eye(6))).partition
        s = ChainState.start(rng.standard_normal(6), RandomStream(1))
        for _ in range(50):
            prev = s.position
            s = slmc_step(s, pot, sample_block(part, 0.01, s.rng))
            assert np.count_nonzero(s.position != prev) == 1
        assert s.oracle_calls == 50

    def test_divergence_raises(self):
        pot = FunnelTarget()
        with pytest.raises(DivergenceError) as info:
            lmc_step(ChainState.start([1.0, -800.0]), pot, 0.1)
        np.testing.assert_array_equal(info.value.position, [1.0, -800.0])

    def test_noise_shape_checked(self):
        with pytest.raises(ValueError):
            lmc_step(ChainState.start(np.zeros(2)), GaussianTarget(np.eye(2)), 0.1, xi=np.zeros(3))


class TestSubspaceDescent:
    def test_full_rank_is_gradient_descent(self, rng):
        pot = GaussianTarget(random_spd(rng, 5))
        part = partition_matrix(np.eye(5), 5)
        x = rng.standard_normal(5)
        c = OracleCounter()
        y = subspace_gd_step(x, pot, sample_block(part, 0.1, RandomStream(0)), c)
        np.testing.assert_allclose(y, x - 0.1 * pot.gradient(x), atol=1e-14)
        assert c.count == 5

    def test_never_increases_under_small_step(self, rng):
        d, r, alpha, beta = 6, 2, 0.5, 4.0
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        pot = GaussianTarget((Q * np.linspace(alpha, beta, d)) @ Q.T)
        h = 1.0 / (beta * d / r)
        x = rng.standard_normal(d)
        part = partition_matrix(np.eye(d), r)
        s = RandomStream(3)
        for _ in range(200):
            y = subspace_gd_step(x, pot, sample_block(part, h, s))
            assert pot.value(y) <= pot.value(x) + 1e-15
            x = y


class TestRunChain:
    def test_zero_steps(self):
        tr = run_chain(np.ones(3), GaussianTarget(np.eye(3)), SamplerConfig("lmc", 0.1), steps=0)
        assert tr.positions.shape == (1, 3)
        np.testing.assert_array_equal(tr.final, np.ones(3))

    def test_deterministic(self, rng):
        pot = GaussianTarget(random_spd(rng, 4))
        args = (rng.standard_normal((10, 4)), pot, SamplerConfig("slmc", 0.01), fixed_schedule(np.eye(4), 2))
        a = run_chain(*args, steps=40, thin=7, seed=5)
        b = run_chain(*args, steps=40, thin=7, seed=5)
        assert a.positions.tobytes() == b.positions.tobytes()
        assert list(a.steps) == [0, 7, 14, 21, 28, 35, 40]

    @pytest.mark.parametrize(
        "kind,r,per_step",
        [("lmc", None, 20), ("plmc", 20, 20), ("slmc", 10, 10), ("slmc", 5, 5), ("rclmc", 1, 1)],
    )
    def test_oracle_accounting(self, kind, r, per_step):
        P, _ = ill_conditioned_problem(RandomStream(0))
        pot = GaussianTarget(P)
        sched = None if r is None else fixed_schedule(np.eye(20), r)
        x0 = RandomStream(1).normal(size=20) + 1
        tr = run_chain(x0, pot, SamplerConfig(kind, 0.005), sched, steps=2000, thin=500, seed=2)
        np.testing.assert_array_equal(tr.oracle_calls, tr.steps * per_step)
        assert tr.oracle_calls[-1] == 2000 * per_step

    def test_ensemble_accounting_excludes_schedule_gradients(self):
        tr = run_chain(np.zeros((8, 2)), FunnelTarget(), SamplerConfig("slmc", 0.001), adagrad_schedule(1), steps=30, seed=0)
        np.testing.assert_array_equal(tr.oracle_calls[-1], np.full(8, 30))
        assert tr.schedule_oracle_calls == 30 * 8 * 2

    def test_divergence_aborts_with_last_finite_record(self):
        pot = GaussianTarget(np.diag([1.0, 1000.0]))
        tr = run_chain(np.ones(2), pot, SamplerConfig("lmc", 0.5), steps=1000, seed=0)
        assert tr.aborted and "non-finite" in tr.message
        assert np.all(np.isfinite(tr.positions))
        assert tr.steps[-1] < 1000

    def test_rclmc_requires_rank_one(self):
        with pytest.raises(ValueError, match="rank"):
            run_chain(np.zeros(4), GaussianTarget(np.eye(4)), SamplerConfig("rclmc", 0.1), fixed_schedule(np.eye(4), 2))

    def test_missing_schedule(self):
        with pytest.raises(ValueError, match="schedule"):
            run_chain(np.zeros(2), GaussianTarget(np.eye(2)), SamplerConfig("slmc", 0.1), None, steps=1)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig("hmc", 0.1)
        with pytest.raises(ValueError):
            SamplerConfig("lmc", 0.0)

    def test_admissibility_warning(self):
        pot = GaussianTarget(np.eye(2))
        cfg = SamplerConfig("slmc", 1.0, smoothness=1.0)
        with pytest.warns(RuntimeWarning, match="exceeds"):
            step_once(ChainState.start(np.zeros(2)), pot, cfg, fixed_schedule(np.eye(2), 1), 0)

    def test_lmc_moments_match_recursion(self):
        # Small target so that only a handful of entries are compared.
        P = np.array([[2.0, 0.5], [0.5, 1.0]])
        pot = GaussianTarget(P)
        x0 = RandomStream(0).normal(size=(10_000, 2)) + 1
        tr = run_chain(x0, pot, SamplerConfig("lmc", 0.01), steps=2000, thin=2000, seed=1)
        means, covs = plmc_gaussian_moment_recursion(pot.covariance, np.eye(2), 0.01, 2000, np.ones(2), np.eye(2))
        mu, C, se_mu, se_C = ensemble_moments(tr.final)
        assert np.all(np.abs(mu - means[-1]) < 3 * se_mu)
        assert np.all(np.abs(C - covs[-1]) < 3 * se_C)


class TestCoupling:
    def test_identical_starts(self, rng):
        pot = GaussianTarget(random_spd(rng, 3))
        z = rng.standard_normal(3)
        np.testing.assert_array_equal(run_coupled_pair(z, z, pot, np.eye(3), 0.01, 30), 0.0)

    def test_covariance_preconditioner_factor(self, rng):
        pot = GaussianTarget(random_spd(rng, 3))
        out = run_coupled_pair(rng.standard_normal(3), rng.standard_normal(3), pot, pot.covariance, 0.01, 100)
        np.testing.assert_allclose(out[1:] / out[:-1], 0.99**2, rtol=1e-10)


def test_trajectory_csv(tmp_path):
    tr = run_chain(np.zeros((2, 3)), GaussianTarget(np.eye(3)), SamplerConfig("lmc", 0.1), steps=4, thin=2, seed=0)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "chain,step,oracle_calls,x_1,x_2,x_3"
    assert len(lines) == 1 + 3 * 2
    single = run_chain(np.zeros(3), GaussianTarget(np.eye(3)), SamplerConfig("lmc", 0.1), steps=2, seed=0)
    single.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "step,oracle_calls,x_1,x_2,x_3"
    assert rows[2].startswith("1,3,")
    assert isinstance(single, Trajectory)
