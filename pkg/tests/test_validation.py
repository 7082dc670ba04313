import json

import numpy as np
import pytest

from slmc.linalg import random_orthogonal
from slmc.streams import RandomStream
from slmc.validation import (
    CHECKS,
    ValidationReport,
    check_second_moment_bound,
    check_bias_scaling,
    check_contraction,
    check_moment_recursions,
    check_reductions,
    check_subspace_descent_rate,
    directional_condition,
    second_moment_exact,
    second_moment_monte_carlo,
    run_all,
    stationary_w2,
    subspace_descent_factor,
)

from conftest import random_spd


def _by_name(rep):
    return {c.name: c for c in rep.checks}


def test_report_rendering():
    rep = ValidationReport()
    rep.add("a", True, 1.0, 2.0, 0)
    rep.add("b", False, 3.0, 2.0, 0, "note")
    assert not rep.passed and [c.name for c in rep.failures()] == ["b"]
    text = rep.to_text()
    assert "1/2 checks passed" in text and "FAIL" in text
    assert json.loads(rep.to_json())["checks"][1]["detail"] == "note"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_reductions_hold(seed):
    assert check_reductions(seed).passed


def test_contraction_rates():
    assert check_contraction(0).passed


def test_subspace_descent_rates():
    assert check_subspace_descent_rate(0, runs=200, steps=200).passed


def test_isotropic_subspace_factor_closed_form(rng):
    # Exact expected factor on beta * I is 1 - r/d for any seed.
    f = subspace_descent_factor(4.0 * np.eye(8), 2, 2 / (8 * 4.0), 10, 4000, rng)
    assert f == pytest.approx(0.75, abs=0.01)


def test_moment_check_small_run_is_calibrated():
    rep = check_moment_recursions(seed=3, chains=3000, marks=(5, 50))
    for c in rep.checks:
        if c.name.endswith("exceedance count"):
            assert c.passed


class TestSecondMoment:
    def test_eigenblocks_give_rank(self, rng):
        S = random_spd(rng, 6)
        Q = np.linalg.eigh(S)[1]
        assert second_moment_exact(S, Q[:, :2]) == pytest.approx(2.0, abs=1e-10)
        assert directional_condition(S, Q[:, 3:5]) == pytest.approx(1.0, abs=1e-10)

    def test_random_subspace_never_below_rank(self, rng):
        # Tr(B C) >= r whenever B = W^T S^-1 W and C = W^T S W; the
        # independent route goes through the eigenvalues of C^(1/2) B C^(1/2).
        S = random_spd(rng, 7, 0.2, 5.0)
        for _ in range(20):
            W = random_orthogonal(7, RandomStream(int(rng.integers(1e9))))[:, :3]
            C = W.T @ S @ W
            B = W.T @ np.linalg.inv(S) @ W
            lc, Vc = np.linalg.eigh(C)
            Ch = (Vc * np.sqrt(lc)) @ Vc.T
            mu = np.linalg.eigvalsh(Ch @ B @ Ch)
            assert np.all(mu >= 1 - 1e-10)
            assert second_moment_exact(S, W) == pytest.approx(mu.sum(), rel=1e-10)

    def test_monte_carlo_agrees(self, rng):
        S = random_spd(rng, 4)
        W = np.linalg.qr(rng.standard_normal((4, 2)))[0]
        m, se = second_moment_monte_carlo(S, W, 200_000, rng)
        assert abs(m - second_moment_exact(S, W)) < 4 * se

    def test_check_outcomes(self):
        rep = _by_name(check_second_moment_bound(0))
        assert rep["second moment: eigenblock equality"].passed
        assert rep["second moment: random W, bound r*lambda_max(B C)"].passed
        assert rep["second moment: Monte-Carlo agreement"].passed
        # the unit-constant bound cannot hold off the eigenblocks
        assert not rep["second moment: random W, bound M*r with M=1"].passed


class TestBias:
    def test_stationary_bias_is_first_order(self):
        # The exact stationary W2 bias of preconditioned LMC on a Gaussian
        # shrinks linearly in h, so quartering h divides it by about 4.
        rep = check_bias_scaling(0)
        for c in rep.checks:
            if c.name.endswith("ratio"):
                assert c.measured == pytest.approx(4.0, rel=0.05)
            else:
                assert c.passed

    def test_one_dimensional_closed_form(self):
        # 1-D LMC on N(0, s2) with A = s2: C = 2h s2 / (1 - (1-h)^2) = s2 / (1 - h/2)
        s2, h = 2.0, 0.1
        C = s2 / (1 - h / 2)
        expect = abs(np.sqrt(C) - np.sqrt(s2))
        assert stationary_w2(np.array([[s2]]), np.array([[s2]]), 1, h) == pytest.approx(expect, rel=1e-10)


def test_run_all_subset():
    rep = run_all(0, only=["reductions", "second_moment"])
    assert {c.name.split(":")[0] for c in rep.checks} == {"reduction", "second moment"}
    assert set(CHECKS) == {"reductions", "moments", "contraction", "subspace", "second_moment", "bias"}
