"""Numerical checks of the sampler identities, rates and bounds.

Each ``check_*`` function is deterministic given its seed and returns a
:class:`ValidationReport`; :func:`run_all` concatenates them. Nothing here
asserts; callers (tests, the ``validate`` command) decide what to do with a
failed check.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .linalg import BlockDraw, EigenDecomposition, partition_matrix, random_orthogonal, sample_block, spd_sqrt, sym_eigen
from .metrics import ensemble_moments, gaussian_w2, plmc_gaussian_moment_recursion, slmc_gaussian_moment_recursion, slmc_stationary_covariance
from .preconditioners import FixedSchedule
from .samplers import ChainState, SamplerConfig, lmc_step, plmc_step, run_chain, run_coupled_pair, slmc_step, subspace_gd_step
from .streams import RandomStream
from .targets import GaussianTarget, ill_conditioned_problem


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    seed: int
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, measured, tolerance, seed, detail="") -> None:
        self.checks.append(CheckResult(name, bool(passed), float(measured), float(tolerance), int(seed), detail))

    def extend(self, other: "ValidationReport") -> "ValidationReport":
        self.checks += other.checks
        return self

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_text(self) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check':<{width}}  result  {'measured':>12}  {'tolerance':>10}  seed  detail"]
        for c in self.checks:
            lines.append(
                f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.measured:>12.4g}  {c.tolerance:>10.3g}  {c.seed:>4}  {c.detail}"
            )
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [asdict(c) for c in self.checks]}, indent=2)


def _random_spd(d, rng, lo=0.5, hi=5.0):
    Q = random_orthogonal(d, rng)
    lam = np.linspace(lo, hi, d)
    return (Q * lam) @ Q.T


# ----------------------------------------------------------------------------
# reductions


def check_reductions(seed: int = 0, d: int = 6, steps: int = 100, h: float = 0.01) -> ValidationReport:
    """Pathwise identities driven by identical noise on a random Gaussian:

    * SLMC with ``r = d`` against PLMC (SLMC receives the rotated noise
      ``Q^T xi``, which has the same law);
    * PLMC with ``A = I`` against LMC, bit for bit;
    * SLMC with ``A = I, r = 1`` against an explicit random-coordinate update,
      also checking that each step moves exactly one coordinate.
    """
    rep = ValidationReport()
    rs = RandomStream(seed)
    pot = GaussianTarget(_random_spd(d, rs.split(0), 0.5, 3.0))
    A = _random_spd(d, rs.split(1), 0.5, 2.0)
    x0 = rs.split(2).normal(size=d)
    noise = rs.split(3).normal(size=(steps, d))

    # SLMC(r = d) vs PLMC
    part = partition_matrix(A, d)
    Q = part.W[0]
    A_sqrt = spd_sqrt(A)
    sel = rs.split(4)
    a, b = ChainState.start(x0, 0), ChainState.start(x0, 0)
    dev = 0.0
    for k in range(steps):
        a = plmc_step(a, pot, A, A_sqrt, h, xi=noise[k])
        draw = sample_block(part, h, sel)
        b = slmc_step(b, pot, draw, xi=Q.T @ noise[k])
        dev = max(dev, float(np.max(np.abs(a.position - b.position))))
    rep.add("reduction: SLMC(r=d) = PLMC", dev <= 1e-12, dev, 1e-12, seed, "max per-step deviation")

    # PLMC(I) vs LMC
    I = np.eye(d)
    a, b = ChainState.start(x0, 0), ChainState.start(x0, 0)
    identical = True
    for k in range(steps):
        a = lmc_step(a, pot, h, xi=noise[k])
        b = plmc_step(b, pot, I, I, h, xi=noise[k])
        identical &= np.array_equal(a.position, b.position)
    dev = float(np.max(np.abs(a.position - b.position)))
    rep.add("reduction: PLMC(I) = LMC", identical, dev, 0.0, seed, "bitwise" if identical else "not bitwise equal")

    # SLMC(I, r = 1) vs random-coordinate LMC
    part = FixedSchedule(r=1, eig=EigenDecomposition(np.ones(d), np.eye(d))).partition
    sel = rs.split(5)
    state = ChainState.start(x0, 0)
    x = x0.copy()
    dev, one_coord = 0.0, True
    for k in range(steps):
        draw = sample_block(part, h, sel)
        i = int(np.argmax(np.abs(draw.W[:, 0])))
        z = noise[k, :1]
        prev = state.position
        state = slmc_step(state, pot, draw, xi=z)
        # x_i <- x_i - (h/phi) d_i V(x) + sqrt(2 h / phi) xi
        g = pot.gradient(x)
        x = x.copy()
        x[i] = x[i] - d * h * g[i] + np.sqrt(2 * d * h) * z[0]
        one_coord &= int(np.count_nonzero(state.position != prev)) <= 1
        dev = max(dev, float(np.max(np.abs(state.position - x))))
    rep.add("reduction: SLMC(I, r=1) = RCLMC", dev <= 1e-12 and one_coord, dev, 1e-12, seed,
            "one coordinate per step" if one_coord else "more than one coordinate moved")
    return rep


# ----------------------------------------------------------------------------
# moment recursions


def check_moment_recursions(seed: int = 0, chains: int = 10_000, marks=(10, 100, 1000), h: float = 0.002) -> ValidationReport:
    """Empirical mean and covariance of ``chains`` independent chains on the
    ill-conditioned 20-dimensional Gaussian against the exact recursions.

    Each entry is compared on the z-scale (difference over its standard
    error); a check passes when no entry at any mark exceeds 3. A second
    line per sampler asks whether the number of exceedances is plausible
    for exact moments, i.e. below the 99.9% quantile of a binomial count
    with the two-sided normal tail probability beyond 3.
    """
    rep = ValidationReport()
    rs = RandomStream(seed)
    P, _ = ill_conditioned_problem(rs.split(0))
    pot = GaussianTarget(P)
    Sigma = pot.covariance
    d = P.shape[0]
    x0 = rs.split(1).normal(size=(chains, d)) + 1.0
    mean0, cov0 = np.ones(d), np.eye(d)
    diag = np.diag([1.0] * 10 + [10.0] * 10)
    N = max(marks)
    cases = [
        ("LMC", SamplerConfig("lmc", h), None, lambda: plmc_gaussian_moment_recursion(Sigma, np.eye(d), h, N, mean0, cov0)),
        ("PLMC diag", SamplerConfig("plmc", h), FixedSchedule(diag, r=d),
         lambda: plmc_gaussian_moment_recursion(Sigma, diag, h, N, mean0, cov0)),
        ("SLMC I r=10", SamplerConfig("slmc", h), FixedSchedule(np.eye(d), r=10),
         lambda: slmc_gaussian_moment_recursion(Sigma, partition_matrix(np.eye(d), 10), h, N, mean0, cov0)),
    ]
    for j, (name, cfg, sched, exact) in enumerate(cases):
        snaps = {}
        run_chain(x0, pot, cfg, sched, steps=N, thin=1, seed=rs.split(2 + j),
                  recorder=lambda k, s: snaps.__setitem__(k, s.position.copy()) if k in marks else None)
        means, covs = exact()
        worst, exceed = 0.0, 0
        for k in marks:
            mu, C, se_mu, se_C = ensemble_moments(snaps[k])
            z_mu = np.abs(mu - means[k]) / se_mu
            iu = np.triu_indices(d)
            z_C = (np.abs(C - covs[k]) / se_C)[iu]
            z = np.concatenate([z_mu, z_C])
            worst = max(worst, float(z.max()))
            exceed += int(np.sum(z > 3.0))
        n_entries = len(marks) * (d + d * (d + 1) // 2)
        rep.add(f"moments: {name}", exceed == 0, worst, 3.0, seed, f"{exceed} of {n_entries} entries beyond 3 standard errors")
        limit = float(stats.binom.ppf(0.999, n_entries, 2 * stats.norm.sf(3.0)))
        rep.add(f"moments: {name} exceedance count", exceed <= limit, exceed, limit, seed,
                f"binomial 99.9% quantile for {n_entries} entries")
    return rep


# ----------------------------------------------------------------------------
# contraction


def _fit_rate(values: np.ndarray, h: float, burn: float = 0.2) -> float:
    """Least-squares slope of ``log values`` against time ``k h`` over the
    final ``1 - burn`` fraction of the series."""
    k = np.arange(len(values))
    start = int(burn * len(values))
    t = k[start:] * h
    return float(np.polyfit(t, np.log(values[start:]), 1)[0])


def check_contraction(seed: int = 0, h: float = 1e-3, steps: int = 5000, d: int = 5) -> ValidationReport:
    """Synchronously coupled PLMC chains; the fitted exponent of
    ``||Z - Z'||^2_{A^{-1}}`` is compared with ``-2m`` (10% tolerance).

    With ``A = Sigma`` the relative convexity is ``m = 1`` and the per-step
    factor is exactly ``(1 - h)^2``. With ``A = I`` on an anisotropic
    Gaussian, ``m`` is the smallest eigenvalue of the precision.
    """
    rep = ValidationReport()
    rs = RandomStream(seed)
    Q = random_orthogonal(d, rs.split(0))
    lam = np.linspace(1.0, 5.0, d)
    P = (Q * lam) @ Q.T
    pot = GaussianTarget(P)
    z0 = rs.split(1).normal(size=d)
    z0p = rs.split(2).normal(size=d)

    dist = run_coupled_pair(z0, z0p, pot, pot.covariance, h, steps, seed=rs.split(3))
    rate = _fit_rate(dist, h)
    rep.add("contraction: A=Sigma rate", abs(rate + 2.0) <= 0.2, rate, 0.2, seed, "fitted exponent vs -2m, m=1")
    factors = dist[1:] / dist[:-1]
    dev = float(np.max(np.abs(factors - (1 - h) ** 2)))
    rep.add("contraction: A=Sigma per-step factor", dev <= 1e-9, dev, 1e-9, seed, "deviation from (1-h)^2")

    m = float(lam.min())
    dist = run_coupled_pair(z0, z0p, pot, np.eye(d), h, steps, seed=rs.split(4))
    rate = _fit_rate(dist, h)
    rep.add("contraction: A=I rate", abs(rate + 2 * m) <= 0.2 * m, rate, 0.2 * m, seed, f"fitted exponent vs -2m, m={m:g}")

    same = run_coupled_pair(z0, z0, pot, np.eye(d), h, 50, seed=rs.split(5))
    rep.add("contraction: identical start stays coupled", np.all(same == 0), float(np.max(same)), 0.0, seed)
    return rep


# ----------------------------------------------------------------------------
# subspace descent


def subspace_descent_factor(H: np.ndarray, r: int, h: float, steps: int, runs: int, rng) -> float:
    """Per-step geometric-mean decay of the run-averaged gap ``f(x_k) - f*``
    for ``f = x^T H x / 2`` under random subspace descent with Haar-random
    ``r``-dimensional subspaces and ``P = (d/r) W W^T``."""
    d = H.shape[0]
    pot = GaussianTarget(H)
    x = rng.normal(size=(runs, d))
    gap0 = float(np.mean(pot.value(x)))
    for _ in range(steps):
        W, _ = np.linalg.qr(rng.normal(size=(runs, d, r)))
        draw = BlockDraw(np.zeros(runs, dtype=int), W, np.ones((runs, r)), np.full(runs, h * d / r), np.full(runs, r))
        x = subspace_gd_step(x, pot, draw)
    gap = float(np.mean(pot.value(x)))
    return (gap / gap0) ** (1.0 / steps)


def check_subspace_descent_rate(seed: int = 0, runs: int = 500, steps: int = 400, d: int = 20, alpha: float = 0.1, beta: float = 10.0) -> ValidationReport:
    """Average gap decay of random subspace descent with base step
    ``r / (d beta)`` (step ``1 / beta`` inside the subspace) against
    ``omega = 1 - r alpha / (d beta)`` plus 0.02."""
    rep = ValidationReport()
    rs = RandomStream(seed)
    Q = random_orthogonal(d, rs.split(0))
    H = (Q * np.linspace(alpha, beta, d)) @ Q.T
    for j, r in enumerate((1, 5, 10)):
        f = subspace_descent_factor(H, r, r / (d * beta), steps, runs, rs.split(1 + j))
        omega = 1 - r * alpha / (d * beta)
        rep.add(f"subspace descent: r={r}", f <= omega + 0.02, f, omega + 0.02, seed, f"omega={omega:.4f}")
    # Isotropic quadratic: the step zeroes the gradient inside each subspace,
    # so the expected gap shrinks by exactly 1 - r/d.
    r = 5
    f = subspace_descent_factor(beta * np.eye(d), r, r / (d * beta), 20, runs * 4, rs.split(9))
    rep.add("subspace descent: isotropic factor", abs(f - (1 - r / d)) <= 0.01, f, 0.01, seed, f"expected {1 - r / d:g}")
    return rep


# ----------------------------------------------------------------------------
# second-moment bound


def second_moment_exact(Sigma: np.ndarray, W: np.ndarray) -> float:
    """``E ||W W^T grad V(Z)||^2_Sigma`` for ``Z ~ N(0, Sigma)``, equal to
    ``Tr(W^T Sigma W W^T Sigma^{-1} W)``."""
    Sinv = np.linalg.inv(Sigma)
    return float(np.trace(W.T @ Sigma @ W @ W.T @ Sinv @ W))


def second_moment_monte_carlo(Sigma: np.ndarray, W: np.ndarray, n: int, rng) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of ``||W W^T grad V(Z)||^2_Sigma``."""
    pot = GaussianTarget(np.linalg.inv(Sigma))
    Z = pot.sample(n, rng)
    v = pot.gradient(Z) @ W @ W.T
    q = np.einsum("ni,ij,nj->n", v, Sigma, v)
    return float(q.mean()), float(q.std(ddof=1) / np.sqrt(n))


def directional_condition(Sigma: np.ndarray, W: np.ndarray) -> float:
    """``lambda_max(W^T Sigma^{-1} W W^T Sigma W)``: equal to 1 when the span
    of ``W`` is invariant under ``Sigma`` and larger otherwise."""
    B = W.T @ np.linalg.inv(Sigma) @ W
    C = W.T @ Sigma @ W
    return float(np.max(np.real(np.linalg.eigvals(B @ C))))


def check_second_moment_bound(seed: int = 0, d: int = 10, r: int = 3, n_random: int = 100, n_mc: int = 100_000) -> ValidationReport:
    """The second-moment bound ``E ||W W^T grad V||^2_A <= M r`` for Gaussian
    targets with ``A = Sigma`` (so ``M = 1``): equality on eigenblocks, the
    inequality on random semi-orthogonal ``W``, and a Monte-Carlo cross-check.
    """
    rep = ValidationReport()
    rs = RandomStream(seed)
    Sigma = _random_spd(d, rs.split(0), 0.2, 5.0)
    Q = sym_eigen(Sigma).eigenvectors

    devs = [abs(second_moment_exact(Sigma, Q[:, i : i + r]) - r) for i in range(0, d - r + 1, r)]
    rep.add("second moment: eigenblock equality", max(devs) <= 1e-9, max(devs), 1e-9, seed, f"r={r}")

    rng = rs.split(1)
    vals, conds = [], []
    for _ in range(n_random):
        W = random_orthogonal(d, rng)[:, :r]
        vals.append(second_moment_exact(Sigma, W))
        conds.append(directional_condition(Sigma, W))
    vals, conds = np.array(vals), np.array(conds)
    n_bad = int(np.sum(vals > r * (1 + 1e-12)))
    rep.add("second moment: random W, bound M*r with M=1", n_bad == 0, float(vals.max()), float(r), seed,
            f"{n_bad} of {n_random} exceed r")
    ok_dir = bool(np.all(vals <= r * conds * (1 + 1e-12)))
    rep.add("second moment: random W, bound r*lambda_max(B C)", ok_dir, float(np.max(vals / (r * conds))), 1.0, seed,
            "directional smoothness bound")

    vals_I = [second_moment_exact(np.eye(d), random_orthogonal(d, rng)[:, :r]) for _ in range(10)]
    dev = float(np.max(np.abs(np.array(vals_I) - r)))
    rep.add("second moment: Sigma=I gives r", dev <= 1e-9, dev, 1e-9, seed)

    W = random_orthogonal(d, rng)[:, :r]
    mc, se = second_moment_monte_carlo(Sigma, W, n_mc, rs.split(2))
    exact = second_moment_exact(Sigma, W)
    z = abs(mc - exact) / se
    rep.add("second moment: Monte-Carlo agreement", z <= 3.0, z, 3.0, seed, f"closed form {exact:.4f}, MC {mc:.4f} +- {se:.4f}")
    return rep


# ----------------------------------------------------------------------------
# bias scaling


def stationary_w2(Sigma: np.ndarray, A: np.ndarray, r: int, h: float) -> float:
    """W2 between the SLMC stationary Gaussian (PLMC when ``r = d``) and
    ``N(0, Sigma)``; ``h`` is the per-block step under uniform sampling."""
    part = partition_matrix(A, r)
    C = slmc_stationary_covariance(Sigma, part, h / part.n_blocks)
    d = len(Sigma)
    return gaussian_w2(np.zeros(d), C, np.zeros(d), Sigma)


def check_bias_scaling(seed: int = 0, h: float = 0.1, ranks=(20, 5, 10)) -> ValidationReport:
    """Stationary W2 bias at ``h, h/4, h/16`` on the ill-conditioned Gaussian
    with ``A = Sigma``. The check asks for the square-root law, a ratio in
    [1.9, 2.1] per quartering; it also reports monotone decrease."""
    rep = ValidationReport()
    P, _ = ill_conditioned_problem(RandomStream(seed).split(0))
    Sigma = np.linalg.inv(P)
    Sigma = 0.5 * (Sigma + Sigma.T)
    d = len(Sigma)
    for r in ranks:
        name = "PLMC" if r == d else f"SLMC r={r}"
        w = [stationary_w2(Sigma, Sigma, r, h / 4**j) for j in range(3)]
        ratios = [w[j] / w[j + 1] for j in range(2)]
        ok = all(1.9 <= q <= 2.1 for q in ratios)
        rep.add(f"bias: {name} sqrt(h) ratio", ok, ratios[0], 2.0, seed,
                f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}; W2 {w[0]:.3g} -> {w[2]:.3g}")
        rep.add(f"bias: {name} decreasing", w[0] > w[1] > w[2] > 0, w[2], 0.0, seed)
    return rep


CHECKS = {
    "reductions": check_reductions,
    "moments": check_moment_recursions,
    "contraction": check_contraction,
    "subspace": check_subspace_descent_rate,
    "second_moment": check_second_moment_bound,
    "bias": check_bias_scaling,
}


def run_all(seed: int = 0, only=None) -> ValidationReport:
    rep = ValidationReport()
    for name, fn in CHECKS.items():
        if only is None or name in only:
            rep.extend(fn(seed))
    return rep
