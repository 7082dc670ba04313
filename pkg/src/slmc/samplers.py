"""Langevin step kernels, chain runners and synchronous coupling.

Every kernel works on a single chain (position ``(d,)``) or on an ensemble
(positions ``(n, d)``) in one vectorised call. Oracle calls are counted in
directional-derivative units: ``d`` per full gradient, ``r`` per SLMC step.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import BlockDraw, DivergenceError, EigenblockPartition, sample_block, spd_inv
from .preconditioners import FixedSchedule, Schedule
from .streams import RandomStream, as_stream
from .targets import Potential

log = logging.getLogger(__name__)

SAMPLERS = ("lmc", "plmc", "slmc", "rclmc")


@dataclass(frozen=True)
class ChainState:
    position: np.ndarray
    rng: RandomStream
    step: int = 0
    oracle_calls: np.ndarray | int = 0

    @classmethod
    def start(cls, position, rng=0) -> "ChainState":
        x = np.array(position, dtype=float)
        calls = np.zeros(x.shape[:-1], dtype=np.int64) if x.ndim > 1 else 0
        return cls(x, as_stream(rng), 0, calls)

    @property
    def dim(self) -> int:
        return self.position.shape[-1]

    def _advance(self, x: np.ndarray, calls) -> "ChainState":
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite position after step {self.step + 1}", self.position)
        return replace(self, position=x, step=self.step + 1, oracle_calls=self.oracle_calls + calls)


def _checked_gradient(pot: Potential, x: np.ndarray) -> np.ndarray:
    g = pot.gradient(x)
    if not np.all(np.isfinite(g)):
        raise DivergenceError("non-finite gradient", x)
    return g


def _noise(state: ChainState, xi, shape) -> np.ndarray:
    if xi is None:
        return state.rng.normal(size=shape)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != tuple(shape):
        raise ValueError(f"noise has shape {xi.shape}, expected {tuple(shape)}")
    return xi


def lmc_step(state: ChainState, pot: Potential, h: float, xi=None) -> ChainState:
    """``X <- X - h grad V(X) + sqrt(2h) xi``."""
    x = state.position
    g = _checked_gradient(pot, x)
    z = _noise(state, xi, x.shape)
    return state._advance(x - h * g + np.sqrt(2 * h) * z, state.dim)


def plmc_step(state: ChainState, pot: Potential, A, A_sqrt, h: float, xi=None) -> ChainState:
    """``X <- X - h A grad V(X) + sqrt(2h) A^{1/2} xi``.

    ``A`` and ``A_sqrt`` may carry a leading batch axis matching an ensemble.
    """
    x = state.position
    g = _checked_gradient(pot, x)
    z = _noise(state, xi, x.shape)
    drift = np.einsum("...ij,...j->...i", A, g)
    noise = np.einsum("...ij,...j->...i", A_sqrt, z)
    return state._advance(x - h * drift + np.sqrt(2 * h) * noise, state.dim)


def slmc_step(state: ChainState, pot: Potential, draw: BlockDraw, xi=None) -> ChainState:
    """One SLMC update along a sampled eigenblock ``P = W D W^T``.

    ``X <- X - h_k W D (W^T grad V(X)) + sqrt(2 h_k) W D^{1/2} xi_r`` with
    ``h_k = draw.effective_step``. Only the ``r`` directional derivatives
    ``W^T grad V`` are paid for, and ``xi_r`` is ``r``-dimensional, which
    has the same law as ``P^{1/2}`` applied to a ``d``-dimensional normal.
    """
    x = state.position
    r = draw.W.shape[-1]
    gr = pot.directional_gradient(x, draw.W)
    if not np.all(np.isfinite(gr)):
        raise DivergenceError("non-finite directional gradient", x)
    z = _noise(state, xi, x.shape[:-1] + (r,))
    hk = np.asarray(draw.effective_step, dtype=float)[..., None]
    drift = np.einsum("...dr,...r->...d", draw.W, draw.D * gr)
    noise = np.einsum("...dr,...r->...d", draw.W, np.sqrt(draw.D) * z)
    return state._advance(x - hk * drift + np.sqrt(2 * hk) * noise, draw.rank)


def subspace_gd_step(x, pot: Potential, draw: BlockDraw, counter=None) -> np.ndarray:
    """Random subspace gradient descent ``x <- x - h P grad f(x)``.

    With ``D = I`` and sampling probabilities ``phi``, the draw's effective
    step ``h / phi_i`` turns ``W W^T`` into the scaled projection
    ``P = W W^T / phi_i`` with ``E[P] = I``.
    """
    x = np.asarray(x, dtype=float)
    gr = pot.directional_gradient(x, draw.W, counter)
    hk = np.asarray(draw.effective_step, dtype=float)[..., None]
    return x - hk * np.einsum("...dr,...r->...d", draw.W, gr)


@dataclass
class SamplerConfig:
    kind: str = "lmc"
    h: float = 0.01
    smoothness: float | None = None  # if known, used for the step-size admissibility warning

    def __post_init__(self):
        if self.kind not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.kind!r}; expected one of {SAMPLERS}")
        if not self.h > 0:
            raise ValueError("step size h must be positive")


@dataclass
class Trajectory:
    steps: np.ndarray  # (m,)
    oracle_calls: np.ndarray  # (m,) or (m, n)
    positions: np.ndarray  # (m, d) or (m, n, d)
    schedule_oracle_calls: int = 0
    aborted: bool = False
    message: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.positions[-1]

    def to_csv(self, path) -> None:
        """Columns ``step, oracle_calls, x_1..x_d``; ensembles get a leading
        ``chain`` column."""
        d = self.positions.shape[-1]
        ensemble = self.positions.ndim == 3
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow((["chain"] if ensemble else []) + ["step", "oracle_calls"] + [f"x_{i + 1}" for i in range(d)])
            for j, k in enumerate(self.steps):
                if ensemble:
                    for c in range(self.positions.shape[1]):
                        w.writerow([c, int(k), int(self.oracle_calls[j][c])] + [repr(float(v)) for v in self.positions[j, c]])
                else:
                    w.writerow([int(k), int(self.oracle_calls[j])] + [repr(float(v)) for v in self.positions[j]])


def _sqrt_from_partition(part: EigenblockPartition) -> np.ndarray:
    return part.reconstruct(power=0.5)


def _check_admissible(cfg: SamplerConfig, part: EigenblockPartition) -> None:
    if cfg.smoothness is None or cfg.kind not in ("slmc", "rclmc"):
        return
    bound = float(np.min(part.phi)) / cfg.smoothness
    if cfg.h > bound:
        warnings.warn(f"step size h={cfg.h} exceeds min_i phi_i / M = {bound:.3g}", RuntimeWarning, stacklevel=3)


def step_once(state: ChainState, pot: Potential, cfg: SamplerConfig, schedule: Schedule | None, k: int) -> tuple[ChainState, int]:
    """Advance by one step; returns the new state and the oracle calls spent
    by the schedule itself (gradients for adaptive preconditioners)."""
    extra = 0
    if cfg.kind == "lmc":
        return lmc_step(state, pot, cfg.h), 0
    if schedule is None:
        raise ValueError(f"sampler {cfg.kind!r} needs a preconditioner schedule")
    grad = None
    if schedule.uses_gradient:
        grad = _checked_gradient(pot, state.position)
        extra = state.dim * int(np.prod(state.position.shape[:-1], dtype=int))
    A, part = schedule.next(k, ensemble=state.position, grad=grad)
    if cfg.kind == "plmc":
        return plmc_step(state, pot, A, _sqrt_from_partition(part), cfg.h), extra
    if k == 0:
        _check_admissible(cfg, part)
    batch = state.position.shape[:-1]
    size = None if part.batch_shape or not batch else batch
    draw = sample_block(part, cfg.h, state.rng, size=size)
    return slmc_step(state, pot, draw), extra


def run_chain(
    initial,
    pot: Potential,
    sampler: SamplerConfig,
    schedule: Schedule | None = None,
    steps: int = 1,
    thin: int = 1,
    seed=0,
    recorder=None,
    observer=None,
) -> Trajectory:
    """Run one chain, or an ensemble when ``initial`` is ``(n, d)``.

    Records the state every ``thin`` steps (and always the initial and final
    states). ``recorder(step, state)`` is called at each record if given,
    ``observer(state)`` after every step.
    A divergent chain stops the run; the trajectory keeps the last finite
    record and is flagged ``aborted``.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    thin = max(int(thin), 1)
    if sampler.kind == "rclmc" and schedule is not None and schedule.r != 1:
        raise ValueError("RCLMC is SLMC with rank r = 1")
    state = ChainState.start(initial, seed)
    rec_steps, rec_calls, rec_pos = [], [], []

    def record(s: ChainState):
        rec_steps.append(s.step)
        rec_calls.append(np.copy(s.oracle_calls))
        rec_pos.append(s.position.copy())
        if recorder is not None:
            recorder(s.step, s)

    record(state)
    sched_calls = 0
    aborted, message = False, ""
    for k in range(steps):
        try:
            state, extra = step_once(state, pot, sampler, schedule, k)
        except DivergenceError as exc:
            aborted, message = True, f"step {k + 1}: {exc}"
            log.warning("chain diverged at %s", message)
            break
        sched_calls += extra
        if observer is not None:
            observer(state)
        if state.step % thin == 0 or state.step == steps:
            record(state)
    return Trajectory(
        steps=np.array(rec_steps),
        oracle_calls=np.array(rec_calls),
        positions=np.array(rec_pos),
        schedule_oracle_calls=sched_calls,
        aborted=aborted,
        message=message,
    )


def run_coupled_pair(z0, z0p, pot: Potential, A, h: float, steps: int, seed=0) -> np.ndarray:
    """Two PLMC chains driven by the same noise; returns
    ``||Z_k - Z'_k||^2_{A^{-1}}`` for ``k = 0..steps``."""
    sched = FixedSchedule(A, r=np.shape(A)[0])
    A, A_sqrt = sched.A, _sqrt_from_partition(sched.partition)
    A_inv = spd_inv(A)
    rng = as_stream(seed)
    a = ChainState.start(z0, rng)
    b = ChainState.start(z0p, rng)
    out = np.empty(steps + 1)

    def dist2(u, v):
        diff = u.position - v.position
        return float(diff @ A_inv @ diff)

    out[0] = dist2(a, b)
    for k in range(steps):
        xi = rng.normal(size=a.position.shape)
        a = plmc_step(a, pot, A, A_sqrt, h, xi=xi)
        b = plmc_step(b, pot, A, A_sqrt, h, xi=xi)
        out[k + 1] = dist2(a, b)
    return out
