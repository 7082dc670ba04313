"""Configurable experiments on the Gaussian, logistic-regression and funnel
targets, plus the presets that regenerate each figure panel.

A config describes one experiment family. Its top-level sampler settings are
defaults for every *arm* (one curve in a figure); ``arms`` lists per-curve
overrides. Repetition ``j`` uses the root seed ``seed + j``; within a
repetition every arm sees the same target, initial ensemble and noise
stream, so arms are compared under common random numbers.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import norm

from . import svg
from .linalg import EigenDecomposition, n_blocks, sym_eigen
from .metrics import abs_sum_gaussian_mean, ks_statistic_1d, ksd
from .preconditioners import (
    AdagradSchedule,
    AverageHessianSchedule,
    FixedSchedule,
    RMSPropSchedule,
    Schedule,
    smoothness_phi,
)
from .samplers import SAMPLERS, SamplerConfig, Trajectory, run_chain
from .streams import RandomStream
from .targets import (
    FUNNEL_ROTATION,
    FunnelTarget,
    GaussianTarget,
    LogisticPosterior,
    Potential,
    RotatedTarget,
    generate_logistic_data,
    ill_conditioned_problem,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("gaussian", "logistic", "funnel", "custom")
SCHEDULES = ("identity", "diagonal", "matrix", "covariance", "rotated", "avg_hessian", "rmsprop", "adagrad")
CONVENTIONS = ("per_block", "base")
ERR_MODES = ("ensemble", "running")
ARM_KEYS = ("label", "sampler", "schedule", "h", "rank", "phi", "step_convention")

# Per-kind defaults for fields left unset.
KIND_DEFAULTS = {
    "gaussian": dict(dim=20, steps=20000, h=0.01, ensemble=100, thin=100, repetitions=1),
    "custom": dict(steps=1000, h=0.01, ensemble=100, thin=10, repetitions=1),
    "logistic": dict(dim=2, steps=200, h=0.01, ensemble=100, thin=5, repetitions=20, rank=1),
    "funnel": dict(dim=2, steps=5000, h=0.003, ensemble=100, thin=250, repetitions=20, rank=1),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ExperimentConfig:
    experiment: str = "gaussian"
    sampler: str = "slmc"
    schedule: dict = field(default_factory=lambda: {"kind": "identity"})
    h: float | None = None
    steps: int | None = None
    rank: int | None = None
    phi: str | list = "uniform"
    step_convention: str = "per_block"
    ensemble: int | None = None
    repetitions: int | None = None
    seed: int = 0
    thin: int | None = None
    dim: int | None = None
    err_mode: str = "ensemble"
    funnel_sigma: float = 3.0
    rotate: bool = False
    n_data: int = 100
    precision: list | None = None
    label: str | None = None
    arms: list = field(default_factory=list)
    out: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if not (v is None and k in ("precision", "out"))}

    def arm_configs(self) -> list["ExperimentConfig"]:
        """One fully resolved config per arm (a config without ``arms`` is a
        single arm)."""
        if not self.arms:
            if self.label:
                return [self]
            c = copy.deepcopy(self)
            c.label = _default_label(c)
            return [c]
        out = []
        for over in self.arms:
            c = copy.deepcopy(self)
            c.arms = []
            for k, v in over.items():
                setattr(c, k, copy.deepcopy(v))
            c.label = over.get("label") or _default_label(c)
            out.append(c)
        return out

    @property
    def n_blocks(self) -> int:
        return n_blocks(self.dim, self.rank)

    @property
    def base_step(self) -> float:
        """Step size passed to the sampler. Under ``per_block`` the configured
        ``h`` is the per-block step for uniform sampling, so the base step is
        ``h / n_blocks``."""
        if self.sampler in ("slmc", "rclmc") and self.step_convention == "per_block":
            return self.h / self.n_blocks
        return self.h


def _default_label(c: ExperimentConfig) -> str:
    if c.sampler in ("lmc", "rclmc"):
        return c.sampler.upper()
    s = c.schedule["kind"]
    return f"{c.sampler.upper()} {s} r={c.rank}" if c.sampler == "slmc" else f"PLMC {s}"


# ----------------------------------------------------------------------------
# parsing and validation


def _as_int(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    try:
        iv = int(v) if not isinstance(v, float) or float(v).is_integer() else None
    except ValueError:
        iv = None
    if iv is None:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and iv < lo:
        raise ConfigError(path, f"must be >= {lo}, got {iv}")
    return iv


def _as_float(v, path, positive=False):
    if isinstance(v, bool):
        raise ConfigError(path, f"expected a number, got {v!r}")
    try:
        f = float(v)  # YAML reads 1e-3 (no dot) as a string
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {v!r}") from None
    if not np.isfinite(f) or (positive and f <= 0):
        raise ConfigError(path, f"must be a {'positive ' if positive else ''}finite number, got {v!r}")
    return f


def _choice(v, options, path):
    if v not in options:
        raise ConfigError(path, f"unknown value {v!r}; expected one of {', '.join(options)}")
    return v


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected a mapping, got {type(d).__name__}")
    for k in d:
        if k not in allowed:
            where = f"{path}.{k}" if path else str(k)
            raise ConfigError(where, "unknown key")


def _normalise_schedule(s, path) -> dict:
    if isinstance(s, str):
        s = {"kind": s}
    _check_keys(s, ("kind", "values", "cap"), path)
    if "kind" not in s:
        raise ConfigError(f"{path}.kind", "missing")
    out = {"kind": _choice(s["kind"], SCHEDULES, f"{path}.kind")}
    if "values" in s and s["values"] is not None:
        vals = s["values"]
        if not isinstance(vals, list):
            raise ConfigError(f"{path}.values", "expected a list")
        out["values"] = [
            [_as_float(x, f"{path}.values[{i}][{j}]") for j, x in enumerate(row)] if isinstance(row, list) else _as_float(row, f"{path}.values[{i}]")
            for i, row in enumerate(vals)
        ]
    if "cap" in s:
        out["cap"] = _as_float(s["cap"], f"{path}.cap", positive=True)
    if out["kind"] in ("diagonal", "matrix") and "values" not in out:
        raise ConfigError(f"{path}.values", f"required for a {out['kind']} schedule")
    return out


def _normalise_phi(phi, path):
    if isinstance(phi, str):
        return _choice(phi, ("uniform", "smoothness"), path)
    if isinstance(phi, list):
        return [_as_float(x, f"{path}[{i}]", positive=True) for i, x in enumerate(phi)]
    raise ConfigError(path, f"expected 'uniform', 'smoothness' or a list, got {phi!r}")


def _resolve(raw: dict) -> ExperimentConfig:
    names = [f.name for f in fields(ExperimentConfig)]
    _check_keys(raw, names, "")
    kind = _choice(raw.get("experiment", "gaussian"), EXPERIMENTS, "experiment")
    d = dict(KIND_DEFAULTS[kind])
    d.update({k: v for k, v in raw.items() if v is not None})
    d["experiment"] = kind

    c = ExperimentConfig()
    c.experiment = kind
    c.sampler = _choice(d.get("sampler", "slmc"), SAMPLERS, "sampler")
    c.schedule = _normalise_schedule(d.get("schedule", "identity"), "schedule")
    c.h = _as_float(d["h"], "h", positive=True)
    c.steps = _as_int(d["steps"], "steps", lo=0)
    c.ensemble = _as_int(d["ensemble"], "ensemble", lo=1)
    c.repetitions = _as_int(d["repetitions"], "repetitions", lo=1)
    c.seed = _as_int(d.get("seed", 0), "seed", lo=0)
    c.thin = _as_int(d["thin"], "thin", lo=1)
    c.step_convention = _choice(d.get("step_convention", "per_block"), CONVENTIONS, "step_convention")
    c.err_mode = _choice(d.get("err_mode", "ensemble"), ERR_MODES, "err_mode")
    c.funnel_sigma = _as_float(d.get("funnel_sigma", 3.0), "funnel_sigma", positive=True)
    if not isinstance(d.get("rotate", False), bool):
        raise ConfigError("rotate", f"expected true or false, got {d['rotate']!r}")
    c.rotate = d.get("rotate", False)
    c.n_data = _as_int(d.get("n_data", 100), "n_data", lo=1)
    c.phi = _normalise_phi(d.get("phi", "uniform"), "phi")
    c.label = None if d.get("label") is None else str(d["label"])
    c.out = None if d.get("out") is None else str(d["out"])

    if kind == "custom":
        if "precision" not in d:
            raise ConfigError("precision", "required for a custom experiment")
        P = d["precision"]
        if not isinstance(P, list) or not P:
            raise ConfigError("precision", "expected a diagonal list or a list of rows")
        c.precision = _normalise_schedule({"kind": "matrix", "values": P}, "precision")["values"]
        c.dim = len(c.precision)
    else:
        if "precision" in raw:
            raise ConfigError("precision", f"only valid for custom experiments, not {kind}")
        c.dim = KIND_DEFAULTS[kind]["dim"]
    if "dim" in raw and _as_int(raw["dim"], "dim", lo=1) != c.dim:
        raise ConfigError("dim", f"{kind} experiment has dimension {c.dim}, got {raw['dim']}")
    c.rank = _as_int(d.get("rank", c.dim), "rank", lo=1)

    arms = d.get("arms", [])
    if not isinstance(arms, list):
        raise ConfigError("arms", "expected a list of overrides")
    c.arms = []
    for i, a in enumerate(arms):
        path = f"arms[{i}]"
        _check_keys(a, ARM_KEYS, path)
        o = {}
        if "label" in a:
            o["label"] = str(a["label"])
        if "sampler" in a:
            o["sampler"] = _choice(a["sampler"], SAMPLERS, f"{path}.sampler")
        if "schedule" in a:
            o["schedule"] = _normalise_schedule(a["schedule"], f"{path}.schedule")
        if "h" in a:
            o["h"] = _as_float(a["h"], f"{path}.h", positive=True)
        if "rank" in a:
            o["rank"] = _as_int(a["rank"], f"{path}.rank", lo=1)
        if "phi" in a:
            o["phi"] = _normalise_phi(a["phi"], f"{path}.phi")
        if "step_convention" in a:
            o["step_convention"] = _choice(a["step_convention"], CONVENTIONS, f"{path}.step_convention")
        c.arms.append(o)

    for i, arm in enumerate(c.arm_configs()):
        _check_admissible(arm, f"arms[{i}]" if c.arms else "")
    return c


def _check_admissible(c: ExperimentConfig, prefix: str) -> None:
    def p(key):
        return f"{prefix}.{key}" if prefix else key

    kind = c.schedule["kind"]
    if not 1 <= c.rank <= c.dim:
        raise ConfigError(p("rank"), f"must lie in [1, {c.dim}], got {c.rank}")
    if c.sampler == "rclmc":
        if c.rank != 1:
            raise ConfigError(p("rank"), f"RCLMC is SLMC with rank 1; got rank {c.rank}")
        if kind != "identity":
            raise ConfigError(p("schedule"), "RCLMC uses the identity preconditioner")
    if kind in ("covariance",) and c.experiment not in ("gaussian", "custom"):
        raise ConfigError(p("schedule.kind"), "covariance preconditioning needs a Gaussian target")
    if kind == "rotated" and c.experiment != "gaussian":
        raise ConfigError(p("schedule.kind"), "rotated blocks are defined for the gaussian experiment only")
    if kind == "diagonal" and len(c.schedule["values"]) != c.dim:
        raise ConfigError(p("schedule.values"), f"need {c.dim} diagonal entries, got {len(c.schedule['values'])}")
    if kind == "matrix":
        M = c.schedule["values"]
        if len(M) != c.dim or any(not isinstance(row, list) or len(row) != c.dim for row in M):
            raise ConfigError(p("schedule.values"), f"need a {c.dim}x{c.dim} matrix")
    if kind in ("rmsprop", "adagrad", "avg_hessian") and c.sampler == "lmc":
        raise ConfigError(p("sampler"), f"LMC ignores preconditioners; use plmc or slmc with {kind}")
    if isinstance(c.phi, list) and len(c.phi) != c.n_blocks:
        raise ConfigError(p("phi"), f"need one probability per block ({c.n_blocks}), got {len(c.phi)}")
    if c.phi == "smoothness" and (c.experiment not in ("gaussian", "custom") or kind in ("avg_hessian", "rmsprop", "adagrad")):
        raise ConfigError(p("phi"), "smoothness-proportional sampling needs a fixed schedule on a Gaussian target")
    if c.err_mode == "running" and c.experiment not in ("gaussian", "custom"):
        raise ConfigError(p("err_mode"), "only meaningful for Gaussian experiments")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment config, filling defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a mapping")
    return _resolve(raw)


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# ----------------------------------------------------------------------------
# presets

_FIG1_DIAG = [1.0] * 10 + [10.0] * 10

PRESETS = {
    "fig1-topleft": dict(
        experiment="gaussian", err_mode="running", schedule="identity",
        arms=[
            dict(label="LMC", sampler="lmc"),
            dict(label="RCLMC", sampler="rclmc", rank=1),
            dict(label="SLMC r=5", sampler="slmc", rank=5),
            dict(label="SLMC r=10", sampler="slmc", rank=10),
        ],
    ),
    "fig1-topright": dict(
        experiment="gaussian", err_mode="running",
        arms=[
            dict(label="LMC", sampler="lmc"),
            dict(label="RCLMC", sampler="rclmc", rank=1, schedule="identity"),
            dict(label="PLMC diag", sampler="plmc", schedule=dict(kind="diagonal", values=_FIG1_DIAG)),
            dict(label="SLMC diag r=5", sampler="slmc", rank=5, schedule=dict(kind="diagonal", values=_FIG1_DIAG)),
            dict(label="SLMC diag r=10", sampler="slmc", rank=10, schedule=dict(kind="diagonal", values=_FIG1_DIAG)),
        ],
    ),
    "fig1-bottomleft": dict(
        experiment="gaussian", err_mode="running",
        arms=[
            dict(label="LMC", sampler="lmc", h=0.01),
            dict(label="RCLMC", sampler="rclmc", rank=1, schedule="identity", h=0.01),
            dict(label="SLMC eig r=5", sampler="slmc", rank=5, schedule="covariance", h=0.5),
            dict(label="SLMC eig r=10", sampler="slmc", rank=10, schedule="covariance", h=0.5),
        ],
    ),
    "fig1-bottomright": dict(
        experiment="gaussian", err_mode="running", schedule="identity",
        arms=[
            dict(label="LMC", sampler="lmc"),
            dict(label="SLMC r=10", sampler="slmc", rank=10),
            dict(label="SLMC r=5", sampler="slmc", rank=5),
            dict(label="SLMC rotated r=5", sampler="slmc", rank=5, schedule="rotated"),
        ],
    ),
    "fig2": dict(
        experiment="logistic", sampler="slmc", rank=1, repetitions=1,
        arms=[
            dict(label="identity h=0.01", schedule="identity", h=0.01),
            dict(label="identity h=0.1", schedule="identity", h=0.1),
            dict(label="avg Hessian h=0.5", schedule="avg_hessian", h=0.5),
        ],
    ),
    "fig3-ksd": dict(
        experiment="logistic", sampler="slmc", rank=1, repetitions=20,
        arms=[
            dict(label="identity h=0.01", schedule="identity", h=0.01),
            dict(label="identity h=0.1", schedule="identity", h=0.1),
            dict(label="avg Hessian h=0.5", schedule="avg_hessian", h=0.5),
        ],
    ),
    "fig4-funnel": dict(
        experiment="funnel", sampler="slmc", rank=1, rotate=False,
        arms=[
            dict(label="identity", schedule="identity"),
            dict(label="RMSProp", schedule="rmsprop"),
            dict(label="Adagrad", schedule="adagrad"),
        ],
    ),
    "fig5-rotated": dict(
        experiment="funnel", sampler="slmc", rank=1, rotate=True,
        arms=[
            dict(label="identity", schedule="identity"),
            dict(label="RMSProp", schedule="rmsprop"),
            dict(label="Adagrad", schedule="adagrad"),
        ],
    ),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    """Config for a named figure panel; keyword overrides replace top-level
    keys (e.g. ``steps=5000``)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    raw = copy.deepcopy(PRESETS[name])
    raw.update(overrides)
    return _resolve(raw)


# ----------------------------------------------------------------------------
# reports


@dataclass
class MetricSeries:
    arm: str
    metric: str
    repetition: int
    seed: int
    steps: np.ndarray
    oracle_calls: np.ndarray
    values: np.ndarray
    ensemble_size: int
    aborted: bool = False

    @property
    def name(self) -> str:
        return f"{self.arm}/{self.metric}"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    series: list[MetricSeries] = field(default_factory=list)
    runtime: float = 0.0
    samples: dict = field(default_factory=dict)  # arm label -> (n, d) points from the first repetition
    extras: dict = field(default_factory=dict)

    def arms(self) -> list[str]:
        seen = []
        for s in self.series:
            if s.arm not in seen:
                seen.append(s.arm)
        return seen

    def select(self, arm: str | None = None, metric: str | None = None) -> list[MetricSeries]:
        return [s for s in self.series if (arm is None or s.arm == arm) and (metric is None or s.metric == metric)]

    def final_values(self, arm: str, metric: str) -> np.ndarray:
        """Last recorded value of each repetition, in repetition order."""
        return np.array([s.values[-1] for s in self.select(arm, metric)])

    def aggregate(self, arm: str, metric: str):
        """Mean across repetitions at each recorded step. Repetitions cut
        short by a divergence only contribute to the steps they reached.
        Returns ``(steps, oracle_calls, mean)``."""
        runs = self.select(arm, metric)
        if not runs:
            return np.empty(0), np.empty(0), np.empty(0)
        longest = max(runs, key=lambda s: len(s.steps))
        total = np.zeros(len(longest.steps))
        count = np.zeros(len(longest.steps))
        for s in runs:
            total[: len(s.values)] += s.values
            count[: len(s.values)] += 1
        return longest.steps.copy(), longest.oracle_calls.copy(), total / count

    def rows(self):
        for s in self.series:
            for k, c, v in zip(s.steps, s.oracle_calls, s.values):
                yield int(k), int(c), s.name, float(v), s.ensemble_size, s.seed


# ----------------------------------------------------------------------------
# runners


@dataclass
class _Problem:
    pot: Potential
    x0: np.ndarray
    stream: RandomStream  # noise for the chains
    U: np.ndarray | None = None
    true_mean: float | None = None


def _schedule(c: ExperimentConfig, prob: _Problem) -> Schedule | None:
    kind = c.schedule["kind"]
    cap = c.schedule.get("cap", 1e6)
    d, r = c.dim, c.rank if c.sampler != "plmc" else c.dim
    if c.sampler == "lmc":
        return None
    phi = None if c.phi == "uniform" else c.phi
    if kind in ("rmsprop", "adagrad"):
        cls = RMSPropSchedule if kind == "rmsprop" else AdagradSchedule
        return cls(r, phi, cap=cap)
    if kind == "avg_hessian":
        return AverageHessianSchedule(prob.pot, r, phi, cap=cap)
    if kind == "identity":
        eig = EigenDecomposition(np.ones(d), np.eye(d))
    elif kind == "diagonal":
        eig = sym_eigen(np.diag(c.schedule["values"]))
    elif kind == "matrix":
        eig = sym_eigen(np.array(c.schedule["values"]))
    elif kind == "covariance":
        eig = sym_eigen(prob.pot.covariance)
    elif kind == "rotated":
        basis = np.eye(d)
        basis[:10, :10] = prob.U
        eig = EigenDecomposition.from_basis(np.ones(d), basis)
    else:  # pragma: no cover - guarded by validation
        raise ConfigError("schedule.kind", kind)
    if c.phi == "smoothness":
        base = FixedSchedule(r=r, cap=cap, eig=eig)
        phi = smoothness_phi(base.partition, prob.pot.hessian(np.zeros(d)))
    return FixedSchedule(r=r, phi=phi, cap=cap, eig=eig)


def _run_arm(c: ExperimentConfig, prob: _Problem, recorder=None, observer=None) -> Trajectory:
    sched = _schedule(c, prob)
    sampler = SamplerConfig(c.sampler, c.base_step)
    return run_chain(prob.x0, prob.pot, sampler, sched, steps=c.steps, thin=c.thin, seed=prob.stream, recorder=recorder, observer=observer)


def _calls_axis(tr: Trajectory) -> np.ndarray:
    calls = np.asarray(tr.oracle_calls)
    return calls.max(axis=1) if calls.ndim == 2 else calls


def _gaussian_problem(c: ExperimentConfig, root: RandomStream) -> _Problem:
    if c.experiment == "gaussian":
        P, U = ill_conditioned_problem(root.split(0))
    else:
        M = np.array(c.precision, dtype=float)
        P, U = (np.diag(M) if M.ndim == 1 else M), None
    pot = GaussianTarget(P)
    x0 = root.split(1).normal(size=(c.ensemble, c.dim)) + 1.0
    return _Problem(pot, x0, root.split(2), U, abs_sum_gaussian_mean(pot.covariance))


def _gaussian_arm(c: ExperimentConfig, prob: _Problem, rep: int, seed: int) -> tuple[list[MetricSeries], np.ndarray]:
    phi_abs = lambda x: np.abs(x.sum(axis=-1))  # noqa: E731
    if c.err_mode == "running":
        # Average of the test function over every step so far and over the
        # ensemble; the initial state seeds the average when no step is taken.
        acc = {"sum": 0.0, "n": 0}

        def observer(state):
            acc["sum"] += float(np.mean(phi_abs(state.position)))
            acc["n"] += 1

        errs = []

        def recorder(step, state):
            if acc["n"] == 0:
                errs.append(abs(float(np.mean(phi_abs(state.position))) - prob.true_mean))
            else:
                errs.append(abs(acc["sum"] / acc["n"] - prob.true_mean))

        tr = _run_arm(c, prob, recorder, observer)
        values = np.array(errs)
    else:
        tr = _run_arm(c, prob)
        values = np.array([abs(float(np.mean(phi_abs(x))) - prob.true_mean) for x in tr.positions])
    s = MetricSeries(c.label, "err", rep, seed, tr.steps, _calls_axis(tr), values, c.ensemble, tr.aborted)
    return [s], tr.positions[-1]


def run_gaussian_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Err of the test function ``|1^T x|`` against the oracle-call axis, for
    each arm on the ill-conditioned 20-dimensional Gaussian (or a custom
    Gaussian precision)."""
    if cfg.experiment not in ("gaussian", "custom"):
        raise ConfigError("experiment", f"expected gaussian or custom, got {cfg.experiment}")

    def one(rep):
        seed = cfg.seed + rep
        root = RandomStream(seed)
        prob = _gaussian_problem(cfg, root)
        out, finals = [], {}
        for arm in cfg.arm_configs():
            series, final = _gaussian_arm(arm, prob, rep, seed)
            out += series
            finals[arm.label] = final
        return out, finals, prob

    return _collect(cfg, one, threads, extras=lambda prob: {"true_mean": prob.true_mean, "covariance": prob.pot.covariance})


def _logistic_problem(c: ExperimentConfig, root: RandomStream) -> _Problem:
    data = generate_logistic_data(c.n_data, root.split(0))
    pot = LogisticPosterior(data)
    x0 = root.split(1).uniform(-0.1, 0.1, size=(c.ensemble, 2))
    return _Problem(pot, x0, root.split(2))


def run_logistic_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """KSD of the chain ensemble against the logistic-regression posterior at
    every recorded iteration."""
    if cfg.experiment != "logistic":
        raise ConfigError("experiment", f"expected logistic, got {cfg.experiment}")

    def one(rep):
        seed = cfg.seed + rep
        prob = _logistic_problem(cfg, RandomStream(seed))
        out, finals = [], {}
        for arm in cfg.arm_configs():
            values = []
            tr = _run_arm(arm, prob, recorder=lambda k, s: values.append(ksd(s.position, prob.pot.score(s.position))))
            out.append(MetricSeries(arm.label, "ksd", rep, seed, tr.steps, _calls_axis(tr), np.array(values), arm.ensemble, tr.aborted))
            finals[arm.label] = tr.positions.reshape(-1, 2)
        return out, finals, prob

    return _collect(cfg, one, threads, extras=lambda prob: {"data": prob.pot.data, "potential": prob.pot})


def _y_marginal(points: np.ndarray, rotate: bool) -> np.ndarray:
    # Undo the rotation so y is the neck coordinate of the unrotated funnel.
    p = points @ FUNNEL_ROTATION.T if rotate else points
    return p[..., 1]


def run_funnel_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """KS distance between the y-marginal of the samples and ``N(0, sigma^2)``.

    At record ``j`` the samples are the ensemble positions pooled over the
    trailing half ``[ceil(j/2), j]`` of the records, which discards the
    early transient while still using many draws.
    """
    if cfg.experiment != "funnel":
        raise ConfigError("experiment", f"expected funnel, got {cfg.experiment}")
    cdf = norm(0.0, cfg.funnel_sigma).cdf

    def one(rep):
        seed = cfg.seed + rep
        root = RandomStream(seed)
        pot = FunnelTarget(cfg.funnel_sigma)
        if cfg.rotate:
            pot = RotatedTarget(pot, FUNNEL_ROTATION)
        x0 = root.split(1).normal(size=(cfg.ensemble, 2))
        prob = _Problem(pot, x0, root.split(2))
        out, finals = [], {}
        for arm in cfg.arm_configs():
            tr = _run_arm(arm, prob)
            y = _y_marginal(tr.positions, cfg.rotate)
            values = np.array([ks_statistic_1d(y[(j + 1) // 2 : j + 1], cdf) for j in range(len(y))])
            out.append(MetricSeries(arm.label, "ks_y", rep, seed, tr.steps, _calls_axis(tr), values, arm.ensemble, tr.aborted))
            finals[arm.label] = tr.positions[(len(tr.positions)) // 2 :].reshape(-1, 2)
        return out, finals, prob

    return _collect(cfg, one, threads, extras=lambda prob: {"potential": prob.pot})


def _collect(cfg, one, threads, extras) -> ExperimentReport:
    t0 = time.perf_counter()
    reps = range(cfg.repetitions)
    if threads > 1 and cfg.repetitions > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, reps))
    else:
        results = [one(j) for j in reps]
    report = ExperimentReport(cfg)
    for series, _, _ in results:
        report.series += series
    _, finals, prob = results[0]
    report.samples = finals
    report.extras = extras(prob)
    report.runtime = time.perf_counter() - t0
    for s in report.series:
        if s.aborted:
            log.warning("%s (seed %d) diverged and stopped at step %d", s.arm, s.seed, s.steps[-1])
    return report


RUNNERS = {
    "gaussian": run_gaussian_experiment,
    "custom": run_gaussian_experiment,
    "logistic": run_logistic_experiment,
    "funnel": run_funnel_experiment,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    return RUNNERS[cfg.experiment](cfg, threads=threads)


# ----------------------------------------------------------------------------
# output

CSV_HEADER = ("step", "oracle_calls", "metric_name", "value", "chain_ensemble_size", "seed")


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for k, c, name, v, n, seed in report.rows():
        w.writerow([k, c, name, repr(v), n, seed])
    return buf.getvalue()


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in label.lower()).strip("_") or "arm"


def _figures(report: ExperimentReport) -> dict[str, str]:
    cfg = report.config
    figs = {}
    metric = {"gaussian": "err", "custom": "err", "logistic": "ksd", "funnel": "ks_y"}[cfg.experiment]
    lines = []
    for arm in report.arms():
        steps, calls, mean = report.aggregate(arm, metric)
        x = calls if metric == "err" else steps
        lines.append((arm, x, mean))
    xlabel = "directional derivative calls" if metric == "err" else "iteration"
    ylabel = {"err": "Err", "ksd": "KSD", "ks_y": "KS distance, y-marginal"}[metric]
    figs[f"{metric}.svg"] = svg.line_plot(lines, title=f"{cfg.experiment}: {ylabel}", xlabel=xlabel, ylabel=ylabel, logy=True)

    if cfg.experiment in ("logistic", "funnel") and report.samples:
        pot = report.extras["potential"]
        pts = np.concatenate(list(report.samples.values()))
        if cfg.experiment == "funnel":
            s = cfg.funnel_sigma
            xlim, ylim = (-15.0, 15.0), (-3 * s, 3 * s)
        else:
            lo, hi = np.percentile(pts, [0.5, 99.5], axis=0)
            pad = 0.15 * (hi - lo)
            xlim, ylim = (lo[0] - pad[0], hi[0] + pad[0]), (lo[1] - pad[1], hi[1] + pad[1])
        gx = np.linspace(*xlim, 120)
        gy = np.linspace(*ylim, 120)
        G = np.stack(np.meshgrid(gx, gy), axis=-1)
        V = pot.value(G)
        levels = list(np.min(V) + np.array([0.5, 2.0, 4.5, 8.0]))
        for arm, p in report.samples.items():
            figs[f"samples_{_slug(arm)}.svg"] = svg.scatter_plot(
                [(arm, p)], title=f"{cfg.experiment}: {arm}", xlabel="x1" if cfg.experiment == "logistic" else "x",
                ylabel="x2" if cfg.experiment == "logistic" else "y", contour=(gx, gy, V, levels), xlim=xlim, ylim=ylim,
            )
    return figs


def emit_outputs(report: ExperimentReport, directory) -> dict[str, str]:
    """Write ``report.csv``, ``config.echo`` and the SVG panels, plus a
    ``manifest.json`` mapping each file name to its SHA-256. Returns the
    manifest."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {"report.csv": report_csv(report), "config.echo": serialize_config(report.config)}
    files.update(_figures(report))
    manifest = {}
    for name, text in files.items():
        path = out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        manifest[name] = hashlib.sha256(text.encode()).hexdigest()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
