"""Experiment orchestration: cost models, closed-loop episodes, benchmarks.

The simulated plant always runs the ground-truth parameters. The controller
only ever sees its configured parameter source; the truth is handed to it
exclusively for the ``truth`` baseline source.
"""

from __future__ import annotations

import json
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from numpy.typing import ArrayLike, NDArray

from .controller import ControllerConfig, CostModel, DiscoController, Propagation
from .dynamics import Environment, SimParams, make_env
from .errors import ConfigError, DiscoError, InvalidInputError, StepError
from .inference import GaussianMixture, UniformPrior, load_model, posterior, summary_statistics
from .unscented import UtConfig

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Cost models
# ---------------------------------------------------------------------------

def pendulum_cost(state: ArrayLike, literal: bool = False) -> NDArray[np.float64] | float:
    """Swing-up cost ``50 (cos(theta) - 1)^2 + theta_dot^2``, zero upright at rest.

    ``literal=True`` evaluates ``50 cos((theta - 1)^2) + theta_dot^2`` instead;
    it is kept only to audit that reading and is not a sensible objective.
    """
    state = np.asarray(state, dtype=np.float64)
    theta, theta_dot = state[..., 0], state[..., 1]
    if literal:
        c = 50.0 * np.cos((theta - 1.0) ** 2) + theta_dot**2
    else:
        c = 50.0 * (np.cos(theta) - 1.0) ** 2 + theta_dot**2
    return float(c) if c.ndim == 0 else c


def skidsteer_cost(state: ArrayLike, speed: ArrayLike, center: ArrayLike = (0.0, 0.0),
                   radius: float = 0.75, s_ref: float = 0.2) -> NDArray[np.float64] | float:
    """Circle-following cost ``sqrt(d^2 + (s - s_ref)^2)``.

    ``d`` is the distance from the position to the circle's edge.
    """
    state = np.asarray(state, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    d = np.abs(np.hypot(state[..., 0] - center[0], state[..., 1] - center[1]) - radius)
    c = np.sqrt(d**2 + (np.asarray(speed) - s_ref) ** 2)
    return float(c) if c.ndim == 0 else c


@dataclass(frozen=True)
class PendulumCost:
    literal: bool = False

    def __call__(self, x_next, x_prev=None):
        return pendulum_cost(x_next, self.literal)


@dataclass(frozen=True)
class SkidSteerCost:
    """Speed is the finite difference of consecutive positions over ``dt``."""

    dt: float
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.75
    s_ref: float = 0.2

    def __call__(self, x_next, x_prev):
        x_next, x_prev = np.asarray(x_next), np.asarray(x_prev)
        speed = np.hypot(x_next[..., 0] - x_prev[..., 0], x_next[..., 1] - x_prev[..., 1]) / self.dt
        return skidsteer_cost(x_next, speed, self.center, self.radius, self.s_ref)


def circle_cruise_wheel_speeds(params: ArrayLike, radius: float = 0.75, speed: float = 0.2) -> NDArray:
    """Wheel speeds that drive the kinematic model counter-clockwise on a circle."""
    _, r_w, a_w = np.asarray(params, dtype=np.float64)
    mean = speed / r_w
    half_diff = 0.5 * (speed / radius) * a_w / r_w
    return np.array([mean - half_diff, mean + half_diff])


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

PARAM_SOURCES = ("truth", "point", "prior", "posterior")


@dataclass(frozen=True)
class Variant:
    name: str
    propagation: Propagation
    source: str
    num_samples: int | None = None    # overrides the budget rule when set

    def __post_init__(self):
        object.__setattr__(self, "propagation", Propagation(self.propagation))
        if self.source not in PARAM_SOURCES:
            raise ConfigError(f"variant {self.name!r}: unknown parameter source {self.source!r}")
        if self.source == "truth" and self.propagation is not Propagation.POINT:
            raise ConfigError(f"variant {self.name!r}: ground-truth parameters need point propagation")


@dataclass
class ExperimentConfig:
    """Everything needed to run and benchmark closed-loop episodes.

    One YAML file per experiment; see ``configs/*.yaml``.
    """

    environment: str
    controller: ControllerConfig
    true_params: NDArray[np.float64]
    initial_state: NDArray[np.float64]
    episode_length: int
    variants: list[Variant]
    seeds: int = 20
    root_seed: int = 0
    cost: dict = field(default_factory=dict)
    prior: UniformPrior | None = None
    point_estimate: NDArray[np.float64] | None = None
    posterior: GaussianMixture | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.env.params(self.true_params)  # validates length and finiteness
        if self.episode_length < 0:
            raise ConfigError("episode_length must be non-negative")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate variant names {names}")

    @property
    def env(self) -> Environment:
        return make_env(self.environment)

    def cost_model(self) -> CostModel:
        env = self.env
        if env.name == "pendulum":
            return CostModel(PendulumCost(bool(self.cost.get("literal", False))))
        return CostModel(SkidSteerCost(
            env.dt,
            tuple(self.cost.get("center", (0.0, 0.0))),
            float(self.cost.get("radius", 0.75)),
            float(self.cost.get("reference_speed", 0.2)),
        ))

    def variant(self, name: str | None = None) -> Variant:
        if name is None:
            return self.variants[0]
        for v in self.variants:
            if v.name == name:
                return v
        raise ConfigError(f"unknown variant {name!r}; available: {[v.name for v in self.variants]}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing field '{where}{key}'")
    return section[key]


def parse_posterior(section: dict, prior: UniformPrior | None, base: Path) -> GaussianMixture:
    """Posterior fixture (``mean``/``cov``), mixture (``weights``/``means``/
    ``covariances``) or trained model conditioned on an episode (``model``/``log``)."""
    threshold = float(section.get("dominance_threshold", 0.9))
    if "model" in section:
        if prior is None:
            raise ConfigError("a trained posterior needs a prior")
        model = load_model(base / section["model"])
        episode = EpisodeLog.load(base / _require(section, "log", "posterior."))
        stats = summary_statistics(episode.states, episode.controls, episode.environment, episode.final_state)
        return posterior(model, stats, prior, dominance_threshold=threshold)
    if "weights" in section:
        return GaussianMixture(np.asarray(section["weights"]), np.asarray(section["means"]),
                               np.asarray(_require(section, "covariances", "posterior.")),
                               support=prior, dominance_threshold=threshold)
    return GaussianMixture.gaussian(_require(section, "mean", "posterior."),
                                    _require(section, "cov", "posterior."),
                                    support=prior, dominance_threshold=threshold)


def config_from_dict(data: dict, base: Path | str = ".") -> ExperimentConfig:
    base = Path(base)
    try:
        env = make_env(_require(data, "environment", ""))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    c = _require(data, "controller", "")
    ut = c.get("ut", {})
    controller = ControllerConfig(
        num_samples=int(_require(c, "sampled_actions", "controller.")),
        horizon=int(_require(c, "control_horizon", "controller.")),
        lambda_=float(_require(c, "inverse_temperature", "controller.")),
        sigma=np.asarray(_require(c, "control_authority", "controller."), dtype=np.float64),
        beta=np.asarray(c.get("beta", 0.0), dtype=np.float64),
        minimum_control=np.asarray(c.get("minimum_control", 0.0), dtype=np.float64),
        ut=UtConfig(alpha=float(ut.get("alpha", 0.5)), kappa=float(ut.get("kappa", 0.0)),
                    xi=float(ut.get("xi", 2.0))),
        num_param_samples=int(c.get("mc_param_samples", 1)),
    )
    if float(c.get("terminal_cost", 0.0)) != 0.0:
        raise ConfigError("only a zero terminal cost is supported")

    prior = None
    if "prior" in data:
        prior = UniformPrior(_require(data["prior"], "low", "prior."), _require(data["prior"], "high", "prior."))
    post = parse_posterior(data["posterior"], prior, base) if "posterior" in data else None
    variants = [Variant(_require(v, "name", "variants[]."), v.get("propagation", "point"),
                        _require(v, "params", "variants[]."), v.get("sampled_actions"))
                for v in _require(data, "variants", "")]
    for v in variants:
        needed = {"prior": prior, "posterior": post, "point": data.get("point_estimate")}.get(v.source, True)
        if needed is None:
            raise ConfigError(f"variant {v.name!r} uses source {v.source!r} but the config has no "
                              f"'{'point_estimate' if v.source == 'point' else v.source}' field")
        if v.source == "prior" and v.propagation is Propagation.POINT:
            raise ConfigError(f"variant {v.name!r}: a prior needs ut or mc propagation")

    return ExperimentConfig(
        environment=env.name,
        controller=controller,
        true_params=np.asarray(_require(data, "true_params", ""), dtype=np.float64),
        initial_state=np.asarray(_require(data, "initial_state", ""), dtype=np.float64),
        episode_length=int(_require(data, "episode_length", "")),
        variants=variants,
        seeds=int(data.get("seeds", 20)),
        root_seed=int(data.get("root_seed", 0)),
        cost=dict(data.get("cost", {})),
        prior=prior,
        point_estimate=(np.asarray(data["point_estimate"], dtype=np.float64)
                        if "point_estimate" in data else None),
        posterior=post,
        raw=data,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return config_from_dict(data, path.parent)


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------

class Plant:
    """Ground-truth system; records who asked to see its parameters."""

    def __init__(self, env: Environment, true_params: ArrayLike):
        self.env = env
        self._params = env.params(true_params)
        self.access_log: list[str] = []

    def step(self, x, u):
        return self.env.step(x, self.env.clip(u), self._params.values)

    def reveal_params(self, reader: str) -> SimParams:
        self.access_log.append(reader)
        return self._params


def step_rng(root_seed: int, variant: str, seed: int, step: int) -> np.random.Generator:
    """Independent stream per (variant, seed index, control step)."""
    key = (zlib.crc32(variant.encode()), seed, step)
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=key))


def build_controller(config: ExperimentConfig, variant: Variant, plant: Plant) -> DiscoController:
    """Controller for ``variant``; the only place the plant's truth may leak."""
    env = config.env
    cfg = config.controller
    samples = variant.num_samples
    if samples is None and variant.propagation is Propagation.MONTE_CARLO:
        # equal rollout budget: K sequences x (2n+1) sigma points
        samples = cfg.num_samples * (2 * env.param_dim + 1) // cfg.num_param_samples
    ctrl_cfg = ControllerConfig(
        num_samples=samples or cfg.num_samples, horizon=cfg.horizon, lambda_=cfg.lambda_,
        sigma=cfg.sigma, beta=cfg.beta, minimum_control=cfg.minimum_control,
        propagation=variant.propagation, num_param_samples=cfg.num_param_samples,
        ut=cfg.ut, rest_control=cfg.rest_control,
    )
    source = {
        "truth": lambda: plant.reveal_params("controller"),
        "point": lambda: config.point_estimate,
        "prior": lambda: config.prior,
        "posterior": lambda: config.posterior,
    }[variant.source]()
    return DiscoController(env, config.cost_model(), ctrl_cfg, source)


@dataclass
class EpisodeLog:
    """Per-step record of a closed-loop episode.

    ``states[t]`` is the state in which ``controls[t]`` was applied and
    ``costs[t]`` the instant cost of the state it led to.
    """

    environment: str
    variant: str
    seed: int
    states: NDArray[np.float64]
    controls: NDArray[np.float64]
    costs: NDArray[np.float64]
    rho: NDArray[np.float64]
    eta: NDArray[np.float64]
    ess: NDArray[np.float64]
    final_state: NDArray[np.float64]
    model_steps: int = 0

    def __len__(self):
        return len(self.costs)

    @property
    def accumulated_cost(self) -> float:
        return float(np.sum(self.costs))

    def mean_instant_cost(self) -> NDArray[np.float64]:
        """Running average of the instant cost up to each step."""
        return np.cumsum(self.costs) / np.arange(1, len(self.costs) + 1)

    def to_dict(self) -> dict:
        return {
            "environment": self.environment, "variant": self.variant, "seed": self.seed,
            "model_steps": self.model_steps,
            "accumulated_cost": self.accumulated_cost,
            "final_state": self.final_state.tolist(),
            "records": [
                {"t": t, "state": self.states[t].tolist(), "control": self.controls[t].tolist(),
                 "cost": float(self.costs[t]), "rho": float(self.rho[t]), "eta": float(self.eta[t]),
                 "ess": float(self.ess[t])}
                for t in range(len(self))
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeLog":
        rec = data["records"]
        env = make_env(data["environment"])

        def col(key, width=None):
            a = np.array([r[key] for r in rec], dtype=np.float64)
            return a.reshape(len(rec), width) if width else a

        return cls(data["environment"], data["variant"], int(data["seed"]),
                   col("state", env.state_dim), col("control", env.control_dim), col("cost"),
                   col("rho"), col("eta"), col("ess"),
                   np.asarray(data["final_state"], dtype=np.float64), int(data.get("model_steps", 0)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeLog":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise InvalidInputError(f"cannot read episode log {path}: {exc}") from None


def run_episode(config: ExperimentConfig, seed: int, variant: str | Variant | None = None,
                plant: Plant | None = None) -> EpisodeLog:
    """Close the loop between the ground-truth plant and the controller."""
    variant = variant if isinstance(variant, Variant) else config.variant(variant)
    env = config.env
    plant = plant or Plant(env, config.true_params)
    controller = build_controller(config, variant, plant)
    cost = controller.cost.instant
    n = config.episode_length
    states = np.empty((n, env.state_dim))
    controls = np.empty((n, env.control_dim))
    costs, rho, eta, ess = (np.empty(n) for _ in range(4))
    x = np.asarray(config.initial_state, dtype=np.float64).copy()
    for t in range(n):
        try:
            diag = controller.control_step(x, step_rng(config.root_seed, variant.name, seed, t))
            x_next = plant.step(x, diag.action)
        except DiscoError as exc:
            raise StepError(f"{variant.name} seed {seed}: {exc}", t) from exc
        states[t], controls[t] = x, diag.action
        costs[t] = cost(x_next, x)
        rho[t], eta[t], ess[t] = diag.rho, diag.eta, diag.ess
        x = x_next
    return EpisodeLog(env.name, variant.name, seed, states, controls, costs, rho, eta, ess,
                      x, controller.model_steps)


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    """Instant-cost series per variant, shape ``(n_seeds, episode_length)``."""

    variants: list[str]
    seeds: list[int]
    series: dict[str, NDArray[np.float64]]
    model_steps: dict[str, list[int]] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    root_seed: int = 0
    config: dict = field(default_factory=dict)

    def mean(self, variant: str) -> NDArray[np.float64]:
        return self.series[variant].mean(axis=0)

    def std(self, variant: str) -> NDArray[np.float64]:
        return self.series[variant].std(axis=0)

    def accumulated(self, variant: str) -> NDArray[np.float64]:
        """Accumulated episode cost per seed."""
        return self.series[variant].sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "variants": self.variants,
            "seeds": self.seeds,
            "root_seed": self.root_seed,
            "series": {v: s.tolist() for v, s in self.series.items()},
            "model_steps": self.model_steps,
            "failures": self.failures,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkResult":
        return cls(
            variants=list(data["variants"]),
            seeds=list(data["seeds"]),
            series={v: np.asarray(s, dtype=np.float64).reshape(len(s), -1)
                    for v, s in data["series"].items()},
            model_steps={v: list(s) for v, s in data.get("model_steps", {}).items()},
            failures=list(data.get("failures", [])),
            root_seed=int(data.get("root_seed", 0)),
            config=data.get("config", {}),
        )


def _episode_task(args):
    config, variant, seed = args
    try:
        episode = run_episode(config, seed, variant)
        return episode.costs, episode.model_steps, None
    except DiscoError as exc:
        return None, 0, f"{type(exc).__name__}: {exc}"


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("DISCO_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_benchmark(config: ExperimentConfig, variants: list[str] | None = None,
                  seeds: list[int] | None = None, workers: int | None = None) -> BenchmarkResult:
    """Run every (variant, seed) episode and collect the cost series.

    Episodes are independent and may run in parallel; results are gathered
    in a fixed order so the output does not depend on ``workers``.
    """
    chosen = [config.variant(v) for v in variants] if variants else list(config.variants)
    seeds = list(range(config.seeds)) if seeds is None else list(seeds)
    if not chosen or not seeds:
        raise ConfigError("a benchmark needs at least one variant and one seed")
    tasks = [(config, v, s) for v in chosen for s in seeds]
    n_workers = worker_count(workers)
    if n_workers == 1:
        outputs = [_episode_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outputs = list(pool.map(_episode_task, tasks))

    series, steps, failures = {}, {}, []
    it = iter(outputs)
    for v in chosen:
        rows, counts = [], []
        for s in seeds:
            costs, n_steps, error = next(it)
            if error is not None:
                log.error("variant %s seed %d failed: %s", v.name, s, error)
                failures.append({"variant": v.name, "seed": s, "error": error})
                continue
            rows.append(costs)
            counts.append(n_steps)
        series[v.name] = np.array(rows).reshape(len(rows), config.episode_length)
        steps[v.name] = counts
    return BenchmarkResult([v.name for v in chosen], seeds, series, steps, failures,
                           config.root_seed, config.raw)


def _fmt(x: float) -> str:
    return repr(float(x))


def export_results(result: BenchmarkResult, out_dir: str | Path, formats=("csv", "json"),
                   prefix: str = "benchmark") -> list[Path]:
    """Write the per-step mean/std table (CSV), the full result (JSON) and a
    seed manifest. Returns the written paths."""
    if not result.variants:
        raise InvalidInputError("nothing to export: no variants")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        length = max((s.shape[1] for s in result.series.values()), default=0)
        header = ["t"]
        columns = []
        for v in result.variants:
            header += [f"{v}_mean", f"{v}_std"]
            s = result.series[v]
            if len(s):
                columns += [result.mean(v), result.std(v)]
            else:
                columns += [np.full(length, np.nan)] * 2
        lines = [",".join(header)]
        for t in range(length):
            lines.append(",".join([str(t)] + [_fmt(c[t]) for c in columns]))
        path = out / f"{prefix}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if "json" in formats:
        path = out / f"{prefix}.json"
        path.write_text(json.dumps(result.to_dict(), indent=1, sort_keys=True) + "\n")
        written.append(path)
    manifest = {
        "root_seed": result.root_seed,
        "seeds": result.seeds,
        "variants": {v: zlib.crc32(v.encode()) for v in result.variants},
        "stream_key": "SeedSequence(root_seed, spawn_key=(crc32(variant), seed, step))",
        "failures": result.failures,
    }
    path = out / f"{prefix}_seeds.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    written.append(path)
    return written


def load_results(path: str | Path) -> BenchmarkResult:
    return BenchmarkResult.from_dict(json.loads(Path(path).read_text()))
