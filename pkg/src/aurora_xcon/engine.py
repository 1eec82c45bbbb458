"""Top-level optimisation loops: GA, CVT MAP-Elites and the AURORA family.

All four AURORA variants share one loop; ``use_triplet`` swaps the
reconstruction objective for the triplet objective and ``use_extinction``
enables periodic extinction events.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import RngStream, SolutionBatch
from .encoder import (
    EncoderModel,
    TrainConfig,
    adaptive_margin,
    mine_triplets,
    schedule_until,
    train,
)
from .encoder.training import EncoderDivergedError
from .env import MazeTask, PointMazeTask, load_maze
from .env.features import FEATURE_KINDS, RandomFeatureSpec, batch_features, feature_dim
from .repertoire import (
    BestTracker,
    GridRepertoire,
    UnstructuredRepertoire,
    cvt_centroids,
    extinction,
    reencode_all,
    save_snapshot,
)
from .variation import VariationParams, iso_line_dd, select_uniform

log = logging.getLogger(__name__)

ALGORITHMS = ("ga", "map_elites", "aurora")
ENVIRONMENTS = ("maze", "point_maze")

# one RNG stream per concern so that toggling a feature does not shift the others
_STREAMS = {"init": 1, "select": 2, "vary": 3, "encoder_init": 4, "train": 5,
            "triplets": 6, "extinction": 7, "cvt": 8, "features": 9, "env": 10}


@dataclass
class AlgorithmConfig:
    algorithm: str = "aurora"
    use_triplet: bool = True
    use_extinction: bool = True
    feature_kind: str = "xy"
    env: str = "maze"
    maze_file: str | None = None
    batch_size: int = 64
    total_evaluations: int = 100_000
    population_size: int = 1024
    n_centroids: int = 1024
    cvt_seed: int = 0
    repertoire_capacity: int = 256
    extinction_period: int = 50
    extinction_proportion: float = 0.05
    iso_sigma: float = 0.2
    line_sigma: float = 0.0
    init_scale: float = 0.1
    latent_dim: int = 10
    encoder_hidden: int = 64
    encoder_kind: str = "mlp"
    margin_mode: str = "scaled"
    encoder: TrainConfig = field(default_factory=TrainConfig)
    stop_on_goal: bool = False
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = _strict(TrainConfig, self.encoder, "encoder")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"env must be one of {ENVIRONMENTS}")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError(f"feature_kind must be one of {FEATURE_KINDS}")
        if self.margin_mode not in ("scaled", "plain"):
            raise ValueError("margin_mode must be 'scaled' or 'plain'")
        if self.batch_size < 1 or self.total_evaluations < self.batch_size:
            raise ValueError("total_evaluations must cover at least one batch")
        if self.algorithm == "aurora" and self.use_triplet and self.batch_size < 3:
            raise ValueError("triplet training needs batches of at least 3")
        if not 0 < self.extinction_proportion <= 1:
            raise ValueError("extinction_proportion must lie in (0, 1]")
        if self.extinction_period < 1:
            raise ValueError("extinction_period must be >= 1")
        if not self.name:
            self.name = default_variant_name(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AlgorithmConfig":
        return _strict(cls, data, "config")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "AlgorithmConfig":
        if "name" not in changes and self.name == default_variant_name(self):
            changes["name"] = ""
        return dataclasses.replace(self, **changes)

    @property
    def variation(self) -> VariationParams:
        return VariationParams(self.iso_sigma, self.line_sigma, self.batch_size)


def _strict(cls, data: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**data)


def default_variant_name(cfg: AlgorithmConfig) -> str:
    if cfg.algorithm == "ga":
        return "ga"
    if cfg.algorithm == "map_elites":
        return f"map_elites_{cfg.feature_kind}"
    suffix = ("x" if cfg.use_extinction else "") + ("con" if cfg.use_triplet else "")
    return "aurora" + (f"_{suffix}" if suffix else "")


VARIANTS = {
    "ga": dict(algorithm="ga"),
    "map_elites_xy": dict(algorithm="map_elites", feature_kind="xy"),
    "map_elites_bumper": dict(algorithm="map_elites", feature_kind="bumper"),
    "map_elites_laser_mean": dict(algorithm="map_elites", feature_kind="laser_mean"),
    "map_elites_random_dims": dict(algorithm="map_elites", feature_kind="random_dims"),
    "aurora": dict(algorithm="aurora", use_triplet=False, use_extinction=False),
    "aurora_x": dict(algorithm="aurora", use_triplet=False, use_extinction=True),
    "aurora_con": dict(algorithm="aurora", use_triplet=True, use_extinction=False),
    "aurora_xcon": dict(algorithm="aurora", use_triplet=True, use_extinction=True),
}


def variant_config(name: str, **overrides) -> AlgorithmConfig:
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return AlgorithmConfig(**{**VARIANTS[name], **overrides})


def make_task(cfg: AlgorithmConfig):
    if cfg.env == "point_maze":
        return PointMazeTask()
    world = load_maze(cfg.maze_file) if cfg.maze_file else None
    return MazeTask(world)


# ----------------------------------------------------------------- output


@dataclass
class RunOutput:
    config: AlgorithmConfig
    tracker: BestTracker
    archive: object
    encoder: EncoderModel | None = None
    metrics: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    evaluations: int = 0
    iterations: int = 0
    wall_time: float = 0.0

    @property
    def best_fitness(self) -> float:
        return self.tracker.best_fitness


METRIC_COLUMNS = ["iteration", "evaluations", "max_fitness", "repertoire_size", "encoder_loss", "event"]


class _Recorder:
    def __init__(self, out: RunOutput):
        self.out = out

    def __call__(self, iteration, evaluations, size, encoder_loss=None, event=""):
        self.out.metrics.append(
            {
                "iteration": iteration,
                "evaluations": evaluations,
                "max_fitness": self.out.tracker.best_fitness,
                "repertoire_size": size,
                "encoder_loss": encoder_loss,
                "event": event,
            }
        )


def _streams(seed: int) -> dict:
    return {k: RngStream(seed, v).generator() for k, v in _STREAMS.items()}


def _n_iterations(cfg: AlgorithmConfig) -> int:
    return (cfg.total_evaluations - cfg.batch_size) // cfg.batch_size


def _evaluate(task, genotypes, rngs):
    ev = task.evaluate(genotypes, rngs["env"])
    return ev


def _goal_hit(cfg, tracker) -> bool:
    return cfg.stop_on_goal and tracker.best_fitness >= 0.0


# --------------------------------------------------------------------- GA


def run_ga(cfg: AlgorithmConfig, task=None) -> RunOutput:
    """Truncation GA: uniform parents, Iso+LineDD offspring, keep the top ``population_size``."""
    task = task if task is not None else make_task(cfg)
    rngs = _streams(cfg.seed)
    t0 = time.perf_counter()
    out = RunOutput(cfg, BestTracker(), None)
    record = _Recorder(out)
    b = cfg.batch_size

    genotypes = rngs["init"].normal(0.0, cfg.init_scale, (b, task.n_params))
    ev = _evaluate(task, genotypes, rngs)
    pop = SolutionBatch(genotypes, ev.fitness, np.zeros((b, 0)), ev.trajectories)
    pop = _truncate(pop, cfg.population_size)
    evals = b
    out.tracker.update(pop, evals)
    record(0, evals, len(pop), event="init")

    for it in range(1, _n_iterations(cfg) + 1):
        if _goal_hit(cfg, out.tracker):
            break
        i1, i2 = select_uniform(len(pop), b, rngs["select"])
        children = iso_line_dd(pop.genotypes[i1], pop.genotypes[i2], cfg.variation, rngs["vary"])
        ev = _evaluate(task, children, rngs)
        offspring = SolutionBatch(children, ev.fitness, np.zeros((b, 0)), ev.trajectories)
        pop = _truncate(SolutionBatch.concat(pop, offspring), cfg.population_size)
        evals += b
        out.tracker.update(offspring, evals)
        record(it, evals, len(pop))
        out.iterations = it

    out.archive = pop
    out.evaluations = evals
    out.wall_time = time.perf_counter() - t0
    return out


def _truncate(pop: SolutionBatch, n: int) -> SolutionBatch:
    if len(pop) <= n:
        return pop
    # stable sort keeps older individuals on fitness ties
    order = np.argsort(-pop.fitness, kind="stable")[:n]
    return pop.take(np.sort(order))


# ------------------------------------------------------------- MAP-Elites


def run_map_elites(cfg: AlgorithmConfig, task=None) -> RunOutput:
    task = task if task is not None else make_task(cfg)
    rngs = _streams(cfg.seed)
    t0 = time.perf_counter()
    b = cfg.batch_size

    genotypes = rngs["init"].normal(0.0, cfg.init_scale, (b, task.n_params))
    ev = _evaluate(task, genotypes, rngs)
    spec = None
    if cfg.feature_kind == "random_dims":
        spec = RandomFeatureSpec.sample(rngs["features"], task.traj_shape, reference=ev.trajectories)
    d = feature_dim(cfg.feature_kind, spec)
    # the tessellation is experiment setup, shared by every seed
    centroids = cvt_centroids(cfg.n_centroids, d, (np.zeros(d), np.ones(d)), RngStream(cfg.cvt_seed, _STREAMS["cvt"]).generator())
    grid = GridRepertoire(centroids, (0.0, 1.0), task.n_params, task.traj_shape)
    out = RunOutput(cfg, BestTracker(), grid)
    out.counters["random_feature_spec"] = dataclasses.asdict(spec) if spec else None
    record = _Recorder(out)

    batch = SolutionBatch(genotypes, ev.fitness, batch_features(ev, cfg.feature_kind, spec), ev.trajectories)
    grid.add_batch(batch)
    evals = b
    out.tracker.update(batch, evals)
    record(0, evals, len(grid), event="init")

    for it in range(1, _n_iterations(cfg) + 1):
        if _goal_hit(cfg, out.tracker):
            break
        occ = np.flatnonzero(grid.occupied)
        i1, i2 = select_uniform(len(occ), b, rngs["select"])
        children = iso_line_dd(grid.genotypes[occ[i1]], grid.genotypes[occ[i2]], cfg.variation, rngs["vary"])
        ev = _evaluate(task, children, rngs)
        batch = SolutionBatch(children, ev.fitness, batch_features(ev, cfg.feature_kind, spec), ev.trajectories)
        grid.add_batch(batch)
        evals += b
        out.tracker.update(batch, evals)
        record(it, evals, len(grid))
        out.iterations = it

    out.evaluations = evals
    out.wall_time = time.perf_counter() - t0
    return out


# ----------------------------------------------------------------- AURORA


def _train_encoder(cfg, model, rep, rngs, counters):
    members = rep.members() if hasattr(rep, "members") else rep
    if cfg.use_triplet:
        counters["triplet_trainings"] += 1
        triplets = mine_triplets(members.fitness, rngs["triplets"])
        margin = adaptive_margin(
            model.encode(members.trajectories), cfg.latent_dim, scaled=cfg.margin_mode == "scaled"
        )
        result = train(model, triplets.gather(members.trajectories), "triplet", cfg.encoder,
                       rngs["train"], margin=margin)
    else:
        counters["mse_trainings"] += 1
        result = train(model, members.trajectories, "mse", cfg.encoder, rngs["train"])
    return result.losses[-1]


def run_aurora(cfg: AlgorithmConfig, task=None) -> RunOutput:
    """Unsupervised QD: features are the latent codes of an encoder retrained
    on the archive's own trajectories at growing intervals."""
    task = task if task is not None else make_task(cfg)
    rngs = _streams(cfg.seed)
    t0 = time.perf_counter()
    b = cfg.batch_size
    counters = {"triplet_trainings": 0, "mse_trainings": 0, "extinctions": 0, "reencodings": 0}

    model = EncoderModel.create(task.traj_shape, cfg.latent_dim, cfg.encoder_hidden,
                                cfg.encoder_kind, rngs["encoder_init"])
    rep = UnstructuredRepertoire(cfg.repertoire_capacity, task.n_params, cfg.latent_dim, task.traj_shape)
    out = RunOutput(cfg, BestTracker(), rep, model, counters=counters)
    record = _Recorder(out)

    genotypes = rngs["init"].normal(0.0, cfg.init_scale, (b, task.n_params))
    ev = _evaluate(task, genotypes, rngs)
    init = SolutionBatch(genotypes, ev.fitness, np.zeros((b, cfg.latent_dim)), ev.trajectories)
    try:
        loss = _train_encoder(cfg, model, init, rngs, counters)
    except EncoderDivergedError as exc:
        raise EncoderDivergedError(f"{cfg.name} seed {cfg.seed}, initial training: {exc}") from exc
    init.features = model.encode(init.trajectories)
    rep.add_batch(init)
    evals = b
    out.tracker.update(init, evals)
    record(0, evals, len(rep), encoder_loss=loss, event="init")

    n_iter = _n_iterations(cfg)
    updates = schedule_until(cfg.encoder.update_interval, n_iter)
    for it in range(1, n_iter + 1):
        if _goal_hit(cfg, out.tracker):
            break
        members = rep.members()
        i1, i2 = select_uniform(len(members), b, rngs["select"])
        children = iso_line_dd(members.genotypes[i1], members.genotypes[i2], cfg.variation, rngs["vary"])
        ev = _evaluate(task, children, rngs)
        batch = SolutionBatch(children, ev.fitness, model.encode(ev.trajectories), ev.trajectories)
        rep.add_batch(batch)
        evals += b
        out.tracker.update(batch, evals)
        events, loss = [], None
        if it in updates:
            try:
                loss = _train_encoder(cfg, model, rep, rngs, counters)
            except EncoderDivergedError as exc:
                raise EncoderDivergedError(f"{cfg.name} seed {cfg.seed}, iteration {it}: {exc}") from exc
            reencode_all(rep, model.encode)
            counters["reencodings"] += 1
            events.append("update")
        if cfg.use_extinction and it % cfg.extinction_period == 0:
            extinction(rep, cfg.extinction_proportion, rngs["extinction"])
            counters["extinctions"] += 1
            events.append("extinction")
        record(it, evals, len(rep), encoder_loss=loss, event="+".join(events))
        out.iterations = it

    out.evaluations = evals
    out.wall_time = time.perf_counter() - t0
    return out


def run(cfg: AlgorithmConfig, task=None) -> RunOutput:
    runner = {"ga": run_ga, "map_elites": run_map_elites, "aurora": run_aurora}[cfg.algorithm]
    return runner(cfg, task)


# -------------------------------------------------------------- run dirs


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in METRIC_COLUMNS])


def read_metrics(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append(
                {
                    "iteration": int(r["iteration"]),
                    "evaluations": int(r["evaluations"]),
                    "max_fitness": float(r["max_fitness"]),
                    "repertoire_size": int(r["repertoire_size"]),
                    "encoder_loss": float(r["encoder_loss"]) if r["encoder_loss"] else None,
                    "event": r["event"],
                }
            )
    return rows


def save_run(out: RunOutput, run_dir) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg = out.config
    with open(run_dir / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
    write_metrics(run_dir / "metrics.csv", out.metrics)
    archive = out.archive
    if isinstance(archive, SolutionBatch):
        archive = _BatchView(archive)
    save_snapshot(
        run_dir / "repertoire.snapshot",
        archive,
        iteration=out.iterations,
        evaluations=out.evaluations,
        encoder_version=out.counters.get("reencodings", 0),
    )
    if out.encoder is not None:
        out.encoder.save(run_dir / "encoder.ckpt")
    meta = {
        "variant": cfg.name,
        "seed": cfg.seed,
        "wall_time": out.wall_time,
        "evaluations": out.evaluations,
        "best_fitness": out.best_fitness,
        "counters": out.counters,
    }
    with open(run_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return run_dir


class _BatchView:
    def __init__(self, batch):
        self._batch = batch

    def members(self):
        return self._batch
