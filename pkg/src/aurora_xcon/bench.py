"""Experiment harness: run records, nonparametric statistics, reports and curves."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .engine import AlgorithmConfig, read_metrics, run, save_run, variant_config
from .encoder import (
    EncoderModel,
    TrainConfig,
    adaptive_margin,
    clustered_trajectories,
    latent_diagnostics,
    mine_triplets,
    train,
)

log = logging.getLogger(__name__)

ALPHA = 0.05
EXACT_MAX_N = 12
METRICS = ("evaluations_to_goal", "final_fitness")


# ---------------------------------------------------------------- records


@dataclass
class RunRecord:
    variant: str
    seed: int
    curve: list  # (evaluations, max_fitness) pairs
    evaluations_to_goal: int | None = None
    wall_time: float = 0.0
    budget: int | None = None

    def __post_init__(self):
        self.curve = [(int(e), float(f)) for e, f in self.curve]
        xs = [e for e, _ in self.curve]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError(f"{self.variant}/{self.seed}: curve evaluations not strictly increasing")
        if self.evaluations_to_goal is None:
            self.evaluations_to_goal = evaluations_to_goal(self)

    @property
    def final_fitness(self) -> float:
        return self.curve[-1][1] if self.curve else -math.inf

    @classmethod
    def from_run_dir(cls, run_dir) -> "RunRecord":
        run_dir = Path(run_dir)
        with open(run_dir / "meta.json") as fh:
            meta = json.load(fh)
        with open(run_dir / "config.json") as fh:
            cfg = json.load(fh)
        rows = read_metrics(run_dir / "metrics.csv")
        return cls(
            variant=meta["variant"],
            seed=int(meta["seed"]),
            curve=[(r["evaluations"], r["max_fitness"]) for r in rows],
            wall_time=float(meta.get("wall_time", 0.0)),
            budget=int(cfg["total_evaluations"]),
        )


def evaluations_to_goal(record: RunRecord) -> int | None:
    """First evaluation count at which the best fitness reached 0."""
    for evals, fit in record.curve:
        if fit >= 0.0:
            return evals
    return None


# ------------------------------------------------------------- statistics


def median_iqr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("median_iqr of an empty sample")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return float(med), float(q3 - q1)


def midranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_rank_sum_p(ranks2: np.ndarray, n: int, observed2: int) -> float:
    """Two-sided exact p for the rank sum of ``n`` of the pooled (doubled,
    integer) midranks, by dynamic programming over subset sums."""
    total = int(ranks2.sum())
    # counts[k][s]: number of size-k subsets with doubled rank sum s
    counts = np.zeros((n + 1, total + 1), dtype=object)
    counts[0, 0] = 1
    for r in ranks2:
        r = int(r)
        for k in range(n, 0, -1):
            counts[k, r:] = counts[k, r:] + counts[k - 1, : total + 1 - r]
    dist = counts[n]
    n_all = sum(dist)
    centre2 = n * total / len(ranks2)  # expected doubled rank sum
    dev = abs(observed2 - centre2)
    s = np.arange(total + 1)
    extreme = np.abs(s - centre2) >= dev - 1e-9
    return float(sum(dist[extreme]) / n_all)


def _normal_rank_sum_p(ranks: np.ndarray, n: int) -> float:
    """Two-sided normal approximation with tie and continuity corrections."""
    big_n = len(ranks)
    m = big_n - n
    w = ranks[:n].sum()
    mean = n * (big_n + 1) / 2.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (big_n * (big_n - 1))
    var = n * m / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0.0:
        return 1.0
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
    p = 2.0 * norm.sf(z)
    return float(min(1.0, max(p, np.finfo(float).tiny)))


def wilcoxon_rank_sum(xs, ys, exact: bool | None = None) -> float:
    """Two-sided Wilcoxon rank-sum p-value.

    Exact when the pooled sample has at most ``EXACT_MAX_N`` values (or when
    ``exact`` forces it), normal approximation otherwise.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    n, m = len(xs), len(ys)
    if n == 0 or m == 0:
        raise ValueError("wilcoxon_rank_sum needs two non-empty samples")
    ranks = midranks(np.concatenate([xs, ys]))
    if exact is None:
        exact = n + m <= EXACT_MAX_N
    if exact:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        return _exact_rank_sum_p(ranks2, n, int(ranks2[:n].sum()))
    return _normal_rank_sum_p(ranks, n)


def holm_bonferroni(ps) -> list[float]:
    ps = [float(p) for p in ps]
    if any(not (0.0 < p <= 1.0) for p in ps):
        raise ValueError(f"p-values must lie in (0, 1]: {ps}")
    m = len(ps)
    order = sorted(range(m), key=lambda i: ps[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * ps[i]))
        adjusted[i] = running
    return adjusted


# ---------------------------------------------------------------- reports


def final_metric(record: RunRecord, metric: str, budget: int | None = None) -> float:
    """Per-run scalar used for ranking.  Unsolved runs count as ``budget + 1``."""
    if metric == "evaluations_to_goal":
        if record.evaluations_to_goal is not None:
            return float(record.evaluations_to_goal)
        cap = budget if budget is not None else record.budget
        if cap is None:
            raise ValueError("budget needed to rank unsolved runs")
        return float(cap + 1)
    if metric == "final_fitness":
        return record.final_fitness
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass
class ComparisonReport:
    metric: str
    summaries: dict  # variant -> {median, iqr, n, solved}
    comparisons: list  # {a, b, p_raw, p_adj, significant}
    missing: list = field(default_factory=list)  # {variant, seed, error}
    alpha: float = ALPHA

    def comparison(self, a: str, b: str) -> dict:
        for c in self.comparisons:
            if {c["a"], c["b"]} == {a, b}:
                return c
        raise KeyError((a, b))

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "alpha": self.alpha,
            "summaries": self.summaries,
            "comparisons": self.comparisons,
            "missing": self.missing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        return cls(data["metric"], data["summaries"], data["comparisons"],
                   data.get("missing", []), data.get("alpha", ALPHA))


def compare_records(records, metric="evaluations_to_goal", budget=None, alpha=ALPHA,
                    missing=None) -> ComparisonReport:
    by_variant: dict[str, list[RunRecord]] = {}
    for r in records:
        by_variant.setdefault(r.variant, []).append(r)
    values = {
        v: [final_metric(r, metric, budget) for r in sorted(rs, key=lambda r: r.seed)]
        for v, rs in by_variant.items()
    }
    summaries = {}
    for v, vals in values.items():
        med, iqr = median_iqr(vals)
        summaries[v] = {
            "median": med,
            "iqr": iqr,
            "n": len(vals),
            "solved": sum(r.evaluations_to_goal is not None for r in by_variant[v]),
        }
    pairs = list(itertools.combinations(sorted(values), 2))
    raw = [wilcoxon_rank_sum(values[a], values[b]) for a, b in pairs]
    adj = holm_bonferroni(raw) if raw else []
    comparisons = [
        {"a": a, "b": b, "p_raw": p, "p_adj": q, "significant": bool(q < alpha)}
        for (a, b), p, q in zip(pairs, raw, adj)
    ]
    return ComparisonReport(metric, summaries, comparisons, list(missing or []), alpha)


# ----------------------------------------------------------------- curves


CURVE_COLUMNS = ["variant", "seed", "evaluations", "max_fitness"]


def write_curves(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for r in records:
            for evals, fit in r.curve:
                w.writerow([r.variant, r.seed, evals, repr(float(fit))])


def read_curves(path) -> dict:
    """Map ``(variant, seed)`` to its list of ``(evaluations, max_fitness)``."""
    curves: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["variant"], int(row["seed"]))
            curves.setdefault(key, []).append((int(row["evaluations"]), float(row["max_fitness"])))
    return curves


# ------------------------------------------------------------ experiments


EXPERIMENT_KEYS = {"variants", "common"}


def load_experiment(path) -> dict[str, AlgorithmConfig]:
    """Read an experiment file.

    Either a single AlgorithmConfig object, or ``{"variants": {...}, "common": {...}}``
    where each variant maps a display name to a preset name or a full config
    object, and ``common`` overrides are applied to every variant.
    """
    with open(path) as fh:
        data = json.load(fh)
    return experiment_from_dict(data)


def experiment_from_dict(data: dict) -> dict[str, AlgorithmConfig]:
    if not isinstance(data, dict):
        raise ValueError("experiment file must hold a JSON object")
    if "variants" not in data:
        cfg = AlgorithmConfig.from_dict(data)
        return {cfg.name: cfg}
    unknown = set(data) - EXPERIMENT_KEYS
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    common = dict(data.get("common", {}))
    variants = data["variants"]
    if isinstance(variants, list):
        variants = {v: v for v in variants}
    out = {}
    for name, spec in variants.items():
        if isinstance(spec, str):
            cfg = variant_config(spec, **common)
        else:
            cfg = AlgorithmConfig.from_dict({**common, **spec})
        out[name] = cfg.replace(name=name)
    return out


def run_dir_for(out_dir, variant: str, seed: int) -> Path:
    return Path(out_dir) / variant / f"seed_{seed}"


def _is_complete(run_dir: Path) -> bool:
    return (run_dir / "meta.json").exists() and (run_dir / "metrics.csv").exists()


def _execute(cfg: AlgorithmConfig, run_dir: Path) -> None:
    out = run(cfg)
    save_run(out, run_dir)


def run_experiment(variants: dict[str, AlgorithmConfig], seeds, out_dir, budget: int | None = None,
                   metric: str = "evaluations_to_goal", runner=None) -> ComparisonReport:
    """Run every (variant, seed) pair into its own directory, then aggregate.

    Completed run directories are reused.  A failing run is logged in the
    report's ``missing`` list without stopping the others.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runner = runner or _execute
    records, missing = [], []
    for name, base in variants.items():
        for seed in seeds:
            cfg = base.replace(seed=int(seed), name=name)
            if budget is not None:
                cfg = cfg.replace(total_evaluations=int(budget))
            rdir = run_dir_for(out_dir, name, seed)
            if not _is_complete(rdir):
                t0 = time.perf_counter()
                try:
                    runner(cfg, rdir)
                except Exception as exc:  # recorded per run, siblings continue
                    rdir.mkdir(parents=True, exist_ok=True)
                    (rdir / "error.txt").write_text(traceback.format_exc())
                    missing.append({"variant": name, "seed": int(seed), "error": repr(exc)})
                    log.warning("run %s seed %s failed: %r", name, seed, exc)
                    continue
                log.info("run %s seed %s done in %.1fs", name, seed, time.perf_counter() - t0)
            records.append(RunRecord.from_run_dir(rdir))
    return _emit(records, missing, out_dir, metric, budget)


def _emit(records, missing, out_dir: Path, metric, budget) -> ComparisonReport:
    report = compare_records(records, metric=metric, budget=budget, missing=missing)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    write_curves(out_dir / "curves.csv", records)
    return report


def collect_records(out_dir) -> tuple[list[RunRecord], list[dict]]:
    """Records of every completed run under ``out_dir``; failed runs are listed separately."""
    records, missing = [], []
    for rdir in sorted(Path(out_dir).glob("*/seed_*")):
        if _is_complete(rdir):
            records.append(RunRecord.from_run_dir(rdir))
        elif (rdir / "error.txt").exists():
            missing.append({"variant": rdir.parent.name, "seed": int(rdir.name.split("_", 1)[1]),
                            "error": (rdir / "error.txt").read_text().strip().splitlines()[-1]})
    return records, missing


def stats_from_dirs(out_dir, metric: str = "evaluations_to_goal", budget=None) -> ComparisonReport:
    records, missing = collect_records(out_dir)
    if not records:
        raise FileNotFoundError(f"no completed runs under {out_dir}")
    return _emit(records, missing, Path(out_dir), metric, budget)


# ---------------------------------------------------------- latent contrast


def latent_contrast(seed: int, rounds: int = 5, latent_dim: int = 10, hidden: int = 64,
                    cfg: TrainConfig | None = None) -> dict:
    """Train a triplet encoder and an MSE encoder on the same labelled
    synthetic trajectories and report each latent space's silhouette.

    The triplet encoder alternates mining and training ``rounds`` times with
    a fresh margin each round, as it would across archive updates.
    """
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(seed)
    x, fitness, labels = clustered_trajectories(rng)
    result = {}
    for objective in ("mse", "triplet"):
        model = EncoderModel.create(x.shape[1:], latent_dim, hidden, rng=np.random.default_rng([seed, 1]))
        train_rng = np.random.default_rng([seed, 2])
        if objective == "mse":
            train(model, x, "mse", cfg, train_rng)
        else:
            for _ in range(rounds):
                triplets = mine_triplets(fitness, train_rng)
                margin = adaptive_margin(model.encode(x), latent_dim)
                train(model, triplets.gather(x), "triplet", cfg, train_rng, margin=margin)
        result[objective] = latent_diagnostics(model, x, labels)["silhouette"]
    return result
