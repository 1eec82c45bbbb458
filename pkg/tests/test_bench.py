import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from aurora_xcon.bench import (
    RunRecord,
    compare_records,
    evaluations_to_goal,
    experiment_from_dict,
    holm_bonferroni,
    median_iqr,
    read_curves,
    run_dir_for,
    run_experiment,
    stats_from_dirs,
    wilcoxon_rank_sum,
    write_curves,
)
from aurora_xcon.engine import run, save_run, variant_config


def enumeration_p(xs, ys):
    """Two-sided exact p by listing every split of the pooled values,
    scored with the Mann-Whitney U count (ties worth one half)."""
    pooled = list(xs) + list(ys)
    n, total = len(xs), len(pooled)

    def u_stat(idx):
        a = [pooled[i] for i in idx]
        b = [pooled[i] for i in range(total) if i not in idx]
        return sum(Fraction(1) if x > y else Fraction(1, 2) if x == y else 0 for x in a for y in b)

    centre = Fraction(n * (total - n), 2)
    observed = abs(u_stat(range(n)) - centre)
    splits = list(itertools.combinations(range(total), n))
    hits = sum(abs(u_stat(set(s)) - centre) >= observed for s in splits)
    return hits / len(splits)


# ------------------------------------------------------------- records


def test_evaluations_to_goal_examples():
    assert evaluations_to_goal(RunRecord("a", 0, [(64, -0.5), (40_000, 0.0), (40_064, 0.0)])) == 40_000
    assert evaluations_to_goal(RunRecord("a", 0, [(64, -0.5), (128, -0.1)])) is None
    assert evaluations_to_goal(RunRecord("a", 0, [(64, 0.0), (128, 0.0)])) == 64


def test_record_rejects_non_increasing_curve():
    with pytest.raises(ValueError):
        RunRecord("a", 0, [(64, -1.0), (64, -0.5)])


# ------------------------------------------------------------ summaries


def test_median_iqr_examples():
    assert median_iqr([1, 2, 3, 4, 5]) == (3.0, 2.0)
    assert median_iqr([5]) == (5.0, 0.0)
    with pytest.raises(ValueError):
        median_iqr([])
    med, _ = median_iqr(np.random.default_rng(0).uniform(size=1000))
    assert abs(med - 0.5) < 0.05


# ------------------------------------------------------------- wilcoxon


def test_wilcoxon_examples():
    assert wilcoxon_rank_sum([1, 2, 3], [4, 5, 6]) == pytest.approx(0.1)
    assert wilcoxon_rank_sum([1, 2, 3], [1, 2, 3]) == 1.0
    assert wilcoxon_rank_sum([7.0], [7.0]) == 1.0
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([], [1.0])


def test_exact_matches_enumeration_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n, m = rng.integers(1, 6, size=2)
        xs, ys = rng.integers(0, 4, n).tolist(), rng.integers(0, 4, m).tolist()
        assert wilcoxon_rank_sum(xs, ys) == pytest.approx(float(enumeration_p(xs, ys)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=15), st.lists(st.integers(-3, 3), min_size=1, max_size=15))
def test_wilcoxon_symmetric_and_in_range(xs, ys):
    p = wilcoxon_rank_sum(xs, ys)
    assert 0.0 < p <= 1.0
    assert p == pytest.approx(wilcoxon_rank_sum(ys, xs), abs=1e-12)


def test_exact_and_normal_agree_at_twelve():
    rng = np.random.default_rng(4)
    for n in range(4, 9):
        for _ in range(50):
            xs = rng.normal(size=n)
            ys = rng.normal(size=12 - n) + rng.uniform(0, 2)
            assert abs(wilcoxon_rank_sum(xs, ys, exact=True) - wilcoxon_rank_sum(xs, ys, exact=False)) < 0.02


def test_normal_branch_matches_scipy():
    rng = np.random.default_rng(5)
    for _ in range(20):
        xs = rng.integers(0, 10, 15).astype(float)
        ys = rng.integers(0, 10, 17).astype(float) + 1
        ref = mannwhitneyu(xs, ys, alternative="two-sided", method="asymptotic", use_continuity=True).pvalue
        assert wilcoxon_rank_sum(xs, ys) == pytest.approx(ref, rel=1e-9)


# ----------------------------------------------------------------- holm


def test_holm_examples():
    assert holm_bonferroni([0.01, 0.04]) == pytest.approx([0.02, 0.04])
    assert holm_bonferroni([0.3]) == [0.3]
    assert holm_bonferroni([0.5, 0.6, 0.7]) == [1.0, 1.0, 1.0]
    assert holm_bonferroni([0.04, 0.01]) == pytest.approx([0.04, 0.02])
    with pytest.raises(ValueError):
        holm_bonferroni([0.0, 0.5])
    with pytest.raises(ValueError):
        holm_bonferroni([1.5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=10), st.randoms())
def test_holm_properties(ps, rnd):
    adj = holm_bonferroni(ps)
    assert all(a >= p for a, p in zip(adj, ps))
    order = np.argsort(ps, kind="stable")
    assert np.all(np.diff(np.array(adj)[order]) >= 0)
    perm = list(range(len(ps)))
    rnd.shuffle(perm)
    adj_perm = holm_bonferroni([ps[i] for i in perm])
    assert adj_perm == pytest.approx([adj[i] for i in perm])


# --------------------------------------------------------------- curves


def test_curves_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    records = [
        RunRecord(v, s, [(64 * (i + 1), float(f)) for i, f in enumerate(np.sort(rng.normal(size=7)))])
        for v in ("a", "b") for s in (0, 3)
    ]
    write_curves(tmp_path / "curves.csv", records)
    back = read_curves(tmp_path / "curves.csv")
    assert set(back) == {(r.variant, r.seed) for r in records}
    for r in records:
        assert back[(r.variant, r.seed)] == r.curve


def test_report_unsolved_ranked_at_budget_plus_one():
    fast = [RunRecord("fast", s, [(64, -1.0), (128 + 64 * s, 0.0)], budget=1000) for s in range(5)]
    slow = [RunRecord("slow", s, [(64, -1.0), (128, -0.5)], budget=1000) for s in range(5)]
    rep = compare_records(fast + slow)
    assert rep.summaries["slow"]["median"] == 1001
    assert rep.summaries["slow"]["solved"] == 0
    c = rep.comparison("fast", "slow")
    assert c["p_raw"] == pytest.approx(2 / 252)
    assert c["significant"]


# ---------------------------------------------------------- experiments


def tiny(name, **kw):
    base = dict(env="point_maze", batch_size=16, total_evaluations=64, population_size=32,
                n_centroids=32, repertoire_capacity=32, encoder_hidden=8, latent_dim=3,
                encoder={"max_epochs": 3})
    base.update(kw)
    return variant_config(name, **base)


def test_experiment_counts_dirs_and_comparisons(tmp_path):
    variants = {"ga": tiny("ga"), "aurora": tiny("aurora")}
    rep = run_experiment(variants, [0, 1, 2], tmp_path)
    dirs = sorted(tmp_path.glob("*/seed_*"))
    assert len(dirs) == 6
    assert len(rep.comparisons) == 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["summaries"]) == {"ga", "aurora"}
    curves = read_curves(tmp_path / "curves.csv")
    assert len(curves) == 6
    again = stats_from_dirs(tmp_path)
    assert again.to_dict() == rep.to_dict()


def test_experiment_resume_skips_completed(tmp_path):
    calls = []

    def runner(cfg, rdir):
        calls.append((cfg.name, cfg.seed))
        save_run(run(cfg), rdir)

    variants = {"ga": tiny("ga")}
    run_experiment(variants, [0, 1], tmp_path, runner=runner)
    run_experiment(variants, [0, 1, 2], tmp_path, runner=runner)
    assert calls == [("ga", 0), ("ga", 1), ("ga", 2)]


def test_experiment_records_failures_and_continues(tmp_path):
    def runner(cfg, rdir):
        if cfg.seed == 1:
            raise RuntimeError("boom")
        save_run(run(cfg), rdir)

    rep = run_experiment({"ga": tiny("ga")}, [0, 1, 2], tmp_path, runner=runner)
    assert rep.missing == [{"variant": "ga", "seed": 1, "error": "RuntimeError('boom')"}]
    assert rep.summaries["ga"]["n"] == 2
    assert (run_dir_for(tmp_path, "ga", 1) / "error.txt").exists()
    assert stats_from_dirs(tmp_path).missing[0]["seed"] == 1


def test_budget_override_and_names(tmp_path):
    rep = run_experiment({"mine": tiny("ga")}, [0], tmp_path, budget=32)
    meta = json.loads((run_dir_for(tmp_path, "mine", 0) / "meta.json").read_text())
    assert meta["evaluations"] == 32 and meta["variant"] == "mine"
    assert list(rep.summaries) == ["mine"]


def test_experiment_file_parsing():
    variants = experiment_from_dict({"variants": ["ga", "aurora_xcon"], "common": {"total_evaluations": 640}})
    assert variants["aurora_xcon"].total_evaluations == 640
    custom = experiment_from_dict({"variants": {"slow_ga": {"algorithm": "ga", "iso_sigma": 0.01}}})
    assert custom["slow_ga"].iso_sigma == 0.01 and custom["slow_ga"].name == "slow_ga"
    single = experiment_from_dict({"algorithm": "ga"})
    assert list(single) == ["ga"]
    with pytest.raises(ValueError):
        experiment_from_dict({"variants": ["ga"], "extra": 1})
    with pytest.raises(ValueError):
        experiment_from_dict({"variants": {"x": {"algorithm": "ga", "typo": 1}}})


def test_null_comparison_rarely_significant():
    significant = 0
    for rep in range(10):
        records = []
        for name, offset in (("first", 0), ("second", 10)):
            for s in range(10):
                cfg = tiny("ga", seed=100 * rep + offset + s)
                out = run(cfg)
                records.append(RunRecord(name, cfg.seed, out.tracker.history))
        report = compare_records(records, metric="final_fitness")
        significant += report.comparisons[0]["significant"]
    assert significant <= 1
