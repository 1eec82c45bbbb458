"""Command-line entry point: ``run``, ``compare``, ``stats`` and ``diagnose-latent``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import METRICS, experiment_from_dict, latent_contrast, run_experiment, stats_from_dirs
from .engine import VARIANTS, AlgorithmConfig, run, save_run, variant_config

EXIT_OK, EXIT_USAGE, EXIT_RUN = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed required")
    return seeds


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")


def _single_config(args) -> AlgorithmConfig:
    try:
        if args.config:
            cfg = AlgorithmConfig.from_dict(_read_json(args.config))
            if args.variant:
                cfg = cfg.replace(name=args.variant)
        elif args.variant:
            cfg = variant_config(args.variant)
        else:
            raise UsageError("run needs --config or --variant")
        if args.budget is not None:
            cfg = cfg.replace(total_evaluations=args.budget)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(str(exc))
    return cfg


def cmd_run(args) -> int:
    cfg = _single_config(args)
    seeds = args.seeds or [cfg.seed]
    out_dir = Path(args.out)
    failed = False
    for seed in seeds:
        c = cfg.replace(seed=seed)
        try:
            result = run(c)
        except Exception as exc:
            logging.error("%s seed %d failed: %r", c.name, seed, exc)
            failed = True
            continue
        rdir = save_run(result, out_dir / c.name / f"seed_{seed}" if len(seeds) > 1 else out_dir)
        print(f"{c.name} seed={seed} best_fitness={result.best_fitness:.4f} "
              f"evaluations={result.evaluations} -> {rdir}")
    return EXIT_RUN if failed else EXIT_OK


def cmd_compare(args) -> int:
    try:
        if args.config:
            variants = experiment_from_dict(_read_json(args.config))
        elif args.variant:
            variants = {v: variant_config(v) for v in args.variant.split(",")}
        else:
            raise UsageError("compare needs --config or --variant a,b,...")
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(str(exc))
    seeds = args.seeds or [0]
    report = run_experiment(variants, seeds, args.out, budget=args.budget, metric=args.metric)
    _print_report(report)
    return EXIT_RUN if report.missing else EXIT_OK


def cmd_stats(args) -> int:
    try:
        report = stats_from_dirs(args.out, metric=args.metric, budget=args.budget)
    except FileNotFoundError as exc:
        raise UsageError(str(exc))
    _print_report(report)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    seeds = args.seeds or list(range(10))
    wins = 0
    rows = []
    for seed in seeds:
        res = latent_contrast(seed)
        wins += res["triplet"] > res["mse"]
        rows.append({"seed": seed, **res})
        print(f"seed={seed} silhouette triplet={res['triplet']:.4f} mse={res['mse']:.4f}")
    print(f"triplet > mse in {wins}/{len(seeds)} seeds")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "latent_contrast.json", "w") as fh:
            json.dump({"runs": rows, "triplet_wins": wins}, fh, indent=2)
    return EXIT_OK


def _print_report(report) -> None:
    print(f"metric: {report.metric}")
    for v, s in sorted(report.summaries.items()):
        print(f"  {v:28s} median={s['median']:.4g} iqr={s['iqr']:.4g} n={s['n']} solved={s['solved']}")
    for c in report.comparisons:
        flag = "*" if c["significant"] else " "
        print(f"  {c['a']} vs {c['b']}: p={c['p_raw']:.4g} holm={c['p_adj']:.4g} {flag}")
    for m in report.missing:
        print(f"  missing: {m['variant']} seed {m['seed']}: {m['error']}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aurora-xcon", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seeds", type=_seeds, help="comma-separated seeds, e.g. 0,1,2")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--budget", type=int, help="total evaluations per run")
        sp.add_argument("--variant", help=f"preset name(s): {', '.join(VARIANTS)}")

    sp = sub.add_parser("run", help="run one variant")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("compare", help="run several variants over seeds and compare them")
    common(sp)
    sp.add_argument("--metric", choices=METRICS, default="evaluations_to_goal")
    sp.set_defaults(func=cmd_compare)
    sp = sub.add_parser("stats", help="recompute the report from existing run directories")
    sp.add_argument("--out", required=True)
    sp.add_argument("--budget", type=int)
    sp.add_argument("--metric", choices=METRICS, default="evaluations_to_goal")
    sp.set_defaults(func=cmd_stats)
    sp = sub.add_parser("diagnose-latent", help="triplet vs reconstruction latent structure on synthetic clusters")
    sp.add_argument("--seeds", type=_seeds)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
