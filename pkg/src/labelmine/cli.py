"""Command-line experiment harness.

Subcommands:
  grid       reproduce the full results table (or a filtered part of it)
  run        a single (method, classifier, size, iterations) cell
  oracle     brute-force acceptance check on a tiny synthetic problem
  sanity     true-label fitness-channel check for every classifier
  bench      compiled-vs-numpy kernel benchmark
  make-data  generate the stand-in digit corpus as IDX files

Exit status is nonzero iff an acceptance guard of the invoked subcommand
fails.
"""

import os
import sys

# Pin BLAS threads before numpy loads: reproducible timings, fork-safe pools.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import argparse
from pathlib import Path

from . import digits
from .bench import render_benchmark, run_benchmark
from .classifiers import ClassifierKind, active_backend
from .dataset import load_labeled_dir
from .fitness import evaluate
from .grid import (
    KINDS,
    METHODS,
    GridConfig,
    check_bands,
    emit_csv,
    execute_run,
    grid_split,
    render_summary,
    run_grid,
    run_seed,
)
from .oracle import oracle_acceptance

DEFAULT_DATA_DIR = "data"
DEFAULT_OUT_DIR = "results"


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--data-dir", default=DEFAULT_DATA_DIR, help="directory with the IDX files")
    p.add_argument("--out", default=DEFAULT_OUT_DIR, help="output directory")
    p.add_argument("--config", default=None, help="key=value config file overriding flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelmine",
        description="label-vector search with GA/SA and classifier-validation fitness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", help="run the experiment grid")
    g.add_argument("--method", default=",".join(METHODS),
                   help="comma list from {ga,ga-elitism,sa} (default: all)")
    g.add_argument("--classifier", default=",".join(KINDS),
                   help="comma list from {nn,svm,rf} (default: all)")
    g.add_argument("--size", default="50,100", help="population/neighborhood sizes")
    g.add_argument("--iterations", default="50,100,150", help="iteration budgets")
    g.add_argument("--runs", type=int, default=5, help="runs per cell")
    g.add_argument("--jobs", type=int, default=None, help="worker processes")
    _add_common(g)
    g.set_defaults(func=cmd_grid)

    r = sub.add_parser("run", help="run a single grid cell")
    r.add_argument("--method", required=True, choices=METHODS)
    r.add_argument("--classifier", required=True, choices=KINDS)
    r.add_argument("--size", type=int, default=50)
    r.add_argument("--iterations", type=int, default=50)
    r.add_argument("--runs", type=int, default=1)
    _add_common(r)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="synthetic brute-force acceptance check")
    o.add_argument("--runs", type=int, default=20, help="seeded engine runs")
    o.add_argument("--seed", type=int, default=101)
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("sanity", help="true-label fitness-channel check")
    s.add_argument("--threshold", type=float, default=0.60)
    _add_common(s)
    s.set_defaults(func=cmd_sanity)

    b = sub.add_parser("bench", help="compare compiled and numpy kernels")
    b.add_argument("--rows", type=int, default=200)
    b.add_argument("--cols", type=int, default=784)
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("make-data", help="write the stand-in digit corpus")
    m.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    m.add_argument("--train-count", type=int, default=digits.DEFAULT_TRAIN)
    m.add_argument("--test-count", type=int, default=digits.DEFAULT_TEST)
    m.add_argument("--seed", type=int, default=digits.DEFAULT_SEED)
    m.add_argument("--force", action="store_true", help="overwrite existing files")
    m.set_defaults(func=cmd_make_data)
    return parser


def apply_config_file(args: argparse.Namespace):
    """Apply key=value lines from --config; file values override flags."""
    path = Path(args.config)
    if not path.exists():
        raise SystemExit(f"config file not found: {path}")
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("config", "func", "command"):
            raise SystemExit(f"{path}:{lineno}: unknown config key {key!r}")
        current = getattr(args, dest)
        if isinstance(current, bool):
            value = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(args, dest, value)


def _parse_list(text, coerce=str) -> tuple:
    return tuple(coerce(part.strip()) for part in str(text).split(",") if part.strip())


def _report_checks(checks) -> bool:
    ok = True
    for name, passed, detail in checks:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok &= passed
    return ok


def cmd_grid(args) -> int:
    config = GridConfig(
        methods=_parse_list(args.method),
        kinds=_parse_list(args.classifier),
        sizes=_parse_list(args.size, int),
        iteration_budgets=_parse_list(args.iterations, int),
        runs_per_cell=args.runs,
        master_seed=args.seed,
        jobs=args.jobs,
    )
    total = len(config.tasks())
    print(f"grid: {total} runs on backend={active_backend()}, data={args.data_dir}")
    done = [0]

    def progress(record):
        done[0] += 1
        print(
            f"  [{done[0]:>4}/{total}] {record.classifier}/{record.method}"
            f"/size={record.size}/iters={record.iterations} run={record.run}"
            f" fitness {100 * record.initial_fitness:.1f}->{100 * record.final_fitness:.1f}%"
            f" labels {100 * record.final_label_accuracy:.1f}%",
            flush=True,
        )

    records = run_grid(config, args.data_dir, args.out, progress=progress)
    if not records:
        print("no runs completed", file=sys.stderr)
        return 1
    summary = render_summary(records)
    out_dir = Path(args.out)
    (out_dir / "summary.txt").write_text(summary)
    print(summary)
    ok = _report_checks(check_bands(records))
    failures = out_dir / "failures.txt"
    if failures.exists():
        print(f"some runs failed, see {failures}", file=sys.stderr)
        ok = False
    return 0 if ok else 1


def cmd_run(args) -> int:
    source = load_labeled_dir(args.data_dir, "train")
    split = grid_split(source, args.seed)
    records = []
    for run in range(args.runs):
        seed = run_seed(args.seed, args.method, args.classifier, args.size, args.iterations, run)
        record = execute_run(
            args.method, args.classifier, args.size, args.iterations, run, seed, split
        )
        records.append(record)
        print(
            f"run {run}: fitness {100 * record.initial_fitness:.1f}% -> "
            f"{100 * record.final_fitness:.1f}%, hidden label accuracy "
            f"{100 * record.initial_label_accuracy:.1f}% -> "
            f"{100 * record.final_label_accuracy:.1f}% ({record.wall_time_s:.1f}s)"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out_dir / "records.csv")
    emit_csv(records, out_dir / "timings.csv", include_timing=True)
    if args.method == "ga-elitism":
        ok = all(r.final_fitness >= r.initial_fitness - 1e-12 for r in records)
        print(f"[{'PASS' if ok else 'FAIL'}] elitism never ends below its initial best")
        return 0 if ok else 1
    return 0


def cmd_oracle(args) -> int:
    outcome = oracle_acceptance(runs=args.runs, master_seed=args.seed)
    need = int(0.95 * args.runs + 0.9999)
    checks = [
        (
            "oracle enumerated the whole search space",
            outcome.oracle.evaluations == outcome.search_space,
            f"{outcome.oracle.evaluations} of {outcome.search_space} codes",
        ),
        (
            "GA reaches the global optimum in >=95% of runs",
            outcome.ga_successes >= need,
            f"{outcome.ga_successes}/{args.runs}",
        ),
        (
            "SA reaches the global optimum in >=95% of runs",
            outcome.sa_successes >= need,
            f"{outcome.sa_successes}/{args.runs}",
        ),
    ]
    print(f"oracle optimum fitness: {outcome.oracle.best_fitness:.4f}")
    return 0 if _report_checks(checks) else 1


def cmd_sanity(args) -> int:
    source = load_labeled_dir(args.data_dir, "train")
    split = grid_split(source, args.seed)
    checks = []
    for name in KINDS:
        kind = ClassifierKind.from_name(name)
        accuracy = evaluate(split.train.labels, split, kind, seed=args.seed)
        checks.append(
            (
                f"{name} trained on true labels reaches >= {args.threshold:.0%}",
                accuracy >= args.threshold,
                f"{accuracy:.1%}",
            )
        )
    return 0 if _report_checks(checks) else 1


def cmd_bench(args) -> int:
    results = run_benchmark(rows=args.rows, cols=args.cols)
    print(f"active backend: {active_backend()}")
    print(render_benchmark(results))
    if not any(r.backend == "compiled" for r in results):
        print("compiled backend unavailable; numpy fallback only", file=sys.stderr)
    return 0


def cmd_make_data(args) -> int:
    directory = Path(args.data_dir)
    if args.force:
        path = digits.write_standin_corpus(directory, args.train_count, args.test_count, args.seed)
    else:
        path = digits.ensure_corpus(directory, args.train_count, args.test_count, args.seed)
    print(f"stand-in corpus ready in {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        apply_config_file(args)
    return args.func(args)


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
