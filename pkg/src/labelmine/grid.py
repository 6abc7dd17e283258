"""Experiment grid runner: the full method x classifier x size x budget table.

One grid samples a single train/validation split from the configured data
directory and runs every selected (method, classifier, size, iterations)
cell runs_per_cell times.  Each run is seeded independently of execution
order, so records are identical whether runs execute sequentially or in a
worker pool.  Records are appended to CSV as they complete; the CSV
deliberately excludes wall-clock time so repeated grids are byte-identical
(timings go to a sidecar file).

Every record carries both the classifier-validation fitness and the hidden
label accuracy against the training rows' ground truth: the gap between
those two numbers is the measurable form of the negative result.
"""

from __future__ import annotations

import csv
import multiprocessing as mp
import os
import time
import traceback
from dataclasses import dataclass, fields
from pathlib import Path
from statistics import mean, pstdev

from .classifiers import ClassifierKind
from .codes import label_accuracy
from .dataset import ExperimentSplit, LabeledSet, load_labeled_dir, sample_split
from .ga import GAConfig, run_ga
from .sa import SAConfig, run_sa
from .seeding import TAG_RUN, TAG_SPLIT, derive_seed

METHODS = ("ga", "ga-elitism", "sa")
KINDS = ("nn", "svm", "rf")

TRAIN_SIZE = 200
VAL_SIZE = 45


@dataclass(frozen=True)
class GridConfig:
    methods: tuple[str, ...] = METHODS
    kinds: tuple[str, ...] = KINDS
    sizes: tuple[int, ...] = (50, 100)
    iteration_budgets: tuple[int, ...] = (50, 100, 150)
    runs_per_cell: int = 5
    master_seed: int = 0
    sa_transitions: int = 10
    sa_radius: int = 5
    jobs: int | None = None

    def __post_init__(self):
        if not self.methods or not self.kinds or not self.sizes or not self.iteration_budgets:
            raise ValueError("methods, kinds, sizes and iteration budgets must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown classifier {k!r}; expected one of {KINDS}")
        if self.runs_per_cell < 1:
            raise ValueError(f"runs_per_cell must be >= 1, got {self.runs_per_cell}")

    def tasks(self) -> list[tuple[str, str, int, int, int]]:
        """All (method, kind, size, iterations, run) cells in record order."""
        return [
            (method, kind, size, iterations, run)
            for kind in self.kinds
            for method in self.methods
            for size in self.sizes
            for iterations in self.iteration_budgets
            for run in range(self.runs_per_cell)
        ]


@dataclass(frozen=True)
class RunRecord:
    method: str
    classifier: str
    size: int
    iterations: int
    run: int
    initial_fitness: float
    final_fitness: float
    initial_label_accuracy: float
    final_label_accuracy: float
    wall_time_s: float
    seed: int


CSV_COLUMNS = [f.name for f in fields(RunRecord)]
_FLOAT_COLUMNS = {
    "initial_fitness",
    "final_fitness",
    "initial_label_accuracy",
    "final_label_accuracy",
    "wall_time_s",
}


def run_seed(master_seed: int, method: str, kind: str, size: int, iterations: int, run: int) -> int:
    """Stable per-run seed; independent of which other cells are selected."""
    return derive_seed(
        master_seed, TAG_RUN, METHODS.index(method), KINDS.index(kind), size, iterations, run
    )


def grid_split(source: LabeledSet, master_seed: int) -> ExperimentSplit:
    """The one split every cell of a grid shares."""
    return sample_split(source, TRAIN_SIZE, VAL_SIZE, derive_seed(master_seed, TAG_SPLIT))


def execute_run(
    method: str,
    kind_name: str,
    size: int,
    iterations: int,
    run: int,
    seed: int,
    split: ExperimentSplit,
    sa_transitions: int = 10,
    sa_radius: int = 5,
) -> RunRecord:
    """One optimization run -> one record with both accuracy metrics."""
    kind = ClassifierKind.from_name(kind_name)
    truth = split.train.labels
    t0 = time.perf_counter()
    if method == "sa":
        config = SAConfig(
            iterations=iterations,
            transitions_per_iteration=sa_transitions,
            neighborhood_size=size,
            neighbor_radius=sa_radius,
            master_seed=seed,
        )
        result = run_sa(config, split, kind)
        initial_fitness = result.initial_fitness
        initial_code = result.initial_code
    else:
        config = GAConfig(
            population_size=size,
            iterations=iterations,
            elitism=(method == "ga-elitism"),
            master_seed=seed,
        )
        result = run_ga(config, split, kind)
        initial_fitness = result.initial_best_fitness
        initial_code = result.initial_best_code
    return RunRecord(
        method=method,
        classifier=kind_name,
        size=size,
        iterations=iterations,
        run=run,
        initial_fitness=initial_fitness,
        final_fitness=result.best_fitness,
        initial_label_accuracy=label_accuracy(initial_code, truth),
        final_label_accuracy=label_accuracy(result.best_code, truth),
        wall_time_s=time.perf_counter() - t0,
        seed=seed,
    )


# -- worker-pool plumbing ----------------------------------------------------

_WORKER_SPLIT: ExperimentSplit | None = None
_WORKER_GRID: GridConfig | None = None


def _worker_init(split: ExperimentSplit, config: GridConfig):
    global _WORKER_SPLIT, _WORKER_GRID
    _WORKER_SPLIT = split
    _WORKER_GRID = config


def _worker_run(task):
    method, kind, size, iterations, run = task
    seed = run_seed(_WORKER_GRID.master_seed, method, kind, size, iterations, run)
    try:
        record = execute_run(
            method, kind, size, iterations, run, seed, _WORKER_SPLIT,
            _WORKER_GRID.sa_transitions, _WORKER_GRID.sa_radius,
        )
        return ("ok", task, record)
    except Exception:
        return ("error", task, traceback.format_exc())


def run_grid(
    config: GridConfig,
    data_dir,
    out_dir,
    progress=None,
) -> list[RunRecord]:
    """Run every selected cell and persist records incrementally.

    Writes records.csv (deterministic), timings.csv (records plus wall
    time) and, when any run fails, failures.txt.  Failed runs are skipped,
    not fatal.  `progress` is an optional callable fed one RunRecord at a
    time as results arrive.
    """
    source = load_labeled_dir(data_dir, "train")
    split = grid_split(source, config.master_seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = config.tasks()
    jobs = config.jobs or os.cpu_count() or 1
    jobs = max(1, min(jobs, len(tasks)))

    records: list[RunRecord] = []
    failures: list[str] = []
    records_path = out_dir / "records.csv"
    timings_path = out_dir / "timings.csv"
    with open(records_path, "w", newline="") as rec_fh, open(
        timings_path, "w", newline=""
    ) as tim_fh:
        rec_writer = _start_csv(rec_fh, include_timing=False)
        tim_writer = _start_csv(tim_fh, include_timing=True)

        def consume(outcome):
            status, task, payload = outcome
            if status == "ok":
                records.append(payload)
                _write_row(rec_writer, payload, include_timing=False)
                rec_fh.flush()
                _write_row(tim_writer, payload, include_timing=True)
                tim_fh.flush()
                if progress is not None:
                    progress(payload)
            else:
                failures.append(f"task {task}:\n{payload}\n")

        if jobs == 1:
            _worker_init(split, config)
            for task in tasks:
                consume(_worker_run(task))
        else:
            # spawned workers re-import with a clean, single-threaded BLAS
            os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
            ctx = mp.get_context("spawn")
            with ctx.Pool(jobs, initializer=_worker_init, initargs=(split, config)) as pool:
                for outcome in pool.imap(_worker_run, tasks, chunksize=1):
                    consume(outcome)

    if failures:
        (out_dir / "failures.txt").write_text("".join(failures))
    return records


# -- CSV persistence ---------------------------------------------------------

def _start_csv(fh, include_timing: bool):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_columns(include_timing))
    return writer


def _columns(include_timing: bool) -> list[str]:
    if include_timing:
        return list(CSV_COLUMNS)
    return [c for c in CSV_COLUMNS if c != "wall_time_s"]


def _write_row(writer, record: RunRecord, include_timing: bool):
    row = []
    for col in _columns(include_timing):
        value = getattr(record, col)
        row.append(f"{value:.4f}" if col in _FLOAT_COLUMNS else str(value))
    writer.writerow(row)


def emit_csv(records, path, include_timing: bool = False) -> None:
    """Write records to CSV; floats at 4 decimal places.

    Wall time is excluded by default so that identical grid configurations
    yield byte-identical files; pass include_timing=True for full fidelity.
    """
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = _start_csv(fh, include_timing)
            for record in records:
                _write_row(writer, record, include_timing)
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def read_records(path) -> list[RunRecord]:
    """Inverse of emit_csv (wall time defaults to 0.0 when not stored)."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                RunRecord(
                    method=row["method"],
                    classifier=row["classifier"],
                    size=int(row["size"]),
                    iterations=int(row["iterations"]),
                    run=int(row["run"]),
                    initial_fitness=float(row["initial_fitness"]),
                    final_fitness=float(row["final_fitness"]),
                    initial_label_accuracy=float(row["initial_label_accuracy"]),
                    final_label_accuracy=float(row["final_label_accuracy"]),
                    wall_time_s=float(row.get("wall_time_s", 0.0) or 0.0),
                    seed=int(row["seed"]),
                )
            )
    return records


# -- summaries ---------------------------------------------------------------

@dataclass(frozen=True)
class CellSummary:
    classifier: str
    method: str
    size: int
    iterations: int
    runs: int
    initial_fitness_mean: float
    initial_fitness_std: float
    final_fitness_mean: float
    final_fitness_std: float
    initial_label_accuracy_mean: float
    initial_label_accuracy_std: float
    final_label_accuracy_mean: float
    final_label_accuracy_std: float


def summarize(records) -> list[CellSummary]:
    """Per-cell means and standard deviations, in the grid's display order."""
    if not records:
        raise ValueError("no records to summarize")
    cells: dict[tuple, list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.classifier, r.method, r.size, r.iterations), []).append(r)

    def stats(values):
        return mean(values), pstdev(values) if len(values) > 1 else 0.0

    out = []
    for key in sorted(cells, key=_cell_sort_key):
        group = cells[key]
        fi = stats([r.initial_fitness for r in group])
        ff = stats([r.final_fitness for r in group])
        li = stats([r.initial_label_accuracy for r in group])
        lf = stats([r.final_label_accuracy for r in group])
        out.append(
            CellSummary(
                classifier=key[0],
                method=key[1],
                size=key[2],
                iterations=key[3],
                runs=len(group),
                initial_fitness_mean=fi[0],
                initial_fitness_std=fi[1],
                final_fitness_mean=ff[0],
                final_fitness_std=ff[1],
                initial_label_accuracy_mean=li[0],
                initial_label_accuracy_std=li[1],
                final_label_accuracy_mean=lf[0],
                final_label_accuracy_std=lf[1],
            )
        )
    return out


def _cell_sort_key(key):
    classifier, method, size, iterations = key
    kind_rank = KINDS.index(classifier) if classifier in KINDS else len(KINDS)
    method_rank = METHODS.index(method) if method in METHODS else len(METHODS)
    return (kind_rank, iterations, method_rank, size)


def render_summary(records) -> str:
    """Aligned text tables in the reference row/column arrangement:
    one row per (classifier, iterations), one column block per (method, size)."""
    summaries = summarize(records)
    cells = {(s.classifier, s.method, s.size, s.iterations): s for s in summaries}
    kinds = [k for k in KINDS if any(s.classifier == k for s in summaries)]
    methods = [m for m in METHODS if any(s.method == m for s in summaries)]
    sizes = sorted({s.size for s in summaries})
    budgets = sorted({s.iterations for s in summaries})

    def table(metric: str) -> str:
        if metric == "fitness":
            getter = lambda s: (
                s.initial_fitness_mean, s.initial_fitness_std,
                s.final_fitness_mean, s.final_fitness_std,
            )
        else:
            getter = lambda s: (
                s.initial_label_accuracy_mean, s.initial_label_accuracy_std,
                s.final_label_accuracy_mean, s.final_label_accuracy_std,
            )
        label = {
            "fitness": "validation-accuracy fitness [%], mean +/- std over runs",
            "labels": "hidden label accuracy [%], mean +/- std over runs",
        }[metric]
        colw = 28
        head0 = " " * 10
        head1 = f"{'cls':<4}{'iters':>6}"
        for m in methods:
            for size in sizes:
                head0 += f"{m + ' / ' + str(size):>{colw}}"
                head1 += f"{'initial -> final':>{colw}}"
        lines = [label, head0, head1, "-" * len(head1)]
        for kind in kinds:
            for iters in budgets:
                row = f"{kind:<4}{iters:>6}"
                for m in methods:
                    for size in sizes:
                        s = cells.get((kind, m, size, iters))
                        if s is None:
                            row += f"{'-':>{colw}}"
                            continue
                        im, isd, fm, fsd = getter(s)
                        cell = (
                            f"{100 * im:5.1f}+-{100 * isd:4.1f} ->"
                            f"{100 * fm:5.1f}+-{100 * fsd:4.1f}"
                        )
                        row += f"{cell:>{colw}}"
                lines.append(row)
        return "\n".join(lines)

    final_fit = [r.final_fitness for r in records]
    final_lab = [r.final_label_accuracy for r in records]
    footer = (
        f"runs: {len(records)}; overall mean final fitness "
        f"{100 * mean(final_fit):.1f}%, overall mean final label accuracy "
        f"{100 * mean(final_lab):.1f}%"
    )
    return table("fitness") + "\n\n" + table("labels") + "\n\n" + footer + "\n"


# -- reproduction bands -------------------------------------------------------

def check_bands(records) -> list[tuple[str, bool, str]]:
    """The negative-result acceptance bands over a set of records."""
    checks = []
    summaries = summarize(records)
    outside = [s for s in summaries if not 0.05 <= s.final_fitness_mean <= 0.30]
    extreme = max(summaries, key=lambda s: abs(s.final_fitness_mean - 0.175))
    checks.append(
        (
            "per-cell mean final fitness in [5%, 30%]",
            not outside,
            f"{len(outside)}/{len(summaries)} cells outside; extreme cell "
            f"{extreme.classifier}/{extreme.method}/{extreme.size}/{extreme.iterations}"
            f" at {100 * extreme.final_fitness_mean:.1f}%",
        )
    )
    overall = mean([r.final_fitness for r in records])
    checks.append(
        ("overall mean final fitness below 25%", overall < 0.25, f"{100 * overall:.1f}%")
    )
    initial = mean([r.initial_fitness for r in records])
    checks.append(
        (
            "mean initial fitness in [6%, 18%] (chance level)",
            0.06 <= initial <= 0.18,
            f"{100 * initial:.1f}%",
        )
    )
    elitism = [r for r in records if r.method == "ga-elitism"]
    if elitism:
        monotone = all(r.final_fitness >= r.initial_fitness - 1e-12 for r in elitism)
        checks.append(
            ("elitism runs never end below their initial best", monotone, f"{len(elitism)} runs")
        )
    return checks
