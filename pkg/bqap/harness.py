import os
import csv
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from bqap.archive import nondominated_filter
from bqap.errors import BackendError, BqapError, IoError
from bqap.instance import format_number, load_front, load_instance
from bqap.metrics import hypervolume_2d, reference_point, summarize, t_test
from bqap.models import (
    BiQapInstance,
    BudgetMode,
    EvaluatedSolution,
    ExperimentConfig,
    FrontPoint,
    InstanceReport,
    MethodKind,
    MethodSummary,
    ObjectivePair,
    PairwiseTest,
    ReferenceFront,
    ReferencePoint,
    RunRecord,
    RunReport,
    ScalarisationPlan,
    WeightVector,
)
from bqap.scalarisation import run_method
from bqap.solver_service import get_backend

logger = logging.getLogger(__name__)

SEED_SPACING = 65537


def run_seed(base_seed: int, run: int) -> int:
    return base_seed + run * SEED_SPACING


@dataclass(frozen=True)
class CellOutcome:
    """Final front of one (instance, method, run) cell plus its per-iteration history"""
    front: List[EvaluatedSolution]
    weights: List[WeightVector]
    snapshots: List[List[ObjectivePair]]


def run_cell(instance: BiQapInstance, backend_name: str, plan: ScalarisationPlan) -> CellOutcome:
    weights: List[WeightVector] = []
    snapshots: List[List[ObjectivePair]] = []

    def record(index, weight, archive):
        weights.append(weight)
        snapshots.append(archive.objectives())

    archive = run_method(instance, get_backend(backend_name), plan, on_iteration=record)
    return CellOutcome(front=archive.front_sorted(), weights=weights, snapshots=snapshots)


def _effective_workers(cfg: ExperimentConfig) -> int:
    workers = cfg.workers
    if cfg.budget_mode is BudgetMode.WALLCLOCK:
        cores = os.cpu_count() or 1
        if workers > cores:
            logger.warning(f"Wall-clock budgets: capping workers at {cores} logical CPUs (requested {workers})")
            workers = cores
    return workers


def _run_cells(
    cfg: ExperimentConfig,
    instances: Sequence[BiQapInstance],
    progress: bool,
) -> Dict[Tuple[int, MethodKind, int], CellOutcome]:
    cells = [
        (index, method, run)
        for index in range(len(instances))
        for method in cfg.methods
        for run in range(1, cfg.runs + 1)
    ]
    outcomes: Dict[Tuple[int, MethodKind, int], CellOutcome] = {}
    workers = _effective_workers(cfg)

    def plan_for(method: MethodKind, run: int) -> ScalarisationPlan:
        return cfg.plan(method, run_seed(cfg.base_seed, run))

    def context(cell) -> str:
        index, method, run = cell
        return f"{instances[index].name} / {method.value} / run {run}"

    with tqdm(total=len(cells), desc="Scalarisation runs", unit="run", disable=not progress) as pbar:
        if workers == 1:
            for cell in cells:
                index, method, run = cell
                try:
                    outcomes[cell] = run_cell(instances[index], cfg.backend, plan_for(method, run))
                except BqapError as e:
                    raise BackendError(f"{context(cell)}: {e}") from e
                logger.info(f"Finished {context(cell)}: {len(outcomes[cell].front)} non-dominated points")
                pbar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(run_cell, instances[cell[0]], cfg.backend, plan_for(cell[1], cell[2])): cell
                    for cell in cells
                }
                for future in as_completed(futures):
                    cell = futures[future]
                    try:
                        outcomes[cell] = future.result()
                    except BqapError as e:
                        raise BackendError(f"{context(cell)}: {e}") from e
                    logger.info(f"Finished {context(cell)}: {len(outcomes[cell].front)} non-dominated points")
                    pbar.update(1)
    return outcomes


def _mark_best(summaries: List[MethodSummary], alpha: float) -> None:
    """Best mean, plus every method not significantly different from it"""
    leader = max(summaries, key=lambda s: s.mean_hv)
    for summary in summaries:
        if summary.mean_hv == leader.mean_hv:
            summary.best = True
        elif len(summary.runs) >= 2 and len(leader.runs) >= 2:
            summary.best = not t_test(summary.hypervolumes, leader.hypervolumes, alpha).significant
        else:
            summary.best = False


def _pairwise_tests(summaries: List[MethodSummary], alpha: float) -> List[PairwiseTest]:
    tests = []
    for a, b in combinations(summaries, 2):
        if len(a.runs) < 2 or len(b.runs) < 2:
            continue
        result = t_test(a.hypervolumes, b.hypervolumes, alpha)
        tests.append(
            PairwiseTest(
                method_a=a.method,
                method_b=b.method,
                t=result.t,
                df=result.df,
                p_value=result.p_value,
                significant=result.significant,
            )
        )
    return tests


def _instance_report(
    cfg: ExperimentConfig,
    index: int,
    instance: BiQapInstance,
    known_front: Optional[ReferenceFront],
    outcomes: Dict[Tuple[int, MethodKind, int], CellOutcome],
) -> InstanceReport:
    if known_front is not None:
        reference_front = list(known_front.points)
        source = "file"
        ref: ReferencePoint = reference_point(reference_front)
    else:
        # One empirical reference shared by every method of this instance. The maxima
        # run over every archived point so that each run's front lies inside the box.
        union = [
            solution.objectives.as_tuple()
            for (cell_index, _, _), outcome in outcomes.items()
            if cell_index == index
            for solution in outcome.front
        ]
        reference_front = [ObjectivePair(f1=f1, f2=f2) for f1, f2 in nondominated_filter(union)]
        source = "empirical"
        ref = reference_point(union)

    summaries = []
    for method in cfg.methods:
        records = []
        for run in range(1, cfg.runs + 1):
            outcome = outcomes[(index, method, run)]
            records.append(
                RunRecord(
                    run=run,
                    seed=run_seed(cfg.base_seed, run),
                    hypervolume=hypervolume_2d([s.objectives for s in outcome.front], ref),
                    front=[
                        FrontPoint(
                            f1=s.objectives.f1,
                            f2=s.objectives.f2,
                            lambda1=s.generating_weight.lambda1,
                            lambda2=s.generating_weight.lambda2,
                        )
                        for s in outcome.front
                    ],
                    weights=outcome.weights,
                    hypervolume_trace=[hypervolume_2d(snapshot, ref) for snapshot in outcome.snapshots],
                )
            )
        mean_hv, std_hv = summarize([r.hypervolume for r in records])
        summaries.append(MethodSummary(method=method, runs=records, mean_hv=mean_hv, std_hv=std_hv))

    _mark_best(summaries, cfg.alpha)
    significance = _pairwise_tests(summaries, cfg.alpha)

    for summary in summaries:
        logger.info(
            f"{instance.name} {summary.method.value}: mean HV {summary.mean_hv:.6g}, std {summary.std_hv:.6g}"
            f"{' (best)' if summary.best else ''}"
        )
    for test in significance:
        logger.info(
            f"{instance.name} {test.method_a.value} vs {test.method_b.value}: t={test.t:.4g}, "
            f"p={test.p_value:.4g}{' significant' if test.significant else ''}"
        )

    return InstanceReport(
        name=instance.name,
        n=instance.n,
        reference_point=ref,
        reference_source=source,
        reference_front=reference_front,
        methods=summaries,
        significance=significance,
    )


def run_experiment(cfg: ExperimentConfig, progress: bool = True) -> RunReport:
    """Every method x run on every instance, scored by hypervolume against a shared reference"""
    get_backend(cfg.backend)
    instances = [load_instance(path, cfg.matrix_order) for path in cfg.instance_paths]
    known_fronts: List[Optional[ReferenceFront]] = (
        [load_front(path) for path in cfg.reference_front_paths]
        if cfg.reference_front_paths
        else [None] * len(instances)
    )

    logger.info(
        f"Running {len(cfg.methods)} method(s) x {cfg.runs} run(s) x {cfg.num_weights} weight(s) "
        f"on {len(instances)} instance(s) with backend {cfg.backend} ({cfg.budget_mode.value} budget)"
    )
    outcomes = _run_cells(cfg, instances, progress)

    reports = [
        _instance_report(cfg, index, instance, known_fronts[index], outcomes)
        for index, instance in enumerate(instances)
    ]

    best_counts = {method.value: 0 for method in cfg.methods}
    for report in reports:
        for summary in report.methods:
            if summary.best:
                best_counts[summary.method.value] += 1
    for method, count in best_counts.items():
        logger.info(f"{method}: best (or not significantly different from best) on {count} of {len(reports)} instance(s)")

    return RunReport(config=cfg, instances=reports, best_counts=best_counts)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote {path}")


def _safe_name(name: str) -> str:
    return name.replace(os.sep, "_").replace("/", "_") or "instance"


def emit_summary(report: RunReport, destination: Path) -> None:
    """summary.csv (one row per instance and method) and report.json under destination"""
    destination = Path(destination)
    rows = [
        [
            instance.name,
            summary.method.value,
            format_number(summary.mean_hv),
            format_number(summary.std_hv),
            "true" if summary.best else "false",
        ]
        for instance in report.instances
        for summary in instance.methods
    ]
    _write_csv(destination / "summary.csv", ["instance", "method", "mean_hv", "std_hv", "best_flag"], rows)

    json_path = destination / "report.json"
    try:
        with open(json_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(report.model_dump_json(indent=2))
            handle.write("\n")
    except OSError as e:
        raise IoError(f"cannot write {json_path}: {e.strerror or e}") from e
    logger.info(f"Wrote {json_path}")


def emit_front_csv(report: RunReport, destination: Path) -> None:
    """fronts/<instance>/<method>_run<r>.csv per run and fronts/<instance>/reference.csv"""
    root = Path(destination) / "fronts"
    for instance in report.instances:
        folder = root / _safe_name(instance.name)
        for summary in instance.methods:
            for record in summary.runs:
                rows = [
                    [format_number(p.f1), format_number(p.f2), format_number(p.lambda1), format_number(p.lambda2)]
                    for p in record.front
                ]
                _write_csv(folder / f"{summary.method.value}_run{record.run:02d}.csv", ["f1", "f2", "lambda1", "lambda2"], rows)
        reference_rows = [[format_number(p.f1), format_number(p.f2)] for p in instance.reference_front]
        _write_csv(folder / "reference.csv", ["f1", "f2"], reference_rows)
