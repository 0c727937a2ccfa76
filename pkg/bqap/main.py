import sys
import logging
import argparse
from pathlib import Path
from typing import List, Optional

import pydantic

from bqap.config import configure_logging, get_settings
from bqap.encoding import build_cqm, dump_cqm
from bqap.errors import BqapError, ValidationError
from bqap.harness import emit_front_csv, emit_summary, run_experiment
from bqap.instance import format_number, load_front, load_instance, render_front, render_instance, synth_instance, write_text
from bqap.metrics import hypervolume_2d, reference_point
from bqap.models import BudgetMode, ExperimentConfig, MatrixOrder, MethodKind, WeightVector
from bqap.solver_service import pareto_front

logger = logging.getLogger("bqap.main")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit code 1)"""

    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _matrix_order(text: str) -> MatrixOrder:
    try:
        return MatrixOrder.parse(text)
    except pydantic.ValidationError as e:
        raise argparse.ArgumentTypeError(str(e.errors()[0]["msg"]))


def _methods(text: str) -> List[MethodKind]:
    try:
        return [MethodKind.parse(part) for part in text.split(",") if part.strip()]
    except ValueError:
        choices = ", ".join(m.value for m in MethodKind)
        raise argparse.ArgumentTypeError(f"unknown method in {text!r}; choose from {choices}")


def cmd_run(args) -> int:
    settings = get_settings()
    budget_mode = BudgetMode(args.budget_mode)
    iterations = args.iterations
    if budget_mode is BudgetMode.ITERATIONS and iterations is None:
        iterations = settings.default_iterations

    cfg = ExperimentConfig(
        instance_paths=args.instance,
        matrix_order=args.matrix_order,
        methods=args.method,
        num_weights=args.num_weights,
        time_limit=args.time_limit,
        runs=args.runs,
        base_seed=args.seed,
        backend=args.backend or settings.default_backend,
        reference_front_paths=args.reference_front or [],
        output_dir=args.out,
        budget_mode=budget_mode,
        iterations=iterations,
        workers=args.workers or settings.workers,
    )
    report = run_experiment(cfg, progress=not args.no_progress)
    emit_summary(report, cfg.output_dir)
    emit_front_csv(report, cfg.output_dir)
    return 0


def cmd_synth(args) -> int:
    instance = synth_instance(args.n, args.correlation, args.seed)
    write_text(args.out, render_instance(instance))
    logger.info(f"Wrote synthetic instance {instance.name} to {args.out}")
    return 0


def cmd_hv(args) -> int:
    front = load_front(args.front)
    ref = reference_point(load_front(args.reference_front))
    print(format_number(hypervolume_2d(front.points, ref)))
    return 0


def cmd_pareto(args) -> int:
    instance = load_instance(args.instance, args.matrix_order)
    points = pareto_front(instance)
    write_text(args.out, render_front(points))
    logger.info(f"Wrote {len(points)} Pareto optimal points of {instance.name} to {args.out}")
    return 0


def cmd_dump_cqm(args) -> int:
    instance = load_instance(args.instance, args.matrix_order)
    listing = dump_cqm(build_cqm(instance, WeightVector.from_lambda1(args.lambda1)))
    if args.out:
        write_text(args.out, listing)
    else:
        sys.stdout.write(listing)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="bqap", description="Bi-objective QAP scalarisation experiments")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: BQAP_LOG_LEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run scalarisation methods and score them by hypervolume")
    run.add_argument("--instance", type=Path, action="append", required=True, help="instance file (repeatable)")
    run.add_argument("--matrix-order", type=_matrix_order, default=MatrixOrder(), help="block order, default distance,flow1,flow2")
    run.add_argument("--method", type=_methods, default=list(MethodKind), help="comma-separated methods (default: all three)")
    run.add_argument("--num-weights", type=int, default=10)
    run.add_argument("--time-limit", type=float, default=5.0, help="seconds per scalarisation")
    run.add_argument("--runs", type=int, default=20)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--backend", choices=["sa", "exhaustive"], default=None)
    run.add_argument("--budget-mode", choices=[m.value for m in BudgetMode], default=BudgetMode.WALLCLOCK.value)
    run.add_argument("--iterations", type=int, default=None, help="proposals per scalarisation in iterations mode")
    run.add_argument("--reference-front", type=Path, action="append", help="known Pareto front, one per instance")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument(
        "--workers", type=int, default=None, help="parallel processes; wall-clock runs are capped at the logical CPU count"
    )
    run.add_argument("--no-progress", action="store_true", help="hide the progress bar")
    run.set_defaults(handler=cmd_run)

    synth = commands.add_parser("synth", help="write a synthetic correlated instance")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--correlation", type=float, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", type=Path, required=True)
    synth.set_defaults(handler=cmd_synth)

    hv = commands.add_parser("hv", help="hypervolume of a front file")
    hv.add_argument("--front", type=Path, required=True)
    hv.add_argument("--reference-front", type=Path, required=True)
    hv.set_defaults(handler=cmd_hv)

    pareto = commands.add_parser("pareto", help="exact Pareto front by enumeration (n <= 10)")
    pareto.add_argument("--instance", type=Path, required=True)
    pareto.add_argument("--matrix-order", type=_matrix_order, default=MatrixOrder())
    pareto.add_argument("--out", type=Path, required=True)
    pareto.set_defaults(handler=cmd_pareto)

    dump = commands.add_parser("dump-cqm", help="list the scalarised model of an instance")
    dump.add_argument("--instance", type=Path, required=True)
    dump.add_argument("--matrix-order", type=_matrix_order, default=MatrixOrder())
    dump.add_argument("--lambda1", type=float, default=0.5)
    dump.add_argument("--out", type=Path, default=None)
    dump.set_defaults(handler=cmd_dump_cqm)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            configure_logging(args.log_level)
        return args.handler(args)
    except BqapError as e:
        logger.error(str(e))
        return e.exit_code
    except pydantic.ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return 1
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        logger.error(f"Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
