#!/usr/bin/env python3
"""
Compare uniform against the adaptive weight schedules on synthetic correlated instances.

Report only: prints a JSON summary with the mean hypervolumes, the significance matrix
and whether the better adaptive method matched or beat uniform on each instance.
"""

import sys
import json
import argparse
import tempfile
from pathlib import Path

from bqap.config import configure_logging
from bqap.errors import BqapError
from bqap.harness import run_experiment
from bqap.instance import render_instance, synth_instance, write_text
from bqap.models import BudgetMode, ExperimentConfig, MethodKind


def trend_report(seeds: int, n: int, runs: int, num_weights: int, iterations: int, correlations) -> dict:
    rows = []
    with tempfile.TemporaryDirectory() as workdir:
        for correlation in correlations:
            for seed in range(1, seeds + 1):
                instance = synth_instance(n, correlation, seed)
                path = Path(workdir) / f"{instance.name}.dat"
                write_text(path, render_instance(instance))

                cfg = ExperimentConfig(
                    instance_paths=[path],
                    methods=list(MethodKind),
                    num_weights=num_weights,
                    runs=runs,
                    base_seed=seed,
                    backend="sa",
                    output_dir=Path(workdir) / "out",
                    budget_mode=BudgetMode.ITERATIONS,
                    iterations=iterations,
                )
                report = run_experiment(cfg, progress=False).instances[0]
                means = {summary.method.value: summary.mean_hv for summary in report.methods}
                best_adaptive = max(means[MethodKind.ADAPTIVE_AVERAGES.value], means[MethodKind.ADAPTIVE_DICHOTOMIC.value])
                rows.append({
                    'instance': instance.name,
                    'correlation': correlation,
                    'mean_hv': means,
                    'adaptive_not_worse': best_adaptive >= means[MethodKind.UNIFORM.value],
                    'significance': [test.model_dump(mode="json") for test in report.significance],
                })

    not_worse = sum(row['adaptive_not_worse'] for row in rows)
    return {
        'instances': rows,
        'adaptive_not_worse': not_worse,
        'total': len(rows),
        'at_least_half': 2 * not_worse >= len(rows),
    }


def main():
    parser = argparse.ArgumentParser(description="Uniform vs adaptive scalarisation trend on synthetic instances")
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--n", type=int, default=15)
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--num-weights", type=int, default=10)
    parser.add_argument("--iterations", type=int, default=5000)
    parser.add_argument("--correlations", type=float, nargs="+", default=[-0.75, 0.75])
    args = parser.parse_args()

    configure_logging("WARNING")
    try:
        result = trend_report(args.seeds, args.n, args.runs, args.num_weights, args.iterations, args.correlations)
    except BqapError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    print(json.dumps(result, indent=2))


if __name__ == '__main__':
    main()
