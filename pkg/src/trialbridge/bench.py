"""Replicated simulation benchmark: generate, fit, estimate, aggregate.

One benchmark run draws `reps` independent datasets from a scenario
(replicate r uses the seed pair (seed, r)), runs every requested
estimator on each, and reports per-estimator mean, bias against the
scenario's analytic effect, and standard deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .dgp import ScenarioConfig, generate, true_ate
from .registry import estimate_many


@dataclass(frozen=True)
class BenchRow:
    estimator: str
    mean: float
    bias: float
    sd: float
    reps: int


@dataclass(frozen=True)
class BenchReport:
    scenario: str
    seed: int
    reps: int
    true_ate: float
    rows: tuple[BenchRow, ...]

    def row(self, estimator: str) -> BenchRow:
        for row in self.rows:
            if row.estimator == estimator:
                return row
        raise KeyError(estimator)


def run_benchmark(
    config: ScenarioConfig, specs, reps: int = 100, moment_spec: str = "x"
) -> BenchReport:
    """Run `specs` over `reps` fresh draws of the scenario."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    specs = list(specs)
    base_seed = config.seed if isinstance(config.seed, int) else tuple(config.seed)
    samples = {spec: [] for spec in specs}
    for r in range(reps):
        rep_seed = (base_seed, r) if isinstance(base_seed, int) else (*base_seed, r)
        ds = generate(replace(config, seed=rep_seed))
        for spec, result in estimate_many(ds, specs, moment_spec=moment_spec).items():
            samples[spec].append(result.value)

    target = true_ate(config)
    rows = []
    for spec in sorted(specs):
        values = np.asarray(samples[spec])
        mean = float(values.mean())
        rows.append(
            BenchRow(
                estimator=spec,
                mean=mean,
                bias=mean - target,
                sd=float(values.std(ddof=1)) if reps > 1 else 0.0,
                reps=reps,
            )
        )
    return BenchReport(
        scenario=config.scenario,
        seed=base_seed if isinstance(base_seed, int) else base_seed[0],
        reps=reps,
        true_ate=target,
        rows=tuple(rows),
    )


def report_to_csv(report: BenchReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("scenario,seed,estimator,reps,mean,bias,sd,true_ate\n")
        for row in report.rows:
            fh.write(
                f"{report.scenario},{report.seed},{row.estimator},{row.reps},"
                f"{row.mean!r},{row.bias!r},{row.sd!r},{report.true_ate!r}\n"
            )


def report_to_json(report: BenchReport, path) -> None:
    payload = {
        "scenario": report.scenario,
        "seed": report.seed,
        "reps": report.reps,
        "true_ate": report.true_ate,
        "rows": [
            {
                "estimator": row.estimator,
                "mean": row.mean,
                "bias": row.bias,
                "sd": row.sd,
                "reps": row.reps,
            }
            for row in report.rows
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def format_table(report: BenchReport) -> str:
    lines = [
        f"scenario={report.scenario} reps={report.reps} seed={report.seed} "
        f"true_ate={report.true_ate:g}",
        f"{'estimator':<18}{'mean':>12}{'bias':>12}{'sd':>12}",
    ]
    for row in report.rows:
        lines.append(
            f"{row.estimator:<18}{row.mean:>12.4f}{row.bias:>12.4f}{row.sd:>12.4f}"
        )
    return "\n".join(lines)
