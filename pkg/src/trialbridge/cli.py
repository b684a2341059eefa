"""Command-line front end.

Subcommands::

    simulate   replicate a benchmark scenario and write a report table
    estimate   run estimators on a CSV dataset, optionally with bootstrap CIs
    generate   write one scenario draw as a CSV dataset
    identify   answer a transportability query over a diagram file

Exit codes: 0 success, 1 computation failure, 2 usage or parse error.
``identify`` maps its verdict onto the exit code instead (0 fully
transportable, 1 post-treatment transportable, 2 not transportable).
The ``GENKIT_SEED`` environment variable supplies the seed when no
``--seed`` flag is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import format_table, report_to_csv, report_to_json, run_benchmark
from .datamodel import NESTED, load_dataset, write_dataset
from .dgp import SCENARIOS, ScenarioConfig, generate, true_ate
from .errors import TrialbridgeError
from .registry import ALL_SPECS, estimate_one
from .scmgraph import (
    NOT_TRANSPORTABLE,
    POST_TREATMENT,
    TRANSPORTABLE,
    parse_graph_dsl,
    transport_formula,
)
from .variance import stratified_bootstrap

_DEFAULT_SEED = 0


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GENKIT_SEED")
    if env is not None:
        return int(env)
    return _DEFAULT_SEED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialbridge",
        description="Generalize randomized-trial treatment effects to a target population.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="replicated scenario benchmark")
    sim.add_argument("--scenario", required=True, choices=SCENARIOS)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument(
        "--estimators",
        default="dm,ipsw,ipsw_norm,strat10,gformula,cw,aipsw,acw",
        help=f"comma-separated specs, e.g. {','.join(ALL_SPECS[:4])},...",
    )
    sim.add_argument("--superpop", type=int, default=50_000)
    sim.add_argument("--m", type=int, default=10_000)
    sim.add_argument("--out", default="report", help="output prefix (.csv/.json)")

    est = sub.add_parser("estimate", help="estimate from a CSV dataset")
    est.add_argument("--data", required=True)
    est.add_argument("--estimator", required=True, help="comma-separated specs")
    est.add_argument("--design", choices=["nested", "non-nested"], default=None)
    est.add_argument("--e1", type=float, default=0.5, help="known trial propensity")
    est.add_argument("--bootstrap", type=int, default=0, help="replicates (0 = none)")
    est.add_argument("--seed", type=int, default=None)
    est.add_argument("--out", default=None, help="write JSON results here")

    gen = sub.add_parser("generate", help="write one scenario draw to CSV")
    gen.add_argument("--scenario", required=True, choices=SCENARIOS)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--superpop", type=int, default=50_000)
    gen.add_argument("--m", type=int, default=10_000)
    gen.add_argument("--out", required=True)

    ident = sub.add_parser("identify", help="transportability query on a diagram")
    ident.add_argument("--graph", required=True)
    ident.add_argument("--treatment", default=None)
    ident.add_argument("--outcome", default=None)
    ident.add_argument("--set", dest="adjustment", default=None, help="comma-separated nodes")
    ident.add_argument("--json", action="store_true")
    return parser


def _run_simulate(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be a positive integer")
    specs = [s.strip() for s in args.estimators.split(",") if s.strip()]
    if not specs:
        raise UsageError("--estimators must name at least one estimator")
    config = ScenarioConfig(
        scenario=args.scenario, superpop=args.superpop, m=args.m, seed=_seed_from(args)
    )
    report = run_benchmark(config, specs, reps=args.reps)
    report_to_csv(report, f"{args.out}.csv")
    report_to_json(report, f"{args.out}.json")
    print(format_table(report))
    return 0


def _run_estimate(args) -> int:
    ds = load_dataset(args.data, design=args.design, trial_propensity=args.e1)
    specs = [s.strip() for s in args.estimator.split(",") if s.strip()]
    if not specs:
        raise UsageError("--estimator must name at least one estimator")
    seed = _seed_from(args)
    results = {}
    for spec in specs:
        if args.bootstrap:
            ci = stratified_bootstrap(ds, spec, n_replicates=args.bootstrap, seed=seed)
            results[spec] = {
                "point": ci.point,
                "ci_lower": ci.lower,
                "ci_upper": ci.upper,
                "bootstrap": ci.n_replicates,
                "failures": ci.failures,
                "seed": seed,
            }
            print(
                f"{spec}: {ci.point!r}  95% CI [{ci.lower!r}, {ci.upper!r}]"
                f"  (B={ci.n_replicates}, failures={ci.failures})"
            )
        else:
            value = estimate_one(ds, spec).value
            results[spec] = {"point": value}
            print(f"{spec}: {value!r}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(results, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def _run_generate(args) -> int:
    config = ScenarioConfig(
        scenario=args.scenario, superpop=args.superpop, m=args.m, seed=_seed_from(args)
    )
    ds = generate(config)
    write_dataset(ds, args.out)
    print(
        f"wrote {args.out}: scenario={args.scenario} n={ds.n} m={ds.m} "
        f"design={ds.design} true_ate={true_ate(config)!r}"
    )
    return 0


_VERDICT_EXIT = {TRANSPORTABLE: 0, POST_TREATMENT: 1, NOT_TRANSPORTABLE: 2}


def _run_identify(args) -> int:
    with open(args.graph, encoding="utf-8") as fh:
        diagram = parse_graph_dsl(fh.read())
    treatment = args.treatment or diagram.treatment
    outcome = args.outcome or diagram.outcome
    if treatment is None or outcome is None:
        raise UsageError("treatment and outcome must be given by flag or annotation")
    if args.adjustment is not None:
        adjustment = [s.strip() for s in args.adjustment.split(",") if s.strip()]
    else:
        skip = {treatment, outcome, diagram.selection} | set(diagram.latent)
        adjustment = [n for n in diagram.observed() if n not in skip]
    verdict = transport_formula(diagram, treatment, outcome, adjustment)
    if args.json:
        print(
            json.dumps(
                {
                    "status": verdict.status,
                    "formula": verdict.formula,
                    "adjustment": list(verdict.adjustment),
                    "witness": verdict.witness,
                },
                sort_keys=True,
            )
        )
    elif verdict.status == NOT_TRANSPORTABLE:
        print(f"NotTransportable, witness: {verdict.witness}")
    elif verdict.status == POST_TREATMENT:
        print(f"PostTreatmentTransportable: {verdict.formula}")
    else:
        print(f"Transportable: {verdict.formula}")
    return _VERDICT_EXIT[verdict.status]


class UsageError(Exception):
    pass


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "simulate": _run_simulate,
        "estimate": _run_estimate,
        "generate": _run_generate,
        "identify": _run_identify,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrialbridgeError as exc:
        kind = type(exc).__name__
        parse_errors = (
            "MissingColumn",
            "NonBinaryTreatment",
            "NonFiniteCovariate",
            "MissingOutcomeInTrial",
            "EmptyTargetSample",
            "CycleDetected",
            "UnknownNode",
            "DuplicateEdge",
            "UnknownScenario",
            "UnknownEstimator",
        )
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return 2 if kind in parse_errors else 1


if __name__ == "__main__":
    raise SystemExit(main())
