"""Command-line entry point.

Exit codes: 0 on success, 1 when an identification assumption or another
validation check fails, 2 for unreadable or malformed input files and bad
flags.  The default seed comes from ``ENDOGRAPH_SEED`` (else 0).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path


from ._validation import AssumptionError, CapExceededError, EndographError, SchemaError
from .design import assignment_matrix, assignment_probabilities
from .estimators import BatchEvaluator, check_identification, horvitz_thompson, mu_hat, mu_hat_uni, mu_tilde
from .graph import verify_anchor
from .inference import exogeneity_test, r_driven_ttest, sharp_null_test
from .io import (
    RunReport,
    config_from_dict,
    graph_from_dict,
    observations_from_dict,
    read_json,
    rows_to_csv,
    scenario_from_dict,
)
from .montecarlo import ESTIMATORS, Scenario, bias_table, replicate, variance_scaling_study
from .outcomes import true_tte

SEED_ENV = "ENDOGRAPH_SEED"


class _Run:
    """Collects input hashes and phase timings for one invocation."""

    def __init__(self, args):
        self.args = args
        self.inputs: dict = {}
        self.timing: dict = {}

    def load(self, path):
        data, digest = read_json(path)
        self.inputs[str(path)] = digest
        return data

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        yield
        self.timing[name] = time.perf_counter() - start


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SchemaError(SEED_ENV, f"not an integer: {raw!r}") from None


def _seed(args, fallback=None) -> int:
    if args.seed is not None:
        return args.seed
    return fallback if fallback is not None else _default_seed()


# ---------------------------------------------------------------------------
# Subcommands; each returns (results, csv_rows, exit_code)
# ---------------------------------------------------------------------------
def _load_inputs(run, args, *, need_config: bool):
    graph, anchor = graph_from_dict(run.load(args.graph))
    obs = observations_from_dict(run.load(args.outcomes), "$", graph)
    config = None
    if args.config is not None:
        weights = obs.model.weights if obs.model is not None else None
        config = config_from_dict(run.load(args.config), "$", graph, anchor=anchor, weights=weights)
    elif need_config:
        raise SchemaError("--config", "an estimator config is required")
    return graph, obs, config


def cmd_estimate(run, args):
    with run.phase("load"):
        graph, obs, config = _load_inputs(run, args, need_config=True)
    with run.phase("estimate"):
        if args.estimator == "ht":
            value = horvitz_thompson(graph.realize(obs.treatment), obs.y, obs.treatment, config.p, args.scale)
            return {"estimator": "ht", "scale": args.scale, "estimate": value}, [{"estimate": value}], 0
        check_identification(graph, config)
        if args.estimator == "mu_tilde":
            value = mu_tilde(obs.y, obs.treatment, config)
            return {"estimator": "mu_tilde", "estimate": value}, [{"estimate": value}], 0
        fn = mu_hat_uni if graph.unipartite else mu_hat
        res = fn(graph, obs.y, obs.treatment, config, obs.model)
    gamma = res.gamma_hat if res.gamma_hat is not None else [0.0] * len(res.beta_hat)
    rows = [
        {"unit": a, "beta_hat": b, "w_hat": w, "gamma_hat": g, "contribution": c}
        for a, (b, w, g, c) in enumerate(zip(res.beta_hat, res.w_hat, gamma, res.per_unit))
    ]
    out = {"estimator": args.estimator, **res.to_dict()}
    return out, rows, 0


def cmd_test(run, args):
    seed = _seed(args)
    with run.phase("load"):
        graph, obs, config = _load_inputs(run, args, need_config=args.kind == "sharp-null")
    realized = graph.realize(obs.treatment)
    with run.phase("test"):
        if args.kind == "exogeneity":
            p = config.p if config is not None else args.p
            if p is None:
                raise SchemaError("--p", "the design probability is required")
            res = exogeneity_test(realized, obs.treatment, p, args.resamples, args.alpha, seed, args.tail)
        elif args.kind == "ttest":
            res = r_driven_ttest(realized, graph.pre_edges, obs.treatment, args.alpha, args.alternative)
        else:
            res = sharp_null_test(obs.y, obs.treatment, config, args.resamples, args.alpha, seed)
    out = {**res.to_dict(), "seed": seed}
    return out, [{k: v for k, v in out.items() if k != "details"}], 0


def _scenario(run, args) -> Scenario:
    scenario = scenario_from_dict(run.load(args.scenario))
    if args.seed is not None:
        scenario = Scenario(scenario.family, scenario.params, args.seed, scenario.fixed, scenario.mode)
    return scenario


def cmd_simulate(run, args):
    with run.phase("load"):
        scenario = _scenario(run, args)
    with run.phase("simulate"):
        summary = replicate(scenario, args.size, args.reps, args.estimator)
    rows = [
        {"rep": i, "estimate": float(e), "standardized": float(s)}
        for i, (e, s) in enumerate(zip(summary.estimates, summary.standardized_samples))
    ]
    return {**summary.to_dict(), "seed": scenario.seed}, rows, 0


def cmd_scaling(run, args):
    with run.phase("load"):
        scenario = _scenario(run, args)
    with run.phase("simulate"):
        rep = variance_scaling_study(scenario, args.sizes, args.reps)
    rows = [
        {"n_a": s, "variance": v, "envelope": e, "d_A": da, "d_R": dr}
        for s, v, e, da, dr in zip(rep.sizes, rep.variances, rep.envelopes, rep.d_A, rep.d_R)
    ]
    return {**rep.to_dict(), "seed": scenario.seed}, rows, 0


def cmd_bias_table(run, args):
    with run.phase("enumerate"):
        report = bias_table(tuple(args.example or (1, 2, 3)), args.p, y=args.y, y1=args.y1, y2=args.y2)
    rows = []
    for row in report.rows:
        d = row.to_dict()
        cases = d.pop("case_table")
        rows.append(d)
        rows += [{"example": row.example, **case} for case in cases]
    return report.to_dict(), rows, 0


def cmd_verify_anchor(run, args):
    seed = _seed(args)
    with run.phase("load"):
        graph, anchor = graph_from_dict(run.load(args.graph))
        if args.config:
            raw = run.load(args.config)
            anchor = config_from_dict(raw, "$", graph, anchor=anchor, p=0.5).anchor
        if anchor is None:
            raise SchemaError("$.anchor", "no anchor in the graph file or config")
    with run.phase("verify"):
        rep = verify_anchor(graph, anchor, args.mode, n_samples=args.samples, seed=seed)
    rows = rep.to_dict()["violations"] or [{"passed": rep.passed, "n_pairs": rep.n_pairs}]
    return {**rep.to_dict(), "seed": seed}, rows, 0 if rep.passed else 1


def cmd_enumerate_check(run, args):
    with run.phase("load"):
        scenario = _scenario(run, args)
    results, rows, worst = [], [], 0.0
    with run.phase("enumerate"):
        for i in range(args.instances):
            sc = Scenario(scenario.family, scenario.params, scenario.seed + i, scenario.fixed, scenario.mode)
            inst = sc.instance(args.nr) if sc.family != "fixed" else sc.fixed
            if inst.config is None:
                raise SchemaError("$.mode", "enumerate-check needs an anchor_tte scenario")
            ev = BatchEvaluator(inst.graph, inst.model, inst.config)
            n_r = inst.graph.n_r
            T = assignment_matrix(n_r)
            expectation = math.fsum(assignment_probabilities(n_r, inst.config.p) * ev.mu_hat(T))
            truth = true_tte(inst.graph, inst.model)
            gap = abs(expectation - truth)
            worst = max(worst, gap)
            row = {"instance": i, "seed": sc.seed, "n_a": inst.graph.n_a, "n_r": n_r,
                   "expectation": expectation, "truth": truth, "abs_gap": gap}
            results.append(row)
            rows.append(row)
    passed = worst <= args.tol
    line = f"{'PASS' if passed else 'FAIL'} max |E[mu_hat] - mu| = {worst:.3e} (tol {args.tol:g}, {args.instances} instance(s))"
    print(line, file=sys.stderr)
    return {"passed": passed, "max_abs_gap": worst, "tol": args.tol, "instances": results}, rows, 0 if passed else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def _sizes(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError("sizes must be comma-separated integers") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="endograph", description="Treatment-effect estimation on endogenous graphs.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"overrides the file seed; default ${SEED_ENV} or 0")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", type=Path, default=None, help="write output here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="estimate the total treatment effect")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--outcomes", type=Path, required=True)
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--estimator", choices=ESTIMATORS, default="mu_hat")
    p.add_argument("--scale", choices=("mean", "total"), default="mean")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", parents=[common], help="edge-exogeneity, r-driven or sharp-null test")
    p.add_argument("--kind", choices=("exogeneity", "ttest", "sharp-null"), required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--outcomes", type=Path, required=True)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--tail", choices=("lower", "upper", "two-sided"), default="lower")
    p.add_argument("--alternative", choices=("two-sided", "greater", "less"), default="two-sided")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo replication of a scenario")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--estimator", choices=ESTIMATORS, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scaling", parents=[common], help="variance-vs-size study")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--sizes", type=_sizes, required=True)
    p.add_argument("--reps", type=int, default=1000)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("bias-table", parents=[common], help="exact estimator bias on the canonical examples")
    p.add_argument("--example", type=int, choices=(1, 2, 3), action="append")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--y", type=float, default=1.0)
    p.add_argument("--y1", type=float, default=None)
    p.add_argument("--y2", type=float, default=None)
    p.set_defaults(func=cmd_bias_table)

    p = sub.add_parser("verify-anchor", parents=[common], help="check that anchor edges always exist")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--mode", choices=("exhaustive", "sampled", "relaxed"), default="exhaustive")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_verify_anchor)

    p = sub.add_parser("enumerate-check", parents=[common], help="exact unbiasedness check by enumeration")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--nr", type=int, default=None)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_enumerate_check)
    return parser


def _command_echo(args) -> dict:
    echo = {}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "output", "format"):
            continue
        echo[key] = str(val) if isinstance(val, Path) else val
    return echo


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run = _Run(args)
    try:
        results, rows, code = args.func(run, args)
    except AssumptionError as exc:
        print(f"error: assumption violated {exc}", file=sys.stderr)
        return 1
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CapExceededError, EndographError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = RunReport(command=_command_echo(args), inputs=run.inputs, results=results, timing=run.timing,
                       status="ok" if code == 0 else "failed")
    text = report.to_json() if args.format == "json" else rows_to_csv(rows)
    try:
        if args.output is None:
            sys.stdout.write(text)
        else:
            args.output.write_text(text)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2
    return code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
