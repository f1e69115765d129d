"""Command-line entry point wiring the full workflow.

generate -> verify -> run -> analyze, plus ACTS interchange, the
simulation study, and the effort estimator.  Machine-readable results
go to files; stdout carries a short human summary.  Exit codes: 0
success, 1 runtime failure, 2 baseline failure, 3 revert failure,
4 partial run, 64 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import covering, dtree, evaluation, harness, ipog, model, oracle

USAGE_EXIT = 64

_STRATEGY_FLAGS = {
    "dtree": "dtree_shortest_path",
    "dtree-max-partition": "dtree_max_partition",
    "logic": "logic_min",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="breakfinder",
        description="Find functionality-breaking rules of a configuration "
        "guide with covering arrays, decision trees, and logic minimization.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", help="generate a covering array")
    p.add_argument("--guide", required=True)
    p.add_argument("--strength", type=int, required=True)
    p.add_argument("--algorithm", default="ipog", choices=["ipog"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true",
                   help="run anyway past the resource estimate gate")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("verify", help="verify covering-array coverage")
    p.add_argument("--array", required=True)
    p.add_argument("--strength", type=int, default=None,
                   help="override the array's recorded strength")
    p.add_argument("--sample", type=int, default=None, metavar="N",
                   help="sampled verification with N random subsets")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-acts-input", help="write an ACTS input file")
    p.add_argument("--guide", required=True)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("import-acts", help="import an ACTS export as an array")
    p.add_argument("--guide", required=True)
    p.add_argument("--acts", required=True, help="ACTS export text file")
    p.add_argument("--strength", type=int, required=True)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("run", help="evaluate every array tuple")
    p.add_argument("--guide", required=True)
    p.add_argument("--array", required=True)
    p.add_argument("--oracle", help="breaking-set DNF file (simulated run)")
    p.add_argument("--apply-cmd")
    p.add_argument("--test-cmd")
    p.add_argument("--revert-cmd")
    p.add_argument("--compliance-cmd")
    p.add_argument(
        "--workers", type=int, default=1,
        help="parallel instances; external commands must route per "
        "BREAKFINDER_WORKER to isolated environments when > 1",
    )
    p.add_argument("--reset", default="soft", choices=["soft", "hard"])
    p.add_argument("--timeout", type=int, default=harness.DEFAULT_TIMEOUT_S)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("analyze", help="derive the rules to exclude")
    p.add_argument("--guide", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--strategy", required=True,
                   choices=sorted(_STRATEGY_FLAGS))
    p.add_argument("--oracle",
                   help="breaking-set DNF file for confirmation runs")
    p.add_argument("--dot", help="write the decision tree as dot text")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("evaluate", help="run the simulation study")
    p.add_argument("--guide", required=True)
    p.add_argument("--array", required=True)
    p.add_argument("--grid", required=True, metavar="CxR",
                   help="corpus shape: max clauses x max rules per clause")
    p.add_argument("--variants", type=int, default=1, metavar="K")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True,
                   help="CSV path stem; one file per strategy")

    p = sub.add_parser("effort", help="estimate identification wall-clock")
    p.add_argument("--n-tuples", type=int, required=True)
    p.add_argument("--n-vms", type=int, required=True)
    p.add_argument("--t-vm", type=int, default=0)
    p.add_argument("--t-sw", type=int, default=0)
    p.add_argument("--t-a", type=int, default=0)
    p.add_argument("--t-t", type=int, default=0)
    p.add_argument("--t-sr", type=int, default=0)
    p.add_argument("--t-ana", type=int, default=0)
    return parser


# ---------------------------------------------------------------------------
# subcommands

def _cmd_generate(args) -> int:
    guide = model.load_guide(args.guide)
    n = len(guide.rules)
    if args.strength > 4 and n > 100 and not args.force:
        est = ipog.estimate_generation(n, args.strength)
        print(
            f"strength {args.strength} over {n} rules is expensive: "
            f"~{est['rows_guess']} rows, ~{est['seconds_guess']}s "
            f"({est['mode']} engine). Pass --force to run anyway.",
            file=sys.stderr,
        )
        return USAGE_EXIT
    array = ipog.generate_ipog(guide, args.strength, seed=args.seed)
    covering.save_array(array, args.out)
    print(
        f"generated {len(array.rows)} rows x {len(array.columns)} rules "
        f"(strength {array.strength}) -> {args.out}"
    )
    return 0


def _cmd_verify(args) -> int:
    array = covering.load_array(args.array)
    if args.strength is not None and args.strength != array.strength:
        array = dataclasses.replace(array, strength=args.strength)
    if args.sample is not None:
        report = covering.verify_coverage(
            array, mode="sampled", k_samples=args.sample, seed=args.seed
        )
    else:
        report = covering.verify_coverage(array)
    state = "covered" if report.covered else "NOT covered"
    print(
        f"{args.array}: strength {array.strength} {state} "
        f"({report.mode}, {report.checked_subsets} subsets checked, "
        f"{report.missing_total} missing)"
    )
    return 0 if report.covered else 1


def _cmd_export_acts(args) -> int:
    guide = model.load_guide(args.guide)
    text = covering.export_acts_input(guide)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"ACTS input for {len(guide.rules)} rules -> {args.out}")
    return 0


def _cmd_import_acts(args) -> int:
    guide = model.load_guide(args.guide)
    array = covering.import_acts_export(args.acts, guide, args.strength)
    covering.save_array(array, args.out)
    print(f"imported {len(array.rows)} rows -> {args.out}")
    return 0


def _make_evaluator_config(args) -> harness.EvaluatorConfig:
    if args.oracle:
        if args.apply_cmd or args.test_cmd or args.revert_cmd:
            raise SystemExit2(
                "--oracle and external commands are mutually exclusive"
            )
        dnf = oracle.load_breaking_set(args.oracle)
        return harness.EvaluatorConfig(
            kind="simulated", dnf=dnf, timeout_s=args.timeout
        )
    if not (args.apply_cmd and args.test_cmd and args.revert_cmd):
        raise SystemExit2(
            "need --oracle, or all of --apply-cmd/--test-cmd/--revert-cmd"
        )
    return harness.EvaluatorConfig(
        kind="external",
        apply_cmd=args.apply_cmd,
        test_cmd=args.test_cmd,
        revert_cmd=args.revert_cmd,
        compliance_cmd=args.compliance_cmd,
        timeout_s=args.timeout,
    )


class SystemExit2(Exception):
    """Usage-level error discovered after argparse."""


def _cmd_run(args) -> int:
    guide = model.load_guide(args.guide)
    array = covering.load_array(args.array)
    if args.workers < 1:
        raise SystemExit2("--workers must be >= 1")
    cfg = _make_evaluator_config(args)
    reset = harness.ResetPolicy(mode=args.reset)

    baseline = harness.run_baseline(cfg)
    if not baseline.baseline_passed:
        print(
            "baseline failed: tests do not pass before any rule is applied; "
            "fix the tests or the setup",
            file=sys.stderr,
        )
        return 2
    records = [baseline.record]

    try:
        full = harness.run_full_guide(cfg, guide)
    except harness.RevertFailure as exc:
        print(
            f"revert failed while testing the full guide: {exc}; "
            "fix the revert mechanism",
            file=sys.stderr,
        )
        return 3
    records.append(full.record)
    if full.noncompliant_rules:
        print(f"noncompliant rules: {', '.join(sorted(full.noncompliant_rules))}")
    if full.full_guide_passed:
        results = model.ResultSet(
            guide_id=guide.guide_id,
            records=tuple(records),
            strength=array.strength,
            algorithm_tag=array.algorithm_tag,
        )
        model.save_results(results, args.out)
        print(
            "full guide passed: nothing breaks, nothing to exclude "
            f"-> {args.out}"
        )
        return 0

    if reset.mode == "soft":
        revert = harness.run_revert_check(cfg, guide)
        if not revert.revert_ok:
            print(
                "revert check failed: tests still fail after reverting the "
                "full guide; fix the revert mechanism",
                file=sys.stderr,
            )
            return 3
        records.append(revert.record)

    plan = harness.WorkerPlan.round_robin(len(array.rows), args.workers)
    tuple_results = harness.run_tuples(
        cfg, guide, array, plan, reset, jsonl_path=f"{args.out}.jsonl"
    )
    results = model.ResultSet(
        guide_id=guide.guide_id,
        records=tuple(records) + tuple_results.records,
        strength=array.strength,
        algorithm_tag=array.algorithm_tag,
    )
    model.save_results(results, args.out)
    untested = harness.untested_indices(tuple_results, len(array.rows))
    done = sum(1 for r in tuple_results.records if r.tested)
    print(
        f"ran {done}/{len(array.rows)} tuples "
        f"({len(untested)} untested) -> {args.out}"
    )
    if untested:
        print(f"untested tuple indices: {list(untested)}", file=sys.stderr)
        return 4
    return 0


def _cmd_analyze(args) -> int:
    guide = model.load_guide(args.guide)
    results = model.load_results(args.results)
    strategy = _STRATEGY_FLAGS[args.strategy]
    if args.dot and not strategy.startswith("dtree"):
        raise SystemExit2("--dot needs a decision-tree strategy")
    evaluator = None
    if args.oracle:
        dnf = oracle.load_breaking_set(args.oracle)
        evaluator = harness.SimulatedEvaluator(dnf)
    solution = evaluation.analyze_results(
        results, guide, strategy, evaluator=evaluator
    )
    if args.dot:
        tree = dtree.train_tree(results, guide)
        Path(args.dot).write_text(
            dtree.export_tree_dot(tree, weights=True), encoding="utf-8"
        )
    model.save_solution(solution, args.out)
    excluded = ", ".join(sorted(solution.excluded)) or "(none)"
    print(f"strategy {strategy}: exclude {excluded} -> {args.out}")
    if solution.verified_non_breaking is None:
        kept = len(guide.rules) - len(solution.excluded)
        print(
            f"unverified: re-run the tests with the remaining {kept} rules "
            f"applied to confirm before deploying"
        )
    else:
        print(
            f"verified_non_breaking={solution.verified_non_breaking} "
            f"verified_maximal={solution.verified_maximal}"
        )
    return 0


def _cmd_evaluate(args) -> int:
    guide = model.load_guide(args.guide)
    array = covering.load_array(args.array)
    try:
        c_part, r_part = args.grid.lower().split("x")
        max_clauses, max_rules = int(c_part), int(r_part)
    except ValueError:
        raise SystemExit2("--grid must look like 3x4")
    if args.variants < 1:
        raise SystemExit2("--variants must be >= 1")

    n_cols = len(array.columns)
    if array.strength <= 3 and n_cols <= 600:
        report = covering.verify_coverage(array)
    else:
        report = covering.verify_coverage(
            array, mode="sampled", k_samples=100_000, seed=args.seed
        )
    if not report.covered:
        print("array failed coverage verification; aborting", file=sys.stderr)
        return 1

    spec = oracle.CorpusSpec(
        max_clauses=max_clauses,
        max_rules_per_clause=max_rules,
        variants_per_base=args.variants,
        seed=args.seed,
    )
    corpus = oracle.gen_corpus(guide, spec)
    rows, grids = evaluation.run_study(guide, corpus, array)
    out = Path(args.out)
    for strategy, grid in sorted(grids.items()):
        path = out.with_name(f"{out.stem}-{strategy}{out.suffix or '.csv'}")
        evaluation.emit_cluster_csv(grid, path)
        print(f"{strategy} grid -> {path}")
    sys.stdout.write(evaluation.format_study_summary(rows))
    return 0


def _cmd_effort(args) -> int:
    params = evaluation.EffortParams(
        n_tuples=args.n_tuples,
        n_vms=args.n_vms,
        t_vm=args.t_vm,
        t_sw=args.t_sw,
        t_a=args.t_a,
        t_t=args.t_t,
        t_sr=args.t_sr,
        t_ana=args.t_ana,
    )
    seconds = evaluation.effort_estimate(params)
    print(f"{seconds} s ({seconds / 3600.0:.2f} h)")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "verify": _cmd_verify,
    "export-acts-input": _cmd_export_acts,
    "import-acts": _cmd_import_acts,
    "run": _cmd_run,
    "analyze": _cmd_analyze,
    "evaluate": _cmd_evaluate,
    "effort": _cmd_effort,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except SystemExit2 as exc:
        print(f"breakfinder: error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (model.FormatError, model.AnalysisError, harness.HarnessError,
            ValueError) as exc:
        print(f"breakfinder: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"breakfinder: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
