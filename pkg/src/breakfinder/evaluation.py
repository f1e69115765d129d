"""Study orchestration and effort estimation.

analyze_results turns one ResultSet into a Solution with a chosen
strategy and re-verifies the candidate before emission: simulated runs
consult the DNF oracle and can iterate (each failed confirmation is a
new observation), external runs re-execute exactly one confirmation
tuple and downgrade on failure.  run_study sweeps a breaking-set corpus
over one covering array, classifies every (set, strategy) pair against
the brute-force oracle, and aggregates a per-cluster accuracy grid.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import dtree, logicmin
from .covering import CoveringArray
from .harness import SimulatedEvaluator
from .model import (
    AnalysisError,
    FormatError,
    Guide,
    ResultSet,
    Solution,
    STRATEGIES,
)
from .oracle import BreakingSetDNF, verify_solution

__all__ = [
    "MAX_REFINE_ROUNDS",
    "ClusterCell",
    "EffortParams",
    "StudyRow",
    "analyze_results",
    "run_study",
    "format_study_summary",
    "effort_estimate",
    "emit_cluster_csv",
]

MAX_REFINE_ROUNDS = 64


# ---------------------------------------------------------------------------
# single-result analysis with the confirmation gate

def _solve(results: ResultSet, guide: Guide, strategy: str) -> Solution:
    if strategy in ("dtree_shortest_path", "dtree_max_partition"):
        tree = dtree.train_tree(results, guide)
        variant = strategy[len("dtree_"):]
        return dtree.find_solution(tree, variant)
    if strategy == "logic_min":
        table = logicmin.build_table(results, guide)
        cover = logicmin.minimize(table)
        return logicmin.extract_exclusions(cover, guide)
    raise ValueError(f"unknown strategy {strategy!r}")


def _next_tuple_index(results: ResultSet) -> int:
    indices = [
        r.tuple_index for r in results.records if r.tuple_index is not None
    ]
    return max(indices, default=-1) + 1


def analyze_results(
    results: ResultSet,
    guide: Guide,
    strategy: str,
    evaluator=None,
    refine: bool = True,
    max_rounds: int = MAX_REFINE_ROUNDS,
) -> Solution:
    """Solution for one strategy, re-verified before emission.

    Without an evaluator the Solution is emitted unverified (fields stay
    None) for the operator to confirm.  With one, the candidate guide
    G* = G \\ excluded is re-run; a pass marks verified_non_breaking.  A
    failing confirmation under a simulated evaluator becomes a new
    failing observation and analysis repeats (each round retires at
    least one wrong candidate, so in-strength breakage converges);
    anything still failing, and every external failure, is emitted
    downgraded rather than silently valid.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    tested = [r for r in results.records if r.tested]
    if not tested:
        raise AnalysisError("no tested records to analyze")
    current = results
    allow_refine = refine and isinstance(evaluator, SimulatedEvaluator)
    rounds = max_rounds if allow_refine else 1
    solution: Optional[Solution] = None
    for _ in range(rounds):
        if all(r.passed for r in current.records if r.tested):
            solution = Solution(strategy=strategy, excluded=frozenset())
        else:
            solution = _solve(current, guide, strategy)
        if evaluator is None:
            return solution
        applied = frozenset(guide.rules) - solution.excluded
        record = evaluator.run_tuple(
            applied, stage="tuple", tuple_index=_next_tuple_index(current)
        )
        if record.evaluator_error is not None:
            # Confirmation could not run; the verdict stays unknown.
            return solution
        if record.passed:
            verified_maximal = None
            if isinstance(evaluator, SimulatedEvaluator):
                report = verify_solution(guide, evaluator.dnf, solution)
                verified_maximal = report.maximal
            return Solution(
                strategy=strategy,
                excluded=solution.excluded,
                verified_non_breaking=True,
                verified_maximal=verified_maximal,
            )
        current = ResultSet(
            guide_id=current.guide_id,
            records=current.records + (record,),
            strength=current.strength,
            algorithm_tag=current.algorithm_tag,
        )
    return Solution(
        strategy=strategy,
        excluded=solution.excluded,
        verified_non_breaking=False,
        verified_maximal=None,
    )


# ---------------------------------------------------------------------------
# simulation study

@dataclass(frozen=True)
class StudyRow:
    """Outcome of one (breaking set, strategy) analysis."""

    name: str
    strategy: str
    classification: str
    reason: Optional[str] = None


@dataclass(frozen=True)
class ClusterCell:
    """One cell of the corpus grid: sets sharing clause shape."""

    n_clauses: int
    max_rules_per_clause: int
    outcome: str
    n_sets: int
    n_exact: int


def _cell(
    n_clauses: int, max_rules: int, n_sets: int, n_exact: int, n_subset: int
) -> ClusterCell:
    if n_exact == n_sets and n_sets > 0:
        outcome = "full"
    elif n_exact == 0 and n_subset == 0:
        outcome = "none"
    else:
        outcome = "partial"
    return ClusterCell(
        n_clauses=n_clauses,
        max_rules_per_clause=max_rules,
        outcome=outcome,
        n_sets=n_sets,
        n_exact=n_exact,
    )


def run_study(
    guide: Guide,
    corpus: Sequence[BreakingSetDNF],
    array: CoveringArray,
    strategies: Sequence[str] = STRATEGIES,
) -> tuple[list[StudyRow], dict[str, list[ClusterCell]]]:
    """Simulate every breaking set over the array and classify each
    strategy's one-shot solution against the brute-force oracle.

    Analyses here deliberately skip refinement so the raw strategy
    behavior stays observable; the verification gate still runs, so an
    unsound candidate is recorded as wrong, never as valid.  The caller
    is responsible for having verified the array at its strength.
    """
    for strategy in strategies:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
    applied_sets = [
        frozenset(r for r, on in zip(array.columns, row) if on)
        for row in array.rows
    ]
    rows: list[StudyRow] = []
    # cell key -> strategy -> [n_sets, n_exact, n_subset]
    tally: dict[tuple[int, int], dict[str, list[int]]] = {}
    for dnf in corpus:
        evaluator = SimulatedEvaluator(dnf)
        records = tuple(
            evaluator.run_tuple(applied, tuple_index=i)
            for i, applied in enumerate(applied_sets)
        )
        results = ResultSet(
            guide_id=guide.guide_id,
            records=records,
            strength=array.strength,
            algorithm_tag=array.algorithm_tag,
        )
        shape: Optional[tuple[int, int]] = None
        if dnf.clauses:
            shape = (len(dnf.clauses), max(len(c) for c in dnf.clauses))
            cell = tally.setdefault(shape, {})
        for strategy in strategies:
            try:
                solution = analyze_results(
                    results, guide, strategy,
                    evaluator=evaluator, refine=False,
                )
                report = verify_solution(guide, dnf, solution)
                rows.append(
                    StudyRow(
                        name=dnf.name,
                        strategy=strategy,
                        classification=report.classification,
                    )
                )
                outcome = report.classification
            except AnalysisError as exc:
                rows.append(
                    StudyRow(
                        name=dnf.name,
                        strategy=strategy,
                        classification="none",
                        reason=str(exc),
                    )
                )
                outcome = "none"
            if shape is not None:
                counts = cell.setdefault(strategy, [0, 0, 0])
                counts[0] += 1
                if outcome == "exact":
                    counts[1] += 1
                elif outcome == "subset_of_correct":
                    counts[2] += 1
    grids: dict[str, list[ClusterCell]] = {}
    for strategy in strategies:
        cells = []
        for (n_clauses, max_rules) in sorted(tally):
            counts = tally[(n_clauses, max_rules)].get(strategy, [0, 0, 0])
            cells.append(
                _cell(n_clauses, max_rules, counts[0], counts[1], counts[2])
            )
        grids[strategy] = cells
    return rows, grids


def format_study_summary(rows: Sequence[StudyRow]) -> str:
    """Per-strategy classification counts as readable text."""
    strategies = sorted({row.strategy for row in rows})
    lines = []
    for strategy in strategies:
        mine = [r for r in rows if r.strategy == strategy]
        counts = {
            "exact": 0, "subset_of_correct": 0, "wrong": 0, "none": 0,
        }
        for r in mine:
            counts[r.classification] += 1
        total = len(mine)
        pct = 100.0 * counts["exact"] / total if total else 0.0
        lines.append(
            f"{strategy}: {counts['exact']}/{total} exact ({pct:.1f}%), "
            f"{counts['subset_of_correct']} subset, "
            f"{counts['wrong']} wrong, {counts['none']} none"
        )
    return "\n".join(lines) + "\n"


def emit_cluster_csv(grid: Sequence[ClusterCell], path: str | Path) -> None:
    """One row per cell, deterministic order, plot-ready."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n_clauses", "max_rules", "outcome", "n_sets", "n_exact"])
        for cell in sorted(
            grid, key=lambda c: (c.n_clauses, c.max_rules_per_clause)
        ):
            writer.writerow([
                cell.n_clauses,
                cell.max_rules_per_clause,
                cell.outcome,
                cell.n_sets,
                cell.n_exact,
            ])


# ---------------------------------------------------------------------------
# effort estimation

@dataclass(frozen=True)
class EffortParams:
    """Wall-clock model inputs for a full identification run, seconds."""

    n_tuples: int
    n_vms: int
    t_vm: int = 0
    t_sw: int = 0
    t_a: int = 0
    t_t: int = 0
    t_sr: int = 0
    t_ana: int = 0

    def __post_init__(self) -> None:
        for name in ("n_tuples", "t_vm", "t_sw", "t_a", "t_t", "t_sr", "t_ana"):
            if getattr(self, name) < 0:
                raise FormatError(f"{name} must be >= 0")
        if self.n_vms < 1:
            raise FormatError("n_vms must be >= 1")


def effort_estimate(p: EffortParams) -> int:
    """Estimated wall-clock seconds for one full identification run.

    Instances start in parallel, tuples are distributed evenly (the
    per-instance count rounds up: tuples are indivisible), and analysis
    runs once at the end:
    n_vms*t_vm + t_sw + ceil(n_tuples/n_vms)*(t_a + t_t + t_sr) + t_ana.
    """
    if p.n_vms == 0:
        raise FormatError("n_vms must be >= 1")
    per_vm = math.ceil(p.n_tuples / p.n_vms)
    return (
        p.n_vms * p.t_vm
        + p.t_sw
        + per_vm * (p.t_a + p.t_t + p.t_sr)
        + p.t_ana
    )
