"""Simulated breaking behavior: monotone DNF formulas over rule sets.

A breaking set is a positive DNF over rule ids: a configuration breaks
exactly when it applies every rule of at least one clause.  Applying more
rules can only break more, never less, which matches how hardening rules
interact with functionality in practice.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import FormatError, Guide, RuleTuple, RunRecord, Solution, tuple_to_applied

__all__ = [
    "BreakingSetDNF",
    "CorpusSpec",
    "VerificationReport",
    "is_breaking",
    "brute_force_maximal_sets",
    "verify_solution",
    "gen_corpus",
    "evaluate_tuple_simulated",
    "load_breaking_set",
    "save_breaking_set",
]

MAX_BRUTE_FORCE_VARIABLES = 24


@dataclass(frozen=True)
class BreakingSetDNF:
    """A named positive DNF.  No clause may be a superset of another.

    An empty clause list means nothing breaks.  Clauses are normalized to
    a sorted tuple of sorted-tuple clauses so equal formulas compare equal.
    """

    name: str
    clauses: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        clauses = [frozenset(c) for c in self.clauses]
        for c in clauses:
            if not c:
                raise FormatError("clauses must be non-empty rule sets")
        # Drop duplicate and superset clauses: they never change the formula.
        kept: list[frozenset[str]] = []
        for c in sorted(clauses, key=lambda c: (len(c), sorted(c))):
            if not any(k <= c for k in kept):
                kept.append(c)
        kept.sort(key=lambda c: sorted(c))
        object.__setattr__(self, "clauses", tuple(kept))

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.clauses:
            out |= c
        return frozenset(out)


def is_breaking(dnf: BreakingSetDNF, applied: frozenset[str] | set[str]) -> bool:
    """True when some clause is fully contained in the applied set."""
    return any(clause <= applied for clause in dnf.clauses)


def _minimal_hitting_sets(clauses: Sequence[frozenset[str]]) -> list[frozenset[str]]:
    """All inclusion-minimal sets intersecting every clause.

    Plain branch on the rules of the first unhit clause; fine for the
    bounded variable counts enforced by the caller.
    """
    results: set[frozenset[str]] = set()

    def extend(chosen: frozenset[str]) -> None:
        for clause in clauses:
            if not (clause & chosen):
                for rule in sorted(clause):
                    extend(chosen | {rule})
                return
        # Every clause hit; keep only minimal sets.
        for r in results:
            if r <= chosen:
                return
        for r in [r for r in results if chosen < r]:
            results.discard(r)
        results.add(chosen)

    extend(frozenset())
    return sorted(results, key=lambda s: (len(s), sorted(s)))


def brute_force_maximal_sets(guide: Guide, dnf: BreakingSetDNF) -> list[frozenset[str]]:
    """All maximal non-breaking subsets of the guide, by exhaustive search.

    A subset is maximal non-breaking exactly when its complement is a
    minimal hitting set of the clauses, so only rules that occur in some
    clause ever need to be left out.  Clauses mentioning rules outside the
    guide can never fire and are ignored.
    """
    relevant = [c for c in dnf.clauses if c <= set(guide.rules)]
    variables = set().union(*relevant) if relevant else set()
    if len(variables) > MAX_BRUTE_FORCE_VARIABLES:
        raise ValueError(
            f"brute force bounded to {MAX_BRUTE_FORCE_VARIABLES} clause "
            f"variables, got {len(variables)}"
        )
    full = frozenset(guide.rules)
    if not relevant:
        return [full]
    hitting = _minimal_hitting_sets(relevant)
    out = sorted({full - h for h in hitting}, key=lambda s: sorted(s))
    return out


@dataclass(frozen=True)
class VerificationReport:
    non_breaking: bool
    maximal: bool
    classification: str  # exact | subset_of_correct | wrong


def verify_solution(
    guide: Guide, dnf: BreakingSetDNF, sol: "Solution | frozenset[str] | set[str]"
) -> VerificationReport:
    """Check a candidate exclusion set against the ground-truth DNF.

    Accepts a Solution or a bare excluded-rule set.

    exact: the kept rules are a maximal non-breaking set.
    subset_of_correct: non-breaking, but some excluded rule could return.
    wrong: the kept rules still break something.
    """
    excluded = frozenset(sol.excluded if isinstance(sol, Solution) else sol)
    unknown = excluded - set(guide.rules)
    if unknown:
        raise ValueError(f"excluded rules not in guide: {sorted(unknown)}")
    kept = frozenset(guide.rules) - excluded
    non_breaking = not is_breaking(dnf, kept)
    maximal = non_breaking and all(
        is_breaking(dnf, kept | {rule}) for rule in sorted(excluded)
    )
    if not non_breaking:
        classification = "wrong"
    elif maximal:
        classification = "exact"
    else:
        classification = "subset_of_correct"
    return VerificationReport(non_breaking, maximal, classification)


@dataclass(frozen=True)
class CorpusSpec:
    """Shape of a generated corpus of breaking sets.

    One base set per grid cell (c clauses, k rules per clause) for
    c in 1..max_clauses and k in 1..max_rules_per_clause, plus one empty
    set, plus variants_per_base structure-preserving relabelings of every
    base.
    """

    max_clauses: int
    max_rules_per_clause: int
    variants_per_base: int
    seed: int
    disjoint_clauses: bool = True

    def __post_init__(self) -> None:
        if self.max_clauses < 1 or self.max_rules_per_clause < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.variants_per_base < 0:
            raise ValueError("variants_per_base must be >= 0")


def _sample_clauses(
    rng: np.random.Generator,
    rules: Sequence[str],
    n_clauses: int,
    rules_per_clause: int,
    disjoint: bool,
) -> tuple[frozenset[str], ...]:
    if disjoint:
        need = n_clauses * rules_per_clause
        if need > len(rules):
            raise ValueError(
                f"cell ({n_clauses}, {rules_per_clause}) needs {need} rules, "
                f"guide has {len(rules)}"
            )
        picked = rng.choice(len(rules), size=need, replace=False)
        clauses = [
            frozenset(rules[j] for j in picked[i * rules_per_clause : (i + 1) * rules_per_clause])
            for i in range(n_clauses)
        ]
        return tuple(clauses)
    clauses = []
    attempts = 0
    while len(clauses) < n_clauses:
        picked = rng.choice(len(rules), size=rules_per_clause, replace=False)
        clause = frozenset(rules[j] for j in picked)
        # Reject choices that would normalize away (subset or superset of
        # an existing clause); bounded retries keep generation total.
        attempts += 1
        if attempts > 200 * n_clauses:
            raise ValueError("could not sample a non-degenerate clause set")
        if any(clause <= c or c <= clause for c in clauses):
            continue
        clauses.append(clause)
    return tuple(clauses)


def gen_corpus(guide: Guide, spec: CorpusSpec) -> list[BreakingSetDNF]:
    """Deterministically generate the study corpus for a guide.

    Sets are named <clauses>_<rules>_<variant>, variant 0 being the base;
    the empty set is named "empty".  Variants relabel the base's rules via
    a random injective map so clause structure is preserved exactly.
    """
    out = [BreakingSetDNF(name="empty", clauses=())]
    rules = list(guide.rules)
    for c in range(1, spec.max_clauses + 1):
        for k in range(1, spec.max_rules_per_clause + 1):
            cell_seed = np.random.SeedSequence([spec.seed, c, k])
            rng = np.random.default_rng(cell_seed)
            base = _sample_clauses(rng, rules, c, k, spec.disjoint_clauses)
            out.append(BreakingSetDNF(name=f"{c}_{k}_0", clauses=base))
            base_vars = sorted(set().union(*base))
            for v in range(1, spec.variants_per_base + 1):
                target = rng.choice(len(rules), size=len(base_vars), replace=False)
                mapping = {
                    old: rules[int(j)] for old, j in zip(base_vars, target)
                }
                relabeled = tuple(
                    frozenset(mapping[r] for r in clause) for clause in base
                )
                out.append(BreakingSetDNF(name=f"{c}_{k}_{v}", clauses=relabeled))
    return out


def evaluate_tuple_simulated(
    dnf: BreakingSetDNF, guide: Guide, rule_tuple: RuleTuple
) -> RunRecord:
    """Pure simulated evaluation of one covering-array row."""
    applied = tuple_to_applied(guide, rule_tuple)
    broken = is_breaking(dnf, applied)
    return RunRecord(
        stage="tuple",
        tuple_index=rule_tuple.index,
        applied=applied,
        passed=not broken,
        failed_tests=("simulated",) if broken else (),
    )


def load_breaking_set(path: str | Path) -> BreakingSetDNF:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "name" not in doc or "clauses" not in doc:
        raise FormatError(f"{path}: expected fields name and clauses")
    clauses = doc["clauses"]
    if not isinstance(clauses, list) or not all(isinstance(c, list) for c in clauses):
        raise FormatError(f"{path}: clauses must be a list of rule lists")
    return BreakingSetDNF(
        name=str(doc["name"]),
        clauses=tuple(frozenset(str(r) for r in c) for c in clauses),
    )


def save_breaking_set(dnf: BreakingSetDNF, path: str | Path) -> None:
    doc = {"name": dnf.name, "clauses": [sorted(c) for c in dnf.clauses]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
