"""Exact breakage analysis by two-level logic minimization.

Test results become a truth table over rule-application variables, with
untested combinations left as don't-cares.  The breaking function is
covered by prime implicants, and the rules to exclude fall out as a
minimum hitting set over the positive literals of that cover: its
complement is a maximal non-breaking subset of the guide.

Variable pruning keeps the table small enough to minimize exactly.
Each pruning step is a projection; a step that makes a breaking and a
non-breaking row collide is rolled back.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import AnalysisError, FormatError, Guide, ResultSet, Solution

__all__ = [
    "MAX_VARIABLES",
    "TooManyVariablesError",
    "NonMonotoneBreakageError",
    "TruthTable",
    "Implicant",
    "build_table",
    "minimize",
    "extract_exclusions",
    "format_cover",
]

MAX_VARIABLES = 20
# Hard cap on enumerated prime implicants; past this the exact cover
# search would dominate runtime without converging usefully.
PRIME_ENUM_CAP = 200_000
# Search-node budget per minimize call; exhausting it means the instance
# is too irregular for exact minimization in reasonable time.
WORK_BUDGET = 2_000_000


class TooManyVariablesError(AnalysisError):
    """Too many variables survive pruning for exact minimization."""


class NonMonotoneBreakageError(AnalysisError):
    """A breakage pattern that excluding rules cannot fix."""


class _WorkBudget:
    """Decrementing node counter shared by the searches of one call."""

    __slots__ = ("left",)

    def __init__(self, n: int) -> None:
        self.left = n

    def spend(self, k: int = 1) -> None:
        self.left -= k
        if self.left < 0:
            raise AnalysisError(
                "minimization exceeds the complexity cap; "
                "use the decision-tree strategy"
            )


@dataclass(frozen=True)
class TruthTable:
    """Projected test observations: breaking rows, non-breaking rows.

    Row vectors are 0/1 per variable; every combination that appears in
    neither list is a don't-care.
    """

    variables: tuple[str, ...]
    on_rows: tuple[tuple[int, ...], ...]
    off_rows: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "on_rows", tuple(map(tuple, self.on_rows)))
        object.__setattr__(self, "off_rows", tuple(map(tuple, self.off_rows)))
        width = len(self.variables)
        for row in self.on_rows + self.off_rows:
            if len(row) != width:
                raise FormatError("truth-table row width != variable count")
        if set(self.on_rows) & set(self.off_rows):
            raise FormatError("truth table marks a row both breaking and not")


@dataclass(frozen=True)
class Implicant:
    """A conjunction of rule literals; rules not mentioned are dashes."""

    literals: tuple[tuple[str, bool], ...]

    def __post_init__(self) -> None:
        lits = tuple(sorted((str(r), bool(v)) for r, v in self.literals))
        if len({r for r, _ in lits}) != len(lits):
            raise FormatError("implicant mentions a rule twice")
        object.__setattr__(self, "literals", lits)

    @property
    def positives(self) -> frozenset[str]:
        return frozenset(r for r, v in self.literals if v)

    def matches_applied(self, applied: frozenset[str]) -> bool:
        return all((rule in applied) == want for rule, want in self.literals)

    def __str__(self) -> str:
        if not self.literals:
            return "(always)"
        return " & ".join(r if v else f"!{r}" for r, v in self.literals)


# ---------------------------------------------------------------------------
# truth-table construction

def _project_classes(
    mat: np.ndarray, passed: np.ndarray, cols: Sequence[int]
) -> Optional[tuple[set[bytes], set[bytes]]]:
    """Row byte-keys per class after projecting onto cols; None on collision."""
    sub = np.ascontiguousarray(mat[:, list(cols)])
    on: set[bytes] = set()
    off: set[bytes] = set()
    for i in range(sub.shape[0]):
        key = sub[i].tobytes()
        if passed[i]:
            off.add(key)
        else:
            on.add(key)
    if on & off:
        return None
    return on, off


def build_table(results: ResultSet, guide: Guide) -> TruthTable:
    """Truth table from test results, pruned to the informative variables.

    Pruning ladder, each step rolled back if it makes a breaking and a
    non-breaking observation collide:
      1. drop columns constant across all rows;
      2. drop rules never applied in any breaking row;
      3. keep only rules applied in every breaking row.
    Step 3 exploits monotone breakage: rules absent from some breaking
    row cannot be required by the clause that row triggered, and on
    multi-clause behavior it collides and rolls back.
    """
    records = [r for r in results.records if r.tested]
    if not records:
        raise AnalysisError("no tested records to analyze")
    rules = guide.rules
    index = {rule: j for j, rule in enumerate(rules)}
    for rec in records:
        for rule in rec.applied:
            if rule not in index:
                raise FormatError(f"record applies unknown rule {rule!r}")

    mat = np.zeros((len(records), len(rules)), dtype=np.uint8)
    passed = np.zeros(len(records), dtype=bool)
    for i, rec in enumerate(records):
        for rule in rec.applied:
            mat[i, index[rule]] = 1
        passed[i] = rec.passed

    full = _project_classes(mat, passed, range(len(rules)))
    if full is None:
        raise FormatError("identical configurations with contradictory outcomes")

    cols = list(range(len(rules)))
    fails = mat[~passed]

    def try_step(candidate: Sequence[int]) -> None:
        nonlocal cols
        candidate = list(candidate)
        if candidate == cols:
            return
        if not candidate and fails.shape[0]:
            # Refuse to project breaking rows down to nothing.
            return
        if _project_classes(mat, passed, candidate) is not None:
            cols = candidate

    # 1: constant columns carry no information.
    spread = mat.min(axis=0) != mat.max(axis=0)
    try_step([j for j in cols if spread[j]])
    # 2: never applied in a breaking row -> not in any positive implicant.
    if fails.shape[0]:
        in_some_fail = fails.max(axis=0) == 1
        try_step([j for j in cols if in_some_fail[j]])
        # 3: applied in every breaking row (single-clause refinement).
        in_all_fails = fails.min(axis=0) == 1
        try_step([j for j in cols if in_all_fails[j]])

    projected = _project_classes(mat, passed, cols)
    assert projected is not None
    sub = np.ascontiguousarray(mat[:, cols])
    width = len(cols)

    def decode(keys: set[bytes]) -> tuple[tuple[int, ...], ...]:
        rows = [tuple(np.frombuffer(k, dtype=np.uint8, count=width)) for k in keys]
        return tuple(sorted(tuple(int(v) for v in row) for row in rows))

    on_keys, off_keys = projected
    return TruthTable(
        variables=tuple(rules[j] for j in cols),
        on_rows=decode(on_keys),
        off_rows=decode(off_keys),
    )


# ---------------------------------------------------------------------------
# exact minimum hitting sets

def _min_hitting_set(
    sets: Sequence[frozenset], universe: Sequence
) -> tuple:
    """Lexicographically smallest minimum hitting set.

    Iterative deepening over the subset size; within a size the DFS
    tries universe elements in order, so the first complete solution is
    the lexicographically smallest one of minimum cardinality.
    """
    need = [s for s in sets if s]
    if any(not s for s in sets):
        raise AnalysisError("unhittable empty set in hitting-set instance")
    if not need:
        return ()
    # Drop supersets; hitting all minimal sets hits everything.
    minimal: list[frozenset] = []
    for s in sorted(set(need), key=len):
        if not any(m <= s for m in minimal):
            minimal.append(s)
    order = list(universe)
    pos = {e: i for i, e in enumerate(order)}

    def lower_bound(remaining: list[frozenset]) -> int:
        bound = 0
        taken: set = set()
        for s in remaining:
            if not (s & taken):
                bound += 1
                taken |= s
        return bound

    def dfs(start: int, remaining: list[frozenset], budget: int, chosen: list):
        if not remaining:
            return tuple(chosen)
        if budget == 0 or lower_bound(remaining) > budget:
            return None
        # Only elements that appear in some remaining set are useful.
        useful = sorted({e for s in remaining for e in s}, key=pos.__getitem__)
        for e in useful:
            if pos[e] < start:
                continue
            chosen.append(e)
            nxt = [s for s in remaining if e not in s]
            got = dfs(pos[e] + 1, nxt, budget - 1, chosen)
            if got is not None:
                return got
            chosen.pop()
        return None

    for k in range(lower_bound(minimal), len(order) + 1):
        got = dfs(0, minimal, k, [])
        if got is not None:
            return got
    raise AnalysisError("hitting-set search exhausted without a solution")


def _minimal_hitting_sets_capped(
    sets: Sequence[frozenset], cap: int, budget: Optional[_WorkBudget] = None
) -> list[frozenset]:
    """All minimal hitting sets, or raise past cap (prime enumeration).

    The budget counts search nodes, so dead-end thrashing trips it even
    when few results accumulate.
    """
    if budget is None:
        budget = _WorkBudget(WORK_BUDGET)
    minimal_in: list[frozenset] = []
    for s in sorted(set(sets), key=len):
        if not any(m <= s for m in minimal_in):
            minimal_in.append(s)
    results: list[frozenset] = []

    def extend(chosen: frozenset, remaining: list[frozenset]) -> None:
        budget.spend()
        if len(results) > cap:
            raise AnalysisError(
                "prime implicant enumeration exceeds the complexity cap; "
                "use the decision-tree strategy"
            )
        if not remaining:
            # Minimality: every chosen element must be the sole hitter
            # of some input set.
            for e in chosen:
                if not any(s & chosen == {e} for s in minimal_in):
                    return
            results.append(chosen)
            return
        s = min(remaining, key=lambda x: (len(x), sorted(x)))
        for e in sorted(s):
            if e in chosen:
                continue
            extend(chosen | {e}, [r for r in remaining if e not in r])

    if any(not s for s in minimal_in):
        raise AnalysisError("unhittable empty set in hitting-set instance")
    extend(frozenset(), minimal_in)
    out = []
    seen = set()
    for r in results:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# minimization

def _single_point_cover(table: TruthTable) -> list[Implicant]:
    point = table.on_rows[0]
    diffs = []
    for off in table.off_rows:
        diffs.append(frozenset(j for j in range(len(point)) if off[j] != point[j]))
    chosen = _min_hitting_set(diffs, range(len(point)))
    lits = tuple((table.variables[j], bool(point[j])) for j in chosen)
    return [Implicant(literals=lits)]


def _complete_monotone_cover(table: TruthTable) -> Optional[list[Implicant]]:
    """Fast exact path for complete tables of a monotone function.

    On a complete table the primes of a monotone function are exactly
    the positive cubes of its minimal true points, and each is
    essential, so the minimum cover is all of them.
    """
    n = len(table.variables)
    if n > 24 or len(table.on_rows) + len(table.off_rows) != (1 << n):
        return None
    on_ints = set()
    for row in table.on_rows:
        x = 0
        for j, v in enumerate(row):
            if v:
                x |= 1 << j
        on_ints.add(x)
    # Monotone check: removing one applied rule from a passing point can
    # not make it break.
    for row in table.off_rows:
        x = 0
        for j, v in enumerate(row):
            if v:
                x |= 1 << j
        for j in range(n):
            if x & (1 << j) and (x ^ (1 << j)) in on_ints:
                return None
    cover = []
    for x in sorted(on_ints):
        if any((x ^ (1 << j)) in on_ints for j in range(n) if x & (1 << j)):
            continue
        lits = tuple(
            (table.variables[j], True) for j in range(n) if x & (1 << j)
        )
        cover.append(Implicant(literals=lits))
    return cover


def _exact_cover(
    primes: dict[tuple, Implicant],
    prime_rows: dict[tuple, set[int]],
    n_on: int,
    budget: _WorkBudget,
) -> list[tuple]:
    """Minimum-cardinality selection of primes covering all on rows:
    essential primes first, then branch and bound on the row with the
    fewest remaining covers."""
    order = sorted(primes, key=lambda k: (len(k), k))
    chosen: list[tuple] = []
    uncovered = set(range(n_on))
    changed = True
    while changed and uncovered:
        changed = False
        for i in sorted(uncovered):
            hits = [k for k in order if i in prime_rows[k]]
            if not hits:
                raise AnalysisError(
                    "no prime cover found; table is inconsistent"
                )
            if len(hits) == 1:
                k = hits[0]
                chosen.append(k)
                uncovered -= prime_rows[k]
                changed = True
                break
    best: Optional[list[tuple]] = None

    def search(uncov: set[int], picked: list[tuple]) -> None:
        nonlocal best
        budget.spend()
        if best is not None and len(picked) >= len(best):
            return
        if not uncov:
            best = list(picked)
            return
        i = min(uncov, key=lambda r: sum(1 for k in order if r in prime_rows[k]))
        for k in order:
            if i in prime_rows[k]:
                picked.append(k)
                search(uncov - prime_rows[k], picked)
                picked.pop()

    search(uncovered, [])
    if best is None:
        raise AnalysisError("no prime cover found; table is inconsistent")
    return sorted(set(chosen) | set(best), key=lambda k: (len(k), k))


def _monotone_incomplete_cover(table: TruthTable) -> Optional[list[Implicant]]:
    """Positive-cube cover for observations consistent with monotone
    breakage (no non-breaking row applies a superset of a breaking row).

    Untested configurations are don't-cares.  Rule-caused breakage is
    monotone, so candidate implicants are restricted to positive cubes;
    within that family the cover is an exact minimum.  Returns None when
    the data itself contradicts monotonicity.
    """
    n = len(table.variables)
    on = np.array(table.on_rows, dtype=np.int8)
    if table.off_rows:
        off = np.array(table.off_rows, dtype=np.int8)
    else:
        off = np.zeros((0, n), dtype=np.int8)
    for row in on:
        if off.shape[0] and bool((off >= row).all(axis=1).any()):
            return None
    budget = _WorkBudget(WORK_BUDGET)
    primes: dict[tuple, Implicant] = {}
    prime_rows: dict[tuple, set[int]] = {}
    for i in range(on.shape[0]):
        ones = np.flatnonzero(on[i] == 1)
        # A positive cube inside this row's applied set excludes an off
        # row iff it contains a position that row leaves unapplied.
        zsets = [
            frozenset(int(j) for j in ones if o[j] == 0) for o in off
        ]
        cap = max(0, PRIME_ENUM_CAP - len(primes))
        for fixed in _minimal_hitting_sets_capped(zsets, cap, budget):
            key = tuple(sorted((int(j), 1) for j in fixed))
            if key not in primes:
                lits = tuple((table.variables[j], True) for j, _ in key)
                primes[key] = Implicant(literals=lits)
    for key in primes:
        cols = [j for j, _ in key]
        mask = (on[:, cols] == 1).all(axis=1) if cols else np.ones(
            on.shape[0], dtype=bool
        )
        prime_rows[key] = {int(i) for i in np.flatnonzero(mask)}
    cover_keys = _exact_cover(primes, prime_rows, on.shape[0], budget)
    return [primes[k] for k in cover_keys]


def _general_cover(table: TruthTable) -> list[Implicant]:
    """Exact minimum-cardinality prime cover for small tables."""
    n = len(table.variables)
    on = [tuple(r) for r in table.on_rows]
    off = [tuple(r) for r in table.off_rows]
    budget = _WorkBudget(WORK_BUDGET)
    primes: dict[tuple, Implicant] = {}
    prime_rows: dict[tuple, set[int]] = {}
    for i, row in enumerate(on):
        diffs = [
            frozenset(j for j in range(n) if o[j] != row[j]) for o in off
        ]
        cap = max(0, PRIME_ENUM_CAP - len(primes))
        for fixed in _minimal_hitting_sets_capped(diffs, cap, budget):
            key = tuple(sorted((j, row[j]) for j in fixed))
            if key not in primes:
                lits = tuple((table.variables[j], bool(v)) for j, v in key)
                primes[key] = Implicant(literals=lits)
                prime_rows[key] = set()
    # Row coverage per prime (a cube covers every row agreeing on it).
    for key in primes:
        fixed = dict(key)
        for i, row in enumerate(on):
            if all(row[j] == v for j, v in fixed.items()):
                prime_rows[key].add(i)
    cover_keys = _exact_cover(primes, prime_rows, len(on), budget)
    return [primes[k] for k in cover_keys]


def minimize(table: TruthTable) -> list[Implicant]:
    """Minimal prime-implicant cover of the breaking rows.

    Exact and deterministic.  Tables whose breaking rows all project to
    one point minimize at any width; complete monotone tables take a
    closed-form path; incomplete tables consistent with monotone
    breakage get a positive-cube cover; anything else must fit
    MAX_VARIABLES.
    """
    if not table.on_rows:
        return []
    cover: Optional[list[Implicant]] = None
    if len(set(table.on_rows)) == 1:
        cover = _single_point_cover(table)
    else:
        cover = _complete_monotone_cover(table)
        if cover is None:
            cover = _monotone_incomplete_cover(table)
        if cover is None:
            if len(table.variables) > MAX_VARIABLES:
                raise TooManyVariablesError(
                    f"{len(table.variables)} variables after pruning exceeds "
                    f"the exact-minimization limit of {MAX_VARIABLES}; "
                    f"use the decision-tree strategy"
                )
            cover = _general_cover(table)
    # Soundness recheck: no implicant may cover a non-breaking row.
    for imp in cover:
        want = dict(imp.literals)
        for off in table.off_rows:
            vals = dict(zip(table.variables, off))
            if all(vals.get(r) == int(v) for r, v in want.items()):
                raise AnalysisError(f"implicant {imp} covers a non-breaking row")
    return cover


def extract_exclusions(cover: Sequence[Implicant], guide: Guide) -> Solution:
    """Rules to exclude: a minimum hitting set over positive literals.

    Every implicant must lose at least one applied rule, so the excluded
    set must intersect each implicant's positive literals; the minimum
    such set (lexicographic tie-break) keeps the remaining guide as
    large as possible.
    """
    known = set(guide.rules)
    positive_sets = []
    for imp in cover:
        pos = imp.positives
        if not pos:
            raise NonMonotoneBreakageError(
                f"implicant {imp} has no applied-rule literal: breakage is "
                f"non-monotone and cannot be fixed by excluding rules"
            )
        stray = pos - known
        if stray:
            raise FormatError(f"implicant mentions rules not in guide: {sorted(stray)}")
        positive_sets.append(pos)
    excluded = _min_hitting_set(positive_sets, sorted(known))
    return Solution(strategy="logic_min", excluded=frozenset(excluded))


def format_cover(cover: Sequence[Implicant]) -> str:
    """Human-readable cover dump, one implicant per line."""
    return "\n".join(str(imp) for imp in cover) + ("\n" if cover else "")
