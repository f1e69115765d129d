"""Core value objects: guides, rule tuples, run records, result sets, solutions.

Everything in here is an immutable value object with JSON persistence.
The on-disk formats are plain JSON documents so that results can be
inspected and diffed with standard tools.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

__all__ = [
    "AnalysisError",
    "FormatError",
    "Guide",
    "RuleTuple",
    "RunRecord",
    "ResultSet",
    "Solution",
    "STAGES",
    "STRATEGIES",
    "load_guide",
    "save_guide",
    "tuple_to_applied",
    "load_results",
    "save_results",
    "load_solution",
    "save_solution",
]

_RULE_ID_RE = re.compile(r"^[A-Za-z0-9_]+$")

STAGES = ("baseline", "full_guide", "revert_check", "tuple")
STRATEGIES = ("dtree_shortest_path", "dtree_max_partition", "logic_min")


class FormatError(ValueError):
    """Raised when a document violates the expected structure or an invariant."""


class AnalysisError(ValueError):
    """Raised when an analysis cannot produce a solution for its input."""


def _check_rule_id(rule: object) -> str:
    if not isinstance(rule, str) or not _RULE_ID_RE.match(rule):
        raise FormatError(f"invalid rule id: {rule!r}")
    return rule


@dataclass(frozen=True)
class Guide:
    """An ordered set of opaque rule identifiers.

    Rule order is meaningful: it fixes the column order of every covering
    array generated for the guide.
    """

    guide_id: str
    rules: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.guide_id:
            raise FormatError("guide_id must be non-empty")
        object.__setattr__(self, "rules", tuple(self.rules))
        seen = set()
        for rule in self.rules:
            _check_rule_id(rule)
            if rule in seen:
                raise FormatError(f"duplicate rule id: {rule}")
            seen.add(rule)

    def __len__(self) -> int:
        return len(self.rules)

    def index_of(self, rule: str) -> int:
        try:
            return self.rules.index(rule)
        except ValueError:
            raise KeyError(f"rule not in guide: {rule}") from None


@dataclass(frozen=True)
class RuleTuple:
    """One covering-array row: a boolean selection over a guide's rules."""

    index: int
    selection: tuple[bool, ...]

    def __post_init__(self) -> None:
        if self.index < 0:
            raise FormatError("tuple index must be >= 0")
        object.__setattr__(self, "selection", tuple(bool(v) for v in self.selection))


def tuple_to_applied(guide: Guide, rule_tuple: RuleTuple) -> frozenset[str]:
    """Map a selection vector to the set of applied rule ids.

    The vector length must match the guide; position k corresponds to
    guide.rules[k].
    """
    if len(rule_tuple.selection) != len(guide.rules):
        raise FormatError(
            f"selection length {len(rule_tuple.selection)} does not match "
            f"guide size {len(guide.rules)}"
        )
    return frozenset(
        rule for rule, on in zip(guide.rules, rule_tuple.selection) if on
    )


@dataclass(frozen=True)
class RunRecord:
    """Outcome of evaluating one configuration at one pipeline stage.

    passed is true exactly when failed_tests is empty.  A record with
    evaluator_error set marks a tuple whose apply phase failed: it was
    never tested and analysis must skip it.
    """

    stage: str
    applied: frozenset[str]
    passed: bool
    failed_tests: tuple[str, ...] = ()
    tuple_index: Optional[int] = None
    evaluator_error: Optional[str] = None

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise FormatError(f"unknown stage: {self.stage!r}")
        object.__setattr__(self, "applied", frozenset(self.applied))
        object.__setattr__(self, "failed_tests", tuple(self.failed_tests))
        if self.stage == "tuple":
            if self.tuple_index is None or self.tuple_index < 0:
                raise FormatError("tuple records need a tuple_index >= 0")
        if self.evaluator_error is None:
            if self.passed != (not self.failed_tests):
                raise FormatError("passed must equal (failed_tests is empty)")
        else:
            if self.passed:
                raise FormatError("a record with evaluator_error cannot pass")

    @property
    def tested(self) -> bool:
        return self.evaluator_error is None


@dataclass(frozen=True)
class ResultSet:
    """All run records collected for one guide, plus array metadata."""

    guide_id: str
    records: tuple[RunRecord, ...]
    strength: Optional[int] = None
    algorithm_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.guide_id:
            raise FormatError("guide_id must be non-empty")
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.stage == "tuple":
                if rec.tuple_index in seen:
                    raise FormatError(
                        f"duplicate tuple record for index {rec.tuple_index}"
                    )
                seen.add(rec.tuple_index)

    def tuple_records(self, tested_only: bool = True) -> tuple[RunRecord, ...]:
        recs = [r for r in self.records if r.stage == "tuple"]
        if tested_only:
            recs = [r for r in recs if r.tested]
        return tuple(recs)


@dataclass(frozen=True)
class Solution:
    """A candidate set of rules to exclude from a guide.

    The verified_* fields are tri-state: None means the check was not
    run, True/False record the outcome of re-verification.
    """

    strategy: str
    excluded: frozenset[str]
    verified_non_breaking: Optional[bool] = None
    verified_maximal: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise FormatError(f"unknown strategy: {self.strategy!r}")
        object.__setattr__(self, "excluded", frozenset(self.excluded))


# ---------------------------------------------------------------------------
# persistence

def _read_json(path: str | Path) -> object:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc


def _write_json(path: str | Path, doc: object) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )


def _expect(doc: object, key: str, path: str | Path) -> object:
    if not isinstance(doc, dict) or key not in doc:
        raise FormatError(f"{path}: missing field {key!r}")
    return doc[key]


def load_guide(path: str | Path) -> Guide:
    doc = _read_json(path)
    guide_id = _expect(doc, "guide_id", path)
    rules = _expect(doc, "rules", path)
    if not isinstance(guide_id, str) or not isinstance(rules, list):
        raise FormatError(f"{path}: guide_id must be a string, rules a list")
    return Guide(guide_id=guide_id, rules=tuple(rules))


def save_guide(guide: Guide, path: str | Path) -> None:
    _write_json(path, {"guide_id": guide.guide_id, "rules": list(guide.rules)})


def _record_to_doc(rec: RunRecord) -> dict:
    doc: dict = {
        "stage": rec.stage,
        "tuple_index": rec.tuple_index,
        "applied": sorted(rec.applied),
        "passed": rec.passed,
        "failed_tests": list(rec.failed_tests),
    }
    if rec.evaluator_error is not None:
        doc["evaluator_error"] = rec.evaluator_error
    return doc


def _record_from_doc(doc: object, path: str | Path) -> RunRecord:
    stage = _expect(doc, "stage", path)
    applied = _expect(doc, "applied", path)
    passed = _expect(doc, "passed", path)
    failed = _expect(doc, "failed_tests", path)
    if not isinstance(applied, list) or not isinstance(failed, list):
        raise FormatError(f"{path}: applied and failed_tests must be lists")
    return RunRecord(
        stage=stage,
        applied=frozenset(_check_rule_id(r) for r in applied),
        passed=bool(passed),
        failed_tests=tuple(str(t) for t in failed),
        tuple_index=doc.get("tuple_index"),
        evaluator_error=doc.get("evaluator_error"),
    )


def load_results(path: str | Path) -> ResultSet:
    doc = _read_json(path)
    guide_id = _expect(doc, "guide_id", path)
    records = _expect(doc, "records", path)
    if not isinstance(records, list):
        raise FormatError(f"{path}: records must be a list")
    return ResultSet(
        guide_id=guide_id,
        strength=doc.get("strength"),
        algorithm_tag=doc.get("algorithm_tag"),
        records=tuple(_record_from_doc(r, path) for r in records),
    )


def save_results(results: ResultSet, path: str | Path) -> None:
    _write_json(
        path,
        {
            "guide_id": results.guide_id,
            "strength": results.strength,
            "algorithm_tag": results.algorithm_tag,
            "records": [_record_to_doc(r) for r in results.records],
        },
    )


def load_solution(path: str | Path) -> Solution:
    doc = _read_json(path)
    strategy = _expect(doc, "strategy", path)
    excluded = _expect(doc, "excluded", path)
    if not isinstance(excluded, list):
        raise FormatError(f"{path}: excluded must be a list")
    return Solution(
        strategy=strategy,
        excluded=frozenset(_check_rule_id(r) for r in excluded),
        verified_non_breaking=doc.get("verified_non_breaking"),
        verified_maximal=doc.get("verified_maximal"),
    )


def save_solution(solution: Solution, path: str | Path) -> None:
    _write_json(
        path,
        {
            "strategy": solution.strategy,
            "excluded": sorted(solution.excluded),
            "verified_non_breaking": solution.verified_non_breaking,
            "verified_maximal": solution.verified_maximal,
        },
    )
