"""Test-run orchestration: baseline, full-guide and revert checks, then
parallel apply-test-reset evaluation of covering-array tuples.

Two evaluators share one record contract.  The simulated evaluator
consults a breaking-set DNF and never touches the system.  The external
evaluator drives operator-supplied commands: apply_cmd and revert_cmd
receive the path of a temp file listing the tuple's applied rule ids
(one per line, newline-terminated) as an extra argument; test_cmd runs
bare and its exit status decides pass/fail, with failing test names
read from its standard output.
"""
from __future__ import annotations

import json
import os
import shlex
import subprocess
import tempfile
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Optional

from .covering import CoveringArray
from .model import FormatError, Guide, ResultSet, RunRecord
from .oracle import BreakingSetDNF, is_breaking

__all__ = [
    "HarnessError",
    "RevertFailure",
    "EvaluatorConfig",
    "ResetPolicy",
    "WorkerPlan",
    "BaselineReport",
    "SimulatedEvaluator",
    "ExternalEvaluator",
    "make_evaluator",
    "run_baseline",
    "run_full_guide",
    "run_revert_check",
    "run_tuples",
    "untested_indices",
]

DEFAULT_TIMEOUT_S = 600


class HarnessError(RuntimeError):
    """A pipeline-level failure outside any single tuple record."""


class RevertFailure(HarnessError):
    """Reverting rules failed; the system state can no longer be trusted."""

    def __init__(self, message: str, record: Optional[RunRecord] = None):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class EvaluatorConfig:
    """How test runs are evaluated: simulated against a DNF, or external."""

    kind: str
    dnf: Optional[BreakingSetDNF] = None
    apply_cmd: Optional[str] = None
    test_cmd: Optional[str] = None
    revert_cmd: Optional[str] = None
    compliance_cmd: Optional[str] = None
    recreate_cmd: Optional[str] = None
    timeout_s: int = DEFAULT_TIMEOUT_S

    def __post_init__(self) -> None:
        if self.kind not in ("simulated", "external"):
            raise FormatError(f"unknown evaluator kind: {self.kind!r}")
        if self.kind == "simulated" and self.dnf is None:
            raise FormatError("simulated evaluator needs a breaking-set DNF")
        if self.kind == "external":
            missing = [
                name
                for name, value in (
                    ("apply_cmd", self.apply_cmd),
                    ("test_cmd", self.test_cmd),
                    ("revert_cmd", self.revert_cmd),
                )
                if not value
            ]
            if missing:
                raise FormatError(
                    f"external evaluator needs {', '.join(missing)}"
                )
        if self.timeout_s <= 0:
            raise FormatError("timeout_s must be positive")


@dataclass(frozen=True)
class ResetPolicy:
    """soft: revert rules in place; hard: recreate the environment."""

    mode: str = "soft"

    def __post_init__(self) -> None:
        if self.mode not in ("soft", "hard"):
            raise FormatError(f"unknown reset mode: {self.mode!r}")


@dataclass(frozen=True)
class WorkerPlan:
    """Partition of tuple indices over workers, balanced within one."""

    n_workers: int
    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n_workers < 1:
            raise FormatError("n_workers must be >= 1")
        object.__setattr__(self, "assignment", tuple(self.assignment))
        sizes = [0] * self.n_workers
        for worker in self.assignment:
            if not 0 <= worker < self.n_workers:
                raise FormatError(f"worker id {worker} out of range")
            sizes[worker] += 1
        if sizes and max(sizes) - min(sizes) > 1:
            raise FormatError("worker loads differ by more than one tuple")

    @staticmethod
    def round_robin(n_tuples: int, n_workers: int) -> "WorkerPlan":
        return WorkerPlan(
            n_workers=n_workers,
            assignment=tuple(i % n_workers for i in range(n_tuples)),
        )


@dataclass(frozen=True)
class BaselineReport:
    """Pre-flight results; fields stay None until their check runs."""

    baseline_passed: Optional[bool] = None
    full_guide_passed: Optional[bool] = None
    revert_ok: Optional[bool] = None
    noncompliant_rules: Optional[frozenset[str]] = None
    record: Optional[RunRecord] = None


# ---------------------------------------------------------------------------
# evaluators

def _record(
    stage: str,
    applied: frozenset[str],
    broken: bool,
    failed: tuple[str, ...],
    tuple_index: Optional[int],
    error: Optional[str] = None,
) -> RunRecord:
    if error is not None:
        return RunRecord(
            stage=stage,
            applied=applied,
            passed=False,
            failed_tests=(),
            tuple_index=tuple_index,
            evaluator_error=error,
        )
    return RunRecord(
        stage=stage,
        applied=applied,
        passed=not broken,
        failed_tests=failed if broken else (),
        tuple_index=tuple_index,
    )


class SimulatedEvaluator:
    """Pure-function evaluation against a breaking-set DNF."""

    def __init__(self, dnf: BreakingSetDNF):
        self.dnf = dnf

    def run_tuple(
        self, applied: frozenset[str], stage: str = "tuple",
        tuple_index: Optional[int] = None,
    ) -> RunRecord:
        broken = is_breaking(self.dnf, applied)
        return _record(stage, applied, broken, ("simulated",), tuple_index)

    def reset(self, policy: ResetPolicy) -> None:
        pass  # state is virtual

    def compliance(self, applied: frozenset[str]) -> Optional[frozenset[str]]:
        return None


class ExternalEvaluator:
    """Drives operator commands; one instance per worker, never shared.

    Concurrent workers must target isolated environments: every command
    runs with BREAKFINDER_WORKER set to the worker's index so it can
    route to its own instance (VM, container, directory).  Commands
    that drive one shared system are only safe with a single worker.
    """

    def __init__(self, cfg: EvaluatorConfig, worker_id: int = 0):
        if cfg.kind != "external":
            raise FormatError("ExternalEvaluator needs an external config")
        self.cfg = cfg
        self.worker_id = worker_id

    def _run(self, cmd: str, tuple_path: Optional[str], phase: str):
        argv = shlex.split(cmd)
        if tuple_path is not None:
            argv.append(tuple_path)
        env = dict(os.environ, BREAKFINDER_WORKER=str(self.worker_id))
        try:
            return subprocess.run(
                argv, capture_output=True, text=True,
                timeout=self.cfg.timeout_s, env=env,
            )
        except subprocess.TimeoutExpired:
            raise TimeoutError(f"{phase} command exceeded {self.cfg.timeout_s}s")
        except FileNotFoundError:
            raise HarnessError(f"{phase} command not found: {argv[0]}")

    def _tuple_file(self, applied: frozenset[str]) -> str:
        fd, path = tempfile.mkstemp(prefix="tuple-", suffix=".txt", text=True)
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            for rule in sorted(applied):
                handle.write(rule + "\n")
        return path

    def run_test(self) -> tuple[bool, tuple[str, ...]]:
        proc = self._run(self.cfg.test_cmd, None, "test")
        if proc.returncode == 0:
            return True, ()
        failed = tuple(
            line.strip() for line in proc.stdout.splitlines() if line.strip()
        )
        return False, failed or ("unnamed-test",)

    def run_tuple(
        self, applied: frozenset[str], stage: str = "tuple",
        tuple_index: Optional[int] = None,
    ) -> RunRecord:
        path = self._tuple_file(applied)
        try:
            try:
                proc = self._run(self.cfg.apply_cmd, path, "apply")
            except TimeoutError as exc:
                self._try_revert(path)
                return _record(stage, applied, False, (), tuple_index, str(exc))
            if proc.returncode != 0:
                # Apply failed: the tuple was never tested.
                self._try_revert(path)
                return _record(
                    stage, applied, False, (), tuple_index,
                    f"apply command exited {proc.returncode}",
                )
            try:
                passed, failed = self.run_test()
            except TimeoutError as exc:
                self._try_revert(path)
                return _record(stage, applied, False, (), tuple_index, str(exc))
            record = _record(stage, applied, not passed, failed, tuple_index)
            revert = self._run(self.cfg.revert_cmd, path, "revert")
            if revert.returncode != 0:
                raise RevertFailure(
                    f"revert command exited {revert.returncode}", record
                )
            return record
        finally:
            try:
                os.unlink(path)
            except OSError:
                pass

    def _try_revert(self, path: str) -> None:
        try:
            self._run(self.cfg.revert_cmd, path, "revert")
        except (TimeoutError, HarnessError):
            pass

    def reset(self, policy: ResetPolicy) -> None:
        if policy.mode == "hard" and self.cfg.recreate_cmd:
            proc = self._run(self.cfg.recreate_cmd, None, "recreate")
            if proc.returncode != 0:
                raise RevertFailure(
                    f"recreate command exited {proc.returncode}"
                )

    def compliance(self, applied: frozenset[str]) -> Optional[frozenset[str]]:
        if not self.cfg.compliance_cmd:
            return None
        path = self._tuple_file(applied)
        try:
            proc = self._run(self.cfg.compliance_cmd, path, "compliance")
            lines = [l.strip() for l in proc.stdout.splitlines() if l.strip()]
            return frozenset(lines)
        finally:
            try:
                os.unlink(path)
            except OSError:
                pass


def make_evaluator(cfg: EvaluatorConfig, worker_id: int = 0):
    if cfg.kind == "simulated":
        return SimulatedEvaluator(cfg.dnf)
    return ExternalEvaluator(cfg, worker_id=worker_id)


# ---------------------------------------------------------------------------
# pipeline stages

def run_baseline(cfg: EvaluatorConfig) -> BaselineReport:
    """Do the tests pass before any rule is applied?"""
    evaluator = make_evaluator(cfg)
    if isinstance(evaluator, SimulatedEvaluator):
        record = evaluator.run_tuple(frozenset(), stage="baseline")
        return BaselineReport(baseline_passed=record.passed, record=record)
    passed, failed = evaluator.run_test()
    record = _record("baseline", frozenset(), not passed, failed, None)
    return BaselineReport(baseline_passed=passed, record=record)


def run_full_guide(cfg: EvaluatorConfig, guide: Guide) -> BaselineReport:
    """Apply every rule and test; a pass short-circuits the whole run."""
    evaluator = make_evaluator(cfg)
    all_rules = frozenset(guide.rules)
    record = evaluator.run_tuple(all_rules, stage="full_guide")
    if record.evaluator_error is not None:
        raise HarnessError(f"full-guide run failed: {record.evaluator_error}")
    noncompliant = evaluator.compliance(all_rules)
    return BaselineReport(
        full_guide_passed=record.passed,
        noncompliant_rules=noncompliant,
        record=record,
    )


def run_revert_check(cfg: EvaluatorConfig, guide: Guide) -> BaselineReport:
    """Do the tests pass again after reverting the full guide?"""
    evaluator = make_evaluator(cfg)
    if isinstance(evaluator, SimulatedEvaluator):
        record = evaluator.run_tuple(frozenset(), stage="revert_check")
        return BaselineReport(revert_ok=record.passed, record=record)
    path = evaluator._tuple_file(frozenset(guide.rules))
    try:
        proc = evaluator._run(cfg.revert_cmd, path, "revert")
        if proc.returncode != 0:
            record = _record(
                "revert_check", frozenset(), True, ("revert-command",), None
            )
            return BaselineReport(revert_ok=False, record=record)
        passed, failed = evaluator.run_test()
        record = _record("revert_check", frozenset(), not passed, failed, None)
        return BaselineReport(revert_ok=passed, record=record)
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass


def _flush_record(handle: IO[str], lock: threading.Lock, rec: RunRecord) -> None:
    doc = {
        "tuple_index": rec.tuple_index,
        "stage": rec.stage,
        "applied": sorted(rec.applied),
        "passed": rec.passed,
        "failed_tests": list(rec.failed_tests),
        "evaluator_error": rec.evaluator_error,
    }
    line = json.dumps(doc, sort_keys=False)
    with lock:
        handle.write(line + "\n")
        handle.flush()


def run_tuples(
    cfg: EvaluatorConfig,
    guide: Guide,
    array: CoveringArray,
    plan: WorkerPlan,
    reset: ResetPolicy = ResetPolicy(),
    jsonl_path: Optional[str | Path] = None,
) -> ResultSet:
    """Evaluate every covering-array row, one record per tuple index.

    Workers process disjoint index slices concurrently; records merge in
    tuple_index order, so the output is independent of worker count and
    completion order.  External commands see their worker's index in
    BREAKFINDER_WORKER and must route to per-worker environments when
    n_workers > 1; one shared system needs a single worker.  With
    jsonl_path set, each finished record is appended immediately, so a
    crash loses at most in-flight tuples.  A worker that can no longer
    trust its environment (failed revert or recreate) stops early; its
    remaining tuples simply have no record.
    """
    if tuple(array.columns) != tuple(guide.rules):
        raise FormatError("array columns do not match guide rules")
    n_rows = len(array.rows)
    if len(plan.assignment) != n_rows:
        raise FormatError("worker plan does not cover the array rows")
    if n_rows == 0:
        warnings.warn("empty covering array: nothing to run")
        return ResultSet(
            guide_id=guide.guide_id,
            records=(),
            strength=array.strength,
            algorithm_tag=array.algorithm_tag,
        )

    applied_sets = [
        frozenset(rule for rule, on in zip(array.columns, row) if on)
        for row in array.rows
    ]
    per_worker: list[list[int]] = [[] for _ in range(plan.n_workers)]
    for idx, worker in enumerate(plan.assignment):
        per_worker[worker].append(idx)

    lock = threading.Lock()
    handle: Optional[IO[str]] = None
    if jsonl_path is not None:
        handle = open(jsonl_path, "w", encoding="utf-8")

    def work(worker: int, indices: list[int]) -> list[RunRecord]:
        evaluator = make_evaluator(cfg, worker_id=worker)
        out: list[RunRecord] = []
        for idx in indices:
            try:
                rec = evaluator.run_tuple(applied_sets[idx], tuple_index=idx)
            except RevertFailure as exc:
                if exc.record is not None:
                    out.append(exc.record)
                    if handle is not None:
                        _flush_record(handle, lock, exc.record)
                break
            out.append(rec)
            if handle is not None:
                _flush_record(handle, lock, rec)
            try:
                evaluator.reset(reset)
            except RevertFailure:
                break
        return out

    try:
        if plan.n_workers == 1:
            chunks = [work(0, per_worker[0])]
        else:
            with ThreadPoolExecutor(max_workers=plan.n_workers) as pool:
                chunks = list(
                    pool.map(work, range(plan.n_workers), per_worker)
                )
    finally:
        if handle is not None:
            handle.close()

    by_index: dict[int, RunRecord] = {}
    for chunk in chunks:
        for rec in chunk:
            if rec.tuple_index in by_index:
                raise FormatError(
                    f"two workers produced tuple index {rec.tuple_index}"
                )
            by_index[rec.tuple_index] = rec
    records = tuple(by_index[i] for i in sorted(by_index))
    return ResultSet(
        guide_id=guide.guide_id,
        records=records,
        strength=array.strength,
        algorithm_tag=array.algorithm_tag,
    )


def untested_indices(results: ResultSet, n_rows: int) -> tuple[int, ...]:
    """Tuple indices with no usable outcome: errored or never run."""
    seen = {r.tuple_index for r in results.records if r.stage == "tuple"}
    errored = {
        r.tuple_index
        for r in results.records
        if r.stage == "tuple" and not r.tested
    }
    missing = set(range(n_rows)) - seen
    return tuple(sorted(errored | missing))
