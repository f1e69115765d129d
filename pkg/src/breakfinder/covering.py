"""Strength-t covering arrays over boolean rule parameters.

Array value type, canonical JSON storage, coverage verification
(exhaustive or sampled, bitset kernels), and ACTS text interop.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .model import FormatError, Guide, RuleTuple

__all__ = [
    "CoveringArray",
    "CoverageReport",
    "verify_coverage",
    "load_array",
    "save_array",
    "export_acts_input",
    "import_acts_export",
]

MIN_STRENGTH = 2
MAX_STRENGTH = 6

# Stored missing-combination examples are capped; totals stay exact.
MISSING_REPORT_CAP = 1000


def _check_strength(t: int) -> int:
    if not MIN_STRENGTH <= int(t) <= MAX_STRENGTH:
        raise ValueError(f"strength must be in [{MIN_STRENGTH}, {MAX_STRENGTH}], got {t}")
    return int(t)


@dataclass(frozen=True)
class CoveringArray:
    """Boolean selection matrix; rows are the tuples to test.

    Column order is the guide's rule order.  Rows must be unique; full
    t-way coverage is a claim checked by verify_coverage, not a
    construction invariant.
    """

    guide_id: str
    strength: int
    algorithm_tag: str
    columns: tuple[str, ...]
    rows: tuple[tuple[bool, ...], ...]

    def __post_init__(self) -> None:
        _check_strength(self.strength)
        object.__setattr__(self, "columns", tuple(str(c) for c in self.columns))
        rows = tuple(tuple(bool(v) for v in row) for row in self.rows)
        n = len(self.columns)
        for i, row in enumerate(rows):
            if len(row) != n:
                raise FormatError(f"row {i} has length {len(row)}, expected {n}")
        seen: set[tuple[bool, ...]] = set()
        for i, row in enumerate(rows):
            if row in seen:
                raise FormatError(f"duplicate row at index {i}")
            seen.add(row)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        """Rows as a uint8 matrix (n_rows x n_columns)."""
        if not self.rows:
            return np.zeros((0, len(self.columns)), dtype=np.uint8)
        return np.array(self.rows, dtype=np.uint8)

    def to_tuples(self) -> list[RuleTuple]:
        return [RuleTuple(index=i, selection=row) for i, row in enumerate(self.rows)]


def save_array(array: CoveringArray, path: str | Path) -> None:
    doc = {
        "guide_id": array.guide_id,
        "strength": array.strength,
        "algorithm_tag": array.algorithm_tag,
        "columns": list(array.columns),
        "rows": [[bool(v) for v in row] for row in array.rows],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_array(path: str | Path) -> CoveringArray:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    for key in ("guide_id", "strength", "algorithm_tag", "columns", "rows"):
        if not isinstance(doc, dict) or key not in doc:
            raise FormatError(f"{path}: missing field {key!r}")
    rows = doc["rows"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise FormatError(f"{path}: rows must be a list of boolean lists")
    return CoveringArray(
        guide_id=str(doc["guide_id"]),
        strength=int(doc["strength"]),
        algorithm_tag=str(doc["algorithm_tag"]),
        columns=tuple(str(c) for c in doc["columns"]),
        rows=tuple(tuple(bool(v) for v in r) for r in rows),
    )


# ---------------------------------------------------------------------------
# Coverage verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    covered: bool
    mode: str
    strength: int
    checked_subsets: int
    missing_total: int
    # Example gaps, capped at MISSING_REPORT_CAP entries.
    missing: tuple[tuple[tuple[str, ...], tuple[bool, ...]], ...]


def _column_bitsets(matrix: np.ndarray) -> tuple[np.ndarray, int]:
    """bits[v, col, word]: set bit r when row r has value v in col.

    Cells outside {0, 1} (don't-care markers) land in neither bitset.
    """
    n_rows, n_cols = matrix.shape
    n_words = max(1, -(-n_rows // 64))
    bits = np.zeros((2, n_cols, n_words), dtype=np.uint64)
    for w in range(n_words):
        chunk = matrix[w * 64 : (w + 1) * 64]
        if chunk.shape[0] == 0:
            break
        weights = np.left_shift(
            np.uint64(1), np.arange(chunk.shape[0], dtype=np.uint64)
        )
        for v in (0, 1):
            sel = (chunk == v).astype(np.uint64)
            bits[v, :, w] = (sel * weights[:, None]).sum(axis=0)
    return bits, n_words


@njit(cache=True)
def _check_subsets(bits, n_words, subsets, t, miss_cols, miss_pat, cap):
    """Check pattern completeness for each listed column subset.

    Returns (n_missing_total, n_stored).  Patterns index with the first
    (lowest) column as the most significant bit.
    """
    n_pat = 1 << t
    # All-patterns-found mask; n_pat=64 wraps to -1 in two's complement.
    want = -1 if n_pat == 64 else (1 << n_pat) - 1
    prod = np.empty(64, dtype=np.uint64)
    n_missing = 0
    n_stored = 0
    for s in range(subsets.shape[0]):
        found = 0
        for w in range(n_words):
            prod[0] = bits[0, subsets[s, 0], w]
            prod[1] = bits[1, subsets[s, 0], w]
            m = 2
            for j in range(1, t):
                c = subsets[s, j]
                for p in range(m - 1, -1, -1):
                    v = prod[p]
                    prod[2 * p] = v & bits[0, c, w]
                    prod[2 * p + 1] = v & bits[1, c, w]
                m *= 2
            for p in range(n_pat):
                if prod[p] != np.uint64(0):
                    found |= 1 << p
            if found == want:
                break
        if found != want:
            for p in range(n_pat):
                if (found >> p) & 1 == 0:
                    n_missing += 1
                    if n_stored < cap:
                        for j in range(t):
                            miss_cols[n_stored, j] = subsets[s, j]
                        miss_pat[n_stored] = p
                        n_stored += 1
    return n_missing, n_stored


@njit(cache=True)
def _check_all_subsets(bits, n_words, n_cols, t, miss_cols, miss_pat, cap):
    """Exhaustive variant of _check_subsets over every t-subset."""
    n_pat = 1 << t
    want = -1 if n_pat == 64 else (1 << n_pat) - 1
    prod = np.empty(64, dtype=np.uint64)
    sub = np.empty(8, dtype=np.int64)
    for j in range(t):
        sub[j] = j
    n_missing = 0
    n_stored = 0
    n_checked = 0
    while True:
        found = 0
        for w in range(n_words):
            prod[0] = bits[0, sub[0], w]
            prod[1] = bits[1, sub[0], w]
            m = 2
            for j in range(1, t):
                c = sub[j]
                for p in range(m - 1, -1, -1):
                    v = prod[p]
                    prod[2 * p] = v & bits[0, c, w]
                    prod[2 * p + 1] = v & bits[1, c, w]
                m *= 2
            for p in range(n_pat):
                if prod[p] != np.uint64(0):
                    found |= 1 << p
            if found == want:
                break
        if found != want:
            for p in range(n_pat):
                if (found >> p) & 1 == 0:
                    n_missing += 1
                    if n_stored < cap:
                        for j in range(t):
                            miss_cols[n_stored, j] = sub[j]
                        miss_pat[n_stored] = p
                        n_stored += 1
        n_checked += 1
        j = t - 1
        while j >= 0 and sub[j] == n_cols - t + j:
            j -= 1
        if j < 0:
            break
        sub[j] += 1
        for k in range(j + 1, t):
            sub[k] = sub[k - 1] + 1
    return n_missing, n_stored, n_checked


def _sample_subsets(n_cols: int, t: int, k: int, seed: int) -> np.ndarray:
    """k uniform random t-subsets (sorted rows), by rejection sampling."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, n_cols, t]))
    out = np.empty((k, t), dtype=np.int64)
    filled = 0
    while filled < k:
        need = k - filled
        draw = rng.integers(0, n_cols, size=(need, t))
        draw.sort(axis=1)
        ok = np.ones(need, dtype=bool)
        for j in range(t - 1):
            ok &= draw[:, j] != draw[:, j + 1]
        good = draw[ok]
        out[filled : filled + len(good)] = good
        filled += len(good)
    return out


def _pattern_to_values(p: int, t: int) -> tuple[bool, ...]:
    return tuple(bool((p >> (t - 1 - j)) & 1) for j in range(t))


def verify_coverage(
    array: CoveringArray,
    mode: str = "exhaustive",
    k_samples: int = 10000,
    seed: int = 0,
) -> CoverageReport:
    """Check t-way coverage of an array.

    exhaustive mode enumerates every t-subset of columns; sampled mode
    checks k_samples random subsets.  The missing list carries up to
    MISSING_REPORT_CAP example gaps; missing_total is exact for the
    subsets checked.
    """
    if mode not in ("exhaustive", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    t = array.strength
    n_cols = len(array.columns)
    if n_cols < t:
        return CoverageReport(True, mode, t, 0, 0, ())
    matrix = array.matrix()
    bits, n_words = _column_bitsets(matrix)
    miss_cols = np.zeros((MISSING_REPORT_CAP, t), dtype=np.int64)
    miss_pat = np.zeros(MISSING_REPORT_CAP, dtype=np.int64)
    if mode == "exhaustive":
        n_missing, n_stored, n_checked = _check_all_subsets(
            bits, n_words, n_cols, t, miss_cols, miss_pat, MISSING_REPORT_CAP
        )
    else:
        if k_samples < 1:
            raise ValueError("k_samples must be >= 1")
        subsets = _sample_subsets(n_cols, t, int(k_samples), int(seed))
        n_missing, n_stored = _check_subsets(
            bits, n_words, subsets, t, miss_cols, miss_pat, MISSING_REPORT_CAP
        )
        n_checked = int(k_samples)
    missing = tuple(
        (
            tuple(array.columns[c] for c in miss_cols[i, :t]),
            _pattern_to_values(int(miss_pat[i]), t),
        )
        for i in range(n_stored)
    )
    return CoverageReport(
        covered=(n_missing == 0),
        mode=mode,
        strength=t,
        checked_subsets=int(n_checked),
        missing_total=int(n_missing),
        missing=missing,
    )


# ---------------------------------------------------------------------------
# ACTS interop
# ---------------------------------------------------------------------------

def export_acts_input(guide: Guide) -> str:
    """Parameter declarations for an external pairwise/t-way generator.

    One boolean parameter per rule, preceded by the system-name header.
    """
    lines = ["[System]", f"Name: {guide.guide_id}", "", "[Parameter]"]
    for rule in guide.rules:
        lines.append(f"{rule} (boolean) : true, false")
    return "\n".join(lines) + "\n"


_TRUE_TOKENS = {"true", "1"}
_FALSE_TOKENS = {"false", "0"}


def _split_tokens(line: str) -> list[str]:
    if "," in line:
        return [tok.strip() for tok in line.split(",")]
    return line.split()


def import_acts_export(path: str | Path, guide: Guide, strength: int) -> CoveringArray:
    """Parse an ACTS-style export: a header line naming the parameters,
    then one configuration per line.

    Tolerates comment lines (# or //), blank lines, and decoration lines
    (anything containing no value tokens before the header).  Values
    accepted: true/false in any case, 0/1.  Coverage is not assumed;
    callers should verify.
    """
    _check_strength(strength)
    text = Path(path).read_text(encoding="utf-8")
    content: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("//"):
            continue
        content.append(line)
    known = set(guide.rules)
    header: list[str] = []
    header_at = -1
    for i, line in enumerate(content):
        tokens = _split_tokens(line)
        if tokens and all(tok in known for tok in tokens):
            header = tokens
            header_at = i
            break
    if header_at < 0:
        raise FormatError(f"{path}: no parameter header found")
    if len(set(header)) != len(header):
        raise FormatError(f"{path}: duplicate parameter in header")
    content = content[header_at:]
    missing = [r for r in guide.rules if r not in set(header)]
    if missing:
        raise FormatError(
            f"{path}: file does not declare guide rules {missing[:5]}"
            + ("..." if len(missing) > 5 else "")
        )
    # Column j of the file feeds guide position col_map[j].
    position = {rule: i for i, rule in enumerate(guide.rules)}
    col_map = [position[name] for name in header]
    rows: list[tuple[bool, ...]] = []
    for line_no, line in enumerate(content[1:], start=2):
        tokens = _split_tokens(line)
        if len(tokens) != len(header):
            raise FormatError(
                f"{path}: line {line_no}: expected {len(header)} values, got {len(tokens)}"
            )
        row = [False] * len(guide.rules)
        for j, tok in enumerate(tokens):
            low = tok.lower()
            if low in _TRUE_TOKENS:
                row[col_map[j]] = True
            elif low in _FALSE_TOKENS:
                row[col_map[j]] = False
            else:
                raise FormatError(f"{path}: line {line_no}: unparsable value {tok!r}")
        rows.append(tuple(row))
    return CoveringArray(
        guide_id=guide.guide_id,
        strength=strength,
        algorithm_tag="imported-acts",
        columns=tuple(guide.rules),
        rows=tuple(rows),
    )
