"""Covering-array generation by in-parameter-order extension.

Columns are added one at a time.  Horizontal extension assigns the new
column row by row, picking the value that covers the most still-uncovered
t-tuples (ties resolve to false); a row that cannot cover anything new
keeps its don't-care, preserving fill capacity.  Vertical extension then
covers the leftovers by filling don't-care cells of existing rows or
appending new rows.  Don't-cares are frozen to false at the end.

Two horizontal engines:

* exact: per-row counts over every (t-1)-subset of earlier columns.
  Used for t<=3 at any width, and for t=4 and t>=5 on narrow guides.
* scaled: for t=4 on wide guides, per-row counts run over a strided
  sample of column triples; an exact bitset scan then finds everything
  the sampled pass left uncovered and hands it to the vertical stage.
  Same row-count envelope, hundreds of times fewer counting visits.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from typing import Optional

import numpy as np
from numba import njit

from .covering import CoveringArray, _column_bitsets
from .model import Guide

__all__ = ["generate_ipog", "estimate_generation"]

DC = 2  # don't-care cell marker

EXACT_T4_MAX_COLS = 160
SAMPLE_BUDGET_DEFAULT = 150_000
# Wide-guide bounds for t>=5: subset bookkeeping and visit counts blow up
# combinatorially, so generation refuses instead of thrashing for hours.
GENERIC_MAX_SUBSETS = 20_000_000
GENERIC_MAX_VISITS = 12_000_000_000


# ---------------------------------------------------------------------------
# Horizontal-extension kernels (exact)
# ---------------------------------------------------------------------------
# cov holds one word per (t-1)-subset of the columns left of `col`, in
# colex order: rank(c1<..<cs) = sum_j C(c_j, j).  Bit layout inside a
# word: pattern index p (first subset column = most significant bit)
# and candidate value v map to bit p*2+v.

@njit(cache=True)
def _hx_exact_s1(arr, n_rows, col, cov):
    for r in range(n_rows):
        cnt0 = 0
        cnt1 = 0
        for a in range(col):
            va = arr[r, a]
            if va == 2:
                continue
            bits = cov[a]
            base = va << 1
            cnt0 += ((bits >> base) & 1) ^ 1
            cnt1 += ((bits >> (base + 1)) & 1) ^ 1
        if cnt0 == 0 and cnt1 == 0:
            continue
        v = 0 if cnt0 >= cnt1 else 1
        arr[r, col] = v
        for a in range(col):
            va = arr[r, a]
            if va == 2:
                continue
            cov[a] = cov[a] | np.uint16(1 << ((va << 1) + v))


@njit(cache=True)
def _hx_exact_s2(arr, n_rows, col, cov):
    for r in range(n_rows):
        cnt0 = 0
        cnt1 = 0
        idx = 0
        for b in range(1, col):
            vb = arr[r, b]
            if vb == 2:
                idx += b
                continue
            vb2 = vb << 1
            for a in range(b):
                va = arr[r, a]
                if va != 2:
                    bits = cov[idx]
                    base = (va << 2) + vb2
                    cnt0 += ((bits >> base) & 1) ^ 1
                    cnt1 += ((bits >> (base + 1)) & 1) ^ 1
                idx += 1
        if cnt0 == 0 and cnt1 == 0:
            continue
        v = 0 if cnt0 >= cnt1 else 1
        arr[r, col] = v
        idx = 0
        for b in range(1, col):
            vb = arr[r, b]
            if vb == 2:
                idx += b
                continue
            vb2 = vb << 1
            for a in range(b):
                va = arr[r, a]
                if va != 2:
                    cov[idx] = cov[idx] | np.uint16(1 << ((va << 2) + vb2 + v))
                idx += 1
        # fall through to next row


@njit(cache=True)
def _hx_exact_s3(arr, n_rows, col, cov):
    for r in range(n_rows):
        cnt0 = 0
        cnt1 = 0
        idx = 0
        for c in range(2, col):
            vc = arr[r, c]
            if vc == 2:
                idx += (c * (c - 1)) >> 1
                continue
            vc2 = vc << 1
            for b in range(1, c):
                vb = arr[r, b]
                if vb == 2:
                    idx += b
                    continue
                part = (vb << 2) + vc2
                for a in range(b):
                    va = arr[r, a]
                    if va != 2:
                        bits = cov[idx]
                        base = (va << 3) + part
                        cnt0 += ((bits >> base) & 1) ^ 1
                        cnt1 += ((bits >> (base + 1)) & 1) ^ 1
                    idx += 1
        if cnt0 == 0 and cnt1 == 0:
            continue
        v = 0 if cnt0 >= cnt1 else 1
        arr[r, col] = v
        idx = 0
        for c in range(2, col):
            vc = arr[r, c]
            if vc == 2:
                idx += (c * (c - 1)) >> 1
                continue
            vc2 = vc << 1
            for b in range(1, c):
                vb = arr[r, b]
                if vb == 2:
                    idx += b
                    continue
                part = (vb << 2) + vc2
                for a in range(b):
                    va = arr[r, a]
                    if va != 2:
                        cov[idx] = cov[idx] | np.uint16(1 << ((va << 3) + part + v))
                    idx += 1


@njit(cache=True)
def _hx_exact_generic(arr, n_rows, col, cov, s):
    # Subsets enumerated in colex order to match the shared unranker.
    sub = np.empty(8, dtype=np.int64)
    for r in range(n_rows):
        cnt0 = 0
        cnt1 = 0
        for j in range(s):
            sub[j] = j
        idx = 0
        while True:
            pat = 0
            ok = True
            for j in range(s):
                vj = arr[r, sub[j]]
                if vj == 2:
                    ok = False
                    break
                pat = (pat << 1) | vj
            if ok:
                bits = cov[idx]
                base = pat << 1
                cnt0 += ((bits >> base) & 1) ^ 1
                cnt1 += ((bits >> (base + 1)) & 1) ^ 1
            idx += 1
            j = 0
            while j < s - 1 and sub[j] + 1 == sub[j + 1]:
                j += 1
            nxt = sub[j + 1] if j < s - 1 else col
            if sub[j] + 1 >= nxt:
                break
            sub[j] += 1
            for k in range(j):
                sub[k] = k
        if cnt0 == 0 and cnt1 == 0:
            continue
        v = 0 if cnt0 >= cnt1 else 1
        arr[r, col] = v
        for j in range(s):
            sub[j] = j
        idx = 0
        while True:
            pat = 0
            ok = True
            for j in range(s):
                vj = arr[r, sub[j]]
                if vj == 2:
                    ok = False
                    break
                pat = (pat << 1) | vj
            if ok:
                cov[idx] = cov[idx] | (1 << ((pat << 1) + v))
            idx += 1
            j = 0
            while j < s - 1 and sub[j] + 1 == sub[j + 1]:
                j += 1
            nxt = sub[j + 1] if j < s - 1 else col
            if sub[j] + 1 >= nxt:
                break
            sub[j] += 1
            for k in range(j):
                sub[k] = k


# ---------------------------------------------------------------------------
# Scaled t=4 engine: strided sampled counting + exact bitset scan
# ---------------------------------------------------------------------------

@njit(cache=True)
def _hx_sampled_s3(arr, n_rows, col, cov, stride, offset, n_samples):
    """Greedy value choice counting only every stride-th triple.

    All rows share one sample (cov indexed by sample ordinal), so marks
    made for earlier rows inform later rows exactly on the sample.
    """
    for r in range(n_rows):
        cnt0 = 0
        cnt1 = 0
        # Walk colex ranks offset, offset+stride, ... incrementally.
        a = offset
        b = 1
        c = 2
        while a >= b:
            a -= b
            b += 1
            if b >= c:
                c += 1
                b = 1
        for k in range(n_samples):
            va = arr[r, a]
            vb = arr[r, b]
            vc = arr[r, c]
            if va != 2 and vb != 2 and vc != 2:
                bits = cov[k]
                base = (va << 3) + (vb << 2) + (vc << 1)
                cnt0 += ((bits >> base) & 1) ^ 1
                cnt1 += ((bits >> (base + 1)) & 1) ^ 1
            a += stride
            while a >= b:
                a -= b
                b += 1
                if b >= c:
                    c += 1
                    b = 1
        if cnt0 == 0 and cnt1 == 0:
            continue
        v = 0 if cnt0 >= cnt1 else 1
        arr[r, col] = v
        a = offset
        b = 1
        c = 2
        while a >= b:
            a -= b
            b += 1
            if b >= c:
                c += 1
                b = 1
        for k in range(n_samples):
            va = arr[r, a]
            vb = arr[r, b]
            vc = arr[r, c]
            if va != 2 and vb != 2 and vc != 2:
                base = (va << 3) + (vb << 2) + (vc << 1)
                cov[k] = cov[k] | np.uint16(1 << (base + v))
            a += stride
            while a >= b:
                a -= b
                b += 1
                if b >= c:
                    c += 1
                    b = 1


@njit(cache=True)
def _scan_uncovered_s3(bits, n_words, col, out, cap):
    """Exact scan: which (triple, pattern, new-column value) are uncovered.

    bits is the per-column row bitset pair (don't-cares in neither set).
    Emits rows (a, b, c, pattern, v) into out; returns the total count,
    which may exceed cap (extra entries are counted, not stored).
    """
    n_out = 0
    ncol0 = bits[0, col]
    ncol1 = bits[1, col]
    for c in range(2, col):
        cc0 = bits[0, c]
        cc1 = bits[1, c]
        for b in range(1, c):
            bb0 = bits[0, b]
            bb1 = bits[1, b]
            for a in range(b):
                aa0 = bits[0, a]
                aa1 = bits[1, a]
                found0 = 0
                found1 = 0
                for w in range(n_words):
                    a0 = aa0[w]
                    a1 = aa1[w]
                    b0 = bb0[w]
                    b1 = bb1[w]
                    c0 = cc0[w]
                    c1 = cc1[w]
                    n0 = ncol0[w]
                    n1 = ncol1[w]
                    ab00 = a0 & b0
                    ab01 = a0 & b1
                    ab10 = a1 & b0
                    ab11 = a1 & b1
                    p0 = ab00 & c0
                    p1 = ab00 & c1
                    p2 = ab01 & c0
                    p3 = ab01 & c1
                    p4 = ab10 & c0
                    p5 = ab10 & c1
                    p6 = ab11 & c0
                    p7 = ab11 & c1
                    if (p0 & n0) != 0:
                        found0 |= 1
                    if (p1 & n0) != 0:
                        found0 |= 2
                    if (p2 & n0) != 0:
                        found0 |= 4
                    if (p3 & n0) != 0:
                        found0 |= 8
                    if (p4 & n0) != 0:
                        found0 |= 16
                    if (p5 & n0) != 0:
                        found0 |= 32
                    if (p6 & n0) != 0:
                        found0 |= 64
                    if (p7 & n0) != 0:
                        found0 |= 128
                    if (p0 & n1) != 0:
                        found1 |= 1
                    if (p1 & n1) != 0:
                        found1 |= 2
                    if (p2 & n1) != 0:
                        found1 |= 4
                    if (p3 & n1) != 0:
                        found1 |= 8
                    if (p4 & n1) != 0:
                        found1 |= 16
                    if (p5 & n1) != 0:
                        found1 |= 32
                    if (p6 & n1) != 0:
                        found1 |= 64
                    if (p7 & n1) != 0:
                        found1 |= 128
                    if found0 == 255 and found1 == 255:
                        break
                if found0 != 255 or found1 != 255:
                    for p in range(8):
                        if ((found0 >> p) & 1) == 0:
                            if n_out < cap:
                                out[n_out, 0] = a
                                out[n_out, 1] = b
                                out[n_out, 2] = c
                                out[n_out, 3] = p
                                out[n_out, 4] = 0
                            n_out += 1
                        if ((found1 >> p) & 1) == 0:
                            if n_out < cap:
                                out[n_out, 0] = a
                                out[n_out, 1] = b
                                out[n_out, 2] = c
                                out[n_out, 3] = p
                                out[n_out, 4] = 1
                            n_out += 1
    return n_out


# ---------------------------------------------------------------------------
# Shared driver pieces
# ---------------------------------------------------------------------------

def _comb_table(n: int, k: int) -> list[int]:
    return [math.comb(i, k) for i in range(n + 1)]


def _unrank_colex(rank: int, s: int, tables: list[list[int]]) -> tuple[int, ...]:
    """Colex rank -> ascending column tuple; tables[j] = C(i, j)."""
    cols = [0] * s
    r = rank
    for j in range(s, 0, -1):
        m = bisect_right(tables[j], r) - 1
        cols[j - 1] = m
        r -= tables[j][m]
    return tuple(cols)


def _full_mask(s: int) -> int:
    n_bits = (1 << s) * 2
    return -1 if n_bits == 64 else (1 << n_bits) - 1


def _collect_from_cov(
    cov: np.ndarray, s: int, tables: list[list[int]]
) -> list[tuple[tuple[int, ...], int, int]]:
    """Uncovered (subset columns, pattern, value) triples from a full
    coverage table, in (rank, pattern, value) order."""
    full = _full_mask(s)
    bad = np.nonzero(cov != cov.dtype.type(full))[0]
    out: list[tuple[tuple[int, ...], int, int]] = []
    n_pat = 1 << s
    for k in bad:
        cols = _unrank_colex(int(k), s, tables)
        bits = int(cov[k])
        for p in range(n_pat):
            for v in (0, 1):
                if (bits >> (p * 2 + v)) & 1 == 0:
                    out.append((cols, p, v))
    return out


def _grow_rows(arr: np.ndarray, need: int) -> np.ndarray:
    if need <= arr.shape[0]:
        return arr
    new_cap = max(need, arr.shape[0] * 2)
    new = np.full((new_cap, arr.shape[1]), DC, dtype=np.int8)
    new[: arr.shape[0]] = arr
    return new


def _vertical(
    arr: np.ndarray,
    n_rows: int,
    col: int,
    uncovered: list[tuple[tuple[int, ...], int, int]],
) -> tuple[np.ndarray, int]:
    """Cover leftovers: reuse a compatible row's don't-cares, else append.

    Fills and appends only ever add coverage, so tuples already handled
    by an earlier fill are detected by the exact-match test and skipped.
    """
    s = 0 if not uncovered else len(uncovered[0][0])
    for cols, pat, v in uncovered:
        tcols = np.empty(s + 1, dtype=np.int64)
        tvals = np.empty(s + 1, dtype=np.int8)
        for j in range(s):
            tcols[j] = cols[j]
            tvals[j] = (pat >> (s - 1 - j)) & 1
        tcols[s] = col
        tvals[s] = v
        view = arr[:n_rows][:, tcols]
        spec_eq = view == tvals
        if spec_eq.all(axis=1).any():
            continue
        fill_ok = (spec_eq | (view == DC)).all(axis=1)
        hits = np.nonzero(fill_ok)[0]
        if hits.size:
            arr[hits[0], tcols] = tvals
        else:
            arr = _grow_rows(arr, n_rows + 1)
            arr[n_rows, tcols] = tvals
            n_rows += 1
    return arr, n_rows


def _choose_mode(n: int, t: int) -> str:
    if t <= 3:
        return "exact"
    if t == 4:
        return "exact" if n <= EXACT_T4_MAX_COLS else "scaled"
    return "generic"


def _rows_guess(n: int, t: int) -> int:
    return (1 << t) * max(1, int(math.log2(max(n, 2))))


def estimate_generation(n: int, t: int) -> dict:
    """Coarse pre-flight estimate used by the CLI's force gate."""
    mode = _choose_mode(n, t)
    rows = _rows_guess(n, t)
    visits = rows * 2 * math.comb(n, t)
    if mode == "scaled":
        visits = rows * 2 * SAMPLE_BUDGET_DEFAULT * n + math.comb(n, t) * 2
    return {
        "mode": mode,
        "rows_guess": rows,
        "visits_guess": visits,
        "seconds_guess": max(1, visits // 500_000_000),
    }


def generate_ipog(
    guide: Guide,
    strength: int,
    seed: int = 0,
    mode: Optional[str] = None,
    sample_budget: int = SAMPLE_BUDGET_DEFAULT,
) -> CoveringArray:
    """Generate a strength-t covering array over the guide's rules.

    Deterministic for fixed (guide, strength, seed).  mode overrides the
    automatic exact/scaled/generic engine choice (testing hook).
    """
    t = int(strength)
    if not 2 <= t <= 6:
        raise ValueError(f"strength must be in [2, 6], got {t}")
    n = len(guide.rules)
    if t > n:
        raise ValueError(f"strength {t} exceeds number of rules {n}")
    if mode is None:
        mode = _choose_mode(n, t)
    if mode not in ("exact", "scaled", "generic"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "generic":
        s = t - 1
        if math.comb(n - 1, s) > GENERIC_MAX_SUBSETS or (
            _rows_guess(n, t) * 2 * math.comb(n, t) > GENERIC_MAX_VISITS
        ):
            raise ValueError(
                f"strength {t} at {n} rules exceeds the exact-engine resource "
                f"bound; reduce the rule count or the strength"
            )
    if mode == "scaled" and t != 4:
        raise ValueError("scaled mode applies to strength 4 only")
    if sample_budget < 1000:
        raise ValueError("sample_budget must be >= 1000")

    s = t - 1
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), n, t]))
    tables = [_comb_table(n, j) for j in range(s + 1)]

    arr = np.full(((1 << t) + 256, n), DC, dtype=np.int8)
    n_rows = 1 << t
    for p in range(n_rows):
        for j in range(t):
            arr[p, j] = (p >> (t - 1 - j)) & 1

    if mode == "exact":
        cov_buf = np.zeros(math.comb(n - 1, s), dtype=np.uint16)
    elif mode == "scaled":
        cov_buf = np.zeros(sample_budget + 8, dtype=np.uint16)
    else:
        cov_buf = np.zeros(math.comb(n - 1, s), dtype=np.int64)
    scan_out = np.zeros((1 << 18, 5), dtype=np.int32) if mode == "scaled" else None

    for col in range(t, n):
        n_sub = math.comb(col, s)
        if mode == "exact" or (mode == "scaled" and n_sub <= sample_budget):
            cov = cov_buf[:n_sub]
            cov[:] = 0
            if t == 2:
                _hx_exact_s1(arr, n_rows, col, cov)
            elif t == 3:
                _hx_exact_s2(arr, n_rows, col, cov)
            else:
                _hx_exact_s3(arr, n_rows, col, cov)
            uncovered = _collect_from_cov(cov, s, tables)
        elif mode == "scaled":
            stride = -(-n_sub // sample_budget)
            offset = int(rng.integers(0, stride))
            n_samples = ((n_sub - 1 - offset) // stride) + 1
            cov = cov_buf[:n_samples]
            cov[:] = 0
            _hx_sampled_s3(arr, n_rows, col, cov, stride, offset, n_samples)
            bits, n_words = _column_bitsets(arr[:n_rows, : col + 1])
            while True:
                count = _scan_uncovered_s3(bits, n_words, col, scan_out, scan_out.shape[0])
                if count <= scan_out.shape[0]:
                    break
                scan_out = np.zeros((count + 1024, 5), dtype=np.int32)
            uncovered = [
                (
                    (int(scan_out[i, 0]), int(scan_out[i, 1]), int(scan_out[i, 2])),
                    int(scan_out[i, 3]),
                    int(scan_out[i, 4]),
                )
                for i in range(count)
            ]
        else:  # generic
            cov = cov_buf[:n_sub]
            cov[:] = 0
            _hx_exact_generic(arr, n_rows, col, cov, s)
            uncovered = _collect_from_cov(cov, s, tables)
        arr, n_rows = _vertical(arr, n_rows, col, uncovered)

    final = arr[:n_rows].copy()
    final[final == DC] = 0
    seen: set[bytes] = set()
    rows: list[tuple[bool, ...]] = []
    for r in range(n_rows):
        key = final[r].tobytes()
        if key in seen:
            continue
        seen.add(key)
        rows.append(tuple(bool(v) for v in final[r]))
    return CoveringArray(
        guide_id=guide.guide_id,
        strength=t,
        algorithm_tag="ipog",
        columns=tuple(guide.rules),
        rows=tuple(rows),
    )
