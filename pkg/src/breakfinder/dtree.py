"""Decision-tree analysis of test results.

A binary classification tree is trained on rule-application features
(Gini impurity, grown to purity), then searched for the non-breaking
leaf reachable with the fewest excluded rules, or the one holding the
biggest non-breaking partition.  Left edges mean "rule not applied" and
carry weight 1; right edges mean "applied" and carry weight 0, so path
cost counts exclusions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import AnalysisError, Guide, ResultSet, Solution

__all__ = [
    "DTreeLeaf",
    "DTreeSplit",
    "DTreeNode",
    "InsufficientDataError",
    "NoNonBreakingLeafError",
    "train_tree",
    "find_solution",
    "export_tree_dot",
]


class InsufficientDataError(AnalysisError):
    """No data to partition: one class only, or too few rows."""


class NoNonBreakingLeafError(AnalysisError):
    """Every tested combination broke; the tree has no passing leaf."""


@dataclass(frozen=True)
class DTreeLeaf:
    breaking: bool
    samples_pass: int
    samples_fail: int


@dataclass(frozen=True)
class DTreeSplit:
    rule: str
    left: "DTreeNode"   # rule not applied
    right: "DTreeNode"  # rule applied


DTreeNode = Union[DTreeLeaf, DTreeSplit]


def _exact_split_score(
    x_col: np.ndarray, y: np.ndarray, n: int, n_fail: int
) -> Optional[tuple[int, int]]:
    """Gini quality of splitting on one boolean column, as an exact
    fraction (numerator, denominator); None when the split is trivial.

    Minimizing weighted child impurity is equivalent to maximizing
    (pass_L^2+fail_L^2)/n_L + (pass_R^2+fail_R^2)/n_R, compared here by
    cross-multiplication to keep ties exact.
    """
    n_r = int(x_col.sum())
    if n_r == 0 or n_r == n:
        return None
    f_r = int((x_col & y).sum())
    n_l = n - n_r
    f_l = n_fail - f_r
    p_r = n_r - f_r
    p_l = n_l - f_l
    num = (p_l * p_l + f_l * f_l) * n_r + (p_r * p_r + f_r * f_r) * n_l
    return num, n_l * n_r


def train_tree(
    results: ResultSet,
    guide: Guide,
    min_split: int = 2,
    max_depth: Optional[int] = None,
) -> DTreeNode:
    """Train a deterministic classification tree on tested records.

    Splits greedily on the rule with the best exact Gini score
    (lexicographically smallest rule id on ties) and grows until every
    node is pure or indivisible, so each training row is reproduced
    exactly unless the data itself is contradictory.
    """
    records = [r for r in results.records if r.tested]
    if not records:
        raise InsufficientDataError("no data to partition: no tested records")
    rules = guide.rules
    index = {rule: j for j, rule in enumerate(rules)}
    x = np.zeros((len(records), len(rules)), dtype=np.int64)
    y = np.zeros(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        for rule in rec.applied:
            if rule not in index:
                raise AnalysisError(f"record applies unknown rule {rule!r}")
            x[i, index[rule]] = 1
        y[i] = 0 if rec.passed else 1

    if len(records) < min_split:
        raise InsufficientDataError(
            f"no data to partition: {len(records)} rows < min_split {min_split}"
        )
    total_fail = int(y.sum())
    if total_fail == 0 or total_fail == len(records):
        raise InsufficientDataError(
            "no data to partition: all rows share one class"
        )

    # Iterative growth; children are created after their parent, so
    # assembling in reverse id order materializes bottom-up.
    entries: list[dict] = []
    stack: list[tuple[int, np.ndarray, int]] = []

    def new_entry(idx: np.ndarray, depth: int) -> int:
        entries.append({})
        node_id = len(entries) - 1
        stack.append((node_id, idx, depth))
        return node_id

    new_entry(np.arange(len(records)), 0)
    while stack:
        node_id, idx, depth = stack.pop()
        rows_y = y[idx]
        n = len(idx)
        n_fail = int(rows_y.sum())
        make_leaf = (
            n_fail == 0
            or n_fail == n
            or n < min_split
            or (max_depth is not None and depth >= max_depth)
        )
        best: Optional[tuple[int, int, int]] = None
        if not make_leaf:
            sub_x = x[idx]
            for j in range(len(rules)):
                score = _exact_split_score(sub_x[:, j], rows_y, n, n_fail)
                if score is None:
                    continue
                if best is None or score[0] * best[1] > best[0] * score[1]:
                    best = (score[0], score[1], j)
            if best is None:
                make_leaf = True
        if make_leaf:
            entries[node_id] = {
                "leaf": DTreeLeaf(
                    breaking=n_fail > 0,
                    samples_pass=n - n_fail,
                    samples_fail=n_fail,
                )
            }
            continue
        j = best[2]
        mask = x[idx, j] == 1
        entries[node_id] = {
            "rule": rules[j],
            "left": new_entry(idx[~mask], depth + 1),
            "right": new_entry(idx[mask], depth + 1),
        }

    nodes: dict[int, DTreeNode] = {}
    for node_id in range(len(entries) - 1, -1, -1):
        e = entries[node_id]
        if "leaf" in e:
            nodes[node_id] = e["leaf"]
        else:
            nodes[node_id] = DTreeSplit(
                rule=e["rule"], left=nodes[e["left"]], right=nodes[e["right"]]
            )
    return nodes[0]


def find_solution(tree: DTreeNode, strategy: str) -> Solution:
    """Search the tree for the best non-breaking leaf.

    shortest_path: fewest excluded rules, i.e. the cheapest leaf under
    the weighted-edge scheme.  max_partition: most passing samples.
    Remaining ties break toward smaller cost, larger partition, then
    lexicographic excluded-rule ids, in strategy-appropriate order.
    """
    if strategy not in ("shortest_path", "max_partition"):
        raise ValueError(f"unknown strategy {strategy!r}")
    # The tree is small, so an exhaustive walk subsumes Dijkstra: path
    # cost accumulates 1 per left ("not applied") edge, 0 per right.
    candidates: list[tuple] = []
    stack: list[tuple[DTreeNode, int, tuple[str, ...]]] = [(tree, 0, ())]
    while stack:
        node, cost, excluded = stack.pop()
        if isinstance(node, DTreeLeaf):
            if not node.breaking:
                if strategy == "shortest_path":
                    key = (cost, -node.samples_pass, excluded)
                else:
                    key = (-node.samples_pass, cost, excluded)
                candidates.append((key, excluded))
            continue
        stack.append((node.left, cost + 1, tuple(sorted(excluded + (node.rule,)))))
        stack.append((node.right, cost, excluded))
    if not candidates:
        raise NoNonBreakingLeafError(
            "every tested combination broke; no non-breaking leaf to reach"
        )
    _, excluded = min(candidates)
    return Solution(
        strategy=f"dtree_{strategy}",
        excluded=frozenset(excluded),
    )


def export_tree_dot(tree: DTreeNode, weights: bool = False) -> str:
    """Graph-description text for the tree, deterministic node order."""
    lines = ["digraph dtree {"]
    counter = [0]

    def emit(node: DTreeNode) -> str:
        name = f"n{counter[0]}"
        counter[0] += 1
        if isinstance(node, DTreeLeaf):
            state = "breaking" if node.breaking else "non-breaking"
            label = f"{state}\\npass={node.samples_pass} fail={node.samples_fail}"
            lines.append(f'  {name} [shape=box, label="{label}"];')
        else:
            lines.append(f'  {name} [label="{node.rule}"];')
            left = emit(node.left)
            right = emit(node.right)
            l_label = "not applied" + (" / 1" if weights else "")
            r_label = "applied" + (" / 0" if weights else "")
            lines.append(f'  {name} -> {left} [label="{l_label}", style=dashed];')
            lines.append(f'  {name} -> {right} [label="{r_label}"];')
        return name

    emit(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"
