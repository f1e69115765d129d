"""Decision-tree training, leaf search, and dot export."""
import itertools

import pytest

from breakfinder.dtree import (
    DTreeLeaf,
    DTreeSplit,
    InsufficientDataError,
    NoNonBreakingLeafError,
    export_tree_dot,
    find_solution,
    train_tree,
)
from breakfinder.model import Guide, ResultSet, RunRecord
from breakfinder.oracle import BreakingSetDNF, is_breaking


def results_from(guide, rows, broken_fn):
    records = []
    for i, row in enumerate(rows):
        applied = frozenset(r for r, v in zip(guide.rules, row) if v)
        broken = broken_fn(applied)
        records.append(
            RunRecord(
                stage="tuple",
                applied=applied,
                passed=not broken,
                failed_tests=("t",) if broken else (),
                tuple_index=i,
            )
        )
    return ResultSet(guide_id=guide.guide_id, records=tuple(records))


def full_factorial(n):
    return list(itertools.product((False, True), repeat=n))


def dnf_results(guide, dnf):
    return results_from(
        guide, full_factorial(len(guide.rules)),
        lambda applied: is_breaking(dnf, applied),
    )


class TestTrainTree:
    def test_singleton_root_split(self):
        guide = Guide(guide_id="g", rules=("A", "B", "C"))
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"B"}),))
        tree = train_tree(dnf_results(guide, dnf), guide)
        assert isinstance(tree, DTreeSplit)
        assert tree.rule == "B"
        assert isinstance(tree.left, DTreeLeaf) and not tree.left.breaking
        assert isinstance(tree.right, DTreeLeaf) and tree.right.breaking
        assert tree.left.samples_pass == 4
        assert tree.right.samples_fail == 4

    def test_pair_clause_tree_shape(self):
        # Breaking iff both A and B applied: root on one rule, the
        # applied branch splits on the other.
        guide = Guide(guide_id="g", rules=("A", "B"))
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"A", "B"}),))
        tree = train_tree(dnf_results(guide, dnf), guide)
        assert isinstance(tree, DTreeSplit) and tree.rule == "A"
        assert isinstance(tree.left, DTreeLeaf) and not tree.left.breaking
        inner = tree.right
        assert isinstance(inner, DTreeSplit) and inner.rule == "B"
        assert not inner.left.breaking
        assert inner.right.breaking

    def test_reproduces_training_rows(self):
        # Grown to purity, the tree classifies every training row right.
        guide = Guide(guide_id="g", rules=("A", "B", "C", "D"))
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"A", "C"}), frozenset({"D"})),
        )
        results = dnf_results(guide, dnf)
        tree = train_tree(results, guide)

        def classify(node, applied):
            while isinstance(node, DTreeSplit):
                node = node.right if node.rule in applied else node.left
            return node.breaking

        for rec in results.tuple_records():
            assert classify(tree, rec.applied) == (not rec.passed)

    def test_no_records_rejected(self):
        guide = Guide(guide_id="g", rules=("A",))
        rs = ResultSet(guide_id="g", records=())
        with pytest.raises(InsufficientDataError):
            train_tree(rs, guide)

    def test_single_class_rejected(self):
        guide = Guide(guide_id="g", rules=("A", "B"))
        rs = results_from(guide, full_factorial(2), lambda applied: False)
        with pytest.raises(InsufficientDataError):
            train_tree(rs, guide)


class TestFindSolution:
    def _asymmetric_tree(self):
        # Breaking iff A applied and B not applied.  Non-breaking leaves:
        # exclude A (2 passing rows) or keep everything (1 passing row,
        # zero exclusions).  The strategies pick different leaves.
        guide = Guide(guide_id="g", rules=("A", "B"))
        rs = results_from(
            guide, full_factorial(2),
            lambda applied: "A" in applied and "B" not in applied,
        )
        return train_tree(rs, guide)

    def test_shortest_path_prefers_fewer_exclusions(self):
        sol = find_solution(self._asymmetric_tree(), "shortest_path")
        assert sol.excluded == frozenset()
        assert sol.strategy == "dtree_shortest_path"

    def test_max_partition_prefers_bigger_leaf(self):
        sol = find_solution(self._asymmetric_tree(), "max_partition")
        assert sol.excluded == frozenset({"A"})
        assert sol.strategy == "dtree_max_partition"

    def test_both_find_singleton(self):
        guide = Guide(guide_id="g", rules=("A", "B", "C"))
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"B"}),))
        tree = train_tree(dnf_results(guide, dnf), guide)
        for strategy in ("shortest_path", "max_partition"):
            assert find_solution(tree, strategy).excluded == frozenset({"B"})

    def test_no_non_breaking_leaf(self):
        guide = Guide(guide_id="g", rules=("A", "B"))
        rs = results_from(
            guide, [(False, True), (True, False)], lambda applied: True
        )
        with pytest.raises((NoNonBreakingLeafError, InsufficientDataError)):
            find_solution(train_tree(rs, guide), "shortest_path")

    def test_unknown_strategy(self):
        tree = DTreeLeaf(breaking=False, samples_pass=1, samples_fail=0)
        with pytest.raises(ValueError):
            find_solution(tree, "widest_path")

    def test_cost_equals_exclusion_count(self):
        # Property: on random DNFs, the chosen exclusion set's size is
        # minimal among non-breaking leaves for shortest_path.
        import numpy as np

        rng = np.random.default_rng(3)
        rules = tuple(f"R{i}" for i in range(6))
        guide = Guide(guide_id="g", rules=rules)
        for _ in range(10):
            clauses = []
            for _ in range(int(rng.integers(1, 3))):
                size = int(rng.integers(1, 4))
                picks = rng.choice(6, size=size, replace=False)
                clauses.append(frozenset(rules[int(p)] for p in picks))
            dnf = BreakingSetDNF(name="d", clauses=tuple(clauses))
            results = dnf_results(guide, dnf)
            tree = train_tree(results, guide)

            leaves = []

            def walk(node, excluded):
                if isinstance(node, DTreeLeaf):
                    if not node.breaking:
                        leaves.append(excluded)
                    return
                walk(node.left, excluded | {node.rule})
                walk(node.right, excluded)

            walk(tree, frozenset())
            sol = find_solution(tree, "shortest_path")
            assert len(sol.excluded) == min(len(e) for e in leaves)


class TestDotExport:
    def test_shape_and_labels(self):
        guide = Guide(guide_id="g", rules=("A", "B"))
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"A", "B"}),))
        tree = train_tree(dnf_results(guide, dnf), guide)
        dot = export_tree_dot(tree)
        assert dot.startswith("digraph")
        assert 'label="A"' in dot and 'label="B"' in dot
        assert "non-breaking" in dot and "breaking" in dot

    def test_weight_labels(self):
        guide = Guide(guide_id="g", rules=("A", "B"))
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"A", "B"}),))
        tree = train_tree(dnf_results(guide, dnf), guide)
        dot = export_tree_dot(tree, weights=True)
        assert "not applied / 1" in dot
        assert "applied / 0" in dot

    def test_single_leaf_tree(self):
        leaf = DTreeLeaf(breaking=False, samples_pass=3, samples_fail=0)
        dot = export_tree_dot(leaf)
        assert "pass=3" in dot
