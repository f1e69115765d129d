"""Simulated breaking-set semantics and the brute-force ground truth."""
import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breakfinder.model import Guide, RuleTuple, Solution
from breakfinder.oracle import (
    BreakingSetDNF,
    CorpusSpec,
    brute_force_maximal_sets,
    evaluate_tuple_simulated,
    gen_corpus,
    is_breaking,
    load_breaking_set,
    save_breaking_set,
    verify_solution,
)


def make_guide(n: int) -> Guide:
    return Guide(guide_id="g", rules=tuple(f"R{i}" for i in range(n)))


class TestIsBreaking:
    def test_single_clause(self):
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"R1", "R2"}),))
        assert is_breaking(dnf, {"R1", "R2"})
        assert is_breaking(dnf, {"R1", "R2", "R3"})
        assert not is_breaking(dnf, {"R1"})
        assert not is_breaking(dnf, set())

    def test_disjunction(self):
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"R1"}), frozenset({"R2", "R3"})),
        )
        assert is_breaking(dnf, {"R1"})
        assert is_breaking(dnf, {"R2", "R3"})
        assert not is_breaking(dnf, {"R2"})

    def test_empty_dnf_never_breaks(self):
        dnf = BreakingSetDNF(name="d", clauses=())
        assert not is_breaking(dnf, {"R1", "R2"})

    def test_superset_clause_normalized_away(self):
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"R1"}), frozenset({"R1", "R2"})),
        )
        assert dnf.clauses == (frozenset({"R1"}),)

    @given(st.frozensets(st.sampled_from([f"R{i}" for i in range(6)])))
    def test_monotone(self, applied):
        # Breakage is monotone: a superset of a breaking set breaks.
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"R0", "R1"}), frozenset({"R3"})),
        )
        if is_breaking(dnf, applied):
            assert is_breaking(dnf, applied | {"R5"})


class TestBruteForce:
    def test_two_clause_four_rule(self):
        # (R1&R2)|(R3&R4) over 4 rules: a maximal non-breaking
        # set drops one rule from each clause; 2x2 choices.
        guide = Guide(guide_id="g", rules=("R1", "R2", "R3", "R4"))
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"R1", "R2"}), frozenset({"R3", "R4"})),
        )
        maximal = brute_force_maximal_sets(guide, dnf)
        expected = [
            frozenset({"R1", "R3"}),
            frozenset({"R1", "R4"}),
            frozenset({"R2", "R3"}),
            frozenset({"R2", "R4"}),
        ]
        assert sorted(maximal, key=sorted) == sorted(expected, key=sorted)

    def test_empty_dnf_full_guide_maximal(self):
        guide = make_guide(3)
        dnf = BreakingSetDNF(name="d", clauses=())
        assert brute_force_maximal_sets(guide, dnf) == [frozenset(guide.rules)]

    def test_maximal_sets_are_maximal_and_non_breaking(self):
        guide = make_guide(6)
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"R0", "R3"}), frozenset({"R1", "R4", "R5"})),
        )
        for applied in brute_force_maximal_sets(guide, dnf):
            assert not is_breaking(dnf, applied)
            for extra in set(guide.rules) - applied:
                assert is_breaking(dnf, applied | {extra})


class TestVerifySolution:
    def _setup(self):
        guide = Guide(guide_id="g", rules=("R1", "R2", "R3", "R4"))
        dnf = BreakingSetDNF(
            name="d",
            clauses=(frozenset({"R1", "R2"}), frozenset({"R3", "R4"})),
        )
        return guide, dnf

    def test_exact(self):
        guide, dnf = self._setup()
        sol = Solution(strategy="logic_min", excluded=frozenset({"R1", "R3"}))
        report = verify_solution(guide, dnf, sol)
        assert report.non_breaking and report.maximal
        assert report.classification == "exact"

    def test_subset_of_correct(self):
        guide, dnf = self._setup()
        sol = Solution(
            strategy="logic_min", excluded=frozenset({"R1", "R2", "R3"})
        )
        report = verify_solution(guide, dnf, sol)
        assert report.non_breaking and not report.maximal
        assert report.classification == "subset_of_correct"

    def test_wrong(self):
        guide, dnf = self._setup()
        sol = Solution(strategy="logic_min", excluded=frozenset({"R1"}))
        report = verify_solution(guide, dnf, sol)
        assert not report.non_breaking
        assert report.classification == "wrong"


class TestEvaluateTupleSimulated:
    def test_failing_and_passing_records(self):
        guide = Guide(guide_id="g", rules=("R1", "R2"))
        dnf = BreakingSetDNF(name="d", clauses=(frozenset({"R1"}),))
        bad = evaluate_tuple_simulated(
            dnf, guide, RuleTuple(index=0, selection=(True, False))
        )
        good = evaluate_tuple_simulated(
            dnf, guide, RuleTuple(index=1, selection=(False, True))
        )
        assert not bad.passed and bad.failed_tests
        assert good.passed and good.failed_tests == ()
        assert bad.stage == good.stage == "tuple"
        assert (bad.tuple_index, good.tuple_index) == (0, 1)


class TestCorpus:
    def test_shape_and_names(self):
        guide = make_guide(20)
        spec = CorpusSpec(
            max_clauses=2, max_rules_per_clause=3, variants_per_base=2, seed=7
        )
        corpus = gen_corpus(guide, spec)
        # One empty set plus 2x3 cells, each a base plus 2 variants.
        assert len(corpus) == 1 + 2 * 3 * (1 + 2)
        assert corpus[0].name == "empty"
        names = {d.name for d in corpus}
        assert "1_1_0" in names and "2_3_2" in names

    def test_deterministic(self):
        guide = make_guide(15)
        spec = CorpusSpec(
            max_clauses=3, max_rules_per_clause=2, variants_per_base=2, seed=3
        )
        a = gen_corpus(guide, spec)
        b = gen_corpus(guide, spec)
        assert [(d.name, d.clauses) for d in a] == [(d.name, d.clauses) for d in b]

    def test_disjoint_clauses(self):
        guide = make_guide(30)
        spec = CorpusSpec(
            max_clauses=3, max_rules_per_clause=3, variants_per_base=3, seed=0
        )
        for dnf in gen_corpus(guide, spec):
            for a, b in itertools.combinations(dnf.clauses, 2):
                assert not (a & b)

    def test_clause_sizes_within_bounds(self):
        guide = make_guide(25)
        spec = CorpusSpec(
            max_clauses=3, max_rules_per_clause=4, variants_per_base=1, seed=9
        )
        for dnf in gen_corpus(guide, spec)[1:]:
            c, k, _ = dnf.name.split("_")
            assert len(dnf.clauses) == int(c)
            assert all(1 <= len(cl) <= int(k) for cl in dnf.clauses)


class TestBreakingSetIO:
    def test_round_trip(self, tmp_path):
        dnf = BreakingSetDNF(
            name="pair",
            clauses=(frozenset({"R1", "R2"}), frozenset({"R5"})),
        )
        path = tmp_path / "dnf.json"
        save_breaking_set(dnf, path)
        assert load_breaking_set(path) == dnf
