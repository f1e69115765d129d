"""Find the functionality-breaking rules of a configuration guide.

Workflow: generate a strength-t covering array over the guide's rules
(ipog), evaluate each tuple against the system under test (harness),
then derive the smallest set of rules to exclude (dtree, logicmin) and
confirm it (evaluation).  oracle supplies simulated systems for studies
and ground-truth checks.
"""
from .covering import (
    CoverageReport,
    CoveringArray,
    export_acts_input,
    import_acts_export,
    load_array,
    save_array,
    verify_coverage,
)
from .dtree import (
    DTreeLeaf,
    DTreeSplit,
    export_tree_dot,
    find_solution,
    train_tree,
)
from .evaluation import (
    ClusterCell,
    EffortParams,
    StudyRow,
    analyze_results,
    effort_estimate,
    emit_cluster_csv,
    format_study_summary,
    run_study,
)
from .harness import (
    EvaluatorConfig,
    ExternalEvaluator,
    HarnessError,
    ResetPolicy,
    RevertFailure,
    SimulatedEvaluator,
    WorkerPlan,
    make_evaluator,
    run_baseline,
    run_full_guide,
    run_revert_check,
    run_tuples,
    untested_indices,
)
from .ipog import estimate_generation, generate_ipog
from .logicmin import (
    Implicant,
    NonMonotoneBreakageError,
    TooManyVariablesError,
    TruthTable,
    build_table,
    extract_exclusions,
    format_cover,
    minimize,
)
from .model import (
    STAGES,
    STRATEGIES,
    AnalysisError,
    FormatError,
    Guide,
    ResultSet,
    RuleTuple,
    RunRecord,
    Solution,
    load_guide,
    load_results,
    load_solution,
    save_guide,
    save_results,
    save_solution,
    tuple_to_applied,
)
from .oracle import (
    BreakingSetDNF,
    CorpusSpec,
    VerificationReport,
    brute_force_maximal_sets,
    evaluate_tuple_simulated,
    gen_corpus,
    is_breaking,
    load_breaking_set,
    save_breaking_set,
    verify_solution,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BreakingSetDNF",
    "ClusterCell",
    "CorpusSpec",
    "CoverageReport",
    "CoveringArray",
    "DTreeLeaf",
    "DTreeSplit",
    "EffortParams",
    "EvaluatorConfig",
    "ExternalEvaluator",
    "FormatError",
    "Guide",
    "HarnessError",
    "Implicant",
    "NonMonotoneBreakageError",
    "ResetPolicy",
    "ResultSet",
    "RevertFailure",
    "RuleTuple",
    "RunRecord",
    "STAGES",
    "STRATEGIES",
    "SimulatedEvaluator",
    "Solution",
    "StudyRow",
    "TooManyVariablesError",
    "TruthTable",
    "VerificationReport",
    "WorkerPlan",
    "analyze_results",
    "brute_force_maximal_sets",
    "build_table",
    "effort_estimate",
    "emit_cluster_csv",
    "estimate_generation",
    "evaluate_tuple_simulated",
    "export_acts_input",
    "export_tree_dot",
    "extract_exclusions",
    "find_solution",
    "format_cover",
    "format_study_summary",
    "gen_corpus",
    "generate_ipog",
    "import_acts_export",
    "is_breaking",
    "load_array",
    "load_breaking_set",
    "load_guide",
    "load_results",
    "load_solution",
    "make_evaluator",
    "minimize",
    "run_baseline",
    "run_full_guide",
    "run_revert_check",
    "run_study",
    "run_tuples",
    "save_array",
    "save_breaking_set",
    "save_guide",
    "save_results",
    "save_solution",
    "train_tree",
    "tuple_to_applied",
    "untested_indices",
    "verify_coverage",
    "verify_solution",
]
