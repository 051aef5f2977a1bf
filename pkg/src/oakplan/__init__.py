"""oakplan: a case-based planning toolkit for typed STRIPS problems.

Solved problems live in a persistent plan library; retrieval matches new
problems against stored cases through multiset-labeled encoding graphs and
assignment kernels, and merging splices stored subplans into solutions for
combined goals.
"""

from .casebase import (
    CausalLink,
    CausalLinkSet,
    InvalidPlan,
    Library,
    PlanningCase,
    causal_links,
    check_and_insert,
    goal_subplan,
    insert_case,
    update_library,
)
from .graphs import (
    DegreeSignature,
    LabeledGraph,
    PlanningEncodingGraph,
    degree_signature,
    ds_similarity,
    encode_problem,
    fact_encoding,
    graph_union,
)
from .heuristics import (
    EvaluationResult,
    RelaxedPlanResult,
    Unreachable,
    best_action,
    evaluate_plan,
    relaxed_plan,
)
from .matching import (
    CannotInject,
    ObjectMapping,
    SimilarityScore,
    TooLarge,
    UnmappedObject,
    complete_simil,
    exact_match,
    kernel_base,
    kernel_neighborhood,
    map_facts,
    simil,
)
from .model import (
    EMPTY_PLAN,
    Action,
    Fact,
    OperatorSchema,
    Plan,
    PlanningProblem,
    SortError,
    ValidationReport,
    apply,
    relevant_init_facts,
    validate,
)
from .pddl import (
    PddlSyntaxError,
    UnsupportedFeature,
    format_plan,
    parse_plan,
    parse_problem,
    unparse_domain,
    unparse_problem,
)
from .retrieval import (
    Incomplete,
    RetrievalConfig,
    RetrievalResult,
    merge_plans,
    merge_subplans,
    merge_subplans_traced,
    repair_completion,
    retrieve,
)

__version__ = "0.1.0"
