"""Retrieval funnel, plan merging and relaxed-plan repair completion.

Retrieval narrows the library in four stages: a degree-sequence screen over
the index, base-kernel matching, neighbourhood-kernel refinement, and a
final simulated-evaluation stage that races every surviving candidate
against the generative estimate (adapting the empty plan).  Merging reuses
the funnel to seed a plan and then repeatedly splices in the library
subplan that best fixes one unsatisfied fact, as long as the evaluation
cost strictly improves.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .casebase import Library
from .graphs import degree_signature, ds_similarity, encode_problem
from .heuristics import Unreachable, evaluate_plan, relaxed_plan
from .matching import (
    ObjectMapping,
    UnmappedObject,
    complete_mapping,
    kernel_base,
    kernel_neighborhood,
    kernel_with_forced,
    map_plan_args,
    simil,
)
from .model import (
    EMPTY_PLAN,
    GOAL_STAGE,
    Fact,
    Plan,
    PlanningProblem,
    SortError,
    apply,
    relevant_init_facts,
    validate,
)

logger = logging.getLogger("oakplan.retrieval")

__all__ = [
    "RetrievalConfig",
    "RetrievalResult",
    "FunnelTrace",
    "StageTrace",
    "EvalTrace",
    "MergeStep",
    "Incomplete",
    "retrieve",
    "merge_plans",
    "merge_subplans",
    "merge_subplans_traced",
    "repair_completion",
]


@dataclass(frozen=True)
class RetrievalConfig:
    """Funnel tuning: similarity window, screen cap, generation bias."""

    limit: float = 0.1
    screen_cap: int = 700
    alpha_g: float = 1.0
    gamma: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.limit <= 1.0:
            raise ValueError("limit must be in [0,1]")
        if self.screen_cap < 1:
            raise ValueError("screen_cap must be >= 1")
        if self.alpha_g <= 0:
            raise ValueError("alpha_g must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


@dataclass(frozen=True)
class StageTrace:
    stage: str
    candidates: tuple[tuple[str, float], ...]  # (case id, stage score)
    best: float


@dataclass(frozen=True)
class EvalTrace:
    case_id: str
    simil: float
    cost: float  # +inf when truncated or skipped
    accepted: bool
    reason: str = ""


@dataclass(frozen=True)
class FunnelTrace:
    stages: tuple[StageTrace, ...]
    evaluations: tuple[EvalTrace, ...]

    def counts(self) -> list[int]:
        return [len(s.candidates) for s in self.stages]


@dataclass(frozen=True)
class RetrievalResult:
    chosen: Plan
    source_case: str | None
    mapping: ObjectMapping | None
    best_cost: float
    generation_cost: float  # size of the relaxed plan for the empty plan
    funnel_trace: FunnelTrace


def _injectable(case_counts: dict[str, int], problem_counts: dict[str, int]) -> bool:
    return all(problem_counts.get(s, 0) >= n for s, n in case_counts.items())


def retrieve(
    library: Library, problem: PlanningProblem, cfg: RetrievalConfig | None = None
) -> RetrievalResult:
    """Pick the best adaptation candidate from the library, or the empty plan.

    The incumbent cost starts at alpha_g times the generative estimate; a
    candidate wins when its evaluated adaptation cost is below the incumbent
    scaled by its similarity, and the incumbent is updated to cost/simil.
    """
    cfg = cfg or RetrievalConfig()
    generation = evaluate_plan(problem, EMPTY_PLAN, math.inf)
    pi_r_size = generation.cost
    relevant = relevant_init_facts_of_repair(problem, generation)
    eg_full = encode_problem(problem)
    eg_relevant = encode_problem(problem, init=relevant)
    sig_relevant = degree_signature(eg_relevant)
    problem_counts = problem.sort_counts()

    stages: list[StageTrace] = []

    scored = [
        (cid, ds_similarity(library.records[cid].signature, sig_relevant))
        for cid in library.case_ids()
    ]
    best_ds = max((s for _, s in scored), default=0.0)
    stages.append(StageTrace("ds", tuple(scored), best_ds))
    logger.info("stage=ds candidates=%d best=%.4f", len(scored), best_ds)

    survivors = sorted(
        (
            (cid, s)
            for cid, s in scored
            if best_ds - s <= cfg.limit
            and _injectable(library.records[cid].sort_counts, problem_counts)
        ),
        key=lambda t: (-t[1], t[0]),
    )[: cfg.screen_cap]

    base_scored: list[tuple[str, float, ObjectMapping]] = []
    for cid, _ in survivors:
        case = library.load_case(cid)
        _, mu_base = kernel_base(case.encoding, eg_full)
        try:
            s_base = simil(case.problem, problem, mu_base).value
        except UnmappedObject:
            continue
        base_scored.append((cid, s_base, mu_base))
    best_base = max((s for _, s, _ in base_scored), default=0.0)
    stages.append(
        StageTrace("base", tuple((cid, s) for cid, s, _ in base_scored), best_base)
    )
    logger.info("stage=base candidates=%d best=%.4f", len(base_scored), best_base)

    refined: list[tuple[str, float, ObjectMapping]] = []
    for cid, s_base, mu_base in base_scored:
        if best_base - s_base > cfg.limit:
            continue
        case = library.load_case(cid)
        _, mu_n = kernel_neighborhood(case.encoding, eg_full, cfg.gamma)
        try:
            s_n = simil(case.problem, problem, mu_n).value
        except UnmappedObject:
            s_n = -1.0
        if s_n >= s_base:
            refined.append((cid, s_n, mu_n))
        else:
            refined.append((cid, s_base, mu_base))
    best_simil = max((s for _, s, _ in refined), default=0.0)
    stages.append(
        StageTrace("neigh", tuple((cid, s) for cid, s, _ in refined), best_simil)
    )
    logger.info("stage=neigh candidates=%d best=%.4f", len(refined), best_simil)

    finalists = sorted(
        (
            (cid, s, mu)
            for cid, s, mu in refined
            if best_simil - s <= cfg.limit
        ),
        key=lambda t: (-t[1], t[0]),
    )
    stages.append(
        StageTrace("evaluate", tuple((cid, s) for cid, s, _ in finalists), best_simil)
    )

    best_cost = cfg.alpha_g * pi_r_size
    best_plan = EMPTY_PLAN
    source: str | None = None
    chosen_mapping: ObjectMapping | None = None
    evaluations: list[EvalTrace] = []

    for cid, s_i, mu in finalists:
        if s_i <= 0.0:
            evaluations.append(EvalTrace(cid, s_i, math.inf, False, "zero-simil"))
            continue
        case = library.load_case(cid)
        full_mu = complete_mapping(mu, case.problem, problem)
        if full_mu is None:
            evaluations.append(EvalTrace(cid, s_i, math.inf, False, "cannot-complete"))
            continue
        try:
            mapped_plan = map_plan_args(full_mu, problem, case.solution)
        except (UnmappedObject, SortError, KeyError):
            evaluations.append(EvalTrace(cid, s_i, math.inf, False, "cannot-encode"))
            continue
        result = evaluate_plan(problem, mapped_plan, best_cost * s_i)
        cost_i = math.inf if result.truncated else result.cost
        accepted = best_cost * s_i > cost_i
        evaluations.append(EvalTrace(cid, s_i, cost_i, accepted))
        if accepted:
            best_cost = cost_i / s_i
            best_plan = mapped_plan
            source = cid
            chosen_mapping = full_mu

    logger.info(
        "stage=cost evaluated=%d chosen=%s best_cost=%s",
        len(evaluations), source or "empty-plan", best_cost,
    )
    return RetrievalResult(
        chosen=best_plan,
        source_case=source,
        mapping=chosen_mapping,
        best_cost=best_cost,
        generation_cost=pi_r_size,
        funnel_trace=FunnelTrace(tuple(stages), tuple(evaluations)),
    )


def relevant_init_facts_of_repair(problem: PlanningProblem, evaluation) -> frozenset[Fact]:
    """I filtered by the preconditions of a relaxed plan's actions."""
    used: set[Fact] = set()
    for action in evaluation.repair.actions:
        used |= action.pre
    return problem.init & used


# -- merging ------------------------------------------------------------------


def _net_preconditions(plan: Plan) -> frozenset[Fact]:
    """Facts `plan` needs from outside itself along its own order."""
    produced: frozenset[Fact] = frozenset()
    needed: set[Fact] = set()
    for action in plan.actions:
        needed |= action.pre - produced
        produced = apply(produced, action)
    return frozenset(needed)


def _insert_block(pi: Plan, block: Plan, position: int) -> Plan:
    actions = pi.actions[:position] + block.actions + pi.actions[position:]
    return Plan(actions)


def merge_plans(
    problem: PlanningProblem, pi: Plan, pi_f: Plan, target: Fact | None = None
) -> Plan:
    """Splice `pi_f` into `pi` at the better of two insertion points.

    Candidate positions: the earliest prefix state covering most of pi_f's
    net preconditions, and the latest position before the consumer of
    `target` (the end of the plan when no consumer is known).  The candidate
    with the lower evaluated cost wins; ties go to the earlier position.
    """
    if not pi_f.actions:
        return pi
    if not pi.actions:
        return pi_f
    net = _net_preconditions(pi_f)
    states = [problem.init]
    for action in pi.actions:
        states.append(apply(states[-1], action))

    best_cover = -1
    earliest = 0
    for pos, state in enumerate(states):
        cover = len(net & state)
        if cover > best_cover:
            best_cover = cover
            earliest = pos
            if cover == len(net):
                break

    latest = len(pi.actions)
    if target is not None:
        for i, action in enumerate(pi.actions):
            if target in action.pre and target not in states[i]:
                latest = i
                break

    positions = sorted({earliest, latest})
    best_plan: Plan | None = None
    best_cost = math.inf
    for pos in positions:
        candidate = _insert_block(pi, pi_f, pos)
        cost = evaluate_plan(problem, candidate, math.inf).cost
        if best_plan is None or cost < best_cost:
            best_plan = candidate
            best_cost = cost
    assert best_plan is not None
    return best_plan


@dataclass(frozen=True)
class MergeStep:
    fact: Fact
    case_id: str
    cost_before: float
    cost_after: float


def _targeted_subplan(
    library: Library,
    problem: PlanningProblem,
    eg_full,
    case_id: str,
    fact: Fact,
    gamma: float,
) -> Plan | None:
    """Map a case's plan so that one of its goals lands on `fact`."""
    case = library.load_case(case_id)
    for goal in sorted(case.problem.goals):
        if goal.predicate != fact.predicate or len(goal.args) != len(fact.args):
            continue
        forced: dict[str, str] = {}
        consistent = True
        for co, po in zip(goal.args, fact.args):
            if forced.get(co, po) != po:
                consistent = False
                break
            forced[co] = po
        if not consistent:
            continue
        mu = kernel_with_forced(case.encoding, eg_full, forced, gamma)
        if mu is None:
            continue
        full_mu = complete_mapping(mu, case.problem, problem)
        if full_mu is None:
            continue
        try:
            return map_plan_args(full_mu, problem, case.solution)
        except (UnmappedObject, SortError, KeyError):
            continue
    return None


def _best_merge_for(
    library: Library,
    problem: PlanningProblem,
    eg_full,
    plan: Plan,
    fact: Fact,
    current_cost: float,
    cfg: RetrievalConfig,
) -> tuple[Plan, str, float] | None:
    """The improving merge for `fact` with the best (gain, success rate) rank."""
    problem_counts = problem.sort_counts()
    best_key = None
    best: tuple[Plan, str, float] | None = None
    for cid in library.case_ids():
        rec = library.records[cid]
        if not _injectable(rec.sort_counts, problem_counts):
            continue
        mapped = _targeted_subplan(library, problem, eg_full, cid, fact, cfg.gamma)
        if mapped is None:
            continue
        merged = merge_plans(problem, plan, mapped, target=fact)
        cost = evaluate_plan(problem, merged, math.inf).cost
        if cost >= current_cost:
            continue
        gain = current_cost - cost
        rate = rec.successes / rec.attempts if rec.attempts else 0.0
        key = (-gain, -rate, len(mapped.actions), cid)
        if best_key is None or key < best_key:
            best_key = key
            best = (merged, cid, cost)
    return best


def merge_subplans_traced(
    library: Library, problem: PlanningProblem, cfg: RetrievalConfig | None = None
) -> tuple[Plan, tuple[MergeStep, ...], tuple[str, ...]]:
    """Merging loop with its improvement trace and the case ids it used."""
    cfg = cfg or RetrievalConfig()
    seed = retrieve(library, problem, cfg)
    plan = seed.chosen
    used: list[str] = [seed.source_case] if seed.source_case else []
    steps: list[MergeStep] = []
    eg_full = encode_problem(problem)

    while True:
        evaluation = evaluate_plan(problem, plan, math.inf)
        current = evaluation.cost
        if current == 0:
            break
        goal_facts = sorted({f for stage, f in evaluation.unsupported if stage == GOAL_STAGE})
        pre_facts = sorted(
            {f for stage, f in evaluation.unsupported if stage != GOAL_STAGE}
            - set(goal_facts)
        )
        improved = False
        for fact in goal_facts + pre_facts:
            found = _best_merge_for(library, problem, eg_full, plan, fact, current, cfg)
            if found is not None:
                merged, cid, cost = found
                steps.append(MergeStep(fact, cid, current, cost))
                logger.info(
                    "stage=merge fact=%s case=%s cost=%s->%s", fact, cid, current, cost
                )
                used.append(cid)
                plan = merged
                improved = True
                break
        if not improved:
            break
    return plan, tuple(steps), tuple(used)


def merge_subplans(
    library: Library, problem: PlanningProblem, cfg: RetrievalConfig | None = None
) -> Plan:
    """Best-effort (quasi-)solution built by merging library subplans."""
    plan, _, _ = merge_subplans_traced(library, problem, cfg)
    return plan


# -- repair completion --------------------------------------------------------


class Incomplete(RuntimeError):
    """Relaxed repair did not produce a valid plan; carries the best effort."""

    def __init__(self, plan: Plan):
        super().__init__("relaxed repair did not complete the plan")
        self.plan = plan


def repair_completion(problem: PlanningProblem, plan: Plan) -> Plan:
    """Greedy stand-in for a full adaptation engine.

    Inserts each relaxed-repair block at the position that triggered it,
    applies real effects while walking, and re-validates.  Raises Incomplete
    (carrying the attempt) when the outcome is still flawed.
    """
    out: list = []
    state = problem.init
    repair = None
    failed = False

    def extend(goals, current_state):
        nonlocal repair, state, failed
        try:
            new_repair = relaxed_plan(problem, goals, current_state, repair)
        except Unreachable:
            failed = True
            return
        start = repair.size if repair is not None else 0
        for action in new_repair.actions[start:]:
            out.append(action)
            state = apply(state, action)
        repair = new_repair

    for action in plan.actions:
        if action.pre - state:
            extend(action.pre, state)
        out.append(action)
        state = apply(state, action)
    if problem.goals - state:
        extend(problem.goals, state)

    candidate = Plan(tuple(out))
    if not failed and validate(problem, candidate).valid:
        return candidate
    raise Incomplete(candidate)
