"""Relaxed-plan construction and simulated plan evaluation.

The relaxed plan is grown backwards: pick the hardest still-open fact,
choose its best reachable adder, recursively support that action's
preconditions, then commit the action.  Plan evaluation walks a plan from
the initial state and keeps extending one shared relaxed plan for every
unsupported precondition and finally for open goals; its size is the
adaptation-cost estimate used throughout retrieval and merging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import GOAL_STAGE, Action, Fact, Plan, PlanningProblem, apply
from .reachability import UNREACHED, Levels, ground_index

__all__ = [
    "Unreachable",
    "RelaxedPlanResult",
    "EvaluationResult",
    "relaxed_plan",
    "best_action",
    "evaluate_plan",
]


class Unreachable(RuntimeError):
    """No action chain can achieve `fact`, even ignoring deletes."""

    def __init__(self, fact: Fact):
        super().__init__(f"fact {fact} is unreachable under delete relaxation")
        self.fact = fact


@dataclass(frozen=True)
class RelaxedPlanResult:
    """An ordered action set achieving a goal set under delete relaxation."""

    actions: tuple[Action, ...]
    achieved: frozenset[Fact]

    @property
    def size(self) -> int:
        return len(self.actions)

    def added_facts(self) -> frozenset[Fact]:
        out: set[Fact] = set()
        for a in self.actions:
            out |= a.add
        return frozenset(out)


@dataclass(frozen=True)
class EvaluationResult:
    """Outcome of simulating a plan and pricing its flaws.

    ``unsupported`` lists (action index, fact) occurrences seen during the
    walk, with GOAL_STAGE (-1) as the index for unsatisfied goals.  When a
    flaw is unreachable even under relaxation, ``cost`` is +inf.
    """

    repair: RelaxedPlanResult
    truncated: bool
    unsupported: tuple[tuple[int, Fact], ...]
    unreachable: Fact | None = None

    @property
    def cost(self) -> float:
        if self.unreachable is not None:
            return math.inf
        return float(self.repair.size)


class _Extender:
    """Shared relaxed-plan state threaded through recursive extensions."""

    __slots__ = ("problem", "index", "acts", "added")

    def __init__(self, problem: PlanningProblem, base: RelaxedPlanResult | None):
        self.problem = problem
        self.index = ground_index(problem)
        self.acts: dict[Action, None] = {}
        self.added: set[Fact] = set()
        if base is not None:
            for a in base.actions:
                self.acts[a] = None
                self.added |= a.add

    def extend(self, goals: frozenset[Fact], init: frozenset[Fact], levels: Levels) -> None:
        todo = {g for g in goals if g not in init}
        while True:
            todo -= self.added
            if not todo:
                return
            top = max(levels.fact_level(f) for f in todo)
            g = min((f for f in todo if levels.fact_level(f) == top), key=str)
            best = self._best(g, init, levels)
            self.extend(best.pre, init, levels)
            self.acts[best] = None
            self.added |= best.add

    def _best(self, g: Fact, init: frozenset[Fact], levels: Levels) -> Action:
        cands = [
            a for a in self.index.adders_of(g) if levels.action_level(a) < UNREACHED
        ]
        if not cands:
            raise Unreachable(g)
        supported = init | self.added
        committed_pres: set[Fact] = set()
        for b in self.acts:
            committed_pres |= b.pre
        threatened = committed_pres & supported

        def rank(a: Action):
            return (levels.action_level(a), len(a.delete & threatened), a.ident)

        return min(cands, key=rank)

    def freeze(self, init: frozenset[Fact]) -> RelaxedPlanResult:
        return RelaxedPlanResult(tuple(self.acts), frozenset(init) | frozenset(self.added))


def relaxed_plan(
    problem: PlanningProblem,
    goals: frozenset[Fact],
    init: frozenset[Fact],
    base: RelaxedPlanResult | None = None,
) -> RelaxedPlanResult:
    """Extend `base` into a relaxed plan achieving `goals` from `init`.

    Raises Unreachable when some goal cannot be added by any reachable
    action chain under delete relaxation.
    """
    ext = _Extender(problem, base)
    levels = ext.index.compute(init)
    ext.extend(frozenset(goals), frozenset(init), levels)
    return ext.freeze(init)


def best_action(
    problem: PlanningProblem,
    g: Fact,
    init: frozenset[Fact],
    acts: RelaxedPlanResult | None = None,
) -> Action:
    """The heuristically best reachable adder of `g` from `init`.

    Ranks candidates by smallest maximum precondition distance, then by
    fewest threatened supported preconditions of already-selected actions,
    then lexicographically by action name.
    """
    ext = _Extender(problem, acts)
    levels = ext.index.compute(init)
    return ext._best(g, frozenset(init), levels)


def evaluate_plan(
    problem: PlanningProblem, plan: Plan, climit: float = math.inf
) -> EvaluationResult:
    """Walk `plan` from I, pricing every flaw with relaxed-plan extensions.

    Aborts early (truncated=True) as soon as the accumulated repair grows
    past `climit`; an unreachable flaw also truncates and marks the result
    infinite-cost.
    """
    ext = _Extender(problem, None)
    levels_memo: dict[frozenset[Fact], Levels] = {}

    def levels_for(state: frozenset[Fact]) -> Levels:
        hit = levels_memo.get(state)
        if hit is None:
            hit = ext.index.compute(state)
            levels_memo[state] = hit
        return hit

    cstate = problem.init
    unsupported: list[tuple[int, Fact]] = []
    truncated = False
    unreachable: Fact | None = None

    for i, action in enumerate(plan.actions):
        missing = action.pre - cstate
        if missing:
            unsupported.extend((i, f) for f in sorted(missing))
            try:
                ext.extend(action.pre, cstate, levels_for(cstate))
            except Unreachable as exc:
                unreachable = exc.fact
                truncated = True
                break
        if len(ext.acts) > climit:
            truncated = True
            break
        cstate = apply(cstate, action)
    else:
        missing_goals = problem.goals - cstate
        if missing_goals:
            unsupported.extend((GOAL_STAGE, g) for g in sorted(missing_goals))
            try:
                ext.extend(problem.goals, cstate, levels_for(cstate))
            except Unreachable as exc:
                unreachable = exc.fact
            if len(ext.acts) > climit:
                truncated = True

    truncated = truncated or unreachable is not None
    return EvaluationResult(
        repair=ext.freeze(problem.init),
        truncated=truncated,
        unsupported=tuple(unsupported),
        unreachable=unreachable,
    )
