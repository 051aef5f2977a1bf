"""Typed-STRIPS core: problems, ground actions, plans, state simulation.

Facts and actions are plain value objects compared by name, so they can be
moved between problems through object mappings.  Everything is immutable
after construction and safe to share across threads; per-problem caches
(ground action list, fact index) are built lazily and never mutated again.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

__all__ = [
    "Fact",
    "OperatorSchema",
    "Action",
    "Plan",
    "PlanningProblem",
    "ValidationReport",
    "SortError",
    "apply",
    "validate",
    "relevant_init_facts",
    "EMPTY_PLAN",
]


class SortError(ValueError):
    """An object, fact or binding violates the sort (type) declarations."""


@dataclass(frozen=True, slots=True)
class Fact:
    """A ground atom, e.g. ``Fact("on", ("A", "B"))``."""

    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if self.args:
            return "(%s %s)" % (self.predicate, " ".join(self.args))
        return "(%s)" % self.predicate

    def __lt__(self, other: "Fact") -> bool:
        return (self.predicate, self.args) < (other.predicate, other.args)


@dataclass(frozen=True)
class OperatorSchema:
    """A lifted operator: parameters plus precondition/add/delete templates.

    Templates are (predicate, args) pairs whose args are either parameter
    variables (``?x``) or constant names.
    """

    name: str
    params: tuple[tuple[str, str], ...]  # (variable, sort)
    pre: tuple[tuple[str, tuple[str, ...]], ...]
    add: tuple[tuple[str, tuple[str, ...]], ...]
    delete: tuple[tuple[str, tuple[str, ...]], ...]

    def instantiate_templates(self, binding: dict[str, str]) -> tuple[frozenset[Fact], frozenset[Fact], frozenset[Fact]]:
        def ground(tmpls):
            return frozenset(
                Fact(pred, tuple(binding.get(a, a) for a in args)) for pred, args in tmpls
            )

        return ground(self.pre), ground(self.add), ground(self.delete)


@dataclass(frozen=True)
class Action:
    """A fully instantiated operator with cached ground fact sets."""

    name: str
    args: tuple[str, ...]
    pre: frozenset[Fact]
    add: frozenset[Fact]
    delete: frozenset[Fact]

    @property
    def ident(self) -> str:
        if self.args:
            return "(%s %s)" % (self.name, " ".join(self.args))
        return "(%s)" % self.name

    def __str__(self) -> str:
        return self.ident

    def __hash__(self) -> int:
        return hash((self.name, self.args))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Action):
            return NotImplemented
        return self.name == other.name and self.args == other.args

    def __lt__(self, other: "Action") -> bool:
        return (self.name, self.args) < (other.name, other.args)


def _check_acyclic(n: int, orderings: frozenset[tuple[int, int]]) -> None:
    succ: dict[int, list[int]] = {}
    indeg = [0] * n
    for a, b in orderings:
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"ordering ({a},{b}) out of range for {n} actions")
        succ.setdefault(a, []).append(b)
        indeg[b] += 1
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for w in succ.get(v, ()):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if seen != n:
        raise ValueError("ordering constraints contain a cycle")


@dataclass(frozen=True)
class Plan:
    """An action sequence with optional extra ordering constraints.

    The list order is the canonical linearisation; ``orderings`` records any
    partial-order constraints (pairs of action indices, earlier-before-later)
    but validation and simulation always follow the list order.
    """

    actions: tuple[Action, ...] = ()
    orderings: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        if self.orderings:
            _check_acyclic(len(self.actions), self.orderings)
            for a, b in self.orderings:
                if a >= b:
                    raise ValueError(
                        f"ordering ({a},{b}) conflicts with the canonical list order"
                    )

    def __len__(self) -> int:
        return len(self.actions)

    def __bool__(self) -> bool:
        return bool(self.actions)

    def action_multiset(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for a in self.actions:
            counts[a.ident] = counts.get(a.ident, 0) + 1
        return counts


EMPTY_PLAN = Plan()


@dataclass(frozen=True)
class PlanningProblem:
    """A ground typed-STRIPS instance.

    ``sorts`` maps each sort name to its parent sort (or None for roots);
    ``objects`` maps object names to their declared sort; ``predicates`` maps
    predicate names to their parameter sorts.  ``init`` and ``goals`` are
    ground fact sets over the declared objects.
    """

    name: str
    domain_name: str
    sorts: dict[str, str | None]
    objects: dict[str, str]
    predicates: dict[str, tuple[str, ...]]
    schemas: tuple[OperatorSchema, ...]
    init: frozenset[Fact]
    goals: frozenset[Fact]

    def __hash__(self) -> int:
        return hash((self.name, self.domain_name, self.init, self.goals))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlanningProblem):
            return NotImplemented
        return (
            self.name == other.name
            and self.domain_name == other.domain_name
            and self.sorts == other.sorts
            and self.objects == other.objects
            and self.predicates == other.predicates
            and self.schemas == other.schemas
            and self.init == other.init
            and self.goals == other.goals
        )

    # -- sort machinery -------------------------------------------------

    def is_subsort(self, sort: str, ancestor: str) -> bool:
        cur: str | None = sort
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self.sorts.get(cur)
        return False

    @cached_property
    def _objects_by_sort(self) -> dict[str, tuple[str, ...]]:
        table: dict[str, list[str]] = {s: [] for s in self.sorts}
        for obj in sorted(self.objects):
            sort = self.objects[obj]
            cur: str | None = sort
            while cur is not None:
                table.setdefault(cur, []).append(obj)
                cur = self.sorts.get(cur)
        return {s: tuple(objs) for s, objs in table.items()}

    def objects_of_sort(self, sort: str) -> tuple[str, ...]:
        """All objects whose declared sort is `sort` or a subsort of it."""
        return self._objects_by_sort.get(sort, ())

    def sort_counts(self) -> dict[str, int]:
        """Number of objects per declared sort (no subsort closure)."""
        counts: dict[str, int] = {}
        for sort in self.objects.values():
            counts[sort] = counts.get(sort, 0) + 1
        return dict(sorted(counts.items()))

    def check_fact(self, fact: Fact) -> None:
        """Raise SortError unless `fact` is well-sorted over this problem."""
        sig = self.predicates.get(fact.predicate)
        if sig is None:
            raise SortError(f"unknown predicate {fact.predicate!r}")
        if len(sig) != len(fact.args):
            raise SortError(
                f"predicate {fact.predicate!r} expects {len(sig)} arguments, got {len(fact.args)}"
            )
        for arg, want in zip(fact.args, sig):
            got = self.objects.get(arg)
            if got is None:
                raise SortError(f"undeclared object {arg!r} in {fact}")
            if not self.is_subsort(got, want):
                raise SortError(
                    f"object {arg!r} has sort {got!r}, expected {want!r} in {fact}"
                )

    # -- grounding -------------------------------------------------------

    def schema(self, name: str) -> OperatorSchema:
        for sch in self.schemas:
            if sch.name == name:
                return sch
        raise KeyError(f"unknown operator {name!r}")

    def instantiate(self, name: str, args: tuple[str, ...]) -> Action:
        """Ground one operator with the given argument objects."""
        sch = self.schema(name)
        if len(args) != len(sch.params):
            raise SortError(
                f"operator {name!r} expects {len(sch.params)} arguments, got {len(args)}"
            )
        binding: dict[str, str] = {}
        for (var, sort), obj in zip(sch.params, args):
            got = self.objects.get(obj)
            if got is None:
                raise SortError(f"undeclared object {obj!r} in ({name} ...)")
            if not self.is_subsort(got, sort):
                raise SortError(
                    f"object {obj!r} has sort {got!r}, expected {sort!r} for {var} of {name}"
                )
            binding[var] = obj
        pre, add, delete = sch.instantiate_templates(binding)
        if add & delete:
            raise SortError(
                f"grounding ({name} {' '.join(args)}) has overlapping add and delete lists"
            )
        return Action(name, tuple(args), pre, add, delete)

    @cached_property
    def ground_actions(self) -> tuple[Action, ...]:
        """Every sort-respecting grounding of every operator schema.

        Groundings whose add and delete lists overlap are dropped: they are
        not operators in the STRIPS sense.
        """
        out: list[Action] = []
        for sch in self.schemas:
            pools = [self.objects_of_sort(sort) for _, sort in sch.params]
            for combo in itertools.product(*pools):
                binding = {var: obj for (var, _), obj in zip(sch.params, combo)}
                pre, add, delete = sch.instantiate_templates(binding)
                if add & delete:
                    continue
                out.append(Action(sch.name, tuple(combo), pre, add, delete))
        return tuple(out)

    def replace(self, *, name: str | None = None, init: frozenset[Fact] | None = None,
                goals: frozenset[Fact] | None = None,
                objects: dict[str, str] | None = None) -> "PlanningProblem":
        """A copy of this problem with some instance fields swapped out."""
        return PlanningProblem(
            name=name if name is not None else self.name,
            domain_name=self.domain_name,
            sorts=self.sorts,
            objects=objects if objects is not None else self.objects,
            predicates=self.predicates,
            schemas=self.schemas,
            init=init if init is not None else self.init,
            goals=goals if goals is not None else self.goals,
        )


# -- state simulation ----------------------------------------------------


def apply(state: frozenset[Fact], action: Action) -> frozenset[Fact]:
    """Progress a state through one action: (state - del) | add.

    Applicability is deliberately not checked; callers that care about
    support run `validate` or the plan evaluator.
    """
    return (state - action.delete) | action.add


GOAL_STAGE = -1  # marker index for goal-level entries in reports


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of simulating a plan along its canonical linearisation.

    ``unsupported`` lists (action index, fact) for every precondition not
    holding when its action is reached; ``unsatisfied_goals`` lists goals
    missing from the final state.
    """

    valid: bool
    unsupported: tuple[tuple[int, Fact], ...]
    unsatisfied_goals: tuple[Fact, ...]
    final_state: frozenset[Fact]


def validate(problem: PlanningProblem, plan: Plan) -> ValidationReport:
    """Simulate `plan` from the initial state and report every flaw."""
    state = problem.init
    unsupported: list[tuple[int, Fact]] = []
    for i, action in enumerate(plan.actions):
        for fact in sorted(action.pre - state):
            unsupported.append((i, fact))
        state = apply(state, action)
    missing = tuple(sorted(problem.goals - state))
    return ValidationReport(
        valid=not unsupported and not missing,
        unsupported=tuple(unsupported),
        unsatisfied_goals=missing,
        final_state=state,
    )


def relevant_init_facts(problem: PlanningProblem, plan: Plan) -> frozenset[Fact]:
    """I restricted to facts some plan action needs: I ∩ ⋃ pre(a)."""
    used: set[Fact] = set()
    for action in plan.actions:
        used |= action.pre
    return problem.init & used
