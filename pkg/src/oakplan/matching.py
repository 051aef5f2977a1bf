"""Object matching between problems via assignment kernels on encoding graphs.

The node kernel scores two concept vertices by the overlap of their label
multisets and of their incident in/out edge-label multisets; an optimal
injective assignment of same-sorted objects (Hungarian, ties resolved
lexicographically) yields both a graph similarity score and the object
mapping used to transfer facts and plans between problems.  A brute-force
enumerator over all sort-respecting injective mappings serves as the exact
oracle on small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graphs import CONCEPT, PlanningEncodingGraph, mset_card
from .model import Fact, PlanningProblem

__all__ = [
    "UnmappedObject",
    "TooLarge",
    "CannotInject",
    "ObjectMapping",
    "SimilarityScore",
    "map_facts",
    "map_plan_args",
    "simil",
    "complete_simil",
    "kernel_base",
    "kernel_neighborhood",
    "exact_match",
    "complete_mapping",
]

_TOL = 1e-9


class UnmappedObject(KeyError):
    """A fact mentions an object outside the mapping's domain."""


class TooLarge(ValueError):
    """Instance exceeds the exact matcher's factorial guard."""


class CannotInject(ValueError):
    """Some sort has more case objects than problem objects."""


@dataclass(frozen=True)
class ObjectMapping:
    """Sort-respecting map from case objects to problem objects."""

    pairs: tuple[tuple[str, str], ...]

    @classmethod
    def from_dict(cls, mapping: dict[str, str]) -> "ObjectMapping":
        return cls(tuple(sorted(mapping.items())))

    @classmethod
    def identity(cls, objects) -> "ObjectMapping":
        return cls(tuple((o, o) for o in sorted(objects)))

    @cached_property
    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)

    @property
    def injective(self) -> bool:
        targets = [t for _, t in self.pairs]
        return len(set(targets)) == len(targets)

    def __len__(self) -> int:
        return len(self.pairs)

    def map_fact(self, fact: Fact) -> Fact:
        table = self.as_dict
        try:
            return Fact(fact.predicate, tuple(table[a] for a in fact.args))
        except KeyError as exc:
            raise UnmappedObject(f"object {exc.args[0]!r} is not mapped") from None


def map_facts(mu: ObjectMapping, facts) -> frozenset[Fact]:
    """Canonical extension of `mu` to a fact set (duplicates collapse)."""
    return frozenset(mu.map_fact(f) for f in facts)


def map_plan_args(mu: ObjectMapping, problem: PlanningProblem, plan) -> "tuple":
    """Re-ground a case plan over `problem` through `mu`.

    Raises UnmappedObject / SortError / KeyError when an action cannot be
    encoded over the target problem.
    """
    from .model import Plan

    table = mu.as_dict
    actions = []
    for a in plan.actions:
        try:
            args = tuple(table[x] for x in a.args)
        except KeyError as exc:
            raise UnmappedObject(f"object {exc.args[0]!r} is not mapped") from None
        actions.append(problem.instantiate(a.name, args))
    return Plan(tuple(actions))


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    matched_goals: int
    matched_inits: int


def simil(case_problem: PlanningProblem, problem: PlanningProblem, mu: ObjectMapping) -> SimilarityScore:
    """(|mu(G') ∩ G| + |mu(I') ∩ I|) / (|G| + |mu(I')|)."""
    mapped_goals = map_facts(mu, case_problem.goals)
    mapped_init = map_facts(mu, case_problem.init)
    mg = len(mapped_goals & problem.goals)
    mi = len(mapped_init & problem.init)
    denom = len(problem.goals) + len(mapped_init)
    value = 1.0 if denom == 0 else (mg + mi) / denom
    return SimilarityScore(value, mg, mi)


def complete_simil(case_problem: PlanningProblem, problem: PlanningProblem, mu: ObjectMapping) -> SimilarityScore:
    """Jaccard variant: intersections over unions of both fact sets."""
    mapped_goals = map_facts(mu, case_problem.goals)
    mapped_init = map_facts(mu, case_problem.init)
    mg = len(mapped_goals & problem.goals)
    mi = len(mapped_init & problem.init)
    denom = len(mapped_goals | problem.goals) + len(mapped_init | problem.init)
    value = 1.0 if denom == 0 else (mg + mi) / denom
    return SimilarityScore(value, mg, mi)


# -- assignment machinery ----------------------------------------------------


def _assign_value(weights: np.ndarray) -> float:
    if weights.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def _lex_max_assignment(
    weights: np.ndarray,
    rows: list[str],
    cols: list[str],
    consistency,
    record,
) -> list[tuple[int, int]]:
    """Max-weight assignment of every row, with deterministic tie resolution.

    Rows and columns must arrive in lexicographic order and len(rows) <=
    len(cols).  Among the columns that keep the total optimal for a row,
    the one most edge-consistent with already-fixed pairs wins (the
    `consistency(row, col)` callback), then the lexicographically first;
    `record(row, col)` is invoked as each pair is fixed.
    """
    r, c = weights.shape
    if r == 0:
        return []
    pairs: list[tuple[int, int]] = []
    row_ids = list(range(r))
    col_ids = list(range(c))
    cur = weights
    target = _assign_value(cur)

    def tied_positions(li: int) -> list[int]:
        out = []
        without_row = np.delete(cur, li, axis=0)
        for pos in range(len(col_ids)):
            rest = np.delete(without_row, pos, axis=1)
            val = float(cur[li, pos]) + _assign_value(rest)
            if val >= target - _TOL:
                out.append(pos)
        return out

    def fix(li: int, pos: int) -> None:
        nonlocal cur, target
        ri, cj = row_ids.pop(li), col_ids.pop(pos)
        pairs.append((ri, cj))
        record(rows[ri], cols[cj])
        target -= float(cur[li, pos])
        cur = np.delete(np.delete(cur, li, axis=0), pos, axis=1)

    while row_ids:
        # fix every forced row first (unique optimal column); fixing one can
        # force others, so sweep until a fixpoint
        li = 0
        forced_any = False
        while li < len(row_ids):
            tied = tied_positions(li)
            if len(tied) == 1:
                fix(li, tied[0])
                forced_any = True
                li = 0
            else:
                li += 1
        if not row_ids:
            break
        if forced_any:
            continue
        # all remaining rows are ambiguous: settle the lexicographically
        # first by edge consistency with what is already fixed
        tied = tied_positions(0)
        best_pos = min(
            tied,
            key=lambda pos: (-consistency(rows[row_ids[0]], cols[col_ids[pos]]), pos),
        )
        fix(0, best_pos)
    return pairs


def _node_kernel(p1, p2) -> float:
    (l1, i1, o1), (l2, i2, o2) = p1, p2
    return float(mset_card(l1 & l2) + mset_card(i1 & i2) + mset_card(o1 & o2))


def _grouped_concepts(peg: PlanningEncodingGraph) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for v in peg.concept_vertices:
        groups.setdefault(peg.concept_sorts[v], []).append(v)
    return {s: sorted(vs) for s, vs in groups.items()}


def _assign_concepts(
    g1: PlanningEncodingGraph,
    g2: PlanningEncodingGraph,
    weight,
    forced: dict[str, str] | None = None,
) -> tuple[float, ObjectMapping]:
    """Per-sort optimal assignment of g1's concept vertices into g2's.

    `weight(u, v)` scores a pair; `forced` pins selected pairs before the
    remainder is optimised.  The smaller side of each sort is assigned
    injectively into the larger.
    """
    forced = forced or {}
    total = 0.0
    mapping: dict[str, str] = {}
    fixed: list[tuple[str, str]] = []
    for u, v in sorted(forced.items()):
        total += weight(u, v)
        mapping[u] = v
        fixed.append((u, v))
    forced_targets = set(forced.values())

    def consistency(u: str, v: str) -> int:
        return sum(_edge_overlap(g1, g2, u, a, v, b) for a, b in fixed)

    def record(u: str, v: str) -> None:
        fixed.append((u, v))

    by1, by2 = _grouped_concepts(g1), _grouped_concepts(g2)
    for sort in sorted(set(by1) & set(by2)):
        rows = [v for v in by1[sort] if v not in forced]
        cols = [v for v in by2[sort] if v not in forced_targets]
        if not rows or not cols:
            continue
        if len(rows) <= len(cols):
            w = np.array([[weight(u, v) for v in cols] for u in rows])
            for ri, cj in _lex_max_assignment(
                w, rows, cols, consistency, record
            ):
                mapping[rows[ri]] = cols[cj]
                total += float(w[ri, cj])
        else:
            # cannot inject this sort; assign the larger problem side instead
            w = np.array([[weight(u, v) for u in rows] for v in cols])
            for ci, rj in _lex_max_assignment(
                w, cols, rows,
                lambda cv, ru: consistency(ru, cv),
                lambda cv, ru: record(ru, cv),
            ):
                mapping[rows[rj]] = cols[ci]
                total += float(w[ci, rj])
    return total, ObjectMapping.from_dict(mapping)


def _self_value(peg: PlanningEncodingGraph, weight) -> float:
    return sum(weight(v, v, peg, peg) for v in peg.concept_vertices)


def kernel_base(
    g1: PlanningEncodingGraph, g2: PlanningEncodingGraph
) -> tuple[float, ObjectMapping]:
    """Base assignment kernel: multiset-overlap node kernel, optimal pairing.

    Returns the similarity score in [0,1] (assignment value over the larger
    self-assignment) and the object mapping read off the assignment.
    """

    def w(u: str, v: str, ga=g1, gb=g2) -> float:
        return _node_kernel(ga.profiles[u], gb.profiles[v])

    total, mapping = _assign_concepts(g1, g2, w)
    self1 = _self_value(g1, lambda u, v, ga, gb: _node_kernel(ga.profiles[u], gb.profiles[v]))
    self2 = _self_value(g2, lambda u, v, ga, gb: _node_kernel(ga.profiles[u], gb.profiles[v]))
    denom = max(self1, self2)
    score = 1.0 if denom == 0 else total / denom
    return score, mapping


def _compatible(g1: PlanningEncodingGraph, g2: PlanningEncodingGraph, u: str, v: str) -> bool:
    r1, r2 = g1.roles[u], g2.roles[v]
    if r1 != r2:
        return False
    if r1 == CONCEPT:
        return g1.concept_sorts[u] == g2.concept_sorts[v]
    return u == v  # relation vertices match by (side, predicate) name


def _edge_overlap(
    g1: PlanningEncodingGraph, g2: PlanningEncodingGraph,
    u: str, a: str, v: str, b: str,
) -> int:
    """Label overlap of the edges connecting u to its neighbour a and v to b."""
    e1, e2 = g1.graph.elabel, g2.graph.elabel
    total = 0
    l1, l2 = e1.get((u, a)), e2.get((v, b))
    if l1 and l2:
        total += mset_card(l1 & l2)
    l1, l2 = e1.get((a, u)), e2.get((b, v))
    if l1 and l2:
        total += mset_card(l1 & l2)
    return total


def _neighbor_term(
    g1: PlanningEncodingGraph, g2: PlanningEncodingGraph, u: str, v: str
) -> float:
    """Value of the best pairing of u's and v's neighbourhoods.

    Pairs are weighted by the neighbours' base kernel plus the overlap of
    the edge labels through which they attach, so a neighbour reached via
    an init edge does not stand in for one reached via a goal edge.
    """
    n1 = g1.neighbors[u]
    n2 = g2.neighbors[v]
    if not n1 or not n2:
        return 0.0
    w = np.zeros((len(n1), len(n2)))
    for i, a in enumerate(n1):
        for j, b in enumerate(n2):
            if _compatible(g1, g2, a, b):
                w[i, j] = _node_kernel(g1.profiles[a], g2.profiles[b]) + _edge_overlap(
                    g1, g2, u, a, v, b
                )
    return _assign_value(w)


def kernel_neighborhood(
    g1: PlanningEncodingGraph,
    g2: PlanningEncodingGraph,
    gamma: float = 0.5,
) -> tuple[float, ObjectMapping]:
    """Base kernel refined with a one-hop neighbourhood term (weight `gamma`)."""

    def w(u: str, v: str) -> float:
        base = _node_kernel(g1.profiles[u], g2.profiles[v])
        if gamma == 0.0:
            return base
        return base + gamma * _neighbor_term(g1, g2, u, v)

    def self_w(u: str, v: str, ga, gb) -> float:
        base = _node_kernel(ga.profiles[u], gb.profiles[v])
        if gamma == 0.0:
            return base
        return base + gamma * _neighbor_term(ga, gb, u, v)

    total, mapping = _assign_concepts(g1, g2, w)
    self1 = _self_value(g1, self_w)
    self2 = _self_value(g2, self_w)
    denom = max(self1, self2)
    score = 1.0 if denom == 0 else total / denom
    return score, mapping


def kernel_with_forced(
    g1: PlanningEncodingGraph,
    g2: PlanningEncodingGraph,
    forced: dict[str, str],
    gamma: float = 0.5,
) -> ObjectMapping | None:
    """Neighbourhood-kernel mapping with some pairs pinned in advance.

    Returns None when a forced pair is sort-incompatible or not injective.
    """
    if len(set(forced.values())) != len(forced):
        return None
    for u, v in forced.items():
        if u not in g1.concept_sorts or v not in g2.concept_sorts:
            return None
        if g1.concept_sorts[u] != g2.concept_sorts[v]:
            return None

    def w(u: str, v: str) -> float:
        return _node_kernel(g1.profiles[u], g2.profiles[v]) + gamma * _neighbor_term(
            g1, g2, u, v
        )

    _, mapping = _assign_concepts(g1, g2, w, forced=forced)
    return mapping


def complete_mapping(
    mu: ObjectMapping,
    case_problem: PlanningProblem,
    problem: PlanningProblem,
) -> ObjectMapping | None:
    """Extend `mu` over all case objects with unused same-sort problem objects.

    Needed to encode a case plan whose actions mention objects outside the
    encoded init/goal facts.  Returns None when no injective completion
    exists.
    """
    table = dict(mu.as_dict)
    used = set(table.values())
    for obj in sorted(case_problem.objects):
        if obj in table:
            continue
        sort = case_problem.objects[obj]
        pick = next(
            (
                cand
                for cand in sorted(problem.objects)
                if problem.objects[cand] == sort and cand not in used
            ),
            None,
        )
        if pick is None:
            return None
        table[obj] = pick
        used.add(pick)
    return ObjectMapping.from_dict(table)


# -- exact brute-force oracle -------------------------------------------------

EXACT_GUARD = 9


def _fact_objects(problem: PlanningProblem) -> list[str]:
    objs: set[str] = set()
    for f in problem.init | problem.goals:
        objs.update(f.args)
    return sorted(objs)


def exact_match(
    case_problem: PlanningProblem, problem: PlanningProblem
) -> tuple[float, ObjectMapping]:
    """Maximum simil over all sort-respecting injective mappings.

    Branch-and-bound over the case's fact objects in name order, pruning on
    an optimistic match count (every fact with unmapped arguments could
    still match); the first maximiser found is the lexicographically
    smallest.  Guarded to at most EXACT_GUARD case objects.
    """
    case_objs = _fact_objects(case_problem)
    if len(case_objs) > EXACT_GUARD:
        raise TooLarge(
            f"{len(case_objs)} case objects exceed the exact-match guard of {EXACT_GUARD}"
        )
    candidates: dict[str, list[str]] = {}
    for obj in case_objs:
        sort = case_problem.objects[obj]
        targets = sorted(o for o, s in problem.objects.items() if s == sort)
        need = sum(1 for o in case_objs if case_problem.objects[o] == sort)
        if len(targets) < need:
            raise CannotInject(
                f"sort {sort!r}: {need} case objects but only {len(targets)} problem objects"
            )
        candidates[obj] = targets

    facts = [(f, True) for f in sorted(case_problem.goals)] + [
        (f, False) for f in sorted(case_problem.init)
    ]
    fact_objs = [sorted(set(f.args)) for f, _ in facts]
    remaining = [len(objs) for objs in fact_objs]
    facts_of: dict[str, list[int]] = {o: [] for o in case_objs}
    for i, objs in enumerate(fact_objs):
        for o in objs:
            facts_of[o].append(i)

    # injective mappings never collapse facts, so the denominator is fixed
    denom = len(problem.goals) + len(case_problem.init)
    if denom == 0:
        return 1.0, ObjectMapping.identity([])

    assignment: dict[str, str] = {}
    used: set[str] = set()
    matched = 0
    undecided = len(facts)
    best_num = -1
    best_pairs: tuple[tuple[str, str], ...] = ()

    def decide(i: int) -> int:
        fact, in_goal = facts[i]
        mapped = Fact(fact.predicate, tuple(assignment[a] for a in fact.args))
        pool = problem.goals if in_goal else problem.init
        return 1 if mapped in pool else 0

    def dfs(depth: int) -> None:
        nonlocal matched, undecided, best_num, best_pairs
        if best_num >= denom:
            return
        if depth == len(case_objs):
            if matched > best_num:
                best_num = matched
                best_pairs = tuple(sorted(assignment.items()))
            return
        obj = case_objs[depth]
        for target in candidates[obj]:
            if target in used:
                continue
            assignment[obj] = target
            used.add(target)
            newly = [i for i in facts_of[obj]]
            gained = 0
            for i in newly:
                remaining[i] -= 1
                if remaining[i] == 0:
                    gained += decide(i)
            matched += gained
            undecided -= sum(1 for i in newly if remaining[i] == 0)
            if matched + undecided > best_num:
                dfs(depth + 1)
            undecided += sum(1 for i in newly if remaining[i] == 0)
            matched -= gained
            for i in newly:
                remaining[i] += 1
            used.discard(target)
            del assignment[obj]

    dfs(0)
    mapping = ObjectMapping(best_pairs)
    return best_num / denom, mapping
