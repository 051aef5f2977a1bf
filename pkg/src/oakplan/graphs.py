"""Multiset-labeled directed graphs encoding a problem's init and goal facts.

Each fact p(c1..cn) becomes a small gadget: a relation vertex `I:p` (or
`G:p` for goals) with an edge to the first argument, plus a clique over the
arguments; edge labels carry the predicate, side and argument positions.
Gadgets are merged by graph union (shared vertices/edges join their label
multisets), so a concept vertex's label multiplicity counts how many
encoded facts mention that object.

Label multisets are plain `collections.Counter` values; `+` is the multiset
join, `&` the intersection, `|` the union.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

from .model import Fact, PlanningProblem

__all__ = [
    "LabeledGraph",
    "PlanningEncodingGraph",
    "DegreeSignature",
    "fact_encoding",
    "graph_union",
    "encode_problem",
    "degree_signature",
    "ds_similarity",
    "serialize_graph",
    "parse_graph",
    "serialize_signature",
    "parse_signature",
]

INIT_SIDE = "I"
GOAL_SIDE = "G"

CONCEPT = "concept"
INIT_RELATION = "init-relation"
GOAL_RELATION = "goal-relation"


def mset_card(m: Counter) -> int:
    return sum(m.values())


@dataclass
class LabeledGraph:
    """Directed graph with multiset labels on vertices and edges."""

    vlabel: dict[str, Counter] = field(default_factory=dict)
    elabel: dict[tuple[str, str], Counter] = field(default_factory=dict)

    @property
    def vertices(self) -> set[str]:
        return set(self.vlabel)

    @property
    def edges(self) -> set[tuple[str, str]]:
        return set(self.elabel)

    def size(self) -> int:
        return len(self.vlabel) + len(self.elabel)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return self.vlabel == other.vlabel and self.elabel == other.elabel


def _relation_vertex(side: str, predicate: str) -> str:
    return f"{side}:{predicate}"


def _edge_symbol(side: str, predicate: str, i: int, j: int) -> str:
    return f"{side}:{predicate}:{i},{j}"


def edge_family(symbol: str) -> str:
    """Family of an edge label symbol: predicate and side, positions folded."""
    side, predicate, _ = symbol.split(":", 2)
    return f"{side}:{predicate}"


def fact_encoding(fact: Fact, side: str, sorts: dict[str, str]) -> LabeledGraph:
    """Encoding gadget of one ground fact.

    Builds the clique over argument occurrences first, then merges repeated
    objects into one vertex, joining any parallel edge labels.
    """
    g = LabeledGraph()
    rel = _relation_vertex(side, fact.predicate)
    g.vlabel[rel] = Counter({rel: 1})
    n = len(fact.args)
    if n == 0:
        return g
    occ_edges: list[tuple[int, int]] = [(0, 1)]
    occ_edges += [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    names = [rel] + [f"c{k}" for k in range(1, n + 1)]
    occ_vlabel = {f"c{k}": Counter({sorts[fact.args[k - 1]]: 1}) for k in range(1, n + 1)}
    # merge occurrence vertices of the same object
    merged = {f"c{k}": fact.args[k - 1] for k in range(1, n + 1)}
    merged[rel] = rel
    for occ, label in occ_vlabel.items():
        v = merged[occ]
        if v in g.vlabel:
            g.vlabel[v] = g.vlabel[v] + label
        else:
            g.vlabel[v] = label
    for i, j in occ_edges:
        u, v = merged[names[i]], merged[names[j]]
        sym = _edge_symbol(side, fact.predicate, i, j)
        key = (u, v)
        if key in g.elabel:
            g.elabel[key] = g.elabel[key] + Counter({sym: 1})
        else:
            g.elabel[key] = Counter({sym: 1})
    return g


def _merge_into(acc: LabeledGraph, g: LabeledGraph) -> None:
    for v, c in g.vlabel.items():
        acc.vlabel[v] = acc.vlabel[v] + c if v in acc.vlabel else Counter(c)
    for e, c in g.elabel.items():
        acc.elabel[e] = acc.elabel[e] + c if e in acc.elabel else Counter(c)


def graph_union(g1: LabeledGraph, g2: LabeledGraph) -> LabeledGraph:
    """Union of two graphs; labels of shared elements are joined."""
    out = LabeledGraph(
        vlabel={v: Counter(c) for v, c in g1.vlabel.items()},
        elabel={e: Counter(c) for e, c in g1.elabel.items()},
    )
    _merge_into(out, g2)
    return out


@dataclass
class PlanningEncodingGraph:
    """Merged fact encodings of a problem's initial and goal facts."""

    graph: LabeledGraph
    roles: dict[str, str]
    concept_sorts: dict[str, str]

    @property
    def concept_vertices(self) -> tuple[str, ...]:
        return tuple(sorted(v for v, r in self.roles.items() if r == CONCEPT))

    def concept_sort_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for v in self.concept_vertices:
            s = self.concept_sorts[v]
            counts[s] = counts.get(s, 0) + 1
        return counts

    @cached_property
    def profiles(self) -> dict[str, tuple[Counter, Counter, Counter]]:
        """Per-vertex (label, joined in-edge labels, joined out-edge labels)."""
        ins: dict[str, Counter] = {v: Counter() for v in self.graph.vlabel}
        outs: dict[str, Counter] = {v: Counter() for v in self.graph.vlabel}
        for (u, v), label in self.graph.elabel.items():
            outs[u] = outs[u] + label
            ins[v] = ins[v] + label
        return {v: (self.graph.vlabel[v], ins[v], outs[v]) for v in self.graph.vlabel}

    @cached_property
    def neighbors(self) -> dict[str, tuple[str, ...]]:
        adj: dict[str, set[str]] = {v: set() for v in self.graph.vlabel}
        for (u, v) in self.graph.elabel:
            adj[u].add(v)
            adj[v].add(u)
        return {v: tuple(sorted(ns)) for v, ns in adj.items()}


def encode_problem(
    problem: PlanningProblem,
    init: frozenset[Fact] | None = None,
    goals: frozenset[Fact] | None = None,
) -> PlanningEncodingGraph:
    """Planning Encoding Graph of (init, goals); defaults to the problem's."""
    init = problem.init if init is None else init
    goals = problem.goals if goals is None else goals
    graph = LabeledGraph()
    roles: dict[str, str] = {}
    concept_sorts: dict[str, str] = {}
    for side, facts, role in ((INIT_SIDE, init, INIT_RELATION), (GOAL_SIDE, goals, GOAL_RELATION)):
        for fact in sorted(facts):
            _merge_into(graph, fact_encoding(fact, side, problem.objects))
            roles[_relation_vertex(side, fact.predicate)] = role
            for obj in fact.args:
                roles[obj] = CONCEPT
                concept_sorts[obj] = problem.objects[obj]
    return PlanningEncodingGraph(graph=graph, roles=roles, concept_sorts=concept_sorts)


@dataclass(frozen=True)
class DegreeSignature:
    """Per edge-label family, the descending label-weighted degree sequence."""

    families: tuple[tuple[str, tuple[int, ...]], ...]

    def family_map(self) -> dict[str, tuple[int, ...]]:
        return dict(self.families)

    @property
    def total_mass(self) -> float:
        return sum(sum(seq) for _, seq in self.families) / 2.0


def degree_signature(peg: PlanningEncodingGraph) -> DegreeSignature:
    degs: dict[str, dict[str, int]] = {}
    for (u, v), label in peg.graph.elabel.items():
        for sym, count in label.items():
            fam = edge_family(sym)
            per = degs.setdefault(fam, {})
            per[u] = per.get(u, 0) + count
            per[v] = per.get(v, 0) + count  # self-loops count both endpoints
    fams = tuple(
        (fam, tuple(sorted(per.values(), reverse=True)))
        for fam, per in sorted(degs.items())
    )
    return DegreeSignature(fams)


def ds_similarity(s1: DegreeSignature, s2: DegreeSignature) -> float:
    """Degree-sequence screen score in [0,1].

    Per family the min-sum of the descending degree sequences (halved) upper
    bounds the label-weighted edge overlap any common edge subgraph can
    achieve; the total is normalised by the larger graph's edge mass.
    """
    m1, m2 = s1.family_map(), s2.family_map()
    ub = 0.0
    for fam in set(m1) & set(m2):
        a, b = m1[fam], m2[fam]
        ub += sum(min(x, y) for x, y in zip(a, b)) / 2.0
    denom = max(s1.total_mass, s2.total_mass)
    if denom == 0:
        return 1.0
    return ub / denom


# -- canonical text serialization -------------------------------------------


def _fmt_mset(m: Counter) -> str:
    return ",".join(f"{sym}={count}" for sym, count in sorted(m.items()))


def _parse_mset(text: str) -> Counter:
    out: Counter = Counter()
    if text:
        for part in text.split(","):
            sym, _, count = part.rpartition("=")
            out[sym] = int(count)
    return out


def _vertex_order(peg: PlanningEncodingGraph) -> list[str]:
    relations = sorted(v for v, r in peg.roles.items() if r != CONCEPT)
    concepts = sorted(v for v, r in peg.roles.items() if r == CONCEPT)
    return relations + concepts


def serialize_graph(peg: PlanningEncodingGraph) -> str:
    """Deterministic text form: relation vertices, concept vertices, edges."""
    lines = [f"graph {len(peg.graph.vlabel)} {len(peg.graph.elabel)}"]
    for v in _vertex_order(peg):
        role = peg.roles[v]
        sort = peg.concept_sorts.get(v, "-")
        lines.append(f"v {v} {role} {sort} {_fmt_mset(peg.graph.vlabel[v])}")
    for (u, v) in sorted(peg.graph.elabel):
        lines.append(f"e {u} {v} {_fmt_mset(peg.graph.elabel[(u, v)])}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> PlanningEncodingGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("graph "):
        raise ValueError("malformed graph serialization")
    graph = LabeledGraph()
    roles: dict[str, str] = {}
    concept_sorts: dict[str, str] = {}
    for line in lines[1:]:
        kind, rest = line.split(" ", 1)
        if kind == "v":
            name, role, sort, label = rest.split(" ", 3)
            graph.vlabel[name] = _parse_mset(label)
            roles[name] = role
            if sort != "-":
                concept_sorts[name] = sort
        elif kind == "e":
            u, v, label = rest.split(" ", 2)
            graph.elabel[(u, v)] = _parse_mset(label)
        else:
            raise ValueError(f"malformed graph line {line!r}")
    return PlanningEncodingGraph(graph=graph, roles=roles, concept_sorts=concept_sorts)


def serialize_signature(sig: DegreeSignature) -> str:
    lines = [
        "%s %s" % (fam, " ".join(str(d) for d in seq)) for fam, seq in sig.families
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_signature(text: str) -> DegreeSignature:
    fams: list[tuple[str, tuple[int, ...]]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        fams.append((parts[0], tuple(int(x) for x in parts[1:])))
    return DegreeSignature(tuple(fams))
