"""Plan library: case records, insertion policies, causal-link decomposition.

A stored case pairs a relevance-filtered problem (initial state cut down to
the facts its plan actually needs) with the solution plan, plus the
precomputed encoding graph and degree signature the retrieval funnel needs.
Insertion scans the library for a case that already solves the same problem
(complete similarity 1 under a discovered mapping) with a plan at most as
long, and keeps only the shortest plan per problem.  `update_library`
extracts per-goal and interacting-goal subplans through causal links and
offers them to the library under the 5..200 size policy.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from .graphs import (
    DegreeSignature,
    PlanningEncodingGraph,
    degree_signature,
    ds_similarity,
    encode_problem,
    parse_graph,
    parse_signature,
    serialize_graph,
    serialize_signature,
)
from .matching import UnmappedObject, complete_simil, kernel_neighborhood
from .model import Fact, Plan, PlanningProblem, relevant_init_facts, validate
from .pddl import format_plan, parse_plan, parse_problem, unparse_domain, unparse_problem

__all__ = [
    "INIT_PRODUCER",
    "GOAL_CONSUMER",
    "MIN_SUBPLAN",
    "MAX_SUBPLAN",
    "InvalidPlan",
    "CausalLink",
    "CausalLinkSet",
    "PlanningCase",
    "IndexRecord",
    "Library",
    "causal_links",
    "goal_subplan",
    "insert_case",
    "check_and_insert",
    "update_library",
]

LIBRARY_VERSION = "OAKLIB v1"
INIT_PRODUCER = -1
GOAL_CONSUMER = -2
MIN_SUBPLAN = 5
MAX_SUBPLAN = 200


class InvalidPlan(ValueError):
    """The plan does not validate against the problem."""


@dataclass(frozen=True, order=True)
class CausalLink:
    producer: int  # action index, or INIT_PRODUCER
    fact: Fact
    consumer: int  # action index, or GOAL_CONSUMER


@dataclass(frozen=True)
class CausalLinkSet:
    links: frozenset[CausalLink]

    def producer_of(self, fact: Fact, consumer: int) -> int | None:
        for link in self.links:
            if link.fact == fact and link.consumer == consumer:
                return link.producer
        return None

    def __iter__(self):
        return iter(sorted(self.links))

    def __len__(self) -> int:
        return len(self.links)


def _producer_index(problem: PlanningProblem, plan: Plan, fact: Fact, consumer: int) -> int | None:
    """Last adder of `fact` before `consumer` with no intervening deleter."""
    for j in range(consumer - 1, -1, -1):
        action = plan.actions[j]
        if fact in action.add:
            return j
        if fact in action.delete:
            return None
    return INIT_PRODUCER if fact in problem.init else None


def causal_links(problem: PlanningProblem, plan: Plan) -> CausalLinkSet:
    """Producer links for every precondition occurrence and every goal."""
    links: set[CausalLink] = set()
    for i, action in enumerate(plan.actions):
        for fact in sorted(action.pre):
            producer = _producer_index(problem, plan, fact, i)
            if producer is None:
                raise InvalidPlan(f"precondition {fact} of step {i} is unsupported")
            links.add(CausalLink(producer, fact, i))
    end = len(plan.actions)
    for goal in sorted(problem.goals):
        producer = _producer_index(problem, plan, goal, end)
        if producer is None:
            raise InvalidPlan(f"goal {goal} is unsatisfied")
        links.add(CausalLink(producer, goal, GOAL_CONSUMER))
    return CausalLinkSet(frozenset(links))


def _support_closure(
    problem: PlanningProblem, plan: Plan, links: CausalLinkSet, targets
) -> tuple[tuple[int, ...], frozenset[Fact]]:
    """Action indices reachable backward from the targets' producers.

    Returns (sorted indices, target facts supported directly from I).
    """
    needed: set[int] = set()
    from_init: set[Fact] = set()
    stack: list[int] = []
    end = len(plan.actions)
    for fact in sorted(targets):
        producer = links.producer_of(fact, GOAL_CONSUMER)
        if producer is None:
            producer = _producer_index(problem, plan, fact, end)
        if producer is None:
            raise InvalidPlan(f"fact {fact} is not achieved by the plan")
        if producer == INIT_PRODUCER:
            from_init.add(fact)
        else:
            stack.append(producer)
    while stack:
        j = stack.pop()
        if j in needed:
            continue
        needed.add(j)
        for fact in plan.actions[j].pre:
            producer = links.producer_of(fact, j)
            if producer is not None and producer >= 0:
                stack.append(producer)
    return tuple(sorted(needed)), frozenset(from_init)


def _restrict_problem(
    problem: PlanningProblem,
    init: frozenset[Fact],
    goals: frozenset[Fact],
    plan: Plan,
    name: str,
) -> PlanningProblem:
    objs: set[str] = set()
    for fact in init | goals:
        objs.update(fact.args)
    for action in plan.actions:
        objs.update(action.args)
    objects = {o: problem.objects[o] for o in sorted(objs)}
    return problem.replace(name=name, init=init, goals=goals, objects=objects)


def _subcase_name(problem: PlanningProblem, goals) -> str:
    digest = hashlib.sha256(
        " ".join(sorted(str(g) for g in goals)).encode()
    ).hexdigest()[:8]
    return f"{problem.name}-sub-{digest}"


def goal_subplan(
    problem: PlanningProblem, plan: Plan, links: CausalLinkSet, goal: Fact
) -> tuple[PlanningProblem, Plan]:
    """The subplan of `plan` that satisfies `goal` from I, and its subproblem."""
    indices, from_init = _support_closure(problem, plan, links, [goal])
    subplan = Plan(tuple(plan.actions[j] for j in indices))
    sub_init = relevant_init_facts(problem, subplan) | from_init
    subproblem = _restrict_problem(
        problem, frozenset(sub_init), frozenset({goal}), subplan,
        _subcase_name(problem, [goal]),
    )
    return subproblem, subplan


# -- case records and the library -------------------------------------------


@dataclass(frozen=True)
class PlanningCase:
    """A stored problem/solution pair with precomputed retrieval structures."""

    id: str
    problem: PlanningProblem
    solution: Plan
    encoding: PlanningEncodingGraph
    signature: DegreeSignature
    attempts: int = 0
    successes: int = 0
    parent_id: str | None = None


@dataclass
class IndexRecord:
    id: str
    parent_id: str | None
    plan_len: int
    attempts: int
    successes: int
    sort_counts: dict[str, int]
    signature: DegreeSignature
    digest: str


def _case_id(problem_text: str, plan_text: str) -> str:
    return hashlib.sha256((problem_text + plan_text).encode()).hexdigest()[:12]


def _case_file_text(case: PlanningCase) -> str:
    parts = [
        LIBRARY_VERSION,
        f"id {case.id}",
        f"parent {case.parent_id or '-'}",
        "[domain]",
        unparse_domain(case.problem).rstrip("\n"),
        "[problem]",
        unparse_problem(case.problem).rstrip("\n"),
        "[plan]",
        format_plan(case.solution).rstrip("\n"),
        "[encoding]",
        serialize_graph(case.encoding).rstrip("\n"),
        "[signature]",
        serialize_signature(case.signature).rstrip("\n"),
        "[end]",
    ]
    return "\n".join(parts) + "\n"


def _parse_case_file(text: str, attempts: int, successes: int) -> PlanningCase:
    lines = text.splitlines()
    if not lines or lines[0] != LIBRARY_VERSION:
        raise ValueError(f"not a {LIBRARY_VERSION} case file")
    cid = lines[1].split(" ", 1)[1]
    parent = lines[2].split(" ", 1)[1]
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in lines[3:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    domain_text = "\n".join(sections["domain"]) + "\n"
    problem_text = "\n".join(sections["problem"]) + "\n"
    problem = parse_problem(domain_text, problem_text)
    plan = parse_plan(problem, "\n".join(sections["plan"]))
    encoding = parse_graph("\n".join(sections["encoding"]) + "\n")
    signature = parse_signature("\n".join(sections.get("signature", ())) + "\n")
    return PlanningCase(
        id=cid,
        problem=problem,
        solution=plan,
        encoding=encoding,
        signature=signature,
        attempts=attempts,
        successes=successes,
        parent_id=None if parent == "-" else parent,
    )


def _fmt_counts(counts: dict[str, int]) -> str:
    if not counts:
        return "-"
    return ",".join(f"{s}:{n}" for s, n in sorted(counts.items()))


def _parse_counts(text: str) -> dict[str, int]:
    if text == "-":
        return {}
    out: dict[str, int] = {}
    for part in text.split(","):
        sort, _, n = part.rpartition(":")
        out[sort] = int(n)
    return out


def _fmt_sig_inline(sig: DegreeSignature) -> str:
    if not sig.families:
        return "-"
    return ";".join(
        "%s=%s" % (fam, "|".join(str(d) for d in seq)) for fam, seq in sig.families
    )


def _parse_sig_inline(text: str) -> DegreeSignature:
    if text == "-":
        return DegreeSignature(())
    fams = []
    for part in text.split(";"):
        fam, _, seq = part.partition("=")
        fams.append((fam, tuple(int(x) for x in seq.split("|") if x)))
    return DegreeSignature(tuple(fams))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


class Library:
    """A plan library, on disk (one directory) or in memory (root=None).

    The index file carries everything the screening stage needs (degree
    signatures, per-sort object counts, plan lengths, usage statistics) so
    that full case files are only read for candidates that survive it.
    Writes are atomic per file; the on-disk layout supports one writer or
    many concurrent readers.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self.records: dict[str, IndexRecord] = {}
        self._cases: dict[str, PlanningCase] = {}
        if self.root is not None:
            if self.root.exists():
                self._load_index()
            else:
                self.root.mkdir(parents=True)
                self._flush_index()

    # -- index I/O -------------------------------------------------------

    def _index_path(self) -> Path:
        assert self.root is not None
        return self.root / "index.oak"

    def _case_path(self, cid: str) -> Path:
        assert self.root is not None
        return self.root / f"{cid}.case"

    def _load_index(self) -> None:
        path = self._index_path()
        if not path.exists():
            raise ValueError(f"{self.root} has no index.oak")
        lines = path.read_text().splitlines()
        if not lines or lines[0] != LIBRARY_VERSION:
            raise ValueError(f"{path} is not a {LIBRARY_VERSION} library index")
        for line in lines[1:]:
            if not line.strip():
                continue
            fields = line.split(" ")
            if fields[0] != "case":
                raise ValueError(f"malformed index line {line!r}")
            kv = dict(f.split("=", 1) for f in fields[2:])
            rec = IndexRecord(
                id=fields[1],
                parent_id=None if kv["parent"] == "-" else kv["parent"],
                plan_len=int(kv["plan_len"]),
                attempts=int(kv["attempts"]),
                successes=int(kv["successes"]),
                sort_counts=_parse_counts(kv["sorts"]),
                signature=_parse_sig_inline(kv["sig"]),
                digest=kv["digest"],
            )
            self.records[rec.id] = rec

    def _flush_index(self) -> None:
        if self.root is None:
            return
        lines = [LIBRARY_VERSION]
        for cid in sorted(self.records):
            rec = self.records[cid]
            lines.append(
                "case %s parent=%s plan_len=%d attempts=%d successes=%d sorts=%s sig=%s digest=%s"
                % (
                    rec.id,
                    rec.parent_id or "-",
                    rec.plan_len,
                    rec.attempts,
                    rec.successes,
                    _fmt_counts(rec.sort_counts),
                    _fmt_sig_inline(rec.signature),
                    rec.digest,
                )
            )
        _atomic_write(self._index_path(), "\n".join(lines) + "\n")

    # -- case access -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, cid: str) -> bool:
        return cid in self.records

    def case_ids(self) -> list[str]:
        return sorted(self.records)

    def load_case(self, cid: str) -> PlanningCase:
        case = self._cases.get(cid)
        if case is not None:
            rec = self.records[cid]
            if case.attempts != rec.attempts or case.successes != rec.successes:
                case = replace(case, attempts=rec.attempts, successes=rec.successes)
                self._cases[cid] = case
            return case
        rec = self.records[cid]
        text = self._case_path(cid).read_text()
        digest = hashlib.sha256(text.encode()).hexdigest()
        if digest != rec.digest:
            raise ValueError(f"case {cid} does not match its index digest")
        case = _parse_case_file(text, rec.attempts, rec.successes)
        self._cases[cid] = case
        return case

    def add(self, case: PlanningCase) -> None:
        text = _case_file_text(case)
        digest = hashlib.sha256(text.encode()).hexdigest()
        if self.root is not None:
            _atomic_write(self._case_path(case.id), text)
        self.records[case.id] = IndexRecord(
            id=case.id,
            parent_id=case.parent_id,
            plan_len=len(case.solution),
            attempts=case.attempts,
            successes=case.successes,
            sort_counts=case.problem.sort_counts(),
            signature=case.signature,
            digest=digest,
        )
        self._cases[case.id] = case
        self._flush_index()

    def remove(self, cid: str) -> None:
        self.records.pop(cid, None)
        self._cases.pop(cid, None)
        if self.root is not None:
            path = self._case_path(cid)
            if path.exists():
                path.unlink()
        self._flush_index()

    def record_usage(self, cid: str, success: bool) -> None:
        rec = self.records.get(cid)
        if rec is None:
            return
        rec.attempts += 1
        if success:
            rec.successes += 1
        self._flush_index()


# -- insertion policies ------------------------------------------------------


def _screen_candidates(library: Library, signature: DegreeSignature, limit: float, cap: int) -> list[str]:
    scored = [
        (ds_similarity(rec.signature, signature), cid)
        for cid, rec in library.records.items()
    ]
    if not scored:
        return []
    best = max(score for score, _ in scored)
    survivors = sorted(
        ((score, cid) for score, cid in scored if best - score <= limit),
        key=lambda t: (-t[0], t[1]),
    )
    return [cid for _, cid in survivors[:cap]]


def _perfect_matches(
    library: Library,
    case_problem: PlanningProblem,
    encoding: PlanningEncodingGraph,
    signature: DegreeSignature,
    *,
    limit: float,
    cap: int,
    gamma: float,
) -> list[str]:
    """Library cases whose problem perfectly matches `case_problem`."""
    matches: list[str] = []
    for cid in _screen_candidates(library, signature, limit, cap):
        stored = library.load_case(cid)
        _, mu = kernel_neighborhood(stored.encoding, encoding, gamma)
        try:
            score = complete_simil(stored.problem, case_problem, mu)
        except UnmappedObject:
            continue
        if score.value == 1.0:
            matches.append(cid)
    return matches


def _insert_with_dominance(
    library: Library,
    case_problem: PlanningProblem,
    plan: Plan,
    *,
    limit: float,
    cap: int,
    gamma: float,
    parent_id: str | None,
) -> bool:
    encoding = encode_problem(case_problem)
    signature = degree_signature(encoding)
    matches = _perfect_matches(
        library, case_problem, encoding, signature, limit=limit, cap=cap, gamma=gamma
    )
    dominated: list[str] = []
    for cid in matches:
        if library.records[cid].plan_len <= len(plan):
            return False
        dominated.append(cid)
    for cid in dominated:
        library.remove(cid)
    case = PlanningCase(
        id=_case_id(unparse_problem(case_problem), format_plan(plan)),
        problem=case_problem,
        solution=plan,
        encoding=encoding,
        signature=signature,
        parent_id=parent_id,
    )
    library.add(case)
    return True


def insert_case(
    library: Library,
    plan: Plan,
    problem: PlanningProblem,
    *,
    limit: float = 0.1,
    cap: int = 700,
    gamma: float = 0.5,
    parent_id: str | None = None,
) -> bool:
    """Store (problem restricted to its relevant init facts, plan).

    Refused when some existing case solves the same problem with a plan at
    most as long; replaces any strictly longer perfect matches.
    """
    if not validate(problem, plan).valid:
        raise InvalidPlan(f"plan does not solve {problem.name}")
    relevant = relevant_init_facts(problem, plan)
    case_problem = _restrict_problem(
        problem, relevant, problem.goals, plan, problem.name
    )
    return _insert_with_dominance(
        library, case_problem, plan,
        limit=limit, cap=cap, gamma=gamma, parent_id=parent_id,
    )


def check_and_insert(
    library: Library,
    subproblem: PlanningProblem,
    subplan: Plan,
    *,
    limit: float = 0.1,
    cap: int = 700,
    gamma: float = 0.5,
    parent_id: str | None = None,
) -> bool:
    """Size-bounded insertion used by library updates (5 <= |plan| <= 200)."""
    if not MIN_SUBPLAN <= len(subplan) <= MAX_SUBPLAN:
        return False
    return _insert_with_dominance(
        library, subproblem, subplan,
        limit=limit, cap=cap, gamma=gamma, parent_id=parent_id,
    )


def update_library(
    library: Library,
    plan: Plan,
    problem: PlanningProblem,
    extra_facts: frozenset[Fact] = frozenset(),
    *,
    limit: float = 0.1,
    cap: int = 700,
    gamma: float = 0.5,
    parent_id: str | None = None,
) -> int:
    """Decompose `plan` into per-goal and interacting-goal subplans and store them.

    `extra_facts` are additional facts worth their own subcases (for example
    unsupported facts left over from an earlier adaptation); each must be
    achieved by the plan to be extracted.  Returns the number of cases
    inserted.
    """
    links = causal_links(problem, plan)
    goals = sorted(problem.goals)
    closures = {
        g: _support_closure(problem, plan, links, [g]) for g in goals
    }

    candidates: list[frozenset[Fact]] = [frozenset({g}) for g in goals]
    for fact in sorted(extra_facts):
        if fact in problem.goals:
            continue
        if _producer_index(problem, plan, fact, len(plan.actions)) is None:
            continue  # the plan never achieves it; nothing to extract
        candidates.append(frozenset({fact}))

    # interacting goals: connected components of the shared-action graph
    parent: dict[Fact, Fact] = {g: g for g in goals}

    def find(x: Fact) -> Fact:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, g1 in enumerate(goals):
        for g2 in goals[i + 1:]:
            if set(closures[g1][0]) & set(closures[g2][0]):
                parent[find(g1)] = find(g2)
    components: dict[Fact, set[Fact]] = {}
    for g in goals:
        components.setdefault(find(g), set()).add(g)
    for group in components.values():
        if len(group) >= 2:
            candidates.append(frozenset(group))

    inserted = 0
    for goal_set in sorted(candidates, key=lambda s: sorted(str(f) for f in s)):
        indices, from_init = _support_closure(problem, plan, links, goal_set)
        subplan = Plan(tuple(plan.actions[j] for j in indices))
        sub_init = relevant_init_facts(problem, subplan) | from_init
        subproblem = _restrict_problem(
            problem,
            frozenset(sub_init),
            goal_set,
            subplan,
            _subcase_name(problem, goal_set),
        )
        if check_and_insert(
            library, subproblem, subplan,
            limit=limit, cap=cap, gamma=gamma, parent_id=parent_id,
        ):
            inserted += 1
    return inserted
