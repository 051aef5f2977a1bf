"""PDDL reader/writer for the typed STRIPS subset (:strips :typing).

Accepted constructs: typed object/parameter lists, `and` conjunctions,
positive atomic preconditions, add/delete effects via `not`.  Everything
else (negative preconditions, conditional effects, quantifiers, fluents,
equality, ...) is rejected with a named UnsupportedFeature error.  Names
are case-preserving and compared case-sensitively.

`unparse_domain`/`unparse_problem` print canonically (sorted sections,
fixed layout) so that parse -> unparse -> parse is a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Action, Fact, OperatorSchema, Plan, PlanningProblem, SortError

__all__ = [
    "PddlSyntaxError",
    "UnsupportedFeature",
    "parse_problem",
    "parse_domain_only",
    "unparse_domain",
    "unparse_problem",
    "parse_plan",
    "format_plan",
]

ROOT_SORT = "object"


class PddlSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnsupportedFeature(ValueError):
    def __init__(self, feature: str, line: int = 0, column: int = 0):
        where = f" (line {line}, column {column})" if line else ""
        super().__init__(f"unsupported PDDL feature: {feature}{where}")
        self.feature = feature


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            col += 1
            i += 1
            continue
        if ch in "()":
            toks.append(_Tok(ch, line, col))
            col += 1
            i += 1
            continue
        start = i
        start_col = col
        while i < n and text[i] not in " \t\r\n();":
            i += 1
            col += 1
        toks.append(_Tok(text[start:i], line, start_col))
    return toks


def _read_sexpr(toks: list[_Tok], pos: int):
    """Return (node, next_pos); nodes are _Tok leaves or lists of nodes."""
    if pos >= len(toks):
        last = toks[-1] if toks else _Tok("", 1, 1)
        raise PddlSyntaxError("unexpected end of input", last.line, last.col)
    tok = toks[pos]
    if tok.text == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(toks):
                raise PddlSyntaxError("unbalanced '('", tok.line, tok.col)
            if toks[pos].text == ")":
                return items, pos + 1
            node, pos = _read_sexpr(toks, pos)
            items.append(node)
    if tok.text == ")":
        raise PddlSyntaxError("unbalanced ')'", tok.line, tok.col)
    return tok, pos + 1


def _parse_text(text: str) -> list:
    toks = _tokenize(text)
    node, pos = _read_sexpr(toks, 0)
    if pos != len(toks):
        extra = toks[pos]
        raise PddlSyntaxError("trailing tokens after top-level form", extra.line, extra.col)
    if not isinstance(node, list):
        raise PddlSyntaxError("expected a parenthesised form", node.line, node.col)
    return node


def _head(node) -> str:
    if isinstance(node, list) and node and isinstance(node[0], _Tok):
        return node[0].text.lower()
    return ""


def _where(node) -> tuple[int, int]:
    while isinstance(node, list) and node:
        node = node[0]
    if isinstance(node, _Tok):
        return node.line, node.col
    return 0, 0


def _sym(node, what: str) -> str:
    if not isinstance(node, _Tok):
        line, col = _where(node)
        raise PddlSyntaxError(f"expected {what}, found a list", line, col)
    return node.text


def _typed_list(nodes: list, default_sort: str) -> list[tuple[str, str]]:
    """Parse `a b - t c - u d` into [(a,t),(b,t),(c,u),(d,default)]."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(nodes):
        tok = nodes[i]
        name = _sym(tok, "a name")
        if name == "-":
            if i + 1 >= len(nodes):
                raise PddlSyntaxError("dangling '-' in typed list", tok.line, tok.col)
            sort = _sym(nodes[i + 1], "a sort name")
            out.extend((p, sort) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(name)
        i += 1
    out.extend((p, default_sort) for p in pending)
    return out


_KNOWN_UNSUPPORTED = {
    "forall", "exists", "when", "or", "imply", "=", "increase", "decrease",
    "assign", "scale-up", "scale-down",
}


def _parse_atom(node, *, allow_not: bool) -> tuple[str, tuple[str, ...], bool]:
    """Parse `(p a b)` or, when allowed, `(not (p a b))`."""
    line, col = _where(node)
    if not isinstance(node, list) or not node:
        raise PddlSyntaxError("expected an atom", line, col)
    head = _head(node)
    if head == "not":
        if not allow_not:
            raise UnsupportedFeature("negative precondition", line, col)
        if len(node) != 2:
            raise PddlSyntaxError("malformed (not ...)", line, col)
        pred, args, _ = _parse_atom(node[1], allow_not=False)
        return pred, args, True
    if head in _KNOWN_UNSUPPORTED:
        raise UnsupportedFeature(head, line, col)
    pred = _sym(node[0], "a predicate name")
    args = tuple(_sym(a, "an argument") for a in node[1:])
    return pred, args, False


def _flatten_and(node) -> list:
    if isinstance(node, list) and not node:
        return []
    if _head(node) == "and":
        out = []
        for child in node[1:]:
            out.extend(_flatten_and(child))
        return out
    return [node]


def _parse_condition(node, *, allow_not: bool) -> list[tuple[str, tuple[str, ...], bool]]:
    return [_parse_atom(n, allow_not=allow_not) for n in _flatten_and(node)]


@dataclass(frozen=True)
class Domain:
    """Parsed domain: everything a problem file needs for grounding."""

    name: str
    sorts: dict[str, str | None]
    constants: dict[str, str]
    predicates: dict[str, tuple[str, ...]]
    schemas: tuple[OperatorSchema, ...]


def parse_domain_only(domain_text: str) -> Domain:
    node = _parse_text(domain_text)
    line, col = _where(node)
    if _head(node) != "define" or len(node) < 2 or _head(node[1]) != "domain":
        raise PddlSyntaxError("expected (define (domain ...) ...)", line, col)
    name = _sym(node[1][1], "domain name")

    sorts: dict[str, str | None] = {ROOT_SORT: None}
    declared_sorts: set[str] = set()
    constants: dict[str, str] = {}
    predicates: dict[str, tuple[str, ...]] = {}
    schemas: list[OperatorSchema] = []

    for section in node[2:]:
        head = _head(section)
        sline, scol = _where(section)
        if head == ":requirements":
            for req in section[1:]:
                text = _sym(req, "a requirement").lower()
                if text not in (":strips", ":typing"):
                    raise UnsupportedFeature(f"requirement {text}", sline, scol)
        elif head == ":types":
            for sort, parent in _typed_list(section[1:], ROOT_SORT):
                if sort in declared_sorts and sorts[sort] != parent:
                    raise PddlSyntaxError(f"sort {sort!r} declared twice", sline, scol)
                sorts[sort] = parent
                declared_sorts.add(sort)
                sorts.setdefault(parent, None if parent == ROOT_SORT else ROOT_SORT)
        elif head == ":constants":
            for obj, sort in _typed_list(section[1:], ROOT_SORT):
                constants[obj] = sort
        elif head == ":predicates":
            for pnode in section[1:]:
                pline, pcol = _where(pnode)
                if not isinstance(pnode, list) or not pnode:
                    raise PddlSyntaxError("malformed predicate declaration", pline, pcol)
                pname = _sym(pnode[0], "a predicate name")
                params = _typed_list(pnode[1:], ROOT_SORT)
                predicates[pname] = tuple(sort for _, sort in params)
        elif head == ":action":
            schemas.append(_parse_action(section))
        elif head in (":functions", ":derived", ":durative-action", ":axiom"):
            raise UnsupportedFeature(head, sline, scol)
        else:
            raise PddlSyntaxError(f"unknown domain section {head!r}", sline, scol)

    for sort, parent in sorts.items():
        if parent is not None and parent not in sorts:
            sorts[parent] = None

    schemas.sort(key=lambda s: s.name)
    return Domain(name, sorts, constants, predicates, tuple(schemas))


def _parse_action(section) -> OperatorSchema:
    line, col = _where(section)
    if len(section) < 2:
        raise PddlSyntaxError("malformed :action", line, col)
    name = _sym(section[1], "an action name")
    params: tuple[tuple[str, str], ...] = ()
    pre: list[tuple[str, tuple[str, ...]]] = []
    add: list[tuple[str, tuple[str, ...]]] = []
    delete: list[tuple[str, tuple[str, ...]]] = []
    i = 2
    while i < len(section):
        key = _sym(section[i], "an :action keyword").lower()
        if i + 1 >= len(section):
            raise PddlSyntaxError(f"{key} without a body in action {name}", line, col)
        body = section[i + 1]
        if key == ":parameters":
            if not isinstance(body, list):
                raise PddlSyntaxError(":parameters expects a list", line, col)
            params = tuple(_typed_list(body, ROOT_SORT))
        elif key == ":precondition":
            for pred, args, neg in _parse_condition(body, allow_not=False):
                pre.append((pred, args))
        elif key == ":effect":
            for pred, args, neg in _parse_condition(body, allow_not=True):
                (delete if neg else add).append((pred, args))
        else:
            raise UnsupportedFeature(f"action keyword {key}", line, col)
        i += 2
    for var, _ in params:
        if not var.startswith("?"):
            raise PddlSyntaxError(f"parameter {var!r} of {name} must start with '?'", line, col)
    declared = {var for var, _ in params}
    for pred, args in pre + add + delete:
        for a in args:
            if a.startswith("?") and a not in declared:
                raise PddlSyntaxError(f"free variable {a!r} in action {name}", line, col)
    return OperatorSchema(name, params, tuple(pre), tuple(add), tuple(delete))


def parse_problem(domain_text: str, problem_text: str) -> PlanningProblem:
    """Parse a domain/problem pair into a ground PlanningProblem."""
    domain = parse_domain_only(domain_text)
    node = _parse_text(problem_text)
    line, col = _where(node)
    if _head(node) != "define" or len(node) < 2 or _head(node[1]) != "problem":
        raise PddlSyntaxError("expected (define (problem ...) ...)", line, col)
    pname = _sym(node[1][1], "problem name")

    objects: dict[str, str] = dict(domain.constants)
    init: list[Fact] = []
    goals: list[Fact] = []
    domain_ref = None

    for section in node[2:]:
        head = _head(section)
        sline, scol = _where(section)
        if head == ":domain":
            domain_ref = _sym(section[1], "a domain name")
        elif head == ":objects":
            for obj, sort in _typed_list(section[1:], ROOT_SORT):
                if obj in objects:
                    raise PddlSyntaxError(f"object {obj!r} declared twice", sline, scol)
                objects[obj] = sort
        elif head == ":init":
            for pred, args, _ in (_parse_atom(n, allow_not=False) for n in section[1:]):
                init.append(Fact(pred, args))
        elif head == ":goal":
            if len(section) != 2:
                raise PddlSyntaxError("malformed :goal", sline, scol)
            for pred, args, _ in _parse_condition(section[1], allow_not=False):
                goals.append(Fact(pred, args))
        elif head in (":metric", ":constraints"):
            raise UnsupportedFeature(head, sline, scol)
        else:
            raise PddlSyntaxError(f"unknown problem section {head!r}", sline, scol)

    if domain_ref is not None and domain_ref != domain.name:
        raise PddlSyntaxError(
            f"problem references domain {domain_ref!r} but got {domain.name!r}", line, col
        )
    for obj, sort in objects.items():
        if sort not in domain.sorts:
            raise SortError(f"object {obj!r} has undeclared sort {sort!r}")

    problem = PlanningProblem(
        name=pname,
        domain_name=domain.name,
        sorts=dict(domain.sorts),
        objects=objects,
        predicates=dict(domain.predicates),
        schemas=domain.schemas,
        init=frozenset(init),
        goals=frozenset(goals),
    )
    for fact in sorted(problem.init | problem.goals):
        problem.check_fact(fact)
    return problem


# -- canonical printing ----------------------------------------------------


def _fmt_typed(pairs: list[tuple[str, str]]) -> str:
    return " ".join(f"{name} - {sort}" for name, sort in pairs)


def _fmt_atom(pred: str, args: tuple[str, ...]) -> str:
    return "(%s)" % " ".join((pred,) + args) if args else f"({pred})"


def unparse_domain(problem: PlanningProblem) -> str:
    """Canonical domain text for a problem's domain declarations."""
    lines = [f"(define (domain {problem.domain_name})"]
    lines.append("  (:requirements :strips :typing)")
    sorts = [
        (s, p if p is not None else ROOT_SORT)
        for s, p in sorted(problem.sorts.items())
        if s != ROOT_SORT
    ]
    if sorts:
        lines.append(f"  (:types {_fmt_typed(sorts)})")
    preds = [
        "(%s)" % " ".join([name] + [f"?x{i} - {s}" for i, s in enumerate(sig)])
        for name, sig in sorted(problem.predicates.items())
    ]
    lines.append("  (:predicates %s)" % " ".join(preds))
    for sch in sorted(problem.schemas, key=lambda s: s.name):
        lines.append(f"  (:action {sch.name}")
        lines.append(f"    :parameters ({_fmt_typed(list(sch.params))})")
        pre = " ".join(_fmt_atom(p, a) for p, a in sorted(sch.pre))
        lines.append(f"    :precondition (and {pre})")
        effs = [_fmt_atom(p, a) for p, a in sorted(sch.add)]
        effs += ["(not %s)" % _fmt_atom(p, a) for p, a in sorted(sch.delete)]
        lines.append("    :effect (and %s))" % " ".join(effs))
    lines.append(")")
    return "\n".join(lines) + "\n"


def unparse_problem(problem: PlanningProblem) -> str:
    """Canonical problem text (sorted objects, init and goals)."""
    lines = [f"(define (problem {problem.name})"]
    lines.append(f"  (:domain {problem.domain_name})")
    objs = sorted(problem.objects.items())
    if objs:
        lines.append(f"  (:objects {_fmt_typed(objs)})")
    init = " ".join(str(f) for f in sorted(problem.init))
    lines.append(f"  (:init {init})")
    goal = " ".join(str(f) for f in sorted(problem.goals))
    lines.append(f"  (:goal (and {goal}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


# -- IPC plan format ---------------------------------------------------------


def parse_plan(problem: PlanningProblem, text: str) -> Plan:
    """Read a plan in IPC format: one `(action arg ...)` per line."""
    actions: list[Action] = []
    for raw in text.splitlines():
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise PddlSyntaxError(f"malformed plan step {raw!r}", 0, 0)
        parts = line[1:-1].split()
        if not parts:
            raise PddlSyntaxError("empty plan step", 0, 0)
        actions.append(problem.instantiate(parts[0], tuple(parts[1:])))
    return Plan(tuple(actions))


def format_plan(plan: Plan) -> str:
    """Write a plan in IPC format with a cost trailer."""
    lines = [a.ident for a in plan.actions]
    lines.append(f"; cost = {len(plan.actions)}")
    return "\n".join(lines) + "\n"
