"""Reader, printer and grounder for a small PDDL subset.

Supported: STRIPS with typing, durative actions whose duration is a
constant or a static function, and numeric conditions/effects of the form
``(>= (f ..) c)``, ``(<= (f ..) c)``, ``(increase (f ..) c)`` and
``(decrease (f ..) c)``.  Anything else is rejected with
:class:`UnsupportedFeature` naming the offending construct.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .errors import GroundingError, ParseError, PlanningTypeError, UnsupportedFeature
from .task import (
    END, OVERALL, START, GroundAction, GroundTask, NumericCondition, NumericEffect, State, format_decimal,
)

SUPPORTED_REQUIREMENTS = frozenset(
    [":strips", ":typing", ":durative-actions", ":numeric-fluents", ":fluents"]
)
REJECTED_KEYWORDS = frozenset(
    [
        "not", "or", "imply", "forall", "exists", "when", "either",
        "assign", "scale-up", "scale-down", "preference", "=", ">", "<",
    ]
)
TIMINGS = {("at", "start"): START, ("over", "all"): OVERALL, ("at", "end"): END}


# -- s-expressions ---------------------------------------------------------


class Sym(str):
    """A lowercase symbol remembering where it appeared."""

    line: int
    col: int

    def __new__(cls, text: str, line: int = 0, col: int = 0):
        obj = super().__new__(cls, text.lower())
        obj.line, obj.col = line, col
        return obj


class SList(list):
    line: int = 0
    col: int = 0


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield ch, line, col
            i += 1
            col += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        yield text[i:j], line, col
        col += j - i
        i = j


def read_sexpr(text: str) -> SList:
    stack: list[SList] = []
    result = None
    for tok, line, col in tokenize(text):
        if tok == "(":
            node = SList()
            node.line, node.col = line, col
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            elif result is None:
                result = node
            else:
                raise ParseError("trailing input after top-level form", line, col)
        else:
            if not stack:
                raise ParseError(f"unexpected token '{tok}' outside a form", line, col)
            stack[-1].append(Sym(tok, line, col))
    if stack:
        raise ParseError("unbalanced '(' at end of input", stack[-1].line, stack[-1].col)
    if result is None:
        raise ParseError("empty input", 1, 1)
    return result


def _pos(node) -> tuple[int, int]:
    return getattr(node, "line", 0), getattr(node, "col", 0)


def _expect_list(node, what: str) -> SList:
    if not isinstance(node, list):
        raise ParseError(f"expected {what}, found '{node}'", *_pos(node))
    return node


def _expect_sym(node, what: str) -> Sym:
    if isinstance(node, list):
        raise ParseError(f"expected {what}, found a list", *_pos(node))
    return node


def _number(node) -> Fraction:
    try:
        return Fraction(str(_expect_sym(node, "number")))
    except ValueError:
        raise ParseError(f"expected a number, found '{node}'", *_pos(node)) from None


# -- models ----------------------------------------------------------------


@dataclass(frozen=True)
class TypedName:
    name: str
    type: str = "object"


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    params: tuple[TypedName, ...] = ()


@dataclass(frozen=True)
class NumericPre:
    op: str
    fluent: tuple
    value: Fraction
    timing: str = START


@dataclass(frozen=True)
class NumericEff:
    kind: str  # "increase" / "decrease"
    fluent: tuple
    value: Fraction
    timing: str = START


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[TypedName, ...] = ()
    durative: bool = False
    duration: object = None  # Fraction, a function atom tuple, or None
    pre_start: tuple = ()
    pre_overall: tuple = ()
    pre_end: tuple = ()
    add_start: tuple = ()
    add_end: tuple = ()
    del_start: tuple = ()
    del_end: tuple = ()
    num_pre: tuple[NumericPre, ...] = ()
    num_eff: tuple[NumericEff, ...] = ()


@dataclass(frozen=True)
class DomainModel:
    name: str
    requirements: tuple[str, ...] = ()
    types: tuple[TypedName, ...] = ()  # (type, parent)
    constants: tuple[TypedName, ...] = ()
    predicates: tuple[PredicateSchema, ...] = ()
    functions: tuple[PredicateSchema, ...] = ()
    actions: tuple[ActionSchema, ...] = ()

    def predicate(self, name: str) -> PredicateSchema | None:
        return next((p for p in self.predicates if p.name == name), None)

    def function(self, name: str) -> PredicateSchema | None:
        return next((f for f in self.functions if f.name == name), None)

    def to_pddl(self) -> str:
        out = [f"(define (domain {self.name})"]
        if self.requirements:
            out.append(f"  (:requirements {' '.join(self.requirements)})")
        if self.types:
            out.append(f"  (:types {_typed(self.types)})")
        if self.constants:
            out.append(f"  (:constants {_typed(self.constants)})")
        out.append("  (:predicates " + " ".join(_schema(p) for p in self.predicates) + ")")
        if self.functions:
            out.append("  (:functions " + " ".join(_schema(f) for f in self.functions) + ")")
        for a in self.actions:
            out.append(_action_pddl(a))
        out.append(")")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class ProblemModel:
    name: str
    domain_name: str
    objects: tuple[TypedName, ...] = ()
    init: tuple = ()
    init_numeric: tuple = ()  # ((fluent atom), Fraction)
    goal: tuple = ()
    metric: str | None = None  # "makespan" | "action-count"

    def to_pddl(self) -> str:
        out = [f"(define (problem {self.name})", f"  (:domain {self.domain_name})"]
        if self.objects:
            out.append(f"  (:objects {_typed(self.objects)})")
        init = [_atom(a) for a in self.init]
        init += [f"(= {_atom(f)} {_num(v)})" for f, v in self.init_numeric]
        out.append("  (:init " + " ".join(init) + ")")
        out.append("  (:goal (and " + " ".join(_atom(a) for a in self.goal) + "))")
        if self.metric == "makespan":
            out.append("  (:metric minimize (total-time))")
        elif self.metric == "action-count":
            out.append("  (:metric minimize (plan-length))")
        out.append(")")
        return "\n".join(out) + "\n"


def _num(v: Fraction) -> str:
    return format_decimal(v)


def _atom(atom: tuple) -> str:
    return "(" + " ".join(atom) + ")"


def _typed(items: Iterable[TypedName]) -> str:
    return " ".join(f"{t.name} - {t.type}" for t in items)


def _schema(p: PredicateSchema) -> str:
    return "(" + " ".join([p.name] + [f"{q.name} - {q.type}" for q in p.params]) + ")"


def _action_pddl(a: ActionSchema) -> str:
    params = " ".join(f"{p.name} - {p.type}" for p in a.params)
    if not a.durative:
        pre = [_atom(x) for x in a.pre_start]
        pre += [f"({n.op} {_atom(n.fluent)} {_num(n.value)})" for n in a.num_pre]
        eff = [_atom(x) for x in a.add_start] + [f"(not {_atom(x)})" for x in a.del_start]
        eff += [f"({n.kind} {_atom(n.fluent)} {_num(n.value)})" for n in a.num_eff]
        return (
            f"  (:action {a.name}\n    :parameters ({params})\n"
            f"    :precondition (and {' '.join(pre)})\n    :effect (and {' '.join(eff)}))"
        )
    words = {START: "at start", OVERALL: "over all", END: "at end"}
    dur = _num(a.duration) if isinstance(a.duration, Fraction) else _atom(a.duration)
    cond = [f"(at start {_atom(x)})" for x in a.pre_start]
    cond += [f"(over all {_atom(x)})" for x in a.pre_overall]
    cond += [f"(at end {_atom(x)})" for x in a.pre_end]
    cond += [f"({words[n.timing]} ({n.op} {_atom(n.fluent)} {_num(n.value)}))" for n in a.num_pre]
    eff = [f"(at start {_atom(x)})" for x in a.add_start]
    eff += [f"(at start (not {_atom(x)}))" for x in a.del_start]
    eff += [f"(at end {_atom(x)})" for x in a.add_end]
    eff += [f"(at end (not {_atom(x)}))" for x in a.del_end]
    eff += [f"({words[n.timing]} ({n.kind} {_atom(n.fluent)} {_num(n.value)}))" for n in a.num_eff]
    return (
        f"  (:durative-action {a.name}\n    :parameters ({params})\n"
        f"    :duration (= ?duration {dur})\n"
        f"    :condition (and {' '.join(cond)})\n    :effect (and {' '.join(eff)}))"
    )


# -- parsing ---------------------------------------------------------------


def _reject_keyword(node) -> None:
    if isinstance(node, list) and node and not isinstance(node[0], list):
        head = str(node[0])
        if head in REJECTED_KEYWORDS:
            raise UnsupportedFeature(head, *_pos(node))


def _typed_list(items: list) -> list[TypedName]:
    out: list[TypedName] = []
    pending: list[Sym] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, list):
            _reject_keyword(tok)
            raise ParseError("unexpected list in typed list", *_pos(tok))
        if tok == "-":
            if i + 1 >= len(items):
                raise ParseError("missing type after '-'", *_pos(tok))
            typ = items[i + 1]
            if isinstance(typ, list):
                _reject_keyword(typ)
                raise ParseError("expected a type name", *_pos(typ))
            if not pending:
                raise ParseError("type annotation without names", *_pos(tok))
            out.extend(TypedName(str(p), str(typ)) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(tok)
        i += 1
    out.extend(TypedName(str(p), "object") for p in pending)
    return out


def _section(form: SList, kind: str) -> tuple[str, list]:
    form = _expect_list(form, f"{kind} header")
    if len(form) < 2 or form[0] != "define":
        raise ParseError(f"expected (define ({kind} <name>) ...)", *_pos(form))
    header = _expect_list(form[1], f"({kind} <name>)")
    if len(header) != 2 or header[0] != kind:
        raise ParseError(f"expected ({kind} <name>)", *_pos(header))
    return str(header[1]), form[2:]


def parse_domain(text: str) -> DomainModel:
    name, sections = _section(read_sexpr(text), "domain")
    requirements: list[str] = []
    types: list[TypedName] = []
    constants: list[TypedName] = []
    predicates: list[PredicateSchema] = []
    functions: list[PredicateSchema] = []
    raw_actions: list[SList] = []
    for sec in sections:
        sec = _expect_list(sec, "domain section")
        if not sec:
            raise ParseError("empty domain section", *_pos(sec))
        key = str(sec[0])
        if key == ":requirements":
            for r in sec[1:]:
                if str(r) not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(str(r), *_pos(r))
                requirements.append(str(r))
        elif key == ":types":
            types = _typed_list(sec[1:])
        elif key == ":constants":
            constants = _typed_list(sec[1:])
        elif key == ":predicates":
            for p in sec[1:]:
                p = _expect_list(p, "predicate schema")
                predicates.append(PredicateSchema(str(p[0]), tuple(_typed_list(p[1:]))))
        elif key == ":functions":
            for f in sec[1:]:
                if not isinstance(f, list):
                    continue  # "- number" annotations
                functions.append(PredicateSchema(str(f[0]), tuple(_typed_list(f[1:]))))
        elif key in (":action", ":durative-action"):
            raw_actions.append(sec)
        elif key == ":derived":
            raise UnsupportedFeature("derived", *_pos(sec))
        else:
            raise UnsupportedFeature(key.lstrip(":"), *_pos(sec))
    domain = DomainModel(
        name, tuple(requirements), tuple(types), tuple(constants), tuple(predicates), tuple(functions)
    )
    actions = tuple(_parse_action(sec, domain) for sec in raw_actions)
    return DomainModel(
        name, tuple(requirements), tuple(types), tuple(constants),
        tuple(predicates), tuple(functions), actions,
    )


class _ActionBuilder:
    def __init__(self, domain: DomainModel, params: list[TypedName], action: str):
        self.domain = domain
        self.vars = {p.name for p in params}
        self.action = action
        self.buckets: dict[str, list] = {
            k: [] for k in ("pre_start", "pre_overall", "pre_end", "add_start", "add_end", "del_start", "del_end")
        }
        self.num_pre: list[NumericPre] = []
        self.num_eff: list[NumericEff] = []

    def atom(self, node, table: str = "predicate") -> tuple:
        node = _expect_list(node, "atom")
        _reject_keyword(node)
        if not node or isinstance(node[0], list):
            raise ParseError("malformed atom", *_pos(node))
        name = str(node[0])
        schema = self.domain.predicate(name) if table == "predicate" else self.domain.function(name)
        if schema is None:
            raise ParseError(f"undeclared {table} '{name}' in action {self.action}", *_pos(node))
        args = [_expect_sym(a, "argument") for a in node[1:]]
        if len(args) != len(schema.params):
            raise ParseError(
                f"{table} '{name}' expects {len(schema.params)} arguments, got {len(args)}", *_pos(node)
            )
        for a in args:
            if a.startswith("?") and a not in self.vars:
                raise ParseError(f"unbound variable '{a}' in action {self.action}", *_pos(a))
        return (name, *map(str, args))

    def condition(self, node, timing: str) -> None:
        node = _expect_list(node, "condition")
        if not node:
            return
        head = str(node[0]) if not isinstance(node[0], list) else ""
        if head == "and":
            for sub in node[1:]:
                self.condition(sub, timing)
        elif head in (">=", "<="):
            if len(node) != 3:
                raise ParseError(f"'{head}' takes two arguments", *_pos(node))
            fluent = self.atom(node[1], "function")
            self.num_pre.append(NumericPre(head, fluent, _number(node[2]), timing))
        else:
            bucket = {START: "pre_start", OVERALL: "pre_overall", END: "pre_end"}[timing]
            self.buckets[bucket].append(self.atom(node))

    def timed_condition(self, node) -> None:
        node = _expect_list(node, "timed condition")
        if not node:
            return
        if node[0] == "and":
            for sub in node[1:]:
                self.timed_condition(sub)
            return
        _reject_keyword(node)
        key = tuple(str(x) for x in node[:2]) if len(node) == 3 else ()
        if key not in TIMINGS:
            raise ParseError("expected (at start ..), (over all ..) or (at end ..)", *_pos(node))
        self.condition(node[2], TIMINGS[key])

    def effect(self, node, timing: str) -> None:
        node = _expect_list(node, "effect")
        if not node:
            return
        head = str(node[0]) if not isinstance(node[0], list) else ""
        if head == "and":
            for sub in node[1:]:
                self.effect(sub, timing)
        elif head == "not":
            if len(node) != 2:
                raise ParseError("'not' takes one argument", *_pos(node))
            self.buckets["del_" + timing].append(self.atom(node[1]))
        elif head in ("increase", "decrease"):
            if len(node) != 3:
                raise ParseError(f"'{head}' takes two arguments", *_pos(node))
            fluent = self.atom(node[1], "function")
            if isinstance(node[2], list):
                raise UnsupportedFeature("non-constant numeric effect", *_pos(node[2]))
            self.num_eff.append(NumericEff(head, fluent, _number(node[2]), timing))
        else:
            self.buckets["add_" + timing].append(self.atom(node))

    def timed_effect(self, node) -> None:
        node = _expect_list(node, "timed effect")
        if not node:
            return
        if node[0] == "and":
            for sub in node[1:]:
                self.timed_effect(sub)
            return
        _reject_keyword(node)
        key = tuple(str(x) for x in node[:2]) if len(node) == 3 else ()
        if key not in ((("at", "start")), ("at", "end")):
            raise ParseError("expected (at start ..) or (at end ..) effect", *_pos(node))
        self.effect(node[2], TIMINGS[key])

    def buckets_tuple(self) -> dict:
        return {k: tuple(dict.fromkeys(v)) for k, v in self.buckets.items()}


def _keywords(items: list, allowed: set[str]) -> dict:
    out = {}
    for i in range(0, len(items), 2):
        key = items[i]
        if isinstance(key, list) or not key.startswith(":"):
            raise ParseError("expected a :keyword", *_pos(key))
        if str(key) not in allowed:
            raise ParseError(f"unexpected keyword '{key}'", *_pos(key))
        if i + 1 >= len(items):
            raise ParseError(f"missing value for '{key}'", *_pos(key))
        out[str(key)] = items[i + 1]
    return out


def _parse_action(sec: SList, domain: DomainModel) -> ActionSchema:
    durative = sec[0] == ":durative-action"
    if len(sec) < 2:
        raise ParseError("action without a name", *_pos(sec))
    name = str(_expect_sym(sec[1], "action name"))
    allowed = {":parameters", ":duration", ":condition", ":effect"} if durative else {
        ":parameters", ":precondition", ":effect"
    }
    kw = _keywords(sec[2:], allowed)
    params = _typed_list(_expect_list(kw.get(":parameters", SList()), "parameter list"))
    b = _ActionBuilder(domain, params, name)
    duration = None
    if durative:
        if ":duration" not in kw:
            raise ParseError(f"durative action {name} lacks :duration", *_pos(sec))
        d = _expect_list(kw[":duration"], "duration constraint")
        if len(d) != 3 or d[0] != "=" or d[1] != "?duration":
            if d and not isinstance(d[0], list) and str(d[0]) in ("<=", ">="):
                raise UnsupportedFeature("duration inequality", *_pos(d))
            raise ParseError("expected (= ?duration <value>)", *_pos(d))
        duration = b.atom(d[2], "function") if isinstance(d[2], list) else _number(d[2])
        if ":condition" in kw:
            b.timed_condition(kw[":condition"])
        if ":effect" in kw:
            b.timed_effect(kw[":effect"])
    else:
        if ":precondition" in kw:
            b.condition(kw[":precondition"], START)
        if ":effect" in kw:
            b.effect(kw[":effect"], START)
    return ActionSchema(
        name, tuple(params), durative, duration, **b.buckets_tuple(),
        num_pre=tuple(b.num_pre), num_eff=tuple(b.num_eff),
    )


def parse_problem(text: str) -> ProblemModel:
    name, sections = _section(read_sexpr(text), "problem")
    domain_name = None
    objects: list[TypedName] = []
    init: list[tuple] = []
    init_numeric: list[tuple] = []
    goal: list[tuple] = []
    metric = None

    def ground_atom(node) -> tuple:
        node = _expect_list(node, "ground atom")
        _reject_keyword(node)
        if not node or isinstance(node[0], list):
            raise ParseError("malformed atom", *_pos(node))
        for a in node[1:]:
            a = _expect_sym(a, "object name")
            if a.startswith("?"):
                raise ParseError(f"variable '{a}' in ground atom", *_pos(a))
        return tuple(str(x) for x in node)

    def goal_atoms(node) -> None:
        node = _expect_list(node, "goal")
        if node and node[0] == "and":
            for sub in node[1:]:
                goal_atoms(sub)
        elif node:
            goal.append(ground_atom(node))

    for sec in sections:
        sec = _expect_list(sec, "problem section")
        if not sec:
            raise ParseError("empty problem section", *_pos(sec))
        key = str(sec[0])
        if key == ":domain":
            domain_name = str(sec[1])
        elif key == ":objects":
            objects = _typed_list(sec[1:])
        elif key == ":init":
            seen = set()
            for item in sec[1:]:
                item = _expect_list(item, "initial literal")
                if item and item[0] == "=":
                    if len(item) != 3:
                        raise ParseError("'=' takes two arguments", *_pos(item))
                    fluent = ground_atom(item[1])
                    if fluent in seen:
                        raise ParseError(f"numeric fluent {_atom(fluent)} assigned twice", *_pos(item))
                    seen.add(fluent)
                    init_numeric.append((fluent, _number(item[2])))
                elif item and item[0] == "at" and len(item) == 3 and isinstance(item[2], list):
                    raise UnsupportedFeature("timed initial literal", *_pos(item))
                else:
                    init.append(ground_atom(item))
        elif key == ":goal":
            if len(sec) != 2:
                raise ParseError("(:goal ...) takes one formula", *_pos(sec))
            goal_atoms(sec[1])
        elif key == ":metric":
            if len(sec) != 3 or sec[1] != "minimize":
                raise UnsupportedFeature("metric", *_pos(sec))
            expr = sec[2]
            target = str(expr[0]) if isinstance(expr, list) and len(expr) == 1 else str(expr)
            if target == "total-time":
                metric = "makespan"
            elif target == "plan-length":
                metric = "action-count"
            else:
                raise UnsupportedFeature(f"metric {target}", *_pos(sec))
        elif key in (":requirements",):
            continue
        else:
            raise UnsupportedFeature(key.lstrip(":"), *_pos(sec))
    if domain_name is None:
        raise ParseError("problem lacks (:domain ...)", *_pos(sections[0]) if sections else (1, 1))
    return ProblemModel(
        name, domain_name, tuple(objects), tuple(dict.fromkeys(init)), tuple(init_numeric),
        tuple(dict.fromkeys(goal)), metric,
    )


# -- grounding -------------------------------------------------------------


class _Types:
    def __init__(self, declared: Iterable[TypedName]):
        self.parent = {t.name: t.type for t in declared}
        self.parent.setdefault("object", None)

    def check(self, name: str) -> None:
        if name not in self.parent:
            raise GroundingError(f"undeclared type '{name}'")

    def is_subtype(self, sub: str, sup: str) -> bool:
        seen = set()
        while sub is not None and sub not in seen:
            if sub == sup:
                return True
            seen.add(sub)
            sub = self.parent.get(sub, "object" if sub != "object" else None)
        return sup == "object"


def _check_schema_types(schema: ActionSchema, domain: DomainModel, types: _Types, objects: dict) -> None:
    """Constants must fit the predicate argument type; variables must be compatible with it."""
    params = {p.name: p.type for p in schema.params}
    atoms = schema.pre_start + schema.pre_overall + schema.pre_end
    atoms += schema.add_start + schema.add_end + schema.del_start + schema.del_end
    for atom in atoms:
        pred = domain.predicate(atom[0])
        if pred is None or len(pred.params) != len(atom) - 1:
            continue
        for arg, param in zip(atom[1:], pred.params):
            if arg in params:
                t = params[arg]
                if not (types.is_subtype(t, param.type) or types.is_subtype(param.type, t)):
                    raise PlanningTypeError(
                        f"parameter {arg} - {t} of {schema.name} does not fit {param.type} in {_atom(atom)}"
                    )
            elif arg in objects and not types.is_subtype(objects[arg], param.type):
                raise PlanningTypeError(
                    f"constant '{arg}' of type {objects[arg]} does not fit {param.type} in {_atom(atom)}"
                )


def _substitute(atoms: Iterable[tuple], binding: dict) -> list[tuple]:
    return [(a[0], *(binding.get(x, x) for x in a[1:])) for a in atoms]


def _dynamic_names(domain: DomainModel) -> tuple[set, set]:
    preds, funcs = set(), set()
    for a in domain.actions:
        for bucket in (a.add_start, a.add_end, a.del_start, a.del_end):
            preds.update(x[0] for x in bucket)
        funcs.update(e.fluent[0] for e in a.num_eff)
    return preds, funcs


def ground(
    domain: DomainModel,
    problem: ProblemModel,
    prune: bool = True,
    resource_bounds: dict | None = None,
) -> GroundTask:
    """Instantiate every schema with every type-consistent object tuple.

    With ``prune`` set, actions needing a fact that is neither initially
    true nor added by any surviving action are dropped, repeating until
    nothing else can be removed.
    """
    if problem.domain_name != domain.name:
        raise GroundingError(f"problem is for domain '{problem.domain_name}', not '{domain.name}'")
    types = _Types(domain.types)
    objects: dict[str, str] = {}
    for obj in domain.constants + problem.objects:
        types.check(obj.type)
        objects[obj.name] = obj.type

    def check_atom(atom: tuple, schema: PredicateSchema | None, what: str) -> None:
        if schema is None:
            raise GroundingError(f"undeclared {what} in {_atom(atom)}")
        if len(schema.params) != len(atom) - 1:
            raise GroundingError(f"wrong arity in {_atom(atom)}")
        for arg, param in zip(atom[1:], schema.params):
            if arg not in objects:
                raise GroundingError(f"unknown object '{arg}' in {_atom(atom)}")
            if not types.is_subtype(objects[arg], param.type):
                raise PlanningTypeError(
                    f"object '{arg}' of type {objects[arg]} does not fit {param.type} in {_atom(atom)}"
                )

    for atom in problem.init + problem.goal:
        check_atom(atom, domain.predicate(atom[0]), "predicate")
    for schema in domain.actions:
        _check_schema_types(schema, domain, types, objects)
    for fluent, _ in problem.init_numeric:
        check_atom(fluent, domain.function(fluent[0]), "function")

    dyn_preds, dyn_funcs = _dynamic_names(domain)
    init_facts = set(problem.init)
    numeric_init = dict(problem.init_numeric)

    raw = []
    for schema in sorted(domain.actions, key=lambda s: s.name):
        for p in schema.params:
            types.check(p.type)
        domains = [sorted(o for o, t in objects.items() if types.is_subtype(t, p.type)) for p in schema.params]
        static_pre = [x for x in schema.pre_start + schema.pre_overall + schema.pre_end if x[0] not in dyn_preds]
        for combo in itertools.product(*domains):
            binding = {p.name: o for p, o in zip(schema.params, combo)}
            if prune and any(f not in init_facts for f in _substitute(static_pre, binding)):
                continue
            inst = _instantiate(schema, combo, binding, numeric_init, dyn_funcs)
            if inst is not None:
                raw.append(inst)

    if prune:
        raw = _prune_unreachable(raw, init_facts)

    fact_set = set(init_facts) | set(problem.goal)
    resource_set = {f for f, _ in problem.init_numeric if f[0] in dyn_funcs}
    for r in raw:
        for key in ("pre_start", "pre_overall", "pre_end", "add_start", "add_end", "del_start", "del_end"):
            fact_set.update(r[key])
        resource_set.update(n.fluent for n in r["num_pre"])
        resource_set.update(n.fluent for n in r["num_eff"])
    facts = tuple(sorted(fact_set))
    fid = {f: i for i, f in enumerate(facts)}
    resources = tuple(sorted(resource_set))
    rid = {f: i for i, f in enumerate(resources)}

    actions = []
    for i, r in enumerate(sorted(raw, key=lambda r: (r["name"], r["args"]))):
        ids = {k: frozenset(fid[x] for x in r[k]) for k in
               ("pre_start", "pre_overall", "pre_end", "add_start", "add_end", "del_start", "del_end")}
        # an atom both added and deleted at the same moment ends up true
        ids["del_start"] -= ids["add_start"]
        ids["del_end"] -= ids["add_end"]
        actions.append(GroundAction(
            id=i, name=r["name"], args=r["args"], **ids,
            num_pre=tuple(NumericCondition(rid[n.fluent], n.op, n.value, n.timing) for n in r["num_pre"]),
            num_eff=tuple(
                NumericEffect(rid[n.fluent], n.value if n.kind == "increase" else -n.value, n.timing)
                for n in r["num_eff"]
            ),
            duration=r["duration"], durative=r["durative"],
        ))
    numerics = tuple(Fraction(numeric_init.get(res, 0)) for res in resources)
    bounds = tuple((resource_bounds or {}).get(res) for res in resources)
    return GroundTask(
        facts=facts,
        actions=tuple(actions),
        init=State(frozenset(fid[f] for f in init_facts), numerics),
        goals=tuple(fid[g] for g in problem.goal),
        resources=resources,
        resource_bounds=bounds,
        name=problem.name,
        domain_name=domain.name,
        metric=problem.metric,
    )


# A plain (non-durative) action occupies one time unit; its conditions and
# effects all take place at its start.
UNIT_DURATION = Fraction(1)


def _instantiate(schema: ActionSchema, combo, binding, numeric_init, dyn_funcs) -> dict | None:
    duration = UNIT_DURATION
    if schema.durative:
        if isinstance(schema.duration, tuple):
            fluent = tuple(_substitute([schema.duration], binding)[0])
            if fluent[0] in dyn_funcs:
                raise UnsupportedFeature(f"dynamic duration {_atom(schema.duration)}")
            if fluent not in numeric_init:
                return None  # an undefined duration makes the action inapplicable
            duration = Fraction(numeric_init[fluent])
        else:
            duration = Fraction(schema.duration)
        if duration < 0:
            raise GroundingError(f"negative duration for {schema.name} {' '.join(combo)}")
    out = {
        "name": schema.name,
        "args": tuple(combo),
        "duration": duration,
        "durative": schema.durative,
        "num_pre": [NumericPre(n.op, tuple(_substitute([n.fluent], binding)[0]), n.value, n.timing)
                    for n in schema.num_pre],
        "num_eff": [NumericEff(n.kind, tuple(_substitute([n.fluent], binding)[0]), n.value, n.timing)
                    for n in schema.num_eff],
    }
    for key in ("pre_start", "pre_overall", "pre_end", "add_start", "add_end", "del_start", "del_end"):
        out[key] = frozenset(_substitute(getattr(schema, key), binding))
    return out


def _prune_unreachable(raw: list[dict], init_facts: set) -> list[dict]:
    while True:
        achievable = set(init_facts)
        for r in raw:
            achievable |= r["add_start"] | r["add_end"]
        kept = [r for r in raw if (r["pre_start"] | r["pre_overall"] | r["pre_end"]) <= achievable]
        if len(kept) == len(raw):
            return kept
        raw = kept


def load(domain_text: str, problem_text: str, **kwargs) -> GroundTask:
    return ground(parse_domain(domain_text), parse_problem(problem_text), **kwargs)


def load_files(domain_path, problem_path, **kwargs) -> GroundTask:
    with open(domain_path) as d, open(problem_path) as p:
        return load(d.read(), p.read(), **kwargs)
