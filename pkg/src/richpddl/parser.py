"""Parser for PDDL2.1 durative-action domains extended with interior time points.

Accepted additions over PDDL2.1::

    timespec  ::= "start" | "end" | "(" "+" "start" numexpr ")" | "(" "-" "end" numexpr ")"
    timedcond ::= "(" "at" timespec cond ")" | "(" "over" "all" cond ")"
                | "(" "over" "[" timespec timespec "]" cond ")"
    timedeff  ::= "(" "at" timespec eff ")" | "(" "over" "[" timespec timespec "]" atom ")"

Identifiers are case-insensitive and normalised to lower case.  Numbers are
read as exact rationals (``0.001`` is ``1/1000``; ``1/3`` is accepted too).
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from .model import (
    AT_END,
    AT_START,
    ARITH_OPS,
    COMPARISON_OPS,
    END,
    NUMERIC_EFFECT_OPS,
    OVER_ALL,
    START,
    BinOp,
    Comparison,
    Condition,
    Const,
    Domain,
    DurativeAction,
    FluentRef,
    Literal,
    NumericEffect,
    PlanStep,
    Problem,
    TimedCondition,
    TimedEffect,
    TimeInterval,
    TimePoint,
    sort_plan,
)

MAX_DEPTH = 200

KNOWN_REQUIREMENTS = {
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":equality",
    ":fluents",
    ":numeric-fluents",
    ":durative-actions",
    ":duration-inequalities",
    ":timed-initial-literals",
}


@dataclass(frozen=True)
class SourceSpan:
    offset: int
    line: int
    column: int
    length: int

    def __str__(self):
        return f"{self.line}:{self.column}"


class ParseError(Exception):
    def __init__(self, span: SourceSpan, expected: str, found: str, filename: str = None):
        self.span = span
        self.expected = expected
        self.found = found
        self.filename = filename
        super().__init__(self._message())

    def _message(self):
        where = f"{self.filename}:{self.span}" if self.filename else str(self.span)
        return f"{where}: expected {self.expected}, found {self.found}"

    def with_filename(self, filename):
        return ParseError(self.span, self.expected, self.found, filename)


class UnknownRequirementWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# lexing


@dataclass(frozen=True)
class Token:
    kind: str  # "(", ")", "[", "]", "atom"
    text: str
    span: SourceSpan


_DELIMS = "()[];"


def tokenize(text: str) -> List[Token]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c.isspace():
            i, col = i + 1, col + 1
            continue
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        if c in "()[]":
            tokens.append(Token(c, c, SourceSpan(i, line, col, 1)))
            i, col = i + 1, col + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in _DELIMS:
            j += 1
        tokens.append(Token("atom", text[i:j], SourceSpan(i, line, col, j - i)))
        col += j - i
        i = j
    return tokens


# ---------------------------------------------------------------------------
# s-expressions


@dataclass
class Node:
    span: SourceSpan
    text: Optional[str] = None  # set for atoms
    items: Optional[list] = None  # set for lists
    bracket: bool = False

    @property
    def is_atom(self):
        return self.text is not None

    @property
    def word(self):
        """Lower-cased atom text, or None for lists."""
        return self.text.lower() if self.text is not None else None

    def describe(self):
        if self.is_atom:
            return repr(self.text)
        if self.bracket:
            return "'['"
        return "'('"


def _end_span(text):
    lines = text.split("\n")
    return SourceSpan(len(text), len(lines), len(lines[-1]) + 1, 0)


def read_sexprs(text: str) -> List[Node]:
    """Read all top-level s-expressions; iterative so depth cannot overflow."""
    stack = [Node(SourceSpan(0, 1, 1, 0), items=[])]
    for tok in tokenize(text):
        if tok.kind in "([":
            if len(stack) > MAX_DEPTH:
                raise ParseError(tok.span, f"nesting depth at most {MAX_DEPTH}", repr(tok.text))
            node = Node(tok.span, items=[], bracket=tok.kind == "[")
            stack[-1].items.append(node)
            stack.append(node)
        elif tok.kind in ")]":
            want = "]" if stack[-1].bracket else ")"
            if len(stack) == 1 or tok.kind != want:
                expected = "an atom or '('" if len(stack) == 1 else repr(want)
                raise ParseError(tok.span, expected, repr(tok.text))
            node = stack.pop()
            s = node.span
            node.span = SourceSpan(s.offset, s.line, s.column, tok.span.offset + 1 - s.offset)
        else:
            stack[-1].items.append(Node(tok.span, text=tok.text))
    if len(stack) > 1:
        want = "']'" if stack[-1].bracket else "')'"
        raise ParseError(_end_span(text), want, "end of input")
    return stack[0].items


# ---------------------------------------------------------------------------
# helpers

_NUMBER = re.compile(r"^-?\d+(\.\d+)?(/\d+)?$")
_NAME = re.compile(r"^[a-z][a-z0-9_\-]*$")


def _err(node: Node, expected: str):
    return ParseError(node.span, expected, node.describe())


def _number(node: Node) -> Optional[Fraction]:
    if not node.is_atom or not _NUMBER.match(node.text):
        return None
    try:
        return Fraction(node.text)
    except (ValueError, ZeroDivisionError):
        return None


def _name(node: Node, what="a name") -> str:
    if not node.is_atom or not _NAME.match(node.word):
        raise _err(node, what)
    return node.word


def _variable(node: Node) -> str:
    if not node.is_atom or not node.word.startswith("?") or not _NAME.match(node.word[1:]):
        raise _err(node, "a variable")
    return node.word


def _list(node: Node, what="'('") -> list:
    if node.is_atom or node.bracket:
        raise _err(node, what)
    return node.items


def _head(node: Node) -> Optional[str]:
    if node.is_atom or node.bracket or not node.items or not node.items[0].is_atom:
        return None
    return node.items[0].word


def _arity(node: Node, n: int, what: str):
    items = node.items
    if len(items) != n:
        bad = items[n] if len(items) > n else None
        if bad is not None:
            raise _err(bad, f"')' closing {what}")
        end = SourceSpan(node.span.offset + node.span.length - 1, node.span.line, node.span.column, 1)
        raise ParseError(end, f"{n - 1} argument(s) to {what}", "')'")


def _typed_list(items: List[Node], element) -> list:
    """Parse ``a b - t c`` into ``[(a, t), (b, t), (c, object)]``."""
    out, pending = [], []
    i = 0
    while i < len(items):
        node = items[i]
        if node.is_atom and node.text == "-":
            if i + 1 >= len(items):
                raise _err(node, "a type name after '-'")
            typ = items[i + 1]
            if not typ.is_atom:
                if _head(typ) == "either":
                    raise _err(typ, "a simple type (either-types are not supported)")
                raise _err(typ, "a type name")
            tname = _name(typ, "a type name")
            if not pending:
                raise _err(node, "a name before '-'")
            out.extend((p, tname) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(element(node))
        i += 1
    out.extend((p, "object") for p in pending)
    return out


# ---------------------------------------------------------------------------
# domain conversion


class _Scope:
    """Declarations visible while converting one action (or a problem)."""

    def __init__(self, predicates=None, functions=None, variables=None, action=None):
        self.predicates = predicates
        self.functions = functions
        self.variables = variables
        self.action = action


def _term(node: Node, scope: _Scope) -> str:
    if node.is_atom and node.word.startswith("?"):
        var = _variable(node)
        if var == "?duration":
            raise _err(node, "a parameter (?duration is only allowed in :duration)")
        if scope.variables is not None and var not in scope.variables:
            raise _err(node, "a declared parameter")
        return var
    return _name(node, "a term")


def _numexpr(node: Node, scope: _Scope, depth=0):
    if depth > MAX_DEPTH:
        raise _err(node, "a shallower expression")
    value = _number(node)
    if value is not None:
        return Const(value)
    if node.is_atom:
        if node.word.startswith("?"):
            _term(node, scope)
            raise _err(node, "a numeric expression (object variables are not numbers)")
        name = _name(node, "a numeric expression")
        return _fluent(name, [], node, scope)
    items = _list(node, "a numeric expression")
    head = _head(node)
    if head is None:
        raise _err(node if not items else items[0], "an operator or function name")
    if head in ARITH_OPS:
        if head == "-" and len(items) == 2:
            return BinOp("-", Const(Fraction(0)), _numexpr(items[1], scope, depth + 1))
        _arity(node, 3, head)
        return BinOp(head, _numexpr(items[1], scope, depth + 1), _numexpr(items[2], scope, depth + 1))
    name = _name(items[0], "an operator or function name")
    return _fluent(name, items[1:], node, scope)


def _fluent(name, arg_nodes, node, scope: _Scope) -> FluentRef:
    args = tuple(_term(a, scope) for a in arg_nodes)
    if scope.functions is not None:
        if name not in scope.functions:
            raise _err(node, "a declared function")
        if len(scope.functions[name]) != len(args):
            raise ParseError(node.span, f"{len(scope.functions[name])} argument(s) to {name}", f"{len(args)}")
    return FluentRef(name, args)


def _atom_literal(node: Node, scope: _Scope, positive=True) -> Literal:
    items = _list(node, "a literal")
    if not items:
        raise _err(node, "a predicate name")
    name = _name(items[0], "a predicate name")
    args = tuple(_term(a, scope) for a in items[1:])
    if scope.predicates is not None:
        if name not in scope.predicates:
            raise _err(items[0], "a declared predicate")
        if len(scope.predicates[name]) != len(args):
            raise ParseError(node.span, f"{len(scope.predicates[name])} argument(s) to {name}", f"{len(args)}")
    return Literal(name, args, positive)


def _literal(node: Node, scope: _Scope) -> Literal:
    if _head(node) == "not":
        _arity(node, 2, "not")
        return _atom_literal(node.items[1], scope, positive=False)
    return _atom_literal(node, scope)


def _condition_part(node: Node, scope: _Scope):
    head = _head(node)
    if head in COMPARISON_OPS:
        _arity(node, 3, head)
        return Comparison(head, _numexpr(node.items[1], scope), _numexpr(node.items[2], scope))
    if head in ("or", "imply", "forall", "exists", "when"):
        raise _err(node.items[0], "a conjunctive condition")
    return _literal(node, scope)


def _condition(node: Node, scope: _Scope) -> Condition:
    if _head(node) == "and":
        return Condition(tuple(_condition_part(n, scope) for n in node.items[1:]))
    _list(node, "a condition")
    return Condition((_condition_part(node, scope),))


def _timespec(node: Node, scope: _Scope) -> TimePoint:
    if node.is_atom:
        if node.word == START:
            return AT_START
        if node.word == END:
            return AT_END
        raise _err(node, "'start', 'end', '(+ start e)' or '(- end e)'")
    items = _list(node, "a time specifier")
    head = _head(node)
    if head in ("+", "-") and len(items) == 3 and items[1].is_atom:
        anchor = items[1].word
        if (head, anchor) in (("+", START), ("-", END)):
            return TimePoint(anchor, _numexpr(items[2], scope))
    raise _err(node, "'start', 'end', '(+ start e)' or '(- end e)'")


def _interval(node: Node, scope: _Scope) -> TimeInterval:
    if not node.bracket or len(node.items) != 2:
        raise _err(node, "'[' timespec timespec ']'")
    return TimeInterval(_timespec(node.items[0], scope), _timespec(node.items[1], scope))


def _timed_when(node: Node, scope: _Scope):
    """Return (time, body-node) for an ``at``/``over`` form."""
    head = _head(node)
    if head == "at":
        _arity(node, 3, "at")
        return _timespec(node.items[1], scope), node.items[2]
    if head == "over":
        _arity(node, 3, "over")
        spec = node.items[1]
        if spec.is_atom:
            if spec.word != "all":
                raise _err(spec, "'all' or '['")
            return OVER_ALL, node.items[2]
        return _interval(spec, scope), node.items[2]
    raise _err(node if node.is_atom or not node.items else node.items[0], "'at' or 'over'")


def _conjuncts(node: Node) -> List[Node]:
    if _head(node) == "and":
        return node.items[1:]
    _list(node)
    return [node]


def _timed_conditions(node: Node, scope: _Scope):
    out = []
    for item in _conjuncts(node):
        when, body = _timed_when(item, scope)
        out.append(TimedCondition(when, _condition(body, scope)))
    return out


def _effect_atoms(node: Node, scope: _Scope):
    if _head(node) == "and":
        atoms = []
        for n in node.items[1:]:
            atoms.extend(_effect_atoms(n, scope))
        return atoms
    head = _head(node)
    if head in NUMERIC_EFFECT_OPS:
        _arity(node, 3, head)
        target = node.items[1]
        if target.is_atom:
            fluent = _fluent(_name(target, "a function"), [], target, scope)
        else:
            titems = _list(target, "a function term")
            if not titems:
                raise _err(target, "a function name")
            fluent = _fluent(_name(titems[0], "a function name"), titems[1:], target, scope)
        return [NumericEffect(head, fluent, _numexpr(node.items[2], scope))]
    if head in ("when", "forall"):
        raise _err(node.items[0], "a simple effect")
    return [_literal(node, scope)]


def _timed_effects(node: Node, scope: _Scope):
    out = []
    for item in _conjuncts(node):
        when, body = _timed_when(item, scope)
        atoms = _effect_atoms(body, scope)
        if isinstance(when, TimeInterval):
            for atom in atoms:
                if not isinstance(atom, Literal) or not atom.positive:
                    raise _err(body, "a positive literal in an interval effect")
        out.extend(TimedEffect(when, atom) for atom in atoms)
    return out


def _durative_action(node: Node, predicates, functions) -> DurativeAction:
    items = node.items
    if len(items) < 2:
        raise _err(node, "an action name")
    name = _name(items[1], "an action name")
    fields = {}
    i = 2
    while i < len(items):
        key = items[i]
        if not key.is_atom or key.word not in (":parameters", ":duration", ":condition", ":effect"):
            raise _err(key, "':parameters', ':duration', ':condition' or ':effect'")
        if key.word in fields:
            raise _err(key, f"a single {key.word}")
        if i + 1 >= len(items):
            raise _err(key, f"a value after {key.word}")
        fields[key.word] = items[i + 1]
        i += 2
    params = []
    if ":parameters" in fields:
        params = _typed_list(_list(fields[":parameters"], "a parameter list"), _variable)
        names = [p for p, _ in params]
        if len(set(names)) != len(names):
            raise _err(fields[":parameters"], "distinct parameter names")
    scope = _Scope(predicates, functions, {p for p, _ in params}, name)
    if ":duration" not in fields:
        raise _err(items[1], "a :duration")
    dur = fields[":duration"]
    if _head(dur) != "=" or len(dur.items) != 3 or not dur.items[1].is_atom or dur.items[1].word != "?duration":
        raise _err(dur, "(= ?duration <expression>)")
    duration = _numexpr(dur.items[2], scope)
    conditions = _timed_conditions(fields[":condition"], scope) if ":condition" in fields else []
    effects = _timed_effects(fields[":effect"], scope) if ":effect" in fields else []
    return DurativeAction(name, tuple(params), duration, tuple(conditions), tuple(effects))


def _declarations(items: List[Node], what: str):
    out = []
    i = 0
    while i < len(items):
        node = items[i]
        if node.is_atom and node.text == "-":
            # ``- number`` after a function skeleton
            if i + 1 >= len(items) or not items[i + 1].is_atom:
                raise _err(node, "a type after '-'")
            i += 2
            continue
        decl = _list(node, f"a {what} declaration")
        if not decl:
            raise _err(node, f"a {what} name")
        name = _name(decl[0], f"a {what} name")
        params = tuple(_typed_list(decl[1:], _variable))
        out.append((name, params))
        i += 1
    return out


def _check_define(nodes: List[Node], text: str, kind: str) -> Node:
    if not nodes:
        raise ParseError(_end_span(text), "'(define'", "end of input")
    if len(nodes) > 1:
        raise _err(nodes[1], "end of input")
    root = nodes[0]
    if _head(root) != "define":
        raise _err(root if root.is_atom or not root.items else root.items[0], "'(define'")
    if len(root.items) < 2 or _head(root.items[1]) != kind:
        bad = root.items[1] if len(root.items) > 1 else root
        raise _err(bad, f"'({kind} <name>)'")
    _arity(root.items[1], 2, kind)
    return root


def parse_domain(text: str, filename: str = None) -> Domain:
    """Parse a domain file into a :class:`Domain`."""
    try:
        return _parse_domain(text)
    except ParseError as exc:
        if filename:
            raise exc.with_filename(filename) from None
        raise


def _parse_domain(text: str) -> Domain:
    root = _check_define(read_sexprs(text), text, "domain")
    name = _name(root.items[1].items[1], "a domain name")
    requirements, types, constants = [], [], []
    predicates, functions, actions = {}, {}, []
    pred_list, func_list = [], []
    seen = set()
    for section in root.items[2:]:
        head = _head(section)
        if head is None or not head.startswith(":"):
            raise _err(section, "a domain section")
        if head in seen and head != ":durative-action":
            raise _err(section.items[0], f"a single {head} section")
        seen.add(head)
        body = section.items[1:]
        if head == ":requirements":
            for req in body:
                if not req.is_atom or not req.word.startswith(":"):
                    raise _err(req, "a requirement flag")
                if req.word not in KNOWN_REQUIREMENTS:
                    warnings.warn(f"{req.span}: unknown requirement {req.word}", UnknownRequirementWarning)
                requirements.append(req.word)
        elif head == ":types":
            types = _typed_list(body, lambda n: _name(n, "a type name"))
        elif head == ":constants":
            constants = _typed_list(body, lambda n: _name(n, "a constant name"))
        elif head == ":predicates":
            for pname, params in _declarations(body, "predicate"):
                if pname in predicates:
                    raise _err(section, f"a single declaration of {pname}")
                predicates[pname] = params
                pred_list.append((pname, params))
        elif head == ":functions":
            for fname, params in _declarations(body, "function"):
                if fname in functions:
                    raise _err(section, f"a single declaration of {fname}")
                functions[fname] = params
                func_list.append((fname, params))
        elif head == ":durative-action":
            action = _durative_action(section, predicates, functions)
            if any(a.name == action.name for a in actions):
                raise _err(section.items[1], f"a single action named {action.name}")
            actions.append(action)
        else:
            raise _err(section.items[0], "a supported domain section")
    return Domain(
        name,
        tuple(requirements),
        tuple((t, p) for t, p in types),
        tuple(constants),
        tuple(pred_list),
        tuple(func_list),
        tuple(actions),
    )


# ---------------------------------------------------------------------------
# problems


def parse_problem(text: str, filename: str = None) -> Problem:
    """Parse a problem file; numeric init values become exact rationals."""
    try:
        return _parse_problem(text)
    except ParseError as exc:
        if filename:
            raise exc.with_filename(filename) from None
        raise


def _parse_problem(text: str) -> Problem:
    root = _check_define(read_sexprs(text), text, "problem")
    name = _name(root.items[1].items[1], "a problem name")
    scope = _Scope(variables=set())
    domain_name = None
    objects, literals, fluents = [], [], {}
    goal = Condition()
    seen = set()
    for section in root.items[2:]:
        head = _head(section)
        if head is None or not head.startswith(":"):
            raise _err(section, "a problem section")
        if head in seen:
            raise _err(section.items[0], f"a single {head} section")
        seen.add(head)
        body = section.items[1:]
        if head == ":domain":
            _arity(section, 2, ":domain")
            domain_name = _name(body[0], "a domain name")
        elif head == ":requirements":
            continue
        elif head == ":objects":
            objects = _typed_list(body, lambda n: _name(n, "an object name"))
        elif head == ":init":
            for item in body:
                if _head(item) == "=":
                    _arity(item, 3, "=")
                    target = item.items[1]
                    titems = _list(target, "a ground function term") if not target.is_atom else [target]
                    if not titems:
                        raise _err(target, "a function name")
                    fname = _name(titems[0], "a function name")
                    args = tuple(_name(a, "an object") for a in titems[1:])
                    value = _number(item.items[2])
                    if value is None:
                        raise _err(item.items[2], "a number")
                    key = (fname, args)
                    if key in fluents:
                        raise ParseError(item.span, "one assignment per fluent", "duplicate initial assignment to " + "(" + " ".join((fname,) + args) + ")")
                    fluents[key] = value
                else:
                    lit = _atom_literal(item, scope)
                    if any(a.startswith("?") for a in lit.args):
                        raise _err(item, "a ground literal")
                    literals.append(lit)
        elif head == ":goal":
            _arity(section, 2, ":goal")
            goal = _condition(body[0], scope)
        elif head == ":metric":
            raise _err(section.items[0], "a supported problem section (metrics are not supported)")
        else:
            raise _err(section.items[0], "a supported problem section")
    if domain_name is None:
        raise _err(root, "a (:domain <name>) section")
    return Problem(name, domain_name, tuple(objects), tuple(literals), tuple(fluents.items()), goal)


# ---------------------------------------------------------------------------
# plans

_PLAN_LINE = re.compile(
    r"^\s*(?P<time>\S+?)\s*:\s*\((?P<call>[^()]*)\)\s*\[\s*(?P<dur>[^\]\s]+)\s*\]\s*$"
)


def _plan_number(text, line_no, col, what):
    span = SourceSpan(0, line_no, col, len(text))
    if not _NUMBER.match(text):
        raise ParseError(span, what, repr(text))
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(span, what, repr(text)) from None


def parse_plan(text: str, filename: str = None):
    """Parse ``<time>: (<action> <args>) [<duration>]`` lines into a sorted plan."""
    steps = []
    offset = 0
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.split(";", 1)[0]
        line_offset = offset
        offset += len(raw) + 1
        if not line.strip():
            continue
        m = _PLAN_LINE.match(line)
        if not m:
            span = SourceSpan(line_offset, line_no, 1, len(line))
            raise ParseError(span, "'<time>: (<action> <args>) [<duration>]'", repr(line.strip()), filename)
        try:
            time = _plan_number(m.group("time"), line_no, m.start("time") + 1, "a time")
            if time < 0:
                raise ParseError(SourceSpan(0, line_no, m.start("time") + 1, 0), "a non-negative time", m.group("time"))
            dur = _plan_number(m.group("dur"), line_no, m.start("dur") + 1, "a duration")
            if dur <= 0:
                raise ParseError(SourceSpan(0, line_no, m.start("dur") + 1, 0), "a positive duration", m.group("dur"))
            words = m.group("call").split()
            if not words or not all(_NAME.match(w.lower()) for w in words):
                raise ParseError(SourceSpan(0, line_no, m.start("call") + 1, 0), "an action name and object names", repr(m.group("call")))
        except ParseError as exc:
            span = SourceSpan(line_offset + exc.span.column - 1, exc.span.line, exc.span.column, exc.span.length)
            raise ParseError(span, exc.expected, exc.found, filename) from None
        words = [w.lower() for w in words]
        steps.append(PlanStep(time, words[0], tuple(words[1:]), dur))
    return sort_plan(steps)


def parse_numexpr(text: str):
    """Parse a standalone numeric expression (no declarations checked)."""
    nodes = read_sexprs(text)
    if len(nodes) != 1:
        raise ParseError(_end_span(text), "one expression", f"{len(nodes)}")
    return _numexpr(nodes[0], _Scope())

