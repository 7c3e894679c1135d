"""Bimodal formulas: AST, concrete syntax, macros, Sahlqvist classification.

The language has two box/diamond pairs indexed by an axis (H for the
horizontal relation, V for the vertical one).  Concrete syntax:

    form  := iff
    iff   := imp ("<->" imp)*
    imp   := or ("->" imp)?
    or    := and ("|" and)*
    and   := unary ("&" unary)*
    unary := "!" unary | "[h]" unary | "[v]" unary
           | "<h>" unary | "<v>" unary | atom
    atom  := ident | "T" | "F" | "(" form ")"

`a <-> b` is desugared at parse time to `(a -> b) & (b -> a)`; there is
no biconditional node in the AST.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional


class Axis(enum.Enum):
    H = "h"
    V = "v"

    @property
    def other(self) -> "Axis":
        return Axis.V if self is Axis.H else Axis.H


@dataclass(frozen=True)
class Formula:
    """Base class; all nodes are immutable and compare structurally."""

    def __and__(self, other: "Formula") -> "Formula":
        return conj([self, other])

    def __or__(self, other: "Formula") -> "Formula":
        return disj([self, other])

    def __invert__(self) -> "Formula":
        return Not(self)

    def __rshift__(self, other: "Formula") -> "Formula":
        return Implies(self, other)


@dataclass(frozen=True)
class Var(Formula):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be nonempty")


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    children: tuple[Formula, ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("And needs at least two children")


@dataclass(frozen=True)
class Or(Formula):
    children: tuple[Formula, ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("Or needs at least two children")


@dataclass(frozen=True)
class Box(Formula):
    axis: Axis
    child: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    axis: Axis
    child: Formula


@dataclass(frozen=True)
class Implies(Formula):
    antecedent: Formula
    consequent: Formula


TOP = Top()
BOT = Bot()


def conj(items: Iterable[Formula]) -> Formula:
    """N-ary conjunction: flattens nested Ands, drops T, empty = T."""
    out: list[Formula] = []
    for f in items:
        if isinstance(f, Top):
            continue
        if isinstance(f, And):
            out.extend(f.children)
        else:
            out.append(f)
    if not out:
        return TOP
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(items: Iterable[Formula]) -> Formula:
    """N-ary disjunction: flattens nested Ors, drops F, empty = F."""
    out: list[Formula] = []
    for f in items:
        if isinstance(f, Bot):
            continue
        if isinstance(f, Or):
            out.extend(f.children)
        else:
            out.append(f)
    if not out:
        return BOT
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def box(axis: Axis, f: Formula) -> Formula:
    return Box(axis, f)


def dia(axis: Axis, f: Formula) -> Formula:
    return Diamond(axis, f)


def dia_plus(axis: Axis, f: Formula) -> Formula:
    return disj([f, Diamond(axis, f)])


def box_plus(axis: Axis, f: Formula) -> Formula:
    return conj([f, Box(axis, f)])


_MACROS = ("diamond_plus", "box_plus", "forall", "at_least_two", "exactly_one")


def expand_macro(kind: str, arg: Formula, axis: Axis) -> Formula:
    """Defining expansions of the derived modalities."""
    if kind == "diamond_plus":
        return disj([arg, Diamond(axis, arg)])
    if kind in ("box_plus", "forall"):
        return conj([arg, Box(axis, arg)])
    if kind == "at_least_two":
        return Diamond(axis, conj([arg, Diamond(axis, arg)]))
    if kind == "exactly_one":
        two = Diamond(axis, conj([arg, Diamond(axis, arg)]))
        return conj([disj([arg, Diamond(axis, arg)]), Not(two)])
    raise ValueError(f"unknown macro {kind!r} (known: {', '.join(_MACROS)})")


def subformulas(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        if isinstance(g, Not):
            stack.append(g.child)
        elif isinstance(g, (And, Or)):
            stack.extend(g.children)
        elif isinstance(g, (Box, Diamond)):
            stack.append(g.child)
        elif isinstance(g, Implies):
            stack.append(g.antecedent)
            stack.append(g.consequent)


def variables(f: Formula) -> frozenset[str]:
    seen: set[int] = set()
    out: set[str] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if id(g) in seen:
            continue
        seen.add(id(g))
        if isinstance(g, Var):
            out.add(g.name)
        elif isinstance(g, Not):
            stack.append(g.child)
        elif isinstance(g, (And, Or)):
            stack.extend(g.children)
        elif isinstance(g, (Box, Diamond)):
            stack.append(g.child)
        elif isinstance(g, Implies):
            stack.append(g.antecedent)
            stack.append(g.consequent)
    return frozenset(out)


# ---------------------------------------------------------------------------
# parsing


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_TOKEN = re.compile(
    r"\s*(?:(?P<op><->|->|\||&|!|\[h\]|\[v\]|<h>|<v>|\(|\))"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.group("op"):
            tokens.append(("op", m.group("op"), m.start("op")))
        else:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Optional[tuple[str, str, int]]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        tok = self.next()
        if tok[0] != "op" or tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1]!r}", tok[2])

    def at_op(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] == value

    def parse(self) -> Formula:
        f = self.iff()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])
        return f

    def iff(self) -> Formula:
        f = self.imp()
        while self.at_op("<->"):
            self.next()
            g = self.imp()
            f = And((Implies(f, g), Implies(g, f)))
        return f

    def imp(self) -> Formula:
        f = self.or_()
        if self.at_op("->"):
            self.next()
            return Implies(f, self.imp())
        return f

    def or_(self) -> Formula:
        parts = [self.and_()]
        while self.at_op("|"):
            self.next()
            parts.append(self.and_())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def and_(self) -> Formula:
        parts = [self.unary()]
        while self.at_op("&"):
            self.next()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        kind, value, pos = tok
        if kind == "op":
            if value == "!":
                self.next()
                return Not(self.unary())
            if value in ("[h]", "[v]"):
                self.next()
                return Box(Axis.H if value == "[h]" else Axis.V, self.unary())
            if value in ("<h>", "<v>"):
                self.next()
                return Diamond(Axis.H if value == "<h>" else Axis.V, self.unary())
            if value == "(":
                self.next()
                f = self.iff()
                self.expect(")")
                return f
            raise ParseError(f"unexpected token {value!r}", pos)
        self.next()
        if value == "T":
            return TOP
        if value == "F":
            return BOT
        return Var(value)


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# rendering

_PREC_IMP, _PREC_OR, _PREC_AND, _PREC_UNARY, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(f: Formula) -> int:
    if isinstance(f, (Var, Top, Bot)):
        return _PREC_ATOM
    if isinstance(f, (Not, Box, Diamond)):
        return _PREC_UNARY
    if isinstance(f, And):
        return _PREC_AND
    if isinstance(f, Or):
        return _PREC_OR
    return _PREC_IMP


def render_formula(f: Formula) -> str:
    """Canonical concrete syntax; parse_formula(render_formula(f)) == f."""

    def go(g: Formula, min_prec: int) -> str:
        s: str
        if isinstance(g, Var):
            s = g.name
        elif isinstance(g, Top):
            s = "T"
        elif isinstance(g, Bot):
            s = "F"
        elif isinstance(g, Not):
            s = "!" + go(g.child, _PREC_UNARY)
        elif isinstance(g, Box):
            s = f"[{g.axis.value}]" + go(g.child, _PREC_UNARY)
        elif isinstance(g, Diamond):
            s = f"<{g.axis.value}>" + go(g.child, _PREC_UNARY)
        elif isinstance(g, And):
            s = " & ".join(go(c, _PREC_UNARY) for c in g.children)
        elif isinstance(g, Or):
            s = " | ".join(go(c, _PREC_AND) for c in g.children)
        elif isinstance(g, Implies):
            s = go(g.antecedent, _PREC_OR) + " -> " + go(g.consequent, _PREC_IMP)
        else:  # pragma: no cover
            raise TypeError(f"not a formula: {g!r}")
        if _prec(g) < min_prec:
            return "(" + s + ")"
        return s

    return go(f, _PREC_IMP)


def rename_variables(f: Formula, mapping: dict[str, str]) -> Formula:
    if isinstance(f, Var):
        return Var(mapping.get(f.name, f.name))
    if isinstance(f, (Top, Bot)):
        return f
    if isinstance(f, Not):
        return Not(rename_variables(f.child, mapping))
    if isinstance(f, And):
        return And(tuple(rename_variables(c, mapping) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(rename_variables(c, mapping) for c in f.children))
    if isinstance(f, Box):
        return Box(f.axis, rename_variables(f.child, mapping))
    if isinstance(f, Diamond):
        return Diamond(f.axis, rename_variables(f.child, mapping))
    return Implies(
        rename_variables(f.antecedent, mapping),
        rename_variables(f.consequent, mapping),
    )


def transpose_formula(f: Formula) -> Formula:
    """Swap the two modalities throughout."""
    if isinstance(f, (Var, Top, Bot)):
        return f
    if isinstance(f, Not):
        return Not(transpose_formula(f.child))
    if isinstance(f, And):
        return And(tuple(transpose_formula(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(transpose_formula(c) for c in f.children))
    if isinstance(f, Box):
        return Box(f.axis.other, transpose_formula(f.child))
    if isinstance(f, Diamond):
        return Diamond(f.axis.other, transpose_formula(f.child))
    return Implies(transpose_formula(f.antecedent), transpose_formula(f.consequent))


# ---------------------------------------------------------------------------
# Sahlqvist and generalised Sahlqvist classification


class SahlqvistClass(enum.Enum):
    SAHLQVIST = "sahlqvist"
    GENERALISED = "generalised_sahlqvist"
    NEITHER = "neither"


@dataclass(frozen=True)
class DependencyDigraph:
    """Heads of boxed formulas; edge q -> p when q is inessential for head p."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def is_acyclic(self) -> bool:
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        for q, p in self.edges:
            succ.setdefault(q, set()).add(p)
        state: dict[str, int] = {}

        def visit(n: str) -> bool:
            state[n] = 1
            for m in succ.get(n, ()):
                s = state.get(m, 0)
                if s == 1:
                    return False
                if s == 0 and not visit(m):
                    return False
            state[n] = 2
            return True

        return all(state.get(n, 0) == 2 or visit(n) for n in sorted(succ))


@dataclass(frozen=True)
class SahlqvistVerdict:
    klass: SahlqvistClass
    digraph: Optional[DependencyDigraph] = None
    failure: Optional[str] = None

    @property
    def is_sahlqvist(self) -> bool:
        return self.klass is SahlqvistClass.SAHLQVIST

    @property
    def at_least_generalised(self) -> bool:
        return self.klass in (SahlqvistClass.SAHLQVIST, SahlqvistClass.GENERALISED)


def _polarity(f: Formula, sign: bool, out: list[bool]) -> None:
    # out collects, per variable occurrence, whether it sits under an even
    # number of negations (sign=True); -> counts as negating its antecedent.
    if isinstance(f, Var):
        out.append(sign)
    elif isinstance(f, (Top, Bot)):
        pass
    elif isinstance(f, Not):
        _polarity(f.child, not sign, out)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            _polarity(c, sign, out)
    elif isinstance(f, (Box, Diamond)):
        _polarity(f.child, sign, out)
    else:
        _polarity(f.antecedent, not sign, out)
        _polarity(f.consequent, sign, out)


def is_positive(f: Formula) -> bool:
    occ: list[bool] = []
    _polarity(f, True, occ)
    return all(occ)


def is_negative(f: Formula) -> bool:
    occ: list[bool] = []
    _polarity(f, True, occ)
    return not any(occ)


def _strip_boxes(f: Formula) -> Formula:
    while isinstance(f, Box):
        f = f.child
    return f


def is_boxed_atom(f: Formula) -> bool:
    return isinstance(_strip_boxes(f), Var)


def boxed_formula_head(f: Formula) -> Optional[tuple[str, frozenset[str]]]:
    """If f is a boxed formula, return (head variable, inessential variables)."""
    core = _strip_boxes(f)
    if isinstance(core, Var):
        return core.name, frozenset()
    if isinstance(core, Implies) and is_positive(core.antecedent):
        rest = boxed_formula_head(core.consequent)
        if rest is not None:
            head, iness = rest
            return head, iness | variables(core.antecedent)
    return None


def _normalize(f: Formula) -> Formula:
    """K-equivalences used before matching the syntactic classes:
    boxes distribute over conjunctions, implication consequents split over
    conjunctions, n-ary And/Or flattened."""
    if isinstance(f, (Var, Top, Bot)):
        return f
    if isinstance(f, Not):
        return Not(_normalize(f.child))
    if isinstance(f, And):
        return conj([_normalize(c) for c in f.children])
    if isinstance(f, Or):
        return disj([_normalize(c) for c in f.children])
    if isinstance(f, Diamond):
        return Diamond(f.axis, _normalize(f.child))
    if isinstance(f, Box):
        child = _normalize(f.child)
        if isinstance(child, And):
            return conj([_normalize(Box(f.axis, c)) for c in child.children])
        return Box(f.axis, child)
    ant = _normalize(f.antecedent)
    cons = _normalize(f.consequent)
    if isinstance(cons, And):
        return conj([_normalize(Implies(ant, c)) for c in cons.children])
    return Implies(ant, cons)


class _ClassFail(Exception):
    def __init__(self, path: str):
        super().__init__(path)
        self.path = path


def _sahlqvist_antecedent(f: Formula, path: str) -> None:
    if isinstance(f, (Top, Bot)) or is_boxed_atom(f) or is_negative(f):
        return
    if isinstance(f, (And, Or)):
        for i, c in enumerate(f.children):
            _sahlqvist_antecedent(c, f"{path}.{i}")
        return
    if isinstance(f, Diamond):
        _sahlqvist_antecedent(f.child, path + ".0")
        return
    raise _ClassFail(path)


def _gen_antecedent(f: Formula, path: str, heads: list[tuple[str, frozenset[str]]]) -> None:
    if isinstance(f, (Top, Bot)) or is_negative(f):
        return
    bf = boxed_formula_head(f)
    if bf is not None:
        heads.append(bf)
        return
    if isinstance(f, (And, Or)):
        for i, c in enumerate(f.children):
            _gen_antecedent(c, f"{path}.{i}", heads)
        return
    if isinstance(f, Diamond):
        _gen_antecedent(f.child, path + ".0", heads)
        return
    raise _ClassFail(path)


def _walk_formula(f: Formula, path: str, on_implication) -> None:
    # (generalised) Sahlqvist formulas close implications under boxes,
    # conjunction, and variable-disjoint disjunction
    if isinstance(f, Box):
        _walk_formula(f.child, path + ".0", on_implication)
        return
    if isinstance(f, And):
        for i, c in enumerate(f.children):
            _walk_formula(c, f"{path}.{i}", on_implication)
        return
    if isinstance(f, Or):
        for i, c in enumerate(f.children):
            for j, d in enumerate(f.children):
                if i < j and variables(c) & variables(d):
                    raise _ClassFail(f"{path}: disjuncts {i},{j} share variables")
        for i, c in enumerate(f.children):
            _walk_formula(c, f"{path}.{i}", on_implication)
        return
    if isinstance(f, Implies):
        on_implication(f, path)
        return
    raise _ClassFail(path)


def classify_sahlqvist(f: Formula) -> SahlqvistVerdict:
    """Full syntactic test for the Sahlqvist and generalised Sahlqvist classes.

    The classifier first applies the K-equivalences of `_normalize` so that,
    e.g., a box over a conjunction is seen as a conjunction of boxed formulas.
    When a subformula admits several decompositions the negative-formula
    reading is preferred (it contributes no heads to the dependency digraph).
    """
    g = _normalize(f)

    def check_plain(imp: Formula, path: str) -> None:
        assert isinstance(imp, Implies)
        if not is_positive(imp.consequent):
            raise _ClassFail(path + ": consequent not positive")
        _sahlqvist_antecedent(imp.antecedent, path + ".ant")

    heads_all: list[tuple[str, frozenset[str]]] = []

    def check_gen(imp: Formula, path: str) -> None:
        assert isinstance(imp, Implies)
        if not is_positive(imp.consequent):
            raise _ClassFail(path + ": consequent not positive")
        heads: list[tuple[str, frozenset[str]]] = []
        _gen_antecedent(imp.antecedent, path + ".ant", heads)
        nodes = frozenset(h for h, _ in heads)
        edges = frozenset(
            (q, p) for p, iness in heads for q in iness if q in nodes
        )
        if not DependencyDigraph(nodes, edges).is_acyclic():
            raise _ClassFail(path + ": dependency digraph has a cycle")
        heads_all.extend(heads)

    try:
        _walk_formula(g, "", check_plain)
        plain = True
    except _ClassFail:
        plain = False

    try:
        _walk_formula(g, "", check_gen)
    except _ClassFail as e:
        if plain:  # cannot happen: plain antecedents are generalised ones
            raise AssertionError("Sahlqvist formula failed generalised test")
        return SahlqvistVerdict(SahlqvistClass.NEITHER, failure=e.path)

    nodes = frozenset(h for h, _ in heads_all)
    edges = frozenset((q, p) for p, iness in heads_all for q in iness if q in nodes)
    digraph = DependencyDigraph(nodes, edges)
    klass = SahlqvistClass.SAHLQVIST if plain else SahlqvistClass.GENERALISED
    return SahlqvistVerdict(klass, digraph=digraph)
