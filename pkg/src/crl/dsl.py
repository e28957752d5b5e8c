"""Parsers and printer for ``.crl`` model files and probability queries.

Model files are line oriented::

    model cbn "online"
    var PH {0,1} role=state
    var SH {0,1} role=action
    edge PH -> SH
    prior PH : 1/2 1/2
    cpt SH | PH :
      0 : 1 0
      * : 0 1
    eqn SC = PH * SH
    policy always | PH :
      * : 0 1
    discount 1

Indented lines are rows of the preceding ``cpt`` or ``policy`` block.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable

from .errors import ParseError, QueryError, RowNotNormalized, SemanticError
from .expr import BinOp, Expr, Num, Ref, names as expr_names, rational_text, to_text

KINDS = ("cbn", "scm", "ddn")
ROLES = ("state", "action", "reward", "belief")

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<number>\d+/\d+|\d+\.\d+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_'@]*)
  | (?P<punct>[{}\[\],|:=*()+\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int, offset: int = 0) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, offset + pos + 1)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), line, offset + pos + 1))
        pos = m.end()
    return out


class TokenStream:
    def __init__(self, tokens: list[Token], line: int, end_col: int):
        self.tokens = tokens
        self.pos = 0
        self.line = line
        self.end_col = end_col

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at(self, *texts: str) -> bool:
        t = self.peek()
        return t is not None and t.text in texts

    def at_kind(self, *kinds: str) -> bool:
        t = self.peek()
        return t is not None and t.kind in kinds

    def error(self, message: str, expected: Iterable[str] = ()) -> ParseError:
        t = self.peek()
        col = t.col if t else self.end_col
        found = repr(t.text) if t else "end of line"
        return ParseError(f"{message}, found {found}", self.line, col, tuple(expected))

    def take(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}", (repr(text),))
        return self._advance()

    def take_kind(self, kind: str, what: str) -> Token:
        if not self.at_kind(kind):
            raise self.error(f"expected {what}", (what,))
        return self._advance()

    def _advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    def expect_end(self) -> None:
        if not self.done():
            raise self.error("unexpected trailing input", ("end of line",))


def _value(ts: TokenStream) -> str:
    """A domain value: name, unsigned number, or negative number."""
    if ts.at("-"):
        ts.take("-")
        return "-" + ts.take_kind("number", "number").text
    if ts.at_kind("name", "number"):
        return ts._advance().text
    raise ts.error("expected a value", ("value",))


def _number(ts: TokenStream, t: Token) -> Fraction:
    value = Fraction(t.text.split("/")[0])
    if "/" in t.text:
        den = int(t.text.split("/")[1])
        if den == 0:
            raise ParseError("zero denominator", ts.line, t.col, ("rational",))
        value /= den
    return value


def _rational(ts: TokenStream) -> Fraction:
    return _number(ts, ts.take_kind("number", "rational"))


# ---------------------------------------------------------------- documents


@dataclass(frozen=True)
class VarDecl:
    name: str
    domain: tuple[str, ...]
    role: str = "state"
    latent: bool = False
    next_slice: bool = False


@dataclass(frozen=True)
class CptDecl:
    child: str
    parents: tuple[str, ...]
    rows: tuple[tuple[tuple[str, ...], tuple[Fraction, ...]], ...]


@dataclass(frozen=True)
class EqnDecl:
    child: str
    expr: Expr


@dataclass(frozen=True)
class PriorDecl:
    name: str
    probs: tuple[Fraction, ...]


@dataclass(frozen=True)
class PolicyDecl:
    name: str
    inputs: tuple[str, ...]
    rows: tuple[tuple[tuple[str, ...], tuple[Fraction, ...]], ...]


@dataclass(frozen=True)
class ModelDoc:
    """Parsed model in canonical order.

    Edges are ordered by (child, parent) declaration position; mechanisms by
    the position of the variable they define; policies keep file order.
    """

    kind: str
    name: str
    variables: tuple[VarDecl, ...]
    edges: tuple[tuple[str, str], ...] = ()
    cpts: tuple[CptDecl, ...] = ()
    eqns: tuple[EqnDecl, ...] = ()
    priors: tuple[PriorDecl, ...] = ()
    policies: tuple[PolicyDecl, ...] = ()
    discount: Fraction | None = None

    def __post_init__(self):
        pos = {v.name: i for i, v in enumerate(self.variables)}
        big = len(pos)
        key = lambda n: pos.get(n, big)
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", tuple(sorted(set(map(tuple, self.edges)), key=lambda e: (key(e[1]), key(e[0]), e))))
        object.__setattr__(self, "cpts", tuple(sorted(self.cpts, key=lambda c: (key(c.child), c.child))))
        object.__setattr__(self, "eqns", tuple(sorted(self.eqns, key=lambda c: (key(c.child), c.child))))
        object.__setattr__(self, "priors", tuple(sorted(self.priors, key=lambda c: (key(c.name), c.name))))
        object.__setattr__(self, "policies", tuple(self.policies))
        if self.discount is not None:
            object.__setattr__(self, "discount", Fraction(self.discount))

    @property
    def observed(self) -> frozenset[str]:
        return frozenset(v.name for v in self.variables if not v.latent)

    def var(self, name: str) -> VarDecl | None:
        for v in self.variables:
            if v.name == name:
                return v
        return None


def _probs_text(ps: Iterable[Fraction]) -> str:
    return " ".join(rational_text(p) for p in ps)


def _row_text(values: tuple[str, ...], probs: tuple[Fraction, ...]) -> str:
    return "  " + " ".join(values + (":",)) + " " + _probs_text(probs)


def print_model(doc: ModelDoc) -> str:
    out = [f'model {doc.kind} "{doc.name}"']
    for v in doc.variables:
        line = f"var {v.name} {{{','.join(v.domain)}}}"
        if v.latent:
            line += " latent"
        line += f" role={v.role}"
        if v.next_slice:
            line += " slice=next"
        out.append(line)
    out.extend(f"edge {p} -> {c}" for p, c in doc.edges)
    out.extend(f"prior {p.name} : {_probs_text(p.probs)}" for p in doc.priors)
    for c in doc.cpts:
        head = f"cpt {c.child} | {' '.join(c.parents)} :" if c.parents else f"cpt {c.child} :"
        out.append(head)
        out.extend(_row_text(k, ps) for k, ps in c.rows)
    out.extend(f"eqn {e.child} = {to_text(e.expr)}" for e in doc.eqns)
    for p in doc.policies:
        out.append(f"policy {p.name} | {' '.join(p.inputs)} :" if p.inputs else f"policy {p.name} :")
        out.extend(_row_text(k, ps) for k, ps in p.rows)
    if doc.discount is not None:
        out.append(f"discount {rational_text(doc.discount)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- expression parser


def _expr(ts: TokenStream) -> Expr:
    node = _term(ts)
    while ts.at("+", "-"):
        op = ts._advance().text
        node = BinOp(op, node, _term(ts))
    return node


def _term(ts: TokenStream) -> Expr:
    node = _factor(ts)
    while ts.at("*"):
        ts._advance()
        node = BinOp("*", node, _factor(ts))
    return node


def _factor(ts: TokenStream) -> Expr:
    if ts.at_kind("number"):
        return Num(_number(ts, ts._advance()))
    if ts.at_kind("name"):
        return Ref(ts._advance().text)
    if ts.at("("):
        ts._advance()
        node = _expr(ts)
        ts.take(")")
        return node
    raise ts.error("expected an operand", ("rational", "name", "'('"))


def parse_expr(text: str, line: int = 1) -> Expr:
    ts = TokenStream(tokenize(text, line), line, len(text) + 1)
    node = _expr(ts)
    ts.expect_end()
    return node


# ---------------------------------------------------------------- model parser


@dataclass
class _Block:
    kind: str  # "cpt" or "policy"
    name: str
    header: tuple[str, ...]
    line: int
    rows: list = field(default_factory=list)  # (values | None for wildcard, probs, line)


def _strip_comment(raw: str) -> str:
    inside = False
    for i, ch in enumerate(raw):
        if ch == '"':
            inside = not inside
        elif ch == "#" and not inside:
            return raw[:i]
    return raw


def parse_model(text: str) -> ModelDoc:
    """Parse and validate a model file; errors carry 1-based line/column."""
    kind = name = None
    variables: list[VarDecl] = []
    edges: list[tuple[str, str]] = []
    eqns: list[EqnDecl] = []
    priors: list[PriorDecl] = []
    blocks: list[_Block] = []
    discount = None
    where: dict[tuple[str, str], int] = {}
    block: _Block | None = None

    for lineno, raw in enumerate(text.replace("\r\n", "\n").replace("\r", "\n").split("\n"), start=1):
        body = _strip_comment(raw).rstrip()
        if not body.strip():
            continue
        indented = body[0] in " \t"
        stripped = body.lstrip()
        offset = len(body) - len(stripped)
        ts = TokenStream(tokenize(stripped, lineno, offset), lineno, len(body) + 1)
        if indented:
            if block is None:
                raise ParseError("indented row outside a cpt or policy block", lineno, offset + 1, ("section keyword",))
            block.rows.append(_row(ts) + (lineno,))
            continue
        block = None
        if kind is None and not ts.at("model"):
            raise ts.error("file must start with a model line", ("'model'",))
        head = ts.take_kind("name", "keyword")
        word = head.text
        if word == "model":
            if kind is not None:
                raise ParseError("duplicate model line", lineno, head.col)
            k = ts.take_kind("name", "model kind")
            if k.text not in KINDS:
                raise ParseError(f"unknown model kind {k.text!r}", lineno, k.col, KINDS)
            kind = k.text
            name = ts.take_kind("string", "quoted name").text[1:-1]
            ts.expect_end()
        elif word == "var":
            v = _var_decl(ts)
            if any(x.name == v.name for x in variables):
                raise SemanticError(f"variable {v.name} declared twice", lineno, head.col)
            variables.append(v)
            where[("var", v.name)] = lineno
        elif word == "edge":
            p = ts.take_kind("name", "variable name").text
            ts.take_kind("arrow", "'->'")
            c = ts.take_kind("name", "variable name").text
            ts.expect_end()
            if (p, c) in edges:
                raise SemanticError(f"duplicate edge {p} -> {c}", lineno, head.col)
            edges.append((p, c))
            where[("edge", f"{p}->{c}")] = lineno
        elif word in ("cpt", "policy"):
            target = ts.take_kind("name", "name").text
            header: list[str] = []
            if ts.at("|"):
                ts._advance()
                while ts.at_kind("name"):
                    header.append(ts._advance().text)
            ts.take(":")
            ts.expect_end()
            block = _Block(word, target, tuple(header), lineno)
            blocks.append(block)
        elif word == "eqn":
            child = ts.take_kind("name", "variable name").text
            ts.take("=")
            expr = _expr(ts)
            ts.expect_end()
            eqns.append(EqnDecl(child, expr))
            where[("eqn", child)] = lineno
        elif word == "prior":
            target = ts.take_kind("name", "variable name").text
            ts.take(":")
            probs = []
            while not ts.done():
                probs.append(_rational(ts))
            priors.append(PriorDecl(target, tuple(probs)))
            where[("prior", target)] = lineno
        elif word == "discount":
            if discount is not None:
                raise SemanticError("duplicate discount", lineno, head.col)
            discount = _rational(ts)
            ts.expect_end()
            where[("discount", "")] = lineno
        else:
            raise ParseError(f"unknown keyword {word!r}", lineno, head.col,
                             ("model", "var", "edge", "cpt", "eqn", "prior", "policy", "discount"))
    if kind is None:
        raise ParseError("empty model file", 1, 1, ("'model'",))
    return _assemble(kind, name, variables, edges, eqns, priors, blocks, discount, where)


def _var_decl(ts: TokenStream) -> VarDecl:
    name = ts.take_kind("name", "variable name").text
    ts.take("{")
    domain = [_value(ts)]
    while ts.at(","):
        ts._advance()
        domain.append(_value(ts))
    ts.take("}")
    role, latent, nxt = "state", False, False
    while not ts.done():
        t = ts.take_kind("name", "attribute")
        if t.text == "latent":
            latent = True
        elif t.text in ("role", "slice"):
            ts.take("=")
            val = ts.take_kind("name", t.text)
            if t.text == "role":
                if val.text not in ROLES:
                    raise ParseError(f"unknown role {val.text!r}", ts.line, val.col, ROLES)
                role = val.text
            else:
                if val.text not in ("current", "next"):
                    raise ParseError(f"unknown slice {val.text!r}", ts.line, val.col, ("current", "next"))
                nxt = val.text == "next"
        else:
            raise ParseError(f"unknown attribute {t.text!r}", ts.line, t.col, ("latent", "role=", "slice="))
    if len(domain) < 2 or len(set(domain)) != len(domain):
        raise SemanticError(f"domain of {name} needs at least two distinct values", ts.line, 1)
    return VarDecl(name, tuple(domain), role, latent, nxt)


def _row(ts: TokenStream):
    values: list[str] | None = []
    if ts.at("*"):
        ts._advance()
        values = None
    else:
        while not ts.at(":"):
            if ts.done():
                raise ts.error("expected ':' in row", ("':'",))
            values.append(_value(ts))
    ts.take(":")
    probs = []
    while not ts.done():
        probs.append(_rational(ts))
    if not probs:
        raise ts.error("expected probabilities", ("rational",))
    return (None if values is None else tuple(values), tuple(probs))


def _expand(block: _Block, doms: list[tuple[str, ...]], width: int) -> tuple:
    rows: dict[tuple[str, ...], tuple[Fraction, ...]] = {}
    wildcard = None
    for values, probs, line in block.rows:
        if len(probs) != width:
            raise SemanticError(f"{block.kind} {block.name}: row has {len(probs)} entries, expected {width}", line, 1)
        if any(p < 0 or p > 1 for p in probs):
            raise SemanticError(f"{block.kind} {block.name}: probability outside [0, 1]", line, 1)
        if sum(probs) != 1:
            raise RowNotNormalized(f"{block.kind} {block.name}: row sums to {rational_text(sum(probs))}", line, 1)
        if values is None:
            if wildcard is not None:
                raise SemanticError(f"{block.kind} {block.name}: more than one wildcard row", line, 1)
            wildcard = probs
            continue
        if len(values) != len(doms):
            raise SemanticError(f"{block.kind} {block.name}: row binds {len(values)} values, expected {len(doms)}", line, 1)
        for v, d in zip(values, doms):
            if v not in d:
                raise SemanticError(f"{block.kind} {block.name}: value {v!r} not in domain", line, 1)
        if values in rows:
            raise SemanticError(f"{block.kind} {block.name}: duplicate row for {' '.join(values)}", line, 1)
        rows[values] = probs
    out = []
    for config in product(*doms):
        if config in rows:
            out.append((config, rows[config]))
        elif wildcard is not None:
            out.append((config, wildcard))
        else:
            raise SemanticError(f"{block.kind} {block.name}: parent configuration {' '.join(config)} not covered", block.line, 1)
    return tuple(out)


def _assemble(kind, name, variables, edges, eqns, priors, blocks, discount, where) -> ModelDoc:
    decl = {v.name: v for v in variables}

    def need(n, line, col=1):
        if n not in decl:
            raise SemanticError(f"undeclared variable {n!r}", line, col)
        return decl[n]

    parents: dict[str, set[str]] = {v: set() for v in decl}
    for p, c in edges:
        line = where[("edge", f"{p}->{c}")]
        need(p, line)
        need(c, line)
        parents[c].add(p)

    cpts, policies = [], []
    defined: dict[str, int] = {}

    def define(n, line):
        need(n, line)
        if n in defined:
            raise SemanticError(f"{n} has more than one mechanism", line, 1)
        defined[n] = line

    actions = [v for v in variables if v.role == "action" and not v.next_slice]
    for b in blocks:
        if b.kind == "cpt":
            define(b.name, b.line)
            for p in b.header:
                need(p, b.line)
            if set(b.header) != parents[b.name] or len(set(b.header)) != len(b.header):
                raise SemanticError(f"cpt {b.name}: parents {list(b.header)} differ from edges {sorted(parents[b.name])}", b.line, 1)
            doms = [decl[p].domain for p in b.header]
            rows = _expand(b, doms, len(decl[b.name].domain))
            if kind == "scm" and any(sorted(ps) != [0] * (len(ps) - 1) + [1] for _, ps in rows) and b.header:
                raise SemanticError(f"cpt {b.name}: scm mechanisms must be deterministic", b.line, 1)
            cpts.append(CptDecl(b.name, b.header, rows))
        else:
            if len(actions) != 1:
                raise SemanticError("policy requires exactly one current-slice action variable", b.line, 1)
            for p in b.header:
                v = need(p, b.line)
                if v.role != "state" or v.next_slice:
                    raise SemanticError(f"policy {b.name}: input {p} is not a current-slice state variable", b.line, 1)
            if any(p.name == b.name for p in policies):
                raise SemanticError(f"policy {b.name} declared twice", b.line, 1)
            rows = _expand(b, [decl[p].domain for p in b.header], len(actions[0].domain))
            policies.append(PolicyDecl(b.name, b.header, rows))

    for e in eqns:
        line = where[("eqn", e.child)]
        define(e.child, line)
        extra = expr_names(e.expr) - parents[e.child]
        if extra:
            raise SemanticError(f"eqn {e.child} references non-parents {sorted(extra)}", line, 1)
    for p in priors:
        line = where[("prior", p.name)]
        define(p.name, line)
        if parents[p.name]:
            raise SemanticError(f"prior given for {p.name}, which has parents", line, 1)
        if len(p.probs) != len(decl[p.name].domain):
            raise SemanticError(f"prior {p.name}: {len(p.probs)} entries for {len(decl[p.name].domain)} values", line, 1)
        if sum(p.probs) != 1 or any(x < 0 for x in p.probs):
            raise RowNotNormalized(f"prior {p.name}: entries sum to {rational_text(sum(p.probs))}", line, 1)

    for v in variables:
        if v.name in defined:
            continue
        if kind == "ddn" and v.next_slice and v.role in ("action", "reward"):
            continue
        raise SemanticError(f"no mechanism for {v.name}", where[("var", v.name)], 1)
    if discount is not None:
        if kind != "ddn":
            raise SemanticError("discount only applies to ddn models", where[("discount", "")], 1)
        if not 0 < discount <= 1:
            raise SemanticError("discount must lie in (0, 1]", where[("discount", "")], 1)

    doc = ModelDoc(kind, name, tuple(variables), tuple(edges), tuple(cpts), tuple(eqns), tuple(priors), tuple(policies), discount)
    try:
        from .model import build

        build(doc)
    except SemanticError:
        raise
    except Exception as exc:  # structural problems found while compiling
        raise SemanticError(str(exc), 1, 1) from None
    return doc


# ---------------------------------------------------------------- queries


@dataclass(frozen=True)
class Term:
    var: str
    value: str
    subscript: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class QueryAst:
    targets: tuple[Term, ...]
    evidence: tuple[tuple[str, str], ...] = ()
    do: tuple[tuple[str, str], ...] = ()

    @property
    def level(self) -> str:
        if any(t.subscript for t in self.targets):
            return "counterfactual"
        return "interventional" if self.do else "conditional"


def _binding(ts: TokenStream) -> tuple[str, str, Token]:
    t = ts.take_kind("name", "variable name")
    ts.take("=")
    return t.text, _value(ts), t


def parse_query(text: str) -> QueryAst:
    line = text.replace("\r", "").replace("\n", " ")
    ts = TokenStream(tokenize(line, 1), 1, len(line) + 1)
    head = ts.take_kind("name", "'P'")
    if head.text != "P":
        raise ParseError("query must start with P", 1, head.col, ("'P'",))
    ts.take("(")
    targets: list[tuple[Term, Token]] = []
    while True:
        name = ts.take_kind("name", "variable name")
        sub: list[tuple[str, str]] = []
        if ts.at("["):
            ts._advance()
            while True:
                n, v, _ = _binding(ts)
                sub.append((n, v))
                if ts.at(","):
                    ts._advance()
                    continue
                ts.take("]")
                break
        ts.take("=")
        targets.append((Term(name.text, _value(ts), tuple(sub)), name))
        if ts.at(","):
            ts._advance()
            continue
        break
    evidence: list[tuple[str, str, Token]] = []
    do: list[tuple[str, str, Token]] = []
    if ts.at("|"):
        ts._advance()
        while True:
            if ts.at("do"):
                ts._advance()
                ts.take("(")
                do.append(_binding(ts))
                while ts.at(","):
                    ts._advance()
                    do.append(_binding(ts))
                ts.take(")")
            else:
                evidence.append(_binding(ts))
            if ts.at(","):
                ts._advance()
                continue
            break
    ts.take(")")
    ts.expect_end()

    seen: dict[str, str] = {}

    def claim(var: str, group: str, tok: Token):
        if var in seen:
            raise QueryError(f"{var} appears in both {seen[var]} and {group} terms", 1, tok.col)
        seen[var] = group

    potential: set[str] = set()
    for t, tok in targets:
        if t.subscript:
            if t.var in potential:
                raise QueryError(f"{t.var} appears twice among potential outcomes", 1, tok.col)
            potential.add(t.var)
        else:
            claim(t.var, "target", tok)
    for n, _, tok in evidence:
        claim(n, "evidence", tok)
    for n, _, tok in do:
        claim(n, "do", tok)
    return QueryAst(tuple(t for t, _ in targets), tuple((n, v) for n, v, _ in evidence), tuple((n, v) for n, v, _ in do))


def query_text(q: QueryAst) -> str:
    def term(t: Term) -> str:
        sub = f"[{','.join(f'{n}={v}' for n, v in t.subscript)}]" if t.subscript else ""
        return f"{t.var}{sub}={t.value}"

    left = ",".join(term(t) for t in q.targets)
    right = [f"{n}={v}" for n, v in q.evidence] + [f"do({n}={v})" for n, v in q.do]
    return f"P({left}|{','.join(right)})" if right else f"P({left})"
