"""A SPARQL subset: basic graph patterns, FILTER, GROUP BY with aggregates,
ORDER BY and LIMIT, evaluated by index nested-loop joins over a ``Graph``.

Result rows always come out in a canonical order (full-row comparison) before
ORDER BY is applied with stable sorts, so equal queries over equal graphs
give identical tables regardless of hashing.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Optional, Union

from . import rdf
from .rdf import IRI, Graph, Literal, Term

AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX", "MEDIAN", "STDDEV")
FUNCTIONS = ("YEAR", "MONTH", "QUARTER", "DAY")
KEYWORDS = {"PREFIX", "SELECT", "AS", "WHERE", "FILTER", "GROUP", "BY", "ORDER",
            "ASC", "DESC", "LIMIT", "DISTINCT", *AGGREGATES, *FUNCTIONS}
COMPARATORS = ("=", "!=", "<", "<=", ">", ">=")
DEFAULT_PREFIXES = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": rdf.XSD,
}


class QueryError(ValueError):
    pass


class QuerySyntaxError(QueryError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class QueryEvaluationError(QueryError):
    pass


# --- plan -------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class Const:
    value: object  # Term for pattern/IRI constants, python value otherwise

    def __str__(self) -> str:
        v = self.value
        if isinstance(v, (IRI, Literal)):
            return v.n3()
        if isinstance(v, _dt.date):
            return f'"{v.isoformat()}"^^xsd:date'
        if isinstance(v, str):
            return json.dumps(v, ensure_ascii=False)
        return str(v)


@dataclass(frozen=True)
class Call:
    function: str
    argument: Union[Var, Const]

    def __str__(self) -> str:
        return f"{self.function}({self.argument})"


@dataclass(frozen=True)
class Aggregate:
    function: str
    argument: Optional[Var]  # None means '*'
    distinct: bool = False

    def __str__(self) -> str:
        arg = "*" if self.argument is None else str(self.argument)
        return f"{self.function}({'DISTINCT ' if self.distinct else ''}{arg})"


@dataclass(frozen=True)
class Comparison:
    op: str
    left: object
    right: object

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class BoolOp:
    op: str  # '&&' or '||'
    operands: tuple

    def __str__(self) -> str:
        return "(" + f" {self.op} ".join(map(str, self.operands)) + ")"


@dataclass(frozen=True)
class TriplePattern:
    subject: Union[Var, Term]
    predicate: Union[Var, Term]
    object: Union[Var, Term]

    def variables(self) -> list[str]:
        return [x.name for x in (self.subject, self.predicate, self.object) if isinstance(x, Var)]


@dataclass(frozen=True)
class Projection:
    name: str
    expr: Union[Var, Call, Aggregate]


@dataclass
class QueryPlan:
    prefixes: dict[str, str]
    projection: list[Projection]
    patterns: list[TriplePattern]
    filters: list = field(default_factory=list)
    group_by: list[Projection] = field(default_factory=list)
    order_by: list[tuple] = field(default_factory=list)  # (expr, descending)
    limit: Optional[int] = None

    @property
    def aggregated(self) -> bool:
        return bool(self.group_by) or any(isinstance(p.expr, Aggregate) for p in self.projection)

    @property
    def header(self) -> list[str]:
        return [p.name for p in self.projection]

    def pattern_variables(self) -> set[str]:
        return {v for p in self.patterns for v in p.variables()}


def expr_variables(expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Call):
        return expr_variables(expr.argument)
    if isinstance(expr, Aggregate):
        return set() if expr.argument is None else {expr.argument.name}
    if isinstance(expr, Comparison):
        return expr_variables(expr.left) | expr_variables(expr.right)
    if isinstance(expr, BoolOp):
        return set().union(*(expr_variables(o) for o in expr.operands))
    return set()


# --- tokenizer ----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>[+-]?(?:\d+\.\d+|\d+))
  | (?P<pname>(?:[A-Za-z][A-Za-z0-9_\-]*)?:(?:[A-Za-z0-9_][A-Za-z0-9_\-]*)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>!=|<=|>=|&&|\|\||\^\^|[=<>{}().;,*])
""", re.VERBOSE)

_STRING_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\", "'": "'"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise QuerySyntaxError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            if kind == "word" and chunk.upper() in KEYWORDS:
                kind, chunk_text = "kw", chunk.upper()
            else:
                chunk_text = chunk
            tokens.append(Token(kind, chunk_text, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.prefixes = dict(DEFAULT_PREFIXES)

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Optional[Token] = None) -> QuerySyntaxError:
        tok = tok or self.tok
        return QuerySyntaxError(tok.line, tok.column, message)

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == "kw" and self.tok.text in words

    def take(self, kind: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of query"
            raise self.error(f"expected {want!r}, found {got!r}")
        t = self.tok
        self.i += 1
        return t

    def kw(self, word: str) -> Token:
        return self.take("kw", word)

    # terms
    def expand(self, tok: Token) -> IRI:
        prefix, _, local = tok.text.partition(":")
        if prefix not in self.prefixes:
            raise self.error(f"unknown prefix {prefix + ':'!r}", tok)
        try:
            return IRI(self.prefixes[prefix] + local)
        except rdf.TermError as exc:
            raise self.error(str(exc), tok) from None

    def iri_token(self, tok: Token) -> IRI:
        try:
            return IRI(tok.text[1:-1])
        except rdf.TermError as exc:
            raise self.error(str(exc), tok) from None

    def string_value(self, tok: Token) -> str:
        body = tok.text[1:-1]
        out, i = [], 0
        while i < len(body):
            ch = body[i]
            if ch == "\\":
                esc = body[i + 1]
                if esc not in _STRING_ESCAPES:
                    raise self.error(f"invalid escape '\\{esc}'", tok)
                out.append(_STRING_ESCAPES[esc])
                i += 2
            else:
                out.append(ch)
                i += 1
        return "".join(out)

    def literal_term(self) -> Literal:
        """A literal as an RDF term (pattern position)."""
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            dt = rdf.XSD_DECIMAL if "." in tok.text else rdf.XSD_INTEGER
            return Literal(tok.text.lstrip("+"), dt)
        text = self.string_value(self.take("string"))
        if self.at("op", "^^"):
            self.i += 1
            dt_tok = self.tok
            if self.at("iri"):
                self.i += 1
                dt = self.iri_token(dt_tok)
            else:
                dt = self.expand(self.take("pname"))
            if dt.value not in rdf.SUPPORTED_DATATYPES:
                raise self.error(f"unsupported datatype {dt.value}", dt_tok)
            return Literal(text, dt.value)
        return Literal(text)

    def pattern_term(self, position: str):
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            return Var(tok.text[1:])
        if tok.kind == "iri":
            self.i += 1
            return self.iri_token(tok)
        if tok.kind == "pname":
            self.i += 1
            return self.expand(tok)
        if tok.kind == "word" and tok.text == "a" and position == "predicate":
            self.i += 1
            return IRI(rdf.RDF_TYPE)
        if tok.kind in ("number", "string") and position == "object":
            return self.literal_term()
        raise self.error(f"expected a {position}, found {tok.text or 'end of query'!r}")

    # expressions
    def operand(self):
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            return Var(tok.text[1:])
        if tok.kind == "kw" and tok.text in FUNCTIONS:
            self.i += 1
            self.take("op", "(")
            arg = self.operand()
            if isinstance(arg, Call):
                raise self.error("nested function calls are not supported", tok)
            self.take("op", ")")
            return Call(tok.text, arg)
        if tok.kind in ("iri", "pname"):
            return Const(self.pattern_term("object"))
        if tok.kind in ("number", "string"):
            lit = self.literal_term()
            try:
                return Const(_value_of(lit))
            except ValueError as exc:
                raise self.error(str(exc), tok) from None
        raise self.error(f"expected an expression, found {tok.text or 'end of query'!r}")

    def relation(self):
        if self.at("op", "("):
            self.i += 1
            expr = self.disjunction()
            self.take("op", ")")
            return expr
        left = self.operand()
        tok = self.tok
        if tok.kind != "op" or tok.text not in COMPARATORS:
            raise self.error(f"expected a comparison operator, found {tok.text or 'end of query'!r}")
        self.i += 1
        return Comparison(tok.text, left, self.operand())

    def conjunction(self):
        parts = [self.relation()]
        while self.at("op", "&&"):
            self.i += 1
            parts.append(self.relation())
        return parts[0] if len(parts) == 1 else BoolOp("&&", tuple(parts))

    def disjunction(self):
        parts = [self.conjunction()]
        while self.at("op", "||"):
            self.i += 1
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else BoolOp("||", tuple(parts))

    def aggregate(self) -> Aggregate:
        fn = self.take("kw").text
        self.take("op", "(")
        distinct = False
        if self.at_kw("DISTINCT"):
            if fn != "COUNT":
                raise self.error("DISTINCT is only supported inside COUNT")
            self.i += 1
            distinct = True
        if self.at("op", "*"):
            if fn != "COUNT":
                raise self.error(f"{fn}(*) is not supported")
            self.i += 1
            arg = None
        else:
            arg = Var(self.take("var").text[1:])
        self.take("op", ")")
        return Aggregate(fn, arg, distinct)

    def select_item(self) -> Projection:
        if self.at("var"):
            name = self.take("var").text[1:]
            return Projection(name, Var(name))
        self.take("op", "(")
        if self.at_kw(*AGGREGATES):
            expr = self.aggregate()
        else:
            expr = self.operand()
            if isinstance(expr, Const):
                raise self.error("constant projections are not supported")
        self.kw("AS")
        name = self.take("var").text[1:]
        self.take("op", ")")
        return Projection(name, expr)

    def group_item(self) -> Projection:
        if self.at("var"):
            name = self.take("var").text[1:]
            return Projection(name, Var(name))
        start = self.tok
        self.take("op", "(")
        expr = self.operand()
        if not isinstance(expr, (Call, Var)):
            raise self.error("GROUP BY expects a variable or a function call", start)
        self.kw("AS")
        name = self.take("var").text[1:]
        self.take("op", ")")
        return Projection(name, expr)

    def order_item(self):
        if self.at_kw("ASC", "DESC"):
            desc = self.take("kw").text == "DESC"
            self.take("op", "(")
            expr = self.operand()
            self.take("op", ")")
            return (expr, desc)
        return (self.operand(), False)

    def where_body(self, patterns: list, filters: list) -> None:
        self.take("op", "{")
        while not self.at("op", "}"):
            if self.at_kw("FILTER"):
                self.i += 1
                start = self.tok
                if not self.at("op", "("):
                    raise self.error("FILTER expects a parenthesized expression", start)
                filters.append((self.relation(), start))
                if self.at("op", "."):
                    self.i += 1
                continue
            subject = self.pattern_term("subject")
            while True:
                predicate = self.pattern_term("predicate")
                while True:
                    patterns.append(TriplePattern(subject, predicate, self.pattern_term("object")))
                    if not self.at("op", ","):
                        break
                    self.i += 1
                if not self.at("op", ";"):
                    break
                self.i += 1
                if self.at("op", ".") or self.at("op", "}"):
                    break
            if self.at("op", "."):
                self.i += 1
            elif not self.at("op", "}") and not self.at_kw("FILTER"):
                raise self.error(f"expected '.' or '}}', found {self.tok.text or 'end of query'!r}")
        self.take("op", "}")

    def query(self) -> QueryPlan:
        while self.at_kw("PREFIX"):
            self.i += 1
            tok = self.take("pname")
            if not tok.text.endswith(":"):
                raise self.error("prefix declaration must end with ':'", tok)
            self.prefixes[tok.text[:-1]] = self.iri_token(self.take("iri")).value
        select_tok = self.kw("SELECT")
        projection: list[Projection] = []
        star = False
        if self.at("op", "*"):
            self.i += 1
            star = True
        else:
            while not self.at_kw("WHERE") and not self.at("op", "{"):
                projection.append(self.select_item())
            if not projection:
                raise self.error("SELECT needs at least one variable or expression")
        if self.at_kw("WHERE"):
            self.i += 1
        patterns, raw_filters = [], []
        where_tok = self.tok
        self.where_body(patterns, raw_filters)
        group_by, order_by, limit = [], [], None
        if self.at_kw("GROUP"):
            self.i += 1
            self.kw("BY")
            group_by.append(self.group_item())
            while self.at("var") or self.at("op", "("):
                group_by.append(self.group_item())
        if self.at_kw("ORDER"):
            self.i += 1
            self.kw("BY")
            order_by.append(self.order_item())
            while not self.at_kw("LIMIT") and not self.at("eof"):
                order_by.append(self.order_item())
        if self.at_kw("LIMIT"):
            self.i += 1
            tok = self.take("number")
            if not tok.text.isdigit():
                raise self.error("LIMIT expects a non-negative integer", tok)
            limit = int(tok.text)
        if not self.at("eof"):
            raise self.error(f"unexpected {self.tok.text!r} after query")
        if not patterns:
            raise self.error("WHERE clause has no triple patterns", where_tok)
        pattern_vars = {v for p in patterns for v in p.variables()}
        if star:
            if group_by:
                raise self.error("SELECT * cannot be combined with GROUP BY", select_tok)
            projection = [Projection(v, Var(v)) for v in sorted(pattern_vars)]
        plan = QueryPlan(self.prefixes, projection, patterns, [f for f, _ in raw_filters],
                         group_by, order_by, limit)
        self.check(plan, raw_filters, select_tok)
        return plan

    def check(self, plan: QueryPlan, raw_filters, select_tok: Token) -> None:
        pattern_vars = plan.pattern_variables()
        for expr, tok in raw_filters:
            unbound = sorted(expr_variables(expr) - pattern_vars)
            if unbound:
                raise self.error(f"FILTER uses variable(s) not in any pattern: ?{', ?'.join(unbound)}", tok)
        names = [p.name for p in plan.projection]
        if len(set(names)) != len(names):
            raise self.error("duplicate output variable in SELECT", select_tok)
        group_names = {g.name for g in plan.group_by}
        for g in plan.group_by:
            unbound = sorted(expr_variables(g.expr) - pattern_vars)
            if unbound:
                raise self.error(f"GROUP BY uses variable(s) not in any pattern: ?{', ?'.join(unbound)}",
                                 select_tok)
        if plan.aggregated:
            for p in plan.projection:
                if isinstance(p.expr, Aggregate):
                    continue
                if isinstance(p.expr, Var) and p.expr.name in group_names:
                    continue
                raise self.error(f"?{p.name} is projected but not grouped (GROUP BY it or aggregate it)",
                                 select_tok)
        for p in plan.projection:
            unbound = sorted(expr_variables(p.expr) - pattern_vars - group_names)
            if unbound:
                raise self.error(f"variable(s) not in any pattern: ?{', ?'.join(unbound)}", select_tok)
        if plan.aggregated:
            visible = set(names) | group_names
        else:
            visible = set(names) | pattern_vars
        for expr, _ in plan.order_by:
            unknown = sorted(expr_variables(expr) - visible)
            if unknown:
                raise self.error(f"ORDER BY uses unknown variable(s): ?{', ?'.join(unknown)}", select_tok)


def parse_query(text: str) -> QueryPlan:
    return _Parser(text).query()


# --- values -----------------------------------------------------------------

def _value_of(term):
    """Python value for comparisons: Decimal, date, str, or the IRI itself."""
    if isinstance(term, IRI):
        return term
    if isinstance(term, Literal):
        return term.to_python()
    return term


def _category(value) -> str:
    if isinstance(value, (int, float, Decimal)) and not isinstance(value, bool):
        return "number"
    if isinstance(value, _dt.date):
        return "date"
    if isinstance(value, str):
        return "string"
    if isinstance(value, IRI):
        return "iri"
    return type(value).__name__


def builtin_temporal(function: str, value) -> int:
    """YEAR, MONTH, DAY or QUARTER of a date (or xsd:date literal)."""
    if isinstance(value, Literal) and value.datatype == rdf.XSD_DATE:
        value = value.to_python()
    if not isinstance(value, _dt.date):
        raise QueryEvaluationError(f"{function} expects a date, got {value!r}")
    if function == "YEAR":
        return value.year
    if function == "MONTH":
        return value.month
    if function == "DAY":
        return value.day
    if function == "QUARTER":
        return (value.month + 2) // 3
    raise QueryEvaluationError(f"unknown function {function}")


def _eval(expr, binding: dict):
    if isinstance(expr, Var):
        term = binding[expr.name]
        try:
            return _value_of(term)
        except ValueError as exc:
            raise QueryEvaluationError(f"cannot interpret {term.n3()} in {expr}: {exc}") from None
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Call):
        arg = _eval(expr.argument, binding)
        try:
            return builtin_temporal(expr.function, arg)
        except QueryEvaluationError as exc:
            raise QueryEvaluationError(f"type error in {expr}: {exc}") from None
    raise QueryEvaluationError(f"cannot evaluate {expr}")


_OPS = {
    "=": lambda a, b: a == b, "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b, ">=": lambda a, b: a >= b,
}


def _test(expr, binding: dict) -> bool:
    if isinstance(expr, BoolOp):
        if expr.op == "&&":
            return all(_test(o, binding) for o in expr.operands)
        return any(_test(o, binding) for o in expr.operands)
    left, right = _eval(expr.left, binding), _eval(expr.right, binding)
    lc, rc = _category(left), _category(right)
    if lc != rc:
        raise QueryEvaluationError(f"type error in FILTER ({expr}): cannot compare {lc} with {rc}")
    if lc == "iri" and expr.op not in ("=", "!="):
        raise QueryEvaluationError(f"type error in FILTER ({expr}): IRIs support only = and !=")
    return _OPS[expr.op](left, right)


def order_key(value) -> tuple:
    """Total order across result cell types (unbound first)."""
    if value is None:
        return (0,)
    if isinstance(value, Literal):
        try:
            value = value.to_python()
        except ValueError:
            return (6, value.datatype, value.lexical)
    cat = _category(value)
    if cat == "number":
        return (1, value)
    if cat == "date":
        return (2, value.toordinal())
    if cat == "string":
        return (3, value)
    if cat == "iri":
        return (4, value.value)
    return (5, str(value))


def _row_key(row) -> tuple:
    return tuple(order_key(v) for v in row)


# --- aggregation --------------------------------------------------------------

def _numbers(values, fn: str) -> list[Decimal]:
    out = []
    for v in values:
        try:
            x = _value_of(v)
        except ValueError as exc:
            raise QueryEvaluationError(f"{fn}: {exc}") from None
        if _category(x) != "number":
            raise QueryEvaluationError(f"{fn} expects numeric values, got {v!r}")
        out.append(Decimal(x))
    return out


def median(values: list) -> Optional[Decimal]:
    """Middle value; mean of the two middle values for even counts."""
    if not values:
        return None
    xs = sorted(values)
    n = len(xs)
    mid = n // 2
    if n % 2:
        return xs[mid]
    return (xs[mid - 1] + xs[mid]) / 2


def sample_stddev(values: list) -> Optional[float]:
    """Sample standard deviation (n - 1 denominator); 0.0 for one value."""
    n = len(values)
    if n == 0:
        return None
    if n == 1:
        return 0.0
    xs = [Fraction(x) for x in values]
    mean = sum(xs) / n
    return math.sqrt(sum((x - mean) ** 2 for x in xs) / (n - 1))


def _aggregate(agg: Aggregate, group: list[dict]):
    fn = agg.function
    if agg.argument is None:
        if agg.distinct:
            return len({tuple(sorted(b.items(), key=lambda kv: kv[0])) for b in group})
        return len(group)
    values = [b[agg.argument.name] for b in group]
    if fn == "COUNT":
        return len(set(values)) if agg.distinct else len(values)
    if fn in ("MIN", "MAX"):
        if not values:
            return None
        try:
            pyvals = [_value_of(v) for v in values]
        except ValueError as exc:
            raise QueryEvaluationError(f"{agg}: {exc}") from None
        cats = {_category(v) for v in pyvals}
        if len(cats) > 1 or cats == {"iri"}:
            raise QueryEvaluationError(f"{agg}: values are not mutually comparable ({', '.join(sorted(cats))})")
        return min(pyvals) if fn == "MIN" else max(pyvals)
    nums = _numbers(values, str(agg))
    if fn == "SUM":
        return sum(nums, Decimal(0))
    if not nums:
        return None
    if fn == "AVG":
        return float(Fraction(sum(nums, Decimal(0))) / len(nums))
    if fn == "MEDIAN":
        return median(nums)
    if fn == "STDDEV":
        return sample_stddev(nums)
    raise QueryEvaluationError(f"unknown aggregate {fn}")


# --- evaluation ---------------------------------------------------------------

@dataclass
class SolutionTable:
    header: list[str]
    rows: list[tuple]

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def dicts(self) -> list[dict]:
        return [dict(zip(self.header, r)) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([format_cell(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{h: json_cell(v) for h, v in zip(self.header, r)} for r in self.rows]
        return json.dumps(rows, indent=2, ensure_ascii=False) + "\n"


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (IRI, Literal)):
        return str(value)
    if isinstance(value, Decimal):
        return format(value, "f")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, _dt.date):
        return value.isoformat()
    return str(value)


def json_cell(value):
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, Literal) and value.datatype in (rdf.XSD_INTEGER, rdf.XSD_DECIMAL):
        try:
            number = value.to_python()
        except ValueError:
            return value.lexical
        return int(number) if number == number.to_integral_value() else float(number)
    if isinstance(value, Decimal):
        return int(value) if value == value.to_integral_value() else float(value)
    return format_cell(value)


def _substitute(pattern: TriplePattern, binding: dict):
    out = []
    for x in (pattern.subject, pattern.predicate, pattern.object):
        if isinstance(x, Var):
            out.append(binding.get(x.name))
        else:
            out.append(x)
    return out


def solutions(graph: Graph, plan: QueryPlan) -> list[dict]:
    """All variable bindings satisfying the patterns and filters.

    Patterns are joined left to right; each partial binding is extended
    through an index lookup keyed on whatever the pattern has bound. Filters
    run on complete solutions only, so a type error is raised exactly when
    some solution of the patterns triggers it.
    """
    current: list[dict] = [{}]
    for pattern in plan.patterns:
        names = [x.name if isinstance(x, Var) else None
                 for x in (pattern.subject, pattern.predicate, pattern.object)]
        extended = []
        for binding in current:
            for triple in graph.triples(_substitute(pattern, binding)):
                new = dict(binding)
                for name, term in zip(names, triple):
                    if name is None:
                        continue
                    prior = new.get(name)
                    if prior is None:
                        new[name] = term
                    elif prior != term:
                        break
                else:
                    extended.append(new)
        current = extended
        if not current:
            return []
    if plan.filters:
        current = [b for b in current if all(_test(f, b) for f in plan.filters)]
    return current


def evaluate(graph: Graph, plan: QueryPlan) -> SolutionTable:
    bindings = solutions(graph, plan)
    if plan.aggregated:
        groups: dict[tuple, list[dict]] = {}
        if not plan.group_by:
            groups[()] = bindings
        else:
            for b in bindings:
                key = tuple(_group_value(g.expr, b) for g in plan.group_by)
                groups.setdefault(key, []).append(b)
        envs = []
        for key, members in groups.items():
            env = {g.name: v for g, v in zip(plan.group_by, key)}
            for p in plan.projection:
                env[p.name] = _aggregate(p.expr, members) if isinstance(p.expr, Aggregate) else env[p.expr.name]
            envs.append(env)
    else:
        envs = []
        for b in bindings:
            env = dict(b)
            for p in plan.projection:
                env[p.name] = b[p.expr.name] if isinstance(p.expr, Var) else _eval(p.expr, b)
            envs.append(env)
    header = plan.header
    pairs = [(tuple(env[h] for h in header), env) for env in envs]
    pairs.sort(key=lambda pe: _row_key(pe[0]))
    for expr, desc in reversed(plan.order_by):
        pairs.sort(key=lambda pe: order_key(_order_value(expr, pe[1])), reverse=desc)
    rows = [row for row, _ in pairs]
    if plan.limit is not None:
        rows = rows[:plan.limit]
    return SolutionTable(header, rows)


def _group_value(expr, binding: dict):
    if isinstance(expr, Var):
        return binding[expr.name]
    return _eval(expr, binding)


def _order_value(expr, env: dict):
    if isinstance(expr, Var):
        return env.get(expr.name)
    if isinstance(expr, Call):
        arg = env.get(expr.argument.name) if isinstance(expr.argument, Var) else expr.argument.value
        return builtin_temporal(expr.function, arg)
    return expr.value


def run_query(graph: Graph, text: str) -> SolutionTable:
    return evaluate(graph, parse_query(text))

