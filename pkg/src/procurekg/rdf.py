"""RDF terms, an in-memory triple store with three permutation indexes, and
N-Triples reading/writing.

Only IRIs and typed literals exist; blank nodes are not supported because
every entity produced by the mapping stage gets a minted IRI.
"""
from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterable, Iterator, NamedTuple, Optional, Union

XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_DATE = XSD + "date"
SUPPORTED_DATATYPES = frozenset({XSD_STRING, XSD_INTEGER, XSD_DECIMAL, XSD_DATE})

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")
# Characters N-Triples forbids inside an IRIREF (besides whitespace/controls).
_IRI_FORBIDDEN = re.compile(r'[\x00-\x20<>"{}|^`\\]')
_DATE_LEXICAL = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_INTEGER_LEXICAL = re.compile(r"^[+-]?\d+$")
_DECIMAL_LEXICAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")


class RDFError(ValueError):
    """Base class for data-model errors."""


class TermError(RDFError):
    pass


class StructureError(RDFError):
    """A triple with a literal in subject or predicate position."""


class GraphFrozenError(RDFError):
    pass


class NTriplesParseError(RDFError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True, slots=True)
class IRI:
    value: str

    def __post_init__(self):
        if not isinstance(self.value, str) or not _SCHEME.match(self.value):
            raise TermError(f"IRI is not absolute: {self.value!r}")
        if _IRI_FORBIDDEN.search(self.value):
            raise TermError(f"IRI contains a forbidden character: {self.value!r}")

    def __str__(self) -> str:
        return self.value

    def n3(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str = XSD_STRING

    def __post_init__(self):
        if not isinstance(self.lexical, str):
            raise TermError(f"literal lexical form must be text, got {self.lexical!r}")
        if self.datatype not in SUPPORTED_DATATYPES:
            raise TermError(f"unsupported datatype: {self.datatype}")

    def __str__(self) -> str:
        return self.lexical

    def n3(self) -> str:
        quoted = '"' + escape_literal(self.lexical) + '"'
        if self.datatype == XSD_STRING:
            return quoted
        return f"{quoted}^^<{self.datatype}>"

    def to_python(self) -> Union[str, Decimal, _dt.date]:
        """Value of the literal: ``Decimal`` for numbers, ``date`` for dates.

        Raises ``ValueError`` when the lexical form is ill-formed for its
        datatype. Lexical validity is not enforced at construction time so
        that broken data can be represented and reported by the validator.
        """
        lex = self.lexical
        if self.datatype == XSD_STRING:
            return lex
        if self.datatype == XSD_DATE:
            if not _DATE_LEXICAL.match(lex):
                raise ValueError(f"ill-formed date literal {lex!r}")
            return _dt.date.fromisoformat(lex)
        pattern = _INTEGER_LEXICAL if self.datatype == XSD_INTEGER else _DECIMAL_LEXICAL
        if not pattern.match(lex):
            raise ValueError(f"ill-formed numeric literal {lex!r}")
        try:
            return Decimal(lex)
        except InvalidOperation as exc:  # pragma: no cover - regex guards this
            raise ValueError(f"ill-formed numeric literal {lex!r}") from exc

    @classmethod
    def of(cls, value) -> "Literal":
        """Build a literal from a Python value (int, Decimal, date or str)."""
        if isinstance(value, bool):
            raise TermError("booleans are not a supported literal type")
        if isinstance(value, int):
            return cls(str(value), XSD_INTEGER)
        if isinstance(value, Decimal):
            return cls(format(value, "f"), XSD_DECIMAL)
        if isinstance(value, _dt.date):
            return cls(value.isoformat(), XSD_DATE)
        if isinstance(value, str):
            return cls(value)
        raise TermError(f"cannot build a literal from {type(value).__name__}")


Term = Union[IRI, Literal]


class Triple(NamedTuple):
    subject: Term
    predicate: Term
    object: Term


def term_sort_key(term: Term) -> tuple:
    """Total order over terms: IRIs first, then literals by datatype and text."""
    if isinstance(term, IRI):
        return (0, term.value, "")
    return (1, term.datatype, term.lexical)


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape_char(ch: str) -> str:
    if ch in _ESCAPES:
        return _ESCAPES[ch]
    return f"\\u{ord(ch):04X}"


_NEEDS_ESCAPE = re.compile(r'["\\\x00-\x1f\x7f]')


def escape_literal(text: str) -> str:
    return _NEEDS_ESCAPE.sub(lambda m: _escape_char(m.group()), text)


class Graph:
    """A set of triples indexed subject-first, predicate-first and object-first.

    ``inspected`` counts every stored triple a lookup has visited; it is an
    instrumentation counter for checking that bound lookups use an index.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._spo: dict = {}
        self._pos: dict = {}
        self._osp: dict = {}
        self._size = 0
        self._frozen = False
        self.inspected = 0
        for t in triples:
            self.add(t)

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[Triple]:
        for s, by_p in self._spo.items():
            for p, objects in by_p.items():
                for o in objects:
                    yield Triple(s, p, o)

    def __contains__(self, triple) -> bool:
        s, p, o = triple
        return o in self._spo.get(s, {}).get(p, ())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return len(self) == len(other) and all(t in other for t in self)

    def __repr__(self) -> str:
        return f"<Graph {self._size} triples{' frozen' if self._frozen else ''}>"

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "Graph":
        self._frozen = True
        return self

    def copy(self) -> "Graph":
        """Unfrozen copy."""
        return Graph(self)

    def add(self, triple) -> int:
        """Insert a triple, returning the graph size afterwards."""
        if self._frozen:
            raise GraphFrozenError("graph is frozen")
        s, p, o = triple
        if not isinstance(s, IRI):
            raise StructureError(f"subject must be an IRI, got {s!r}")
        if not isinstance(p, IRI):
            raise StructureError(f"predicate must be an IRI, got {p!r}")
        if not isinstance(o, (IRI, Literal)):
            raise StructureError(f"object must be an RDF term, got {o!r}")
        objects = self._spo.setdefault(s, {}).setdefault(p, set())
        if o in objects:
            return self._size
        objects.add(o)
        self._pos.setdefault(p, {}).setdefault(o, set()).add(s)
        self._osp.setdefault(o, {}).setdefault(s, set()).add(p)
        self._size += 1
        return self._size

    insert = add

    def remove(self, triple) -> bool:
        if self._frozen:
            raise GraphFrozenError("graph is frozen")
        s, p, o = triple
        objects = self._spo.get(s, {}).get(p)
        if not objects or o not in objects:
            return False
        _discard(self._spo, s, p, o)
        _discard(self._pos, p, o, s)
        _discard(self._osp, o, s, p)
        self._size -= 1
        return True

    def triples(self, pattern) -> Iterator[Triple]:
        """Yield triples matching ``pattern``; ``None`` is a wildcard."""
        s, p, o = pattern
        if s is not None:
            by_p = self._spo.get(s)
            if not by_p:
                return
            if p is not None:
                objects = by_p.get(p, ())
                if o is not None:
                    if o in objects:
                        self.inspected += 1
                        yield Triple(s, p, o)
                    return
                for obj in objects:
                    self.inspected += 1
                    yield Triple(s, p, obj)
                return
            if o is not None:
                for pred in self._osp.get(o, {}).get(s, ()):
                    self.inspected += 1
                    yield Triple(s, pred, o)
                return
            for pred, objects in by_p.items():
                for obj in objects:
                    self.inspected += 1
                    yield Triple(s, pred, obj)
            return
        if p is not None:
            by_o = self._pos.get(p)
            if not by_o:
                return
            if o is not None:
                for subj in by_o.get(o, ()):
                    self.inspected += 1
                    yield Triple(subj, p, o)
                return
            for obj, subjects in by_o.items():
                for subj in subjects:
                    self.inspected += 1
                    yield Triple(subj, p, obj)
            return
        if o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    self.inspected += 1
                    yield Triple(subj, pred, o)
            return
        for t in self:
            self.inspected += 1
            yield t

    def match_pattern(self, pattern) -> list[Triple]:
        return list(self.triples(pattern))

    def subjects(self, predicate: Optional[Term] = None, obj: Optional[Term] = None) -> list[Term]:
        return sorted({t.subject for t in self.triples((None, predicate, obj))}, key=term_sort_key)

    def objects(self, subject: Optional[Term] = None, predicate: Optional[Term] = None) -> list[Term]:
        return sorted({t.object for t in self.triples((subject, predicate, None))}, key=term_sort_key)

    def value(self, subject: Term, predicate: Term) -> Optional[Term]:
        """The smallest object for (subject, predicate), or None."""
        found = self.objects(subject, predicate)
        return found[0] if found else None


def _discard(index: dict, a, b, c) -> None:
    inner = index[a]
    leaf = inner[b]
    leaf.discard(c)
    if not leaf:
        del inner[b]
        if not inner:
            del index[a]


# --- N-Triples --------------------------------------------------------------

def serialize_ntriples(graph: Iterable[Triple]) -> str:
    """Canonical N-Triples: one statement per line, lines sorted."""
    lines = sorted(f"{s.n3()} {p.n3()} {o.n3()} ." for s, p, o in graph)
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


# Runs of characters that need no escape handling.
_IRI_RUN = re.compile(r"[^>\\]*")
_STRING_RUN = re.compile(r'[^"\\]*')


class _LineParser:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.pos = 0
        self.lineno = lineno

    def error(self, message: str, pos: Optional[int] = None):
        col = (self.pos if pos is None else pos) + 1
        return NTriplesParseError(self.lineno, col, message)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def iri(self) -> IRI:
        start = self.pos
        if self.peek() != "<":
            raise self.error("expected '<'")
        self.pos += 1
        chars = []
        while True:
            run = _IRI_RUN.match(self.text, self.pos)
            chars.append(run.group())
            self.pos = run.end()
            ch = self.peek()
            if ch == "":
                raise self.error("unterminated IRI", start)
            self.pos += 1
            if ch == ">":
                break
            chars.append(self.uchar())
        try:
            return IRI("".join(chars))
        except TermError as exc:
            raise self.error(str(exc), start) from None

    def uchar(self) -> str:
        kind = self.peek()
        width = {"u": 4, "U": 8}.get(kind)
        if width is None:
            raise self.error(f"invalid escape '\\{kind}'")
        digits = self.text[self.pos + 1:self.pos + 1 + width]
        if len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
            raise self.error("invalid unicode escape")
        self.pos += 1 + width
        return chr(int(digits, 16))

    def literal(self) -> Literal:
        start = self.pos
        self.pos += 1  # opening quote
        chars = []
        while True:
            run = _STRING_RUN.match(self.text, self.pos)
            chars.append(run.group())
            self.pos = run.end()
            ch = self.peek()
            if ch == "":
                raise self.error("unterminated string literal", start)
            self.pos += 1
            if ch == '"':
                break
            esc = self.peek()
            if esc in _ECHAR:
                self.pos += 1
                chars.append(_ECHAR[esc])
            else:
                chars.append(self.uchar())
        lexical = "".join(chars)
        if self.text.startswith("^^", self.pos):
            self.pos += 2
            dt_pos = self.pos
            datatype = self.iri().value
            if datatype not in SUPPORTED_DATATYPES:
                raise self.error(f"unsupported datatype <{datatype}>", dt_pos)
            return Literal(lexical, datatype)
        if self.peek() == "@":
            raise self.error("language-tagged literals are not supported")
        return Literal(lexical)

    def term(self, position: str) -> Term:
        self.skip_ws()
        ch = self.peek()
        if ch == "<":
            return self.iri()
        if ch == '"':
            if position != "object":
                raise self.error(f"literal not allowed as {position}")
            return self.literal()
        if ch == "_":
            raise self.error("blank nodes are not supported")
        if ch == "":
            raise self.error(f"missing {position}")
        raise self.error(f"unexpected character {ch!r} in {position}")

    def statement(self) -> Triple:
        s = self.term("subject")
        p = self.term("predicate")
        o = self.term("object")
        self.skip_ws()
        if self.peek() != ".":
            raise self.error("expected '.' terminating the statement")
        self.pos += 1
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] != "#":
            raise self.error("unexpected content after '.'")
        return Triple(s, p, o)


def parse_ntriples(text: str) -> Graph:
    graph = Graph()
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        stripped = line.strip(" \t")
        if not stripped or stripped.startswith("#"):
            continue
        graph.add(_LineParser(line, lineno).statement())
    return graph


def read_ntriples(path) -> Graph:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_ntriples(fh.read())


def write_ntriples(graph: Graph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_ntriples(graph))
