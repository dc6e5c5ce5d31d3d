"""Class-targeted graph constraints and a validator (a small SHACL subset)."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Optional, Sequence

from . import rdf
from .rdf import IRI, Graph, Literal, Term, term_sort_key
from .vocab import DEFAULT_BASE_IRI, TYPE, Vocabulary

CONSTRAINT_KINDS = ("minCount", "datatype", "minExclusive", "pattern")
_DATATYPE_NAMES = {"string": rdf.XSD_STRING, "integer": rdf.XSD_INTEGER,
                   "decimal": rdf.XSD_DECIMAL, "date": rdf.XSD_DATE}


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    path: IRI
    kind: str
    argument: object

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ShapeError(f"unknown constraint kind {self.kind!r}")
        arg = self.argument
        if self.kind == "minCount":
            if isinstance(arg, bool) or not isinstance(arg, int) or arg < 1:
                raise ShapeError(f"minCount needs an integer >= 1, got {arg!r}")
        elif self.kind == "minExclusive":
            if isinstance(arg, bool):
                raise ShapeError("minExclusive needs a number")
            try:
                object.__setattr__(self, "argument", Decimal(str(arg)))
            except InvalidOperation:
                raise ShapeError(f"minExclusive needs a number, got {arg!r}") from None
        elif self.kind == "datatype":
            dt = _DATATYPE_NAMES.get(arg, arg)
            if dt not in rdf.SUPPORTED_DATATYPES:
                raise ShapeError(f"unsupported datatype {arg!r}")
            object.__setattr__(self, "argument", dt)
        else:
            try:
                re.compile(arg)
            except (re.error, TypeError) as exc:
                raise ShapeError(f"invalid pattern {arg!r}: {exc}") from None


@dataclass(frozen=True)
class Shape:
    target_class: IRI
    constraints: tuple[Constraint, ...]


@dataclass(frozen=True)
class Violation:
    focus_node: IRI
    path: IRI
    constraint_kind: str
    message: str
    value: Optional[Term] = None

    def to_dict(self) -> dict:
        return {
            "focus_node": self.focus_node.value,
            "path": self.path.value,
            "constraint_kind": self.constraint_kind,
            "message": self.message,
            "value": None if self.value is None else self.value.n3(),
        }


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def conforms(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.constraint_kind for v in self.violations]

    def to_dict(self) -> dict:
        return {"conforms": self.conforms, "violations": [v.to_dict() for v in self.violations]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


ShapeSet = Sequence[Shape]


def builtin_shapes(vocab: Optional[Vocabulary] = None) -> list[Shape]:
    """Contract shape: linked institution and supplier, positive decimal
    amount, ISO 8601 date."""
    v = vocab or Vocabulary.for_base(DEFAULT_BASE_IRI)
    return [Shape(v.Contract, (
        Constraint(v.hasInstitution, "minCount", 1),
        Constraint(v.hasSupplier, "minCount", 1),
        Constraint(v.hasAmount, "datatype", rdf.XSD_DECIMAL),
        Constraint(v.hasAmount, "minExclusive", 0),
        Constraint(v.hasDate, "datatype", rdf.XSD_DATE),
        Constraint(v.hasDate, "pattern", r"^\d{4}-\d{2}-\d{2}$"),
    ))]


def _check(c: Constraint, focus: IRI, values: list[Term]) -> list[Violation]:
    if c.kind == "minCount":
        if len(values) < c.argument:
            return [Violation(focus, c.path, c.kind,
                              f"expected at least {c.argument} value(s) of {c.path}, found {len(values)}")]
        return []
    out = []
    for value in values:
        if c.kind == "datatype":
            if not isinstance(value, Literal) or value.datatype != c.argument:
                out.append(Violation(focus, c.path, c.kind, f"value is not of datatype {c.argument}", value))
        elif c.kind == "minExclusive":
            number = None
            if isinstance(value, Literal) and value.datatype in (rdf.XSD_DECIMAL, rdf.XSD_INTEGER):
                try:
                    number = value.to_python()
                except ValueError:
                    pass
            if number is None or not number > c.argument:
                out.append(Violation(focus, c.path, c.kind, f"value must be greater than {c.argument}", value))
        elif not re.search(c.argument, str(value)):
            out.append(Violation(focus, c.path, c.kind, f"value does not match {c.argument}", value))
    return out


def validate(graph: Graph, shapes: ShapeSet) -> ValidationReport:
    """Evaluate every constraint on every instance of each shape's target
    class. Never mutates the graph."""
    violations: list[Violation] = []
    for shape in shapes:
        focus_nodes = graph.subjects(TYPE, shape.target_class)
        for focus in focus_nodes:
            for c in shape.constraints:
                values = [t.object for t in graph.triples((focus, c.path, None))]
                values.sort(key=term_sort_key)
                violations.extend(_check(c, focus, values))
    violations.sort(key=lambda v: (v.focus_node.value, v.path.value, v.constraint_kind,
                                   term_sort_key(v.value) if v.value is not None else ()))
    return ValidationReport(tuple(violations))


def shapes_from_dict(data) -> list[Shape]:
    if not isinstance(data, dict) or set(data) - {"base_iri", "shapes"} or "shapes" not in data:
        raise ShapeError("shapes document must be an object with 'shapes' and optional 'base_iri'")
    base = data.get("base_iri", DEFAULT_BASE_IRI)

    def resolve(name) -> IRI:
        if not isinstance(name, str):
            raise ShapeError(f"expected an IRI or local name, got {name!r}")
        try:
            return IRI(name if re.match(r"[A-Za-z][A-Za-z0-9+.\-]*:", name) else base + name)
        except rdf.TermError as exc:
            raise ShapeError(str(exc)) from None

    shapes = []
    for i, raw in enumerate(data["shapes"]):
        if not isinstance(raw, dict) or set(raw) != {"target_class", "constraints"}:
            raise ShapeError(f"shapes[{i}]: expected keys target_class and constraints")
        constraints = []
        for j, c in enumerate(raw["constraints"]):
            if not isinstance(c, dict) or set(c) != {"path", "kind", "argument"}:
                raise ShapeError(f"shapes[{i}].constraints[{j}]: expected keys path, kind, argument")
            constraints.append(Constraint(resolve(c["path"]), c["kind"], c["argument"]))
        shapes.append(Shape(resolve(raw["target_class"]), tuple(constraints)))
    return shapes


def load_shapes(path) -> list[Shape]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ShapeError(f"malformed shapes document: {exc}") from None
    return shapes_from_dict(data)
