import json

import pytest

from conftest import BASE, graph_of, rec
from procurekg.rdf import XSD_DATE, XSD_DECIMAL, Literal, Triple
from procurekg.shapes import (
    Constraint,
    ShapeError,
    builtin_shapes,
    load_shapes,
    shapes_from_dict,
    validate,
)
from procurekg.synthetic import synthetic_records
from procurekg.vocab import Vocabulary

V = Vocabulary.for_base(BASE)


def one_contract():
    return graph_of([rec("r-1", "Ministry", "Beton", "2021-01-02", 10)])


def mutate(graph, drop=(), add=()):
    g = graph.copy()
    for t in drop:
        g.remove(t)
    for t in add:
        g.add(t)
    return g.freeze()


class TestBuiltin:
    def test_structure(self):
        shapes = builtin_shapes(V)
        assert len(shapes) == 1
        shape = shapes[0]
        assert shape.target_class == V.Contract
        kinds = sorted(c.kind for c in shape.constraints)
        assert kinds == ["datatype", "datatype", "minCount", "minCount", "minExclusive", "pattern"]
        assert {c.path for c in shape.constraints} <= set(V.properties())
        by_kind = {(c.path, c.kind): c.argument for c in shape.constraints}
        assert by_kind[(V.hasAmount, "datatype")] == XSD_DECIMAL
        assert by_kind[(V.hasDate, "datatype")] == XSD_DATE
        assert by_kind[(V.hasAmount, "minExclusive")] == 0

    @pytest.mark.parametrize("kind,arg", [("minCount", 0), ("minCount", True), ("minExclusive", "abc"),
                                          ("pattern", "(unclosed"), ("datatype", "float"), ("maxCount", 1)])
    def test_bad_constraints(self, kind, arg):
        with pytest.raises(ShapeError):
            Constraint(V.hasAmount, kind, arg)


class TestValidate:
    def test_clean(self):
        report = validate(one_contract(), builtin_shapes(V))
        assert report.conforms and report.violations == ()

    def test_empty_graph_conforms(self):
        assert validate(graph_of([]), builtin_shapes(V)).conforms

    def test_missing_supplier(self):
        g = one_contract()
        c = g.subjects(None, V.Contract)[0]
        report = validate(mutate(g, drop=[(c, V.hasSupplier, g.value(c, V.hasSupplier))]), builtin_shapes(V))
        assert not report.conforms
        assert [(v.constraint_kind, v.path) for v in report.violations] == [("minCount", V.hasSupplier)]
        assert report.violations[0].focus_node == c

    def test_negative_amount_is_one_violation(self):
        g = one_contract()
        c = g.subjects(None, V.Contract)[0]
        bad = mutate(g, drop=[(c, V.hasAmount, g.value(c, V.hasAmount))],
                     add=[Triple(c, V.hasAmount, Literal("-5", XSD_DECIMAL))])
        report = validate(bad, builtin_shapes(V))
        assert report.kinds() == ["minExclusive"]
        assert report.violations[0].value == Literal("-5", XSD_DECIMAL)

    def test_wrong_datatype(self):
        g = one_contract()
        c = g.subjects(None, V.Contract)[0]
        bad = mutate(g, drop=[(c, V.hasAmount, g.value(c, V.hasAmount))],
                     add=[Triple(c, V.hasAmount, Literal("12"))])
        assert validate(bad, builtin_shapes(V)).kinds() == ["datatype", "minExclusive"]

    def test_report_sorted_and_json(self):
        g = graph_of(synthetic_records(6, seed=1))
        cs = g.subjects(None, V.Contract)
        drops = [(c, V.hasInstitution, g.value(c, V.hasInstitution)) for c in reversed(cs)]
        report = validate(mutate(g, drop=drops), builtin_shapes(V))
        assert [v.focus_node for v in report.violations] == cs
        data = json.loads(report.to_json())
        assert data["conforms"] is False
        assert set(data["violations"][0]) == {"focus_node", "path", "constraint_kind", "message", "value"}

    def test_monotone_and_non_mutating(self):
        g = one_contract()
        c = g.subjects(None, V.Contract)[0]
        once = mutate(g, add=[Triple(c, V.hasAmount, Literal("-1", XSD_DECIMAL))])
        twice = mutate(once, add=[Triple(c, V.hasDate, Literal("2021/01/02", XSD_DATE))])
        before = len(twice)
        r1, r2 = validate(once, builtin_shapes(V)), validate(twice, builtin_shapes(V))
        assert set(r1.violations) <= set(r2.violations)
        assert len(twice) == before


class TestShapeFiles:
    def test_round_trip_from_json(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"shapes": [{"target_class": "Contract", "constraints": [
            {"path": "hasAmount", "kind": "minExclusive", "argument": 100},
            {"path": "hasDescription", "kind": "pattern", "argument": "road"},
        ]}]}), encoding="utf-8")
        shapes = load_shapes(p)
        g = graph_of([rec("r-1", "M", "B", "2021-01-02", 10, "medicines")])
        assert validate(g, shapes).kinds() == ["minExclusive", "pattern"]

    @pytest.mark.parametrize("data", [[], {"shapes": [{"target_class": "C"}]}, {"shapes": [], "x": 1},
                                      {"shapes": [{"target_class": "C", "constraints": [{"path": "p"}]}]}])
    def test_bad_documents(self, data):
        with pytest.raises(ShapeError):
            shapes_from_dict(data)
