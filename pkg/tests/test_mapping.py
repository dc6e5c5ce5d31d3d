import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BASE, graph_of, rec
from procurekg.ingest import RecordTable, normalize, table_from_records
from procurekg.mapping import (
    DuplicateRuleError,
    MappingError,
    MappingFormatError,
    MissingBaseIRIError,
    SlugError,
    default_mapping,
    execute_mapping,
    expected_triple_count,
    load_mapping,
    map_table,
    mint_iri,
    parse_mapping,
)
from procurekg.rdf import IRI, XSD_DATE, XSD_DECIMAL, Literal, serialize_ntriples
from procurekg.synthetic import synthetic_records
from procurekg.vocab import LABEL, TYPE, Vocabulary

V = Vocabulary.for_base(BASE)


def doc(**overrides):
    data = {
        "base_iri": "https://ex.org/",
        "entities": {
            "contract": {"class": "Contract", "template": "contract/{record_id}"},
            "institution": {"class": "Institution", "template": "institution/{authority}"},
            "supplier": {"class": "Supplier", "template": "supplier/{supplier}"},
        },
        "properties": [
            {"column": "authority", "predicate": "hasInstitution", "datatype": "iri"},
            {"column": "supplier", "predicate": "hasSupplier", "datatype": "iri"},
            {"column": "amount", "predicate": "hasAmount", "datatype": "decimal"},
            {"column": "date", "predicate": "hasDate", "datatype": "date"},
            {"column": "subject", "predicate": "hasDescription", "datatype": "string"},
        ],
    }
    data.update(overrides)
    return data


class TestParseMapping:
    def test_minimal_document(self):
        spec = parse_mapping(json.dumps(doc()))
        assert len(spec.properties) == 5
        assert spec.entities["institution"].class_iri == IRI("https://ex.org/Institution")
        assert spec.properties[2].predicate == IRI("https://ex.org/hasAmount")

    def test_missing_base(self):
        data = doc()
        del data["base_iri"]
        with pytest.raises(MissingBaseIRIError, match="missing base_iri"):
            parse_mapping(json.dumps(data))

    def test_duplicate_rule(self):
        data = doc()
        data["properties"].append({"column": "amount", "predicate": "hasAmount", "datatype": "integer"})
        with pytest.raises(DuplicateRuleError):
            parse_mapping(json.dumps(data))

    @pytest.mark.parametrize("text", ["{", "[]", json.dumps(doc(extra=1)),
                                      json.dumps(doc(base_iri="https://ex.org")),
                                      json.dumps(doc(properties=[]))])
    def test_malformed(self, text):
        with pytest.raises(MappingFormatError):
            parse_mapping(text)

    def test_errors_are_distinct(self):
        assert not issubclass(MissingBaseIRIError, (DuplicateRuleError, MappingFormatError))
        assert not issubclass(DuplicateRuleError, MappingFormatError)

    def test_unknown_datatype_and_bad_template(self):
        data = doc()
        data["properties"][2]["datatype"] = "money"
        with pytest.raises(MappingFormatError, match="money"):
            parse_mapping(json.dumps(data))
        data = doc()
        data["entities"]["supplier"]["template"] = "{supplier}"
        with pytest.raises(MappingFormatError, match="template"):
            parse_mapping(json.dumps(data))

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps(doc()), encoding="utf-8")
        assert load_mapping(p).base_iri == "https://ex.org/"


class TestMintIri:
    def test_paper_names(self):
        assert mint_iri("https://ex.org/", "institution", "AD Elektrani na Makedonija").value == \
            "https://ex.org/institution/ad-elektrani-na-makedonija"
        assert mint_iri("https://ex.org/", "supplier", "ALKALOID DOOEL Skopje").value == \
            "https://ex.org/supplier/alkaloid-dooel-skopje"

    def test_punctuation_and_whitespace(self):
        assert mint_iri("https://ex.org/", "supplier", "  Beton  A.D.\tŠtip ").value == \
            "https://ex.org/supplier/beton-ad-štip"

    def test_cyrillic_kept(self):
        assert mint_iri("https://ex.org/", "institution", "Министерство за здравство").value == \
            "https://ex.org/institution/министерство-за-здравство"

    def test_nfc(self):
        decomposed = "Inženering"
        assert mint_iri("https://ex.org/", "supplier", decomposed) == \
            mint_iri("https://ex.org/", "supplier", "Inženering")

    @pytest.mark.parametrize("label", ["###", "", "   ", "..."])
    def test_empty_slug(self, label):
        with pytest.raises(SlugError):
            mint_iri("https://ex.org/", "institution", label)


class TestExecuteMapping:
    def test_one_contract(self):
        g = graph_of([rec("r-1", "Ministry", "Beton", "2021-01-02", 10, "roads")])
        assert len(g) == 10
        c = IRI(BASE + "contract/r-1")
        assert g.value(c, V.hasAmount) == Literal("10", XSD_DECIMAL)
        assert g.value(c, V.hasDate) == Literal("2021-01-02", XSD_DATE)
        assert g.value(c, V.hasDescription) == Literal("roads")
        assert g.value(c, TYPE) == V.Contract
        inst = g.value(c, V.hasInstitution)
        assert g.value(inst, TYPE) == V.Institution
        assert g.value(inst, LABEL) == Literal("Ministry")
        assert g.frozen

    def test_shared_entities(self):
        g = graph_of([rec("r-1", "Ministry", "Beton", "2021-01-02", 10),
                      rec("r-2", "Ministry", "Beton", "2021-01-03", 20)])
        assert len(g) == 16

    def test_slug_coalescing_uses_smallest_label(self):
        result = map_table(table_from_records([rec("r-1", "Ministry  of Health", "X", "2021-01-02", 1),
                                               rec("r-2", "ministry of health", "X", "2021-01-02", 1)]),
                           default_mapping())
        assert result.institutions == 1
        inst = IRI(BASE + "institution/ministry-of-health")
        assert result.graph.value(inst, LABEL) == Literal("Ministry  of Health")
        assert len(result.graph) == expected_triple_count(2, 1, 1)

    def test_missing_column(self):
        t = RecordTable(("authority", "supplier", "date", "amount"), [("A", "B", "2020-01-01", "1")],
                        ["x-1"], ["x.csv"])
        with pytest.raises(MappingError, match="subject"):
            execute_mapping(t)

    def test_flagged_rows_skipped_by_default(self):
        raw = RecordTable(("authority", "subject", "supplier", "date", "amount"),
                          [("A", "s", "B", "2020-01-01", "5"), ("A", "s", "B", "31.02.2020", "x")],
                          ["x-1", "x-2"], ["x.csv"] * 2)
        t = normalize(raw)
        assert len(execute_mapping(t)) == 10
        result = map_table(t, default_mapping(), include_flagged=True)
        assert result.contracts == 2
        assert sorted(e.column for e in result.errors) == ["amount", "date"]
        assert all(e.record_id == "x-2" for e in result.errors)
        assert len(result.graph) == 10 + 4

    def test_deterministic_bytes(self):
        records = synthetic_records(40, seed=3)
        a = serialize_ntriples(graph_of(records))
        b = serialize_ntriples(graph_of(list(reversed(records))))
        assert a == b

    def test_table_i_arithmetic(self):
        assert expected_triple_count(896, 127, 563) == 6756

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 10), st.integers(1, 25), st.integers(0, 10**6))
    def test_count_law(self, n, i, s, seed):
        records = synthetic_records(n, institutions=i, suppliers=s, seed=seed)
        g = graph_of(records)
        c_count = len(g.subjects(TYPE, V.Contract))
        i_count = len(g.subjects(TYPE, V.Institution))
        s_count = len(g.subjects(TYPE, V.Supplier))
        assert (c_count, i_count, s_count) == (n, min(n, i), min(n, s))
        assert len(g) == expected_triple_count(c_count, i_count, s_count)
        for c in g.subjects(TYPE, V.Contract):
            assert len(g.objects(c, V.hasInstitution)) == 1
            assert len(g.objects(c, V.hasSupplier)) == 1
