import io
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarekg.errors import OntologyError
from rarekg.ingest import DiseaseAnnotation, DiseaseAnnotationSet
from rarekg.ontology import (
    Namespace,
    OntologyFormat,
    OntologyGraph,
    OntologyTerm,
    TermId,
    compute_ic,
    map_feature_to_hpo,
    mean_ic,
    normalize_text,
    parse_ontology,
    serialize_obo,
)

import oracles

T = TermId.parse


class TestTermId:
    def test_hp_ids_are_zero_padded(self):
        assert str(T("HP:1250")) == "HP:0001250"
        assert T("hp:0001250") == T("HP:0001250")

    def test_disease_aliases(self):
        assert T("Orphanet:905") == T("ORPHA:905")
        assert T("MIM:277900").namespace is Namespace.OMIM
        assert str(T("ORPHA:0905")) == "ORPHA:905"

    @pytest.mark.parametrize("bad", ["", "HP", "HP:abc", "XYZ:1", "HP:12345678", "905"])
    def test_malformed(self, bad):
        with pytest.raises(OntologyError) as exc:
            T(bad)
        assert exc.value.code == "MALFORMED_ID"

    @given(st.integers(min_value=0, max_value=9_999_999))
    def test_round_trip(self, n):
        t = T(f"HP:{n}")
        assert T(str(t)) == t


class TestParsing:
    def test_fixture_shape(self, hp):
        assert len(hp) == 50
        assert hp.roots == frozenset({T("HP:0000001")})
        assert hp.edge_count == 49
        assert dict(hp.ignored_tags) == {"def": 2, "xref": 2}

    def test_multi_parent_and_obsolete(self, hp):
        assert hp.parents(T("HP:0001257")) == {T("HP:0003808"), T("HP:0012638")}
        old = hp.term(T("HP:0000004"))
        assert old.obsolete and old.replaced_by == T("HP:0000001")
        assert not hp.parents(T("HP:0000004"))

    def test_seizure_ancestors(self, hp):
        expected = {"HP:0001250", "HP:0012638", "HP:0000707", "HP:0000118", "HP:0000001"}
        assert {str(t) for t in hp.ancestors(T("HP:0001250"), reflexive=True)} == expected
        assert T("HP:0001250") not in hp.ancestors(T("HP:0001250"))

    def test_closure_matches_oracle(self, hp):
        parents = oracles.graph_to_parents(hp)
        for t in hp:
            assert {str(a) for a in hp.ancestors(t, reflexive=True)} == oracles.ancestors(parents, str(t))
            desc = {str(d) for d in hp.descendants(t, reflexive=True)}
            assert desc == {u for u in parents if str(t) in oracles.ancestors(parents, u)}

    def test_ancestors_within_depth(self, orpha):
        t = T("ORPHA:93554")
        assert orpha.ancestors_within(t, 1) == {T("ORPHA:91138")}
        assert orpha.ancestors_within(t, 2) == {T("ORPHA:91138"), T("ORPHA:93419")}
        assert orpha.ancestors_within(t, None) == orpha.ancestors(t)

    def test_cycle_detected(self):
        text = "[Term]\nid: HP:0000001\nname: a\nis_a: HP:0000002\n\n[Term]\nid: HP:0000002\nname: b\nis_a: HP:0000001\n"
        with pytest.raises(OntologyError) as exc:
            parse_ontology(text)
        assert exc.value.code == "CYCLE_DETECTED"

    def test_dangling_parent(self):
        with pytest.raises(OntologyError) as exc:
            parse_ontology("[Term]\nid: HP:0000001\nname: a\nis_a: HP:0000009\n")
        assert exc.value.code == "DANGLING_PARENT"

    @pytest.mark.parametrize(
        "text",
        [
            "[Term]\nname: no id\n",
            "[Term]\nid: HP:0000001\n",
            "[Term]\nid: HP:0000001\nname: a\n\n[Term]\nid: HP:0000001\nname: b\n",
            "[Term]\nid: HP:0000001\nname a\n",
            "[Term]\nid: nonsense\nname: a\n",
        ],
    )
    def test_malformed_stanzas(self, text):
        with pytest.raises(OntologyError) as exc:
            parse_ontology(text)
        assert exc.value.code == "MALFORMED_STANZA"

    def test_obo_round_trip(self, hp):
        again = parse_ontology(serialize_obo(hp))
        assert set(again) == set(hp)
        assert set(again.edges()) == set(hp.edges())
        assert {t: again.label(t) for t in again} == {t: hp.label(t) for t in hp}

    def test_json_subset(self, hp):
        doc = [
            {"id": str(t), "lbl": hp.label(t), "synonyms": list(hp.term(t).synonyms),
             "parents": sorted(str(p) for p in hp.parents(t)), "obsolete": hp.term(t).obsolete}
            for t in sorted(hp)
        ]
        g = parse_ontology(json.dumps(doc), OntologyFormat.JSON_SUBSET)
        assert set(g.edges()) == set(hp.edges())

    def test_accepts_bytes_and_streams(self):
        text = "[Term]\nid: HP:0000001\nname: All\n"
        assert len(parse_ontology(text.encode())) == 1
        assert len(parse_ontology(io.StringIO(text))) == 1


class TestTextLookup:
    def test_label_and_synonym(self, hp):
        assert map_feature_to_hpo(hp, "  SEIZURE ") == T("HP:0001250")
        assert map_feature_to_hpo(hp, "epileptic   seizure") == T("HP:0001250")
        assert map_feature_to_hpo(hp, "Sildenafil therapy") is None

    def test_obsolete_terms_are_not_matched(self, hp):
        assert map_feature_to_hpo(hp, "obsolete Onset and clinical course") is None

    def test_empty(self, hp):
        with pytest.raises(OntologyError):
            map_feature_to_hpo(hp, "   ")

    def test_normalize_text(self):
        assert normalize_text("  Foo\tBAR ") == "foo bar"


class TestInformationContent:
    def test_hand_values(self, hp, hp_ic):
        # 7 diseases; seizure is annotated (after the NOT row is dropped) to two of them
        assert hp_ic.corpus_size == 7
        assert hp_ic[T("HP:0001250")] == math.log(7 / 2)
        assert hp_ic[T("HP:0000001")] == 0.0
        assert hp_ic[T("HP:0001252")] == math.log(7)

    def test_unannotated_get_max(self, hp, hp_ic):
        assert T("HP:0000365") in hp_ic.unannotated
        assert hp_ic[T("HP:0000365")] == hp_ic.max_observed == math.log(7)

    def test_matches_oracle(self, hp, hpoa, hp_ic):
        expected = oracles.ic_table(oracles.graph_to_parents(hp), oracles.annotations_to_corpus(hpoa))
        assert {str(t): v for t, v in hp_ic.ic.items()} == expected

    def test_orphanet_merge_is_opt_in(self, hp, hpoa):
        extra = DiseaseAnnotationSet(
            list(hpoa) + [DiseaseAnnotation(T("ORPHA:99999"), T("HP:0000365"), provenance="ORPHANET")]
        )
        assert compute_ic(hp, extra).corpus_size == 7
        merged = compute_ic(hp, extra, merge_orphanet=True)
        assert merged.corpus_size == 8
        assert T("HP:0000365") not in merged.unannotated

    def test_obsolete_annotation_follows_replacement(self):
        g = OntologyGraph([
            OntologyTerm(T("HP:0000001"), "root"),
            OntologyTerm(T("HP:0000002"), "a", parents=frozenset({T("HP:0000001")})),
            OntologyTerm(T("HP:0000003"), "old", obsolete=True, replaced_by=T("HP:0000002")),
        ])
        anns = DiseaseAnnotationSet([
            DiseaseAnnotation(T("ORPHA:1"), T("HP:0000003")),
            DiseaseAnnotation(T("ORPHA:2"), T("HP:0000001")),
        ])
        ic = compute_ic(g, anns)
        assert ic[T("HP:0000002")] == math.log(2)

    def test_errors(self, hp):
        with pytest.raises(OntologyError) as exc:
            compute_ic(hp, DiseaseAnnotationSet([]))
        assert exc.value.code == "EMPTY_CORPUS"
        with pytest.raises(OntologyError) as exc:
            compute_ic(hp, DiseaseAnnotationSet([DiseaseAnnotation(T("ORPHA:1"), T("HP:0999999"))]))
        assert exc.value.code == "UNKNOWN_TERM"

    def test_mean_ic(self, hp_ic):
        terms = [T("HP:0001250"), T("HP:0000001"), T("HP:0001250")]
        assert mean_ic(hp_ic, terms) == math.log(3.5) / 2
        with pytest.raises(OntologyError):
            mean_ic(hp_ic, [])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 60), st.integers(1, 15))
    def test_anti_monotone_on_random_corpora(self, seed, n_terms, n_diseases):
        parents, corpus = oracles.random_corpus(seed, n_terms, n_diseases)
        graph, anns = oracles.to_objects(parents, corpus)
        ic = compute_ic(graph, anns)
        for child, parent in graph.edges():
            assert ic[child] >= ic[parent]
        assert ic[T("HP:0000001")] == 0.0
