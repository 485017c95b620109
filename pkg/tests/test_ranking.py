import math
import random
from types import MappingProxyType

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarekg.errors import RankingError
from rarekg.ontology import TermIC, TermId, compute_ic
from rarekg.ranking import (
    Method,
    PatientProfile,
    ResnikSimilarity,
    Tier,
    composite_difficulty,
    rank_diseases,
    score_base_ic,
    select_top_difficult,
    stratify_case,
    tier_counts,
    tier_for,
)

import oracles

T = TermId.parse


def patient(terms, truth=None, case_id="p"):
    return PatientProfile(case_id, frozenset(T(t) for t in terms), T(truth) if truth else None)


def as_pairs(ranked):
    return [(str(r.disease), r.score) for r in ranked]


class TestBaseIc:
    def test_fixture_scores(self, hp, hpoa, hp_ic):
        ranked = rank_diseases(hp_ic, hp, hpoa, patient(["HP:0001250", "HP:0001249"]), k=3)
        assert [str(r.disease) for r in ranked] == ["ORPHA:33069", "ORPHA:805", "ORPHA:739"]
        assert ranked[0].score == math.fsum([math.log(3.5), hp_ic[T("HP:0001249")]])
        assert [str(t) for t, _ in ranked[0].breakdown] == ["HP:0001249", "HP:0001250"]
        assert [r.rank for r in ranked] == [1, 2, 3]

    def test_propagation_toggle(self, hp, hpoa, hp_ic):
        p = patient(["HP:0000707"])  # nervous system abnormality, only reachable by propagation
        assert score_base_ic(hp_ic, p, hpoa.phenotypes_of(T("ORPHA:805")), hp)[0] > 0
        assert score_base_ic(hp_ic, p, hpoa.phenotypes_of(T("ORPHA:805")))[0] == 0

    def test_k_default_and_errors(self, hp, hpoa, hp_ic):
        ranked = rank_diseases(hp_ic, hp, hpoa, patient(["HP:0001250"]))
        assert len(ranked) == len(hpoa.diseases())
        with pytest.raises(RankingError) as exc:
            rank_diseases(hp_ic, hp, hpoa, patient(["HP:0001250"]), k=0)
        assert exc.value.code == "BAD_K"
        with pytest.raises(RankingError):
            PatientProfile("x", frozenset({T("ORPHA:905")}))

    def test_matches_oracle_on_fixture(self, hp, hpoa, hp_ic):
        parents = oracles.graph_to_parents(hp)
        corpus = oracles.annotations_to_corpus(hpoa)
        ic = {str(t): v for t, v in hp_ic.ic.items()}
        for terms in (["HP:0001250"], ["HP:0001250", "HP:0001252", "HP:0000118"], ["HP:0000365"]):
            got = as_pairs(rank_diseases(hp_ic, hp, hpoa, patient(terms), k=50))
            assert got == oracles.base_ic_ranking(parents, corpus, ic, terms)


class TestResnik:
    def test_pairwise(self, hp, hp_ic):
        sim = ResnikSimilarity(hp_ic, hp)
        assert sim.sim(T("HP:0001250"), T("HP:0001250")) == hp_ic[T("HP:0001250")]
        assert sim.sim(T("HP:0001250"), T("HP:0001252")) == sim.sim(T("HP:0001252"), T("HP:0001250"))
        assert sim.sim(T("HP:0000001"), T("HP:0001250")) == 0.0

    def test_self_similarity_is_maximal(self, hp, hpoa, hp_ic):
        sim = ResnikSimilarity(hp_ic, hp)
        for d in hpoa.diseases():
            terms = hpoa.phenotypes_of(d)
            ranked = rank_diseases(hp_ic, hp, hpoa, PatientProfile("p", terms), Method.BIDIRECTIONAL, similarity=sim)
            assert ranked[0].score == pytest.approx(sim.bidirectional(terms, terms))

    def test_empty_sets(self, hp, hp_ic):
        with pytest.raises(RankingError):
            ResnikSimilarity(hp_ic, hp).bidirectional([], [T("HP:0001250")])

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_oracle_on_small_random_corpora(self, seed):
        parents, corpus = oracles.random_corpus(seed, 25, 6, max_annotations=4)
        graph, anns = oracles.to_objects(parents, corpus)
        ic = compute_ic(graph, anns)
        ic_raw = {str(t): v for t, v in ic.ic.items()}
        terms = random.Random(seed).sample(sorted(parents), 3)
        got = as_pairs(rank_diseases(ic, graph, anns, patient(terms), Method.BIDIRECTIONAL, k=50))
        assert got == oracles.bidirectional_ranking(parents, corpus, ic_raw, terms)


class TestTiers:
    @pytest.mark.parametrize("n, tier", [(0, Tier.FEW), (1, Tier.FEW), (2, Tier.MODERATE), (4, Tier.MODERATE),
                                         (5, Tier.RICH), (40, Tier.RICH)])
    def test_boundaries(self, n, tier):
        assert tier_for(n) is tier

    def test_negative(self):
        with pytest.raises(RankingError):
            tier_for(-1)

    def test_stratify_exact_vs_propagated(self, hp, hpoa):
        p = patient(["HP:0001250", "HP:0001249", "HP:0000707", "HP:0001252"], truth="ORPHA:805")
        exact = stratify_case(hpoa, p)
        assert exact.key_count == 2 and exact.tier is Tier.MODERATE
        assert stratify_case(hpoa, p, hp).key_count == 3
        with pytest.raises(RankingError) as exc:
            stratify_case(hpoa, patient(["HP:0001250"]))
        assert exc.value.code == "MISSING_TRUTH"

    def test_counts(self, hpoa):
        strata = [stratify_case(hpoa, patient(t, "ORPHA:905")) for t in (["HP:0001399"], [], ["HP:0001399", "HP:0001394"])]
        assert tier_counts(strata) == {Tier.FEW: 2, Tier.MODERATE: 1, Tier.RICH: 0}


def ic_table(values):
    ic = {T(k): v for k, v in values.items()}
    return TermIC(MappingProxyType(ic), 10, max(ic.values()), frozenset())


class TestDifficulty:
    def test_degenerate(self):
        ic = ic_table({"HP:0000002": 1.0, "HP:0000003": 2.0})
        with pytest.raises(RankingError) as exc:
            composite_difficulty(ic, [patient(["HP:0000002"], case_id="a")])
        assert exc.value.code == "DEGENERATE_COHORT"
        same = [patient(["HP:0000002"], case_id="a"), patient(["HP:0000003"], case_id="b")]
        with pytest.raises(RankingError) as exc:
            composite_difficulty(ic, same)
        assert exc.value.code == "DEGENERATE_COHORT"

    def test_disease_extrema_clip(self, hpoa, hp_ic):
        cohort = [patient(["HP:0000001"], case_id="a"), patient(["HP:0001250", "HP:0001252"], case_id="b")]
        scores = composite_difficulty(hp_ic, cohort, "diseases", hpoa)
        for s in scores:
            assert 0.0 <= s.norm_mean_ic <= 1.0 and 0.0 <= s.norm_cnt <= 1.0
        with pytest.raises(RankingError):
            composite_difficulty(hp_ic, cohort, "diseases")

    def test_selection(self):
        ic = ic_table({"HP:0000002": 1.0, "HP:0000003": 2.0, "HP:0000004": 0.5})
        cohort = [
            patient(["HP:0000002"], case_id="a"),
            patient(["HP:0000002", "HP:0000004"], case_id="b"),
            patient(["HP:0000002", "HP:0000003", "HP:0000004"], case_id="c"),
        ]
        scores = composite_difficulty(ic, cohort)
        assert select_top_difficult(scores, 1) == ["b"]
        assert select_top_difficult(scores, 2, "lowest_mean_ic") == ["b", "a"]
        with pytest.raises(RankingError):
            select_top_difficult(scores, 1, "random")
