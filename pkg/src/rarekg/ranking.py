"""Phenotype-driven disease scoring, key-phenotype tiers and case difficulty."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import OntologyError, RankingError
from .ingest import DiseaseAnnotationSet
from .ontology import Namespace, OntologyGraph, TermIC, TermId, mean_ic

DEFAULT_TOP_K = 20


class Method(str, Enum):
    BASE_IC = "base_ic"
    BIDIRECTIONAL = "bidirectional"


@dataclass(frozen=True)
class PatientProfile:
    case_id: str
    phenotypes: frozenset[TermId]
    truth: Optional[TermId] = None

    def __post_init__(self) -> None:
        bad = [str(p) for p in self.phenotypes if p.namespace is not Namespace.HP]
        if bad:
            raise RankingError("BAD_NAMESPACE", f"non-HP phenotypes in {self.case_id}: {', '.join(sorted(bad))}")


@dataclass(frozen=True)
class RankedDiagnosis:
    rank: int
    disease: TermId
    score: float
    breakdown: tuple[tuple[TermId, float], ...] = ()


def base_ic_from_closure(
    ic: TermIC, patient_terms: Iterable[TermId], closure: frozenset[TermId] | set[TermId]
) -> tuple[float, tuple[tuple[TermId, float], ...]]:
    """Sum IC over patient terms found in ``closure``; breakdown sorted by term."""
    shared = sorted(t for t in set(patient_terms) if t in closure)
    breakdown = tuple((t, ic[t]) for t in shared)
    return math.fsum(v for _, v in breakdown), breakdown


def disease_closure(graph: Optional[OntologyGraph], disease_terms: Iterable[TermId]) -> frozenset[TermId]:
    if graph is None:
        return frozenset(disease_terms)
    acc: set[TermId] = set()
    for t in disease_terms:
        acc |= graph.ancestors(t, reflexive=True)
    return frozenset(acc)


def score_base_ic(
    ic: TermIC,
    patient: PatientProfile,
    disease_terms: Iterable[TermId],
    graph: Optional[OntologyGraph] = None,
) -> tuple[float, tuple[tuple[TermId, float], ...]]:
    """Base_IC: sum of IC over patient terms shared with the disease.

    With ``graph`` given, a patient term is shared when it equals or is an
    ancestor of one of the disease's annotations (annotation propagation);
    without it, only exact matches count.
    """
    return base_ic_from_closure(ic, patient.phenotypes, disease_closure(graph, disease_terms))


class ResnikSimilarity:
    """Pairwise Resnik similarity (IC of the most informative common ancestor).

    Memoises per-term ancestor sets and per-pair results; one instance per
    (graph, ic) pair.
    """

    def __init__(self, ic: TermIC, graph: OntologyGraph) -> None:
        self.ic = ic
        self.graph = graph
        self._anc: dict[TermId, frozenset[TermId]] = {}
        self._pairs: dict[tuple[TermId, TermId], float] = {}

    def _ancestors(self, t: TermId) -> frozenset[TermId]:
        anc = self._anc.get(t)
        if anc is None:
            anc = self._anc[t] = self.graph.ancestors(t, reflexive=True)
        return anc

    def sim(self, a: TermId, b: TermId) -> float:
        key = (a, b) if a <= b else (b, a)
        hit = self._pairs.get(key)
        if hit is None:
            common = self._ancestors(a) & self._ancestors(b)
            hit = max((self.ic[t] for t in common), default=0.0)
            self._pairs[key] = hit
        return hit

    def directed(self, source: Iterable[TermId], target: Iterable[TermId]) -> float:
        src, tgt = sorted(set(source)), sorted(set(target))
        return math.fsum(max(self.sim(a, b) for b in tgt) for a in src) / len(src)

    def bidirectional(self, a_terms: Iterable[TermId], b_terms: Iterable[TermId]) -> float:
        a, b = frozenset(a_terms), frozenset(b_terms)
        if not a or not b:
            raise RankingError("EMPTY_SET", "bidirectional similarity needs two nonempty sets")
        return (self.directed(a, b) + self.directed(b, a)) / 2


def score_bidirectional(
    ic: TermIC, graph: OntologyGraph, patient_terms: Iterable[TermId], disease_terms: Iterable[TermId]
) -> float:
    """Mean of the two directed best-match averages of Resnik similarity."""
    return ResnikSimilarity(ic, graph).bidirectional(patient_terms, disease_terms)


def rank_diseases(
    ic: TermIC,
    graph: OntologyGraph,
    annotations: DiseaseAnnotationSet,
    patient: PatientProfile,
    method: Method | str = Method.BASE_IC,
    k: int = DEFAULT_TOP_K,
    propagate: bool = True,
    similarity: Optional[ResnikSimilarity] = None,
) -> list[RankedDiagnosis]:
    """Score every annotated disease and return the top ``k``.

    Order is (score descending, disease id ascending), so ties are total.
    ``similarity`` may be shared across patients to reuse the pair cache.
    """
    method = Method(method)
    if k < 1:
        raise RankingError("BAD_K", f"k must be >= 1, got {k}")
    diseases = annotations.diseases()
    if not diseases:
        raise RankingError("EMPTY_CORPUS", "no annotated diseases to rank")
    scored: list[tuple[float, TermId, tuple]] = []
    if method is Method.BASE_IC:
        for d in diseases:
            closure = disease_closure(graph if propagate else None, annotations.phenotypes_of(d))
            score, breakdown = base_ic_from_closure(ic, patient.phenotypes, closure)
            scored.append((score, d, breakdown))
    else:
        sim = similarity or ResnikSimilarity(ic, graph)
        for d in diseases:
            if patient.phenotypes:
                score = sim.bidirectional(patient.phenotypes, annotations.phenotypes_of(d))
            else:
                score = 0.0
            scored.append((score, d, ()))
    scored.sort(key=lambda x: (-x[0], str(x[1])))
    return [RankedDiagnosis(i, d, s, b) for i, (s, d, b) in enumerate(scored[:k], start=1)]


# ---------------------------------------------------------------------------
# key-phenotype tiers


class Tier(str, Enum):
    FEW = "FEW"
    MODERATE = "MODERATE"
    RICH = "RICH"


def tier_for(key_count: int) -> Tier:
    if key_count < 0:
        raise RankingError("BAD_COUNT", "key count must be non-negative")
    if key_count <= 1:
        return Tier.FEW
    if key_count <= 4:
        return Tier.MODERATE
    return Tier.RICH


@dataclass(frozen=True)
class CaseStratum:
    tier: Tier
    key_count: int
    key_terms: frozenset[TermId]


def stratify_case(
    annotations: DiseaseAnnotationSet,
    patient: PatientProfile,
    graph: Optional[OntologyGraph] = None,
) -> CaseStratum:
    """Count patient phenotypes that exactly match the truth disease's annotations.

    Passing ``graph`` switches to the propagated variant, where a patient term
    also counts when it is an ancestor of an annotation.
    """
    if patient.truth is None:
        raise RankingError("MISSING_TRUTH", f"case {patient.case_id} has no confirmed diagnosis")
    annotated = annotations.phenotypes_of(patient.truth)
    reference = disease_closure(graph, annotated) if graph is not None else annotated
    key_terms = frozenset(p for p in patient.phenotypes if p in reference)
    return CaseStratum(tier_for(len(key_terms)), len(key_terms), key_terms)


# ---------------------------------------------------------------------------
# composite difficulty


@dataclass(frozen=True)
class DifficultyScore:
    case_id: str
    mean_ic: float
    norm_mean_ic: float
    phen_count: int
    norm_cnt: float
    composite: float
    mean_ic_min: float
    mean_ic_max: float
    n_min: int
    n_max: int

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id, "mean_ic": self.mean_ic, "norm_mean_ic": self.norm_mean_ic,
            "n": self.phen_count, "norm_cnt": self.norm_cnt, "composite": self.composite,
        }


class Extrema(str, Enum):
    CASES = "cases"
    DISEASES = "diseases"


def _normalize(x: float, lo: float, hi: float) -> float:
    return (x - lo) / (hi - lo)


def composite_difficulty(
    ic: TermIC,
    cohort: Sequence[PatientProfile],
    extrema: Extrema | str = Extrema.CASES,
    annotations: Optional[DiseaseAnnotationSet] = None,
) -> list[DifficultyScore]:
    """Per-case composite difficulty, ``(1 - norm_mean_ic) * norm_cnt``.

    ``extrema="cases"`` takes Mean_IC and phenotype-count bounds over the
    cohort itself. ``extrema="diseases"`` takes them over the annotated
    diseases in ``annotations``; case values falling outside those bounds are
    clipped into [0, 1].
    """
    extrema = Extrema(extrema)
    if len(cohort) < 2:
        raise RankingError("DEGENERATE_COHORT", "composite difficulty needs at least two cases")
    means, counts = [], []
    for case in cohort:
        if not case.phenotypes:
            raise RankingError("EMPTY_PHENOTYPES", f"case {case.case_id} has no phenotypes")
        try:
            means.append(mean_ic(ic, case.phenotypes))
        except OntologyError as exc:
            raise RankingError(exc.code, f"case {case.case_id}: {exc.message}") from None
        counts.append(len(case.phenotypes))

    if extrema is Extrema.CASES:
        ref_means, ref_counts = means, counts
    else:
        if annotations is None or not annotations.diseases():
            raise RankingError("EMPTY_CORPUS", "disease extrema need an annotation set")
        ref_means = [mean_ic(ic, annotations.phenotypes_of(d)) for d in annotations.diseases()]
        ref_counts = [len(annotations.phenotypes_of(d)) for d in annotations.diseases()]
    lo_m, hi_m = min(ref_means), max(ref_means)
    lo_n, hi_n = min(ref_counts), max(ref_counts)
    if hi_m == lo_m or hi_n == lo_n:
        raise RankingError(
            "DEGENERATE_COHORT", "Mean_IC or phenotype count has zero range; normalization undefined",
            mean_ic_range=(lo_m, hi_m), count_range=(lo_n, hi_n),
        )

    clip = extrema is Extrema.DISEASES
    out = []
    for case, m, n in zip(cohort, means, counts):
        norm_m = _normalize(m, lo_m, hi_m)
        norm_n = _normalize(n, lo_n, hi_n)
        if clip:
            norm_m = min(1.0, max(0.0, norm_m))
            norm_n = min(1.0, max(0.0, norm_n))
        out.append(DifficultyScore(
            case.case_id, m, norm_m, n, norm_n, (1 - norm_m) * norm_n, lo_m, hi_m, lo_n, hi_n,
        ))
    return out


def select_top_difficult(scores: Sequence[DifficultyScore], m: int, mode: str = "composite") -> list[str]:
    """Pick ``m`` case ids, hardest first.

    ``mode="composite"`` orders by composite descending; ``mode="lowest_mean_ic"``
    by Mean_IC ascending. Ties fall back to case id.
    """
    if m < 1:
        raise RankingError("BAD_M", f"m must be >= 1, got {m}")
    if mode == "composite":
        ordered = sorted(scores, key=lambda s: (-s.composite, s.case_id))
    elif mode == "lowest_mean_ic":
        ordered = sorted(scores, key=lambda s: (s.mean_ic, s.case_id))
    else:
        raise RankingError("BAD_MODE", f"unknown selection mode {mode!r}")
    return [s.case_id for s in ordered[:m]]


def tier_counts(strata: Iterable[CaseStratum]) -> Mapping[Tier, int]:
    counts = {t: 0 for t in Tier}
    for s in strata:
        counts[s.tier] += 1
    return counts
