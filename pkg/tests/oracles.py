"""Brute-force reference implementations used only by the tests.

Nothing here imports the closure, IC or scoring code under test. Inputs are
plain dicts: ``parents`` maps a term string to its parent strings, and
``corpus`` maps a disease string to its annotated term strings.
"""

import math
import random
from fractions import Fraction

from rarekg.ingest import DiseaseAnnotation, DiseaseAnnotationSet
from rarekg.ontology import OntologyGraph, OntologyTerm, TermId


def ancestors(parents, term):
    """Reflexive ancestors by plain depth-first search."""
    seen = {term}
    stack = [term]
    while stack:
        for p in parents.get(stack.pop(), ()):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def ic_table(parents, corpus):
    """IC from raw counts; unannotated terms get the largest observed value."""
    closures = {d: set().union(*(ancestors(parents, t) for t in terms)) for d, terms in corpus.items()}
    total = len(corpus)
    out = {}
    for t in parents:
        n = sum(1 for c in closures.values() if t in c)
        out[t] = math.log(Fraction(total, n)) if n else None
    observed = max(v for v in out.values() if v is not None)
    return {t: observed if v is None else v for t, v in out.items()}


def _exact_sum(values):
    return float(sum((Fraction(v) for v in values), Fraction(0)))


def base_ic_ranking(parents, corpus, ic, patient):
    """Intersection-sum over the propagated disease closure, every disease scored."""
    scored = []
    for d, terms in corpus.items():
        closure = set().union(*(ancestors(parents, t) for t in terms))
        scored.append((_exact_sum(ic[t] for t in sorted(set(patient)) if t in closure), d))
    scored.sort(key=lambda x: (-x[0], x[1]))
    return [(d, s) for s, d in scored]


def mica(parents, ic, a, b):
    """Exhaustive most-informative common ancestor: scan every term in the ontology."""
    anc_a, anc_b = ancestors(parents, a), ancestors(parents, b)
    best = 0.0
    for c in parents:
        if c in anc_a and c in anc_b and ic[c] > best:
            best = ic[c]
    return best


def bidirectional_ranking(parents, corpus, ic, patient):
    scored = []
    pset = sorted(set(patient))
    for d, terms in corpus.items():
        dset = sorted(set(terms))
        ab = _exact_sum(max(mica(parents, ic, a, b) for b in dset) for a in pset) / len(pset)
        ba = _exact_sum(max(mica(parents, ic, b, a) for a in pset) for b in dset) / len(dset)
        scored.append(((ab + ba) / 2, d))
    scored.sort(key=lambda x: (-x[0], x[1]))
    return [(d, s) for s, d in scored]


def random_corpus(seed, n_terms, n_diseases, max_annotations=8):
    """Random rooted DAG over HP ids plus a disease corpus over it."""
    rng = random.Random(seed)
    ids = [f"HP:{i:07d}" for i in range(1, n_terms + 1)]
    parents = {ids[0]: []}
    for i in range(1, n_terms):
        k = rng.randint(1, min(3, i))
        parents[ids[i]] = sorted(rng.sample(ids[:i], k))
    corpus = {}
    for j in range(1, n_diseases + 1):
        pool = ids[1:] or ids
        corpus[f"ORPHA:{j}"] = sorted(rng.sample(pool, rng.randint(1, min(max_annotations, len(pool)))))
    return parents, corpus


def to_objects(parents, corpus, order=None):
    """Build the package's graph and annotation set from raw dicts."""
    graph = OntologyGraph(
        OntologyTerm(TermId.parse(t), t, (), frozenset(TermId.parse(p) for p in ps)) for t, ps in parents.items()
    )
    items = [(d, t) for d, ts in corpus.items() for t in ts]
    if order is not None:
        items = [items[i] for i in order]
    anns = DiseaseAnnotationSet(DiseaseAnnotation(TermId.parse(d), TermId.parse(t)) for d, t in items)
    return graph, anns


def graph_to_parents(graph):
    return {str(t): [str(p) for p in graph.parents(t)] for t in graph}


def annotations_to_corpus(anns):
    return {str(d): sorted(str(p) for p in anns.phenotypes_of(d)) for d in anns.diseases()}


def quantile(values, p):
    """Linear interpolation between order statistics at position (n - 1) * p."""
    xs = sorted(Fraction(v) for v in values)
    h = (len(xs) - 1) * Fraction(p)
    lo = int(h)
    hi = min(lo + 1, len(xs) - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


# Welch t-tests evaluated once with mpmath at 50 significant digits and frozen here.
WELCH_CASES = [
    (
        [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4],
        [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4],
        -2.4553563982860050625, 24.988529290231414357, 0.021378001462867032492,
    ),
    ([1, 2, 3, 4, 5], [2, 4, 6, 8, 10, 12], -2.376354103144018342, 6.972255729794933655, 0.049284338206730520766),
    (
        [0.1, 0.5, 0.9, 1.3], [3.1, 2.9, 3.5, 3.3, 3.0],
        -8.7931946738601235345, 4.0430230750351762528, 0.00087874864640069740599,
    ),
]
