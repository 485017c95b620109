"""Disease-phenotype-gene-variant knowledge graph and typed retrieval.

The graph lives in process with adjacency indexes keyed by
(node, edge kind, direction). Everything that leaves this module (context
blocks, snapshots) is emitted in canonical order so repeated runs are
byte-identical.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Optional, Sequence, Union

from .errors import GraphError
from .ingest import (
    CrossReferenceTable,
    DiseaseAnnotationSet,
    Frequency,
    GeneRecord,
    VariantRecord,
    parse_variant_key,
    validate_sources,
    variant_key_str,
)
from .ontology import Namespace, OntologyGraph, TermIC, TermId
from .ranking import base_ic_from_closure

SNAPSHOT_FORMAT = "rarekg.kg-snapshot"
SNAPSHOT_VERSION = 1
CONTEXT_SCHEMA_VERSION = 1
TEXT_HEADER = "# rarekg context v1"


class NodeKind(str, Enum):
    DISEASE = "DISEASE"
    PHENOTYPE = "PHENOTYPE"
    GENE = "GENE"
    VARIANT = "VARIANT"


class EdgeKind(str, Enum):
    DISEASE_PHENOTYPE = "DISEASE_PHENOTYPE"
    DISEASE_GENE = "DISEASE_GENE"
    GENE_VARIANT = "GENE_VARIANT"
    PHENOTYPE_GENE = "PHENOTYPE_GENE"
    DISEASE_PARENT = "DISEASE_PARENT"
    DISEASE_XREF = "DISEASE_XREF"


EDGE_SIGNATURES: Mapping[EdgeKind, tuple[NodeKind, NodeKind]] = MappingProxyType({
    EdgeKind.DISEASE_PHENOTYPE: (NodeKind.DISEASE, NodeKind.PHENOTYPE),
    EdgeKind.DISEASE_GENE: (NodeKind.DISEASE, NodeKind.GENE),
    EdgeKind.GENE_VARIANT: (NodeKind.GENE, NodeKind.VARIANT),
    EdgeKind.PHENOTYPE_GENE: (NodeKind.PHENOTYPE, NodeKind.GENE),
    EdgeKind.DISEASE_PARENT: (NodeKind.DISEASE, NodeKind.DISEASE),
    EdgeKind.DISEASE_XREF: (NodeKind.DISEASE, NodeKind.DISEASE),
})

# midpoints of the Orphanet frequency bins; used only when weighting is switched on
FREQUENCY_WEIGHTS: Mapping[Frequency, float] = MappingProxyType({
    Frequency.ALWAYS_PRESENT: 1.0,
    Frequency.VERY_FREQUENT: 0.895,
    Frequency.FREQUENT: 0.545,
    Frequency.OCCASIONAL: 0.17,
    Frequency.RARE: 0.025,
    Frequency.UNKNOWN: 1.0,
})


@dataclass(frozen=True)
class KGNode:
    kind: NodeKind
    key: str
    label: str
    attrs: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class KGEdge:
    kind: EdgeKind
    source: str
    target: str
    provenance: tuple[str, ...] = ()
    frequency: Optional[Frequency] = None

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.kind.value, self.source, self.target)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.value, "from": self.source, "to": self.target}
        if self.frequency is not None:
            d["frequency"] = self.frequency.value
        d["provenance"] = list(self.provenance)
        return d


def _key_kind(key: str) -> NodeKind:
    head, sep, _ = key.partition(":")
    if sep and head == Namespace.HP.value:
        return NodeKind.PHENOTYPE
    if sep and head in (Namespace.ORPHA.value, Namespace.OMIM.value):
        return NodeKind.DISEASE
    if key.count("-") >= 3 and key.split("-")[1].isdigit():
        return NodeKind.VARIANT
    return NodeKind.GENE


class KnowledgeGraph:
    """Immutable typed graph.

    ``term_ancestors`` holds, for every phenotype node, its reflexive ancestor
    set in the phenotype ontology, so propagated phenotype matching works on a
    loaded snapshot without the ontology file. ``term_labels`` covers every
    term appearing in those sets.
    """

    def __init__(
        self,
        nodes: Iterable[KGNode],
        edges: Iterable[KGEdge],
        term_labels: Mapping[str, str],
        term_ancestors: Mapping[str, Iterable[str]],
    ) -> None:
        node_map: dict[str, KGNode] = {}
        for n in nodes:
            if n.key in node_map:
                raise GraphError("DUPLICATE_NODE", f"node {n.key} defined twice")
            if _key_kind(n.key) is not n.kind:
                raise GraphError("BAD_NODE", f"node {n.key} does not look like a {n.kind.value}")
            node_map[n.key] = n
        seen: set[tuple[str, str, str]] = set()
        edge_list = sorted(edges, key=lambda e: e.sort_key)
        adjacency: dict[tuple[str, EdgeKind, str], list[KGEdge]] = {}
        for e in edge_list:
            if e.sort_key in seen:
                raise GraphError("DUPLICATE_EDGE", f"duplicate edge {e.sort_key}")
            seen.add(e.sort_key)
            src, dst = node_map.get(e.source), node_map.get(e.target)
            if src is None or dst is None:
                raise GraphError("DANGLING_EDGE", f"edge {e.sort_key} references a missing node")
            if (src.kind, dst.kind) != EDGE_SIGNATURES[e.kind]:
                raise GraphError("BAD_EDGE", f"edge {e.sort_key} violates its kind signature")
            if (e.kind is EdgeKind.DISEASE_PHENOTYPE) != (e.frequency is not None):
                raise GraphError("BAD_EDGE", f"frequency must be set exactly on DISEASE_PHENOTYPE edges")
            adjacency.setdefault((e.source, e.kind, "out"), []).append(e)
            adjacency.setdefault((e.target, e.kind, "in"), []).append(e)

        self._nodes = MappingProxyType(dict(sorted(node_map.items())))
        self._edges = tuple(edge_list)
        self._adjacency = {k: tuple(v) for k, v in adjacency.items()}
        self._term_labels = MappingProxyType(dict(sorted(term_labels.items())))
        self._term_ancestors = MappingProxyType(
            {k: frozenset(v) for k, v in sorted(term_ancestors.items())}
        )
        missing = [k for k, n in self._nodes.items() if n.kind is NodeKind.PHENOTYPE and k not in self._term_ancestors]
        if missing:
            raise GraphError("MISSING_CLOSURE", f"no ancestor set for phenotype nodes {missing[:5]}")
        self._closures: dict[tuple[str, bool], frozenset[str]] = {}
        self._by_closure_term: dict[bool, dict[str, frozenset[str]]] = {}

    @property
    def nodes(self) -> Mapping[str, KGNode]:
        return self._nodes

    @property
    def edges(self) -> tuple[KGEdge, ...]:
        return self._edges

    @property
    def term_labels(self) -> Mapping[str, str]:
        return self._term_labels

    @property
    def term_ancestors(self) -> Mapping[str, frozenset[str]]:
        return self._term_ancestors

    def node(self, key: str) -> KGNode:
        try:
            return self._nodes[key]
        except KeyError:
            raise GraphError("ENTITY_NOT_FOUND", f"no node {key!r}", key=key) from None

    def __contains__(self, key: object) -> bool:
        return key in self._nodes

    def incident(self, key: str, kind: EdgeKind, direction: str) -> tuple[KGEdge, ...]:
        return self._adjacency.get((key, kind, direction), ())

    def has_edge(self, edge: KGEdge) -> bool:
        return any(e == edge for e in self.incident(edge.source, edge.kind, "out"))

    def label(self, key: str) -> str:
        node = self._nodes.get(key)
        if node is not None:
            return node.label
        return self._term_labels.get(key, key)

    @property
    def build_stats(self) -> dict:
        node_counts = Counter(n.kind.value for n in self._nodes.values())
        edge_counts = Counter(e.kind.value for e in self._edges)
        diseases = [k for k, n in self._nodes.items() if n.kind is NodeKind.DISEASE]
        return {
            "nodes": {k.value: node_counts.get(k.value, 0) for k in NodeKind},
            "edges": {k.value: edge_counts.get(k.value, 0) for k in EdgeKind},
            "unique_variant_sites": node_counts.get(NodeKind.VARIANT.value, 0),
            "omim_coded_diseases": sum(1 for d in diseases if d.startswith("OMIM:")),
            "orphanet_coded_diseases": sum(1 for d in diseases if d.startswith("ORPHA:")),
            "unique_phenotypes": node_counts.get(NodeKind.PHENOTYPE.value, 0),
            "genes": node_counts.get(NodeKind.GENE.value, 0),
            "disease_phenotype_relationships": edge_counts.get(EdgeKind.DISEASE_PHENOTYPE.value, 0),
        }

    def disease_closure(self, disease: str, propagate: bool = True) -> frozenset[str]:
        """Phenotype terms a disease matches: its annotations, plus their ancestors if ``propagate``."""
        cache_key = (disease, propagate)
        hit = self._closures.get(cache_key)
        if hit is not None:
            return hit
        acc: set[str] = set()
        for e in self.incident(disease, EdgeKind.DISEASE_PHENOTYPE, "out"):
            if propagate:
                acc |= self._term_ancestors[e.target]
            else:
                acc.add(e.target)
        result = self._closures[cache_key] = frozenset(acc)
        return result

    def diseases_matching(self, term: str, propagate: bool = True) -> frozenset[str]:
        index = self._by_closure_term.get(propagate)
        if index is None:
            building: dict[str, set[str]] = {}
            for key, node in self._nodes.items():
                if node.kind is NodeKind.DISEASE:
                    for t in self.disease_closure(key, propagate):
                        building.setdefault(t, set()).add(key)
            index = {t: frozenset(ds) for t, ds in building.items()}
            self._by_closure_term[propagate] = index
        return index.get(term, frozenset())


# ---------------------------------------------------------------------------
# build


def build_kg(
    ontology: OntologyGraph,
    annotations: DiseaseAnnotationSet,
    genes: Sequence[GeneRecord] = (),
    variants: Sequence[VariantRecord] = (),
    disease_ontology: Optional[OntologyGraph] = None,
    xrefs: Optional[CrossReferenceTable] = None,
) -> KnowledgeGraph:
    """Instantiate nodes and edges from validated sources.

    Disease nodes cover annotated and gene-linked diseases plus their
    disease-ontology ancestors (so every DISEASE_PARENT edge resolves).
    A (disease, phenotype) pair reported by several sources becomes one edge
    with merged provenance; its frequency comes from the first source, in
    name order, that states one.
    """
    report = validate_sources(ontology, annotations, genes, variants, disease_ontology)
    if not report.clean:
        raise GraphError("VALIDATION_NOT_CLEAN", "source validation reported findings", counts=report.counts)

    disease_labels: dict[TermId, str] = {}
    for d, name in annotations.disease_names.items():
        disease_labels[d] = name
    disease_ids = set(annotations.by_disease)
    for g in genes:
        disease_ids |= g.diseases
    if disease_ontology is not None:
        for d in list(disease_ids):
            if d in disease_ontology:
                disease_ids |= disease_ontology.ancestors(d)
        for d in disease_ids:
            if d in disease_ontology and d not in disease_labels:
                disease_labels[d] = disease_ontology.label(d)

    phenotype_ids = set(annotations.by_phenotype)
    for g in genes:
        phenotype_ids |= g.phenotypes

    nodes: list[KGNode] = []
    for d in disease_ids:
        nodes.append(KGNode(NodeKind.DISEASE, str(d), disease_labels.get(d, str(d))))
    term_labels: dict[str, str] = {}
    term_ancestors: dict[str, list[str]] = {}
    for p in phenotype_ids:
        nodes.append(KGNode(NodeKind.PHENOTYPE, str(p), ontology.label(p)))
        closure = ontology.ancestors(p, reflexive=True)
        term_ancestors[str(p)] = sorted(str(a) for a in closure)
        for a in closure:
            term_labels[str(a)] = ontology.label(a)
    for g in genes:
        nodes.append(KGNode(NodeKind.GENE, g.symbol, g.symbol))
    for v in variants:
        attrs = [("significance", v.significance.value)]
        for name in ("transcript", "hgvs_c", "hgvs_p"):
            value = getattr(v, name)
            if value:
                attrs.append((name, value))
        label = " ".join(x for x in (v.gene, v.transcript, v.hgvs_c, v.hgvs_p) if x) or v.key_str
        nodes.append(KGNode(NodeKind.VARIANT, v.key_str, label, tuple(attrs)))

    edges: list[KGEdge] = []
    per_pair: dict[tuple[TermId, TermId], list] = {}
    for ann in annotations:
        per_pair.setdefault((ann.disease, ann.phenotype), []).append(ann)
    for (d, p), anns in per_pair.items():
        anns.sort(key=lambda a: a.provenance)
        stated = [a.frequency for a in anns if a.frequency is not Frequency.UNKNOWN]
        edges.append(KGEdge(
            EdgeKind.DISEASE_PHENOTYPE, str(d), str(p),
            tuple(sorted({a.provenance for a in anns})), stated[0] if stated else Frequency.UNKNOWN,
        ))
    for g in genes:
        for d in g.diseases:
            edges.append(KGEdge(EdgeKind.DISEASE_GENE, str(d), g.symbol, ("GENE_TABLE",)))
        for p in g.phenotypes:
            edges.append(KGEdge(EdgeKind.PHENOTYPE_GENE, str(p), g.symbol, ("GENE_TABLE",)))
    for v in variants:
        edges.append(KGEdge(EdgeKind.GENE_VARIANT, v.gene, v.key_str, tuple(sorted(v.provenance))))
    if disease_ontology is not None:
        for d in disease_ids:
            if d in disease_ontology:
                for parent in disease_ontology.parents(d):
                    edges.append(KGEdge(EdgeKind.DISEASE_PARENT, str(d), str(parent), ("DISEASE_ONTOLOGY",)))
    if xrefs is not None:
        for omim, orpha in xrefs.pairs():
            if omim in disease_ids and orpha in disease_ids:
                edges.append(KGEdge(EdgeKind.DISEASE_XREF, str(omim), str(orpha), ("XREF",)))
    return KnowledgeGraph(nodes, edges, term_labels, term_ancestors)


# ---------------------------------------------------------------------------
# retrieval


@dataclass(frozen=True)
class RetrievalQuery:
    kind: NodeKind
    keys: tuple[str, ...]
    max_candidates: int = 20
    include_kinds: Optional[frozenset[EdgeKind]] = None

    def __post_init__(self) -> None:
        if not self.keys:
            raise GraphError("EMPTY_QUERY", "query needs at least one entity")
        if self.kind is not NodeKind.PHENOTYPE and len(self.keys) != 1:
            raise GraphError("EMPTY_QUERY", f"{self.kind.value} queries take exactly one entity")
        if self.max_candidates < 1:
            raise GraphError("BAD_K", "max_candidates must be >= 1")

    @classmethod
    def for_disease(cls, disease: TermId | str, **kw) -> "RetrievalQuery":
        return cls(NodeKind.DISEASE, (str(TermId.parse(str(disease))),), **kw)

    @classmethod
    def for_phenotypes(cls, phenotypes: Iterable[TermId | str], **kw) -> "RetrievalQuery":
        keys = tuple(sorted({str(TermId.parse(str(p))) for p in phenotypes}))
        return cls(NodeKind.PHENOTYPE, keys, **kw)

    @classmethod
    def for_gene(cls, symbol: str, **kw) -> "RetrievalQuery":
        return cls(NodeKind.GENE, (symbol.strip().upper(),), **kw)

    @classmethod
    def for_variant(cls, key: str, **kw) -> "RetrievalQuery":
        return cls(NodeKind.VARIANT, (variant_key_str(parse_variant_key(key)),), **kw)

    def describe(self) -> dict:
        return {"kind": self.kind.value, "entities": list(self.keys)}


@dataclass(frozen=True)
class Candidate:
    disease: str
    label: str
    score: float
    matched_terms: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class ContextBlock:
    query: Optional[dict] = None
    focus: tuple[str, ...] = ()
    candidates: tuple[Candidate, ...] = ()
    evidence_edges: tuple[KGEdge, ...] = ()
    labels: Mapping[str, str] = field(default_factory=dict)
    unresolved: tuple[str, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.candidates and not self.evidence_edges


def _labels_for(kg: KnowledgeGraph, keys: Iterable[str]) -> dict[str, str]:
    return {k: kg.label(k) for k in sorted(set(keys))}


def query_typed(kg: KnowledgeGraph, q: RetrievalQuery, ic: Optional[TermIC] = None) -> ContextBlock:
    """Typed neighbourhood retrieval.

    Disease and gene focus return their 1-hop edges; variant focus returns the
    variant's gene edge plus that gene's disease edges; phenotype sets are
    ranked by :func:`retrieve_by_phenotypes`.
    """
    if q.kind is NodeKind.PHENOTYPE:
        if ic is None:
            raise GraphError("MISSING_IC", "phenotype queries need term IC")
        return retrieve_by_phenotypes(kg, ic, q.keys, q.max_candidates, include_kinds=q.include_kinds)
    key = q.keys[0]
    node = kg.node(key)
    if node.kind is not q.kind:
        raise GraphError("ENTITY_NOT_FOUND", f"{key} is a {node.kind.value}, not a {q.kind.value}", key=key)
    allowed = q.include_kinds or frozenset(EdgeKind)
    edges: list[KGEdge] = []
    if q.kind is NodeKind.VARIANT:
        for gv in kg.incident(key, EdgeKind.GENE_VARIANT, "in"):
            if EdgeKind.GENE_VARIANT in allowed:
                edges.append(gv)
            if EdgeKind.DISEASE_GENE in allowed:
                edges.extend(kg.incident(gv.source, EdgeKind.DISEASE_GENE, "in"))
    else:
        for kind in EdgeKind:
            if kind in allowed:
                edges.extend(kg.incident(key, kind, "out"))
                edges.extend(kg.incident(key, kind, "in"))
    edges = sorted(set(edges), key=lambda e: e.sort_key)
    keys = [key] + [e.source for e in edges] + [e.target for e in edges]
    return ContextBlock(q.describe(), (key,), (), tuple(edges), _labels_for(kg, keys))


def retrieve_by_phenotypes(
    kg: KnowledgeGraph,
    ic: TermIC,
    phenotypes: Iterable[TermId | str],
    k: int = 20,
    propagate: bool = True,
    frequency_weighted: bool = False,
    include_kinds: Optional[frozenset[EdgeKind]] = None,
) -> ContextBlock:
    """Rank candidate diseases for a phenotype set by Base_IC.

    A disease is a candidate when a query term equals one of its annotations
    or (with ``propagate``) is an ancestor of one. Evidence is the
    DISEASE_PHENOTYPE edges behind each match; ``include_kinds`` can add other
    1-hop edges of the returned candidates.
    """
    if k < 1:
        raise GraphError("BAD_K", "k must be >= 1")
    query = sorted({str(TermId.parse(str(p))) for p in phenotypes})
    if not query:
        raise GraphError("NO_RESOLVABLE_PHENOTYPE", "empty phenotype query")
    resolvable = [t for t in query if t in kg.term_labels or t in kg.nodes]
    unresolved = tuple(t for t in query if t not in set(resolvable))
    if not resolvable:
        raise GraphError("NO_RESOLVABLE_PHENOTYPE", f"none of {query} is known to the graph")

    query_ids = {t: TermId.parse(t) for t in resolvable}
    candidates: set[str] = set()
    for t in resolvable:
        candidates |= kg.diseases_matching(t, propagate)

    scored = []
    for d in candidates:
        closure = kg.disease_closure(d, propagate)
        _, breakdown = base_ic_from_closure(
            ic, query_ids.values(), frozenset(query_ids[t] for t in closure if t in query_ids)
        )
        if frequency_weighted:
            breakdown = tuple((t, v * _best_weight(kg, d, str(t), propagate)) for t, v in breakdown)
        score = math.fsum(v for _, v in breakdown)
        scored.append((score, d, tuple((str(t), v) for t, v in breakdown)))
    scored.sort(key=lambda x: (-x[0], x[1]))
    top = scored[:k]

    wanted = set(resolvable)
    evidence: list[KGEdge] = []
    extra = (include_kinds or frozenset()) - {EdgeKind.DISEASE_PHENOTYPE}
    for _, d, _ in top:
        for e in kg.incident(d, EdgeKind.DISEASE_PHENOTYPE, "out"):
            reach = kg.term_ancestors[e.target] if propagate else {e.target}
            if reach & wanted:
                evidence.append(e)
        for kind in sorted(extra, key=lambda x: x.value):
            evidence.extend(kg.incident(d, kind, "out"))
            evidence.extend(kg.incident(d, kind, "in"))
    evidence = sorted(set(evidence), key=lambda e: e.sort_key)
    cands = tuple(Candidate(d, kg.label(d), s, m) for s, d, m in top)
    keys = list(query) + [c.disease for c in cands] + [e.source for e in evidence] + [e.target for e in evidence]
    query_desc = {"kind": NodeKind.PHENOTYPE.value, "entities": query, "k": k}
    return ContextBlock(query_desc, tuple(query), cands, tuple(evidence), _labels_for(kg, keys), unresolved)


def _best_weight(kg: KnowledgeGraph, disease: str, term: str, propagate: bool) -> float:
    weights = []
    for e in kg.incident(disease, EdgeKind.DISEASE_PHENOTYPE, "out"):
        reach = kg.term_ancestors[e.target] if propagate else {e.target}
        if term in reach:
            weights.append(FREQUENCY_WEIGHTS[e.frequency or Frequency.UNKNOWN])
    return max(weights, default=1.0)


# ---------------------------------------------------------------------------
# serialization


class ContextForm(str, Enum):
    TEXT = "text"
    STRUCTURED = "structured"


def context_to_dict(block: ContextBlock) -> dict:
    return {
        "schema_version": CONTEXT_SCHEMA_VERSION,
        "query": block.query,
        "candidates": [
            {
                "disease": c.disease,
                "label": c.label,
                "score": c.score,
                "matched_terms": [{"hpo": t, "ic": v} for t, v in c.matched_terms],
            }
            for c in block.candidates
        ],
        "evidence_edges": [e.to_dict() for e in block.evidence_edges],
        "labels": dict(sorted(block.labels.items())),
        "unresolved": list(block.unresolved),
    }


def serialize_context(block: ContextBlock, form: ContextForm | str = ContextForm.TEXT) -> bytes:
    """Render a context block as a text evidence listing or a JSON document."""
    form = ContextForm(form)
    if form is ContextForm.STRUCTURED:
        return (json.dumps(context_to_dict(block), ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")
    lines = [TEXT_HEADER]
    if block.query is not None:
        lines.append(f"query {block.query['kind']}: {', '.join(block.query['entities'])}")
    for t in block.unresolved:
        lines.append(f"unresolved {t}")
    for i, c in enumerate(block.candidates, start=1):
        matched = "; ".join(
            f"{t} {block.labels.get(t, t)} (IC {v:.4f})" for t, v in c.matched_terms
        )
        lines.append(f"candidate {i}. {c.disease} {c.label} | score {c.score:.4f} | matched: {matched}")
    for e in block.evidence_edges:
        src, dst = block.labels.get(e.source, e.source), block.labels.get(e.target, e.target)
        extra = f" | frequency {e.frequency.value}" if e.frequency is not None else ""
        lines.append(
            f"edge {e.kind.value}: {e.source} ({src}) -> {e.target} ({dst}){extra} | source {','.join(e.provenance)}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# snapshot


@dataclass(frozen=True)
class Snapshot:
    kg: KnowledgeGraph
    ic: Optional[TermIC]
    meta: Mapping[str, object]


def snapshot_lines(kg: KnowledgeGraph, ic: Optional[TermIC] = None, meta: Optional[Mapping] = None) -> list[str]:
    dump = lambda obj: json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))  # noqa: E731
    lines = [dump({
        "record": "header", "format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION,
        "build_stats": kg.build_stats, "meta": dict(meta or {}),
    })]
    for key, n in kg.nodes.items():
        lines.append(dump({"record": "node", "kind": n.kind.value, "key": key, "label": n.label,
                           "attrs": [list(a) for a in n.attrs]}))
    for e in kg.edges:
        lines.append(dump({"record": "edge", **e.to_dict()}))
    for t, label in kg.term_labels.items():
        rec = {"record": "term", "id": t, "label": label}
        if t in kg.term_ancestors:
            rec["ancestors"] = sorted(kg.term_ancestors[t])
        lines.append(dump(rec))
    if ic is not None:
        lines.append(dump({"record": "ic_header", "corpus_size": ic.corpus_size, "max_observed": ic.max_observed}))
        for t in sorted(ic.ic):
            lines.append(dump({"record": "ic", "id": str(t), "ic": ic.ic[t], "annotated": t not in ic.unannotated}))
    return lines


def save_snapshot(
    kg: KnowledgeGraph, dest: Union[str, IO[str]], ic: Optional[TermIC] = None, meta: Optional[Mapping] = None
) -> None:
    text = "\n".join(snapshot_lines(kg, ic, meta)) + "\n"
    if isinstance(dest, str):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def load_snapshot(src: Union[str, IO[str]]) -> Snapshot:
    if isinstance(src, str):
        with open(src, encoding="utf-8") as fh:
            raw = fh.read()
    else:
        raw = src.read()
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise GraphError("BAD_SNAPSHOT", "empty snapshot")
    header = json.loads(lines[0])
    if header.get("format") != SNAPSHOT_FORMAT or header.get("version") != SNAPSHOT_VERSION:
        raise GraphError("BAD_SNAPSHOT", f"unsupported snapshot header {header.get('format')}/{header.get('version')}")
    nodes, edges, labels, ancestors = [], [], {}, {}
    ic_values: dict[TermId, float] = {}
    unannotated: set[TermId] = set()
    ic_header = None
    for ln in lines[1:]:
        rec = json.loads(ln)
        kind = rec["record"]
        if kind == "node":
            nodes.append(KGNode(NodeKind(rec["kind"]), rec["key"], rec["label"], tuple(tuple(a) for a in rec["attrs"])))
        elif kind == "edge":
            freq = rec.get("frequency")
            edges.append(KGEdge(EdgeKind(rec["kind"]), rec["from"], rec["to"], tuple(rec["provenance"]),
                                Frequency(freq) if freq else None))
        elif kind == "term":
            labels[rec["id"]] = rec["label"]
            if "ancestors" in rec:
                ancestors[rec["id"]] = rec["ancestors"]
        elif kind == "ic_header":
            ic_header = rec
        elif kind == "ic":
            t = TermId.parse(rec["id"])
            ic_values[t] = rec["ic"]
            if not rec["annotated"]:
                unannotated.add(t)
        else:
            raise GraphError("BAD_SNAPSHOT", f"unknown record type {kind!r}")
    kg = KnowledgeGraph(nodes, edges, labels, ancestors)
    if kg.build_stats != header["build_stats"]:
        raise GraphError("BAD_SNAPSHOT", "build stats in header do not match the records")
    ic = None
    if ic_header is not None:
        ic = TermIC(MappingProxyType(ic_values), ic_header["corpus_size"], ic_header["max_observed"],
                    frozenset(unannotated))
    return Snapshot(kg, ic, MappingProxyType(header.get("meta", {})))
