"""Ontology DAG: term identifiers, OBO/JSON subset parsing, closure and IC.

The same graph type holds the phenotype ontology (HP terms) and the disease
classification (ORPHA/OMIM terms). Graphs are immutable once built; closure
sets are memoised lazily, which is safe for concurrent readers because a
cache entry is always recomputed to the same value.
"""

from __future__ import annotations

import functools
import graphlib
import io
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import IO, TYPE_CHECKING, Iterable, Iterator, Mapping, Optional, Union

from .errors import OntologyError

if TYPE_CHECKING:
    from .ingest import DiseaseAnnotationSet

logger = logging.getLogger(__name__)

Source = Union[bytes, str, IO[bytes], IO[str]]


class Namespace(str, Enum):
    HP = "HP"
    ORPHA = "ORPHA"
    OMIM = "OMIM"


_NAMESPACE_ALIASES = {
    "HP": Namespace.HP,
    "HPO": Namespace.HP,
    "ORPHA": Namespace.ORPHA,
    "ORPHANET": Namespace.ORPHA,
    "OMIM": Namespace.OMIM,
    "MIM": Namespace.OMIM,
}


@functools.total_ordering
@dataclass(frozen=True)
class TermId:
    """A namespaced identifier such as ``HP:0001250`` or ``ORPHA:905``.

    Ordering and rendering both go through the canonical string form.
    """

    namespace: Namespace
    local_id: str

    def __post_init__(self) -> None:
        if not self.local_id.isdigit():
            raise OntologyError("MALFORMED_ID", f"non-numeric local id {self.local_id!r}")

    @staticmethod
    def parse(text: str) -> "TermId":
        return _parse_term_id(text.strip())

    def __str__(self) -> str:
        return f"{self.namespace.value}:{self.local_id}"

    def __repr__(self) -> str:
        return f"TermId({str(self)!r})"

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, TermId):
            return NotImplemented
        return str(self) < str(other)


@functools.lru_cache(maxsize=1 << 16)
def _parse_term_id(text: str) -> TermId:
    prefix, sep, local = text.partition(":")
    ns = _NAMESPACE_ALIASES.get(prefix.upper())
    local = local.strip()
    if not sep or ns is None or not local.isdigit():
        raise OntologyError("MALFORMED_ID", f"cannot parse term id {text!r}", value=text)
    if ns is Namespace.HP:
        if len(local) > 7:
            raise OntologyError("MALFORMED_ID", f"HP id too long: {text!r}", value=text)
        return TermId(ns, local.zfill(7))
    return TermId(ns, str(int(local)))


def is_term_id(text: str) -> bool:
    try:
        TermId.parse(text)
    except OntologyError:
        return False
    return True


@dataclass(frozen=True)
class OntologyTerm:
    id: TermId
    label: str
    synonyms: tuple[str, ...] = ()
    parents: frozenset[TermId] = frozenset()
    obsolete: bool = False
    replaced_by: Optional[TermId] = None


class OntologyGraph:
    """Immutable ontology DAG with lazily memoised ancestor/descendant closure."""

    def __init__(
        self,
        terms: Iterable[OntologyTerm],
        ignored_tags: Optional[Mapping[str, int]] = None,
    ) -> None:
        table: dict[TermId, OntologyTerm] = {}
        for term in terms:
            if term.obsolete and term.parents:
                term = OntologyTerm(term.id, term.label, term.synonyms, frozenset(), True, term.replaced_by)
            table[term.id] = term
        self._terms = MappingProxyType(table)
        self.ignored_tags: Mapping[str, int] = MappingProxyType(dict(ignored_tags or {}))
        _validate_dag(table)

        children: dict[TermId, set[TermId]] = {t: set() for t in table}
        for term in table.values():
            for parent in term.parents:
                children[parent].add(term.id)
        self._children = {t: frozenset(c) for t, c in children.items()}
        self.roots = frozenset(t.id for t in table.values() if not t.obsolete and not t.parents)
        self._ancestor_cache: dict[TermId, frozenset[TermId]] = {}
        self._descendant_cache: dict[TermId, frozenset[TermId]] = {}
        self._label_index: Optional[dict[str, list[TermId]]] = None
        self._synonym_index: Optional[dict[str, list[TermId]]] = None

    @property
    def terms(self) -> Mapping[TermId, OntologyTerm]:
        return self._terms

    def __contains__(self, t: object) -> bool:
        return t in self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[TermId]:
        return iter(self._terms)

    def term(self, t: TermId) -> OntologyTerm:
        try:
            return self._terms[t]
        except KeyError:
            raise OntologyError("UNKNOWN_TERM", f"{t} not in ontology", term=str(t)) from None

    def label(self, t: TermId) -> str:
        return self.term(t).label

    def parents(self, t: TermId) -> frozenset[TermId]:
        return self.term(t).parents

    def children(self, t: TermId) -> frozenset[TermId]:
        self.term(t)
        return self._children[t]

    @property
    def edge_count(self) -> int:
        return sum(len(t.parents) for t in self._terms.values())

    def edges(self) -> Iterator[tuple[TermId, TermId]]:
        """Yield (child, parent) pairs in canonical order."""
        for t in sorted(self._terms):
            for p in sorted(self._terms[t].parents):
                yield t, p

    def ancestors(self, t: TermId, reflexive: bool = False) -> frozenset[TermId]:
        self.term(t)
        closure = self._strict_ancestors(t)
        return closure | {t} if reflexive else closure

    def descendants(self, t: TermId, reflexive: bool = False) -> frozenset[TermId]:
        self.term(t)
        closure = self._strict_descendants(t)
        return closure | {t} if reflexive else closure

    def ancestors_within(self, t: TermId, depth: Optional[int]) -> frozenset[TermId]:
        """Strict ancestors reachable in at most ``depth`` parent steps (None = unlimited)."""
        if depth is None:
            return self.ancestors(t)
        self.term(t)
        seen: set[TermId] = set()
        frontier = {t}
        for _ in range(depth):
            frontier = {p for f in frontier for p in self._terms[f].parents} - seen
            if not frontier:
                break
            seen |= frontier
        return frozenset(seen)

    def _strict_ancestors(self, t: TermId) -> frozenset[TermId]:
        cached = self._ancestor_cache.get(t)
        if cached is not None:
            return cached
        # iterative post-order so deep hierarchies never hit the recursion limit
        stack = [t]
        while stack:
            node = stack[-1]
            pending = [p for p in self._terms[node].parents if p not in self._ancestor_cache]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            if node in self._ancestor_cache:
                continue
            acc: set[TermId] = set()
            for p in self._terms[node].parents:
                acc.add(p)
                acc |= self._ancestor_cache[p]
            self._ancestor_cache[node] = frozenset(acc)
        return self._ancestor_cache[t]

    def _strict_descendants(self, t: TermId) -> frozenset[TermId]:
        cached = self._descendant_cache.get(t)
        if cached is not None:
            return cached
        stack = [t]
        while stack:
            node = stack[-1]
            pending = [c for c in self._children[node] if c not in self._descendant_cache]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            if node in self._descendant_cache:
                continue
            acc: set[TermId] = set()
            for c in self._children[node]:
                acc.add(c)
                acc |= self._descendant_cache[c]
            self._descendant_cache[node] = frozenset(acc)
        return self._descendant_cache[t]

    def lookup_text(self, text: str) -> Optional[TermId]:
        key = normalize_text(text)
        if self._label_index is None:
            self._build_text_indexes()
        assert self._label_index is not None and self._synonym_index is not None
        for index in (self._label_index, self._synonym_index):
            hits = index.get(key)
            if hits:
                return min(hits)
        return None

    def _build_text_indexes(self) -> None:
        labels: dict[str, list[TermId]] = {}
        synonyms: dict[str, list[TermId]] = {}
        for term in self._terms.values():
            if term.obsolete or term.id.namespace is not Namespace.HP:
                continue
            labels.setdefault(normalize_text(term.label), []).append(term.id)
            for syn in term.synonyms:
                synonyms.setdefault(normalize_text(syn), []).append(term.id)
        self._synonym_index = synonyms
        self._label_index = labels


def normalize_text(text: str) -> str:
    """Whitespace-collapse and casefold a label for exact matching."""
    return " ".join(text.split()).casefold()


def _validate_dag(table: Mapping[TermId, OntologyTerm]) -> None:
    for term in sorted(table.values(), key=lambda x: x.id):
        for parent in sorted(term.parents):
            target = table.get(parent)
            if target is None:
                raise OntologyError(
                    "DANGLING_PARENT", f"{term.id} has unknown parent {parent}",
                    term=str(term.id), parent=str(parent),
                )
            if target.obsolete:
                raise OntologyError(
                    "DANGLING_PARENT", f"{term.id} has obsolete parent {parent}",
                    term=str(term.id), parent=str(parent),
                )
    sorter = graphlib.TopologicalSorter({t: term.parents for t, term in table.items()})
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        raise OntologyError(
            "CYCLE_DETECTED", f"cycle through {cycle[0]}", term=str(cycle[0]),
            cycle=[str(c) for c in cycle],
        ) from None


# ---------------------------------------------------------------------------
# parsing


class OntologyFormat(str, Enum):
    OBO_SUBSET = "obo"
    JSON_SUBSET = "json"


_OBO_KNOWN_TAGS = {"id", "name", "synonym", "is_a", "is_obsolete", "replaced_by"}
_SYNONYM_RE = re.compile(r'^"((?:[^"\\]|\\.)*)"')


def read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_ontology(source: Source, format: Union[OntologyFormat, str] = OntologyFormat.OBO_SUBSET) -> OntologyGraph:
    """Parse an OBO or JSON subset document into an :class:`OntologyGraph`.

    Raises:
        OntologyError: ``MALFORMED_STANZA`` (with ``line``), ``DANGLING_PARENT``
            or ``CYCLE_DETECTED``.
    """
    fmt = OntologyFormat(format)
    text = read_text(source)
    if fmt is OntologyFormat.OBO_SUBSET:
        terms, ignored = _parse_obo(text)
    else:
        terms, ignored = _parse_json(text), Counter()
    if ignored:
        logger.warning("ignored %d unsupported OBO tag lines (%s)", sum(ignored.values()),
                       ", ".join(f"{k}={v}" for k, v in sorted(ignored.items())))
    return OntologyGraph(terms, ignored_tags=ignored)


def _parse_obo(text: str) -> tuple[list[OntologyTerm], Counter]:
    ignored: Counter = Counter()
    terms: list[OntologyTerm] = []
    seen: set[TermId] = set()
    stanza: Optional[dict] = None
    in_term = False

    def finish() -> None:
        if stanza is None:
            return
        if "id" not in stanza or not stanza.get("name"):
            raise OntologyError(
                "MALFORMED_STANZA", f"[Term] at line {stanza['line']} lacks id or name",
                line=stanza["line"],
            )
        if stanza["id"] in seen:
            raise OntologyError(
                "MALFORMED_STANZA", f"duplicate id {stanza['id']} at line {stanza['line']}",
                line=stanza["line"],
            )
        seen.add(stanza["id"])
        terms.append(OntologyTerm(
            id=stanza["id"],
            label=stanza["name"],
            synonyms=tuple(stanza["synonyms"]),
            parents=frozenset(stanza["parents"]),
            obsolete=stanza["obsolete"],
            replaced_by=stanza.get("replaced_by"),
        ))

    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("!"):
            continue
        if line.startswith("[") and line.endswith("]"):
            finish()
            in_term = line == "[Term]"
            stanza = {"line": lineno, "synonyms": [], "parents": [], "obsolete": False} if in_term else None
            continue
        if not in_term:
            continue
        assert stanza is not None
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise OntologyError("MALFORMED_STANZA", f"line {lineno}: expected 'key: value'", line=lineno)
        if key not in _OBO_KNOWN_TAGS:
            ignored[key] += 1
            continue
        try:
            if key == "id":
                stanza["id"] = TermId.parse(value)
            elif key == "name":
                stanza["name"] = value
            elif key == "synonym":
                m = _SYNONYM_RE.match(value)
                if not m:
                    raise OntologyError("MALFORMED_STANZA", f"line {lineno}: bad synonym", line=lineno)
                stanza["synonyms"].append(m.group(1).replace('\\"', '"'))
            elif key == "is_a":
                target = value.split("!", 1)[0].split("{", 1)[0].strip()
                stanza["parents"].append(TermId.parse(target))
            elif key == "is_obsolete":
                stanza["obsolete"] = value.lower() == "true"
            elif key == "replaced_by":
                stanza["replaced_by"] = TermId.parse(value.split("!", 1)[0])
        except OntologyError as exc:
            if exc.code == "MALFORMED_STANZA":
                raise
            raise OntologyError("MALFORMED_STANZA", f"line {lineno}: {exc.message}", line=lineno) from None
    finish()
    return terms, ignored


def _parse_json(text: str) -> list[OntologyTerm]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OntologyError("MALFORMED_STANZA", f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, list):
        raise OntologyError("MALFORMED_STANZA", "top-level value must be an array", line=1)
    terms = []
    seen: set[TermId] = set()
    for index, obj in enumerate(doc, start=1):
        try:
            if not isinstance(obj, dict) or not obj.get("lbl"):
                raise OntologyError("MALFORMED_STANZA", "entry needs id and lbl")
            tid = TermId.parse(obj["id"])
            if tid in seen:
                raise OntologyError("MALFORMED_STANZA", f"duplicate id {tid}")
            seen.add(tid)
            replaced = obj.get("replaced_by")
            terms.append(OntologyTerm(
                id=tid,
                label=str(obj["lbl"]),
                synonyms=tuple(str(s) for s in obj.get("synonyms", [])),
                parents=frozenset(TermId.parse(p) for p in obj.get("parents", [])),
                obsolete=bool(obj.get("obsolete", False)),
                replaced_by=TermId.parse(replaced) if replaced else None,
            ))
        except (OntologyError, KeyError, TypeError, AttributeError) as exc:
            msg = exc.message if isinstance(exc, OntologyError) else repr(exc)
            raise OntologyError("MALFORMED_STANZA", f"entry {index}: {msg}", line=index) from None
    return terms


def serialize_obo(graph: OntologyGraph) -> str:
    """Render a graph back to the OBO subset (canonical order)."""
    out = ["format-version: 1.2", ""]
    for tid in sorted(graph):
        term = graph.term(tid)
        out.append("[Term]")
        out.append(f"id: {tid}")
        out.append(f"name: {term.label}")
        for syn in term.synonyms:
            escaped = syn.replace('"', '\\"')
            out.append(f'synonym: "{escaped}" EXACT []')
        for parent in sorted(term.parents):
            out.append(f"is_a: {parent} ! {graph.label(parent)}")
        if term.obsolete:
            out.append("is_obsolete: true")
        if term.replaced_by is not None:
            out.append(f"replaced_by: {term.replaced_by}")
        out.append("")
    return "\n".join(out)


def ancestors(graph: OntologyGraph, t: TermId, reflexive: bool = False) -> frozenset[TermId]:
    return graph.ancestors(t, reflexive)


# ---------------------------------------------------------------------------
# information content


@dataclass(frozen=True)
class TermIC:
    """Per-term information content in nats.

    ``max_observed`` is the largest IC among annotated terms; it doubles as the
    value assigned to terms with no (propagated) annotation.
    """

    ic: Mapping[TermId, float]
    corpus_size: int
    max_observed: float
    unannotated: frozenset[TermId] = field(default_factory=frozenset)

    def __getitem__(self, t: TermId) -> float:
        try:
            return self.ic[t]
        except KeyError:
            raise OntologyError("UNKNOWN_TERM", f"no IC for {t}", term=str(t)) from None

    def __contains__(self, t: object) -> bool:
        return t in self.ic

    def get(self, t: TermId, default: Optional[float] = None) -> Optional[float]:
        return self.ic.get(t, default)


def compute_ic(
    graph: OntologyGraph,
    annotations: "DiseaseAnnotationSet",
    merge_orphanet: bool = False,
) -> TermIC:
    """IC(t) = ln(|D| / |D_t|) over the disease-annotation corpus.

    Each disease's annotations are propagated to every ancestor before
    counting. Annotations whose provenance is ``ORPHANET`` are left out
    unless ``merge_orphanet`` is set.
    """
    per_disease: dict[TermId, set[TermId]] = {}
    for ann in annotations:
        if ann.provenance == "ORPHANET" and not merge_orphanet:
            continue
        if ann.phenotype not in graph:
            raise OntologyError("UNKNOWN_TERM", f"annotated phenotype {ann.phenotype} not in ontology",
                                term=str(ann.phenotype))
        per_disease.setdefault(ann.disease, set()).add(_current(graph, ann.phenotype))
    if not per_disease:
        raise OntologyError("EMPTY_CORPUS", "no annotated diseases")

    counts: Counter = Counter()
    for phenotypes in per_disease.values():
        closure: set[TermId] = set()
        for p in phenotypes:
            closure |= graph.ancestors(p, reflexive=True)
        counts.update(closure)

    total = len(per_disease)
    ic = {t: math.log(total / n) for t, n in counts.items()}
    max_observed = max(ic.values())
    missing = frozenset(t for t in graph if t not in ic)
    for t in missing:
        ic[t] = max_observed
    return TermIC(MappingProxyType(ic), total, max_observed, missing)


def _current(graph: OntologyGraph, t: TermId) -> TermId:
    term = graph.term(t)
    if term.obsolete and term.replaced_by is not None and term.replaced_by in graph:
        return term.replaced_by
    return t


def mean_ic(ic: TermIC, terms: Iterable[TermId]) -> float:
    values = [ic[t] for t in set(terms)]
    if not values:
        raise OntologyError("EMPTY_TERM_SET", "mean_ic needs at least one term")
    return math.fsum(values) / len(values)


def map_feature_to_hpo(graph: OntologyGraph, feature: str) -> Optional[TermId]:
    """Exact (case/whitespace-insensitive) label, then synonym, match to an HP term."""
    if not feature or not feature.strip():
        raise OntologyError("EMPTY_FEATURE", "feature text is empty")
    return graph.lookup_text(feature)

