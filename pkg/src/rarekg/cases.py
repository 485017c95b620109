"""Sectioned clinical cases, synthetic generation, slicing and CoT pairs."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import CaseError, OntologyError
from .ingest import DISEASE_NAMESPACES, DiseaseAnnotationSet, NormalizationTable, parse_variant_key, variant_key_str
from .ontology import Namespace, OntologyGraph, TermId, is_term_id

PHENOTYPIC_ABNORMALITY = TermId.parse("HP:0000118")
DEFAULT_DISTRACTOR_RANGE = (1, 5)
NO_GUIDELINE = "(no guideline provided)"
CASE_SCHEMA_VERSION = 1


class Section(str, Enum):
    """Case sections in the order clinical information is acquired."""

    CHIEF_COMPLAINT = "CHIEF_COMPLAINT"
    PRESENT_ILLNESS = "PRESENT_ILLNESS"
    FAMILY_HISTORY = "FAMILY_HISTORY"
    PHYSICAL_EXAM = "PHYSICAL_EXAM"
    SPECIALTY_ASSESSMENT = "SPECIALTY_ASSESSMENT"
    ANCILLARY_TESTS = "ANCILLARY_TESTS"


SECTION_ORDER: tuple[Section, ...] = tuple(Section)


def _section(key: Union[Section, str]) -> Section:
    try:
        return Section(key.upper() if isinstance(key, str) else key)
    except ValueError:
        raise CaseError("UNKNOWN_FIELD", f"unknown case section {key!r}") from None


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    sections: Mapping[Section, str] = field(default_factory=dict)
    phenotypes: frozenset[TermId] = frozenset()
    variants: tuple[str, ...] = ()
    truth: Optional[TermId] = None
    categories: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.case_id:
            raise CaseError("MISSING_ID", "case_id is empty")
        given = {_section(k): v for k, v in self.sections.items()}
        full = {s: given.get(s, "") for s in SECTION_ORDER}
        object.__setattr__(self, "sections", MappingProxyType(full))
        object.__setattr__(self, "phenotypes", frozenset(self.phenotypes))
        object.__setattr__(self, "categories", frozenset(self.categories))
        object.__setattr__(self, "variants", tuple(variant_key_str(parse_variant_key(v)) for v in self.variants))
        bad = [str(p) for p in self.phenotypes if p.namespace is not Namespace.HP]
        if bad:
            raise CaseError("BAD_NAMESPACE", f"non-HP phenotypes in case {self.case_id}: {bad}")
        if self.truth is not None and self.truth.namespace not in DISEASE_NAMESPACES:
            raise CaseError("BAD_NAMESPACE", f"truth {self.truth} is not an ORPHA/OMIM id")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CaseRecord):
            return NotImplemented
        return case_to_dict(self) == case_to_dict(other)

    def __hash__(self) -> int:
        return hash(self.case_id)

    def text(self, include_empty: bool = False) -> str:
        """Case text with one heading per section, in acquisition order."""
        parts = []
        for s in SECTION_ORDER:
            body = self.sections[s]
            if body or include_empty:
                parts.append(f"{s.value.replace('_', ' ').title()}: {body}")
        return "\n".join(parts)

    def nonblank_sections(self) -> frozenset[Section]:
        return frozenset(s for s, v in self.sections.items() if v.strip())


# ---------------------------------------------------------------------------
# persistence


def case_to_dict(case: CaseRecord) -> dict:
    return {
        "case_id": case.case_id,
        "sections": {s.value: case.sections[s] for s in SECTION_ORDER},
        "phenotypes": sorted(str(p) for p in case.phenotypes),
        "variants": list(case.variants),
        "truth": str(case.truth) if case.truth is not None else None,
        "categories": sorted(case.categories),
    }


def case_from_dict(doc: Mapping) -> CaseRecord:
    try:
        return CaseRecord(
            case_id=str(doc["case_id"]),
            sections=dict(doc.get("sections") or {}),
            phenotypes=frozenset(TermId.parse(p) for p in doc.get("phenotypes") or ()),
            variants=tuple(doc.get("variants") or ()),
            truth=TermId.parse(doc["truth"]) if doc.get("truth") else None,
            categories=frozenset(doc.get("categories") or ()),
        )
    except KeyError as exc:
        raise CaseError("MALFORMED_CASE", f"case document lacks {exc.args[0]!r}") from None
    except OntologyError as exc:
        raise CaseError("MALFORMED_CASE", exc.message) from None


def dump_case(case: CaseRecord) -> str:
    return json.dumps(case_to_dict(case), ensure_ascii=False, indent=2) + "\n"


def load_case(text: str) -> CaseRecord:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError("MALFORMED_CASE", f"invalid JSON: {exc}") from None
    return case_from_dict(doc)


def read_cases(path: Union[str, Path]) -> list[CaseRecord]:
    """Load cases from a directory of ``*.json`` files, a JSONL file or one JSON file."""
    path = Path(path)
    if path.is_dir():
        return [load_case(p.read_text(encoding="utf-8")) for p in sorted(path.glob("*.json"))]
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        return [load_case(line) for line in text.splitlines() if line.strip()]
    doc = json.loads(text)
    if isinstance(doc, list):
        return [case_from_dict(d) for d in doc]
    return [case_from_dict(doc)]


def from_phenopacket(doc: Mapping) -> CaseRecord:
    """Map a GA4GH phenopacket document onto a phenotype-only case.

    ``phenotypicFeatures`` (minus excluded ones) become phenotypes, VCF records
    under ``interpretations`` become variant keys and ``diseases[0]`` is the truth.
    """
    case_id = doc.get("id") or (doc.get("subject") or {}).get("id")
    if not case_id:
        raise CaseError("MALFORMED_CASE", "phenopacket has no id")
    try:
        phenotypes = frozenset(
            TermId.parse(f["type"]["id"])
            for f in doc.get("phenotypicFeatures") or ()
            if not f.get("excluded", False)
        )
        variants = []
        for interp in doc.get("interpretations") or ():
            for gi in (interp.get("diagnosis") or {}).get("genomicInterpretations") or ():
                vcf = (
                    ((gi.get("variantInterpretation") or {}).get("variationDescriptor") or {}).get("vcfRecord")
                )
                if vcf:
                    variants.append(variant_key_str(
                        parse_variant_key(f"{vcf['chrom']}-{vcf['pos']}-{vcf['ref']}-{vcf['alt']}")
                    ))
        diseases = doc.get("diseases") or ()
        truth = TermId.parse(diseases[0]["term"]["id"]) if diseases else None
    except (KeyError, TypeError) as exc:
        raise CaseError("MALFORMED_CASE", f"phenopacket {case_id}: missing {exc}") from None
    except OntologyError as exc:
        raise CaseError("MALFORMED_CASE", f"phenopacket {case_id}: {exc.message}") from None
    return CaseRecord(str(case_id), {}, phenotypes, tuple(dict.fromkeys(variants)), truth)


# ---------------------------------------------------------------------------
# synthetic cases


@dataclass(frozen=True)
class SyntheticCaseSpec:
    """``n_distractors=None`` draws the count from ``distractor_range`` (inclusive)."""

    disease: TermId
    n_signal: int
    n_distractors: Optional[int] = None
    rng_seed: int = 0
    distractor_range: tuple[int, int] = DEFAULT_DISTRACTOR_RANGE

    def __post_init__(self) -> None:
        if self.n_signal < 1:
            raise CaseError("BAD_SPEC", "n_signal must be positive")
        if self.n_distractors is not None and self.n_distractors < 0:
            raise CaseError("BAD_SPEC", "n_distractors must be non-negative")
        lo, hi = self.distractor_range
        if not 0 <= lo <= hi:
            raise CaseError("BAD_SPEC", f"bad distractor range {self.distractor_range}")
        if not 0 <= self.rng_seed < 2**64:
            raise CaseError("BAD_SPEC", "rng_seed must fit in 64 unsigned bits")


def annotation_closure(ontology: OntologyGraph, terms: Iterable[TermId]) -> frozenset[TermId]:
    """Reflexive ancestors and descendants of every term."""
    acc: set[TermId] = set()
    for t in terms:
        if t in ontology:
            acc |= ontology.ancestors(t, reflexive=True)
            acc |= ontology.descendants(t, reflexive=True)
        else:
            acc.add(t)
    return frozenset(acc)


def distractor_pool(ontology: OntologyGraph, disease_terms: Iterable[TermId]) -> list[TermId]:
    """Non-obsolete phenotype terms unrelated to ``disease_terms``, sorted."""
    if PHENOTYPIC_ABNORMALITY in ontology:
        universe = ontology.descendants(PHENOTYPIC_ABNORMALITY, reflexive=False)
    else:
        universe = frozenset(t for t in ontology if t.namespace is Namespace.HP)
    blocked = annotation_closure(ontology, disease_terms)
    return sorted(t for t in universe if not ontology.term(t).obsolete and t not in blocked)


def generate_synthetic_case(
    ontology: OntologyGraph,
    annotations: DiseaseAnnotationSet,
    spec: SyntheticCaseSpec,
    case_id: Optional[str] = None,
) -> CaseRecord:
    """Sample signal phenotypes from the disease's annotations plus unrelated distractors."""
    direct = sorted(annotations.phenotypes_of(spec.disease))
    if len(direct) < spec.n_signal:
        raise CaseError(
            "INSUFFICIENT_ANNOTATIONS",
            f"{spec.disease} has {len(direct)} annotations, {spec.n_signal} requested",
        )
    rng = random.Random(spec.rng_seed)
    signal = rng.sample(direct, spec.n_signal)
    n_noise = spec.n_distractors
    if n_noise is None:
        n_noise = rng.randint(*spec.distractor_range)
    pool = distractor_pool(ontology, direct)
    if len(pool) < n_noise:
        raise CaseError(
            "INSUFFICIENT_DISTRACTOR_POOL", f"only {len(pool)} eligible distractors, {n_noise} requested"
        )
    noise = rng.sample(pool, n_noise)
    return CaseRecord(
        case_id or f"synthetic-{spec.disease}-{spec.rng_seed}",
        {},
        frozenset(signal) | frozenset(noise),
        (),
        spec.disease,
    )


def generate_cohort(
    ontology: OntologyGraph,
    annotations: DiseaseAnnotationSet,
    diseases: Sequence[TermId],
    seed: int,
    n_signal: int,
    n_distractors: Optional[int] = None,
    distractor_range: tuple[int, int] = DEFAULT_DISTRACTOR_RANGE,
) -> list[CaseRecord]:
    """One case per listed disease; case ``i`` uses seed ``seed ^ i``.

    ``n_signal`` is capped at each disease's annotation count.
    """
    out = []
    for i, d in enumerate(diseases):
        n = min(n_signal, len(annotations.phenotypes_of(d)))
        spec = SyntheticCaseSpec(d, max(n, 1), n_distractors, seed ^ i, distractor_range)
        out.append(generate_synthetic_case(ontology, annotations, spec, case_id=f"synthetic-{i:05d}"))
    return out


# ---------------------------------------------------------------------------
# slicing


def slice_incremental(case: CaseRecord, step: int) -> CaseRecord:
    """Keep the first ``step`` sections in acquisition order; blank the rest."""
    if not isinstance(step, int) or not 1 <= step <= len(SECTION_ORDER):
        raise CaseError("STEP_OUT_OF_RANGE", f"step must be in 1..{len(SECTION_ORDER)}, got {step!r}")
    kept = set(SECTION_ORDER[:step])
    return replace(case, sections={s: (v if s in kept else "") for s, v in case.sections.items()})


def slice_ablation(case: CaseRecord, section: Union[Section, str]) -> CaseRecord:
    target = _section(section)
    return replace(case, sections={s: ("" if s is target else v) for s, v in case.sections.items()})


# ---------------------------------------------------------------------------
# CoT prompt/completion pairs


def read_template(name: str) -> str:
    return resources.files("rarekg").joinpath("templates").joinpath(name).read_text(encoding="utf-8")


_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class _Layout:
    """A text layout with ``{name}`` slots that can be filled and parsed back."""

    def __init__(self, text: str) -> None:
        self.text = text
        pieces = _PLACEHOLDER.split(text)
        self.literals = tuple(pieces[0::2])
        self.slots = tuple(pieces[1::2])
        pattern = "".join(
            re.escape(lit) + (f"(?P<{slot}>.*)" if slot else "")
            for lit, slot in zip(self.literals, self.slots + ("",))
        )
        self._regex = re.compile(pattern, re.DOTALL)
        self.markers = tuple(
            line for lit in self.literals for line in lit.splitlines() if line.startswith("### ")
        )

    def fill(self, **values: str) -> str:
        for name, value in values.items():
            for marker in self.markers + (NO_GUIDELINE,):
                if marker in value and not (name == "guideline" and value == NO_GUIDELINE):
                    raise CaseError("TEMPLATE_COLLISION", f"{name} contains the reserved text {marker!r}")
        return _PLACEHOLDER.sub(lambda m: values[m.group(1)], self.text)

    def parse(self, text: str) -> dict[str, str]:
        m = self._regex.fullmatch(text)
        if m is None:
            raise CaseError("TEMPLATE_MISMATCH", "text does not follow the template layout")
        return m.groupdict()


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt layout over ``{case}``/``{guideline}`` and completion layout over
    ``{reasoning}``/``{diagnosis_label}``/``{diagnosis_id}``."""

    name: str
    prompt: str
    completion: str

    @classmethod
    def default(cls) -> "PromptTemplate":
        return cls("cot-v1", read_template("cot_prompt_v1.txt"), read_template("cot_completion_v1.txt"))

    def __post_init__(self) -> None:
        if set(_Layout(self.prompt).slots) != {"case", "guideline"}:
            raise CaseError("BAD_TEMPLATE", "prompt layout needs exactly {case} and {guideline}")
        if set(_Layout(self.completion).slots) != {"reasoning", "diagnosis_label", "diagnosis_id"}:
            raise CaseError("BAD_TEMPLATE", "completion layout needs {reasoning}, {diagnosis_label}, {diagnosis_id}")


@dataclass(frozen=True)
class CoTExample:
    x: str
    y: TermId
    y_label: str
    r: str
    g: str
    p: str
    c: str

    def to_dict(self) -> dict:
        return {"prompt": self.p, "completion": self.c}


def _resolve_diagnosis(y: Union[TermId, str], table: NormalizationTable) -> tuple[TermId, str]:
    if isinstance(y, TermId) or is_term_id(y):
        tid = y if isinstance(y, TermId) else TermId.parse(y)
        labels = sorted(k for k, (t, _) in table.entries.items() if t == tid)
        if not labels:
            raise CaseError("UNRESOLVABLE_DIAGNOSIS", f"no label for {tid} in the normalization table")
        return tid, labels[0]
    tid = table.lookup(y)
    if tid is None:
        raise CaseError("UNRESOLVABLE_DIAGNOSIS", f"{y!r} is not in the normalization table")
    return tid, y.strip()


def build_cot_pair(
    x: str,
    y: Union[TermId, str],
    r: str,
    g: str,
    table: NormalizationTable,
    template: Optional[PromptTemplate] = None,
) -> CoTExample:
    """Build the (prompt, completion) pair: prompt from (x, g), completion from (r, y).

    ``y`` may be a disease id or a label; either is resolved against ``table``.
    An empty guideline is written as an explicit marker.
    """
    if not x or not x.strip():
        raise CaseError("EMPTY_CASE", "case text is empty")
    if NO_GUIDELINE in g:
        raise CaseError("TEMPLATE_COLLISION", f"guideline contains the reserved text {NO_GUIDELINE!r}")
    template = template or PromptTemplate.default()
    tid, label = _resolve_diagnosis(y, table)
    p = _Layout(template.prompt).fill(case=x, guideline=g if g.strip() else NO_GUIDELINE)
    c = _Layout(template.completion).fill(reasoning=r, diagnosis_label=label, diagnosis_id=str(tid))
    return CoTExample(x, tid, label, r, g, p, c)


def parse_cot_prompt(p: str, template: Optional[PromptTemplate] = None) -> tuple[str, str]:
    """Return ``(x, g)``; the no-guideline marker comes back as an empty string."""
    fields = _Layout((template or PromptTemplate.default()).prompt).parse(p)
    g = fields["guideline"]
    return fields["case"], "" if g == NO_GUIDELINE else g


def parse_cot_completion(c: str, template: Optional[PromptTemplate] = None) -> tuple[str, TermId, str]:
    """Return ``(r, y, y_label)``."""
    fields = _Layout((template or PromptTemplate.default()).completion).parse(c)
    try:
        tid = TermId.parse(fields["diagnosis_id"])
    except OntologyError as exc:
        raise CaseError("TEMPLATE_MISMATCH", exc.message) from None
    return fields["reasoning"], tid, fields["diagnosis_label"]
