"""Source ingestion: HPOA annotations, gene table, variants, name normalization.

All parsers take bytes, text or a file object and return immutable records.
Rows that cannot be parsed are collected with their line numbers; if the
rejected share exceeds ``max_reject_rate`` the whole parse fails instead.
"""

from __future__ import annotations

import io
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import IngestError, OntologyError
from .ontology import Namespace, OntologyGraph, Source, TermId, normalize_text, read_text

logger = logging.getLogger(__name__)

DEFAULT_MAX_REJECT_RATE = 0.01
DISEASE_NAMESPACES = (Namespace.ORPHA, Namespace.OMIM)


class Frequency(str, Enum):
    ALWAYS_PRESENT = "ALWAYS_PRESENT"
    VERY_FREQUENT = "VERY_FREQUENT"
    FREQUENT = "FREQUENT"
    OCCASIONAL = "OCCASIONAL"
    RARE = "RARE"
    UNKNOWN = "UNKNOWN"


# HPO frequency subontology codes; HP:0040285 ("Excluded") is handled separately
FREQUENCY_CODES: Mapping[str, Frequency] = MappingProxyType({
    "HP:0040280": Frequency.ALWAYS_PRESENT,
    "HP:0040281": Frequency.VERY_FREQUENT,
    "HP:0040282": Frequency.FREQUENT,
    "HP:0040283": Frequency.OCCASIONAL,
    "HP:0040284": Frequency.RARE,
})
EXCLUDED_FREQUENCY_CODE = "HP:0040285"
_FREQUENCY_OUT = {v: k for k, v in FREQUENCY_CODES.items()}

_FREQUENCY_WORDS = {
    "always present": Frequency.ALWAYS_PRESENT,
    "obligate": Frequency.ALWAYS_PRESENT,
    "very frequent": Frequency.VERY_FREQUENT,
    "frequent": Frequency.FREQUENT,
    "occasional": Frequency.OCCASIONAL,
    "rare": Frequency.RARE,
    "very rare": Frequency.RARE,
}


class _Excluded(Exception):
    pass


def parse_frequency(token: str) -> Frequency:
    """Map an HPOA frequency cell (HP code, word, ``n/m`` or ``x%``) to a bucket."""
    token = token.strip()
    if not token:
        return Frequency.UNKNOWN
    upper = token.upper()
    if upper.startswith("HP:"):
        canonical = str(TermId.parse(token))
        if canonical == EXCLUDED_FREQUENCY_CODE:
            raise _Excluded()
        if canonical in FREQUENCY_CODES:
            return FREQUENCY_CODES[canonical]
        raise ValueError(f"unknown frequency code {token}")
    word = normalize_text(token)
    if word == "excluded":
        raise _Excluded()
    if word in _FREQUENCY_WORDS:
        return _FREQUENCY_WORDS[word]
    if token.endswith("%"):
        share = Fraction(token[:-1].strip()) / 100
    elif "/" in token:
        num, den = token.split("/", 1)
        if int(den) <= 0:
            raise ValueError(f"bad fraction {token}")
        share = Fraction(int(num), int(den))
    else:
        raise ValueError(f"unknown frequency {token!r}")
    if not 0 <= share <= 1:
        raise ValueError(f"frequency out of range {token}")
    if share == 0:
        raise _Excluded()
    if share == 1:
        return Frequency.ALWAYS_PRESENT
    if share >= Fraction(80, 100):
        return Frequency.VERY_FREQUENT
    if share >= Fraction(30, 100):
        return Frequency.FREQUENT
    if share >= Fraction(5, 100):
        return Frequency.OCCASIONAL
    return Frequency.RARE


@dataclass(frozen=True)
class DiseaseAnnotation:
    disease: TermId
    phenotype: TermId
    frequency: Frequency = Frequency.UNKNOWN
    provenance: str = "HPOA"
    disease_name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.phenotype.namespace is not Namespace.HP:
            raise IngestError("BAD_NAMESPACE", f"phenotype {self.phenotype} is not an HP term")
        if self.disease.namespace not in DISEASE_NAMESPACES:
            raise IngestError("BAD_NAMESPACE", f"disease {self.disease} is not ORPHA/OMIM")


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


class DiseaseAnnotationSet:
    """Annotation list with by-disease and by-phenotype indexes.

    Duplicate (disease, phenotype, provenance) triples collapse onto the first
    occurrence; the number merged is kept in ``merged_duplicates``.
    """

    def __init__(
        self,
        annotations: Iterable[DiseaseAnnotation],
        rejected: Sequence[RejectedRow] = (),
        skipped_not: int = 0,
        skipped_excluded: int = 0,
    ) -> None:
        seen: set[tuple[TermId, TermId, str]] = set()
        kept: list[DiseaseAnnotation] = []
        merged = 0
        for ann in annotations:
            key = (ann.disease, ann.phenotype, ann.provenance)
            if key in seen:
                merged += 1
                continue
            seen.add(key)
            kept.append(ann)
        self.annotations: tuple[DiseaseAnnotation, ...] = tuple(kept)
        self.rejected = tuple(rejected)
        self.skipped_not = skipped_not
        self.skipped_excluded = skipped_excluded
        self.merged_duplicates = merged

        by_disease: dict[TermId, set[TermId]] = {}
        by_phenotype: dict[TermId, set[TermId]] = {}
        names: dict[TermId, str] = {}
        for ann in kept:
            by_disease.setdefault(ann.disease, set()).add(ann.phenotype)
            by_phenotype.setdefault(ann.phenotype, set()).add(ann.disease)
            if ann.disease_name and ann.disease not in names:
                names[ann.disease] = ann.disease_name
        self._by_disease = {d: frozenset(p) for d, p in by_disease.items()}
        self._by_phenotype = {p: frozenset(d) for p, d in by_phenotype.items()}
        self.disease_names: Mapping[TermId, str] = MappingProxyType(names)

    def __iter__(self) -> Iterator[DiseaseAnnotation]:
        return iter(self.annotations)

    def __len__(self) -> int:
        return len(self.annotations)

    @property
    def by_disease(self) -> Mapping[TermId, frozenset[TermId]]:
        return MappingProxyType(self._by_disease)

    @property
    def by_phenotype(self) -> Mapping[TermId, frozenset[TermId]]:
        return MappingProxyType(self._by_phenotype)

    def diseases(self) -> list[TermId]:
        return sorted(self._by_disease)

    def phenotypes_of(self, disease: TermId) -> frozenset[TermId]:
        return self._by_disease.get(disease, frozenset())

    def diseases_with(self, phenotype: TermId) -> frozenset[TermId]:
        return self._by_phenotype.get(phenotype, frozenset())

    def filter(self, provenances: Optional[Iterable[str]] = None) -> "DiseaseAnnotationSet":
        if provenances is None:
            return self
        allowed = set(provenances)
        return DiseaseAnnotationSet(a for a in self.annotations if a.provenance in allowed)

    def merged_with(self, other: "DiseaseAnnotationSet") -> "DiseaseAnnotationSet":
        return DiseaseAnnotationSet(
            list(self.annotations) + list(other.annotations),
            rejected=self.rejected + other.rejected,
        )


HPOA_COLUMNS = (
    "database_id", "disease_name", "qualifier", "hpo_id", "reference", "evidence",
    "onset", "frequency", "sex", "modifier", "aspect", "biocuration",
)


def _check_reject_rate(code: str, rejected: list[RejectedRow], total: int, limit: float) -> None:
    if total and len(rejected) / total > limit:
        lines = [r.line for r in rejected]
        raise IngestError(
            code, f"{len(rejected)} of {total} rows rejected (limit {limit:.2%}); first at line {lines[0]}: "
                  f"{rejected[0].reason}",
            lines=lines[:50],
        )
    for row in rejected:
        logger.warning("line %d rejected: %s", row.line, row.reason)


def _data_lines(text: str) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        yield lineno, line


def parse_hpoa(
    source: Source,
    provenance: str = "HPOA",
    max_reject_rate: float = DEFAULT_MAX_REJECT_RATE,
) -> DiseaseAnnotationSet:
    """Parse a ``phenotype.hpoa``-layout TSV.

    ``NOT``-qualified rows and rows whose frequency is "Excluded"/0 are skipped
    (counted, not rejected).
    """
    lines = _data_lines(read_text(source))
    header = next(lines, None)
    if header is None or tuple(c.strip().lower() for c in header[1].split("\t")) != HPOA_COLUMNS:
        raise IngestError("HEADER_MISMATCH", f"expected columns {', '.join(HPOA_COLUMNS)}",
                          line=header[0] if header else 0)
    annotations = []
    rejected: list[RejectedRow] = []
    total = skipped_not = skipped_excluded = 0
    for lineno, line in lines:
        total += 1
        cells = line.split("\t")
        if len(cells) != len(HPOA_COLUMNS):
            rejected.append(RejectedRow(lineno, f"expected {len(HPOA_COLUMNS)} columns, got {len(cells)}"))
            continue
        row = dict(zip(HPOA_COLUMNS, cells))
        if row["qualifier"].strip().upper() == "NOT":
            skipped_not += 1
            continue
        try:
            disease = TermId.parse(row["database_id"])
            phenotype = TermId.parse(row["hpo_id"])
            freq = parse_frequency(row["frequency"])
            annotations.append(DiseaseAnnotation(disease, phenotype, freq, provenance, row["disease_name"].strip()))
        except _Excluded:
            skipped_excluded += 1
        except (OntologyError, IngestError, ValueError, ZeroDivisionError) as exc:
            rejected.append(RejectedRow(lineno, str(exc)))
    _check_reject_rate("MALFORMED_ROW", rejected, total, max_reject_rate)
    return DiseaseAnnotationSet(annotations, rejected, skipped_not, skipped_excluded)


def serialize_hpoa(annotations: DiseaseAnnotationSet) -> str:
    out = ["\t".join(HPOA_COLUMNS)]
    for ann in annotations:
        cells = dict.fromkeys(HPOA_COLUMNS, "")
        cells.update(
            database_id=str(ann.disease),
            disease_name=ann.disease_name,
            hpo_id=str(ann.phenotype),
            frequency=_FREQUENCY_OUT.get(ann.frequency, ""),
            aspect="P",
        )
        out.append("\t".join(cells[c] for c in HPOA_COLUMNS))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# genes

_SYMBOL_RE = re.compile(r"^[A-Z0-9][A-Z0-9-]*$")


@dataclass(frozen=True)
class GeneRecord:
    symbol: str
    diseases: frozenset[TermId] = frozenset()
    phenotypes: frozenset[TermId] = frozenset()

    def __post_init__(self) -> None:
        if not _SYMBOL_RE.match(self.symbol):
            raise IngestError("BAD_SYMBOL", f"gene symbol {self.symbol!r} is not HGNC-style")


GENE_COLUMNS = ("symbol", "disease_ids", "phenotype_ids")


def _split_ids(cell: str) -> frozenset[TermId]:
    return frozenset(TermId.parse(x) for x in cell.split("|") if x.strip())


def parse_genes(source: Source, max_reject_rate: float = DEFAULT_MAX_REJECT_RATE) -> list[GeneRecord]:
    """Gene table TSV: symbol, |-separated disease ids, |-separated HP ids.

    Symbols are upper-cased (``C9orf72`` becomes ``C9ORF72``).
    """
    lines = _data_lines(read_text(source))
    header = next(lines, None)
    if header is None or tuple(c.strip().lower() for c in header[1].split("\t")) != GENE_COLUMNS:
        raise IngestError("HEADER_MISMATCH", f"expected columns {', '.join(GENE_COLUMNS)}")
    genes, rejected, total = [], [], 0
    for lineno, line in lines:
        total += 1
        cells = line.split("\t")
        cells += [""] * (len(GENE_COLUMNS) - len(cells))
        try:
            if len(cells) != len(GENE_COLUMNS):
                raise ValueError(f"expected {len(GENE_COLUMNS)} columns")
            diseases = _split_ids(cells[1])
            phenotypes = _split_ids(cells[2])
            if any(d.namespace not in DISEASE_NAMESPACES for d in diseases):
                raise ValueError("disease ids must be ORPHA/OMIM")
            if any(p.namespace is not Namespace.HP for p in phenotypes):
                raise ValueError("phenotype ids must be HP")
            genes.append(GeneRecord(cells[0].strip().upper(), diseases, phenotypes))
        except (OntologyError, IngestError, ValueError) as exc:
            rejected.append(RejectedRow(lineno, str(exc)))
    _check_reject_rate("MALFORMED_ROW", rejected, total, max_reject_rate)
    return genes


def serialize_genes(genes: Iterable[GeneRecord]) -> str:
    out = ["\t".join(GENE_COLUMNS)]
    for g in genes:
        out.append("\t".join([
            g.symbol, "|".join(str(d) for d in sorted(g.diseases)), "|".join(str(p) for p in sorted(g.phenotypes)),
        ]))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# variants


class Significance(str, Enum):
    PATHOGENIC = "PATHOGENIC"
    LIKELY_PATHOGENIC = "LIKELY_PATHOGENIC"
    VUS = "VUS"
    OTHER = "OTHER"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]


_SEVERITY = {Significance.PATHOGENIC: 3, Significance.LIKELY_PATHOGENIC: 2, Significance.VUS: 1, Significance.OTHER: 0}

_CLNSIG_TOKENS = {
    "pathogenic": Significance.PATHOGENIC,
    "likely pathogenic": Significance.LIKELY_PATHOGENIC,
    "uncertain significance": Significance.VUS,
    "vus": Significance.VUS,
    "other": Significance.OTHER,
    "benign": Significance.OTHER,
    "likely benign": Significance.OTHER,
    "conflicting interpretations of pathogenicity": Significance.OTHER,
    "conflicting classifications of pathogenicity": Significance.OTHER,
    "not provided": Significance.OTHER,
    "drug response": Significance.OTHER,
    "risk factor": Significance.OTHER,
    "association": Significance.OTHER,
}
_CLNSIG_OUT = {
    Significance.PATHOGENIC: "Pathogenic",
    Significance.LIKELY_PATHOGENIC: "Likely_pathogenic",
    Significance.VUS: "Uncertain_significance",
    Significance.OTHER: "other",
}


def parse_significance(token: str) -> Significance:
    """Map a ClinVar CLNSIG value; compound values take their most severe part."""
    parts = [normalize_text(p.replace("_", " ")) for p in re.split(r"[/|,]", token) if p.strip()]
    found = []
    for part in parts:
        sig = _CLNSIG_TOKENS.get(part)
        if sig is None:
            logger.warning("unknown clinical significance %r mapped to OTHER", part)
            sig = Significance.OTHER
        found.append(sig)
    if not found:
        return Significance.OTHER
    return max(found, key=lambda s: s.severity)


def normalize_chrom(chrom: str) -> str:
    chrom = chrom.strip()
    if chrom.lower().startswith("chr"):
        chrom = chrom[3:]
    chrom = chrom.upper()
    return "MT" if chrom == "M" else chrom


def _chrom_rank(chrom: str) -> tuple[int, str]:
    if chrom.isdigit():
        return (int(chrom), "")
    order = {"X": 23, "Y": 24, "MT": 25}
    return (order.get(chrom, 26), chrom)


@dataclass(frozen=True)
class VariantRecord:
    chrom: str
    pos: int
    ref: str
    alt: str
    gene: str
    transcript: Optional[str] = None
    hgvs_c: Optional[str] = None
    hgvs_p: Optional[str] = None
    significance: Significance = Significance.OTHER
    provenance: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not (self.chrom and self.ref and self.alt):
            raise IngestError("MALFORMED_LINE", "chrom/ref/alt must be nonempty")
        if self.pos <= 0:
            raise IngestError("MALFORMED_LINE", f"position must be positive, got {self.pos}")
        if self.ref == self.alt:
            raise IngestError("MALFORMED_LINE", f"ref equals alt ({self.ref})")

    @property
    def key(self) -> tuple[str, int, str, str]:
        return (self.chrom, self.pos, self.ref, self.alt)

    @property
    def key_str(self) -> str:
        return f"{self.chrom}-{self.pos}-{self.ref}-{self.alt}"

    def sort_key(self) -> tuple:
        return (_chrom_rank(self.chrom), self.pos, self.ref, self.alt)


def parse_variant_key(text: str) -> tuple[str, int, str, str]:
    parts = text.strip().split("-")
    if len(parts) != 4 or not parts[1].isdigit():
        raise IngestError("MALFORMED_KEY", f"variant key must be chrom-pos-ref-alt, got {text!r}")
    return (normalize_chrom(parts[0]), int(parts[1]), parts[2].upper(), parts[3].upper())


def variant_key_str(key: tuple[str, int, str, str]) -> str:
    return "-".join(str(x) for x in key)


class VariantFormat(str, Enum):
    VCF_SLIM = "vcf"
    TSV = "tsv"


VARIANT_TSV_COLUMNS = ("chrom", "pos", "ref", "alt", "gene", "transcript", "hgvs_c", "hgvs_p", "significance",
                       "provenance")


def _parse_info(cell: str) -> dict[str, str]:
    info = {}
    for item in cell.split(";"):
        key, sep, value = item.partition("=")
        if key:
            info[key.strip()] = value.strip() if sep else ""
    return info


def parse_variants(
    source: Source,
    format: Union[VariantFormat, str] = VariantFormat.VCF_SLIM,
    provenance: str = "CLINVAR",
    max_reject_rate: float = DEFAULT_MAX_REJECT_RATE,
) -> list[VariantRecord]:
    """Parse VCF body lines (GENE/CLNSIG INFO keys) or the variant TSV.

    Multi-allelic ALT fields become one record per allele. ``GENEINFO`` is used
    when ``GENE`` is absent (first symbol).
    """
    fmt = VariantFormat(format)
    text = read_text(source)
    records: list[VariantRecord] = []
    rejected: list[RejectedRow] = []
    total = 0
    lines = _data_lines(text)
    if fmt is VariantFormat.TSV:
        header = next(lines, None)
        columns = tuple(c.strip().lower() for c in header[1].split("\t")) if header else ()
        if columns not in (VARIANT_TSV_COLUMNS, VARIANT_TSV_COLUMNS[:-1]):
            raise IngestError("HEADER_MISMATCH", f"expected columns {', '.join(VARIANT_TSV_COLUMNS)}")
    for lineno, line in lines:
        total += 1
        cells = line.split("\t")
        try:
            if fmt is VariantFormat.VCF_SLIM:
                records.extend(_vcf_records(cells, provenance))
            else:
                records.append(_tsv_record(cells, columns, provenance))
        except (IngestError, ValueError) as exc:
            msg = exc.message if isinstance(exc, IngestError) else str(exc)
            rejected.append(RejectedRow(lineno, msg))
    _check_reject_rate("MALFORMED_LINE", rejected, total, max_reject_rate)
    return records


def _opt(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    value = value.strip()
    return value if value and value != "." else None


def _vcf_records(cells: list[str], provenance: str) -> list[VariantRecord]:
    if len(cells) < 8:
        raise ValueError(f"expected at least 8 VCF columns, got {len(cells)}")
    chrom, pos, _id, ref, alts, _qual, _filter, info_cell = cells[:8]
    info = _parse_info(info_cell)
    gene = info.get("GENE") or info.get("GENEINFO", "").split("|")[0].split(":")[0]
    if not gene:
        raise ValueError("missing GENE")
    sig = parse_significance(info.get("CLNSIG", ""))
    out = []
    for alt in alts.split(","):
        alt = alt.strip().upper()
        if alt in ("", "."):
            raise ValueError("missing ALT allele")
        out.append(VariantRecord(
            chrom=normalize_chrom(chrom), pos=int(pos), ref=ref.strip().upper(), alt=alt,
            gene=gene.upper(), transcript=_opt(info.get("TRANSCRIPT")), hgvs_c=_opt(info.get("HGVSC")),
            hgvs_p=_opt(info.get("HGVSP")), significance=sig, provenance=frozenset([provenance]),
        ))
    return out


def _tsv_record(cells: list[str], columns: tuple[str, ...], provenance: str) -> VariantRecord:
    if len(cells) != len(columns):
        raise ValueError(f"expected {len(columns)} columns, got {len(cells)}")
    row = dict(zip(columns, cells))
    tags = frozenset(t for t in row.get("provenance", "").split("|") if t.strip()) or frozenset([provenance])
    return VariantRecord(
        chrom=normalize_chrom(row["chrom"]), pos=int(row["pos"]), ref=row["ref"].strip().upper(),
        alt=row["alt"].strip().upper(), gene=row["gene"].strip().upper(), transcript=_opt(row["transcript"]),
        hgvs_c=_opt(row["hgvs_c"]), hgvs_p=_opt(row["hgvs_p"]),
        significance=Significance(row["significance"].strip().upper()) if row["significance"].strip().upper()
        in Significance.__members__ else parse_significance(row["significance"]),
        provenance=tags,
    )


def serialize_variants(records: Iterable[VariantRecord], format: Union[VariantFormat, str] = VariantFormat.TSV) -> str:
    fmt = VariantFormat(format)
    if fmt is VariantFormat.TSV:
        out = ["\t".join(VARIANT_TSV_COLUMNS)]
        for r in records:
            out.append("\t".join([
                r.chrom, str(r.pos), r.ref, r.alt, r.gene, r.transcript or "", r.hgvs_c or "", r.hgvs_p or "",
                r.significance.value, "|".join(sorted(r.provenance)),
            ]))
        return "\n".join(out) + "\n"
    out = ["##fileformat=VCFv4.2", "#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO"]
    for r in records:
        info = [f"GENE={r.gene}", f"CLNSIG={_CLNSIG_OUT[r.significance]}"]
        for key, value in (("TRANSCRIPT", r.transcript), ("HGVSC", r.hgvs_c), ("HGVSP", r.hgvs_p)):
            if value:
                info.append(f"{key}={value}")
        out.append("\t".join([r.chrom, str(r.pos), ".", r.ref, r.alt, ".", ".", ";".join(info)]))
    return "\n".join(out) + "\n"


def dedupe_variants(records: Iterable[VariantRecord]) -> list[VariantRecord]:
    """Collapse records sharing (chrom, pos, ref, alt).

    The most severe significance wins, provenance tags are unioned, and
    annotation fields come from the most severe record (ties broken by field
    values), with gaps filled from the others. Output is sorted by key.
    """
    groups: dict[tuple, list[VariantRecord]] = {}
    for r in records:
        groups.setdefault(r.key, []).append(r)
    out = []
    for group in groups.values():
        ordered = sorted(group, key=lambda r: (
            -r.significance.severity, r.gene, r.transcript or "~", r.hgvs_c or "~", r.hgvs_p or "~",
        ))
        best = ordered[0]
        fill = {}
        for name in ("transcript", "hgvs_c", "hgvs_p"):
            if getattr(best, name) is None:
                fill[name] = next((getattr(r, name) for r in ordered if getattr(r, name)), None)
        provenance = frozenset().union(*(r.provenance for r in group))
        out.append(replace(best, provenance=provenance, **fill))
    out.sort(key=VariantRecord.sort_key)
    return out


# ---------------------------------------------------------------------------
# disease-name normalization and OMIM->ORPHA cross references


class NormalizationTable:
    """Lower-cased, whitespace-collapsed label -> disease TermId.

    A label that appears with two different ids is a conflict: it is listed in
    ``conflicts`` and resolves to nothing until a human edits the table.
    """

    def __init__(self) -> None:
        self._entries: dict[str, tuple[TermId, str]] = {}
        self._conflicts: dict[str, set[TermId]] = {}

    def add(self, label: str, term_id: TermId, provenance: str = "local") -> None:
        if term_id.namespace not in DISEASE_NAMESPACES:
            raise IngestError("BAD_NAMESPACE", f"{term_id} is not an ORPHA/OMIM id")
        key = normalize_text(label)
        if not key:
            raise IngestError("EMPTY_LABEL", "normalization label is empty")
        if key in self._conflicts:
            self._conflicts[key].add(term_id)
            return
        current = self._entries.get(key)
        if current is None:
            self._entries[key] = (term_id, provenance)
        elif current[0] != term_id:
            self._conflicts[key] = {current[0], term_id}
            del self._entries[key]

    def lookup(self, label: str) -> Optional[TermId]:
        hit = self._entries.get(normalize_text(label))
        return hit[0] if hit else None

    def provenance(self, label: str) -> Optional[str]:
        hit = self._entries.get(normalize_text(label))
        return hit[1] if hit else None

    @property
    def entries(self) -> Mapping[str, tuple[TermId, str]]:
        return MappingProxyType(self._entries)

    @property
    def conflicts(self) -> Mapping[str, frozenset[TermId]]:
        return MappingProxyType({k: frozenset(v) for k, v in self._conflicts.items()})

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, label: object) -> bool:
        return isinstance(label, str) and normalize_text(label) in self._entries


NORMALIZATION_COLUMNS = ("label", "term_id", "provenance")


def parse_normalization_table(source: Source) -> NormalizationTable:
    lines = _data_lines(read_text(source))
    header = next(lines, None)
    if header is None or tuple(c.strip().lower() for c in header[1].split("\t")) != NORMALIZATION_COLUMNS:
        raise IngestError("HEADER_MISMATCH", f"expected columns {', '.join(NORMALIZATION_COLUMNS)}")
    table = NormalizationTable()
    for lineno, line in lines:
        cells = line.split("\t")
        if len(cells) != 3:
            raise IngestError("MALFORMED_ROW", f"line {lineno}: expected 3 columns", line=lineno)
        try:
            table.add(cells[0], TermId.parse(cells[1]), cells[2].strip() or "local")
        except (OntologyError, IngestError) as exc:
            raise IngestError("MALFORMED_ROW", f"line {lineno}: {exc.message}", line=lineno) from None
    return table


def serialize_normalization_table(table: NormalizationTable) -> str:
    out = ["\t".join(NORMALIZATION_COLUMNS)]
    for key in sorted(table.entries):
        term_id, prov = table.entries[key]
        out.append(f"{key}\t{term_id}\t{prov}")
    return "\n".join(out) + "\n"


def normalize_entity(table: NormalizationTable, label: str) -> Optional[TermId]:
    if not label or not label.strip():
        raise IngestError("EMPTY_LABEL", "label is empty")
    return table.lookup(label)


class CrossReferenceTable:
    """OMIM <-> ORPHA cross references. Both ids are kept; nothing is merged."""

    def __init__(self, pairs: Iterable[tuple[TermId, TermId]] = ()) -> None:
        self._to_orpha: dict[TermId, set[TermId]] = {}
        for omim, orpha in pairs:
            if omim.namespace is not Namespace.OMIM or orpha.namespace is not Namespace.ORPHA:
                raise IngestError("BAD_NAMESPACE", f"cross reference must be OMIM->ORPHA: {omim}, {orpha}")
            self._to_orpha.setdefault(omim, set()).add(orpha)

    def to_orpha(self, omim: TermId) -> frozenset[TermId]:
        return frozenset(self._to_orpha.get(omim, ()))

    def pairs(self) -> list[tuple[TermId, TermId]]:
        return sorted((o, r) for o, rs in self._to_orpha.items() for r in rs)

    def __len__(self) -> int:
        return sum(len(v) for v in self._to_orpha.values())


def parse_xref_table(source: Source) -> CrossReferenceTable:
    """TSV with header ``omim_id<TAB>orpha_id``."""
    lines = _data_lines(read_text(source))
    header = next(lines, None)
    if header is None or tuple(c.strip().lower() for c in header[1].split("\t")) != ("omim_id", "orpha_id"):
        raise IngestError("HEADER_MISMATCH", "expected columns omim_id, orpha_id")
    pairs = []
    for lineno, line in lines:
        cells = line.split("\t")
        try:
            pairs.append((TermId.parse(cells[0]), TermId.parse(cells[1])))
        except (OntologyError, IndexError):
            raise IngestError("MALFORMED_ROW", f"line {lineno}: bad cross reference", line=lineno) from None
    return CrossReferenceTable(pairs)


# ---------------------------------------------------------------------------
# validation

FINDING_CATEGORIES = ("dangling_phenotype", "dangling_disease", "duplicate_edge", "unknown_gene")


@dataclass(frozen=True)
class Finding:
    category: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def counts(self) -> dict[str, int]:
        counts = Counter(f.category for f in self.findings)
        return {c: counts.get(c, 0) for c in FINDING_CATEGORIES}

    @property
    def clean(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {
            "clean": self.clean,
            "counts": self.counts,
            "findings": [{"category": f.category, "subject": f.subject, "detail": f.detail} for f in self.findings],
        }


def validate_sources(
    ontology: OntologyGraph,
    annotations: DiseaseAnnotationSet,
    genes: Sequence[GeneRecord] = (),
    variants: Sequence[VariantRecord] = (),
    disease_ontology: Optional[OntologyGraph] = None,
) -> ValidationReport:
    """Cross-check parsed sources before a graph build.

    Findings: phenotype ids missing from the ontology; disease ids that are
    neither annotated nor in the disease ontology; duplicate relations
    (gene rows, variant keys; annotation
    triples are already collapsed by :class:`DiseaseAnnotationSet`); variants whose gene is not
    in the gene table.
    """
    findings: list[Finding] = []
    known_diseases = set(annotations.by_disease)
    if disease_ontology is not None:
        known_diseases |= set(disease_ontology)

    for ann in annotations:
        if ann.phenotype not in ontology:
            findings.append(Finding("dangling_phenotype", str(ann.phenotype), f"annotated to {ann.disease}"))
        if (disease_ontology is not None and ann.disease.namespace is Namespace.ORPHA
                and ann.disease not in disease_ontology):
            findings.append(Finding("dangling_disease", str(ann.disease), "not in disease ontology"))

    symbols: set[str] = set()
    for gene in genes:
        if gene.symbol in symbols:
            findings.append(Finding("duplicate_edge", gene.symbol, "gene listed twice"))
        symbols.add(gene.symbol)
        for p in sorted(gene.phenotypes):
            if p not in ontology:
                findings.append(Finding("dangling_phenotype", str(p), f"linked to gene {gene.symbol}"))
        for d in sorted(gene.diseases):
            if d not in known_diseases:
                findings.append(Finding("dangling_disease", str(d), f"linked to gene {gene.symbol}"))

    keys: set[tuple] = set()
    for v in variants:
        if v.key in keys:
            findings.append(Finding("duplicate_edge", v.key_str, "variant listed twice"))
        keys.add(v.key)
        if v.gene not in symbols:
            findings.append(Finding("unknown_gene", v.key_str, f"gene {v.gene} not in gene table"))
    return ValidationReport(tuple(findings))
