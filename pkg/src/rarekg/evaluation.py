"""Prediction parsing and normalization, diagnosis matching and Top-K reports."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from .errors import ClientError, EvaluationError, IngestError
from .ingest import CrossReferenceTable, NormalizationTable
from .ontology import Namespace, OntologyGraph, TermId
from .stats import DEFAULT_CI_LEVEL, DEFAULT_RESAMPLES, bootstrap_ci

log = logging.getLogger(__name__)

MAX_PREDICTIONS = 20
DEFAULT_CUTOFFS = (1, 3, 5, 10, 20)

_NUMBERED = re.compile(r"^\s*(?:\*\*)?(\d{1,3})\s*[.)]\s*(?:\*\*)?\s*(.+?)\s*$")
_BULLET = re.compile(r"^\s*[-*•]\s+(.+?)\s*$")
_CODE = r"(?:ORPHA(?:NET)?|OMIM|MIM|HP|MONDO)\s*[:_ ]?\s*\d+"
_CONFIDENCE = r"(?:\d+(?:\.\d+)?\s*%|confidence[^()]*|probability[^()]*|likelihood[^()]*|(?:very\s+)?(?:high|moderate|medium|low)(?:\s+(?:probability|likelihood|confidence))?)"
_TRAILING_PAREN = re.compile(rf"\s*[\(\[]\s*(?:{_CODE}|{_CONFIDENCE})(?:\s*[,;]\s*(?:{_CODE}|{_CONFIDENCE}))*\s*[\)\]]\s*$", re.I)
_TRAILING_DASH = re.compile(rf"\s*(?:[-:–—,]\s*)(?:{_CODE}|{_CONFIDENCE})\s*$", re.I)


def _clean_label(text: str) -> str:
    label = text.strip()
    while True:
        stripped = _TRAILING_DASH.sub("", _TRAILING_PAREN.sub("", label))
        stripped = stripped.strip().strip("*").rstrip(".,;:").strip()
        if stripped == label or not stripped:
            return label
        label = stripped


def _looks_like_label(line: str) -> bool:
    return len(line.split()) <= 12 and not re.search(r"[.!?]\s+\S", line) and not line.endswith((".", "?", "!"))


def parse_prediction_list(text: str, cap: int = MAX_PREDICTIONS) -> list[tuple[int, str]]:
    """Extract an ordered disease list from a model response.

    Numbered lines ("1." or "1)") win over dash bullets, which win over a bare
    one-per-line list. Trailing identifier codes and confidence notes are
    stripped. Ranks are positions in the extracted list, capped at ``cap``.
    """
    lines = [ln for ln in (text or "").splitlines() if ln.strip()]
    items = [m.group(2) for m in map(_NUMBERED.match, lines) if m]
    if not items:
        items = [m.group(1) for m in map(_BULLET.match, lines) if m]
    if not items and len(lines) >= 2 and all(_looks_like_label(ln.strip()) for ln in lines):
        items = lines
    labels = [lab for lab in (_clean_label(i) for i in items) if lab]
    if not labels:
        raise EvaluationError("NO_LIST_FOUND", "no disease list recognised in the response")
    return list(enumerate(labels[:cap], start=1))


# ---------------------------------------------------------------------------
# normalization


class ExclusionReason(str, Enum):
    UNMAPPED = "UNMAPPED"
    AMBIGUOUS_XREF = "AMBIGUOUS_XREF"


@dataclass(frozen=True)
class Prediction:
    rank: int
    raw_label: str
    normalized: Optional[TermId] = None
    excluded: Optional[ExclusionReason] = None

    def __post_init__(self) -> None:
        if (self.normalized is None) == (self.excluded is None):
            raise EvaluationError("BAD_PREDICTION", "a prediction is either normalized or excluded")


@dataclass(frozen=True)
class PredictionSet:
    """Normalized predictions for one case.

    ``predictions`` keeps excluded entries (with their reason); repeats of an
    already-seen code are dropped and only counted in ``deduplicated``.
    """

    case_id: str
    predictions: tuple[Prediction, ...]
    model_tag: str = ""
    deduplicated: int = 0
    truncated: int = 0
    remote_error: Optional[str] = None

    def __post_init__(self) -> None:
        if len(self.predictions) > MAX_PREDICTIONS:
            raise EvaluationError("TOO_MANY_PREDICTIONS", f"{len(self.predictions)} > {MAX_PREDICTIONS}")
        codes = [p.normalized for p in self.predictions if p.normalized is not None]
        if len(codes) != len(set(codes)):
            raise EvaluationError("DUPLICATE_PREDICTION", f"case {self.case_id} repeats a normalized code")

    @property
    def kept(self) -> tuple[Prediction, ...]:
        return tuple(p for p in self.predictions if p.excluded is None)

    @property
    def excluded(self) -> tuple[Prediction, ...]:
        return tuple(p for p in self.predictions if p.excluded is not None)


class Resolver(Protocol):
    def resolve(self, label: str) -> Optional[TermId]: ...


def normalize_predictions(
    case_id: str,
    labels: Sequence[str],
    table: NormalizationTable,
    remote: Optional[Resolver] = None,
    xrefs: Optional[CrossReferenceTable] = None,
    model_tag: str = "",
) -> PredictionSet:
    """Map raw labels to ORPHA codes.

    The local table is consulted first, then ``remote`` (hits are added to the
    table). A remote outage is recorded on the set and the remaining labels are
    resolved locally only. OMIM codes are translated through ``xrefs`` when
    they map to exactly one ORPHA code. Input beyond 20 labels is truncated.
    """
    if not labels:
        raise EvaluationError("EMPTY_LABELS", f"case {case_id!r} has no predicted labels")
    truncated = max(0, len(labels) - MAX_PREDICTIONS)
    remote_error = None
    seen: set[TermId] = set()
    out: list[Prediction] = []
    deduped = 0
    for rank, raw in enumerate(labels[:MAX_PREDICTIONS], start=1):
        code = table.lookup(raw) if raw.strip() else None
        if code is None and remote is not None and remote_error is None and raw.strip():
            try:
                code = remote.resolve(raw)
            except ClientError as exc:
                if exc.code != "REMOTE_UNAVAILABLE":
                    raise
                remote_error = exc.message
                log.warning("resolver unavailable, continuing local-only: %s", exc.message)
            else:
                if code is not None:
                    try:
                        table.add(raw, code, "remote")
                    except IngestError:
                        code = None
        reason = None
        if code is not None and code.namespace is Namespace.OMIM:
            mapped = xrefs.to_orpha(code) if xrefs is not None else frozenset()
            if len(mapped) == 1:
                code = next(iter(mapped))
            else:
                code, reason = None, ExclusionReason.AMBIGUOUS_XREF if mapped else ExclusionReason.UNMAPPED
        if code is None:
            out.append(Prediction(rank, raw, None, reason or ExclusionReason.UNMAPPED))
        elif code in seen:
            deduped += 1
        else:
            seen.add(code)
            out.append(Prediction(rank, raw, code))
    return PredictionSet(case_id, tuple(out), model_tag, deduped, truncated, remote_error)


# ---------------------------------------------------------------------------
# matching


class MatchMode(str, Enum):
    EXACT = "exact"
    PARENT = "parent"
    ANY_ANCESTOR = "any_ancestor"


@dataclass(frozen=True)
class EvalConfig:
    """``max_ancestor_depth=None`` credits any ancestor of the truth."""

    k_cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS
    hierarchical: bool = True
    max_ancestor_depth: Optional[int] = 1
    bootstrap_resamples: int = DEFAULT_RESAMPLES
    ci_level: float = DEFAULT_CI_LEVEL
    rng_seed: int = 0

    def __post_init__(self) -> None:
        ks = tuple(int(k) for k in self.k_cutoffs)
        object.__setattr__(self, "k_cutoffs", ks)
        if not ks or list(ks) != sorted(set(ks)) or ks[0] < 1 or ks[-1] > MAX_PREDICTIONS:
            raise EvaluationError("BAD_CONFIG", f"cutoffs must be strictly ascending within 1..20, got {ks}")
        if self.max_ancestor_depth is not None and self.max_ancestor_depth < 1:
            raise EvaluationError("BAD_CONFIG", "max_ancestor_depth must be positive or None")
        if not 0 < self.ci_level < 1:
            raise EvaluationError("BAD_CONFIG", "ci_level must lie in (0, 1)")
        if self.bootstrap_resamples < 1:
            raise EvaluationError("BAD_CONFIG", "bootstrap_resamples must be >= 1")

    @classmethod
    def for_mode(cls, mode: MatchMode, **kw) -> "EvalConfig":
        if mode is MatchMode.EXACT:
            return cls(hierarchical=False, **kw)
        return cls(hierarchical=True, max_ancestor_depth=1 if mode is MatchMode.PARENT else None, **kw)

    def to_dict(self) -> dict:
        return {
            "k_cutoffs": list(self.k_cutoffs), "hierarchical": self.hierarchical,
            "max_ancestor_depth": self.max_ancestor_depth, "bootstrap_resamples": self.bootstrap_resamples,
            "ci_level": self.ci_level, "rng_seed": self.rng_seed,
        }


def match_diagnosis(pred: TermId, truth: TermId, disease_ontology: OntologyGraph, cfg: EvalConfig) -> bool:
    """Exact match, or (hierarchical) ``pred`` is an ancestor of ``truth`` within the depth limit.

    A more specific prediction (a descendant of the truth) is never credited.
    """
    for t in (pred, truth):
        if t not in disease_ontology:
            raise EvaluationError("UNKNOWN_DISEASE", f"{t} is not in the disease ontology", disease=str(t))
    if pred == truth:
        return True
    if not cfg.hierarchical:
        return False
    return pred in disease_ontology.ancestors_within(truth, cfg.max_ancestor_depth)


# ---------------------------------------------------------------------------
# Top-K


@dataclass(frozen=True)
class EvalCase:
    predictions: PredictionSet
    truth: Optional[TermId]
    stratum: Optional[str] = None
    categories: frozenset[str] = frozenset()


@dataclass(frozen=True)
class AccuracyEstimate:
    k: int
    accuracy: float
    lower: float
    upper: float
    stderr: float
    n: int

    @property
    def half_width(self) -> float:
        return (self.upper - self.lower) / 2

    def to_dict(self) -> dict:
        return {
            "k": self.k, "accuracy": self.accuracy, "ci_lower": self.lower, "ci_upper": self.upper,
            "stderr": self.stderr, "ci_half_width": self.half_width, "n": self.n,
        }


@dataclass(frozen=True)
class EvalReport:
    config: EvalConfig
    overall: tuple[AccuracyEstimate, ...]
    strata: Mapping[str, tuple[AccuracyEstimate, ...]]
    categories: Mapping[str, tuple[AccuracyEstimate, ...]]
    mode_comparison: Mapping[str, Mapping[int, float]]
    match_ranks: Mapping[str, Optional[int]]
    unevaluable: Mapping[str, str]
    excluded_predictions: int
    deduplicated_predictions: int
    unknown_predictions: int
    remote_errors: tuple[str, ...] = field(default=())

    def accuracy(self, k: int) -> float:
        for est in self.overall:
            if est.k == k:
                return est.accuracy
        raise EvaluationError("BAD_CONFIG", f"cutoff {k} was not evaluated")

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_evaluated": len(self.match_ranks),
            "overall": [e.to_dict() for e in self.overall],
            "strata": {s: [e.to_dict() for e in v] for s, v in sorted(self.strata.items())},
            "categories": {c: [e.to_dict() for e in v] for c, v in sorted(self.categories.items())},
            "mode_comparison": {m: {str(k): a for k, a in v.items()} for m, v in self.mode_comparison.items()},
            "match_ranks": dict(sorted(self.match_ranks.items())),
            "unevaluable": dict(sorted(self.unevaluable.items())),
            "excluded_predictions": self.excluded_predictions,
            "deduplicated_predictions": self.deduplicated_predictions,
            "unknown_predictions": self.unknown_predictions,
            "remote_errors": list(self.remote_errors),
        }

    def csv_rows(self) -> list[dict]:
        """Flat rows: one per (group, cutoff), with the overall group first."""
        rows = []
        groups = [("overall", "all", self.overall)]
        groups += [("stratum", s, v) for s, v in sorted(self.strata.items())]
        groups += [("category", c, v) for c, v in sorted(self.categories.items())]
        for kind, name, ests in groups:
            for e in ests:
                rows.append({"group_kind": kind, "group": name, **e.to_dict()})
        return rows


def translate_truth(truth: TermId, xrefs: Optional[CrossReferenceTable]) -> tuple[Optional[TermId], str]:
    if truth.namespace is Namespace.ORPHA:
        return truth, ""
    mapped = xrefs.to_orpha(truth) if xrefs is not None else frozenset()
    if len(mapped) == 1:
        return next(iter(mapped)), ""
    return None, "AMBIGUOUS_XREF" if mapped else "NO_XREF"


def _first_match(
    ps: PredictionSet, truth: TermId, ontology: OntologyGraph, cfg: EvalConfig, unknown: list[TermId]
) -> Optional[int]:
    for p in ps.kept:
        if p.normalized not in ontology:
            unknown.append(p.normalized)
            continue
        if match_diagnosis(p.normalized, truth, ontology, cfg):
            return p.rank
    return None


def _estimates(ranks: Sequence[Optional[int]], cfg: EvalConfig) -> tuple[AccuracyEstimate, ...]:
    out = []
    for k in cfg.k_cutoffs:
        hits = [1.0 if r is not None and r <= k else 0.0 for r in ranks]
        b = bootstrap_ci(hits, cfg.bootstrap_resamples, cfg.ci_level, cfg.rng_seed)
        out.append(AccuracyEstimate(k, sum(hits) / len(hits), b.lower, b.upper, b.stderr, len(hits)))
    return tuple(out)


def topk_accuracy(
    cases: Sequence[EvalCase],
    disease_ontology: OntologyGraph,
    cfg: EvalConfig = EvalConfig(),
    xrefs: Optional[CrossReferenceTable] = None,
) -> EvalReport:
    """Top-K accuracy with bootstrap intervals, per stratum and per category.

    A case counts at cutoff k when a kept prediction with rank <= k matches.
    Ranks are the original list positions, so excluded entries still occupy
    their slot. Cases whose truth is missing, untranslatable to ORPHA or
    absent from the ontology are UNEVALUABLE and left out of every
    denominator. Predicted codes absent from the ontology never match and are
    counted. Exact, parent-only and any-ancestor accuracies are reported side
    by side whatever ``cfg`` selects.
    """
    if not cases:
        raise EvaluationError("EMPTY_CASE_SET", "no cases to evaluate")
    unevaluable: dict[str, str] = {}
    usable: list[tuple[EvalCase, TermId]] = []
    for c in cases:
        cid = c.predictions.case_id
        if c.truth is None:
            unevaluable[cid] = "MISSING_TRUTH"
            continue
        truth, why = translate_truth(c.truth, xrefs)
        if truth is None:
            unevaluable[cid] = why
        elif truth not in disease_ontology:
            unevaluable[cid] = "UNKNOWN_DISEASE"
        else:
            usable.append((c, truth))
    if not usable:
        raise EvaluationError("EMPTY_CASE_SET", "every case is unevaluable", unevaluable=sorted(unevaluable))

    unknown: list[TermId] = []
    ranks = [_first_match(c.predictions, t, disease_ontology, cfg, unknown) for c, t in usable]
    modes = {}
    for mode in MatchMode:
        mcfg = EvalConfig.for_mode(mode, k_cutoffs=cfg.k_cutoffs)
        mranks = [_first_match(c.predictions, t, disease_ontology, mcfg, []) for c, t in usable]
        modes[mode.value] = {k: sum(1 for r in mranks if r is not None and r <= k) / len(mranks) for k in cfg.k_cutoffs}

    strata: dict[str, list[Optional[int]]] = {}
    cats: dict[str, list[Optional[int]]] = {}
    for (c, _), r in zip(usable, ranks):
        if c.stratum is not None:
            strata.setdefault(c.stratum, []).append(r)
        for cat in c.categories:
            cats.setdefault(cat, []).append(r)

    return EvalReport(
        config=cfg,
        overall=_estimates(ranks, cfg),
        strata={s: _estimates(v, cfg) for s, v in sorted(strata.items())},
        categories={s: _estimates(v, cfg) for s, v in sorted(cats.items())},
        mode_comparison=modes,
        match_ranks={c.predictions.case_id: r for (c, _), r in zip(usable, ranks)},
        unevaluable=unevaluable,
        excluded_predictions=sum(len(c.predictions.excluded) for c in cases),
        deduplicated_predictions=sum(c.predictions.deduplicated for c in cases),
        unknown_predictions=len(unknown),
        remote_errors=tuple(sorted({c.predictions.remote_error for c in cases if c.predictions.remote_error})),
    )


def exclusion_balance(raw_count: int, ps: PredictionSet) -> bool:
    """``raw == kept + excluded + deduplicated + truncated``."""
    return raw_count == len(ps.kept) + len(ps.excluded) + ps.deduplicated + ps.truncated


def cases_from_records(
    records: Iterable[Mapping],
    truths: Mapping[str, Optional[TermId]],
    table: NormalizationTable,
    remote: Optional[Resolver] = None,
    xrefs: Optional[CrossReferenceTable] = None,
    strata: Optional[Mapping[str, str]] = None,
    categories: Optional[Mapping[str, frozenset[str]]] = None,
    extractor=None,
) -> tuple[list[EvalCase], dict[str, str]]:
    """Turn prediction records into evaluation cases.

    Records hold either ``predictions`` (a label list) or ``raw_output_text``.
    Raw text that has no recognisable list goes to ``extractor`` when given
    (a callable returning labels, e.g. the LLM fallback); otherwise, or if that
    fails too, the case is UNEVALUABLE. Returns the cases and the unparseable
    case ids with reasons.
    """
    out: list[EvalCase] = []
    failed: dict[str, str] = {}
    for rec in records:
        cid = str(rec["case_id"])
        if "predictions" in rec:
            labels = [str(x) for x in rec["predictions"]]
        else:
            try:
                labels = [lab for _, lab in parse_prediction_list(rec.get("raw_output_text", ""))]
            except EvaluationError:
                if extractor is None:
                    failed[cid] = "NO_LIST_FOUND"
                    continue
                try:
                    labels = list(extractor(rec.get("raw_output_text", "")))
                except ClientError as exc:
                    failed[cid] = exc.code
                    continue
        if not labels:
            failed[cid] = "NO_LIST_FOUND"
            continue
        ps = normalize_predictions(cid, labels, table, remote, xrefs, str(rec.get("model_tag", "")))
        if ps.remote_error is not None:
            remote = None
        out.append(EvalCase(
            ps, truths.get(cid), (strata or {}).get(cid), frozenset((categories or {}).get(cid, ())),
        ))
    return out, failed
