"""Command-line entry point: ``rarekg <subcommand> [options]``.

Exit codes: 0 success, 1 parse or domain error, 2 validation findings,
3 I/O error, 4 unevaluable cases without ``--allow-unevaluable``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from . import cases as cases_mod
from .clients import EntityResolver, LlmClient, LlmEndpointConfig, ResolverConfig, extract_list_via_llm
from .errors import IngestError, OntologyError, RareKGError
from .evaluation import EvalConfig, cases_from_records, topk_accuracy
from .ingest import (
    CrossReferenceTable,
    DiseaseAnnotationSet,
    NormalizationTable,
    VariantFormat,
    dedupe_variants,
    parse_genes,
    parse_hpoa,
    parse_normalization_table,
    parse_variants,
    parse_xref_table,
    validate_sources,
)
from .interpret import fit_global_surrogate, profile_evidence, summarize_fractions
from .kg import ContextForm, RetrievalQuery, build_kg, load_snapshot, query_typed, save_snapshot, serialize_context
from .ontology import OntologyFormat, OntologyGraph, TermId, compute_ic, parse_ontology
from .ranking import Method, PatientProfile, ResnikSimilarity, composite_difficulty, rank_diseases, select_top_difficult, stratify_case
from .stats import FinderScorecard, aggregate_finder

log = logging.getLogger("rarekg")

EXIT_OK, EXIT_ERROR, EXIT_VALIDATION, EXIT_IO, EXIT_UNEVALUABLE = 0, 1, 2, 3, 4
REPORT_VERSION = 1
INPUT_KEYS = (
    "ontology", "disease_ontology", "hpoa", "genes", "variants", "normalization", "xrefs",
    "cases", "predictions", "scorecards", "features", "snapshot",
)


class ExitError(Exception):
    def __init__(self, code: int, record: Mapping[str, Any]) -> None:
        super().__init__(record.get("message", ""))
        self.code = code
        self.record = record


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Effective configuration after the config file and flag overrides are merged.

    Relative input paths in a config file are resolved against that file's
    directory. ``variants`` entries are ``{"path", "format", "provenance"}``
    objects or bare paths (format from the suffix).
    """

    inputs: dict[str, Any] = field(default_factory=dict)
    eval: dict[str, Any] = field(default_factory=dict)
    synthetic: dict[str, Any] = field(default_factory=dict)
    resolver: dict[str, Any] = field(default_factory=dict)
    llm: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out: str = "out"

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls()
        p = Path(path)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ExitError(EXIT_ERROR, {"error": "BAD_CONFIG", "message": f"{path}: {exc}"}) from None
        unknown = set(doc) - {"inputs", "eval", "synthetic", "resolver", "llm", "seed", "out"}
        if unknown:
            raise ExitError(EXIT_ERROR, {"error": "BAD_CONFIG", "message": f"unknown keys {sorted(unknown)}"})
        cfg = cls(**doc)
        base = p.resolve().parent
        cfg.inputs = {k: _resolve_input(v, base) for k, v in cfg.inputs.items()}
        bad = set(cfg.inputs) - set(INPUT_KEYS)
        if bad:
            raise ExitError(EXIT_ERROR, {"error": "BAD_CONFIG", "message": f"unknown inputs {sorted(bad)}"})
        for name, value in cfg.inputs.items():
            for f in _paths_of(value):
                if not Path(f).exists() and name != "snapshot":
                    raise ExitError(EXIT_IO, {"error": "MISSING_INPUT", "message": f"{name}: {f} does not exist"})
        if "out" in doc and not Path(cfg.out).is_absolute():
            cfg.out = str(base / cfg.out)
        return cfg

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs, "eval": self.eval, "synthetic": self.synthetic,
            "resolver": self.resolver, "llm": {k: v for k, v in self.llm.items() if k != "api_key"},
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        """SHA-256 over the effective settings and the bytes of every input file.

        Input locations are left out so a moved checkout hashes the same.
        """
        doc = {**self.to_dict(), "inputs": sorted(self.inputs)}
        h = hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8"))
        for name in sorted(self.inputs):
            for f in _paths_of(self.inputs[name]):
                p = Path(f)
                if p.is_file():
                    h.update(name.encode() + b"\0" + p.read_bytes())
                elif p.is_dir():
                    for child in sorted(p.glob("*.json")):
                        h.update(child.name.encode() + b"\0" + child.read_bytes())
        return h.hexdigest()


def _resolve_input(value: Any, base: Path) -> Any:
    if isinstance(value, str):
        return str(base / value) if not Path(value).is_absolute() else value
    if isinstance(value, list):
        return [_resolve_input(v, base) for v in value]
    if isinstance(value, dict) and "path" in value:
        return {**value, "path": _resolve_input(value["path"], base)}
    return value


def _paths_of(value: Any) -> list[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, list):
        return [p for v in value for p in _paths_of(v)]
    if isinstance(value, dict) and "path" in value:
        return [value["path"]]
    return []


# ---------------------------------------------------------------------------
# outputs


class Outputs:
    """Writes outputs under one directory and records them in ``manifest.json``.

    JSON reports carry a ``run`` block with the config hash and seed; CSV rows
    carry them as columns. Data files that must stay byte-compatible with
    their inputs (case files, context blocks) are covered through the manifest.
    """

    def __init__(self, root: str, command: str, config_hash: str, seed: int) -> None:
        self.root = Path(root)
        self.command = command
        self.config_hash = config_hash
        self.seed = seed
        self.written: dict[str, str] = {}

    @property
    def run(self) -> dict:
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed,
                "report_version": REPORT_VERSION}

    def write_bytes(self, rel: str, data: bytes) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.written[rel] = hashlib.sha256(data).hexdigest()
        return path

    def write_text(self, rel: str, text: str) -> Path:
        return self.write_bytes(rel, text.encode("utf-8"))

    def write_report(self, rel: str, body: Mapping[str, Any]) -> Path:
        doc = {"run": self.run, **body}
        return self.write_text(rel, json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False, default=str) + "\n")

    def write_csv(self, rel: str, rows: Sequence[Mapping[str, Any]]) -> Path:
        buf = io.StringIO()
        if rows:
            fields = list(rows[0]) + ["config_hash", "seed"]
            w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({**r, "config_hash": self.config_hash, "seed": self.seed})
        return self.write_text(rel, buf.getvalue())

    def finalize(self) -> None:
        path = self.root / "manifest.json"
        existing: dict[str, Any] = {}
        if path.exists():
            try:
                existing = json.loads(path.read_text(encoding="utf-8")).get("files", {})
            except (json.JSONDecodeError, AttributeError):
                existing = {}
        for rel, digest in self.written.items():
            existing[rel] = {"sha256": digest, "command": self.command, "config_hash": self.config_hash,
                             "seed": self.seed}
        doc = {"report_version": REPORT_VERSION, "files": dict(sorted(existing.items()))}
        self.root.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# loading


def _require(cfg: RunConfig, key: str) -> Any:
    value = cfg.inputs.get(key)
    if value is None:
        raise ExitError(EXIT_ERROR, {"error": "MISSING_INPUT", "message": f"input {key!r} is not configured"})
    return value


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_ontology(path: str) -> OntologyGraph:
    fmt = OntologyFormat.JSON_SUBSET if path.endswith(".json") else OntologyFormat.OBO_SUBSET
    return parse_ontology(_read(path), fmt)


def _load_annotations(cfg: RunConfig) -> DiseaseAnnotationSet:
    value = _require(cfg, "hpoa")
    sets = [parse_hpoa(_read(p)) for p in _paths_of(value)]
    merged = sets[0]
    for s in sets[1:]:
        merged = merged.merged_with(s)
    return merged


def _load_variants(cfg: RunConfig) -> list:
    value = cfg.inputs.get("variants")
    if not value:
        return []
    entries = value if isinstance(value, list) else [value]
    records = []
    for e in entries:
        spec = e if isinstance(e, dict) else {"path": e}
        path = spec["path"]
        fmt = spec.get("format") or ("vcf" if path.endswith(".vcf") else "tsv")
        records.extend(parse_variants(_read(path), VariantFormat(fmt), spec.get("provenance", "CLINVAR")))
    return dedupe_variants(records)


def _load_optional(cfg: RunConfig, key: str, parser):
    value = cfg.inputs.get(key)
    return parser(_read(value)) if value else None


def _load_cases(cfg: RunConfig, override: Optional[str]) -> list[cases_mod.CaseRecord]:
    return cases_mod.read_cases(override or _require(cfg, "cases"))


def _read_jsonl(path: str) -> list[dict]:
    out = []
    for lineno, line in enumerate(_read(path).splitlines(), start=1):
        if line.strip():
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ExitError(EXIT_ERROR, {"error": "MALFORMED_RECORD", "message": f"{path}:{lineno}: {exc}"}) from None
    return out


def _profile(case: cases_mod.CaseRecord) -> PatientProfile:
    return PatientProfile(case.case_id, case.phenotypes, case.truth)


# ---------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig, args, out: Outputs) -> int:
    try:
        ontology = load_ontology(_require(cfg, "ontology"))
        disease_ontology = _load_optional(cfg, "disease_ontology", lambda t: parse_ontology(t))
        annotations = _load_annotations(cfg)
        genes = _load_optional(cfg, "genes", parse_genes) or []
        variants = _load_variants(cfg)
        xrefs = _load_optional(cfg, "xrefs", parse_xref_table)
    except (OntologyError, IngestError) as exc:
        raise ExitError(EXIT_ERROR, exc.to_record()) from None
    report = validate_sources(ontology, annotations, genes, variants, disease_ontology)
    out.write_report("validation.json", report.to_dict())
    if not report.clean:
        raise ExitError(EXIT_VALIDATION, {"error": "VALIDATION_NOT_CLEAN", "message": "source validation failed",
                                          "details": report.counts})
    kg = build_kg(ontology, annotations, genes, variants, disease_ontology, xrefs)
    ic = compute_ic(ontology, annotations)
    buf = io.StringIO()
    save_snapshot(kg, buf, ic, meta={"config_hash": out.config_hash, "seed": out.seed})
    out.write_text("kg_snapshot.jsonl", buf.getvalue())
    out.write_report("build_stats.json", {"build_stats": kg.build_stats, "annotations": {
        "kept": len(annotations), "skipped_not": annotations.skipped_not,
        "skipped_excluded": annotations.skipped_excluded, "rejected": len(annotations.rejected),
    }})
    return EXIT_OK


def cmd_rank(cfg: RunConfig, args, out: Outputs) -> int:
    ontology = load_ontology(_require(cfg, "ontology"))
    annotations = _load_annotations(cfg)
    ic = compute_ic(ontology, annotations)
    method = Method(args.method)
    sim = ResnikSimilarity(ic, ontology) if method is Method.BIDIRECTIONAL else None
    results = []
    for case in _load_cases(cfg, args.cases):
        profile = _profile(case)
        ranking = rank_diseases(ic, ontology, annotations, profile, method, args.k, similarity=sim)
        entry: dict[str, Any] = {
            "case_id": case.case_id,
            "truth": str(case.truth) if case.truth else None,
            "ranking": [{"rank": r.rank, "disease": str(r.disease), "score": r.score} for r in ranking],
        }
        if case.truth is not None:
            stratum = stratify_case(annotations, profile)
            entry["key_phenotypes"] = stratum.key_count
            entry["tier"] = stratum.tier.value
        results.append(entry)
    out.write_report("rankings.json", {"method": method.value, "k": args.k, "cases": results})
    return EXIT_OK


def cmd_retrieve(cfg: RunConfig, args, out: Outputs) -> int:
    snap_path = args.snapshot or cfg.inputs.get("snapshot") or str(Path(cfg.out) / "kg_snapshot.jsonl")
    snap = load_snapshot(snap_path)
    kw = {"max_candidates": args.k}
    if args.phenotypes:
        q = RetrievalQuery.for_phenotypes([p for p in args.phenotypes.split(",") if p.strip()], **kw)
    elif args.disease:
        q = RetrievalQuery.for_disease(args.disease, **kw)
    elif args.gene:
        q = RetrievalQuery.for_gene(args.gene, **kw)
    else:
        q = RetrievalQuery.for_variant(args.variant, **kw)
    block = query_typed(snap.kg, q, snap.ic)
    form = ContextForm(args.form)
    name = "context.txt" if form is ContextForm.TEXT else "context.json"
    out.write_bytes(name, serialize_context(block, form))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args, out: Outputs) -> int:
    ontology = load_ontology(_require(cfg, "ontology"))
    annotations = _load_annotations(cfg)
    syn = cfg.synthetic
    diseases = [TermId.parse(d) for d in (args.diseases.split(",") if args.diseases else syn.get("diseases") or [])]
    diseases = diseases or annotations.diseases()
    n_signal = args.n_signal or syn.get("n_signal", 3)
    n_distractors = args.n_distractors if args.n_distractors is not None else syn.get("n_distractors")
    rng_range = tuple(syn.get("distractor_range", cases_mod.DEFAULT_DISTRACTOR_RANGE))
    cohort = cases_mod.generate_cohort(ontology, annotations, diseases, cfg.seed, n_signal, n_distractors, rng_range)
    for case in cohort:
        out.write_text(f"cases/{case.case_id}.json", cases_mod.dump_case(case))
    return EXIT_OK


def cmd_slice(cfg: RunConfig, args, out: Outputs) -> int:
    cohort = _load_cases(cfg, args.cases)
    if args.mode == "incremental":
        steps = [args.step] if args.step else range(1, len(cases_mod.SECTION_ORDER) + 1)
        for step in steps:
            for case in cohort:
                sliced = cases_mod.slice_incremental(case, step)
                out.write_text(f"slices/incremental-{step}/{case.case_id}.json", cases_mod.dump_case(sliced))
    else:
        fields = [args.field] if args.field else [s.value for s in cases_mod.SECTION_ORDER]
        for f in fields:
            for case in cohort:
                sliced = cases_mod.slice_ablation(case, f)
                out.write_text(f"slices/ablation-{f.upper()}/{case.case_id}.json", cases_mod.dump_case(sliced))
    return EXIT_OK


def _eval_config(cfg: RunConfig) -> EvalConfig:
    e = dict(cfg.eval)
    if "k_cutoffs" in e:
        e["k_cutoffs"] = tuple(e["k_cutoffs"])
    e.setdefault("rng_seed", cfg.seed)
    return EvalConfig(**e)


def cmd_eval(cfg: RunConfig, args, out: Outputs) -> int:
    disease_ontology = load_ontology(_require(cfg, "disease_ontology"))
    table = _load_optional(cfg, "normalization", parse_normalization_table) or NormalizationTable()
    xrefs = _load_optional(cfg, "xrefs", parse_xref_table) or CrossReferenceTable()
    cohort = _load_cases(cfg, args.cases)
    records = _read_jsonl(args.predictions or _require(cfg, "predictions"))
    truths = {c.case_id: c.truth for c in cohort}
    categories = {c.case_id: c.categories for c in cohort}
    strata = {}
    if cfg.inputs.get("hpoa"):
        annotations = _load_annotations(cfg)
        strata = {c.case_id: stratify_case(annotations, _profile(c)).tier.value for c in cohort if c.truth}

    resolver = None
    if cfg.resolver:
        rcfg = dict(cfg.resolver)
        if args.replay:
            rcfg["enabled"] = False
        resolver = EntityResolver(ResolverConfig.from_env(**rcfg))
    extractor = None
    if cfg.llm:
        lcfg = dict(cfg.llm)
        if args.replay:
            lcfg["replay_only"] = True
        client = LlmClient(LlmEndpointConfig.from_env(**lcfg))
        extractor = lambda text: extract_list_via_llm(client, text)  # noqa: E731

    ecases, failed = cases_from_records(records, truths, table, resolver, xrefs, strata, categories, extractor)
    report = topk_accuracy(ecases, disease_ontology, _eval_config(cfg), xrefs)
    body = report.to_dict()
    body["unparseable"] = dict(sorted(failed.items()))
    out.write_report("eval_report.json", body)
    out.write_csv("eval_report.csv", report.csv_rows())
    unevaluable = len(report.unevaluable) + len(failed)
    if unevaluable and not args.allow_unevaluable:
        raise ExitError(EXIT_UNEVALUABLE, {"error": "UNEVALUABLE_CASES", "message": f"{unevaluable} case(s) unevaluable",
                                           "details": {**report.unevaluable, **failed}})
    return EXIT_OK


def cmd_difficulty(cfg: RunConfig, args, out: Outputs) -> int:
    ontology = load_ontology(_require(cfg, "ontology"))
    annotations = _load_annotations(cfg)
    ic = compute_ic(ontology, annotations)
    cohort = [_profile(c) for c in _load_cases(cfg, args.cases)]
    scores = composite_difficulty(ic, cohort, args.extrema, annotations)
    body: dict[str, Any] = {"extrema": args.extrema, "cases": [s.to_dict() for s in scores]}
    if args.top:
        body["top_composite"] = select_top_difficult(scores, args.top, "composite")
        body["top_lowest_mean_ic"] = select_top_difficult(scores, args.top, "lowest_mean_ic")
    out.write_report("difficulty.json", body)
    out.write_csv("difficulty.csv", [s.to_dict() for s in scores])
    return EXIT_OK


def cmd_finder(cfg: RunConfig, args, out: Outputs) -> int:
    cards = [FinderScorecard.from_dict(r) for r in _read_jsonl(args.scorecards or _require(cfg, "scorecards"))]
    out.write_report("finder.json", aggregate_finder(cards).to_dict())
    return EXIT_OK


def cmd_surrogate(cfg: RunConfig, args, out: Outputs) -> int:
    table = _load_optional(cfg, "normalization", parse_normalization_table) or NormalizationTable()
    xrefs = _load_optional(cfg, "xrefs", parse_xref_table)
    cohort = {c.case_id: c for c in _load_cases(cfg, args.cases)}
    records = _read_jsonl(args.predictions or _require(cfg, "predictions"))
    ecases, _ = cases_from_records(records, {}, table, None, xrefs)
    rows = [(cohort[e.predictions.case_id].phenotypes, e.predictions.kept[0].normalized if e.predictions.kept else None)
            for e in ecases if e.predictions.case_id in cohort]
    fit = fit_global_surrogate([r[0] for r in rows], [r[1] for r in rows], TermId.parse(args.target))
    out.write_report("surrogate.json", {"target": args.target, **fit.to_dict()})
    return EXIT_OK


def cmd_evidence(cfg: RunConfig, args, out: Outputs) -> int:
    ontology = load_ontology(_require(cfg, "ontology"))
    profiles = [profile_evidence(ontology, r["features"], str(r["case_id"]))
                for r in _read_jsonl(args.features or _require(cfg, "features"))]
    summary = summarize_fractions([p.non_hpo_fraction for p in profiles])
    out.write_report("evidence.json", {"summary": summary.to_dict(), "cases": [p.to_dict() for p in profiles]})
    return EXIT_OK


COMMANDS = {
    "build": cmd_build, "rank": cmd_rank, "retrieve": cmd_retrieve, "simulate": cmd_simulate,
    "slice": cmd_slice, "eval": cmd_eval, "difficulty": cmd_difficulty, "finder": cmd_finder,
    "surrogate": cmd_surrogate, "evidence": cmd_evidence,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--allow-unevaluable", action="store_true", help="exit 0 even if some cases are unevaluable")
    common.add_argument("--replay", action="store_true", help="no network: clients answer from cache/replay files only")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rarekg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="validate sources and write the KG snapshot")

    p = sub.add_parser("rank", parents=[common], help="rank diseases for each case")
    p.add_argument("--cases")
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.BASE_IC.value)
    p.add_argument("--k", type=int, default=20)

    p = sub.add_parser("retrieve", parents=[common], help="typed retrieval from a KG snapshot")
    p.add_argument("--snapshot")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--phenotypes", help="comma-separated HP ids")
    target.add_argument("--disease")
    target.add_argument("--gene")
    target.add_argument("--variant", help="chrom-pos-ref-alt")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--form", choices=[f.value for f in ContextForm], default=ContextForm.TEXT.value)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic phenotype-only cases")
    p.add_argument("--diseases", help="comma-separated disease ids (default: every annotated disease)")
    p.add_argument("--n-signal", type=int)
    p.add_argument("--n-distractors", type=int)

    p = sub.add_parser("slice", parents=[common], help="incremental or ablation slices of cases")
    p.add_argument("--cases")
    p.add_argument("--mode", choices=["incremental", "ablation"], required=True)
    p.add_argument("--step", type=int)
    p.add_argument("--field")

    p = sub.add_parser("eval", parents=[common], help="Top-K accuracy of model predictions")
    p.add_argument("--cases")
    p.add_argument("--predictions")

    p = sub.add_parser("difficulty", parents=[common], help="composite difficulty per case")
    p.add_argument("--cases")
    p.add_argument("--extrema", choices=["cases", "diseases"], default="cases")
    p.add_argument("--top", type=int)

    p = sub.add_parser("finder", parents=[common], help="aggregate FINDER scorecards")
    p.add_argument("--scorecards")

    p = sub.add_parser("surrogate", parents=[common], help="linear surrogate for one predicted disease")
    p.add_argument("--cases")
    p.add_argument("--predictions")
    p.add_argument("--target", required=True)

    p = sub.add_parser("evidence", parents=[common], help="non-HPO evidence fractions")
    p.add_argument("--features")
    return parser


def _emit_error(record: Mapping[str, Any]) -> None:
    print(json.dumps(record, sort_keys=True, default=str), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        for key in ("cases", "predictions", "scorecards", "features", "snapshot"):
            if getattr(args, key, None):
                cfg.inputs[key] = str(Path(getattr(args, key)).resolve())
        out = Outputs(cfg.out, args.command, cfg.config_hash(), cfg.seed)
        try:
            return COMMANDS[args.command](cfg, args, out)
        finally:
            if out.written:
                out.finalize()
    except ExitError as exc:
        _emit_error(exc.record)
        return exc.code
    except RareKGError as exc:
        _emit_error(exc.to_record())
        return EXIT_ERROR
    except OSError as exc:
        _emit_error({"error": "IO_ERROR", "message": str(exc)})
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
