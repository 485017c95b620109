import random
import socket
import time
from pathlib import Path

import pytest

from rarekg.cases import SECTION_ORDER, CaseRecord
from rarekg.ingest import (
    VariantFormat,
    dedupe_variants,
    parse_genes,
    parse_hpoa,
    parse_normalization_table,
    parse_variants,
    parse_xref_table,
)
from rarekg.kg import build_kg
from rarekg.ontology import OntologyFormat, TermId, compute_ic, parse_ontology

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

_SESSION_START = time.perf_counter()
_ACCEPTANCE: list[tuple[str, str, float]] = []


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


class NetworkDisabled(RuntimeError):
    pass


@pytest.fixture(autouse=True)
def _no_network(monkeypatch):
    """Any real socket connection fails the test that attempted it."""

    def refuse(*args, **kwargs):
        raise NetworkDisabled("network access is disabled in the test suite")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)


@pytest.fixture(scope="session")
def hp():
    return parse_ontology(read_fixture("hp_mini.obo"), OntologyFormat.OBO_SUBSET)


@pytest.fixture(scope="session")
def orpha():
    return parse_ontology(read_fixture("orpha_mini.obo"), OntologyFormat.OBO_SUBSET)


@pytest.fixture(scope="session")
def hpoa():
    return parse_hpoa(read_fixture("hpoa_mini.tsv"))


@pytest.fixture(scope="session")
def genes():
    return parse_genes(read_fixture("genes_mini.tsv"))


@pytest.fixture(scope="session")
def variants():
    clinvar = parse_variants(read_fixture("clinvar_mini.vcf"), VariantFormat.VCF_SLIM)
    hgmd = parse_variants(read_fixture("hgmd_like.tsv"), VariantFormat.TSV, provenance="HGMD")
    return dedupe_variants(list(clinvar) + list(hgmd))


@pytest.fixture(scope="session")
def xrefs():
    return parse_xref_table(read_fixture("xref_mini.tsv"))


@pytest.fixture
def norm_table():
    # function scoped: some tests add conflicting rows
    return parse_normalization_table(read_fixture("normalization_mini.tsv"))


@pytest.fixture(scope="session")
def hp_ic(hp, hpoa):
    return compute_ic(hp, hpoa)


@pytest.fixture(scope="session")
def kg(hp, orpha, hpoa, genes, variants, xrefs):
    return build_kg(hp, hpoa, genes, variants, orpha, xrefs)


def make_section_cases(n=50, seed=7):
    """Cases with random section text; roughly one section in five is blank."""
    rng = random.Random(seed)
    words = ["fever", "seizure", "rash", "ataxia", "hypotonia", "tremor", "jaundice", "mother", "MRI", "ECG"]
    out = []
    for i in range(n):
        sections = {
            s: ("" if rng.random() < 0.2 else " ".join(rng.choices(words, k=rng.randint(1, 12))))
            for s in SECTION_ORDER
        }
        out.append(CaseRecord(f"case-{i:03d}", sections, frozenset({TermId.parse("HP:0001250")}),
                              truth=TermId.parse("ORPHA:905")))
    return out


@pytest.fixture(scope="session")
def section_cases():
    return make_section_cases()


# ---------------------------------------------------------------------------
# acceptance reporting: one line per criterion at the end of the run


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.module.__name__.endswith("test_acceptance"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE.append((doc, "PASS" if report.passed else "FAIL", report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for doc, status, duration in sorted(_ACCEPTANCE):
        tr.write_line(f"{status}  {doc}  ({duration:.2f}s)")
    total = time.perf_counter() - _SESSION_START
    status = "PASS" if total < 120 else "FAIL"
    tr.write_line(f"{status}  AC13b whole suite wall time {total:.1f}s (limit 120s)")
