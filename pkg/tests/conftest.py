from __future__ import annotations

import sys
from pathlib import Path

import pytest

# Tests import sibling oracle modules (grammar_oracle, doc_walker, ...) directly.
sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"

FIXTURE_IDS = ("canva-2019", "solarwinds-2020", "tmobile-2021")


@pytest.fixture(scope="session")
def bundled_catalog():
    from taxidma.catalog import load_bundled_catalog
    return load_bundled_catalog()


def load_fixture_record(record_id: str):
    from taxidma.record import read_record
    return read_record((FIXTURES / f"{record_id}.taxidma.json").read_text())


@pytest.fixture(scope="session")
def fixture_records():
    return {rid: load_fixture_record(rid) for rid in FIXTURE_IDS}


def scope_groups(mapped):
    """Scope-tag-insensitive view of ``mapped_selections`` output: a multiset
    of per-scope multisets of (taxonomy key, code, free_text)."""
    from collections import Counter
    per_scope: dict[str, list] = {}
    for tag, tax_key, code, free_text in mapped:
        per_scope.setdefault(tag, []).append((tax_key, code, free_text))
    return Counter(tuple(sorted(group)) for group in per_scope.values())
