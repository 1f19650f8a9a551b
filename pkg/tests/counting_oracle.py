"""Brute-force frequency/co-occurrence oracle for corpus statistics.

Deliberately independent of the package: reads raw record JSON, chops code
strings with str.split, and counts with nested loops.  Frozen before
``taxidma.corpus`` existed; do not "sync" it with the implementation.
"""
from __future__ import annotations

import json
from pathlib import Path


def prune(code_text: str, group_by: str, merge_profiles: bool) -> str:
    head, colon, rest = code_text.partition(":")
    if colon and not merge_profiles:
        prefix, body = head + ":", rest
    elif colon:
        prefix, body = "", rest
    else:
        prefix, body = "", head
    parts = body.split(".")
    keep = {"category": 2, "item": 3, "leaf": 4}[group_by]
    return prefix + ".".join(parts[:keep])


def record_codes(doc: dict, group_by: str, merge_profiles: bool) -> list[str]:
    out = []
    blocks = [doc["background"]] + list(doc["applications"])
    for block in blocks:
        for selection in block["selections"]:
            out.append(prune(selection["code"], group_by, merge_profiles))
    return out


def load_docs(root: str | Path) -> list[dict]:
    docs = []
    for path in sorted(Path(root).glob("*.taxidma.json")):
        docs.append(json.loads(path.read_text()))
    return docs


def frequencies(docs: list[dict], group_by: str,
                merge_profiles: bool = False,
                count_selections: bool = False) -> dict[str, int]:
    counts: dict[str, int] = {}
    for doc in docs:
        codes = record_codes(doc, group_by, merge_profiles)
        if not count_selections:
            deduped = []
            for code in codes:
                if code not in deduped:
                    deduped.append(code)
            codes = deduped
        for code in codes:
            counts[code] = counts.get(code, 0) + 1
    return counts


def pair_counts(docs: list[dict], group_by: str,
                merge_profiles: bool = False) -> dict[tuple[str, str], int]:
    pairs: dict[tuple[str, str], int] = {}
    for doc in docs:
        codes = sorted(set(record_codes(doc, group_by, merge_profiles)))
        for a in codes:
            for b in codes:
                if a <= b:
                    pairs[(a, b)] = pairs.get((a, b), 0) + 1
    return pairs


def share_text(count: int, total: int) -> str:
    return f"{count / total:.6f}" if total else "0.000000"
