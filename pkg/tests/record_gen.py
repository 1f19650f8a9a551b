"""Seeded random record generator used across the suite.

Records come out valid by construction (selections are drawn from the
catalog's own enumeration) so generative tests exercise the downstream
operations, not the validator's patience.
"""
from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

from taxidma.codes import format_code
from taxidma.record import add_selection, apply_taxonomy, new_record, BACKGROUND

APP_TAXONOMIES = ["SI", "IMS", "UE", "IoT:SI", "SSI:SI", "SSI:IMS", "SSI:UE"]

_BASE_TIME = datetime(2024, 1, 1, tzinfo=timezone.utc)


def _leaf_pool(catalog, prefix: str) -> list[str]:
    return [format_code(c) for c in catalog.enumerate_codes(prefix)]


def random_record(catalog, rng: random.Random, index: int = 0):
    """One random, valid record."""
    iot_background = rng.random() < 0.3
    bg_tax = "IoT:BG" if iot_background else "BG"
    record = new_record(
        f"gen-{index:04d}",
        f"generated incident {index}",
        f"synthetic record number {index} for round-trip testing",
        background_taxonomy=bg_tax,
        sources=[f"generator seed case {index}"],
        created=_BASE_TIME + timedelta(days=index % 365, hours=index % 24),
    )
    pool = _leaf_pool(catalog, bg_tax)
    for code in rng.sample(pool, k=min(len(pool), rng.randint(1, 8))):
        add_selection(record, BACKGROUND, code)
    if rng.random() < 0.35:
        add_selection(record, BACKGROUND, f"{bg_tax}.K.Y",
                      free_text=f"CVE-2024-{10000 + index}",
                      note="synthetic weakness" if rng.random() < 0.5 else None)

    for position in range(rng.randint(0, 3)):
        tax_key = rng.choice(APP_TAXONOMIES)
        ref = apply_taxonomy(record, catalog, tax_key,
                             f"instance {position} ({tax_key})")
        app_pool = _leaf_pool(catalog, tax_key)
        count = rng.randint(1, 6)
        for code in rng.sample(app_pool, k=min(len(app_pool), count)):
            add_selection(record, ref, code,
                          note="observed" if rng.random() < 0.2 else None)
    return record


def record_batch(catalog, seed: int, count: int):
    rng = random.Random(seed)
    return [random_record(catalog, rng, i) for i in range(count)]
