"""Identity-attack taxonomy toolkit: code grammar, catalog, attack records,
STIX 2.1 interchange, and corpus statistics."""
from __future__ import annotations

from .catalog import (
    Catalog,
    CatalogViolation,
    load_bundled_catalog,
    load_catalog,
    verify_catalog,
)
from .codes import TaxonomyCode, canonicalize, format_code, parse_code
from .corpus import (
    Corpus,
    StatsEntry,
    StatsReport,
    co_occurrence,
    compute_stats,
    render_csv,
    render_json,
    render_table,
)
from .record import (
    BACKGROUND,
    AttackRecord,
    Selection,
    TaxonomyApplication,
    ValidationReport,
    add_selection,
    apply_taxonomy,
    new_record,
    read_record,
    resolve_names,
    validate_record,
    write_record,
)
from .stix import (
    EXTENSION_DEFINITION_ID,
    EXTENSION_NAME,
    BundleViolation,
    EmissionOptions,
    ResidueEntry,
    extended_account_type_vocabulary,
    extension_definition,
    from_stix,
    mapped_selections,
    serialize_bundle,
    to_stix,
    validate_bundle,
)

__version__ = "2.0.0"

__all__ = [
    "AttackRecord",
    "BACKGROUND",
    "BundleViolation",
    "Catalog",
    "CatalogViolation",
    "Corpus",
    "EXTENSION_DEFINITION_ID",
    "EXTENSION_NAME",
    "EmissionOptions",
    "ResidueEntry",
    "Selection",
    "StatsEntry",
    "StatsReport",
    "TaxonomyApplication",
    "TaxonomyCode",
    "ValidationReport",
    "add_selection",
    "apply_taxonomy",
    "canonicalize",
    "co_occurrence",
    "compute_stats",
    "extended_account_type_vocabulary",
    "extension_definition",
    "format_code",
    "from_stix",
    "load_bundled_catalog",
    "load_catalog",
    "mapped_selections",
    "new_record",
    "parse_code",
    "read_record",
    "render_csv",
    "render_json",
    "render_table",
    "resolve_names",
    "serialize_bundle",
    "to_stix",
    "validate_bundle",
    "validate_record",
    "verify_catalog",
    "write_record",
    "__version__",
]
