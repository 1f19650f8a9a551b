"""Catalog model: taxonomy trees, profile overrides, lookup and verification.

A catalog document is JSON with this shape::

    {"version": "...",
     "taxonomies": [{"code", "name", "categories": [
         {"code", "name", "items": [
             {"code", "name", "kind", "leaves": [
                 {"n", "name", "children": [...]}]}]}]}],
     "profiles": [{"code", "name", "overrides": [
         {"taxonomy", "category", "item", "definition": <item>}]}]}

Loading is permissive about tree content (verification is a separate pass)
but strict about structure, duplicate codes, and profile references.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterator

from .codes import TaxonomyCode, format_code, parse_code
from .errors import (
    DanglingProfileReferenceError,
    DuplicateCodeError,
    MalformedDocumentError,
    UnknownPathError,
)

BUNDLED_CATALOG_RESOURCE = "taxidma-v2.catalog.json"

ITEM_KINDS = ("enumerated", "free_text", "external_reference")

# Item display names whose code letter is fixed convention-wide.
FIXED_ITEM_CODES = {
    "Type": "T",
    "Capabilities": "C",
    "Identity": "I",
    "Permissions": "P",
    "Authenticity": "A",
    "Delivery": "D",
    "Results": "R",
    "Impact": "M",
    "Vulnerability": "Y",
    "Category": "G",
    "Pattern": "B",
}


@dataclass(frozen=True)
class Leaf:
    number: int
    name: str
    children: tuple["Leaf", ...] = ()


@dataclass(frozen=True)
class Item:
    code: str
    name: str
    kind: str = "enumerated"
    leaves: tuple[Leaf, ...] = ()


@dataclass(frozen=True)
class Category:
    code: str
    name: str
    items: tuple[Item, ...] = ()


@dataclass(frozen=True)
class Taxonomy:
    code: str
    name: str
    categories: tuple[Category, ...] = ()


@dataclass(frozen=True)
class Override:
    taxonomy: str
    category: str
    item: str
    definition: Item


@dataclass(frozen=True)
class Profile:
    code: str
    name: str
    overrides: tuple[Override, ...] = ()


@dataclass(frozen=True)
class CatalogNode:
    """What :meth:`Catalog.lookup` returns for any resolvable code."""

    code: TaxonomyCode
    name: str
    kind: str  # taxonomy | category | item | leaf
    children_count: int
    item_kind: str | None = None  # value kind of the owning item, if any


@dataclass(frozen=True)
class CatalogViolation:
    rule: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.path}: {self.message}"


class Catalog:
    """An immutable, indexed catalog."""

    def __init__(self, version: str, taxonomies: tuple[Taxonomy, ...],
                 profiles: tuple[Profile, ...], checksum: str):
        self.version = version
        self.taxonomies = taxonomies
        self.profiles = profiles
        self.checksum = checksum
        self._tax_by_code = {t.code: t for t in taxonomies}
        self._profile_by_code = {p.code: p for p in profiles}
        self._effective: dict[tuple[str | None, str, str], tuple[Item, ...]] = {}
        self._build_effective()

    def _build_effective(self) -> None:
        for taxonomy in self.taxonomies:
            for category in taxonomy.categories:
                key = (None, taxonomy.code, category.code)
                self._effective[key] = category.items
        for profile in self.profiles:
            for taxonomy in self.taxonomies:
                for category in taxonomy.categories:
                    items = list(category.items)
                    for ov in profile.overrides:
                        if (ov.taxonomy, ov.category) != (taxonomy.code,
                                                          category.code):
                            continue
                        for pos, existing in enumerate(items):
                            if existing.code == ov.item:
                                items[pos] = ov.definition
                                break
                        else:
                            items.append(ov.definition)
                    # Cache every combination so lookups never special-case.
                    self._effective[(profile.code, taxonomy.code,
                                     category.code)] = tuple(items)

    # -- basic access ------------------------------------------------------

    def taxonomy(self, code: str) -> Taxonomy | None:
        return self._tax_by_code.get(code)

    def profile(self, code: str) -> Profile | None:
        return self._profile_by_code.get(code)

    def effective_items(self, profile: str | None, taxonomy: str,
                        category: str) -> tuple[Item, ...]:
        return self._effective.get((profile, taxonomy, category), ())

    def profile_pairs(self) -> list[tuple[str, str]]:
        """(profile, taxonomy) pairs where the profile changes the taxonomy."""
        pairs = []
        for profile in self.profiles:
            touched = {ov.taxonomy for ov in profile.overrides}
            for taxonomy in self.taxonomies:
                if taxonomy.code in touched:
                    pairs.append((profile.code, taxonomy.code))
        return pairs

    # -- resolution --------------------------------------------------------

    def _as_code(self, code: TaxonomyCode | str) -> TaxonomyCode:
        if isinstance(code, str):
            return parse_code(code)
        return code

    def resolve(self, code: TaxonomyCode | str):
        """Resolve a code to its node chain.

        Returns ``(taxonomy, category, item, leaf_chain)`` where the later
        elements are None/empty for shallow codes.  Raises
        :class:`UnknownPathError` carrying the longest prefix that resolved.
        """
        parsed = self._as_code(code)
        text = format_code(parsed)

        if parsed.profile is not None and self.profile(parsed.profile) is None:
            raise UnknownPathError(text, "", f"unknown profile {parsed.profile!r}")
        if parsed.taxonomy in self._profile_by_code:
            raise UnknownPathError(
                text, "",
                f"{parsed.taxonomy!r} is a profile token; qualify a taxonomy "
                f"as {parsed.taxonomy}:<TAX>")
        taxonomy = self.taxonomy(parsed.taxonomy)
        if taxonomy is None:
            detail = ("reserved token" if parsed.taxonomy == "WA"
                      else "unknown taxonomy")
            raise UnknownPathError(text, "", detail)

        prefix = TaxonomyCode(parsed.taxonomy, profile=parsed.profile)
        if parsed.category is None:
            return taxonomy, None, None, ()
        category = next((c for c in taxonomy.categories
                         if c.code == parsed.category), None)
        if category is None:
            raise UnknownPathError(text, format_code(prefix),
                                   f"no category {parsed.category!r}")
        prefix = TaxonomyCode(parsed.taxonomy, parsed.category,
                              profile=parsed.profile)
        if parsed.item is None:
            return taxonomy, category, None, ()
        items = self.effective_items(parsed.profile, parsed.taxonomy,
                                     parsed.category)
        item = next((i for i in items if i.code == parsed.item), None)
        if item is None:
            raise UnknownPathError(text, format_code(prefix),
                                   f"no item {parsed.item!r}")
        prefix = TaxonomyCode(parsed.taxonomy, parsed.category, parsed.item,
                              profile=parsed.profile)
        chain: list[Leaf] = []
        siblings = item.leaves
        for number in parsed.leaf_path:
            leaf = next((l for l in siblings if l.number == number), None)
            if leaf is None:
                raise UnknownPathError(text, format_code(prefix),
                                       f"no leaf numbered {number}")
            chain.append(leaf)
            prefix = prefix.with_leaf(number)
            siblings = leaf.children
        return taxonomy, category, item, tuple(chain)

    def lookup(self, code: TaxonomyCode | str) -> CatalogNode:
        """Resolve a code and describe the node it names."""
        parsed = self._as_code(code)
        taxonomy, category, item, chain = self.resolve(parsed)
        if category is None:
            return CatalogNode(parsed, taxonomy.name, "taxonomy",
                               len(taxonomy.categories))
        if item is None:
            items = self.effective_items(parsed.profile, parsed.taxonomy,
                                         parsed.category)
            return CatalogNode(parsed, category.name, "category", len(items))
        if not chain:
            return CatalogNode(parsed, item.name, "item", len(item.leaves),
                               item.kind)
        leaf = chain[-1]
        return CatalogNode(parsed, leaf.name, "leaf", len(leaf.children),
                           item.kind)

    def full_name(self, code: TaxonomyCode | str) -> str:
        """Human-readable name: one display-name segment per code segment."""
        parsed = self._as_code(code)
        taxonomy, category, item, chain = self.resolve(parsed)
        parts: list[str] = []
        if parsed.profile is not None:
            profile = self.profile(parsed.profile)
            parts.append(profile.name)
        parts.append(taxonomy.name)
        if category is not None:
            parts.append(category.name)
        if item is not None:
            parts.append(item.name)
        parts.extend(leaf.name for leaf in chain)
        return " ".join(parts)

    # -- enumeration -------------------------------------------------------

    def _walk_item(self, base: TaxonomyCode, item: Item) -> Iterator[TaxonomyCode]:
        def walk(code: TaxonomyCode, leaves: tuple[Leaf, ...]):
            for leaf in leaves:
                deeper = code.with_leaf(leaf.number)
                yield deeper
                yield from walk(deeper, leaf.children)
        yield from walk(base, item.leaves)

    def enumerate_codes(self, prefix: TaxonomyCode | str | None = None
                        ) -> Iterator[TaxonomyCode]:
        """Yield every leaf-granularity code, depth first.

        With a prefix, yields the leaf codes inside that subtree (a leaf
        prefix yields itself and its descendants).  Without one, covers the
        base taxonomies followed by every profile/taxonomy pair the profile
        actually changes.
        """
        if prefix is None:
            for taxonomy in self.taxonomies:
                yield from self.enumerate_codes(TaxonomyCode(taxonomy.code))
            for profile_code, tax_code in self.profile_pairs():
                yield from self.enumerate_codes(
                    TaxonomyCode(tax_code, profile=profile_code))
            return

        parsed = self._as_code(prefix)
        taxonomy, category, item, chain = self.resolve(parsed)
        if category is None:
            for cat in taxonomy.categories:
                yield from self.enumerate_codes(
                    TaxonomyCode(parsed.taxonomy, cat.code,
                                 profile=parsed.profile))
            return
        if item is None:
            for itm in self.effective_items(parsed.profile, parsed.taxonomy,
                                            parsed.category):
                yield from self.enumerate_codes(
                    TaxonomyCode(parsed.taxonomy, parsed.category, itm.code,
                                 profile=parsed.profile))
            return
        if not chain:
            yield from self._walk_item(parsed, item)
            return
        yield parsed
        leaf = chain[-1]

        def walk(code: TaxonomyCode, leaves: tuple[Leaf, ...]):
            for sub in leaves:
                deeper = code.with_leaf(sub.number)
                yield deeper
                yield from walk(deeper, sub.children)
        yield from walk(parsed, leaf.children)


# -- loading ----------------------------------------------------------------


def _require(mapping, key, expected, where):
    if not isinstance(mapping, dict):
        raise MalformedDocumentError(f"{where}: expected an object")
    if key not in mapping:
        raise MalformedDocumentError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if not isinstance(value, expected):
        raise MalformedDocumentError(f"{where}.{key}: wrong type")
    return value


def _parse_leaf(raw, where) -> Leaf:
    number = _require(raw, "n", int, where)
    if isinstance(number, bool) or number < 0:
        raise MalformedDocumentError(f"{where}.n: must be a non-negative integer")
    name = _require(raw, "name", str, where)
    children_raw = raw.get("children", [])
    if not isinstance(children_raw, list):
        raise MalformedDocumentError(f"{where}.children: wrong type")
    children = tuple(_parse_leaf(child, f"{where}.children[{i}]")
                     for i, child in enumerate(children_raw))
    _check_sibling_numbers(children, f"{where}.children")
    return Leaf(number, name, children)


def _check_sibling_numbers(leaves: tuple[Leaf, ...], where: str) -> None:
    seen: dict[int, int] = {}
    for pos, leaf in enumerate(leaves):
        if leaf.number in seen:
            raise DuplicateCodeError(
                f"leaf number {leaf.number}",
                f"{where}[{seen[leaf.number]}]", f"{where}[{pos}]")
        seen[leaf.number] = pos


def _parse_item(raw, where) -> Item:
    code = _require(raw, "code", str, where)
    name = _require(raw, "name", str, where)
    kind = raw.get("kind", "enumerated")
    if kind not in ITEM_KINDS:
        raise MalformedDocumentError(f"{where}.kind: unknown kind {kind!r}")
    leaves_raw = raw.get("leaves", [])
    if not isinstance(leaves_raw, list):
        raise MalformedDocumentError(f"{where}.leaves: wrong type")
    leaves = tuple(_parse_leaf(leaf, f"{where}.leaves[{i}]")
                   for i, leaf in enumerate(leaves_raw))
    _check_sibling_numbers(leaves, f"{where}.leaves")
    return Item(code, name, kind, leaves)


def load_catalog(source: bytes | str) -> Catalog:
    """Parse and index a catalog document.

    Raises :class:`MalformedDocumentError` for structural problems,
    :class:`DuplicateCodeError` when one code is declared twice at a level,
    and :class:`DanglingProfileReferenceError` for overrides that target
    nothing.
    """
    data = source.encode("utf-8") if isinstance(source, str) else source
    checksum = hashlib.sha256(data).hexdigest()
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocumentError(f"not a JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocumentError("top level: expected an object")

    version = _require(doc, "version", str, "document")
    taxonomies_raw = _require(doc, "taxonomies", list, "document")
    profiles_raw = doc.get("profiles", [])
    if not isinstance(profiles_raw, list):
        raise MalformedDocumentError("document.profiles: wrong type")

    taxonomies: list[Taxonomy] = []
    tax_positions: dict[str, str] = {}
    for ti, raw_tax in enumerate(taxonomies_raw):
        where = f"taxonomies[{ti}]"
        code = _require(raw_tax, "code", str, where)
        name = _require(raw_tax, "name", str, where)
        if code in tax_positions:
            raise DuplicateCodeError(code, tax_positions[code], where)
        tax_positions[code] = where
        categories: list[Category] = []
        cat_positions: dict[str, str] = {}
        for ci, raw_cat in enumerate(_require(raw_tax, "categories", list, where)):
            cwhere = f"{where}.categories[{ci}]"
            ccode = _require(raw_cat, "code", str, cwhere)
            cname = _require(raw_cat, "name", str, cwhere)
            if ccode in cat_positions:
                raise DuplicateCodeError(f"{code}.{ccode}",
                                         cat_positions[ccode], cwhere)
            cat_positions[ccode] = cwhere
            items: list[Item] = []
            item_positions: dict[str, str] = {}
            for ii, raw_item in enumerate(_require(raw_cat, "items", list, cwhere)):
                iwhere = f"{cwhere}.items[{ii}]"
                parsed = _parse_item(raw_item, iwhere)
                if parsed.code in item_positions:
                    raise DuplicateCodeError(f"{code}.{ccode}.{parsed.code}",
                                             item_positions[parsed.code], iwhere)
                item_positions[parsed.code] = iwhere
                items.append(parsed)
            categories.append(Category(ccode, cname, tuple(items)))
        taxonomies.append(Taxonomy(code, name, tuple(categories)))

    tax_index = {t.code: t for t in taxonomies}
    profiles: list[Profile] = []
    profile_positions: dict[str, str] = {}
    for pi, raw_profile in enumerate(profiles_raw):
        where = f"profiles[{pi}]"
        pcode = _require(raw_profile, "code", str, where)
        pname = _require(raw_profile, "name", str, where)
        if pcode in profile_positions:
            raise DuplicateCodeError(pcode, profile_positions[pcode], where)
        if pcode in tax_index:
            raise DuplicateCodeError(pcode, tax_positions[pcode], where)
        profile_positions[pcode] = where
        overrides: list[Override] = []
        seen_targets: dict[tuple[str, str, str], str] = {}
        for oi, raw_ov in enumerate(raw_profile.get("overrides", [])):
            owhere = f"{where}.overrides[{oi}]"
            ov_tax = _require(raw_ov, "taxonomy", str, owhere)
            ov_cat = _require(raw_ov, "category", str, owhere)
            ov_item = _require(raw_ov, "item", str, owhere)
            definition = _parse_item(_require(raw_ov, "definition", dict,
                                              owhere), f"{owhere}.definition")
            if ov_tax not in tax_index:
                raise DanglingProfileReferenceError(
                    f"{owhere}: taxonomy {ov_tax!r} does not exist")
            target_tax = tax_index[ov_tax]
            if ov_cat not in {c.code for c in target_tax.categories}:
                raise DanglingProfileReferenceError(
                    f"{owhere}: category {ov_tax}.{ov_cat} does not exist")
            if definition.code != ov_item:
                raise MalformedDocumentError(
                    f"{owhere}: definition code {definition.code!r} does not "
                    f"match item {ov_item!r}")
            target = (ov_tax, ov_cat, ov_item)
            if target in seen_targets:
                raise DuplicateCodeError(f"{pcode}:{ov_tax}.{ov_cat}.{ov_item}",
                                         seen_targets[target], owhere)
            seen_targets[target] = owhere
            overrides.append(Override(ov_tax, ov_cat, ov_item, definition))
        profiles.append(Profile(pcode, pname, tuple(overrides)))

    return Catalog(version, tuple(taxonomies), tuple(profiles), checksum)


_BUNDLED: Catalog | None = None


def load_bundled_catalog() -> Catalog:
    """The catalog shipped inside the package (cached)."""
    global _BUNDLED
    if _BUNDLED is None:
        data = (resources.files("taxidma") / "data" /
                BUNDLED_CATALOG_RESOURCE).read_bytes()
        _BUNDLED = load_catalog(data)
    return _BUNDLED


# -- verification ------------------------------------------------------------


def _walk_all_leaves(item: Item):
    """Yield (path_string_suffix, leaf, siblings) for every leaf of an item."""
    def walk(prefix: str, leaves: tuple[Leaf, ...]):
        for leaf in leaves:
            path = f"{prefix}.{leaf.number}"
            yield path, leaf, leaves
            yield from walk(path, leaf.children)
    yield from walk("", item.leaves)


def _iter_items(catalog: Catalog):
    """Yield (path, item) for base items and profile override definitions."""
    for taxonomy in catalog.taxonomies:
        for category in taxonomy.categories:
            for item in category.items:
                yield f"{taxonomy.code}.{category.code}.{item.code}", item
    for profile in catalog.profiles:
        for ov in profile.overrides:
            yield (f"{profile.code}:{ov.taxonomy}.{ov.category}.{ov.item}",
                   ov.definition)


def _find_item(catalog: Catalog, profile: str | None, tax: str, cat: str,
               code: str) -> Item | None:
    for item in catalog.effective_items(profile, tax, cat):
        if item.code == code:
            return item
    return None


def _v(rule: str, path: str, message: str) -> CatalogViolation:
    return CatalogViolation(rule, path, message)


# Each rule inspects the whole catalog and returns violations.
RuleFn = Callable[[Catalog], list[CatalogViolation]]


def _rule_taxonomy_codes(catalog: Catalog) -> list[CatalogViolation]:
    known = {"BG", "SI", "IMS", "UE"}
    return [_v("taxonomy-codes", t.code, f"unexpected taxonomy {t.code!r}")
            for t in catalog.taxonomies if t.code not in known]


def _rule_bg_has_attacker(catalog: Catalog) -> list[CatalogViolation]:
    bg = catalog.taxonomy("BG")
    if bg is None:
        return [_v("BG-has-attacker", "BG", "taxonomy BG missing")]
    if not any(c.code == "A" for c in bg.categories):
        return [_v("BG-has-attacker", "BG", "no Attacker category")]
    return []


def _rule_category_sets(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for taxonomy in catalog.taxonomies:
        have = {c.code for c in taxonomy.categories}
        want = {"A", "T", "I", "K"} if taxonomy.code == "BG" else {"T", "I", "K"}
        if have != want:
            out.append(_v("category-set", taxonomy.code,
                          f"categories {sorted(have)} != {sorted(want)}"))
    return out


def _rule_fixed_item_codes(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        want = FIXED_ITEM_CODES.get(item.name)
        if want is not None and item.code != want:
            out.append(_v("fixed-item-codes", path,
                          f"item named {item.name!r} must use code {want!r}"))
    return out


def _rule_others_is_zero(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        for suffix, leaf, _siblings in _walk_all_leaves(item):
            where = path + suffix
            if leaf.name == "Others" and leaf.number != 0:
                out.append(_v("others-is-zero", where,
                              f"Others numbered {leaf.number}"))
            if leaf.number == 0 and leaf.name != "Others":
                out.append(_v("others-is-zero", where,
                              f"number 0 used for {leaf.name!r}"))
    return out


def _rule_leaf_numbering(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        groups: dict[str, tuple[Leaf, ...]] = {"": item.leaves}
        for suffix, leaf, _ in _walk_all_leaves(item):
            if leaf.children:
                groups[suffix] = leaf.children
        for suffix, siblings in groups.items():
            nonzero = sorted(l.number for l in siblings if l.number != 0)
            if nonzero != list(range(1, len(nonzero) + 1)):
                out.append(_v("leaf-numbering", path + suffix,
                              f"numbers {nonzero} not contiguous from 1"))
            if sum(1 for l in siblings if l.number == 0) > 1:
                out.append(_v("leaf-numbering", path + suffix,
                              "more than one leaf numbered 0"))
    return out


def _rule_kind_leaves(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        if item.kind not in ITEM_KINDS:
            out.append(_v("kind-leaves", path, f"unknown kind {item.kind!r}"))
        elif item.kind != "enumerated" and item.leaves:
            out.append(_v("kind-leaves", path,
                          f"{item.kind} item must not declare leaves"))
    return out


def _rule_item_codes_unique(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    scopes = [(None, t.code, c.code) for t in catalog.taxonomies
              for c in t.categories]
    scopes += [(p.code, t.code, c.code) for p in catalog.profiles
               for t in catalog.taxonomies for c in t.categories]
    for profile, tax, cat in scopes:
        seen: set[str] = set()
        prefix = f"{profile}:{tax}" if profile else tax
        for item in catalog.effective_items(profile, tax, cat):
            if item.code in seen:
                out.append(_v("item-code-unique", f"{prefix}.{cat}.{item.code}",
                              "item code appears twice"))
            seen.add(item.code)
    return out


def _exact_leaves(rule: str, path: str, item: Item | None, names: list[str],
                  others: bool) -> list[CatalogViolation]:
    """Leaves 1..k must carry exactly ``names`` in order; Others iff asked."""
    if item is None:
        return [_v(rule, path, "item missing")]
    got = [l.name for l in sorted(item.leaves, key=lambda l: l.number)
           if l.number != 0]
    out = []
    if got != names:
        out.append(_v(rule, path, f"leaves {got} != {names}"))
    has_others = any(l.number == 0 for l in item.leaves)
    if has_others != others:
        state = "missing" if others else "unexpected"
        out.append(_v(rule, path, f"Others leaf {state}"))
    return out


def _rule_bg_capabilities(catalog: Catalog) -> list[CatalogViolation]:
    item = _find_item(catalog, None, "BG", "A", "C")
    return _exact_leaves("bg-capabilities-items", "BG.A.C", item,
                         ["Motivation", "Resources", "Knowledge", "Time"],
                         others=False)


def _sub_leaf(item: Item | None, number: int) -> Leaf | None:
    if item is None:
        return None
    return next((l for l in item.leaves if l.number == number), None)


def _rule_knowledge_scale(catalog: Catalog) -> list[CatalogViolation]:
    leaf = _sub_leaf(_find_item(catalog, None, "BG", "A", "C"), 3)
    want = ["None", "Minimal", "Intermediate", "Advanced", "Expert",
            "Innovator", "Strategic"]
    if leaf is None:
        return [_v("knowledge-scale", "BG.A.C.3", "missing")]
    got = [c.name for c in leaf.children]
    if got != want or [c.number for c in leaf.children] != list(range(1, 8)):
        return [_v("knowledge-scale", "BG.A.C.3", f"scale {got} != {want}")]
    return []


def _rule_time_scale(catalog: Catalog) -> list[CatalogViolation]:
    leaf = _sub_leaf(_find_item(catalog, None, "BG", "A", "C"), 4)
    if leaf is None:
        return [_v("time-scale", "BG.A.C.4", "missing")]
    got = [c.name for c in leaf.children]
    if got != ["Little", "Medium", "Much"]:
        return [_v("time-scale", "BG.A.C.4", f"scale {got}")]
    return []


def _rule_authenticity(catalog: Catalog) -> list[CatalogViolation]:
    item = _find_item(catalog, None, "BG", "I", "A")
    return _exact_leaves("authenticity-leaves", "BG.I.A", item,
                         ["Impostor", "New Account", "Compromised Account",
                          "None"], others=True)


def _rule_attack_category(catalog: Catalog) -> list[CatalogViolation]:
    want = ["Identification", "Authentication", "Authorization", "Trust",
            "Governance", "User Management", "User Repository", "Information"]
    out = []
    for tax in ("SI", "IMS"):
        item = _find_item(catalog, None, tax, "K", "G")
        out.extend(_exact_leaves("attack-category-leaves", f"{tax}.K.G",
                                 item, want, others=True))
    return out


def _rule_lifecycle(catalog: Catalog) -> list[CatalogViolation]:
    want = ["Reconnaissance", "Resource Development", "Initial Access",
            "Persistence", "Privilege Escalation", "Defense Evasion",
            "Credential Access", "Discovery", "Lateral Movement",
            "Collection", "Command and Control"]
    out = []
    found = False
    for path, item in _iter_items(catalog):
        if item.name != "Lifecycle":
            continue
        found = True
        out.extend(_exact_leaves("lifecycle-stages", path, item, want,
                                 others=True))
    if not found:
        out.append(_v("lifecycle-stages", "*", "no Lifecycle item anywhere"))
    return out


def _rule_ue_pattern(catalog: Catalog) -> list[CatalogViolation]:
    item = _find_item(catalog, None, "UE", "K", "B")
    out = _exact_leaves("ue-pattern-tree", "UE.K.B", item,
                        ["Identity Theft", "Identity Manipulation",
                         "De-anonymization"], others=True)
    theft = _sub_leaf(item, 1)
    if theft is None:
        out.append(_v("ue-pattern-tree", "UE.K.B.1", "missing"))
    else:
        got = [c.name for c in theft.children if c.number != 0]
        if got != ["New Account Fraud", "Account Takeover"]:
            out.append(_v("ue-pattern-tree", "UE.K.B.1", f"children {got}"))
        if not any(c.number == 0 for c in theft.children):
            out.append(_v("ue-pattern-tree", "UE.K.B.1", "Others missing"))
    return out


def _rule_ue_identity_types(catalog: Catalog) -> list[CatalogViolation]:
    item = _find_item(catalog, None, "UE", "I", "T")
    if item is None:
        return [_v("ue-identity-types", "UE.I.T", "item missing")]
    names = {l.name for l in item.leaves}
    want = {"Financial", "Employment", "State", "Phone", "Insurance",
            "Online Social Network", "Online Shopping", "Email", "Others"}
    out = []
    missing = want - names
    if missing:
        out.append(_v("ue-identity-types", "UE.I.T",
                      f"missing {sorted(missing)}"))
    financial = next((l for l in item.leaves if l.name == "Financial"), None)
    if financial is None or {"Credit Card", "Bank"} - {c.name for c in
                                                       financial.children}:
        out.append(_v("ue-identity-types", "UE.I.T.1",
                      "Financial sub-leaves incomplete"))
    state = next((l for l in item.leaves if l.name == "State"), None)
    if state is None or {"Tax", "eID", "Social Security Number"} - {
            c.name for c in state.children}:
        out.append(_v("ue-identity-types", "UE.I.T.3",
                      "State sub-leaves incomplete"))
    return out


def _rule_ue_brute_force(catalog: Catalog) -> list[CatalogViolation]:
    item = _find_item(catalog, None, "UE", "K", "T")
    active = _sub_leaf(item, 1)
    brute = None
    if active is not None:
        brute = next((c for c in active.children if c.name == "Brute Force"),
                     None)
    if brute is None:
        return [_v("ue-brute-force", "UE.K.T.1", "Brute Force leaf missing")]
    names = {c.name for c in brute.children}
    want = {"OSINT-Based", "Hybrid", "Password Spraying", "Credential Stuffing",
            "Dictionary", "Rainbow Table"}
    missing = want - names
    if missing:
        return [_v("ue-brute-force", "UE.K.T.1", f"missing {sorted(missing)}")]
    return []


def _rule_amount(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        if item.name != "Amount":
            continue
        out.extend(_exact_leaves("amount-leaves", path, item,
                                 ["Single", "Selected", "All"], others=False))
    return out


def _rule_timeliness(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        if item.name == "Timeliness":
            out.extend(_exact_leaves("timeliness-leaves", path, item,
                                     ["Temporary", "Recoverable"],
                                     others=False))
    return out


def _rule_completeness(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        if item.name == "Completeness":
            out.extend(_exact_leaves("completeness-leaves", path, item,
                                     ["Full", "Partial"], others=False))
    return out


def _rule_directness(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for path, item in _iter_items(catalog):
        if item.name == "Directness":
            out.extend(_exact_leaves("directness-leaves", path, item,
                                     ["Direct", "Indirect"], others=False))
    return out


def _profile_override(catalog: Catalog, profile: str, tax: str, cat: str,
                      item_code: str) -> Item | None:
    p = catalog.profile(profile)
    if p is None:
        return None
    for ov in p.overrides:
        if (ov.taxonomy, ov.category, ov.item) == (tax, cat, item_code):
            return ov.definition
    return None


def _rule_iot_target_type(catalog: Catalog) -> list[CatalogViolation]:
    item = _profile_override(catalog, "IoT", "BG", "T", "T")
    return _exact_leaves("iot-target-type", "IoT:BG.T.T", item,
                         ["Consumer", "Commercial", "Industrial"], others=True)


def _rule_iot_domain(catalog: Catalog) -> list[CatalogViolation]:
    item = _profile_override(catalog, "IoT", "BG", "T", "S")
    out = _exact_leaves("iot-domain", "IoT:BG.T.S", item,
                        ["Smart Home", "Health Care", "Transportation",
                         "Industry 4.0"], others=True)
    if item is not None and item.name != "Domain":
        out.append(_v("iot-domain", "IoT:BG.T.S",
                      f"item named {item.name!r}, expected Domain"))
    return out


def _rule_iot_level(catalog: Catalog) -> list[CatalogViolation]:
    item = _profile_override(catalog, "IoT", "SI", "T", "L")
    return _exact_leaves("iot-level", "IoT:SI.T.L", item,
                         ["Physical", "Logical", "Application"], others=True)


def _rule_iot_characteristics(catalog: Catalog) -> list[CatalogViolation]:
    item = _profile_override(catalog, "IoT", "SI", "T", "H")
    return _exact_leaves("iot-characteristics", "IoT:SI.T.H", item,
                         ["Automation", "Intelligence", "Storage", "Sensing",
                          "Processing"], others=True)


def _rule_iot_attack_category(catalog: Catalog) -> list[CatalogViolation]:
    item = _profile_override(catalog, "IoT", "SI", "K", "G")
    out = _exact_leaves("iot-attack-category", "IoT:SI.K.G", item,
                        ["Identification", "Authentication", "Authorization",
                         "Trust", "Governance", "Management", "Information"],
                        others=True)
    if item is not None:
        names = {l.name for l in item.leaves}
        for gone in ("User Management", "User Repository"):
            if gone in names:
                out.append(_v("iot-attack-category", "IoT:SI.K.G",
                              f"{gone!r} must not survive the override"))
    return out


def _rule_ssi_level(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for tax in ("SI", "IMS", "UE"):
        path = f"SSI:{tax}.T.L"
        item = _profile_override(catalog, "SSI", tax, "T", "L")
        out.extend(_exact_leaves("ssi-level", path, item,
                                 ["Service", "Network", "System", "Wallet",
                                  "Agent", "User"], others=True))
        if item is None:
            continue
        network = _sub_leaf(item, 2)
        if network is None or [c.name for c in network.children] != [
                "Normal", "Decentralized"]:
            out.append(_v("ssi-level", f"{path}.2", "Network sub-leaves wrong"))
        system = _sub_leaf(item, 3)
        if system is None or [c.name for c in system.children] != [
                "Server", "Client"]:
            out.append(_v("ssi-level", f"{path}.3", "System sub-leaves wrong"))
    return out


def _rule_ssi_location(catalog: Catalog) -> list[CatalogViolation]:
    out = []
    for tax in ("SI", "IMS", "UE"):
        item = _profile_override(catalog, "SSI", tax, "T", "O")
        out.extend(_exact_leaves("ssi-location", f"SSI:{tax}.T.O", item,
                                 ["Issuer", "Holder", "Verifier", "TTP",
                                  "Decentralized Storage", "User Device",
                                  "Transmission"], others=True))
    return out


STRUCTURAL_RULES: dict[str, RuleFn] = {
    "taxonomy-codes": _rule_taxonomy_codes,
    "category-set": _rule_category_sets,
    "fixed-item-codes": _rule_fixed_item_codes,
    "leaf-numbering": _rule_leaf_numbering,
    "kind-leaves": _rule_kind_leaves,
    "item-code-unique": _rule_item_codes_unique,
}

CONTENT_RULES: dict[str, RuleFn] = {
    "BG-has-attacker": _rule_bg_has_attacker,
    "others-is-zero": _rule_others_is_zero,
    "bg-capabilities-items": _rule_bg_capabilities,
    "knowledge-scale": _rule_knowledge_scale,
    "time-scale": _rule_time_scale,
    "authenticity-leaves": _rule_authenticity,
    "attack-category-leaves": _rule_attack_category,
    "lifecycle-stages": _rule_lifecycle,
    "ue-pattern-tree": _rule_ue_pattern,
    "ue-identity-types": _rule_ue_identity_types,
    "ue-brute-force": _rule_ue_brute_force,
    "amount-leaves": _rule_amount,
    "timeliness-leaves": _rule_timeliness,
    "completeness-leaves": _rule_completeness,
    "directness-leaves": _rule_directness,
    "iot-target-type": _rule_iot_target_type,
    "iot-domain": _rule_iot_domain,
    "iot-level": _rule_iot_level,
    "iot-characteristics": _rule_iot_characteristics,
    "iot-attack-category": _rule_iot_attack_category,
    "ssi-level": _rule_ssi_level,
    "ssi-location": _rule_ssi_location,
}

ALL_RULES: dict[str, RuleFn] = {**STRUCTURAL_RULES, **CONTENT_RULES}


def verify_catalog(catalog: Catalog) -> list[CatalogViolation]:
    """Run every named rule; an empty list means the catalog is sound."""
    out: list[CatalogViolation] = []
    for rule in ALL_RULES.values():
        out.extend(rule(catalog))
    return out
