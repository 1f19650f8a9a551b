"""Codec for hierarchical taxonomy codes.

A code names a node in a taxonomy tree::

    code    := (PROFILE ':')? TAX ('.' CAT ('.' ITEM ('.' NUM)*)?)?
    PROFILE := 'IoT' | 'SSI'
    TAX     := two or three uppercase letters, or a registered profile token
    CAT     := one uppercase letter
    ITEM    := one or two uppercase letters
    NUM     := '0' | nonzero decimal without leading zeros

Examples: ``BG``, ``BG.I.A.1``, ``IoT:SI.K.G.2``, ``UE.K.T.1.4.4``.

Parsing is strict about case: ``bg.i.a.1`` and the case-variant ``IOT`` are
rejected unless ``lenient=True``, which upper-cases the input first and then
maps registered tokens back to their canonical spelling.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import CodeSyntaxError, EmptyInputError, InvalidCodeError

# Profile tokens that may appear before ':' and also as bare taxonomy tokens.
REGISTERED_PROFILES: tuple[str, ...] = ("IoT", "SSI")

# Taxonomy tokens this code line knows about. WA is reserved: it parses but
# never resolves against a catalog. Profile tokens parse bare as well (and
# likewise never resolve).
KNOWN_TAXONOMIES: tuple[str, ...] = ("BG", "SI", "IMS", "UE", "WA", "IoT", "SSI")

_TAX_RE = re.compile(r"[A-Z]{2,3}")
_CAT_RE = re.compile(r"[A-Z]")
_ITEM_RE = re.compile(r"[A-Z]{1,2}")
_NUM_RE = re.compile(r"0|[1-9][0-9]*")

# Upper-cased spellings of registered tokens mapped back to canonical form.
_FOLDED_TOKENS = {p.upper(): p for p in REGISTERED_PROFILES}


@dataclass(frozen=True)
class TaxonomyCode:
    """A parsed code. ``leaf_path`` is empty unless ``item`` is set, and
    ``item`` requires ``category``."""

    taxonomy: str
    category: str | None = None
    item: str | None = None
    leaf_path: tuple[int, ...] = field(default=())
    profile: str | None = None

    @property
    def depth(self) -> int:
        """0 = taxonomy, 1 = category, 2 = item, 2+n = n leaf segments."""
        if self.category is None:
            return 0
        if self.item is None:
            return 1
        return 2 + len(self.leaf_path)

    @property
    def taxonomy_key(self) -> str:
        """Taxonomy with profile qualifier, e.g. ``IoT:SI`` or plain ``BG``."""
        return f"{self.profile}:{self.taxonomy}" if self.profile else self.taxonomy

    def with_leaf(self, number: int) -> TaxonomyCode:
        """The code one leaf level deeper."""
        if self.item is None:
            raise InvalidCodeError("leaf numbers require an item segment")
        return TaxonomyCode(
            self.taxonomy, self.category, self.item,
            self.leaf_path + (number,), self.profile,
        )

    def parent(self) -> TaxonomyCode | None:
        """The code one level up, or None at taxonomy level."""
        if self.leaf_path:
            return TaxonomyCode(self.taxonomy, self.category, self.item,
                                self.leaf_path[:-1], self.profile)
        if self.item is not None:
            return TaxonomyCode(self.taxonomy, self.category, None, (), self.profile)
        if self.category is not None:
            return TaxonomyCode(self.taxonomy, None, None, (), self.profile)
        return None

    def is_prefix_of(self, other: TaxonomyCode) -> bool:
        """True when ``other`` lies in the subtree rooted at this code
        (a code is a prefix of itself)."""
        if (self.profile, self.taxonomy) != (other.profile, other.taxonomy):
            return False
        if self.category is None:
            return True
        if self.category != other.category:
            return False
        if self.item is None:
            return True
        if self.item != other.item:
            return False
        return other.leaf_path[: len(self.leaf_path)] == self.leaf_path

    def __str__(self) -> str:
        return format_code(self)


def _fail(text: str, message: str, offset: int) -> CodeSyntaxError:
    return CodeSyntaxError(message, offset, text)


def parse_code(text: str, lenient: bool = False) -> TaxonomyCode:
    """Parse a code string into a :class:`TaxonomyCode`.

    Raises :class:`EmptyInputError` for the empty string and
    :class:`CodeSyntaxError` (with the offending character offset) for
    anything else the grammar rejects.
    """
    if not isinstance(text, str):
        raise _fail("", "code must be a string", 0)
    if text == "":
        raise EmptyInputError()
    work = text.upper() if lenient else text

    profile: str | None = None
    pos = 0
    if ":" in work:
        head, _, _ = work.partition(":")
        canonical = _FOLDED_TOKENS.get(head) if lenient else (
            head if head in REGISTERED_PROFILES else None
        )
        if canonical is None:
            raise _fail(text, f"unknown profile {text[:len(head)]!r}", 0)
        profile = canonical
        pos = len(head) + 1

    taxonomy, pos = _scan_taxonomy(text, work, pos, lenient)
    category: str | None = None
    item: str | None = None
    leaves: list[int] = []

    if pos < len(work):
        pos = _expect_dot(text, work, pos)
        category, pos = _scan_token(text, work, pos, _CAT_RE, "category letter")
    if pos < len(work):
        pos = _expect_dot(text, work, pos)
        item, pos = _scan_token(text, work, pos, _ITEM_RE, "item code")
    while pos < len(work):
        pos = _expect_dot(text, work, pos)
        number, pos = _scan_number(text, work, pos)
        leaves.append(number)

    return TaxonomyCode(taxonomy, category, item, tuple(leaves), profile)


def _expect_dot(text: str, work: str, pos: int) -> int:
    if work[pos] != ".":
        raise _fail(text, f"expected '.' before {text[pos]!r}", pos)
    if pos + 1 >= len(work):
        raise _fail(text, "trailing '.'", pos + 1)
    return pos + 1


def _scan_taxonomy(text: str, work: str, pos: int, lenient: bool) -> tuple[str, int]:
    if not lenient:
        for token in REGISTERED_PROFILES:
            if text.startswith(token, pos):
                return token, pos + len(token)
    match = _TAX_RE.match(work, pos)
    if match is None:
        raise _fail(text, "expected taxonomy token", pos)
    token = match.group(0)
    if token in _FOLDED_TOKENS:
        canonical = _FOLDED_TOKENS[token]
        if lenient:
            return canonical, match.end()
        if text[pos:match.end()] != canonical:
            raise _fail(
                text,
                f"case variant of registered token {canonical!r}",
                pos,
            )
    return token, match.end()


def _scan_token(text: str, work: str, pos: int, pattern: re.Pattern[str],
                what: str) -> tuple[str, int]:
    match = pattern.match(work, pos)
    if match is None:
        raise _fail(text, f"expected {what}", pos)
    return match.group(0), match.end()


def _scan_number(text: str, work: str, pos: int) -> tuple[int, int]:
    if work[pos] == "0" and pos + 1 < len(work) and work[pos + 1].isdigit():
        raise _fail(text, "leading zero in leaf number", pos)
    match = _NUM_RE.match(work, pos)
    if match is None:
        raise _fail(text, "expected leaf number", pos)
    return int(match.group(0)), match.end()


def format_code(code: TaxonomyCode) -> str:
    """Render a :class:`TaxonomyCode` back to its canonical string.

    Raises :class:`InvalidCodeError` if the structured value violates the
    grammar (bad charset, broken nesting, negative leaf numbers).
    """
    if code.profile is not None and code.profile not in REGISTERED_PROFILES:
        raise InvalidCodeError(f"unknown profile {code.profile!r}")
    tax = code.taxonomy
    if tax not in REGISTERED_PROFILES:
        if _TAX_RE.fullmatch(tax) is None or tax in _FOLDED_TOKENS:
            raise InvalidCodeError(f"bad taxonomy token {tax!r}")
    if code.category is None:
        if code.item is not None or code.leaf_path:
            raise InvalidCodeError("item/leaves require a category")
    elif _CAT_RE.fullmatch(code.category) is None:
        raise InvalidCodeError(f"bad category {code.category!r}")
    if code.item is None:
        if code.leaf_path:
            raise InvalidCodeError("leaves require an item")
    else:
        if code.category is None:
            raise InvalidCodeError("item requires a category")
        if _ITEM_RE.fullmatch(code.item) is None:
            raise InvalidCodeError(f"bad item code {code.item!r}")
    for number in code.leaf_path:
        if not isinstance(number, int) or isinstance(number, bool) or number < 0:
            raise InvalidCodeError(f"bad leaf number {number!r}")

    parts = [tax]
    if code.category is not None:
        parts.append(code.category)
    if code.item is not None:
        parts.append(code.item)
    parts.extend(str(n) for n in code.leaf_path)
    body = ".".join(parts)
    return f"{code.profile}:{body}" if code.profile else body


def canonicalize(text: str, lenient: bool = False) -> str:
    """Parse then re-format: the fixed-point string form of a code."""
    return format_code(parse_code(text, lenient))
