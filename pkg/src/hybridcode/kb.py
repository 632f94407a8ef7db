"""ICD-10 knowledge base and the keyword/abbreviation fallback maps.

The knowledge base is the closed universe of codes the auditor can ever
accept. It is loaded once from ``icd10_rules.json`` and is immutable
afterwards, so it can be shared freely across workers. The ``rules``
strings are stored verbatim for display; they are never evaluated.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .exceptions import (
    EmptyDescriptionError,
    InvalidCodeError,
    MalformedDocumentError,
    MappingIntegrityError,
    MissingFileError,
)

# ICD-10-CM surface syntax: one letter (U excluded), one digit, one digit or
# letter, then optionally a dot followed by 1-4 digits/letters. "M602" does
# NOT match: four characters need the dot, which is what makes it correctable.
_CODE_RE = re.compile(r"[A-TV-Z][0-9][0-9A-Z](?:\.[0-9A-Z]{1,4})?")

_TOKEN_SPLIT_RE = re.compile(r"[^0-9A-Za-z]+")


def is_valid_icd10_format(code: str) -> bool:
    """True iff the uppercased code matches the ICD-10-CM format grammar."""
    return _CODE_RE.fullmatch(code.upper()) is not None


@dataclass(frozen=True)
class KBEntry:
    code: str
    description: str
    rules: tuple[str, ...]

    def __post_init__(self):
        if not is_valid_icd10_format(self.code) or self.code != self.code.upper():
            raise InvalidCodeError(f"invalid ICD-10 code: {self.code!r}")
        if not self.description:
            raise EmptyDescriptionError(f"empty description for {self.code}")


def description_keywords(entry: KBEntry) -> list[str]:
    """Evidence keywords of an entry: description words longer than 3 chars.

    Splits on any non-alphanumeric character, keeps order, does not dedupe.
    """
    return [w for w in _TOKEN_SPLIT_RE.split(entry.description) if len(w) > 3]


class KnowledgeBase:
    """Immutable map from uppercase ICD-10 code to its entry."""

    def __init__(self, entries: dict[str, KBEntry]):
        self._entries = dict(entries)

    @property
    def size(self) -> int:
        return len(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, code: str) -> bool:
        return code.upper() in self._entries

    def codes(self) -> list[str]:
        return list(self._entries)

    def lookup(self, code: str) -> KBEntry | None:
        """Exact-match lookup, case-folded to uppercase. No prefix matching."""
        return self._entries.get(code.upper())


def lookup(kb: KnowledgeBase, code: str) -> KBEntry | None:
    return kb.lookup(code)


def _read_json(path) -> object:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"file not found: {path}")
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MissingFileError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(raw, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"{path} is not valid JSON: {exc}") from exc


def _reject_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise MalformedDocumentError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def load_kb(path) -> KnowledgeBase:
    """Load and validate the knowledge base file.

    The file is a JSON object keyed by code; each value carries a
    ``description`` string and a ``rules`` array of strings. Keys are
    uppercased; duplicates (including post-uppercasing) are a load error.
    """
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise MalformedDocumentError(f"{path}: top level must be a JSON object")
    entries: dict[str, KBEntry] = {}
    for key, value in doc.items():
        code = key.upper()
        if not is_valid_icd10_format(code):
            raise InvalidCodeError(f"{path}: key {key!r} is not a valid ICD-10 code")
        if code in entries:
            raise MalformedDocumentError(f"{path}: duplicate code {code!r} after uppercasing")
        if not isinstance(value, dict):
            raise MalformedDocumentError(f"{path}: entry {key!r} must be an object")
        description = value.get("description")
        rules = value.get("rules")
        if not isinstance(description, str):
            raise MalformedDocumentError(f"{path}: entry {key!r} needs a string 'description'")
        if not description:
            raise EmptyDescriptionError(f"{path}: entry {key!r} has an empty description")
        if not isinstance(rules, list) or not all(isinstance(r, str) for r in rules):
            raise MalformedDocumentError(f"{path}: entry {key!r} needs a 'rules' array of strings")
        entries[code] = KBEntry(code=code, description=description, rules=tuple(rules))
    return KnowledgeBase(entries)


@dataclass(frozen=True)
class KeywordMap:
    """Ordered (lowercase keyword, code) pairs for the fallback tier."""

    pairs: tuple[tuple[str, str], ...]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class AbbreviationMap:
    """Ordered (abbreviation, code) pairs; matched case-sensitively as whole tokens."""

    pairs: tuple[tuple[str, str], ...]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def load_keyword_map(path, kb: KnowledgeBase) -> KeywordMap:
    """Load ``keyword_map.json``; every target code must be a KB member."""
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise MalformedDocumentError(f"{path}: top level must be a JSON array")
    pairs = []
    for i, item in enumerate(doc):
        if not isinstance(item, dict) or not isinstance(item.get("keyword"), str) \
                or not isinstance(item.get("code"), str):
            raise MalformedDocumentError(f"{path}: item {i} must be {{'keyword','code'}}")
        keyword = item["keyword"].lower()
        code = item["code"].upper()
        if not keyword:
            raise MalformedDocumentError(f"{path}: item {i} has an empty keyword")
        if code not in kb:
            raise MappingIntegrityError(
                f"{path}: keyword {keyword!r} targets {code!r}, which is not in the KB")
        pairs.append((keyword, code))
    return KeywordMap(pairs=tuple(pairs))


def load_abbrev_map(path, kb: KnowledgeBase) -> AbbreviationMap:
    """Load ``abbrev_map.json``; targets must be KB members, no whitespace in tokens."""
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise MalformedDocumentError(f"{path}: top level must be a JSON array")
    pairs = []
    for i, item in enumerate(doc):
        if not isinstance(item, dict) or not isinstance(item.get("abbr"), str) \
                or not isinstance(item.get("code"), str):
            raise MalformedDocumentError(f"{path}: item {i} must be {{'abbr','code'}}")
        abbr = item["abbr"]
        code = item["code"].upper()
        if not abbr or any(ch.isspace() for ch in abbr):
            raise MalformedDocumentError(
                f"{path}: item {i} abbreviation {abbr!r} is empty or contains whitespace")
        if code not in kb:
            raise MappingIntegrityError(
                f"{path}: abbreviation {abbr!r} targets {code!r}, which is not in the KB")
        pairs.append((abbr, code))
    return AbbreviationMap(pairs=tuple(pairs))


def validate_files(kb_path, keywords_path, abbrevs_path) -> list[str]:
    """Collect every load-time invariant violation across the three files.

    Unlike the fail-fast loaders, this keeps going after a violation so the
    ``validate-kb`` command can print one diagnostic per problem. Unreadable
    files still raise MissingFileError.
    """
    violations: list[str] = []

    # Walk the KB document collecting every violation; keep the clean entries
    # so the map checks below can still run against a partial KB.
    try:
        doc = _read_json(kb_path)
    except MalformedDocumentError as exc:
        return [str(exc)]
    if not isinstance(doc, dict):
        return [f"{kb_path}: top level must be a JSON object"]
    entries: dict[str, KBEntry] = {}
    for key, value in doc.items():
        code = key.upper()
        if not is_valid_icd10_format(code):
            violations.append(f"InvalidCode: KB key {key!r} fails the format grammar")
            continue
        if code in entries:
            violations.append(f"MalformedDocument: duplicate KB code {code!r} after uppercasing")
            continue
        if not isinstance(value, dict) or not isinstance(value.get("description"), str) \
                or not isinstance(value.get("rules"), list) \
                or not all(isinstance(r, str) for r in value["rules"]):
            violations.append(f"MalformedDocument: KB entry {key!r} has the wrong shape")
            continue
        if not value["description"]:
            violations.append(f"EmptyDescription: KB entry {key!r}")
            continue
        entries[code] = KBEntry(code=code, description=value["description"],
                                rules=tuple(value["rules"]))
    kb = KnowledgeBase(entries)

    for path, field, label in ((keywords_path, "keyword", "keyword map"),
                               (abbrevs_path, "abbr", "abbreviation map")):
        try:
            doc = _read_json(path)
        except MalformedDocumentError as exc:
            violations.append(str(exc))
            continue
        if not isinstance(doc, list):
            violations.append(f"{path}: top level must be a JSON array")
            continue
        for i, item in enumerate(doc):
            if not isinstance(item, dict) or not isinstance(item.get(field), str) \
                    or not isinstance(item.get("code"), str):
                violations.append(f"MalformedDocument: {label} item {i} has the wrong shape")
                continue
            token, code = item[field], item["code"].upper()
            if not token or (field == "abbr" and any(ch.isspace() for ch in token)):
                violations.append(f"MalformedDocument: {label} item {i} token {token!r}")
                continue
            if code not in kb:
                violations.append(
                    f"MappingIntegrity: {label} pair ({token!r} -> {code}) targets a code "
                    f"absent from the KB")
    return violations
