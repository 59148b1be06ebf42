"""ICD-10 chapter table, ICD->CUI mapping and the condition lexicon.

The chapter range table ships as a versioned fixture
(``data/chapters.csv``) and is the single source of truth for chapter
resolution.  The mapping and lexicon are plain files so the pipeline
runs without any licensed terminology distribution:

* mapping CSV:  header ``icd_code,chapter,cui``, UTF-8;
* lexicon TSV:  4 tab-separated columns
  ``cui<TAB>preferred_term<TAB>synonyms(|-separated)<TAB>icd_code``.

An optional SPARQL path can populate the mapping from an ontology
endpoint; it is injectable so tests run offline.
"""
from __future__ import annotations

import csv
import json
import logging
import re
import urllib.request
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable

from .errors import (
    ArgumentError,
    NetworkError,
    OutOfScopeError,
    ParseError,
    ValidationError,
)
from .textproc import normalize

log = logging.getLogger(__name__)

ICD_CODE_RE = re.compile(r"^[A-Z][0-9][0-9]$")
CUI_RE = re.compile(r"^C[0-9]{7}$")

SCOPE_START, SCOPE_END = "A00", "N99"

ROMAN_VALUE = {
    "I": 1, "II": 2, "III": 3, "IV": 4, "V": 5, "VI": 6, "VII": 7,
    "VIII": 8, "IX": 9, "X": 10, "XI": 11, "XII": 12, "XIII": 13, "XIV": 14,
    "XV": 15, "XVI": 16, "XVII": 17, "XVIII": 18, "XIX": 19, "XX": 20,
    "XXI": 21, "XXII": 22,
}


def chapter_sort_key(chapter_id: str) -> int:
    return ROMAN_VALUE.get(chapter_id, 99)


@dataclass(frozen=True)
class Chapter:
    """One ICD-10 chapter: Roman-numeral id and inclusive 3-character range."""

    id: str
    name: str
    start: str
    end: str

    def contains(self, code: str) -> bool:
        return self.start <= code <= self.end


def validate_icd_code(code: str) -> str:
    if not ICD_CODE_RE.match(code):
        raise ValidationError(f"not a 3-character ICD-10 code: {code!r}")
    return code


def validate_cui(cui: str) -> str:
    if not CUI_RE.match(cui):
        raise ValidationError(f"not a CUI (C + 7 digits): {cui!r}")
    return cui


@lru_cache(maxsize=1)
def chapters() -> tuple[Chapter, ...]:
    """The bundled chapter range table, ordered by chapter number."""
    text = resources.files("comorbid").joinpath("data/chapters.csv").read_text("utf-8")
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    loaded = [
        Chapter(row["chapter"], row["name"], row["start"], row["end"])
        for row in csv.DictReader(rows)
    ]
    return tuple(sorted(loaded, key=lambda c: chapter_sort_key(c.id)))


def chapter_of(code: str) -> Chapter:
    """The unique chapter whose range contains ``code``.

    Raises OutOfScopeError for syntactically valid codes outside A00-N99.
    """
    validate_icd_code(code)
    for chapter in chapters():
        if chapter.contains(code):
            return chapter
    raise OutOfScopeError(f"code {code} is outside the supported range {SCOPE_START}-{SCOPE_END}")


@dataclass(frozen=True)
class MappingEntry:
    icd_code: str
    chapter: str
    cui: str


@dataclass
class IcdMapping:
    """One CUI per top-level ICD code, keyed by code."""

    by_code: dict[str, MappingEntry] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.by_code)

    def __contains__(self, code: str) -> bool:
        return code in self.by_code

    def entries(self) -> list[MappingEntry]:
        return [self.by_code[code] for code in sorted(self.by_code)]

    def add(self, icd_code: str, cui: str) -> None:
        validate_icd_code(icd_code)
        validate_cui(cui)
        if icd_code in self.by_code:
            raise ValidationError(f"duplicate icd_code: {icd_code}")
        self.by_code[icd_code] = MappingEntry(icd_code, chapter_of(icd_code).id, cui)


MAPPING_HEADER = ["icd_code", "chapter", "cui"]


def load_mapping(path) -> IcdMapping:
    """Parse and validate a mapping CSV; row order is irrelevant."""
    mapping = IcdMapping()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            log.warning("mapping file %s is empty", path)
            return mapping
        if header != MAPPING_HEADER:
            raise ParseError(f"expected header {','.join(MAPPING_HEADER)}, got {','.join(header)}", line=1)
        rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno)
            code, chapter_id, cui = (cell.strip() for cell in row)
            try:
                mapping.add(code, cui)
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            if mapping.by_code[code].chapter != chapter_id:
                raise ValidationError(
                    f"line {lineno}: chapter {chapter_id} for {code} disagrees with "
                    f"range table ({mapping.by_code[code].chapter})"
                )
            rows += 1
    if rows == 0:
        log.warning("mapping file %s has no entries", path)
    return mapping


def save_mapping(mapping: IcdMapping, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MAPPING_HEADER)
        for entry in mapping.entries():
            writer.writerow([entry.icd_code, entry.chapter, entry.cui])


@dataclass(frozen=True)
class LexiconEntry:
    cui: str
    preferred_term: str
    synonyms: tuple[str, ...]  # normalized, deduplicated, order-preserving
    icd_code: str


@dataclass
class Lexicon:
    entries: list[LexiconEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def chapter_lookup(self) -> dict[str, str]:
        """cui -> chapter id for every entry."""
        return {e.cui: chapter_of(e.icd_code).id for e in self.entries}


def load_lexicon(path, mapping: IcdMapping) -> Lexicon:
    """Parse and validate a lexicon TSV against a loaded mapping.

    Synonyms are normalized on load; entries whose preferred term or any
    synonym normalizes to the empty string are rejected.
    """
    entries: list[LexiconEntry] = []
    seen_cuis: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(cells)}", line=lineno)
            cui, preferred, synonyms_cell, icd_code = (cell.strip() for cell in cells)
            try:
                validate_cui(cui)
                validate_icd_code(icd_code)
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            if cui in seen_cuis:
                raise ValidationError(f"line {lineno}: duplicate cui: {cui}")
            if icd_code not in mapping:
                raise ValidationError(f"line {lineno}: icd_code {icd_code} not present in mapping")
            if not normalize(preferred):
                raise ValidationError(f"line {lineno}: preferred term normalizes to empty")
            raw_synonyms = [s for s in synonyms_cell.split("|") if s]
            if not raw_synonyms:
                raise ValidationError(f"line {lineno}: empty synonym list for {cui}")
            normalized = []
            for synonym in raw_synonyms:
                norm = normalize(synonym)
                if not norm:
                    raise ValidationError(
                        f"line {lineno}: synonym {synonym!r} normalizes to empty"
                    )
                normalized.append(norm)
            seen_cuis.add(cui)
            entries.append(
                LexiconEntry(
                    cui=cui,
                    preferred_term=preferred,
                    synonyms=tuple(dict.fromkeys(normalized)),
                    icd_code=icd_code,
                )
            )
    return Lexicon(entries=entries)


DEFAULT_GRAPH_URI = "http://bioportal.bioontology.org/ontologies/ICD10"

_SPARQL_TEMPLATE = """\
PREFIX skos: <http://www.w3.org/2004/02/skos/core#>
PREFIX umls: <http://bioportal.bioontology.org/ontologies/umls/>

SELECT ?code ?cui
WHERE {{
  GRAPH <{graph}> {{
    ?concept skos:notation ?code .
    ?concept umls:cui ?cui .
  }}
  VALUES ?code {{ {values} }}
}}
ORDER BY ?code
"""


def build_sparql_query(codes: list[str], graph_uri: str = DEFAULT_GRAPH_URI) -> str:
    """Deterministic SELECT requesting (code, cui) pairs for ``codes``."""
    if not codes:
        raise ArgumentError("cannot build a query for an empty code list")
    unique = sorted(set(codes))
    for code in unique:
        validate_icd_code(code)
    values = " ".join(f'"{code}"' for code in unique)
    return _SPARQL_TEMPLATE.format(graph=graph_uri, values=values)


Transport = Callable[[str, str], str]


def http_transport(endpoint: str, query: str) -> str:
    """POST a SPARQL query, asking for the JSON results format."""
    request = urllib.request.Request(
        endpoint,
        data=query.encode("utf-8"),
        headers={
            "Content-Type": "application/sparql-query",
            "Accept": "application/sparql-results+json",
        },
    )
    with urllib.request.urlopen(request) as response:
        return response.read().decode("utf-8")


def fetch_mappings(
    endpoint: str,
    codes: list[str],
    transport: Transport | None = None,
    graph_uri: str = DEFAULT_GRAPH_URI,
) -> tuple[IcdMapping, list[str]]:
    """Fetch (code, cui) rows from a SPARQL endpoint into an IcdMapping.

    Returns the mapping plus the sorted list of requested codes that came
    back without a binding; the caller decides what to do about misses.
    No retries here either: a transport failure surfaces as NetworkError.
    """
    query = build_sparql_query(codes, graph_uri=graph_uri)
    if transport is None:
        transport = http_transport
    try:
        body = transport(endpoint, query)
    except Exception as exc:
        raise NetworkError(f"transport failure talking to {endpoint}: {exc}") from exc

    try:
        payload = json.loads(body)
        bindings = payload["results"]["bindings"]
        pairs = [(b["code"]["value"], b["cui"]["value"]) for b in bindings]
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed SPARQL response: {exc}") from exc

    requested = set(codes)
    mapping = IcdMapping()
    for code, cui in pairs:
        if code not in requested:
            log.warning("endpoint returned unrequested code %s; ignoring", code)
            continue
        if code in mapping and mapping.by_code[code].cui == cui:
            continue
        mapping.add(code, cui)
    misses = sorted(requested - set(mapping.by_code))
    return mapping, misses
