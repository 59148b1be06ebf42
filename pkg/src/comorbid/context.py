"""Rule-based negation and temporality attribution.

Scoping follows the classic deterministic recipe: a pre-position
negation trigger claims mentions that begin within the next
``window`` (default 6) tokens of the same sentence; a post-position
trigger claims mentions that end within the preceding ``window``
tokens; a historic trigger works like a pre-position trigger.  Any
terminator token strictly between trigger and mention cuts the scope.
Scope never crosses a sentence boundary because both triggers and
mentions are located within one sentence's token list.

Trigger phrases live in an editable TOML fixture with four lists
(``negation_pre``, ``negation_post``, ``historic``, ``terminators``);
the packaged defaults are in ``data/triggers.toml``.  Phrases are
matched on normalized tokens; punctuation phrases such as ``;`` match
on the raw surface.  When one trigger occurrence is strictly contained
in a longer one ("history of" inside "no history of"), only the longer
occurrence counts.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources

import tomli

from .errors import ValidationError
from .matcher import Mention
from .textproc import Token, normalize

DEFAULT_WINDOW = 6

_PHRASE_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class Temporality(enum.Enum):
    RECENT = "recent"
    HISTORIC = "historic"


@dataclass(frozen=True)
class FiredTrigger:
    """A trigger phrase occurrence that changed a mention's attributes."""

    phrase: str
    start: int
    end: int


@dataclass(frozen=True)
class MentionAttributes:
    negated: bool
    temporality: Temporality
    triggers: tuple[FiredTrigger, ...] = ()


def _phrase_keys(phrase: str) -> tuple[str, ...]:
    """Match keys for a phrase: normalized token, or surface for pure punctuation."""
    keys = []
    for m in _PHRASE_TOKEN_RE.finditer(phrase):
        norm = normalize(m.group())
        keys.append(norm if norm else m.group())
    if not keys:
        raise ValidationError(f"trigger phrase {phrase!r} has no tokens")
    return tuple(keys)


_CATEGORIES = ("negation_pre", "negation_post", "historic", "terminators")


@dataclass
class TriggerSet:
    negation_pre: tuple[str, ...]
    negation_post: tuple[str, ...]
    historic: tuple[str, ...]
    terminators: tuple[str, ...]
    # first key -> [(keys, category, phrase)], longest phrase first
    _buckets: dict[str, list[tuple[tuple[str, ...], str, str]]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        seen: dict[tuple[str, ...], str] = {}
        for category in _CATEGORIES:
            for phrase in getattr(self, category):
                keys = _phrase_keys(phrase)
                if keys in seen and seen[keys] != category:
                    raise ValidationError(
                        f"trigger {phrase!r} appears in both {seen[keys]} and {category}"
                    )
                seen[keys] = category
                self._buckets.setdefault(keys[0], []).append((keys, category, phrase))
        for bucket in self._buckets.values():
            bucket.sort(key=lambda item: (-len(item[0]), item[0]))


def _triggers_from_payload(payload: dict) -> TriggerSet:
    missing = [key for key in _CATEGORIES if key not in payload]
    if missing:
        raise ValidationError(f"trigger config is missing lists: {', '.join(missing)}")
    return TriggerSet(
        negation_pre=tuple(payload["negation_pre"]),
        negation_post=tuple(payload["negation_post"]),
        historic=tuple(payload["historic"]),
        terminators=tuple(payload["terminators"]),
    )


def load_triggers(path) -> TriggerSet:
    with open(path, "rb") as fh:
        return _triggers_from_payload(tomli.load(fh))


def default_triggers() -> TriggerSet:
    with resources.files("comorbid").joinpath("data/triggers.toml").open("rb") as fh:
        return _triggers_from_payload(tomli.load(fh))


@dataclass(frozen=True)
class Occurrence:
    """A trigger phrase located in a sentence, in token and char coordinates."""

    category: str
    phrase: str
    first: int  # token index, inclusive
    last: int  # token index, inclusive
    start: int  # char offset
    end: int


def scan_triggers(tokens: list[Token], triggers: TriggerSet) -> list[Occurrence]:
    """All trigger occurrences in one sentence, contained ones pruned."""
    keys = [t.norm if t.norm else t.surface for t in tokens]
    raw: list[Occurrence] = []
    for i, key in enumerate(keys):
        for phrase_keys, category, phrase in triggers._buckets.get(key, []):
            last = i + len(phrase_keys) - 1
            if last >= len(keys):
                continue
            if all(keys[i + j] == phrase_keys[j] for j in range(1, len(phrase_keys))):
                raw.append(
                    Occurrence(
                        category=category,
                        phrase=phrase,
                        first=i,
                        last=last,
                        start=tokens[i].start,
                        end=tokens[last].end,
                    )
                )
    pruned = [
        occ
        for occ in raw
        if not any(
            other is not occ
            and other.first <= occ.first
            and occ.last <= other.last
            and (other.last - other.first) > (occ.last - occ.first)
            for other in raw
        )
    ]
    pruned.sort(key=lambda occ: (occ.first, occ.last))
    return pruned


def _mention_token_range(mention: Mention, tokens: list[Token]) -> tuple[int, int] | None:
    covered = [
        i for i, t in enumerate(tokens) if t.start < mention.end and t.end > mention.start
    ]
    if not covered:
        return None
    return covered[0], covered[-1]


def _terminator_between(occurrences: list[Occurrence], lo: int, hi: int) -> bool:
    """Any terminator occupying tokens strictly inside (lo, hi)?"""
    return any(
        occ.category == "terminators" and occ.first > lo and occ.last < hi
        for occ in occurrences
    )


def detect_negation(
    mention: Mention,
    tokens: list[Token],
    triggers: TriggerSet,
    window: int = DEFAULT_WINDOW,
    occurrences: list[Occurrence] | None = None,
) -> tuple[bool, list[FiredTrigger]]:
    """Negation verdict plus the trigger occurrences that fired."""
    if occurrences is None:
        occurrences = scan_triggers(tokens, triggers)
    span = _mention_token_range(mention, tokens)
    if span is None:
        return False, []
    first, last = span
    fired: list[FiredTrigger] = []
    for occ in occurrences:
        if occ.category == "negation_pre":
            distance = first - occ.last
            if 1 <= distance <= window and not _terminator_between(occurrences, occ.last, first):
                fired.append(FiredTrigger(occ.phrase, occ.start, occ.end))
        elif occ.category == "negation_post":
            distance = occ.first - last
            if 1 <= distance <= window and not _terminator_between(occurrences, last, occ.first):
                fired.append(FiredTrigger(occ.phrase, occ.start, occ.end))
    return bool(fired), fired


def detect_temporality(
    mention: Mention,
    tokens: list[Token],
    triggers: TriggerSet,
    window: int = DEFAULT_WINDOW,
    occurrences: list[Occurrence] | None = None,
) -> tuple[Temporality, list[FiredTrigger]]:
    """Historic iff a historic trigger precedes the mention in scope; else Recent."""
    if occurrences is None:
        occurrences = scan_triggers(tokens, triggers)
    span = _mention_token_range(mention, tokens)
    if span is None:
        return Temporality.RECENT, []
    first, _ = span
    fired: list[FiredTrigger] = []
    for occ in occurrences:
        if occ.category != "historic":
            continue
        distance = first - occ.last
        if 1 <= distance <= window and not _terminator_between(occurrences, occ.last, first):
            fired.append(FiredTrigger(occ.phrase, occ.start, occ.end))
    return (Temporality.HISTORIC if fired else Temporality.RECENT), fired


def attribute_mention(
    mention: Mention,
    tokens: list[Token],
    triggers: TriggerSet,
    window: int = DEFAULT_WINDOW,
    occurrences: list[Occurrence] | None = None,
) -> MentionAttributes:
    """Combined negation + temporality attributes for one mention."""
    if occurrences is None:
        occurrences = scan_triggers(tokens, triggers)
    negated, neg_fired = detect_negation(mention, tokens, triggers, window, occurrences)
    temporality, hist_fired = detect_temporality(mention, tokens, triggers, window, occurrences)
    fired = tuple(sorted(neg_fired + hist_fired, key=lambda f: (f.start, f.end)))
    return MentionAttributes(negated=negated, temporality=temporality, triggers=fired)


def is_relevant(attrs: MentionAttributes) -> bool:
    """A mention counts for the pipeline iff it is recent and not negated."""
    return not attrs.negated and attrs.temporality is Temporality.RECENT
