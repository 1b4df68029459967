"""Raw interaction ingestion and channel-specific text normalization.

Interactions arrive from four channels (search, call, live chat, virtual
assistant) as JSONL. Cleaning is rule-driven: system-message and masked-token
removal, contraction and acronym expansion, non-informative prefix stripping,
whitespace collapsing. Rules live in an editable TOML file; a default rule
set ships with the package.
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Iterable, Iterator, Sequence

from .errors import InputFormatError, InvalidInputError, InvalidParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class Channel(str, Enum):
    SEARCH = "search"
    CALL = "call"
    LIVE_CHAT = "live_chat"
    VIRTUAL_ASSISTANT = "virtual_assistant"


def parse_channel(value: str) -> Channel:
    try:
        return Channel(value)
    except ValueError:
        valid = ", ".join(c.value for c in Channel)
        raise InvalidInputError(f"unknown channel {value!r} (expected one of: {valid})")


@dataclass(frozen=True)
class Interaction:
    """One customer contact. ``count`` aggregates identical occurrences."""

    id: str
    channel: Channel
    raw_text: str
    normalized_text: str = ""
    timestamp: float = 0.0
    count: int = 1
    summary: str | None = None  # reference summary, training-style data only

    def __post_init__(self):
        if self.count < 1:
            raise InvalidInputError(f"interaction {self.id!r}: count must be >= 1")

    @property
    def text(self) -> str:
        """Normalized text when available, raw text otherwise."""
        return self.normalized_text if self.normalized_text else self.raw_text


class Corpus:
    """Immutable, ordered collection of interactions with unique ids."""

    def __init__(self, interactions: Iterable[Interaction]):
        self.interactions: tuple[Interaction, ...] = tuple(interactions)
        seen: set[str] = set()
        for it in self.interactions:
            if it.id in seen:
                raise InvalidInputError(f"duplicate interaction id {it.id!r}")
            seen.add(it.id)

    def __len__(self) -> int:
        return len(self.interactions)

    def __iter__(self) -> Iterator[Interaction]:
        return iter(self.interactions)

    def by_channel(self, channel: Channel) -> list[Interaction]:
        return [it for it in self.interactions if it.channel == channel]

    def channel_totals(self) -> dict[Channel, tuple[int, int]]:
        """Per channel: (total volume = sum of counts, distinct texts)."""
        volume: dict[Channel, int] = {}
        texts: dict[Channel, set[str]] = {}
        for it in self.interactions:
            volume[it.channel] = volume.get(it.channel, 0) + it.count
            texts.setdefault(it.channel, set()).add(it.text)
        return {ch: (volume[ch], len(texts[ch])) for ch in volume}


# Ordered suffix rules: (suffix, replacement, minimum stem length after cut).
# "s" strips only for tokens longer than 3 characters, hence stem >= 3.
DEFAULT_SUFFIX_RULES: tuple[tuple[str, str, int], ...] = (
    ("ies", "y", 0),
    ("sses", "ss", 0),
    ("s", "", 3),
    ("ing", "", 3),
    ("ed", "", 3),
)


@dataclass
class NormalizationRules:
    contraction_map: dict[str, str] = field(default_factory=dict)
    acronym_map: dict[str, str] = field(default_factory=dict)
    masked_token_patterns: list[str] = field(default_factory=list)
    system_message_patterns: list[str] = field(default_factory=list)
    noninformative_prefixes: list[str] = field(default_factory=list)
    stopwords: set[str] = field(default_factory=set)
    lemma_dictionary: dict[str, str] = field(default_factory=dict)
    lemma_suffix_rules: tuple[tuple[str, str, int], ...] = DEFAULT_SUFFIX_RULES

    def __post_init__(self):
        for name, mapping in (
            ("contractions", self.contraction_map),
            ("acronyms", self.acronym_map),
            ("lemmas", self.lemma_dictionary),
        ):
            for key, value in mapping.items():
                if key != key.lower():
                    raise InvalidParameterError(f"{name}: key {key!r} must be lowercase")
                if key == value:
                    raise InvalidParameterError(f"{name}: key {key!r} maps to itself")
        self._compiled_masked = _compile_patterns(self.masked_token_patterns)
        self._compiled_system = _compile_patterns(self.system_message_patterns)
        self._contraction_re = _word_map_regex(self.contraction_map)
        self._acronym_re = _word_map_regex(self.acronym_map)
        # Longest prefix first so "customer asked for help" wins over "customer asked".
        self._prefixes = sorted(self.noninformative_prefixes, key=len, reverse=True)


def _compile_patterns(patterns: Sequence[str]) -> list[re.Pattern]:
    try:
        return [re.compile(p) for p in patterns]
    except re.error as exc:
        raise InvalidParameterError(f"bad removal pattern: {exc}")


def _word_map_regex(mapping: dict[str, str]) -> re.Pattern | None:
    """Whole-token matcher over the map's keys.

    Token boundaries are any character outside [a-z0-9'], so keys match when
    standing alone or flanked by punctuation, but never inside a longer word
    ("ira" must not fire inside "miracle").
    """
    if not mapping:
        return None
    keys = sorted(mapping, key=len, reverse=True)
    body = "|".join(re.escape(k) for k in keys)
    return re.compile(r"(?<![a-z0-9'])(?:" + body + r")(?![a-z0-9'])")


_WS_RE = re.compile(r"\s+")
_APOSTROPHES = str.maketrans({"‘": "'", "’": "'", "ʼ": "'"})


def _remove_all(text: str, patterns: list[re.Pattern]) -> str:
    # Re-run until stable so overlapping removals cannot leave a match behind.
    changed = True
    while changed:
        changed = False
        for pat in patterns:
            text, n = pat.subn(" ", text)
            changed = changed or n > 0
    return text


def _expand(text: str, regex: re.Pattern | None, mapping: dict[str, str]) -> str:
    if regex is None:
        return text
    return regex.sub(lambda m: mapping[m.group(0)], text)


def _strip_prefixes(text: str, prefixes: list[str]) -> str:
    changed = True
    while changed:
        changed = False
        stripped = text.lstrip()
        for prefix in prefixes:
            if stripped == prefix:
                return ""
            if stripped.startswith(prefix + " "):
                text = stripped[len(prefix) + 1 :]
                changed = True
                break
    return text


def normalize_text(text: str, rules: NormalizationRules) -> str:
    """Apply the full cleaning sequence; idempotent under the shipped rules.

    Fixed order: lowercase, system-message removal, masked-token removal,
    contraction expansion, acronym expansion, prefix stripping, whitespace
    collapse, trim.
    """
    t = text.lower().translate(_APOSTROPHES)
    t = _remove_all(t, rules._compiled_system)
    t = _remove_all(t, rules._compiled_masked)
    t = _expand(t, rules._contraction_re, rules.contraction_map)
    t = _expand(t, rules._acronym_re, rules.acronym_map)
    t = _strip_prefixes(t, rules._prefixes)
    return _WS_RE.sub(" ", t).strip()


_PUNCT_SPLIT_RE = re.compile(r"([?.!,])")
PUNCT_TOKENS = frozenset({"?", ".", "!", ","})


def tokenize(text: str) -> list[str]:
    """Whitespace tokens with {? . ! ,} separated out as standalone tokens."""
    return _PUNCT_SPLIT_RE.sub(r" \1 ", text).split()


def lemmatize(token: str, rules: NormalizationRules) -> str:
    """Dictionary lookup first, then the first matching ordered suffix rule."""
    hit = rules.lemma_dictionary.get(token)
    if hit is not None:
        return hit
    for suffix, repl, min_stem in rules.lemma_suffix_rules:
        if token.endswith(suffix) and len(token) - len(suffix) >= min_stem:
            return token[: len(token) - len(suffix)] + repl
    return token


def filter_search_tail(
    search_interactions: Sequence[Interaction], min_count: int
) -> tuple[list[Interaction], float]:
    """Keep queries searched at least ``min_count`` times.

    Returns (retained, retained-volume fraction). The fraction of an empty
    input is defined as 1.0 so downstream report math never divides by zero.
    """
    if min_count < 1:
        raise InvalidParameterError(f"min_count must be >= 1, got {min_count}")
    for it in search_interactions:
        if it.channel != Channel.SEARCH:
            raise InvalidInputError(f"interaction {it.id!r} is not from the search channel")
    total = sum(it.count for it in search_interactions)
    retained = [it for it in search_interactions if it.count >= min_count]
    if total == 0:
        return retained, 1.0
    return retained, sum(it.count for it in retained) / total


def remove_ticker_queries(interactions: Sequence[Interaction], gazetteer) -> list[Interaction]:
    """Drop interactions whose entire text is a ticker or listed-entity name."""
    return [it for it in interactions if it.text not in gazetteer.tickers]


def aggregate_by_text(interactions: Sequence[Interaction]) -> list[Interaction]:
    """Merge interactions with identical text, summing counts.

    Used to aggregate distinct search queries; keeps the first id and earliest
    timestamp per text. Idempotent on already-aggregated input.
    """
    merged: dict[str, Interaction] = {}
    for it in interactions:
        prev = merged.get(it.text)
        if prev is None:
            merged[it.text] = it
        else:
            merged[it.text] = replace(
                prev,
                count=prev.count + it.count,
                timestamp=min(prev.timestamp, it.timestamp),
            )
    return list(merged.values())


def normalize_corpus(corpus: Corpus, rules: NormalizationRules) -> Corpus:
    out = []
    for it in corpus:
        normalized = normalize_text(it.raw_text, rules)
        summary = normalize_text(it.summary, rules) if it.summary is not None else None
        out.append(replace(it, normalized_text=normalized, summary=summary))
    return Corpus(out)


# --- JSONL interchange ------------------------------------------------------

def read_interactions(path) -> Corpus:
    """Read interactions from JSONL: {id, channel, text, ts, count?, summary?}."""
    interactions = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"bad JSON: {exc.msg}", path, line_no)
            try:
                interactions.append(
                    Interaction(
                        id=str(rec["id"]),
                        channel=parse_channel(rec["channel"]),
                        raw_text=str(rec["text"]),
                        normalized_text=str(rec.get("normalized_text", "")),
                        timestamp=float(rec.get("ts", 0.0)),
                        count=int(rec.get("count", 1)),
                        summary=rec.get("summary"),
                    )
                )
            except KeyError as exc:
                raise InputFormatError(f"missing field {exc.args[0]!r}", path, line_no)
            except (InvalidInputError, TypeError, ValueError) as exc:
                raise InputFormatError(str(exc), path, line_no)
    try:
        return Corpus(interactions)
    except InvalidInputError as exc:
        raise InputFormatError(str(exc), path)


def write_interactions(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for it in corpus:
            rec = {
                "id": it.id,
                "channel": it.channel.value,
                "text": it.raw_text,
                "normalized_text": it.normalized_text,
                "ts": it.timestamp,
                "count": it.count,
            }
            if it.summary is not None:
                rec["summary"] = it.summary
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=False) + "\n")


# --- Rules file -------------------------------------------------------------

def load_rules(path=None) -> NormalizationRules:
    """Load normalization rules from TOML; falls back to the packaged defaults."""
    if path is None:
        source = resources.files("intentmine.data").joinpath("rules.toml")
        data = tomllib.loads(source.read_text(encoding="utf-8"))
    else:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise InputFormatError(f"bad rules file: {exc}", path)
    patterns = data.get("patterns", {})
    prefixes = data.get("prefixes", {})
    stopwords = data.get("stopwords", {})
    try:
        return NormalizationRules(
            contraction_map=dict(data.get("contractions", {})),
            acronym_map=dict(data.get("acronyms", {})),
            masked_token_patterns=list(patterns.get("masked_tokens", [])),
            system_message_patterns=list(patterns.get("system_messages", [])),
            noninformative_prefixes=list(prefixes.get("strip", [])),
            stopwords=set(stopwords.get("words", [])),
            lemma_dictionary=dict(data.get("lemmas", {})),
        )
    except InvalidParameterError as exc:
        raise InputFormatError(str(exc), path or "<default rules>")
