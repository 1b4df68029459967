"""Short intent phrases from verbose call/chat interactions.

The production system this mirrors used an abstractive summarizer to compress
transcripts into search-query-like intents. Here the summarizer sits behind
an interface: the shipped implementation is a deterministic extractive
baseline, and externally generated summaries can be plugged in via JSONL
without code changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, Sequence

from .corpus import (
    Channel,
    Corpus,
    Interaction,
    NormalizationRules,
    PUNCT_TOKENS,
    normalize_text,
    tokenize,
)
from .errors import InputFormatError, InvalidParameterError

DEFAULT_MAX_INTENT_TOKENS = 6
DEFAULT_MAX_TRANSCRIPT_TOKENS = 450

_SPOKEN_CHANNELS = (Channel.CALL, Channel.LIVE_CHAT)


@dataclass(frozen=True)
class IntentPhrase:
    text: str
    source_interaction_id: str
    count: int


def make_intent_phrase(
    text: str, source_id: str, count: int, max_tokens: int = DEFAULT_MAX_INTENT_TOKENS
) -> IntentPhrase:
    """Build a phrase, truncating to the first ``max_tokens`` tokens."""
    tokens = text.split()
    return IntentPhrase(
        text=" ".join(tokens[:max_tokens]), source_interaction_id=source_id, count=count
    )


class IntentExtractor(Protocol):
    """Turns one normalized call/chat interaction into a short intent, or nothing."""

    def extract(self, interaction: Interaction) -> IntentPhrase | None: ...


def filter_eligible_calls(
    corpus: Corpus,
    max_transcript_tokens: int = DEFAULT_MAX_TRANSCRIPT_TOKENS,
    max_summary_tokens: int = DEFAULT_MAX_INTENT_TOKENS,
) -> Corpus:
    """Drop call/chat interactions that are too long to summarize.

    Interactions from other channels pass through untouched. When a reference
    summary is attached (training-style data) it must also fit within
    ``max_summary_tokens``.
    """
    if max_transcript_tokens < 1 or max_summary_tokens < 1:
        raise InvalidParameterError("token limits must be >= 1")
    kept = []
    for it in corpus:
        if it.channel not in _SPOKEN_CHANNELS:
            kept.append(it)
            continue
        if len(tokenize(it.text)) > max_transcript_tokens:
            continue
        if it.summary is not None and len(tokenize(it.summary)) > max_summary_tokens:
            continue
        kept.append(it)
    return Corpus(kept)


def _split_sentences(text: str) -> list[str]:
    sentences = []
    current: list[str] = []
    for ch in text:
        if ch in ".?!":
            s = "".join(current).strip()
            if s:
                sentences.append(s)
            current = []
        else:
            current.append(ch)
    s = "".join(current).strip()
    if s:
        sentences.append(s)
    return sentences


def extract_intent_baseline(
    interaction: Interaction,
    stopwords: set[str],
    max_intent_tokens: int = DEFAULT_MAX_INTENT_TOKENS,
) -> IntentPhrase | None:
    """Pick the most content-dense sentence near the first third of the text.

    Sentence score = content tokens / (1 + |position - n/3|) with 0-based
    positions; ties go to the earliest sentence. The phrase is the best
    sentence's first ``max_intent_tokens`` content tokens in original order.
    Returns None when the interaction has no content tokens at all.
    """
    sentences = _split_sentences(interaction.text)
    if not sentences:
        return None
    target = len(sentences) / 3.0
    best_score = 0.0
    best_content: list[str] | None = None
    for pos, sentence in enumerate(sentences):
        content = [
            t for t in tokenize(sentence) if t not in stopwords and t not in PUNCT_TOKENS
        ]
        score = len(content) / (1.0 + abs(pos - target))
        if score > best_score:
            best_score = score
            best_content = content
    if best_content is None:
        return None
    return make_intent_phrase(
        " ".join(best_content), interaction.id, interaction.count, max_intent_tokens
    )


@dataclass(frozen=True)
class BaselineExtractor:
    stopwords: frozenset[str]
    max_intent_tokens: int = DEFAULT_MAX_INTENT_TOKENS

    def extract(self, interaction: Interaction) -> IntentPhrase | None:
        return extract_intent_baseline(
            interaction, set(self.stopwords), self.max_intent_tokens
        )


@dataclass(frozen=True)
class ExternalSummaryExtractor:
    """Serves pre-computed summaries keyed by interaction id.

    Interactions without a summary yield None and contribute no intent; run a
    real summarizer offline and feed its output here.
    """

    summaries: dict  # interaction id -> normalized intent text
    max_intent_tokens: int = DEFAULT_MAX_INTENT_TOKENS

    def extract(self, interaction: Interaction) -> IntentPhrase | None:
        text = self.summaries.get(interaction.id)
        if not text:
            return None
        return make_intent_phrase(text, interaction.id, interaction.count, self.max_intent_tokens)


def load_external_summaries(path, rules: NormalizationRules) -> dict[str, str]:
    """Read JSONL of {interaction_id, intent_text}; texts are normalized here."""
    summaries: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                summaries[str(rec["interaction_id"])] = normalize_text(
                    str(rec["intent_text"]), rules
                )
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"bad JSON: {exc.msg}", path, line_no)
            except KeyError as exc:
                raise InputFormatError(f"missing field {exc.args[0]!r}", path, line_no)
    return summaries


def extract_intents(corpus: Corpus, extractor: IntentExtractor) -> list[IntentPhrase]:
    """Run the extractor over every call/chat interaction."""
    phrases = []
    for it in corpus:
        if it.channel not in _SPOKEN_CHANNELS:
            continue
        phrase = extractor.extract(it)
        if phrase is not None and phrase.text:
            phrases.append(phrase)
    return phrases


def unify_intents(
    search_queries: Sequence[Interaction],
    extracted: Sequence[IntentPhrase],
    max_intent_tokens: int = DEFAULT_MAX_INTENT_TOKENS,
) -> list[IntentPhrase]:
    """Merge search queries and extracted phrases into one intent set.

    Identical texts merge with counts summed (keeping the smallest source id);
    the result is sorted by count descending, then text. Total count is
    conserved.
    """
    merged: dict[str, tuple[int, str]] = {}
    converted = [
        make_intent_phrase(q.text, q.id, q.count, max_intent_tokens) for q in search_queries
    ]
    for phrase in list(converted) + list(extracted):
        if not phrase.text:
            continue
        count, source = merged.get(phrase.text, (0, phrase.source_interaction_id))
        merged[phrase.text] = (
            count + phrase.count,
            min(source, phrase.source_interaction_id),
        )
    out = [
        IntentPhrase(text=t, source_interaction_id=src, count=c)
        for t, (c, src) in merged.items()
    ]
    out.sort(key=lambda p: (-p.count, p.text))
    return out
