"""Synthetic labeled corpora for desk-scale, end-to-end pipeline tests.

The generator plants K topics with near-duplicate paraphrase variants,
head-heavy counts, a channel mix, and per-topic questions, then records the
ground truth needed to score recovered structure (topic labels per intent
text and per question, plus planted query/question relevance pairs).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from math import comb
from typing import Hashable, Sequence

from .corpus import Channel, Corpus, Interaction, aggregate_by_text
from .errors import InvalidInputError, InvalidParameterError

# Zipf-like count law: count(rank) = max(1, round(scale * rank^-exponent)).
ZIPF_EXPONENT = 1.2
INTENT_COUNT_SCALE = 400
QUESTION_COUNT_SCALE = 60

_FILLERS = ["the", "my", "a", "to", "for", "on", "in"]
_QUESTION_LEADS = [
    "what is",
    "how do i",
    "can i",
    "where do i find",
    "when does",
]
_CONSONANTS = "bcdfglmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 7
    topics: int = 8
    members_per_topic: int = 40
    noise_rate: float = 0.1
    channel_mix: dict[str, float] = field(
        default_factory=lambda: {"search": 0.5, "call": 0.3, "live_chat": 0.2}
    )
    questions_per_topic: int = 4
    # topic index -> gazetteer surface form planted into that topic's phrases
    entity_assignment: dict[int, str] = field(default_factory=dict)
    phrase_tokens: int = 4

    def __post_init__(self):
        if self.topics < 2:
            raise InvalidParameterError(f"need at least 2 topics, got {self.topics}")
        if self.members_per_topic < 1:
            raise InvalidParameterError("members_per_topic must be >= 1")
        if not 0.0 <= self.noise_rate < 1.0:
            raise InvalidParameterError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        total = sum(self.channel_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"channel mix must sum to 1, got {total}")
        for name in self.channel_mix:
            Channel(name)
        if self.phrase_tokens < 2:
            raise InvalidParameterError("phrase_tokens must be >= 2")


@dataclass
class GroundTruth:
    intent_topic: dict[str, str] = field(default_factory=dict)
    question_topic: dict[str, str] = field(default_factory=dict)
    relevance: list[tuple[str, str, bool]] = field(default_factory=list)
    queries: list[str] = field(default_factory=list)

    def topic_partition(self, texts: Sequence[str]) -> list[list[str]]:
        """Group the given intent texts by their true topic label."""
        groups: dict[str, list[str]] = {}
        for t in texts:
            label = self.intent_topic.get(t)
            if label is None:
                raise InvalidInputError(f"text {t!r} has no ground-truth label")
            groups.setdefault(label, []).append(t)
        return [groups[k] for k in sorted(groups)]

    def to_json_dict(self) -> dict:
        return {
            "intent_topic": dict(sorted(self.intent_topic.items())),
            "question_topic": dict(sorted(self.question_topic.items())),
            "relevance": [
                {"query": q, "question": qq, "relevant": rel} for q, qq, rel in self.relevance
            ],
            "queries": list(self.queries),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GroundTruth":
        return cls(
            intent_topic=dict(data.get("intent_topic", {})),
            question_topic=dict(data.get("question_topic", {})),
            relevance=[
                (r["query"], r["question"], bool(r["relevant"]))
                for r in data.get("relevance", [])
            ],
            queries=list(data.get("queries", [])),
        )


def load_ground_truth(path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        return GroundTruth.from_json_dict(json.load(fh))


def _fake_word(rng: random.Random, used: set[str]) -> str:
    while True:
        word = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(rng.randint(2, 3))
        )
        if word not in used:
            used.add(word)
            return word


def _zipf_count(rank: int, scale: int) -> int:
    return max(1, round(scale * (rank + 1) ** -ZIPF_EXPONENT))


def generate_corpus(spec: SyntheticSpec) -> tuple[Corpus, GroundTruth]:
    """Deterministically expand the spec into interactions plus ground truth.

    Each member is its topic's template phrase; with probability
    ``noise_rate`` it receives one token-level edit (synonym swap, stopword
    insertion, or token drop). Counts follow the Zipf-like law, channels the
    configured mix. Call/chat members are wrapped in courtesy sentences so
    the extractive baseline recovers the planted phrase.
    """
    rng = random.Random(spec.seed)
    used_words: set[str] = set()
    truth = GroundTruth()
    interactions: list[Interaction] = []
    channels = sorted(spec.channel_mix)
    mix_weights = [spec.channel_mix[c] for c in channels]
    stopword_like = set(_FILLERS) | {"hello", "thank", "you", "please", "i"}

    for t in range(spec.topics):
        label = f"topic{t}"
        template = [_fake_word(rng, used_words) for _ in range(spec.phrase_tokens)]
        entity = spec.entity_assignment.get(t)
        if entity:
            template = entity.split() + template[len(entity.split()) :]
        synonyms = [_fake_word(rng, used_words) for _ in range(3)]
        phrase = " ".join(template)
        truth.queries.append(phrase)
        truth.intent_topic[phrase] = label

        for m in range(spec.members_per_topic):
            tokens = list(template)
            if rng.random() < spec.noise_rate:
                op = rng.choice(("swap", "insert", "drop"))
                if op == "swap":
                    tokens[rng.randrange(len(tokens))] = rng.choice(synonyms)
                elif op == "insert":
                    tokens.insert(rng.randrange(len(tokens) + 1), rng.choice(_FILLERS))
                elif len(tokens) > 2:
                    del tokens[rng.randrange(len(tokens))]
            text = " ".join(tokens)
            count = _zipf_count(m, INTENT_COUNT_SCALE)
            channel = rng.choices(channels, weights=mix_weights)[0]
            truth.intent_topic[text] = label
            # What the extractive baseline will emit for call/chat members.
            content = [tok for tok in tokens if tok not in stopword_like]
            if content:
                truth.intent_topic[" ".join(content[:6])] = label
            if channel == "search":
                interactions.append(
                    Interaction(
                        id=f"t{t}.search.{m}",
                        channel=Channel.SEARCH,
                        raw_text=text,
                        timestamp=float(m),
                        count=count,
                    )
                )
            else:
                interactions.append(
                    Interaction(
                        id=f"t{t}.{channel}.{m}",
                        channel=Channel(channel),
                        raw_text=f"hello . {text} . thank you",
                        timestamp=float(m),
                        count=count,
                    )
                )

        leads = _QUESTION_LEADS[: max(1, spec.questions_per_topic)]
        for qi in range(spec.questions_per_topic):
            lead = leads[qi % len(leads)]
            q_text = f"{lead} {phrase}"
            truth.question_topic[q_text] = label
            truth.relevance.append((phrase, q_text, True))
            interactions.append(
                Interaction(
                    id=f"t{t}.q{qi}",
                    channel=Channel.VIRTUAL_ASSISTANT,
                    raw_text=q_text + "?",
                    timestamp=float(qi),
                    count=_zipf_count(qi, QUESTION_COUNT_SCALE),
                )
            )

    # Cross-topic negatives for the relevance set.
    for t in range(spec.topics):
        other = (t + 1) % spec.topics
        query = truth.queries[t]
        other_question = f"{_QUESTION_LEADS[0]} {truth.queries[other]}"
        truth.relevance.append((query, other_question, False))

    # Search rows arrive pre-aggregated per distinct query text.
    search = aggregate_by_text([it for it in interactions if it.channel == Channel.SEARCH])
    rest = [it for it in interactions if it.channel != Channel.SEARCH]
    ordered = sorted(search + rest, key=lambda it: it.id)
    return Corpus(ordered), truth


def adjusted_rand_index(
    pred: Sequence[Sequence[Hashable]], truth: Sequence[Sequence[Hashable]]
) -> float:
    """Chance-adjusted agreement between two partitions of the same universe."""

    def as_labels(partition, name):
        labels: dict[Hashable, int] = {}
        for gi, group in enumerate(partition):
            for el in group:
                if el in labels:
                    raise InvalidInputError(f"{name} partition repeats element {el!r}")
                labels[el] = gi
        return labels

    pred_labels = as_labels(pred, "pred")
    truth_labels = as_labels(truth, "truth")
    if set(pred_labels) != set(truth_labels):
        raise InvalidInputError("partitions cover different element universes")
    n = len(pred_labels)
    if n < 2:
        return 1.0

    contingency: dict[tuple[int, int], int] = {}
    for el, pl in pred_labels.items():
        key = (pl, truth_labels[el])
        contingency[key] = contingency.get(key, 0) + 1
    sum_ij = sum(comb(v, 2) for v in contingency.values())
    a_sizes: dict[int, int] = {}
    b_sizes: dict[int, int] = {}
    for pl, tl in contingency:
        a_sizes[pl] = a_sizes.get(pl, 0) + contingency[(pl, tl)]
        b_sizes[tl] = b_sizes.get(tl, 0) + contingency[(pl, tl)]
    sum_a = sum(comb(v, 2) for v in a_sizes.values())
    sum_b = sum(comb(v, 2) for v in b_sizes.values())
    expected = sum_a * sum_b / comb(n, 2)
    denom = (sum_a + sum_b) / 2.0 - expected
    if denom == 0.0:
        return 1.0
    return (sum_ij - expected) / denom
