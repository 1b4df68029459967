"""Entity-based cohorting.

Before clustering, intents are split into product/service cohorts by a
gazetteer of surface forms (the stand-in for a statistical entity tagger).
Intents with no entity mention fall into the "general" cohort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import InputFormatError, InvalidInputError

GENERAL_COHORT = "general"


@dataclass
class EntityGazetteer:
    """Surface form -> canonical entity id, plus the ticker exclusion set."""

    entries: dict[str, str] = field(default_factory=dict)
    tickers: set[str] = field(default_factory=set)
    display_names: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for surface, entity_id in self.entries.items():
            if surface != surface.lower():
                raise InvalidInputError(f"gazetteer surface {surface!r} must be lowercase")
            if not entity_id:
                raise InvalidInputError(f"gazetteer surface {surface!r} has empty entity id")

    def display(self, entity_id: str) -> str:
        return self.display_names.get(entity_id, entity_id)


@dataclass
class CohortAssignment:
    cohort_id: str
    member_indices: list[int]  # positions in the input intent list


def _find_best_match(tokens: list[str], gazetteer: EntityGazetteer) -> str | None:
    """Longest gazetteer phrase present as a contiguous token run.

    Preference order: more tokens, then more characters, then earliest
    position in the text.
    """
    best: tuple[int, int, int] | None = None  # (-token_count, -char_len, position)
    best_id: str | None = None
    n = len(tokens)
    for start in range(n):
        for end in range(start + 1, n + 1):
            surface = " ".join(tokens[start:end])
            entity_id = gazetteer.entries.get(surface)
            if entity_id is None:
                continue
            key = (-(end - start), -len(surface), start)
            if best is None or key < best:
                best = key
                best_id = entity_id
    return best_id


def assign_cohorts(intents: Sequence, gazetteer: EntityGazetteer) -> list[CohortAssignment]:
    """Partition intents into entity cohorts; exhaustive and disjoint.

    ``intents`` can be IntentPhrase objects or anything with a ``text``
    attribute/str. Assignments come back sorted by cohort id.
    """
    buckets: dict[str, list[int]] = {}
    for i, intent in enumerate(intents):
        text = intent.text if hasattr(intent, "text") else str(intent)
        cohort = _find_best_match(text.split(), gazetteer) or GENERAL_COHORT
        buckets.setdefault(cohort, []).append(i)
    return [CohortAssignment(cid, buckets[cid]) for cid in sorted(buckets)]


def load_gazetteer(path) -> EntityGazetteer:
    """Read TSV lines `<surface form>\\t<entity id>\\t<kind:{entity|ticker}>`."""
    entries: dict[str, str] = {}
    tickers: set[str] = set()
    display: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise InputFormatError(
                    f"expected 3 tab-separated fields, got {len(parts)}", path, line_no
                )
            surface, entity_id, kind = (p.strip() for p in parts)
            surface = surface.lower()
            if kind == "ticker":
                tickers.add(surface)
                continue
            if kind != "entity":
                raise InputFormatError(f"unknown kind {kind!r}", path, line_no)
            if not entity_id:
                raise InputFormatError("empty entity id", path, line_no)
            if entries.get(surface, entity_id) != entity_id:
                raise InputFormatError(
                    f"surface {surface!r} maps to both {entries[surface]!r} and {entity_id!r}",
                    path,
                    line_no,
                )
            entries[surface] = entity_id
            display.setdefault(entity_id, surface)
    return EntityGazetteer(entries=entries, tickers=tickers, display_names=display)
