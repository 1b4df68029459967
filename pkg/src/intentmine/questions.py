"""Question mining and query-to-question mapping.

Questions are detected with documented rules, aggregated under light
normalization, then matched to search queries over two channels: TF-IDF
cosine (lexical) and sentence-vector cosine (semantic). Near-duplicate
candidates collapse to their highest-frequency cluster head.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import (
    Channel,
    NormalizationRules,
    PUNCT_TOKENS,
    _expand,
    lemmatize,
    parse_channel,
    tokenize,
)
from .cluster import agglomerate
from .embed import (
    TfidfModel,
    VectorProvider,
    cosine_similarity,
    tfidf_cosine_scores,
    tfidf_transform,
    tfidf_transform_many,
)
from .errors import InputFormatError, InvalidInputError, InvalidParameterError
from .util import fmt_float

DEFAULT_LEXICAL_THRESHOLD = 0.89
DEFAULT_SEMANTIC_THRESHOLD = 0.86
DEFAULT_DEDUP_THRESHOLD = 0.90

QUESTION_LEAD_WORDS = frozenset(
    "who what when where why how which can could should would will "
    "do does did is are was were may am".split()
)


@dataclass(frozen=True)
class Question:
    text: str
    frequency: int
    channels: frozenset[Channel] = frozenset()
    curated: bool = False


def detect_question(text: str) -> bool:
    """True iff the text ends with '?' or opens with an interrogative/aux word."""
    stripped = text.strip()
    if not stripped:
        return False
    if stripped.endswith("?"):
        return True
    return stripped.split(None, 1)[0] in QUESTION_LEAD_WORDS


def normalize_question(text: str, rules: NormalizationRules) -> str:
    """Lowercase, strip trailing {? . !}, expand acronyms, collapse whitespace."""
    t = text.lower().strip()
    while t and t[-1] in "?.!":
        t = t[:-1].rstrip()
    t = _expand(t, rules._acronym_re, rules.acronym_map)
    return " ".join(t.split())


def aggregate_questions(
    texts: Sequence[tuple], rules: NormalizationRules
) -> list[Question]:
    """Group normalized question texts; frequency sums counts (default 1).

    Items are (text, channel) or (text, channel, count). Output is sorted by
    frequency descending, then text.
    """
    freq: dict[str, int] = {}
    channels: dict[str, set[Channel]] = {}
    for item in texts:
        text, channel = item[0], item[1]
        count = int(item[2]) if len(item) > 2 else 1
        norm = normalize_question(text, rules)
        if not norm:
            continue
        freq[norm] = freq.get(norm, 0) + count
        channels.setdefault(norm, set()).add(channel)
    out = [
        Question(text=t, frequency=f, channels=frozenset(channels[t]))
        for t, f in freq.items()
    ]
    out.sort(key=lambda q: (-q.frequency, q.text))
    return out


def merge_curated(questions: Sequence[Question], curated: Sequence[Question]) -> list[Question]:
    """Fold curated questions in; colliding texts sum frequency and keep curated=True."""
    merged: dict[str, Question] = {q.text: q for q in questions}
    for q in curated:
        prev = merged.get(q.text)
        if prev is None:
            merged[q.text] = Question(q.text, max(q.frequency, 1), q.channels, curated=True)
        else:
            merged[q.text] = Question(
                q.text,
                prev.frequency + max(q.frequency, 1),
                prev.channels | q.channels,
                curated=True,
            )
    out = list(merged.values())
    out.sort(key=lambda q: (-q.frequency, q.text))
    return out


@dataclass
class Candidate:
    """One mapped (query, question) pair with its per-channel evidence."""

    question: Question
    score: float
    source: str  # lexical | semantic | both
    lexical_score: float | None = None
    semantic_score: float | None = None
    semantic_vector: np.ndarray | None = None
    lexical_vector: np.ndarray | None = None


def lexical_tokens(text: str, rules: NormalizationRules) -> list[str]:
    """Tokens for the TF-IDF channel: stopword-free and lemmatized."""
    return [
        lemmatize(t, rules)
        for t in tokenize(text)
        if t not in rules.stopwords and t not in PUNCT_TOKENS
    ]


class QuestionMatcher:
    """Precomputed similarity index over a fixed question set."""

    def __init__(
        self,
        questions: Sequence[Question],
        rules: NormalizationRules,
        semantic_provider: VectorProvider | None = None,
        lexical_model: TfidfModel | None = None,
    ):
        from .embed import fit_tfidf

        self.questions = list(questions)
        self.rules = rules
        self.provider = semantic_provider
        docs = [lexical_tokens(q.text, rules) for q in self.questions]
        if lexical_model is None and self.questions:
            lexical_model = fit_tfidf(docs)
        self.model = lexical_model
        self._lex_matrix = (
            tfidf_transform_many(self.model, docs) if self.model is not None else None
        )
        self._sem_vectors: list[np.ndarray | None] = [
            semantic_provider.vector(q.text) if semantic_provider is not None else None
            for q in self.questions
        ]

    def map_query(
        self,
        query: str,
        lexical_threshold: float = DEFAULT_LEXICAL_THRESHOLD,
        semantic_threshold: float = DEFAULT_SEMANTIC_THRESHOLD,
    ) -> list[Candidate]:
        """Union of lexical and semantic candidates; score is the max channel score."""
        if not self.questions:
            return []
        lex_scores = np.zeros(len(self.questions))
        if self.model is not None:
            q_row = tfidf_transform(self.model, lexical_tokens(query, self.rules))
            lex_scores = tfidf_cosine_scores(self._lex_matrix, q_row)
        sem_scores = np.zeros(len(self.questions))
        have_sem = np.zeros(len(self.questions), dtype=bool)
        if self.provider is not None:
            q_vec = self.provider.vector(query)
            if q_vec is not None:
                for i, vec in enumerate(self._sem_vectors):
                    if vec is not None:
                        sem_scores[i] = cosine_similarity(q_vec, vec)
                        have_sem[i] = True
        candidates = []
        for i, question in enumerate(self.questions):
            lex_hit = lex_scores[i] >= lexical_threshold
            sem_hit = have_sem[i] and sem_scores[i] >= semantic_threshold
            if not lex_hit and not sem_hit:
                continue
            source = "both" if (lex_hit and sem_hit) else ("lexical" if lex_hit else "semantic")
            score = max(
                lex_scores[i] if lex_hit else float("-inf"),
                sem_scores[i] if sem_hit else float("-inf"),
            )
            candidates.append(
                Candidate(
                    question=question,
                    score=float(score),
                    source=source,
                    lexical_score=float(lex_scores[i]) if lex_hit else None,
                    semantic_score=float(sem_scores[i]) if sem_hit else None,
                    semantic_vector=self._sem_vectors[i],
                    lexical_vector=(
                        None
                        if self._lex_matrix is None
                        else self._lex_matrix[i].toarray().ravel()
                    ),
                )
            )
        candidates.sort(key=lambda c: (-c.score, c.question.text))
        return candidates


def map_query_to_questions(
    query: str,
    questions: Sequence[Question],
    lexical_model: TfidfModel | None,
    semantic_provider: VectorProvider | None,
    thresholds: tuple[float, float] = (DEFAULT_LEXICAL_THRESHOLD, DEFAULT_SEMANTIC_THRESHOLD),
    rules: NormalizationRules | None = None,
) -> list[Candidate]:
    """One-shot convenience wrapper around QuestionMatcher."""
    if rules is None:
        rules = NormalizationRules()
    matcher = QuestionMatcher(questions, rules, semantic_provider, lexical_model)
    return matcher.map_query(query, thresholds[0], thresholds[1])


def dedup_to_cluster_heads(
    candidates: Sequence[Candidate],
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD,
    channel: str = "semantic",
) -> list[Candidate]:
    """Collapse near-duplicate candidates to their cluster heads.

    Candidates are agglomerated on their semantic vectors by default
    (``channel="lexical"`` switches to TF-IDF rows); a missing vector makes a
    candidate its own cluster. Within each group the head is the
    highest-frequency question, ties by text. Heads come back ordered by
    (frequency desc, score desc, text).
    """
    if not 0.0 < dedup_threshold <= 1.0:
        raise InvalidParameterError(f"dedup threshold must be in (0, 1], got {dedup_threshold}")
    if channel not in ("semantic", "lexical"):
        raise InvalidParameterError(f"dedup channel must be semantic or lexical, got {channel!r}")
    if not candidates:
        return []

    def vec_of(c: Candidate) -> np.ndarray | None:
        return c.semantic_vector if channel == "semantic" else c.lexical_vector

    dim = 1
    for c in candidates:
        if vec_of(c) is not None:
            dim = len(vec_of(c))
            break
    vectors = [vec_of(c) if vec_of(c) is not None else np.zeros(dim) for c in candidates]
    weights = [c.question.frequency for c in candidates]
    groups = agglomerate(vectors, weights, dedup_threshold)
    heads = []
    for group in groups:
        head = min(group, key=lambda i: (-candidates[i].question.frequency, candidates[i].question.text))
        heads.append(candidates[head])
    heads.sort(key=lambda c: (-c.question.frequency, -c.score, c.question.text))
    return heads


# --- Precision evaluation -----------------------------------------------------

@dataclass(frozen=True)
class JudgedPair:
    query: str
    question: str
    relevant: bool
    score: float
    source: str


DEFAULT_PRECISION_THRESHOLDS = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
PRECISION_SOURCES = ("lexical", "semantic")


@dataclass
class PrecisionTable:
    thresholds: tuple[float, ...]
    sources: tuple[str, ...]
    cells: dict[tuple[float, str], float | None] = field(default_factory=dict)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["threshold"] + [f"precision_{s}_pct" for s in self.sources])
        for t in self.thresholds:
            row = [fmt_float(t)]
            for s in self.sources:
                cell = self.cells[(t, s)]
                row.append("n/a" if cell is None else f"{cell:.2f}")
            writer.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        lines = ["Precision by similarity threshold (%)", ""]
        header = f"{'threshold':>9} " + " ".join(f"{s:>10}" for s in self.sources)
        lines.append(header)
        for t in self.thresholds:
            cells = []
            for s in self.sources:
                cell = self.cells[(t, s)]
                cells.append(f"{'n/a':>10}" if cell is None else f"{cell:>10.2f}")
            lines.append(f"{fmt_float(t):>9} " + " ".join(cells))
        return "\n".join(lines) + "\n"


def evaluate_precision(
    judged: Sequence[JudgedPair],
    thresholds: Sequence[float] = DEFAULT_PRECISION_THRESHOLDS,
    sources: Sequence[str] = PRECISION_SOURCES,
) -> PrecisionTable:
    """Precision = relevant-and-retained / retained, per source and threshold.

    Pairs judged on both channels (source "both") count toward every source
    column. Cells with nothing retained report None ("n/a").
    """
    if not judged:
        raise InvalidInputError("evaluate_precision requires at least one judged pair")
    table = PrecisionTable(tuple(thresholds), tuple(sources))
    for t in thresholds:
        for s in sources:
            pool = [p for p in judged if (p.source == s or p.source == "both") and p.score >= t]
            if not pool:
                table.cells[(t, s)] = None
            else:
                table.cells[(t, s)] = 100.0 * sum(p.relevant for p in pool) / len(pool)
    return table


# --- Interchange formats --------------------------------------------------------

def write_questions(path, questions: Sequence[Question]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in questions:
            rec = {
                "text": q.text,
                "frequency": q.frequency,
                "channels": sorted(c.value for c in q.channels),
                "curated": q.curated,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_questions(path) -> list[Question]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    Question(
                        text=str(rec["text"]),
                        frequency=int(rec.get("frequency", 1)),
                        channels=frozenset(
                            parse_channel(c) for c in rec.get("channels", [])
                        ),
                        curated=bool(rec.get("curated", False)),
                    )
                )
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"bad JSON: {exc.msg}", path, line_no)
            except (KeyError, ValueError, InvalidInputError) as exc:
                raise InputFormatError(str(exc), path, line_no)
    return out


MAPPING_CSV_HEADER = ["query", "question", "score", "source", "frequency"]


def write_mapping_csv(path, rows: Sequence[tuple[str, Candidate]]) -> None:
    """Rows of (query, head candidate) in the emitted order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MAPPING_CSV_HEADER)
        for query, cand in rows:
            writer.writerow(
                [
                    query,
                    cand.question.text,
                    fmt_float(cand.score),
                    cand.source,
                    cand.question.frequency,
                ]
            )


def read_judgments(path) -> list[JudgedPair]:
    """CSV `query,question,relevant(0|1),score,source` with header row."""
    pairs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, 1):
            if line_no == 1 and row and row[0].lower() == "query":
                continue
            if not row:
                continue
            if len(row) != 5:
                raise InputFormatError(f"expected 5 columns, got {len(row)}", path, line_no)
            try:
                pairs.append(
                    JudgedPair(
                        query=row[0],
                        question=row[1],
                        relevant=bool(int(row[2])),
                        score=float(row[3]),
                        source=row[4],
                    )
                )
            except ValueError as exc:
                raise InputFormatError(str(exc), path, line_no)
    return pairs
