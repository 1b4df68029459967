"""Vector representations and transforms.

Four sources of vectors feed the pipeline:

* TF-IDF over unigrams and bigrams — the lexical similarity channel.
* A seeded signed-hashing embedder — deterministic stand-in for pretrained
  sentence encoders, used in tests and offline runs.
* An external vector store loaded from a TSV file — how real sentence
  embeddings (e.g. 768-dim transformer vectors) enter the pipeline.
* Standardization + PCA to reduce external vectors to a manageable size.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy import sparse

from .errors import InputFormatError, InvalidInputError, InvalidParameterError

DEFAULT_HASH_DIM = 4096
DEFAULT_HASH_SEED = 92821


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """a.b / (|a||b|); defined as 0.0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def as_matrix(vectors: Sequence[np.ndarray], context: str) -> np.ndarray:
    """Stack vectors into an (n, d) float matrix; ragged dims are an input error."""
    try:
        X = np.asarray(vectors, dtype=np.float64)
    except ValueError:
        raise InvalidInputError(f"{context}: vectors have inconsistent dimensions")
    if X.ndim != 2:
        raise InvalidInputError(f"{context}: expected a sequence of equal-length vectors")
    return X


def pairwise_cosine_distance(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of d = 1 - cosine, clamped to [0, 2].

    Values within 1e-12 of zero are snapped to exactly 0 so that duplicate
    vectors compare as exact duplicates despite float rounding. Zero vectors
    have cosine 0 with everything, hence distance 1.
    """
    X = as_matrix(vectors, "pairwise distance")
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    N = X / safe[:, None]
    D = 1.0 - N @ N.T
    np.maximum(D, 0.0, out=D)
    D[D <= 1e-12] = 0.0
    return D


# --- TF-IDF ------------------------------------------------------------------

def ngrams(tokens: Sequence[str]) -> list[str]:
    """Unigrams plus adjacent bigrams (space-joined)."""
    out = list(tokens)
    out.extend(f"{tokens[i]} {tokens[i + 1]}" for i in range(len(tokens) - 1))
    return out


@dataclass
class TfidfModel:
    """Fitted TF-IDF weights over a unigram+bigram vocabulary."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int

    @property
    def dim(self) -> int:
        return len(self.vocabulary)


def fit_tfidf(docs: Sequence[Sequence[str]]) -> TfidfModel:
    """Fit idf(t) = ln((1+N)/(1+df(t))) + 1 over unigrams and bigrams.

    Tokens are expected lowercase, stopword-free, and lemmatized. The
    vocabulary is sorted so fitting is independent of document order.
    """
    if not docs:
        raise InvalidInputError("cannot fit TF-IDF on an empty document list")
    df: dict[str, int] = {}
    for doc in docs:
        for gram in set(ngrams(doc)):
            df[gram] = df.get(gram, 0) + 1
    vocabulary = {gram: i for i, gram in enumerate(sorted(df))}
    n = len(docs)
    idf = np.empty(len(vocabulary))
    for gram, i in vocabulary.items():
        idf[i] = math.log((1 + n) / (1 + df[gram])) + 1.0
    return TfidfModel(vocabulary=vocabulary, idf=idf, doc_count=n)


def tfidf_transform(model: TfidfModel, doc: Sequence[str]) -> sparse.csr_matrix:
    """L2-normalized (count x idf) row vector; unseen n-grams contribute nothing."""
    counts: dict[int, float] = {}
    for gram in ngrams(doc):
        col = model.vocabulary.get(gram)
        if col is not None:
            counts[col] = counts.get(col, 0.0) + 1.0
    if not counts:
        return sparse.csr_matrix((1, model.dim))
    cols = sorted(counts)
    vals = np.array([counts[c] * model.idf[c] for c in cols])
    norm = np.linalg.norm(vals)
    if norm > 0:
        vals = vals / norm
    return sparse.csr_matrix((vals, ([0] * len(cols), cols)), shape=(1, model.dim))


def tfidf_transform_many(model: TfidfModel, docs: Sequence[Sequence[str]]) -> sparse.csr_matrix:
    if not docs:
        return sparse.csr_matrix((0, model.dim))
    return sparse.vstack([tfidf_transform(model, doc) for doc in docs], format="csr")


def tfidf_cosine_scores(matrix: sparse.csr_matrix, row: sparse.csr_matrix) -> np.ndarray:
    """Cosine of one transformed doc against a matrix of transformed docs.

    Rows are already L2-normalized (or zero), so the dot product is the cosine
    and a zero row scores 0 against everything.
    """
    return np.asarray((matrix @ row.T).todense()).ravel()


# --- Standardization and PCA --------------------------------------------------

def standardize(
    vectors: Sequence[np.ndarray],
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Center and scale per dimension by the population standard deviation.

    Zero-variance dimensions are centered but not scaled. Returns
    (standardized vectors, mean, stdev) with the raw stdev (zeros included).
    """
    X = as_matrix(vectors, "standardize") if len(vectors) else np.empty((0, 0))
    if X.shape[0] < 2:
        raise InvalidInputError("standardize requires at least 2 vectors")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    divisor = np.where(std == 0.0, 1.0, std)
    Z = (X - mean) / divisor
    return list(Z), mean, std


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x input_dim, orthonormal rows
    explained_variance: np.ndarray  # k, non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]


def fit_pca(vectors: Sequence[np.ndarray], k: int) -> PcaModel:
    """Top-k eigenvectors of the population covariance, via SVD.

    Rows are orthonormal, ordered by non-increasing explained variance, and
    sign-fixed so each row's largest-magnitude entry is nonnegative.
    """
    if not len(vectors):
        raise InvalidInputError("fit_pca requires a non-empty sample")
    X = as_matrix(vectors, "fit_pca")
    n, d = X.shape
    max_k = min(n, d)
    if not 1 <= k <= max_k:
        raise InvalidParameterError(
            f"k={k} out of range; achievable maximum is {max_k} "
            f"(min of {n} samples and {d} dims)"
        )
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:k].copy()
    explained = (s[:k] ** 2) / n
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def pca_transform(model: PcaModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != model.mean.shape:
        raise InvalidInputError(
            f"vector dim {v.shape} does not match model input dim {model.mean.shape}"
        )
    return model.components @ (v - model.mean)


def pca_transform_many(model: PcaModel, vectors: Sequence[np.ndarray]) -> list[np.ndarray]:
    X = np.asarray(vectors, dtype=np.float64)
    return list((X - model.mean) @ model.components.T)


# --- Hash embedder -------------------------------------------------------------

@dataclass(frozen=True)
class HashEmbedder:
    """Signed feature hashing over unigrams and bigrams.

    Same (text, dim, seed) always yields byte-identical vectors: the hash is
    keyed BLAKE2b and accumulation runs in token order, so results do not
    depend on platform or process hash randomization.
    """

    dim: int = DEFAULT_HASH_DIM
    seed: int = DEFAULT_HASH_SEED

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameterError(f"dim must be >= 1, got {self.dim}")

    def vector(self, text: str) -> np.ndarray:
        return embed_hash(self, text)


def embed_hash(embedder: HashEmbedder, text: str) -> np.ndarray:
    """L2-normalized signed-hash vector; empty text gives the zero vector."""
    acc = np.zeros(embedder.dim)
    key = (embedder.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    for gram in ngrams(text.split()):
        digest = hashlib.blake2b(gram.encode("utf-8"), key=key, digest_size=16).digest()
        bucket = int.from_bytes(digest[:8], "little") % embedder.dim
        sign = 1.0 if digest[8] & 1 else -1.0
        acc[bucket] += sign
    norm = np.linalg.norm(acc)
    if norm > 0:
        acc /= norm
    return acc


# --- External vector store -----------------------------------------------------

class VectorProvider(Protocol):
    """Anything that can map normalized text to a vector (or admit it cannot)."""

    dim: int

    def vector(self, text: str) -> np.ndarray | None: ...


@dataclass
class ExternalVectorStore:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    duplicate_count: int = 0

    def __len__(self) -> int:
        return len(self.vectors)

    def vector(self, text: str) -> np.ndarray | None:
        return self.vectors.get(text)


def load_vectors(path) -> ExternalVectorStore:
    """Load `<text>\\t<v0> <v1> ...` lines, optionally headed by `#dim=<d>`.

    Duplicate keys: last one wins, with the collision count reported on the
    store. Malformed lines, dimension drift, and non-finite values raise with
    the offending line number.
    """
    dim: int | None = None
    vectors: dict[str, np.ndarray] = {}
    duplicates = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line_no == 1 and line.startswith("#dim="):
                try:
                    dim = int(line[5:])
                except ValueError:
                    raise InputFormatError(f"bad header {line!r}", path, line_no)
                if dim < 1:
                    raise InputFormatError(f"bad header dim {dim}", path, line_no)
                continue
            if "\t" not in line:
                raise InputFormatError("expected <text>\\t<floats>", path, line_no)
            text, _, payload = line.partition("\t")
            try:
                values = np.array([float(x) for x in payload.split()])
            except ValueError as exc:
                raise InputFormatError(f"bad float: {exc}", path, line_no)
            if values.size == 0:
                raise InputFormatError("empty vector", path, line_no)
            if not np.all(np.isfinite(values)):
                raise InputFormatError("non-finite vector value", path, line_no)
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise InputFormatError(
                    f"vector of dim {values.size}, expected {dim}", path, line_no
                )
            if text in vectors:
                duplicates += 1
            vectors[text] = values
    if dim is None:
        raise InputFormatError("no vectors found and no #dim header", path)
    return ExternalVectorStore(dim=dim, vectors=vectors, duplicate_count=duplicates)


def save_vectors(path, items: Iterable[tuple[str, np.ndarray]], dim: int) -> None:
    """Write the vector-file format this module loads (9 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#dim={dim}\n")
        for text, vec in items:
            payload = " ".join(format(float(x), ".9g") for x in vec)
            fh.write(f"{text}\t{payload}\n")
