"""intentmine: grow an intent taxonomy and map queries to questions from
multi-channel customer-interaction text."""

from .corpus import (
    Channel,
    Corpus,
    Interaction,
    NormalizationRules,
    filter_search_tail,
    lemmatize,
    load_rules,
    normalize_text,
    remove_ticker_queries,
    tokenize,
)
from .cluster import (
    IntentTree,
    ThresholdSchedule,
    agglomerate,
    build_tree,
    centroid,
    name_cluster,
    silhouette,
)
from .cohort import EntityGazetteer, assign_cohorts, load_gazetteer
from .embed import (
    ExternalVectorStore,
    HashEmbedder,
    PcaModel,
    TfidfModel,
    cosine_similarity,
    embed_hash,
    fit_pca,
    fit_tfidf,
    load_vectors,
    pca_transform,
    standardize,
    tfidf_transform,
)
from .harness import GroundTruth, SyntheticSpec, adjusted_rand_index, generate_corpus
from .intent import (
    BaselineExtractor,
    IntentPhrase,
    extract_intent_baseline,
    filter_eligible_calls,
    unify_intents,
)
from .questions import (
    Question,
    aggregate_questions,
    dedup_to_cluster_heads,
    detect_question,
    evaluate_precision,
    map_query_to_questions,
)

__version__ = "0.1.0"
