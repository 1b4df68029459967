"""Stage orchestration: each stage reads declared inputs and writes declared
artifacts into the configured output directory, deterministically.

Stage graph (all paths relative to [paths].out_dir):

    normalize        input JSONL            -> normalized.jsonl, corpus_summary.json
    extract-intents  normalized.jsonl       -> intents.jsonl, intent_stats.json
    embed            intents.jsonl          -> intent_vectors.tsv, embed_meta.json
    cluster          intents + vectors      -> trees.json
    map-questions    normalized.jsonl       -> questions.jsonl, query_question_map.csv
    evaluate         judgments CSV          -> precision.csv, precision.txt
    synth            (config)               -> input JSONL, ground_truth.json
    report           trees + vectors + ...  -> report.txt, silhouette.csv, ari.json
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cohort as cohort_mod
from . import corpus as corpus_mod
from . import embed as embed_mod
from . import intent as intent_mod
from . import questions as questions_mod
from .cluster import IntentTree, ThresholdSchedule, build_tree, silhouette
from .config import PipelineConfig
from .errors import ConfigError, InputFormatError, UndefinedMetricError
from .harness import SyntheticSpec, adjusted_rand_index, generate_corpus, load_ground_truth
from .util import fmt_float, write_json, write_text


def _require(path: Path, stage: str) -> Path:
    if not Path(path).exists():
        raise InputFormatError(f"missing input for {stage}: run the producing stage first", path)
    return Path(path)


def _load_rules(cfg: PipelineConfig):
    return corpus_mod.load_rules(cfg.paths.rules or None)


def _load_gazetteer(cfg: PipelineConfig):
    if cfg.paths.gazetteer:
        return cohort_mod.load_gazetteer(cfg.paths.gazetteer)
    from importlib import resources

    with resources.as_file(
        resources.files("intentmine.data").joinpath("gazetteer.tsv")
    ) as p:
        return cohort_mod.load_gazetteer(p)


def _provider(cfg: PipelineConfig) -> embed_mod.VectorProvider:
    if cfg.embedder == "external":
        return embed_mod.load_vectors(_require(Path(cfg.paths.vectors), "embed"))
    return embed_mod.HashEmbedder(dim=cfg.hash_dim, seed=cfg.seed)


def _ensure_out(cfg: PipelineConfig) -> None:
    Path(cfg.paths.out_dir).mkdir(parents=True, exist_ok=True)


# --- Stages -------------------------------------------------------------------

def stage_normalize(cfg: PipelineConfig) -> None:
    _ensure_out(cfg)
    rules = _load_rules(cfg)
    corpus = corpus_mod.read_interactions(_require(Path(cfg.paths.input), "normalize"))
    normalized = corpus_mod.normalize_corpus(corpus, rules)
    corpus_mod.write_interactions(cfg.out_path("normalized.jsonl"), normalized)
    totals = {
        ch.value: {"volume": vol, "distinct": distinct}
        for ch, (vol, distinct) in sorted(
            normalized.channel_totals().items(), key=lambda kv: kv[0].value
        )
    }
    write_json(cfg.out_path("corpus_summary.json"), {"channels": totals})


def _search_queries(cfg: PipelineConfig, corpus, gazetteer):
    """Aggregate, tail-filter, and ticker-filter the search channel."""
    search = corpus_mod.aggregate_by_text(corpus.by_channel(corpus_mod.Channel.SEARCH))
    retained, fraction = corpus_mod.filter_search_tail(search, cfg.min_search_count)
    no_tickers = corpus_mod.remove_ticker_queries(retained, gazetteer)
    stats = {
        "distinct_queries": len(search),
        "retained_queries": len(retained),
        "retained_volume_fraction": fraction,
        "ticker_queries_removed": len(retained) - len(no_tickers),
    }
    return no_tickers, stats


def stage_extract_intents(cfg: PipelineConfig, channel: str | None = None) -> None:
    _ensure_out(cfg)
    rules = _load_rules(cfg)
    gazetteer = _load_gazetteer(cfg)
    corpus = corpus_mod.read_interactions(
        _require(cfg.out_path("normalized.jsonl"), "extract-intents")
    )
    if channel is not None:
        corpus = corpus_mod.Corpus(
            [it for it in corpus if it.channel == corpus_mod.parse_channel(channel)]
        )

    queries, search_stats = _search_queries(cfg, corpus, gazetteer)

    eligible = intent_mod.filter_eligible_calls(corpus, cfg.max_transcript_tokens)
    if cfg.paths.summaries:
        summaries = intent_mod.load_external_summaries(cfg.paths.summaries, rules)
        extractor = intent_mod.ExternalSummaryExtractor(summaries, cfg.max_intent_tokens)
    else:
        extractor = intent_mod.BaselineExtractor(
            frozenset(rules.stopwords), cfg.max_intent_tokens
        )
    extracted = intent_mod.extract_intents(eligible, extractor)
    intents = intent_mod.unify_intents(queries, extracted, cfg.max_intent_tokens)

    with open(cfg.out_path("intents.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for p in intents:
            fh.write(
                json.dumps(
                    {"text": p.text, "count": p.count, "source": p.source_interaction_id},
                    ensure_ascii=False,
                )
                + "\n"
            )
    write_json(
        cfg.out_path("intent_stats.json"),
        {
            "search": search_stats,
            "spoken_interactions_eligible": sum(
                1
                for it in eligible
                if it.channel in (corpus_mod.Channel.CALL, corpus_mod.Channel.LIVE_CHAT)
            ),
            "spoken_intents_extracted": len(extracted),
            "intents_total": len(intents),
        },
    )


def read_intents(path) -> list[intent_mod.IntentPhrase]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    intent_mod.IntentPhrase(
                        text=str(rec["text"]),
                        source_interaction_id=str(rec.get("source", "")),
                        count=int(rec["count"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise InputFormatError(f"bad intent record: {exc}", path, line_no)
    return out


def stage_embed(cfg: PipelineConfig) -> None:
    _ensure_out(cfg)
    intents = read_intents(_require(cfg.out_path("intents.jsonl"), "embed"))
    provider = _provider(cfg)
    vectors = []
    missing = []
    for p in intents:
        vec = provider.vector(p.text)
        if vec is None:
            missing.append(p.text)
        else:
            vectors.append(vec)
    if missing:
        raise InputFormatError(
            f"{len(missing)} intents missing from the vector store "
            f"(first: {missing[0]!r}); export vectors for every intent text",
            cfg.paths.vectors,
        )

    meta = {
        "embedder": cfg.embedder,
        "input_dim": provider.dim,
        "intents": len(intents),
        "duplicate_keys": getattr(provider, "duplicate_count", 0),
        "pca_applied": False,
        "pca_k": 0,
    }
    if cfg.pca_k > 0 and len(vectors) >= 2:
        k = min(cfg.pca_k, len(vectors), provider.dim)
        standardized, _, _ = embed_mod.standardize(vectors)
        model = embed_mod.fit_pca(standardized, k)
        vectors = embed_mod.pca_transform_many(model, standardized)
        meta.update(
            pca_applied=True,
            pca_k=k,
            pca_explained_variance_total=float(model.explained_variance.sum()),
        )
    dim = len(vectors[0]) if vectors else provider.dim
    meta["dim"] = dim
    embed_mod.save_vectors(
        cfg.out_path("intent_vectors.tsv"),
        [(p.text, v) for p, v in zip(intents, vectors)],
        dim,
    )
    write_json(cfg.out_path("embed_meta.json"), meta)


def stage_cluster(cfg: PipelineConfig, threads: int = 1) -> None:
    _ensure_out(cfg)
    intents = read_intents(_require(cfg.out_path("intents.jsonl"), "cluster"))
    store = embed_mod.load_vectors(_require(cfg.out_path("intent_vectors.tsv"), "cluster"))
    gazetteer = _load_gazetteer(cfg)
    schedule = ThresholdSchedule(cfg.schedule.x0, cfg.schedule.delta, cfg.schedule.levels)

    assignments = cohort_mod.assign_cohorts(intents, gazetteer)

    def build(assignment) -> IntentTree:
        members = [(intents[i].text, intents[i].count) for i in assignment.member_indices]
        vecs = [store.vector(t) for t, _ in members]
        if any(v is None for v in vecs):
            bad = members[[v is None for v in vecs].index(True)][0]
            raise InputFormatError(
                f"intent {bad!r} missing from intent_vectors.tsv; re-run embed",
                cfg.out_path("intent_vectors.tsv"),
            )
        return build_tree(assignment.cohort_id, members, vecs, schedule)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, assignments))
    else:
        trees = [build(a) for a in assignments]
    trees.sort(key=lambda t: t.cohort_id)

    write_json(
        cfg.out_path("trees.json"),
        {
            "schedule": {
                "x0": cfg.schedule.x0,
                "delta": cfg.schedule.delta,
                "levels": cfg.schedule.levels,
            },
            "cohorts": [t.to_json_dict() for t in trees],
        },
    )


def stage_map_questions(cfg: PipelineConfig) -> None:
    _ensure_out(cfg)
    rules = _load_rules(cfg)
    gazetteer = _load_gazetteer(cfg)
    corpus = corpus_mod.read_interactions(
        _require(cfg.out_path("normalized.jsonl"), "map-questions")
    )
    provider = _provider(cfg)

    question_channels = (
        corpus_mod.Channel.SEARCH,
        corpus_mod.Channel.LIVE_CHAT,
        corpus_mod.Channel.VIRTUAL_ASSISTANT,
    )
    detected = [
        (it.text, it.channel, it.count)
        for it in corpus
        if it.channel in question_channels and questions_mod.detect_question(it.text)
    ]
    questions = questions_mod.aggregate_questions(detected, rules)
    if cfg.paths.curated_questions:
        curated = questions_mod.read_questions(cfg.paths.curated_questions)
        questions = questions_mod.merge_curated(questions, curated)
    questions_mod.write_questions(cfg.out_path("questions.jsonl"), questions)

    queries, _ = _search_queries(cfg, corpus, gazetteer)
    queries_sorted = sorted(queries, key=lambda it: (-it.count, it.text))

    matcher = questions_mod.QuestionMatcher(questions, rules, provider)
    rows: list[tuple[str, questions_mod.Candidate]] = []
    for q in queries_sorted:
        candidates = matcher.map_query(
            q.text, cfg.thresholds.lexical, cfg.thresholds.semantic
        )
        heads = questions_mod.dedup_to_cluster_heads(
            candidates, cfg.thresholds.dedup, cfg.dedup_channel
        )
        rows.extend((q.text, head) for head in heads)
    questions_mod.write_mapping_csv(cfg.out_path("query_question_map.csv"), rows)


def stage_evaluate(cfg: PipelineConfig) -> None:
    _ensure_out(cfg)
    if not cfg.paths.judgments:
        raise ConfigError("evaluate requires paths.judgments")
    judged = questions_mod.read_judgments(_require(Path(cfg.paths.judgments), "evaluate"))
    table = questions_mod.evaluate_precision(judged)
    write_text(cfg.out_path("precision.csv"), table.to_csv_text())
    write_text(cfg.out_path("precision.txt"), table.to_text())


def stage_synth(cfg: PipelineConfig) -> None:
    _ensure_out(cfg)
    spec = SyntheticSpec(
        seed=cfg.seed,
        topics=cfg.synth.topics,
        members_per_topic=cfg.synth.members_per_topic,
        noise_rate=cfg.synth.noise_rate,
        questions_per_topic=cfg.synth.questions_per_topic,
        phrase_tokens=cfg.synth.phrase_tokens,
        entity_assignment={int(k): v for k, v in cfg.synth.entities.items()},
    )
    corpus, truth = generate_corpus(spec)
    input_path = Path(cfg.paths.input)
    if input_path.parent != Path("."):
        input_path.parent.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_interactions(input_path, corpus)
    write_json(cfg.out_path("ground_truth.json"), truth.to_json_dict())


# --- Report -------------------------------------------------------------------

def _resolve_leaf_indices(tree_dict: dict) -> dict[str, list[int]]:
    """Recover each node's descendant leaf indices from the exported children refs."""
    nodes = {nd["id"]: nd for nd in tree_dict["nodes"]}
    cache: dict[str, list[int]] = {}

    def resolve(node_id: str) -> list[int]:
        if node_id in cache:
            return cache[node_id]
        out = []
        for child in nodes[node_id]["children"]:
            if child.startswith("leaf."):
                out.append(int(child.split(".", 1)[1]))
            else:
                out.extend(resolve(child))
        out = sorted(out)
        cache[node_id] = out
        return out

    for node_id in nodes:
        resolve(node_id)
    return cache


def _level_partition(trees: list[dict], level: int) -> list[list[str]]:
    """Global partition of leaf texts by level-``level`` ancestor (clamped to depth)."""
    partition = []
    for tree in trees:
        effective = min(level, tree["depth"])
        leaf_map = _resolve_leaf_indices(tree)
        texts = [leaf["text"] for leaf in tree["leaves"]]
        for nd in tree["nodes"]:
            if nd["level"] == effective:
                partition.append([texts[i] for i in leaf_map[nd["id"]]])
    return partition


def _render_tree_text(tree: dict) -> list[str]:
    lines = [
        f"cohort {tree['cohort']}  (depth {tree['depth']}, "
        f"{len(tree['leaves'])} intents)"
    ]
    nodes = {nd["id"]: nd for nd in tree["nodes"]}
    top = [nd for nd in tree["nodes"] if nd["level"] == tree["depth"]]

    def render(node, indent):
        lines.append(f"{'  ' * indent}[{node['id']}] {node['label']}  ({node['count']})")
        for child in node["children"]:
            if not child.startswith("leaf."):
                render(nodes[child], indent + 1)

    for node in top:
        render(node, 1)
    return lines


def stage_report(cfg: PipelineConfig) -> None:
    _ensure_out(cfg)
    with open(_require(cfg.out_path("trees.json"), "report"), encoding="utf-8") as fh:
        trees_doc = json.load(fh)
    trees = trees_doc["cohorts"]
    store = embed_mod.load_vectors(_require(cfg.out_path("intent_vectors.tsv"), "report"))

    max_depth = max((t["depth"] for t in trees), default=0)
    sil_rows: list[tuple[int, float | None, int]] = []
    for level in range(1, max_depth + 1):
        partition_texts = _level_partition(trees, level)
        texts = [t for group in partition_texts for t in group]
        vectors = [store.vector(t) for t in texts]
        index_of = {t: i for i, t in enumerate(texts)}
        partition = [[index_of[t] for t in group] for group in partition_texts]
        try:
            score: float | None = silhouette(vectors, partition)
        except UndefinedMetricError:
            score = None
        sil_rows.append((level, score, len(partition)))

    sil_csv = ["level,clusters,silhouette"]
    for level, score, k in sil_rows:
        sil_csv.append(f"{level},{k},{'n/a' if score is None else fmt_float(score)}")
    write_text(cfg.out_path("silhouette.csv"), "\n".join(sil_csv) + "\n")

    lines = ["intent taxonomy report", "======================", ""]
    total_intents = sum(len(t["leaves"]) for t in trees)
    lines.append(f"cohorts: {len(trees)}   intents: {total_intents}")
    lines.append("")
    lines.append("silhouette by cluster level (cosine distance):")
    for level, score, k in sil_rows:
        rendered = "n/a" if score is None else fmt_float(score)
        lines.append(f"  level {level}: {rendered}  ({k} clusters)")
    lines.append("")

    truth_path = cfg.out_path("ground_truth.json")
    if truth_path.exists():
        truth = load_ground_truth(truth_path)
        level1 = _level_partition(trees, 1)
        labeled = [
            [t for t in group if t in truth.intent_topic] for group in level1
        ]
        labeled = [g for g in labeled if g]
        flat = [t for g in labeled for t in g]
        ari: float | None = None
        if flat:
            ari = adjusted_rand_index(labeled, truth.topic_partition(flat))
        coverage = len(flat) / total_intents if total_intents else 0.0
        write_json(
            cfg.out_path("ari.json"),
            {"level_1_ari": ari, "labeled_intents": len(flat), "coverage": coverage},
        )
        rendered = "n/a" if ari is None else fmt_float(ari)
        lines.append(f"ground truth: level-1 ARI = {rendered} "
                     f"(coverage {fmt_float(coverage)})")
        lines.append("")

    if cfg.paths.judgments and Path(cfg.paths.judgments).exists():
        judged = questions_mod.read_judgments(cfg.paths.judgments)
        table = questions_mod.evaluate_precision(judged)
        write_text(cfg.out_path("precision.csv"), table.to_csv_text())
        lines.append(table.to_text())

    for tree in trees:
        lines.extend(_render_tree_text(tree))
        lines.append("")
    write_text(cfg.out_path("report.txt"), "\n".join(lines) + "\n")


STAGES = {
    "normalize": stage_normalize,
    "extract-intents": stage_extract_intents,
    "embed": stage_embed,
    "cluster": stage_cluster,
    "map-questions": stage_map_questions,
    "evaluate": stage_evaluate,
    "synth": stage_synth,
    "report": stage_report,
}

PIPELINE_ORDER = [
    "synth",
    "normalize",
    "extract-intents",
    "embed",
    "cluster",
    "map-questions",
    "report",
]
