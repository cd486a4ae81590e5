"""Experiment pipelines over review archives.

Four analyses: churn proportions by file kind (with a rank significance
test), entropy-by-kind curves, pre-review vs post-review entropy curves,
and accepted vs abandoned entropy curves; plus the two token tables
(syntax-class proportions and top changed tokens).

Entropy experiments score each review against a model trained on prior
accepted patches that provably exclude the review itself: the default
``loo`` policy uses every accepted review except the one under evaluation,
``chrono`` only accepted reviews created strictly earlier. Models carry
per-review corpus fingerprints and every scoring call asserts the scored
review's fingerprint is absent, so training leakage fails loudly.

Entropy values aggregate across a group's files as a token-weighted mean
of per-file cross-entropies (equivalently the corpus-level per-token
average); ``aggregate="file_mean"`` switches to an unweighted mean of
per-file entropies.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Iterable, Sequence

from . import ngram
from .lexing import (
    CONFIGURATION,
    DOCUMENTATION,
    OTHER_KIND,
    PROGRAMMING,
    PROGRAMMING_EXTENSIONS,
    TokenStream,
    classify_file,
    file_extension,
    language_for_path,
    tokenize_with_fallback,
)
from .ngram import NGramCounts, NGramModel
from .reviews import (
    ACCEPTED,
    ADDED,
    FIRST_VS_LAST,
    REMOVED,
    SELECTION_MODES,
    ReviewRecord,
    compute_churn,
    select_review_versions,
)
from .stats import GroupTestResult, kruskal_wallis

logger = logging.getLogger(__name__)

LOO = "loo"
CHRONO = "chrono"
TRAIN_POLICIES = frozenset({LOO, CHRONO})

TOKEN_WEIGHTED = "token_weighted"
FILE_MEAN = "file_mean"

ANALYSIS_KINDS = (PROGRAMMING, CONFIGURATION, DOCUMENTATION)
DEFAULT_ORDERS = tuple(range(3, 10))


@dataclass(frozen=True)
class ExperimentConfig:
    orders: tuple[int, ...] = DEFAULT_ORDERS
    extensions: tuple[str, ...] = PROGRAMMING_EXTENSIONS
    kinds: tuple[str, ...] = ANALYSIS_KINDS
    mode: str = FIRST_VS_LAST
    train_policy: str = LOO
    smoothing: str = ngram.DEFAULT_SMOOTHING
    unk_threshold: int = ngram.DEFAULT_UNK_THRESHOLD
    aggregate: str = TOKEN_WEIGHTED
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.orders or any(n < 1 or n > 9 for n in self.orders):
            raise ValueError("orders must be a non-empty subset of 1..9")
        if self.mode not in SELECTION_MODES:
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.train_policy not in TRAIN_POLICIES:
            raise ValueError(f"unknown train policy {self.train_policy!r}")
        if self.aggregate not in (TOKEN_WEIGHTED, FILE_MEAN):
            raise ValueError(f"unknown aggregate {self.aggregate!r}")
        ngram.parse_smoothing(self.smoothing)


@dataclass
class ReviewStreams:
    """One review's token streams in their pre/post roles."""

    review_id: str
    status: str
    created: datetime
    pre: list[TokenStream]
    post: list[TokenStream]
    fingerprint: str = ""

    def post_of_kind(self, kind: str) -> list[TokenStream]:
        return [s for s in self.post if classify_file(s.path) == kind]

    def streams_of_extension(self, side: list[TokenStream], ext: str) -> list[TokenStream]:
        return [s for s in side if s.extension == ext]


def _fingerprint(review_id: str, streams: Iterable[TokenStream]) -> str:
    digest = hashlib.sha256(review_id.encode("utf-8"))
    for stream in streams:
        digest.update(b"\x00" + stream.path.encode("utf-8"))
        for token in stream.tokens:
            digest.update(b"\x01" + token.text.encode("utf-8"))
    return digest.hexdigest()


def _map_jobs(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def prepare_review_streams(
    records: Sequence[ReviewRecord], config: ExperimentConfig | None = None
) -> list[ReviewStreams]:
    """Lex every review's selected pre/post file versions.

    Files whose language lexer fails fall back to generic tokenization and
    are flagged on the stream, not dropped. Result order is stable:
    (created, review_id).
    """
    config = config or ExperimentConfig()

    def build(record: ReviewRecord) -> ReviewStreams:
        pre_files, post_files = select_review_versions(record, config.mode)
        first_rev = record.revisions[0].revision_number
        final_rev = record.revisions[-1].revision_number
        pre_rev = final_rev if config.mode != FIRST_VS_LAST else first_rev
        streams = ReviewStreams(
            review_id=record.review_id,
            status=record.status,
            created=record.revisions[0].created,
            pre=[
                tokenize_with_fallback(
                    "\n".join(fv.lines),
                    language_for_path(fv.path),
                    path=fv.path,
                    side=fv.side,
                    review_id=record.review_id,
                    revision_number=pre_rev,
                )
                for fv in pre_files
            ],
            post=[
                tokenize_with_fallback(
                    "\n".join(fv.lines),
                    language_for_path(fv.path),
                    path=fv.path,
                    side=fv.side,
                    review_id=record.review_id,
                    revision_number=final_rev,
                )
                for fv in post_files
            ],
        )
        streams.fingerprint = _fingerprint(record.review_id, streams.post)
        return streams

    built = _map_jobs(build, list(records), config.jobs)
    built.sort(key=lambda rs: (rs.created, rs.review_id))
    return built


# ---------------------------------------------------------------------------
# churn by kind (file-kind churn proportions + significance test)


@dataclass
class ChurnByKindResult:
    per_review: list[dict]
    means: dict[str, float]
    other_total: int
    skipped_reviews: list[str]
    test: GroupTestResult


def churn_by_kind(records: Sequence[ReviewRecord]) -> ChurnByKindResult:
    """Per-review churn proportions across the three analysis kinds.

    Churn is added+removed lines summed over every revision of the review.
    Files of kind "other" are excluded from the proportions and reported
    separately; reviews with zero churn in the three kinds contribute no
    proportion row.
    """
    if not records:
        raise ValueError("records must be non-empty")
    per_review: list[dict] = []
    other_total = 0
    skipped: list[str] = []
    for record in records:
        by_kind = dict.fromkeys(ANALYSIS_KINDS, 0)
        other = 0
        for revision in record.revisions:
            for diff in revision.files:
                churn = compute_churn(diff).churn
                kind = classify_file(diff.path)
                if kind == OTHER_KIND:
                    other += churn
                else:
                    by_kind[kind] += churn
        other_total += other
        total = sum(by_kind.values())
        if total == 0:
            logger.warning("review %s has no churn in analysis kinds; skipped", record.review_id)
            skipped.append(record.review_id)
            continue
        row = {"review_id": record.review_id, "other_churn": other}
        row.update({kind: by_kind[kind] / total for kind in ANALYSIS_KINDS})
        per_review.append(row)
    if not per_review:
        raise ValueError("no review has churn in the analysis kinds")
    means = {
        kind: sum(row[kind] for row in per_review) / len(per_review)
        for kind in ANALYSIS_KINDS
    }
    groups = [[row[kind] for row in per_review] for kind in ANALYSIS_KINDS]
    return ChurnByKindResult(per_review, means, other_total, skipped, kruskal_wallis(groups))


# ---------------------------------------------------------------------------
# entropy experiments


class _EntropyAccumulator:
    def __init__(self, aggregate: str):
        self.aggregate = aggregate
        self.total_bits = 0.0
        self.total_events = 0
        self.file_entropy_sum = 0.0
        self.files = 0

    def add(self, report: ngram.EntropyReport) -> None:
        self.total_bits += report.bits_per_token * report.token_count
        self.total_events += report.token_count
        self.file_entropy_sum += report.bits_per_token
        self.files += 1

    @property
    def bits_per_token(self) -> float:
        if self.aggregate == FILE_MEAN:
            return self.file_entropy_sum / self.files
        return self.total_bits / self.total_events


class _TrainingPool:
    """Per-group accepted-corpus counts with leave-one-out / chronological
    model construction and the leakage guard."""

    def __init__(
        self,
        reviews: Sequence[ReviewStreams],
        stream_selector: Callable[[ReviewStreams], list[TokenStream]],
        order: int,
        config: ExperimentConfig,
    ):
        self.order = order
        self.config = config
        self.contributions: dict[str, NGramCounts] = {}
        self.accepted: list[ReviewStreams] = []
        for review in reviews:
            if review.status != ACCEPTED:
                continue
            streams = stream_selector(review)
            if not streams:
                continue
            self.accepted.append(review)
            self.contributions[review.review_id] = ngram.count_ngrams(
                streams, order, fingerprint=review.fingerprint
            )
        self.total: NGramCounts | None = None
        if self.contributions:
            counts = list(self.contributions.values())
            total = counts[0]
            for extra in counts[1:]:
                total = ngram.merge_counts(total, extra)
            self.total = total

    def model_for(self, review: ReviewStreams) -> NGramModel | None:
        if self.config.train_policy == CHRONO:
            pool: NGramCounts | None = None
            for other in self.accepted:
                if other.created >= review.created or other.review_id == review.review_id:
                    continue
                contribution = self.contributions[other.review_id]
                pool = contribution if pool is None else ngram.merge_counts(pool, contribution)
        else:
            pool = self.total
            if review.review_id in self.contributions:
                pool = ngram.subtract_counts(pool, self.contributions[review.review_id])
        if pool is None or not pool.counts:
            return None
        return ngram.train(pool, self.config.smoothing, unk_threshold=self.config.unk_threshold)

    def score(
        self, review: ReviewStreams, streams: Sequence[TokenStream], accumulator: _EntropyAccumulator
    ) -> bool:
        model = self.model_for(review)
        if model is None:
            logger.warning(
                "no prior accepted training corpus for review %s; skipped", review.review_id
            )
            return False
        if review.fingerprint in model.fingerprints:
            raise AssertionError(
                f"training leakage: review {review.review_id} present in its own model"
            )
        for stream in streams:
            accumulator.add(ngram.cross_entropy(model, stream))
        return True


def entropy_by_kind(
    records: Sequence[ReviewRecord], config: ExperimentConfig | None = None
) -> list[dict]:
    """Entropy curves per file kind: each kind's post-review streams scored
    against a model of that kind's prior accepted streams."""
    config = config or ExperimentConfig()
    reviews = prepare_review_streams(records, config)
    rows: list[dict] = []
    for kind in config.kinds:
        if not any(review.post_of_kind(kind) for review in reviews):
            logger.warning("no files of kind %s; omitted", kind)
            continue
        for order in sorted(config.orders):
            pool = _TrainingPool(reviews, lambda r, k=kind: r.post_of_kind(k), order, config)
            accumulator = _EntropyAccumulator(config.aggregate)
            for review in reviews:
                streams = review.post_of_kind(kind)
                if streams:
                    pool.score(review, streams, accumulator)
            if accumulator.files:
                rows.append(
                    {
                        "kind": kind,
                        "order": order,
                        "bits_per_token": accumulator.bits_per_token,
                        "token_count": accumulator.total_events,
                    }
                )
    return rows


def pre_vs_post_entropy(
    records: Sequence[ReviewRecord], config: ExperimentConfig | None = None
) -> list[dict]:
    """Entropy of pre-side vs post-side streams per extension and order,
    scored against prior-accepted models."""
    config = config or ExperimentConfig()
    reviews = prepare_review_streams(records, config)
    rows: list[dict] = []
    for ext in config.extensions:
        for order in sorted(config.orders):
            pool = _TrainingPool(
                reviews, lambda r, e=ext: r.streams_of_extension(r.post, e), order, config
            )
            accumulators = {
                side: _EntropyAccumulator(config.aggregate) for side in ("pre", "post")
            }
            for review in reviews:
                sides = {
                    "pre": review.streams_of_extension(review.pre, ext),
                    "post": review.streams_of_extension(review.post, ext),
                }
                if not sides["pre"] and not sides["post"]:
                    continue
                for side, streams in sides.items():
                    if not streams:
                        logger.warning(
                            "review %s has no %s-side %s streams; side skipped",
                            review.review_id, side, ext,
                        )
                        continue
                    pool.score(review, streams, accumulators[side])
            for side in ("pre", "post"):
                acc = accumulators[side]
                if acc.files:
                    rows.append(
                        {
                            "extension": ext,
                            "side": side,
                            "order": order,
                            "bits_per_token": acc.bits_per_token,
                            "token_count": acc.total_events,
                        }
                    )
    return rows


def accepted_vs_abandoned(
    records: Sequence[ReviewRecord], config: ExperimentConfig | None = None
) -> list[dict]:
    """Entropy of final post-side streams per extension, split by review
    decision, against prior-accepted models."""
    config = config or ExperimentConfig()
    reviews = prepare_review_streams(records, config)
    decisions = {review.status for review in reviews}
    if len(decisions) < 2:
        logger.warning("only %s reviews present; result is partial", "/".join(sorted(decisions)))
    rows: list[dict] = []
    for ext in config.extensions:
        for order in sorted(config.orders):
            pool = _TrainingPool(
                reviews, lambda r, e=ext: r.streams_of_extension(r.post, e), order, config
            )
            accumulators: dict[str, _EntropyAccumulator] = {}
            for review in reviews:
                streams = review.streams_of_extension(review.post, ext)
                if not streams:
                    continue
                accumulator = accumulators.setdefault(
                    review.status, _EntropyAccumulator(config.aggregate)
                )
                pool.score(review, streams, accumulator)
            for decision in sorted(accumulators):
                acc = accumulators[decision]
                if acc.files:
                    rows.append(
                        {
                            "extension": ext,
                            "decision": decision,
                            "order": order,
                            "bits_per_token": acc.bits_per_token,
                            "token_count": acc.total_events,
                        }
                    )
    return rows


# ---------------------------------------------------------------------------
# token tables


def syntax_proportions(
    records: Sequence[ReviewRecord], config: ExperimentConfig | None = None
) -> list[dict]:
    """Percent of tokens per syntax class for each extension and side.

    Classes with zero tokens are absent rather than reported as 0; shell
    therefore never reports a separator row.
    """
    config = config or ExperimentConfig()
    reviews = prepare_review_streams(records, config)
    class_counts: dict[tuple[str, str], dict[str, int]] = {}
    totals: dict[tuple[str, str], int] = {}
    for review in reviews:
        for side_name, side in (("pre", review.pre), ("post", review.post)):
            for stream in side:
                if stream.extension not in config.extensions:
                    continue
                key = (stream.extension, side_name)
                counts = class_counts.setdefault(key, {})
                for token in stream.tokens:
                    counts[token.token_class] = counts.get(token.token_class, 0) + 1
                totals[key] = totals.get(key, 0) + len(stream.tokens)
    rows = []
    for (ext, side), counts in sorted(class_counts.items()):
        total = totals[(ext, side)]
        if total == 0:
            continue
        for token_class in sorted(counts):
            rows.append(
                {
                    "extension": ext,
                    "side": side,
                    "token_class": token_class,
                    "percent": 100.0 * counts[token_class] / total,
                    "token_count": counts[token_class],
                }
            )
    return rows


STABLE = "stable"
CHANGED = "changed"


def top_changed_tokens(
    records: Sequence[ReviewRecord], k: int = 3, config: ExperimentConfig | None = None
) -> list[dict]:
    """Top-k added and removed tokens per extension and syntax class.

    Added tokens are those on added diff lines (present only in the post
    version), removed tokens those on removed lines. The percent is of all
    tokens on that side for the extension. A token ranking in both the
    added and removed top-k of the same class is marked stable, otherwise
    changed.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    config = config or ExperimentConfig()
    token_counts: dict[tuple[str, str], dict[tuple[str, str], int]] = {}
    side_totals: dict[tuple[str, str], int] = {}
    for record in records:
        for revision in record.revisions:
            for diff in revision.files:
                ext = file_extension(diff.path)
                if ext not in config.extensions:
                    continue
                for side_name, op in ((ADDED, ADDED), (REMOVED, REMOVED)):
                    text = "\n".join(line.text for line in diff.lines if line.op == op)
                    if not text:
                        continue
                    stream = tokenize_with_fallback(
                        text, language_for_path(diff.path), path=diff.path
                    )
                    key = (ext, side_name)
                    counts = token_counts.setdefault(key, {})
                    for token in stream.tokens:
                        counts[(token.token_class, token.text)] = (
                            counts.get((token.token_class, token.text), 0) + 1
                        )
                    side_totals[key] = side_totals.get(key, 0) + len(stream.tokens)

    ranked: dict[tuple[str, str, str], list[tuple[str, float]]] = {}
    for (ext, side), counts in token_counts.items():
        by_class: dict[str, list[tuple[int, str]]] = {}
        for (token_class, text), count in counts.items():
            by_class.setdefault(token_class, []).append((count, text))
        for token_class, entries in by_class.items():
            entries.sort(key=lambda item: (-item[0], item[1]))
            total = side_totals[(ext, side)]
            ranked[(ext, side, token_class)] = [
                (text, 100.0 * count / total) for count, text in entries[:k]
            ]

    rows = []
    for (ext, side, token_class) in sorted(ranked):
        other_side = REMOVED if side == ADDED else ADDED
        other_top = {text for text, _ in ranked.get((ext, other_side, token_class), ())}
        for rank, (text, percent) in enumerate(ranked[(ext, side, token_class)], start=1):
            rows.append(
                {
                    "extension": ext,
                    "side": side,
                    "token_class": token_class,
                    "rank": rank,
                    "token": text,
                    "percent": percent,
                    "stability": STABLE if text in other_top else CHANGED,
                }
            )
    return rows
