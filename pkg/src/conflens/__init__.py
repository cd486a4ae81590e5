"""conflens: coding-pattern conformance of code-review patches.

Trains n-gram language models on prior accepted patches and measures the
cross-entropy of pre-review vs post-review patch versions, plus the
supporting churn, syntax-class, and decision analyses.
"""

__version__ = "0.1.0"

from .lexing import (
    LexError,
    Token,
    TokenStream,
    classify_file,
    classify_token,
    strip_comments,
    tokenize,
    tokenize_with_fallback,
)
from .ngram import (
    EntropyReport,
    ModelError,
    NGramCounts,
    NGramModel,
    count_ngrams,
    cross_entropy,
    corpus_stats,
    load_model,
    map_rare_to_unk,
    merge_counts,
    probability,
    save_model,
    subtract_counts,
    train,
)
from .reviews import (
    ArchiveError,
    ChurnStats,
    DiffLine,
    FileDiff,
    FileVersion,
    PatchRevision,
    ReviewRecord,
    compute_churn,
    parse_review_archive,
    reconstruct_versions,
    select_review_versions,
    serialize_review_archive,
)
from .stats import GroupTestResult, kruskal_wallis

__all__ = [
    "ArchiveError",
    "ChurnStats",
    "DiffLine",
    "EntropyReport",
    "FileDiff",
    "FileVersion",
    "GroupTestResult",
    "LexError",
    "ModelError",
    "NGramCounts",
    "NGramModel",
    "PatchRevision",
    "ReviewRecord",
    "Token",
    "TokenStream",
    "classify_file",
    "classify_token",
    "compute_churn",
    "corpus_stats",
    "count_ngrams",
    "cross_entropy",
    "kruskal_wallis",
    "load_model",
    "map_rare_to_unk",
    "merge_counts",
    "parse_review_archive",
    "probability",
    "reconstruct_versions",
    "save_model",
    "select_review_versions",
    "serialize_review_archive",
    "strip_comments",
    "subtract_counts",
    "tokenize",
    "tokenize_with_fallback",
    "train",
]
