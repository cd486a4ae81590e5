"""N-gram language models over token streams, with cross-entropy scoring.

Counting treats each file's token stream as one sentence: it is padded with
n-1 start markers and a single end marker, and every padded window of the
top order is counted. Lower-order counts are stored as prefix marginals
(the count of a k-gram is the summed count of its one-token extensions),
which makes the marginalization identity exact at every order: for any
context c, ``sum(count(c + (t,)) for t) == count(c)``.

Three smoothers are provided:

* ``mle`` -- raw count ratios, undefined off-support; used as an oracle.
* ``additive=<delta>`` -- ``(c + d) / (C + d * (|V| + 1))``, the ``+1``
  being the end-marker outcome.
* ``mkn`` -- interpolated modified Kneser-Ney. Lower orders use left-
  continuation counts (start-marker-prefixed grams keep raw counts, since
  nothing can precede the start marker), with three discounts per order
  estimated from count-of-counts; an order whose count-of-counts are too
  sparse to estimate falls back to a single discount of 0.5. The chain
  bottoms out at the uniform distribution over vocabulary + end marker.

Conditional distributions of every smoother except ``mle`` sum to one over
vocabulary + end marker, exactly (to float round-off), for any context.

Entropy is reported in bits per token: the mean of -log2 P over the padded
event sequence, whose final event predicts the end marker.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .lexing import TokenStream, classify_file, file_extension

START = "<s>"
END = "</s>"
UNK = "<unk>"
MARKERS = frozenset({START, END})

MLE = "mle"
ADDITIVE = "additive"
MKN = "mkn"

DEFAULT_SMOOTHING = MKN
DEFAULT_UNK_THRESHOLD = 2

# Fallback discount for orders whose count-of-counts cannot support the
# usual modified Kneser-Ney estimates.
FALLBACK_DISCOUNT = 0.5


class ModelError(Exception):
    """Model construction or evaluation failure."""


def parse_smoothing(spec: str) -> tuple[str, float | None]:
    """Parse ``"mle"``, ``"mkn"``, or ``"additive=<delta>"``."""
    if spec in (MLE, MKN):
        return spec, None
    if spec in ("modified_kneser_ney", "modified-kneser-ney"):
        return MKN, None
    if spec.startswith(ADDITIVE):
        rest = spec[len(ADDITIVE):]
        if rest.startswith("="):
            try:
                delta = float(rest[1:])
            except ValueError:
                raise ValueError(f"bad additive delta in {spec!r}") from None
            if not delta > 0:
                raise ValueError(f"additive delta must be positive, got {delta}")
            return ADDITIVE, delta
    raise ValueError(f"unknown smoothing {spec!r}")


def format_smoothing(kind: str, delta: float | None = None) -> str:
    return f"{ADDITIVE}={delta!r}" if kind == ADDITIVE else kind


@dataclass
class NGramCounts:
    """Counts of all k-grams (k <= order) plus the token vocabulary.

    ``fingerprints`` identifies the corpora that contributed, so that
    leakage checks can prove a scored review is absent from training.
    """

    order: int
    counts: dict[tuple[str, ...], int]
    vocabulary: set[str]
    fingerprints: frozenset[str] = frozenset()

    def grams_of_length(self, k: int) -> dict[tuple[str, ...], int]:
        return {g: c for g, c in self.counts.items() if len(g) == k}


def _stream_texts(stream) -> list[str]:
    if isinstance(stream, TokenStream):
        return [token.text for token in stream.tokens]
    return [tok.text if hasattr(tok, "text") else str(tok) for tok in stream]


def count_ngrams(
    streams: Iterable, n: int, fingerprint: str | None = None
) -> NGramCounts:
    """Count padded n-grams over streams (TokenStreams or token sequences)."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    top: dict[tuple[str, ...], int] = {}
    vocabulary: set[str] = set()
    for stream in streams:
        texts = _stream_texts(stream)
        vocabulary.update(texts)
        padded = [START] * (n - 1) + texts + [END]
        for i in range(len(padded) - n + 1):
            gram = tuple(padded[i : i + n])
            top[gram] = top.get(gram, 0) + 1
    counts = dict(top)
    level = top
    for _ in range(n - 1, 0, -1):
        lower: dict[tuple[str, ...], int] = {}
        for gram, c in level.items():
            prefix = gram[:-1]
            lower[prefix] = lower.get(prefix, 0) + c
        counts.update(lower)
        level = lower
    fingerprints = frozenset({fingerprint}) if fingerprint else frozenset()
    return NGramCounts(n, counts, vocabulary, fingerprints)


def merge_counts(a: NGramCounts, b: NGramCounts) -> NGramCounts:
    """Pointwise sum; enables parallel per-file counting."""
    if a.order != b.order:
        raise ValueError(f"order mismatch: {a.order} != {b.order}")
    merged = dict(a.counts)
    for gram, c in b.counts.items():
        merged[gram] = merged.get(gram, 0) + c
    return NGramCounts(
        a.order, merged, a.vocabulary | b.vocabulary, a.fingerprints | b.fingerprints
    )


def subtract_counts(total: NGramCounts, part: NGramCounts) -> NGramCounts:
    """Remove a previously merged contribution (used for leave-one-out)."""
    if total.order != part.order:
        raise ValueError(f"order mismatch: {total.order} != {part.order}")
    remaining = dict(total.counts)
    for gram, c in part.counts.items():
        left = remaining.get(gram, 0) - c
        if left < 0:
            raise ValueError(f"subtrahend not contained in total for {gram!r}")
        if left == 0:
            remaining.pop(gram, None)
        else:
            remaining[gram] = left
    vocabulary = {g[0] for g in remaining if len(g) == 1} - MARKERS
    return NGramCounts(
        total.order, remaining, vocabulary, total.fingerprints - part.fingerprints
    )


def map_rare_to_unk(counts: NGramCounts, threshold: int = DEFAULT_UNK_THRESHOLD) -> NGramCounts:
    """Close the vocabulary: tokens with frequency < threshold become unk.

    The unk token is always added to the vocabulary so that scoring-time
    out-of-vocabulary tokens stay well defined. Idempotent.
    """
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    frequencies = Counter()
    for gram, c in counts.counts.items():
        if len(gram) == 1 and gram[0] not in MARKERS:
            frequencies[gram[0]] = c
    # Unigram marginals equal true occurrence counts: every stream token is
    # followed by either another token or the end marker.
    rare = {tok for tok, c in frequencies.items() if c < threshold} - {UNK}
    mapped: dict[tuple[str, ...], int] = {}
    for gram, c in counts.counts.items():
        key = tuple(UNK if tok in rare else tok for tok in gram)
        mapped[key] = mapped.get(key, 0) + c
    vocabulary = (counts.vocabulary - rare) | {UNK}
    return NGramCounts(counts.order, mapped, vocabulary, counts.fingerprints)


@dataclass
class _KNLevel:
    adjusted: dict[tuple[str, ...], float]
    ctx_total: dict[tuple[str, ...], float]
    ctx_discount: dict[tuple[str, ...], float]
    discounts: tuple[float, float, float]


def _estimate_discounts(values: Iterable[float]) -> tuple[float, float, float]:
    n_of = Counter()
    for v in values:
        c = int(round(v))
        if 1 <= c <= 4:
            n_of[c] += 1
    n1, n2, n3, n4 = (n_of.get(i, 0) for i in (1, 2, 3, 4))
    if min(n1, n2, n3, n4) == 0:
        return (FALLBACK_DISCOUNT,) * 3
    y = n1 / (n1 + 2.0 * n2)
    d1 = 1.0 - 2.0 * y * n2 / n1
    d2 = 2.0 - 3.0 * y * n3 / n2
    d3 = 3.0 - 4.0 * y * n4 / n3
    if not (0.0 < d1 <= 1.0 and 0.0 < d2 <= 2.0 and 0.0 < d3 <= 3.0):
        return (FALLBACK_DISCOUNT,) * 3
    return d1, d2, d3


def _discount_for(count: float, discounts: tuple[float, float, float]) -> float:
    if count <= 0:
        return 0.0
    if count < 1.5:
        return discounts[0]
    if count < 2.5:
        return discounts[1]
    return discounts[2]


def _build_kn_levels(counts: NGramCounts) -> dict[int, _KNLevel]:
    n = counts.order
    by_len: dict[int, dict[tuple[str, ...], int]] = {k: {} for k in range(1, n + 1)}
    for gram, c in counts.counts.items():
        by_len[len(gram)][gram] = c

    levels: dict[int, _KNLevel] = {}
    for k in range(1, n + 1):
        if k == n:
            adjusted = {
                gram: float(c) for gram, c in by_len[k].items() if gram[-1] != START
            }
        else:
            # Left-continuation counts; start-prefixed grams keep raw counts
            # because no token can precede the start marker.
            continuation = Counter()
            for higher in by_len[k + 1]:
                suffix = higher[1:]
                if suffix[-1] != START and suffix[0] != START:
                    continuation[suffix] += 1
            adjusted = {gram: float(c) for gram, c in continuation.items()}
            for gram, c in by_len[k].items():
                if gram[0] == START and gram[-1] != START:
                    adjusted[gram] = float(c)
        discounts = _estimate_discounts(adjusted.values())
        ctx_total: dict[tuple[str, ...], float] = {}
        ctx_discount: dict[tuple[str, ...], float] = {}
        for gram, a in adjusted.items():
            ctx = gram[:-1]
            ctx_total[ctx] = ctx_total.get(ctx, 0.0) + a
            ctx_discount[ctx] = ctx_discount.get(ctx, 0.0) + _discount_for(a, discounts)
        levels[k] = _KNLevel(adjusted, ctx_total, ctx_discount, discounts)
    return levels


@dataclass
class NGramModel:
    """A trained, immutable n-gram model. Use :func:`train` to build one."""

    order: int
    smoothing: str
    vocabulary: frozenset[str]
    counts: NGramCounts
    unk_threshold: int | None = None
    fingerprints: frozenset[str] = frozenset()
    _kind: str = field(default=MKN, repr=False)
    _delta: float | None = field(default=None, repr=False)
    _kn_levels: dict[int, _KNLevel] | None = field(default=None, repr=False)
    _context_counts: dict[tuple[str, ...], int] = field(default_factory=dict, repr=False)

    @property
    def outcome_count(self) -> int:
        # Outcomes are the vocabulary plus the end marker.
        return len(self.vocabulary) + 1

    def map_token(self, token: str) -> str:
        if token in self.vocabulary or token == END:
            return token
        if UNK in self.vocabulary:
            return UNK
        raise ModelError(
            f"token {token!r} not in model vocabulary and model has no {UNK} entry"
        )


def train(
    counts: NGramCounts,
    smoothing: str = DEFAULT_SMOOTHING,
    unk_threshold: int | None = None,
) -> NGramModel:
    """Build a model from counts, optionally closing the vocabulary first."""
    kind, delta = parse_smoothing(smoothing)
    if not counts.counts:
        raise ModelError("cannot train on empty counts")
    if unk_threshold is not None:
        counts = map_rare_to_unk(counts, unk_threshold)
    n = counts.order
    context_counts: dict[tuple[str, ...], int] = {}
    if n == 1:
        context_counts[()] = sum(
            c for g, c in counts.counts.items() if len(g) == 1
        )
    else:
        context_counts = {
            g: c for g, c in counts.counts.items() if len(g) == n - 1
        }
    model = NGramModel(
        order=n,
        smoothing=format_smoothing(kind, delta),
        vocabulary=frozenset(counts.vocabulary),
        counts=counts,
        unk_threshold=unk_threshold,
        fingerprints=counts.fingerprints,
        _kind=kind,
        _delta=delta,
        _context_counts=context_counts,
    )
    if kind == MKN:
        model._kn_levels = _build_kn_levels(counts)
    return model


def _kn_probability(model: NGramModel, k: int, context: tuple[str, ...], token: str) -> float:
    if k == 0:
        return 1.0 / model.outcome_count
    lower = _kn_probability(model, k - 1, context[1:] if context else (), token)
    level = model._kn_levels[k]
    total = level.ctx_total.get(context)
    if not total:
        return lower
    adjusted = level.adjusted.get(context + (token,), 0.0)
    discounted = max(adjusted - _discount_for(adjusted, level.discounts), 0.0)
    gamma = level.ctx_discount.get(context, 0.0)
    return discounted / total + (gamma / total) * lower


def probability(model: NGramModel, context: Sequence[str], token: str) -> float:
    """Smoothed conditional probability P(token | context).

    The context must have length order - 1; out-of-vocabulary tokens map
    to unk when the model has one.
    """
    if len(context) != model.order - 1:
        raise ValueError(
            f"context length must be {model.order - 1}, got {len(context)}"
        )
    if token == START:
        raise ValueError("start marker cannot be scored as an outcome")
    token = model.map_token(token)
    context = tuple(
        tok if tok in MARKERS else model.map_token(tok) for tok in context
    )
    if model._kind == MKN:
        return _kn_probability(model, model.order, context, token)
    gram = context + (token,)
    context_count = model._context_counts.get(context, 0)
    gram_count = model.counts.counts.get(gram, 0)
    if model._kind == MLE:
        if context_count == 0:
            raise ModelError(f"unseen context under MLE: {context!r}")
        return gram_count / context_count
    denominator = context_count + model._delta * model.outcome_count
    return (gram_count + model._delta) / denominator


@dataclass(frozen=True)
class EntropyReport:
    """Cross-entropy in bits/token with grouping metadata."""

    bits_per_token: float
    token_count: int
    extension: str | None = None
    kind: str | None = None
    side: str | None = None
    decision: str | None = None
    order: int | None = None


def cross_entropy(model: NGramModel, stream) -> EntropyReport:
    """Score a stream: mean -log2 P over its padded events.

    The event sequence is every stream token plus the final end marker,
    each conditioned on the preceding order-1 padded tokens.
    """
    texts = [model.map_token(t) for t in _stream_texts(stream)]
    n = model.order
    padded = [START] * (n - 1) + texts + [END]
    total_bits = 0.0
    events = len(texts) + 1
    for i in range(n - 1, len(padded)):
        context = tuple(padded[i - n + 1 : i])
        token = padded[i]
        p = probability(model, context, token)
        if p <= 0.0:
            raise ModelError(
                f"zero probability for n-gram {context + (token,)!r}"
            )
        total_bits -= math.log2(p)
    metadata = {}
    if isinstance(stream, TokenStream):
        metadata = {
            "extension": stream.extension,
            "kind": classify_file(stream.path) if stream.path else None,
            "side": stream.side or None,
        }
    return EntropyReport(
        bits_per_token=total_bits / events,
        token_count=events,
        order=n,
        **metadata,
    )


def corpus_stats(streams: Iterable[TokenStream]) -> dict[str, dict[str, int]]:
    """Per-extension corpus size table.

    Counts files (streams), total and unique tokens, and the number of
    distinct (review, revision) pairs that contributed streams carrying
    that provenance metadata.
    """
    files: Counter = Counter()
    tokens: Counter = Counter()
    unique: dict[str, set[str]] = {}
    revisions: dict[str, set[tuple[str, int]]] = {}
    for stream in streams:
        ext = stream.extension
        files[ext] += 1
        tokens[ext] += len(stream.tokens)
        unique.setdefault(ext, set()).update(t.text for t in stream.tokens)
        if stream.review_id is not None and stream.revision_number is not None:
            revisions.setdefault(ext, set()).add(
                (stream.review_id, stream.revision_number)
            )
    return {
        ext: {
            "revisions": len(revisions.get(ext, ())),
            "files": files[ext],
            "unique_tokens": len(unique[ext]),
            "tokens": tokens[ext],
        }
        for ext in sorted(files)
    }


_ESCAPES = {"\\": "\\\\", " ": "\\s", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {v[1]: k for k, v in _ESCAPES.items()}


def _escape_token(token: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in token)


def _unescape_token(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            out.append(_UNESCAPES.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def serialize_model(model: NGramModel) -> str:
    """Sorted-text model format: header, then one top-order gram per line
    (space-joined escaped tokens, tab, count). Byte-stable."""
    top = model.counts.grams_of_length(model.order)
    lines = sorted(
        " ".join(_escape_token(tok) for tok in gram) + "\t" + str(c)
        for gram, c in top.items()
    )
    header = [
        "conflens-ngram-model\t1",
        f"order\t{model.order}",
        f"smoothing\t{model.smoothing}",
        f"unk_threshold\t{model.unk_threshold if model.unk_threshold is not None else 'none'}",
        f"grams\t{len(lines)}",
    ]
    return "\n".join(header + lines) + "\n"


def save_model(model: NGramModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(serialize_model(model))


def deserialize_model(text: str) -> NGramModel:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("conflens-ngram-model"):
        raise ModelError("not a conflens model file")
    header: dict[str, str] = {}
    body_start = 0
    for i, line in enumerate(lines):
        key, _, value = line.partition("\t")
        header[key] = value
        if key == "grams":
            body_start = i + 1
            break
    try:
        order = int(header["order"])
        smoothing = header["smoothing"]
        raw_threshold = header["unk_threshold"]
        gram_count = int(header["grams"])
    except (KeyError, ValueError) as exc:
        raise ModelError(f"malformed model header: {exc}") from None
    unk_threshold = None if raw_threshold == "none" else int(raw_threshold)
    top: dict[tuple[str, ...], int] = {}
    for line in lines[body_start : body_start + gram_count]:
        gram_text, _, count_text = line.rpartition("\t")
        gram = tuple(_unescape_token(tok) for tok in gram_text.split(" "))
        if len(gram) != order:
            raise ModelError(f"gram of wrong order in model file: {gram!r}")
        top[gram] = int(count_text)
    counts = dict(top)
    level = top
    for _ in range(order - 1, 0, -1):
        lower: dict[tuple[str, ...], int] = {}
        for gram, c in level.items():
            prefix = gram[:-1]
            lower[prefix] = lower.get(prefix, 0) + c
        counts.update(lower)
        level = lower
    vocabulary = {g[0] for g in counts if len(g) == 1} - MARKERS
    for gram in top:
        vocabulary.update(tok for tok in gram if tok not in MARKERS)
    if unk_threshold is not None:
        vocabulary.add(UNK)
    rebuilt = NGramCounts(order, counts, vocabulary)
    return train(rebuilt, smoothing, unk_threshold)


def load_model(path) -> NGramModel:
    with open(path, "r", encoding="utf-8") as handle:
        return deserialize_model(handle.read())
