"""Brute-force reference scorer, independent of the library internals.

Counts n-grams and context prefixes by direct enumeration over padded
streams and evaluates the smoothing formulas literally. Used to check the
library's cross-entropy path; deliberately shares no code with it.
"""

import math

START = "<s>"
END = "</s>"


def pad(tokens, n):
    return [START] * (n - 1) + list(tokens) + [END]


def ngram_table(streams, n):
    grams = {}
    contexts = {}
    for tokens in streams:
        padded = pad(tokens, n)
        for i in range(len(padded) - n + 1):
            gram = tuple(padded[i : i + n])
            grams[gram] = grams.get(gram, 0) + 1
            context = gram[:-1]
            contexts[context] = contexts.get(context, 0) + 1
    return grams, contexts


def vocabulary(streams):
    return {token for stream in streams for token in stream}


def mle_probability(grams, contexts, context, token):
    return grams.get(context + (token,), 0) / contexts[context]


def additive_probability(grams, contexts, vocab_size, delta, context, token):
    numerator = grams.get(context + (token,), 0) + delta
    denominator = contexts.get(context, 0) + delta * (vocab_size + 1)
    return numerator / denominator


def cross_entropy(train_streams, scored_stream, n, smoothing, delta=None):
    """Bits/token of the scored stream under a model of the training
    streams; smoothing is "mle" or "additive"."""
    grams, contexts = ngram_table(train_streams, n)
    vocab_size = len(vocabulary(train_streams))
    padded = pad(scored_stream, n)
    bits = 0.0
    events = 0
    for i in range(n - 1, len(padded)):
        context = tuple(padded[i - n + 1 : i])
        token = padded[i]
        if smoothing == "mle":
            p = mle_probability(grams, contexts, context, token)
        elif smoothing == "additive":
            p = additive_probability(grams, contexts, vocab_size, delta, context, token)
        else:
            raise ValueError(smoothing)
        bits -= math.log2(p)
        events += 1
    return bits / events, events
