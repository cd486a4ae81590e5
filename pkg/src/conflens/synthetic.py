"""Seeded synthetic review archives.

Small constructed corpora with known properties, used by the test suite and
the demo scripts: a two-kind corpus whose programming files come from a
ten-rule deterministic statement grammar while documentation files are
random word salad; a pre/post corpus where post versions reuse the shared
idiom pool and pre versions introduce fresh identifiers; and a decision
corpus whose abandoned reviews are drawn from a disjoint grammar. All
generators are pure functions of their seed.
"""

from __future__ import annotations

import difflib
import random
from datetime import datetime, timedelta, timezone

from .reviews import (
    ABANDONED,
    ACCEPTED,
    ADDED,
    REMOVED,
    UNCHANGED,
    DiffLine,
    FileDiff,
    PatchRevision,
    ReviewRecord,
)

_EPOCH = datetime(2021, 1, 1, tzinfo=timezone.utc)

# Ten-rule deterministic statement grammar: the shared idiom pool.
GRAMMAR_RULES = (
    "context = session.begin(request)",
    "payload = context.load(request)",
    "result = transform(payload, context)",
    "session.validate(result)",
    "cache.store(result, context)",
    "metrics.record(context, result)",
    "response = render(result, context)",
    "session.commit(response)",
    "cache.flush(context)",
    "queue.push(response)",
)

# A second grammar over disjoint identifiers, for abandoned patches.
ALT_GRAMMAR_RULES = (
    "widget = registry.fetch(spec)",
    "blueprint = widget.expand(spec)",
    "artifact = assemble(blueprint, widget)",
    "registry.check(artifact)",
    "ledger.append(artifact, widget)",
    "gauges.tally(widget, artifact)",
    "reply = format_reply(artifact, widget)",
    "registry.seal(reply)",
    "ledger.prune(widget)",
    "outbox.send(reply)",
)


def grammar_lines(count: int, start: int = 0, rules=GRAMMAR_RULES) -> list[str]:
    """Cycle deterministically through the grammar rules."""
    return [rules[(start + i) % len(rules)] for i in range(count)]


def random_text_lines(rng: random.Random, lines: int, vocab_size: int = 200,
                      words_per_line: int = 8) -> list[str]:
    vocabulary = [f"term{i:03d}" for i in range(vocab_size)]
    return [
        " ".join(rng.choice(vocabulary) for _ in range(words_per_line))
        for _ in range(lines)
    ]


def diff_lines(pre: list[str], post: list[str]) -> tuple[DiffLine, ...]:
    """Line-annotate the change from pre to post."""
    out: list[DiffLine] = []
    matcher = difflib.SequenceMatcher(a=pre, b=post, autojunk=False)
    for op, a1, a2, b1, b2 in matcher.get_opcodes():
        if op == "equal":
            out.extend(DiffLine(UNCHANGED, line) for line in pre[a1:a2])
        else:
            out.extend(DiffLine(REMOVED, line) for line in pre[a1:a2])
            out.extend(DiffLine(ADDED, line) for line in post[b1:b2])
    return tuple(out)


def review_from_versions(
    review_id: str,
    status: str,
    day: int,
    files: dict[str, tuple[list[str], list[str]]],
) -> ReviewRecord:
    """Build a two-revision review: revision 1 uploads the pre content,
    revision 2 carries the diff from pre to post. Identical pre/post
    collapses to a single revision."""
    created = _EPOCH + timedelta(days=day)
    first_files = tuple(
        FileDiff(path, tuple(DiffLine(ADDED, line) for line in pre))
        for path, (pre, _) in sorted(files.items())
    )
    revisions = [PatchRevision(1, created, first_files)]
    if any(pre != post for pre, post in files.values()):
        second_files = tuple(
            FileDiff(path, diff_lines(pre, post))
            for path, (pre, post) in sorted(files.items())
        )
        revisions.append(PatchRevision(2, created + timedelta(hours=6), second_files))
    return ReviewRecord(review_id, status, tuple(revisions))


def two_kind_archive(seed: int = 0, reviews: int = 8) -> list[ReviewRecord]:
    """Programming files from the deterministic grammar, documentation
    files from random 200-word text; all reviews accepted.

    Every programming file carries the grammar's single derivation (the
    ten rules cycled for 40 lines), so conformance saturates smoothly as
    the model order grows."""
    rng = random.Random(seed)
    records = []
    for i in range(reviews):
        code = grammar_lines(40)
        prose = random_text_lines(rng, lines=25)
        records.append(
            review_from_versions(
                f"kind{i:02d}",
                ACCEPTED,
                day=i,
                files={f"src/module{i}.py": (code, code), f"doc/guide{i}.rst": (prose, prose)},
            )
        )
    return records


def pre_post_archive(seed: int = 0, reviews: int = 10) -> list[ReviewRecord]:
    """Post versions reuse the shared idiom pool; pre versions swap every
    third line for statements over fresh, review-local identifiers."""
    rng = random.Random(seed)
    records = []
    for i in range(reviews):
        post = grammar_lines(30, start=i)
        pre = list(post)
        for j in range(0, len(pre), 3):
            fresh = f"draft_{i}_{j}"
            pre[j] = f"{fresh} = legacy_shim_{i}(raw_input_{i}_{j}, {rng.randint(0, 9)})"
        records.append(
            review_from_versions(
                f"review{i:02d}",
                ACCEPTED,
                day=i,
                files={f"src/service{i}.py": (pre, post)},
            )
        )
    return records


def decision_archive(seed: int = 0, accepted: int = 8, abandoned: int = 4) -> list[ReviewRecord]:
    """Accepted reviews sample the training grammar; abandoned reviews a
    disjoint one."""
    records = []
    for i in range(accepted):
        code = grammar_lines(30, start=i)
        records.append(
            review_from_versions(
                f"acc{i:02d}", ACCEPTED, day=i, files={f"src/core{i}.py": (code, code)}
            )
        )
    for i in range(abandoned):
        code = grammar_lines(30, start=i, rules=ALT_GRAMMAR_RULES)
        records.append(
            review_from_versions(
                f"aband{i:02d}",
                ABANDONED,
                day=accepted + i,
                files={f"src/experiment{i}.py": (code, code)},
            )
        )
    return records


# Per-review churn used by churn_archive: (review id suffix, added+removed
# line budget per path). Kept literal so tests can tally it by hand.
CHURN_PLAN = (
    ("00", {"src/a.py": (6, 2), "conf/a.yaml": (1, 1), "doc/a.rst": (2, 0)}),
    ("01", {"src/b.py": (8, 0), "doc/b.txt": (1, 1)}),
    ("02", {"src/c.sh": (4, 4), "conf/c.json": (2, 0)}),
    ("03", {"src/d.js": (5, 1), "conf/d.yml": (1, 1), "doc/d.html": (1, 1)}),
    ("04", {"src/e.py": (10, 2)}),
    ("05", {"conf/f.xml": (3, 1), "doc/f.rst": (2, 2)}),
    ("06", {"src/g.py": (7, 1), "conf/g.pp": (2, 0), "notes/g.md": (3, 1)}),
    ("07", {"src/h.sh": (3, 1), "doc/h.php": (2, 0)}),
    ("08", {"src/i.js": (6, 2), "conf/i.yaml": (2, 2)}),
    ("09", {"doc/j.txt": (4, 0), "src/j.py": (4, 0)}),
    ("10", {"src/k.py": (9, 3), "conf/k.json": (1, 1), "doc/k.rst": (1, 1)}),
    ("11", {"src/l.py": (5, 5), "build/l.mk": (2, 2)}),
)


def churn_archive() -> list[ReviewRecord]:
    """Twelve reviews with literal, hand-tallyable churn per file kind."""
    records = []
    for day, (suffix, plan) in enumerate(CHURN_PLAN):
        files = []
        for path, (added, removed) in sorted(plan.items()):
            lines = [DiffLine(UNCHANGED, f"base line of {path}")]
            lines += [DiffLine(ADDED, f"added line {j} of {path}") for j in range(added)]
            lines += [DiffLine(REMOVED, f"removed line {j} of {path}") for j in range(removed)]
            files.append(FileDiff(path, tuple(lines)))
        records.append(
            ReviewRecord(
                f"churn{suffix}",
                ACCEPTED,
                (PatchRevision(1, _EPOCH + timedelta(days=day), tuple(files)),),
            )
        )
    return records


def single_kind_archive() -> list[ReviewRecord]:
    """Churn confined to programming files; pq1 preconditions fail on it."""
    records = []
    for i in range(3):
        code = grammar_lines(10, start=i)
        records.append(
            review_from_versions(
                f"solo{i:02d}", ACCEPTED, day=i, files={f"src/only{i}.py": ([], code)}
            )
        )
    return records
