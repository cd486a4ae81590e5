"""Review archives: parsing, pre/post version reconstruction, and churn.

The archive format is line-delimited JSON, one review per line:

    {"review_id": str,
     "status": "accepted" | "abandoned",
     "revisions": [{"revision_number": int,
                    "created": "<ISO-8601 UTC>",
                    "files": [{"path": str,
                               "lines": [{"op": "added"|"removed"|"unchanged",
                                          "text": str}]}]}]}

Line annotations carry everything needed to rebuild both sides of a patch:
the pre-review version is the unchanged+removed lines in diff order, the
post-review version the unchanged+added lines.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator

logger = logging.getLogger(__name__)

ACCEPTED = "accepted"
ABANDONED = "abandoned"
STATUSES = frozenset({ACCEPTED, ABANDONED})

ADDED = "added"
REMOVED = "removed"
UNCHANGED = "unchanged"
LINE_OPS = frozenset({ADDED, REMOVED, UNCHANGED})

PRE = "pre"
POST = "post"

# Revision-pair selection modes for select_review_versions().
FIRST_VS_LAST = "first_vs_last"
DIFF_SIDES_OF_FINAL = "diff_sides_of_final"
SELECTION_MODES = frozenset({FIRST_VS_LAST, DIFF_SIDES_OF_FINAL})


class ArchiveError(Exception):
    """A malformed archive record. Carries the zero-based record index."""

    def __init__(self, message: str, record_index: int | None = None):
        if record_index is not None:
            message = f"{message} at record {record_index}"
        super().__init__(message)
        self.record_index = record_index


@dataclass(frozen=True)
class DiffLine:
    op: str
    text: str


@dataclass(frozen=True)
class FileDiff:
    path: str
    lines: tuple[DiffLine, ...]


@dataclass(frozen=True)
class PatchRevision:
    revision_number: int
    created: datetime
    files: tuple[FileDiff, ...]


@dataclass(frozen=True)
class ReviewRecord:
    review_id: str
    status: str
    revisions: tuple[PatchRevision, ...]


@dataclass(frozen=True)
class FileVersion:
    path: str
    side: str
    lines: tuple[str, ...]


@dataclass(frozen=True)
class ChurnStats:
    path: str
    added: int
    removed: int

    @property
    def churn(self) -> int:
        return self.added + self.removed


def _parse_created(value, index: int) -> datetime:
    if not isinstance(value, str):
        raise ArchiveError(f"created must be an ISO-8601 string, got {value!r}", index)
    raw = value[:-1] + "+00:00" if value.endswith("Z") else value
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError:
        raise ArchiveError(f"unparseable created timestamp {value!r}", index) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _format_created(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _require(payload: dict, key: str, index: int):
    if key not in payload:
        raise ArchiveError(f"missing required field {key!r}", index)
    return payload[key]


def record_from_dict(payload: dict, index: int = 0) -> ReviewRecord:
    """Build one validated ReviewRecord from a decoded archive record."""
    if not isinstance(payload, dict):
        raise ArchiveError("record is not a JSON object", index)
    review_id = _require(payload, "review_id", index)
    if not isinstance(review_id, str) or not review_id:
        raise ArchiveError("review_id must be a non-empty string", index)
    status = _require(payload, "status", index)
    if status not in STATUSES:
        raise ArchiveError(f"unknown status {status!r}", index)
    raw_revisions = _require(payload, "revisions", index)
    if not isinstance(raw_revisions, list) or not raw_revisions:
        raise ArchiveError("revisions must be a non-empty list", index)

    revisions = []
    previous_number = 0
    for raw_rev in raw_revisions:
        if not isinstance(raw_rev, dict):
            raise ArchiveError("revision is not a JSON object", index)
        number = _require(raw_rev, "revision_number", index)
        if not isinstance(number, int) or number < 1:
            raise ArchiveError(f"revision_number must be a positive integer, got {number!r}", index)
        if number <= previous_number:
            raise ArchiveError(
                f"non-monotonic revision numbers ({previous_number} then {number})", index
            )
        previous_number = number
        created = _parse_created(_require(raw_rev, "created", index), index)
        raw_files = _require(raw_rev, "files", index)
        if not isinstance(raw_files, list):
            raise ArchiveError("files must be a list", index)
        files = []
        seen_paths = set()
        for raw_file in raw_files:
            path = _require(raw_file, "path", index)
            if not isinstance(path, str) or not path:
                raise ArchiveError("file path must be a non-empty string", index)
            if path in seen_paths:
                raise ArchiveError(f"duplicate file path {path!r} within revision {number}", index)
            seen_paths.add(path)
            lines = []
            for raw_line in _require(raw_file, "lines", index):
                op = _require(raw_line, "op", index)
                if op not in LINE_OPS:
                    raise ArchiveError(f"unknown line op {op!r}", index)
                text = _require(raw_line, "text", index)
                if not isinstance(text, str):
                    raise ArchiveError("line text must be a string", index)
                lines.append(DiffLine(op, text))
            files.append(FileDiff(path, tuple(lines)))
        revisions.append(PatchRevision(number, created, tuple(files)))
    return ReviewRecord(review_id, status, tuple(revisions))


def record_to_dict(record: ReviewRecord) -> dict:
    return {
        "review_id": record.review_id,
        "status": record.status,
        "revisions": [
            {
                "revision_number": rev.revision_number,
                "created": _format_created(rev.created),
                "files": [
                    {
                        "path": diff.path,
                        "lines": [{"op": line.op, "text": line.text} for line in diff.lines],
                    }
                    for diff in rev.files
                ],
            }
            for rev in record.revisions
        ],
    }


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        yield from source.splitlines()
        return
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        yield line.rstrip("\n")


def parse_review_archive(
    source: bytes | str | IO | Iterable[str],
    on_error: str = "skip",
    errors: list[ArchiveError] | None = None,
) -> list[ReviewRecord]:
    """Parse an archive into ReviewRecords, preserving input order.

    ``on_error`` is ``"skip"`` (log and drop malformed records, the default
    for corpus-scale ingestion) or ``"raise"`` (fail fast). Skipped errors
    are appended to ``errors`` when a list is supplied.
    """
    if on_error not in ("skip", "raise"):
        raise ValueError(f"on_error must be 'skip' or 'raise', got {on_error!r}")
    records = []
    for index, line in enumerate(_iter_lines(source)):
        if not line.strip():
            continue
        try:
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ArchiveError(f"invalid JSON: {exc.msg}", index) from None
            records.append(record_from_dict(payload, index))
        except ArchiveError as exc:
            if on_error == "raise":
                raise
            logger.warning("skipping malformed record: %s", exc)
            if errors is not None:
                errors.append(exc)
    return records


def serialize_review_archive(records: Iterable[ReviewRecord]) -> str:
    """Serialize records to the line-delimited archive format."""
    return "".join(
        json.dumps(record_to_dict(record), ensure_ascii=False) + "\n" for record in records
    )


def reconstruct_versions(diff: FileDiff) -> tuple[FileVersion, FileVersion]:
    """Split a line-annotated diff into its pre and post file versions.

    Pre keeps the unchanged+removed lines, post the unchanged+added lines,
    both in diff order.
    """
    pre = tuple(line.text for line in diff.lines if line.op in (UNCHANGED, REMOVED))
    post = tuple(line.text for line in diff.lines if line.op in (UNCHANGED, ADDED))
    return FileVersion(diff.path, PRE, pre), FileVersion(diff.path, POST, post)


def compute_churn(diff: FileDiff) -> ChurnStats:
    """Count added and removed lines; churn is their sum."""
    added = sum(1 for line in diff.lines if line.op == ADDED)
    removed = sum(1 for line in diff.lines if line.op == REMOVED)
    return ChurnStats(diff.path, added, removed)


def select_review_versions(
    record: ReviewRecord, mode: str = FIRST_VS_LAST
) -> tuple[list[FileVersion], list[FileVersion]]:
    """Pick the file versions that play the pre and post roles for a review.

    ``first_vs_last`` compares the first uploaded revision against the final
    one (each taken as the reconstructed post-side of its diffs), so a
    single-revision review has pre == post. ``diff_sides_of_final`` takes
    both sides of the final revision's diffs.
    """
    if mode not in SELECTION_MODES:
        raise ValueError(f"unknown selection mode {mode!r}")
    if not record.revisions:
        raise ValueError(f"review {record.review_id!r} has no revisions")
    final = record.revisions[-1]
    if mode == FIRST_VS_LAST:
        first = record.revisions[0]
        pre_files = [
            FileVersion(fv.path, PRE, fv.lines)
            for fv in (reconstruct_versions(diff)[1] for diff in first.files)
        ]
        post_files = [reconstruct_versions(diff)[1] for diff in final.files]
        return pre_files, post_files
    pre_files = []
    post_files = []
    for diff in final.files:
        pre, post = reconstruct_versions(diff)
        pre_files.append(pre)
        post_files.append(post)
    return pre_files, post_files
