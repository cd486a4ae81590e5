"""Gerrit-style REST client producing review archives.

Walks the paginated ``/changes/`` query, then each change's revisions and
per-file diffs, and converts everything into the line-delimited archive
format. The diff endpoint's content blocks map directly onto line ops:
``ab`` is unchanged, ``a`` removed, ``b`` added.

Requests honor an optional pass-through header dict (token auth etc.) and
retry transient failures a configurable number of times before raising
:class:`FetchError`.
"""

from __future__ import annotations

import json
import logging
import time
from typing import Mapping
from urllib.parse import quote

import requests

logger = logging.getLogger(__name__)

XSSI_PREFIX = ")]}'"

_STATUS_MAP = {"MERGED": "accepted", "ABANDONED": "abandoned"}


class FetchError(Exception):
    """Retriable fetch failure, raised once retries are exhausted."""


def _strip_xssi(text: str) -> str:
    if text.startswith(XSSI_PREFIX):
        text = text[len(XSSI_PREFIX):]
    return text.lstrip("\n")


def _get_json(
    session: requests.Session,
    url: str,
    *,
    params: Mapping | None = None,
    headers: Mapping | None = None,
    retries: int = 3,
    backoff: float = 0.5,
):
    last_error = None
    for attempt in range(retries):
        try:
            response = session.get(url, params=params, headers=headers, timeout=30)
            if response.status_code >= 400:
                last_error = f"HTTP {response.status_code} from {url}"
            else:
                return json.loads(_strip_xssi(response.text))
        except (requests.RequestException, json.JSONDecodeError) as exc:
            last_error = f"{type(exc).__name__}: {exc}"
        if attempt + 1 < retries and backoff > 0:
            time.sleep(backoff * (attempt + 1))
    raise FetchError(f"giving up on {url} after {retries} attempts: {last_error}")


def _convert_timestamp(raw: str) -> str:
    # Gerrit emits "2021-03-01 12:00:00.000000000"; pass ISO through.
    text = raw.strip().replace(" ", "T", 1)
    if "." in text:
        text = text.split(".", 1)[0]
    return text.rstrip("Z") + "Z"


def _change_review_id(change: Mapping) -> str:
    number = change.get("_number")
    if number is not None:
        return str(number)
    return str(change["id"])


def fetch_reviews(
    endpoint: str,
    query: str,
    page_size: int,
    *,
    headers: Mapping | None = None,
    retries: int = 3,
    backoff: float = 0.5,
    session: requests.Session | None = None,
) -> bytes:
    """Fetch all matching changes and return an archive byte stream."""
    if page_size < 1:
        raise ValueError(f"page_size must be positive, got {page_size}")
    endpoint = endpoint.rstrip("/")
    session = session or requests.Session()
    lines: list[str] = []
    seen: set[str] = set()
    offset = 0
    while True:
        page = _get_json(
            session,
            f"{endpoint}/changes/",
            params={"q": query, "n": page_size, "S": offset, "o": "ALL_REVISIONS"},
            headers=headers,
            retries=retries,
            backoff=backoff,
        )
        if not isinstance(page, list):
            raise FetchError(f"expected a change list from {endpoint}, got {type(page).__name__}")
        if not page:
            break
        page_ids = {_change_review_id(change) for change in page}
        if page_ids <= seen:
            raise FetchError("pagination loop: server repeated an already-fetched page")
        for change in page:
            review_id = _change_review_id(change)
            if review_id in seen:
                continue
            seen.add(review_id)
            record = _convert_change(
                session, endpoint, change,
                headers=headers, retries=retries, backoff=backoff,
            )
            if record is not None:
                lines.append(json.dumps(record, ensure_ascii=False))
        offset += len(page)
        if not page[-1].get("_more_changes") and len(page) < page_size:
            break
        # A full page without _more_changes can come from servers that omit
        # the flag; the next, empty page terminates the walk.
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def _convert_change(
    session: requests.Session,
    endpoint: str,
    change: Mapping,
    *,
    headers: Mapping | None,
    retries: int,
    backoff: float,
) -> dict | None:
    review_id = _change_review_id(change)
    status = _STATUS_MAP.get(str(change.get("status", "")).upper())
    if status is None:
        logger.warning("change %s has undecided status %r; skipped", review_id, change.get("status"))
        return None
    revisions = sorted(
        (info for info in change.get("revisions", {}).values()),
        key=lambda info: info["_number"],
    )
    out_revisions = []
    for info in revisions:
        number = info["_number"]
        base = f"{endpoint}/changes/{quote(review_id, safe='')}/revisions/{number}"
        files = _get_json(
            session, f"{base}/files/", headers=headers, retries=retries, backoff=backoff
        )
        out_files = []
        for path in sorted(files):
            if path.startswith("/"):  # magic entries like /COMMIT_MSG
                continue
            diff = _get_json(
                session,
                f"{base}/files/{quote(path, safe='')}/diff",
                headers=headers,
                retries=retries,
                backoff=backoff,
            )
            out_lines = []
            for block in diff.get("content", []):
                for text in block.get("ab", []):
                    out_lines.append({"op": "unchanged", "text": text})
                for text in block.get("a", []):
                    out_lines.append({"op": "removed", "text": text})
                for text in block.get("b", []):
                    out_lines.append({"op": "added", "text": text})
            out_files.append({"path": path, "lines": out_lines})
        out_revisions.append(
            {
                "revision_number": number,
                "created": _convert_timestamp(info["created"]),
                "files": out_files,
            }
        )
    return {"review_id": review_id, "status": status, "revisions": out_revisions}
