"""Command-line front end: ingest, train, experiment.

Every successful command writes a run manifest recording the command, a
hash of its configuration, the input archive digest, the tool version, and
the output paths; identical (archive digest, config hash, version) runs
reproduce byte-identical CSV/JSON outputs. Trained models are cached under
``$CONFLENS_CACHE`` (default: ``~/.cache/conflens``) keyed by that hash.

Exit codes: 0 ok, 1 I/O failure, 2 domain precondition failure, 64 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, analysis, gerrit, ngram, reports
from .lexing import classify_file
from .reviews import (
    ACCEPTED,
    ArchiveError,
    parse_review_archive,
    serialize_review_archive,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_USAGE = 64

EXPERIMENTS = ("pq1", "pq2", "rq1", "rq2", "table3", "table4")


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    archive_digest: str
    tool_version: str
    started: str
    finished: str
    outputs: list[str]


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(manifest: RunManifest, out_dir: Path, stamp: str) -> Path:
    path = out_dir / f"{manifest.command}_{stamp}.manifest.json"
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def cache_dir() -> Path:
    env = os.environ.get("CONFLENS_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "conflens"


def _parse_orders(text: str) -> tuple[int, ...]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            orders = tuple(range(int(lo), int(hi) + 1))
        else:
            orders = (int(text),)
    except ValueError:
        raise UsageError(f"cannot parse order range {text!r}") from None
    if not orders or any(n < 1 or n > 9 for n in orders):
        raise UsageError(f"orders must lie in 1..9, got {text!r}")
    return orders


def _parse_mode(text: str) -> str:
    if text in ("first_vs_last", "diff_sides"):
        return "first_vs_last" if text == "first_vs_last" else "diff_sides_of_final"
    raise UsageError(f"mode must be first_vs_last or diff_sides, got {text!r}")


def _load_archive(path_text: str):
    path = Path(path_text)
    if not path.is_file():
        raise FileNotFoundError(f"archive not found: {path}")
    errors: list[ArchiveError] = []
    records = parse_review_archive(path.read_bytes(), on_error="skip", errors=errors)
    return path, records, errors


def build_parser() -> _Parser:
    parser = _Parser(prog="conflens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"conflens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="validate an archive or fetch one from a Gerrit endpoint")
    ingest.add_argument("input", help="archive file path or Gerrit endpoint URL")
    ingest.add_argument("-o", "--output", required=True, help="output archive path")
    ingest.add_argument("--fail-fast", action="store_true", help="exit 2 on the first malformed record")
    ingest.add_argument("--query", default="status:merged OR status:abandoned",
                        help="Gerrit change query (endpoint input only)")
    ingest.add_argument("--page-size", type=int, default=100)

    train = sub.add_parser("train", help="train and serialize an n-gram model")
    train.add_argument("archive")
    train.add_argument("-o", "--output", required=True, help="model output path")
    train.add_argument("--order", default="3", help="model order (single integer 1..9)")
    train.add_argument("--smoothing", default=ngram.DEFAULT_SMOOTHING,
                       help="mkn | additive=<delta> | mle")
    train.add_argument("--ext", help="train only on this extension, e.g. .py")
    train.add_argument("--kind", help="train only on this file kind")
    train.add_argument("--mode", default="first_vs_last")
    train.add_argument("--unk-threshold", type=int, default=ngram.DEFAULT_UNK_THRESHOLD)

    experiment = sub.add_parser("experiment", help="run an analysis and write CSV/JSON reports")
    experiment.add_argument("archive")
    experiment.add_argument("name", choices=EXPERIMENTS)
    experiment.add_argument("--out", default=".", help="output directory")
    experiment.add_argument("--order", default="3..9", help="order range A..B or single order")
    experiment.add_argument("--smoothing", default=ngram.DEFAULT_SMOOTHING)
    experiment.add_argument("--mode", default="first_vs_last")
    experiment.add_argument("--train-policy", choices=("loo", "chrono"), default="loo")
    experiment.add_argument("--ext", help="comma-separated extensions filter")
    experiment.add_argument("--kind", help="comma-separated kinds filter")
    experiment.add_argument("--jobs", type=int, default=1)
    experiment.add_argument("--format", choices=reports.FORMATS, default="both")
    experiment.add_argument("--seed", type=int, default=0)
    experiment.add_argument("--k", type=int, default=3, help="top-k for table4")
    return parser


def cmd_ingest(args) -> int:
    started = _utcnow()
    if args.input.startswith(("http://", "https://")):
        data = gerrit.fetch_reviews(args.input, args.query, args.page_size)
    else:
        path = Path(args.input)
        if not path.is_file():
            raise FileNotFoundError(f"input not found: {path}")
        data = path.read_bytes()
    errors: list[ArchiveError] = []
    on_error = "raise" if args.fail_fast else "skip"
    try:
        records = parse_review_archive(data, on_error=on_error, errors=errors)
    except ArchiveError as exc:
        raise DomainError(f"malformed archive: {exc}") from exc
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(serialize_review_archive(records), "utf-8")
    stamp = reports.report_timestamp()
    manifest = RunManifest(
        command="ingest",
        config_hash=_config_hash({"input": args.input, "fail_fast": args.fail_fast}),
        archive_digest=hashlib.sha256(data).hexdigest(),
        tool_version=__version__,
        started=started,
        finished=_utcnow(),
        outputs=[str(output)],
    )
    _write_manifest(manifest, output.parent, stamp)
    print(f"{len(records)} records, {len(errors)} skipped")
    return EXIT_OK


def _training_streams(records, args):
    config = analysis.ExperimentConfig(mode=_parse_mode(args.mode))
    reviews = analysis.prepare_review_streams(records, config)
    streams = []
    for review in reviews:
        if review.status != ACCEPTED:
            continue
        for stream in review.post:
            if args.ext and stream.extension != args.ext:
                continue
            if args.kind and classify_file(stream.path) != args.kind:
                continue
            streams.append(stream)
    return streams


def cmd_train(args) -> int:
    started = _utcnow()
    orders = _parse_orders(args.order)
    if len(orders) != 1:
        raise UsageError("train takes a single order, not a range")
    try:
        ngram.parse_smoothing(args.smoothing)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    archive_path, records, _ = _load_archive(args.archive)
    streams = _training_streams(records, args)
    if not streams:
        raise DomainError("empty training corpus after filters")
    config_payload = {
        "order": orders[0],
        "smoothing": args.smoothing,
        "ext": args.ext,
        "kind": args.kind,
        "mode": args.mode,
        "unk_threshold": args.unk_threshold,
    }
    config_hash = _config_hash(config_payload)
    archive_digest = _file_digest(archive_path)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)

    key = hashlib.sha256(f"{archive_digest}:{config_hash}:{__version__}".encode()).hexdigest()
    cached = cache_dir() / "models" / f"{key}.ngram"
    if cached.is_file():
        logger.info("model cache hit: %s", cached)
        shutil.copyfile(cached, output)
    else:
        counts = ngram.count_ngrams(streams, orders[0])
        model = ngram.train(counts, args.smoothing, unk_threshold=args.unk_threshold)
        ngram.save_model(model, output)
        cached.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(output, cached)
    stamp = reports.report_timestamp()
    manifest = RunManifest(
        command="train",
        config_hash=config_hash,
        archive_digest=archive_digest,
        tool_version=__version__,
        started=started,
        finished=_utcnow(),
        outputs=[str(output)],
    )
    _write_manifest(manifest, output.parent, stamp)
    print(f"model written to {output} (order={orders[0]}, smoothing={args.smoothing})")
    return EXIT_OK


def _experiment_config(args) -> analysis.ExperimentConfig:
    kwargs = {
        "orders": _parse_orders(args.order),
        "mode": _parse_mode(args.mode),
        "train_policy": args.train_policy,
        "smoothing": args.smoothing,
        "jobs": args.jobs,
        "seed": args.seed,
    }
    if args.ext:
        kwargs["extensions"] = tuple(e.strip() for e in args.ext.split(",") if e.strip())
    if args.kind:
        kwargs["kinds"] = tuple(k.strip() for k in args.kind.split(",") if k.strip())
    try:
        return analysis.ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_experiment(args) -> int:
    started = _utcnow()
    archive_path, records, _ = _load_archive(args.archive)
    if not records:
        raise DomainError("archive contains no valid records")
    config = _experiment_config(args)

    if args.name == "pq1":
        result = analysis.churn_by_kind(records)
        kinds_with_churn = sum(
            1
            for kind in analysis.ANALYSIS_KINDS
            if any(row[kind] > 0 for row in result.per_review)
        )
        if kinds_with_churn < 2:
            raise DomainError("pq1 needs churn in at least two file kinds")
        rows = [
            {
                "kind": kind,
                "mean_proportion": result.means[kind],
                "review_count": len(result.per_review),
            }
            for kind in analysis.ANALYSIS_KINDS
        ]
        extra = {
            "test": {
                "statistic": result.test.statistic,
                "degrees_of_freedom": result.test.degrees_of_freedom,
                "p_value": result.test.p_value,
                "group_sizes": list(result.test.group_sizes),
            },
            "other_churn": result.other_total,
        }
    elif args.name == "pq2":
        rows = analysis.entropy_by_kind(records, config)
        extra = None
    elif args.name == "rq1":
        rows = analysis.pre_vs_post_entropy(records, config)
        extra = None
    elif args.name == "rq2":
        decisions = {record.status for record in records}
        if len(decisions) < 2:
            raise DomainError("rq2 needs both accepted and abandoned reviews")
        rows = analysis.accepted_vs_abandoned(records, config)
        extra = None
    elif args.name == "table3":
        rows = analysis.syntax_proportions(records, config)
        extra = None
    else:
        rows = analysis.top_changed_tokens(records, args.k, config)
        extra = None

    config_payload = {
        "experiment": args.name,
        "orders": list(config.orders),
        "extensions": list(config.extensions),
        "kinds": list(config.kinds),
        "mode": config.mode,
        "train_policy": config.train_policy,
        "smoothing": config.smoothing,
        "unk_threshold": config.unk_threshold,
        "aggregate": config.aggregate,
        "seed": config.seed,
        "k": args.k,
    }
    archive_digest = _file_digest(archive_path)
    json_extra = {"config": config_payload, "archive_digest": archive_digest}
    if extra:
        json_extra.update(extra)
    stamp = reports.report_timestamp()
    out_dir = Path(args.out)
    written = reports.write_reports(args.name, rows, out_dir, args.format, json_extra, stamp)
    manifest = RunManifest(
        command=f"experiment-{args.name}",
        config_hash=_config_hash(config_payload),
        archive_digest=archive_digest,
        tool_version=__version__,
        started=started,
        finished=_utcnow(),
        outputs=[str(p) for p in written],
    )
    _write_manifest(manifest, out_dir, stamp)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"ingest": cmd_ingest, "train": cmd_train, "experiment": cmd_experiment}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"conflens: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, gerrit.FetchError) as exc:
        print(f"conflens: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ngram.ModelError) as exc:
        print(f"conflens: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
