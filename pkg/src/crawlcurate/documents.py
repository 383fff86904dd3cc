"""Document data model, WET record ingestion, JSONL shard I/O and regrouping.

Shard files are gzip member streams with one JSON object per line. Key
order and float formatting are fixed so that identical inputs always
produce byte-identical shard files, and whole files can be concatenated
without recompression.
"""
from __future__ import annotations

import gzip
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator
from urllib.parse import urlsplit

logger = logging.getLogger(__name__)

# Sentinel language value for documents rejected by the LID gate.
DISCARDED = "discarded"

BUCKETS = ("head", "middle", "tail")


@dataclass
class Document:
    """One web page plus accumulated pipeline annotations."""

    url: str
    source_domain: str = ""
    date_download: str = ""
    digest: str = ""
    raw_paragraphs: list[str] = field(default_factory=list)
    language: str | None = None
    language_score: float | None = None
    perplexity: float | None = None
    bucket: str | None = None

    @property
    def nlines(self) -> int:
        return len(self.raw_paragraphs)

    @property
    def length(self) -> int:
        return sum(len(p) for p in self.raw_paragraphs)

    def to_json_line(self) -> str:
        obj: dict[str, object] = {
            "url": self.url,
            "source_domain": self.source_domain,
            "date_download": self.date_download,
            "digest": self.digest,
            "nlines": self.nlines,
            "length": self.length,
            "raw_content": "\n".join(self.raw_paragraphs),
        }
        if self.language is not None:
            obj["language"] = self.language
        if self.language_score is not None:
            obj["language_score"] = round(float(self.language_score), 4)
        if self.perplexity is not None:
            obj["perplexity"] = round(float(self.perplexity), 1)
        if self.bucket is not None:
            obj["bucket"] = self.bucket
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "Document":
        obj = json.loads(line)
        raw_content = obj.get("raw_content", "")
        doc = cls(
            url=obj["url"],
            source_domain=obj.get("source_domain", ""),
            date_download=obj.get("date_download", ""),
            digest=obj.get("digest", ""),
            raw_paragraphs=raw_content.split("\n") if raw_content else [],
            language=obj.get("language"),
            language_score=obj.get("language_score"),
            perplexity=obj.get("perplexity"),
            bucket=obj.get("bucket"),
        )
        return doc


def host_of(url: str) -> str:
    """Extract the host part of a URL ("" if there is none)."""
    try:
        return urlsplit(url).netloc
    except ValueError:
        return ""


class WetParseStats:
    """Counters accumulated while ingesting a WET stream."""

    def __init__(self) -> None:
        self.records = 0
        self.documents = 0
        self.skipped_non_conversion = 0
        self.malformed_headers = 0
        self.decode_errors = 0


def _read_header(stream: BinaryIO, first: bytes | None = None) -> list[bytes] | None:
    """Read one header block (up to the blank line). None at EOF.

    ``first`` is a header line already consumed by resynchronization.
    """
    lines: list[bytes] = [] if first is None else [first]
    while True:
        line = stream.readline()
        if not line:
            return lines if lines else None
        stripped = line.rstrip(b"\r\n")
        if not stripped:
            if lines:
                return lines
            continue  # tolerate extra blank lines between records
        lines.append(stripped)


def ingest_wet(
    stream: BinaryIO,
    gzipped: bool = False,
    stats: WetParseStats | None = None,
) -> Iterator[Document]:
    """Parse a WET byte stream into Documents.

    A record is a header block of ``Key: Value`` lines opened by a version
    line and closed by a blank line, followed by exactly Content-Length
    payload bytes and two blank lines. Records whose WARC-Type is not
    ``conversion`` are skipped. A header without a parsable Content-Length
    is counted and skipped by resynchronizing on the next version line;
    payload bytes that are not valid UTF-8 are decoded with replacement and
    counted.
    """
    if stats is None:
        stats = WetParseStats()
    if gzipped:
        stream = gzip.GzipFile(fileobj=stream, mode="rb")  # type: ignore[assignment]

    pending_version: bytes | None = None
    while True:
        header_lines = _read_header(stream, first=pending_version)
        pending_version = None
        if header_lines is None:
            return
        stats.records += 1

        headers: dict[str, str] = {}
        for raw in header_lines[1:]:  # first line is the version line
            text = raw.decode("utf-8", "replace")
            key, sep, value = text.partition(":")
            if sep:
                headers[key.strip().lower()] = value.strip()

        try:
            content_length = int(headers["content-length"])
            if content_length < 0:
                raise ValueError(content_length)
        except (KeyError, ValueError):
            stats.malformed_headers += 1
            logger.warning("WET record with missing/invalid Content-Length, skipping")
            pending_version = _resync(stream)
            continue

        payload = stream.read(content_length)
        # Consume the two blank lines that terminate the record (tolerant at EOF).
        for _ in range(2):
            sep_line = stream.readline()
            if sep_line and sep_line.rstrip(b"\r\n"):
                # Payload ended early; the line belongs to the next record.
                stripped = sep_line.rstrip(b"\r\n")
                if stripped.startswith(b"WARC/"):
                    pending_version = stripped
                else:
                    pending_version = _resync(stream)
                break

        if headers.get("warc-type", "").lower() != "conversion":
            stats.skipped_non_conversion += 1
            continue

        try:
            text = payload.decode("utf-8")
        except UnicodeDecodeError:
            text = payload.decode("utf-8", "replace")
            stats.decode_errors += 1

        url = headers.get("warc-target-uri", "")
        paragraphs = [line for line in (ln.rstrip("\r") for ln in text.split("\n")) if line]
        stats.documents += 1
        yield Document(
            url=url,
            source_domain=host_of(url),
            date_download=headers.get("warc-date", ""),
            digest=hashlib.sha1(payload).hexdigest(),
            raw_paragraphs=paragraphs,
        )


def _resync(stream: BinaryIO) -> bytes | None:
    """Skip forward to the next version line and return it (None at EOF).

    Used to recover from a record whose payload length is unknown.
    """
    while True:
        line = stream.readline()
        if not line:
            return None
        stripped = line.rstrip(b"\r\n")
        if stripped.startswith(b"WARC/"):
            return stripped


def write_shard(docs: Iterable[Document], path: str | Path) -> int:
    """Write documents to a gzip JSONL shard file. Returns document count.

    The gzip member carries no filename and a zero mtime so output bytes
    depend only on input documents.
    """
    path = Path(path)
    count = 0
    try:
        with open(path, "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
                for doc in docs:
                    gz.write(doc.to_json_line().encode("utf-8"))
                    gz.write(b"\n")
                    count += 1
    except OSError as exc:
        raise OSError(f"failed writing shard {path}: {exc}") from exc
    return count


def read_shard(path: str | Path) -> Iterator[Document]:
    """Read documents from a gzip JSONL shard (member concatenation ok)."""
    path = Path(path)
    try:
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield Document.from_json_line(line)
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ValueError(
                        f"corrupt shard {path} at line {lineno}: {exc}"
                    ) from exc
    except OSError as exc:
        raise OSError(f"failed reading shard {path}: {exc}") from exc


def regroup(inputs: list[str | Path], target_bytes: int, out_dir: str | Path,
            prefix: str = "regrouped") -> list[Path]:
    """Concatenate whole shard files into outputs of roughly target size.

    Inputs must be gzip member streams of one (language, bucket) cell; the
    concatenation is byte-level, order preserving, and never splits an
    input file. An input larger than the target becomes its own output.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: list[list[Path]] = []
    current: list[Path] = []
    current_size = 0
    for inp in inputs:
        inp = Path(inp)
        size = inp.stat().st_size
        if current and current_size + size > target_bytes:
            groups.append(current)
            current = []
            current_size = 0
        current.append(inp)
        current_size += size
    if current:
        groups.append(current)

    outputs: list[Path] = []
    for i, group in enumerate(groups):
        out_path = out_dir / f"{prefix}-{i:04d}.json.gz"
        try:
            with open(out_path, "wb") as out:
                for member in group:
                    with open(member, "rb") as src:
                        while True:
                            chunk = src.read(1 << 20)
                            if not chunk:
                                break
                            out.write(chunk)
        except OSError as exc:
            raise OSError(f"failed regrouping into {out_path}: {exc}") from exc
        outputs.append(out_path)
    return outputs
