"""Paragraph hashing, binary hash files and windowed duplicate removal.

Each paragraph is keyed by the first 8 bytes (big-endian) of the SHA-1 of
its normalized text. Hash files hold the sorted unique keys of one shard
and are immutable once written, so workers can share them read-only; the
64-bit truncation silently accepts the (negligible at desk scale) risk of
losing a colliding paragraph.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .documents import Document
from .normalization import normalize_paragraph

HASH_FILE_MAGIC = b"CCHASH01"
BYTES_PER_HASH_ESTIMATE = 16  # upper bound used for memory reporting


def hash_paragraph(raw: str) -> int:
    """64-bit dedup key of a paragraph (hash of its normalized form)."""
    digest = hashlib.sha1(normalize_paragraph(raw).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class HashFile:
    """Sorted unique 64-bit paragraph hashes of one shard."""

    shard_id: int
    hashes: np.ndarray  # uint64, strictly ascending

    def __post_init__(self) -> None:
        self.hashes = np.asarray(self.hashes, dtype=np.uint64)

    def __len__(self) -> int:
        return len(self.hashes)

    def __contains__(self, value: int) -> bool:
        idx = np.searchsorted(self.hashes, np.uint64(value))
        return bool(idx < len(self.hashes) and self.hashes[idx] == np.uint64(value))

    def write(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(HASH_FILE_MAGIC)
            fh.write(struct.pack("<QQ", self.shard_id, len(self.hashes)))
            fh.write(self.hashes.astype("<u8").tobytes())

    @classmethod
    def read(cls, path: str | Path) -> "HashFile":
        path = Path(path)
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != HASH_FILE_MAGIC:
                raise ValueError(f"{path}: bad hash file magic {magic!r}")
            shard_id, count = struct.unpack("<QQ", fh.read(16))
            body = fh.read(8 * count)
            if len(body) != 8 * count:
                raise ValueError(f"{path}: truncated hash file")
            hashes = np.frombuffer(body, dtype="<u8").astype(np.uint64)
        if len(hashes) > 1 and not np.all(hashes[:-1] < hashes[1:]):
            raise ValueError(f"{path}: hashes not strictly ascending")
        return cls(shard_id=shard_id, hashes=hashes)


def build_hash_file(shard_id: int, docs: Iterable[Document]) -> HashFile:
    """Hash every paragraph of a shard into a sorted unique HashFile."""
    seen: set[int] = set()
    for doc in docs:
        for para in doc.raw_paragraphs:
            seen.add(hash_paragraph(para))
    hashes = np.fromiter(seen, dtype=np.uint64, count=len(seen))
    hashes.sort()
    return HashFile(shard_id=shard_id, hashes=hashes)


def _merge_priors(shard_index: int, prior: Sequence[HashFile]) -> np.ndarray:
    for hf in prior:
        if hf.shard_id >= shard_index:
            raise ValueError(
                f"dedup window violation: prior shard {hf.shard_id} >= {shard_index}"
            )
    if not prior:
        return np.empty(0, dtype=np.uint64)
    merged = np.concatenate([hf.hashes for hf in prior])
    merged.sort()
    return merged


def dedup_shard(
    shard_index: int,
    docs: Sequence[Document],
    prior: Sequence[HashFile],
) -> list[Document]:
    """Remove duplicated paragraphs from one shard.

    A paragraph goes iff its hash occurs in any prior shard's hash file or
    earlier in this shard (documents scanned in order, paragraphs in
    order: first occurrence wins). Documents left empty are dropped.
    """
    prior_hashes = _merge_priors(shard_index, prior)
    seen: set[int] = set()
    out: list[Document] = []
    for doc in docs:
        kept: list[str] = []
        for para in doc.raw_paragraphs:
            h = hash_paragraph(para)
            if h in seen:
                continue
            seen.add(h)
            if len(prior_hashes) and _in_sorted(prior_hashes, h):
                continue
            kept.append(para)
        if kept:
            if len(kept) == len(doc.raw_paragraphs):
                out.append(doc)
            else:
                out.append(
                    Document(
                        url=doc.url,
                        source_domain=doc.source_domain,
                        date_download=doc.date_download,
                        digest=doc.digest,
                        raw_paragraphs=kept,
                        language=doc.language,
                        language_score=doc.language_score,
                        perplexity=doc.perplexity,
                        bucket=doc.bucket,
                    )
                )
    return out


def _in_sorted(arr: np.ndarray, value: int) -> bool:
    v = np.uint64(value)
    idx = np.searchsorted(arr, v)
    return bool(idx < len(arr) and arr[idx] == v)


@dataclass
class RetentionRow:
    window: int
    chars_before: int
    chars_after: int
    retention: float
    est_memory_bytes: int


def retention_benchmark(
    docs: Sequence[Document],
    windows: Sequence[int],
    corpus: Sequence[HashFile],
    shard_index: int | None = None,
) -> list[RetentionRow]:
    """Measure character retention and hash-set memory per dedup window.

    ``corpus`` holds hash files of shards preceding the benchmarked one;
    window w loads the w files with the highest shard ids. Memory is the
    16-bytes-per-hash upper bound over loaded prior hashes plus the
    shard's own distinct hashes.
    """
    ordered = sorted(corpus, key=lambda hf: hf.shard_id)
    if shard_index is None:
        shard_index = ordered[-1].shard_id + 1 if ordered else 0
    chars_before = sum(doc.length for doc in docs)
    own_distinct = len(build_hash_file(shard_index, docs))
    rows: list[RetentionRow] = []
    for window in windows:
        if window > len(ordered):
            raise ValueError(
                f"window {window} exceeds available prior shards ({len(ordered)})"
            )
        prior = ordered[len(ordered) - window :] if window else []
        kept = dedup_shard(shard_index, docs, prior)
        chars_after = sum(doc.length for doc in kept)
        loaded = sum(len(hf) for hf in prior) + own_distinct
        rows.append(
            RetentionRow(
                window=window,
                chars_before=chars_before,
                chars_after=chars_after,
                retention=(chars_after / chars_before) if chars_before else 1.0,
                est_memory_bytes=loaded * BYTES_PER_HASH_ESTIMATE,
            )
        )
    return rows
