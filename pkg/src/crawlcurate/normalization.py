"""Canonical paragraph normalization used for hashing.

The normalized form is only ever fed to the dedup hasher; stored document
text is never modified.
"""
from __future__ import annotations

import re
import unicodedata

_WHITESPACE_RE = re.compile(r"\s+")


def normalize_paragraph(raw: str) -> str:
    """Normalize a paragraph for duplicate hashing.

    Applies, in order: Unicode lowercasing, canonical decomposition with
    removal of combining marks, replacement of every decimal digit by "0",
    removal of all Unicode punctuation (categories P*), and collapsing of
    whitespace runs to a single space with outer whitespace stripped.

    The mark, digit and punctuation categories are disjoint, so the three
    middle steps are done in a single pass.
    """
    text = unicodedata.normalize("NFD", raw.lower())
    kept = []
    for ch in text:
        cat = unicodedata.category(ch)
        if cat.startswith("M") or cat.startswith("P"):
            continue
        if cat == "Nd":
            kept.append("0")
            continue
        kept.append(ch)
    return _WHITESPACE_RE.sub(" ", "".join(kept)).strip()
