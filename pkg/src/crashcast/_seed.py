"""Stable sub-seed derivation, identical across platforms and runs."""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *parts: object) -> int:
    """Derive a child seed from a root seed and a label path.

    Hash-based so that (seed, "shots", "SYS-3", 7) and (seed, "system", 12)
    never collide the way arithmetic mixing could.
    """
    text = ":".join([str(seed), *[str(p) for p in parts]])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
