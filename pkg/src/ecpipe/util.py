"""Seed derivation and content hashing for reproducible runs."""

from __future__ import annotations

import hashlib
import json


def derive_seed(*parts) -> int:
    """Stable sub-seed from a master seed and a role description.

    Hash-based so the same (seed, role, ...) tuple yields the same stream
    on every platform and run.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def content_key(config: dict, input_digests: dict[str, str]) -> str:
    """Short address for (config, inputs): reruns land in the same slot."""
    canonical = json.dumps({"config": config, "inputs": input_digests},
                           sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
