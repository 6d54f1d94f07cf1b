"""Stable hashing helpers.

FNV-1a is used wherever a cross-platform, documented 32-bit string hash is
needed (feature hashing buckets, broker key partitioning). Python's builtin
``hash`` is salted per process and therefore unusable for anything
persisted or replayed.
"""

from __future__ import annotations

import hashlib

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


def fnv1a_32(data: bytes | str) -> int:
    """32-bit FNV-1a hash of ``data``. Strings are hashed as UTF-8."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
