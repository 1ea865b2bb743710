"""Deterministic seed derivation.

Every random stream in the library is derived from a single base seed plus a
path of labels, so runs are reproducible regardless of execution order.
"""

import hashlib

__all__ = ["derive_seed"]


def derive_seed(base: int, *parts: int | str) -> int:
    """Derive a stable 63-bit seed from ``base`` and a label path."""
    text = ":".join([str(int(base))] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
