"""Stable seed derivation.

Built on sha256 so derived seeds never depend on PYTHONHASHSEED, platform,
or interpreter version.
"""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]


def derive_seed(*parts: object) -> int:
    """Map an ordered tuple of parts to a 64-bit seed, stably."""
    data = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")
