"""Stable seed derivation.

Seeds for sub-components (per-factor networks, per-cell experiment runs) are
derived by hashing a descriptive tuple with SHA-256, so they do not depend on
process state, platform, or insertion order.  Python's builtin ``hash`` is
deliberately avoided (it is salted per process).
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Return a stable 64-bit seed from an arbitrary tuple of parts.

    Parts are rendered with ``repr`` and joined with a separator that cannot
    appear in the rendered ints/identifiers used throughout the package.
    """
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
