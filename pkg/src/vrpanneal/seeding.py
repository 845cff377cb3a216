"""Deriving independent component seeds from one root seed.

Every random component of the pipeline gets its seed by hashing the root
seed together with a path of labels (for example "truck", 17, "solve"), so
runs are reproducible end to end and no two components share a stream.
"""

from __future__ import annotations

import hashlib


def derive_seed(root: int, *labels) -> int:
    """Stable 64-bit seed from a root seed and a label path."""
    if root < 0:
        raise ValueError("root seed must be non-negative")
    h = hashlib.sha256(str(int(root)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")
