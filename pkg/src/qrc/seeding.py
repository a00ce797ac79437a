"""Deterministic per-unit seeds.

Every (cell, sample) unit of a sweep gets its own 64-bit seed, obtained by
hashing the master seed together with the unit's coordinates::

    seed = int.from_bytes(blake2b(json([master, *coords]), digest_size=8), "little")

Coordinates are serialised with sorted keys and ``repr``-stable floats, so
the seed does not depend on worker count or execution order.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

SEED_SCHEME = "blake2b-64(json([master_seed, *coords]))"


def _canon(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _canon(v) for k, v in sorted(x.items())}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    if isinstance(x, float):
        return repr(x)
    if hasattr(x, "value"):  # enums
        return x.value
    return x


def derive_seed(master: int, *coords: Any) -> int:
    payload = json.dumps([int(master), *[_canon(c) for c in coords]], sort_keys=True)
    digest = hashlib.blake2b(payload.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")
