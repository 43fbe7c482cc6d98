from __future__ import annotations

import numpy as np


def derive_seed(*parts: int) -> int:
    """Mix integers into one 64-bit seed; stable across platforms and runs."""
    seq = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
