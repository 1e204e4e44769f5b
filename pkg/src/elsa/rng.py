"""Deterministic seed splitting.

Every random draw in the package hangs off an integer seed; child streams are
keyed by position (anchor index, trial id, ...) so that results are independent
of scheduling order.
"""
import numpy as np


def derive_seed(*keys: int) -> int:
    """Hash a tuple of non-negative integers into a 63-bit seed."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def anchor_generators(seed: int, n: int) -> list[np.random.Generator]:
    # Stream i belongs to anchor i.
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(seed)).spawn(n)]
