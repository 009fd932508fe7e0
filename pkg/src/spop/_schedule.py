"""Round-robin pair schedules for Jacobi sweeps.

A sweep visits every index pair (i, j), i < j, exactly once.  Pairs are
grouped into rounds of mutually disjoint pairs (circle method), so a round
can be applied as one batched rotation: disjoint pairs touch disjoint
columns and commute.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=128)
def pair_rounds(n: int) -> tuple[np.ndarray, ...]:
    """All (i, j) pairs of range(n), grouped into disjoint rounds.

    Returns a tuple of int64 arrays of shape (k, 2) with i < j, sorted
    within each round. n < 2 yields an empty tuple.
    """
    if n < 2:
        return ()
    players = list(range(n))
    if n % 2:
        players.append(-1)  # bye
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a >= 0 and b >= 0:
                pairs.append((min(a, b), max(a, b)))
        pairs.sort()
        rounds.append(np.array(pairs, dtype=np.int64))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


@lru_cache(maxsize=128)
def flat_pairs(n: int) -> np.ndarray:
    """Concatenation of pair_rounds(n) into one (P, 2) int64 array."""
    rounds = pair_rounds(n)
    if not rounds:
        return np.empty((0, 2), dtype=np.int64)
    return np.ascontiguousarray(np.concatenate(rounds, axis=0))
