"""Counter-based random substreams.

Every path draws from its own Philox stream keyed by the run seed, with the
path index and a stream tag placed in the counter. A path's noise therefore
depends only on ``(seed, path_index, tag)``, never on how paths are batched
or scheduled.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

BROWNIAN = 0
JUMPS = 1

_MASK64 = (1 << 64) - 1


class Stream(NamedTuple):
    seed: int
    index: int = 0


def substream(seed: int, index: int, tag: int = BROWNIAN) -> np.random.Generator:
    seed, index = int(seed), int(index)
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    key = np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, tag, index], dtype=np.uint64)
    bitgen = np.random.Philox(key=key, counter=counter)
    return np.random.Generator(bitgen)


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed for a named sub-experiment."""
    state = np.random.SeedSequence([seed & _MASK64, *[int(t) & _MASK64 for t in tags]])
    return int(state.generate_state(1, np.uint64)[0])


def brownian_normals(seed: int, path_ids, n_steps: int) -> np.ndarray:
    """Standard normals of shape (len(path_ids), n_steps), one row per path."""
    path_ids = np.asarray(path_ids, dtype=np.int64)
    out = np.empty((path_ids.size, n_steps))
    for row, pid in enumerate(path_ids):
        out[row] = substream(seed, int(pid), BROWNIAN).standard_normal(n_steps)
    return out
