"""Counter-based keyed random streams.

Every random quantity in a drop is derived from (seed, purpose tag, ids),
never from a shared sequential generator, so results do not depend on
evaluation order or thread count. Two mechanisms are provided:

* ``substream`` returns a Philox generator for procedures that draw an
  unbounded number of variates sequentially (placement rejection sampling,
  failure masks).
* ``keyed_uniform`` / ``keyed_normal`` hash (seed, tag, ids, slot) directly
  into one variate per id, vectorized, for per-link LOS states and shadow
  fading.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Purpose tags. Fixed integers, never reordered: stream identities are part
# of the reproducibility contract.
TAG_RIS_DROP = 1
TAG_UE_DROP = 2
TAG_SITE_UE = 3
TAG_SITE_RIS = 4
TAG_RIS_UE = 5
TAG_FAILURE = 6
TAG_GRID_SITE = 7
TAG_GRID_RIS = 8

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _mix_key(seed: int, tag: int, *ids) -> np.ndarray | np.uint64:
    """Chain-hash a (seed, tag, ids...) tuple; ids may be integer arrays."""
    with np.errstate(over="ignore"):
        h = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        h = _splitmix64(h ^ np.uint64(tag))
        for v in ids:
            v64 = np.asarray(v).astype(np.uint64) if np.ndim(v) else np.uint64(int(v) & 0xFFFFFFFFFFFFFFFF)
            h = _splitmix64(h ^ v64)
    return h


def keyed_uniform(seed: int, tag: int, *ids, slot: int = 0):
    """Uniform variate(s) in (0, 1) keyed by (seed, tag, ids, slot).

    Integer-array ids broadcast against each other; the result has the
    broadcast shape (scalar ids give a scalar).
    """
    with np.errstate(over="ignore"):
        h = _mix_key(seed, tag, *ids)
        h = _splitmix64(h ^ np.uint64(0xD1B54A32D192ED03) ^ np.uint64(slot))
    u = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return u


def keyed_normal(seed: int, tag: int, *ids, slot: int = 0):
    """Standard normal variate(s) via inverse CDF of ``keyed_uniform``."""
    return ndtri(keyed_uniform(seed, tag, *ids, slot=slot))


def substream(seed: int, tag: int, *ids) -> np.random.Generator:
    """Sequential Philox generator keyed by (seed, tag, ids)."""
    k0 = int(_mix_key(seed, tag, *ids))
    k1 = int(_splitmix64(np.uint64(k0)))
    return np.random.Generator(np.random.Philox(key=(k0 << 64) | k1))
