"""Deterministic random streams.

Two kinds of randomness are used:

* per-trial numpy ``Generator`` objects built from a counter-based Philox
  key ``(master_seed, trial_index)`` -- results are therefore independent
  of how trials are scheduled across workers;
* per-block 64-bit keys inside the population engine, chained with a
  splitmix64 mix so that a block's split time and split outcome depend
  only on its genealogical position.  Runs sharing a seed but differing
  in the barrier offset x then produce nested block sets.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1

# draw-purpose constants XORed into a block key before mixing
KEY_WAIT = 0xC0FFEE_5EED_0001
KEY_ATOM = 0xA77A_D15C_0002


def mix64(z: int) -> int:
    """splitmix64 finalizer; bijective on 64-bit ints."""
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def unit_from(v: int) -> float:
    """Map a 64-bit word to the open interval (0, 1)."""
    return ((v >> 11) + 0.5) * 2.0 ** -53


def trial_key(master_seed: int, trial_index: int) -> int:
    """Root key for one trial's block-keyed stream."""
    return mix64(mix64(master_seed & _M64) ^ ((trial_index + 1) & _M64))


def trial_generator(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based numpy generator for one trial (schedule independent)."""
    key = np.array([master_seed & _M64, trial_index & _M64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
