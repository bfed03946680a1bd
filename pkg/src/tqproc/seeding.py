"""Deterministic seed derivation for parallel Monte Carlo.

Every random stream in the package is a pure function of a 64-bit master
seed and a tuple of integer indices (path index, sample size, replication
index, ...).  Derivation uses the SplitMix64 finalizer, which avalanches
every input bit into every output bit, so adjacent indices yield
uncorrelated streams and the result does not depend on scheduling order.

SplitMix64 constants (Steele, Lea & Flood's reference implementation):
increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance by the golden-ratio increment and mix."""
    x = (x + _GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * _MULT1) & _MASK64
    x = ((x ^ (x >> 27)) * _MULT2) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Fold integer indices into a 64-bit stream seed.

    Each index is absorbed with a multiply-xor step before a full
    SplitMix64 avalanche, so ``derive_seed(s, a, b) != derive_seed(s, b, a)``
    in general and no two (seed, indices) tuples collide in practice.
    """
    s = master_seed & _MASK64
    for v in indices:
        s = splitmix64(s ^ ((v & _MASK64) * _GAMMA & _MASK64))
    return s


def _pcg_state(seed: int) -> dict:
    """Expand a 64-bit seed into a full PCG64 state dictionary.

    The 128-bit state and 128-bit (odd) increment are four successive
    SplitMix64 outputs; distinct increments select distinct PCG streams.
    """
    w0 = splitmix64(seed)
    w1 = splitmix64(w0)
    w2 = splitmix64(w1)
    w3 = splitmix64(w2)
    return {
        "bit_generator": "PCG64",
        "state": {"state": (w0 << 64) | w1, "inc": ((w2 << 64) | w3) | 1},
        "has_uint32": 0,
        "uinteger": 0,
    }


def generator_for(seed: int) -> np.random.Generator:
    """A numpy Generator whose PCG64 stream is determined by ``seed`` alone."""
    bg = np.random.PCG64()
    bg.state = _pcg_state(seed)
    return np.random.Generator(bg)


def normal_matrix(seeds: np.ndarray, draws: int) -> np.ndarray:
    """Standard-normal matrix with one independently seeded stream per row.

    Row ``i`` contains the first ``draws`` variates of the PCG64 stream for
    ``seeds[i]``; it is unaffected by the other rows, so ensembles can be
    extended or generated in any partition without changing existing rows.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.empty((len(seeds), draws))
    bg = np.random.PCG64()
    gen = np.random.Generator(bg)
    for i, s in enumerate(seeds):
        bg.state = _pcg_state(int(s))
        out[i] = gen.standard_normal(draws)
    return out
