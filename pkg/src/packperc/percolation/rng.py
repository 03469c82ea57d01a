"""Counter-based uniforms keyed by (seed, stream, trial, index).

Each uniform is a pure function of its key, so any partition of trials or
indices across workers reproduces the same bits.  The mixer is the
splitmix64 finaliser applied once per key component.
"""
from __future__ import annotations

import numba as nb
import numpy as np

SITE_STREAM = 0
BOND_STREAM = 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _key(seed, stream, trial, index):
    h = _mix(seed * _GOLDEN + stream)
    h = _mix(h ^ (trial * _GOLDEN))
    return _mix(h + index * _GOLDEN + _GOLDEN)


_mix_nb = nb.njit(inline="always")(_mix)


@nb.njit(inline="always", nogil=True)
def uniform_nb(seed, stream, trial, index):
    h = _mix_nb(np.uint64(seed) * _GOLDEN + np.uint64(stream))
    h = _mix_nb(h ^ (np.uint64(trial) * _GOLDEN))
    h = _mix_nb(h + np.uint64(index) * _GOLDEN + _GOLDEN)
    return np.float64(h >> _S11) * _INV53


def uniforms(seed: int, stream: int, trial: int, index) -> np.ndarray:
    """Uniforms in [0, 1) for an array of indices (numpy path)."""
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _key(np.uint64(seed), np.uint64(stream), np.uint64(trial), index)
    return (h >> _S11).astype(np.float64) * _INV53
