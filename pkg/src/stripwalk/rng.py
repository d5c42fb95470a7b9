"""Counter-based random streams.

Word ``k`` of a stream is ``splitmix64(key + k * GOLDEN)``: a pure function of
``(key, k)``, so any replica can be replayed or run on any worker without
shared generator state.  Replica keys are derived by hashing
``(master_seed, index)``.

The ``_nb_*`` helpers are numba-compiled and are what the simulation kernels
call; :class:`Stream` is the Python-facing handle.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def _nb_mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def _nb_derive_key(seed, index):
    k = _nb_mix(seed + GOLDEN)
    return _nb_mix(k ^ _nb_mix(index * _SALT + GOLDEN))


@nb.njit(inline="always", cache=True)
def _nb_word(key, ctr):
    return _nb_mix(key + ctr * GOLDEN)


@nb.njit(inline="always", cache=True)
def _nb_uniform(key, ctr):
    # open interval (0, 1): 53 random bits, midpoint rounding
    return ((_nb_word(key, ctr) >> _S11) + 0.5) * _INV53


@nb.njit(inline="always", cache=True)
def _nb_normal_pair(key, ctr):
    u1 = _nb_uniform(key, ctr)
    u2 = _nb_uniform(key, ctr + _ONE)
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


@nb.njit(cache=True)
def _nb_fill_uniforms(key, ctr, out):
    for i in range(out.shape[0]):
        out[i] = _nb_uniform(key, ctr)
        ctr += _ONE
    return ctr


@nb.njit(cache=True)
def _nb_fill_normals(key, ctr, out):
    n = out.shape[0]
    i = 0
    while i < n:
        a, b = _nb_normal_pair(key, ctr)
        ctr += np.uint64(2)
        out[i] = a
        if i + 1 < n:
            out[i + 1] = b
        i += 2
    return ctr


@nb.njit(cache=True)
def _nb_fill_words(key, ctr, out):
    for i in range(out.shape[0]):
        out[i] = _nb_word(key, ctr)
        ctr += _ONE
    return ctr


def derive_key(master_seed: int, index: int) -> int:
    return int(_nb_derive_key(np.uint64(master_seed & _MASK64), np.uint64(index & _MASK64)))


class Stream:
    """A position in a keyed counter-based stream.

    Draw methods advance ``counter``; two streams with equal ``(key, counter)``
    produce identical draws.
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = int(key) & _MASK64
        self.counter = int(counter)

    @classmethod
    def for_replica(cls, master_seed: int, index: int) -> "Stream":
        return cls(derive_key(master_seed, index))

    def spawn(self, index: int) -> "Stream":
        return Stream(derive_key(self.key, index))

    def copy(self) -> "Stream":
        return Stream(self.key, self.counter)

    @property
    def state(self) -> tuple[np.uint64, np.uint64]:
        return np.uint64(self.key), np.uint64(self.counter)

    def advance_to(self, counter) -> None:
        self.counter = int(counter)

    def words(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        self.advance_to(_nb_fill_words(*self.state, out))
        return out

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        self.advance_to(_nb_fill_uniforms(*self.state, out))
        return out

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        self.advance_to(_nb_fill_normals(*self.state, out))
        return out

    def __repr__(self) -> str:
        return f"Stream(key={self.key:#018x}, counter={self.counter})"
