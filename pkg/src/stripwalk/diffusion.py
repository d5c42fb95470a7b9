"""Euler discretizations of the local-time limit diffusions.

The scaled crossing chain ``zeta_{tN} / N`` converges to ``Z`` with
``dZ = (1 + kappa Z) dt + sqrt(2 Z) dB`` before the phase switch and
``dZ = kappa Z dt + sqrt(2 Z) dB`` after it, started at 0.  Here ``kappa = 0``
for the symmetric walk (squared Bessel phases), ``-4c`` for a right exit and
``+4c`` for a left exit of the weakly asymmetric walk (squared OU phases).
Visit counts are two crossing counts, so ``G(floor(tN)) / N`` converges to
``2 Z_{1-t}``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numba as nb
import numpy as np

from .errors import RejectionBudgetExceeded
from .model import Side
from .rng import Stream, _nb_derive_key, _nb_fill_normals

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class LimitProcess:
    """Limit of the crossing chain for start fraction ``alpha`` and exit ``side``."""

    alpha: float
    c: float = 0.0
    side: Side = Side.RIGHT

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        object.__setattr__(self, "side", Side(self.side))

    @property
    def name(self) -> str:
        return "besq" if self.c == 0 else "ousq"

    @property
    def switch_time(self) -> float:
        return 1 - self.alpha if self.side is Side.RIGHT else self.alpha

    @property
    def kappa(self) -> float:
        """Linear drift coefficient."""
        return -4 * self.c if self.side is Side.RIGHT else 4 * self.c


def Besq(alpha: float, side: Side = Side.RIGHT) -> LimitProcess:
    return LimitProcess(alpha, 0.0, side)


def OUsq(alpha: float, c: float, side: Side = Side.RIGHT) -> LimitProcess:
    return LimitProcess(alpha, c, side)


def grid_size(dt: float) -> int:
    if not 0 < dt <= 1e-2:
        raise ValueError(f"dt must lie in (0, 1e-2], got {dt}")
    return int(round(1 / dt))


@dataclass(eq=False)
class DiffusionPath:
    """Values on ``t = 0, dt, ..., 1``.

    ``absorb_time`` is the first grid time at or after the switch where the
    path is 0.  After :func:`time_reversal` the grid runs backwards and
    ``absorb_time`` becomes the last time the reversed path sits at 0.
    """

    process: LimitProcess
    dt: float
    values: np.ndarray
    absorb_time: float | None
    reversed: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def at(self, t: float) -> float:
        return float(self.values[int(round(t / self.dt))])


@nb.njit(nogil=True, cache=True)
def _euler(kappa, switch, dt, noise, out):
    """Full-truncation Euler; returns the absorption grid index or -1."""
    n = noise.shape[0]
    sq = math.sqrt(2.0 * dt)
    z = 0.0
    out[0] = 0.0
    absorbed = -1
    for k in range(n):
        if absorbed >= 0:
            out[k + 1] = 0.0
            continue
        drift = kappa * z + (1.0 if k < switch else 0.0)
        z = z + drift * dt + sq * math.sqrt(z) * noise[k]
        if z < 0.0:
            z = 0.0
        out[k + 1] = z
        if k + 1 >= switch and z <= 0.0:
            absorbed = k + 1
    return absorbed


def euler_path(process: LimitProcess, dt: float, noise) -> DiffusionPath:
    """Integrate on the grid with the given standard-normal increments (length 1/dt)."""
    n = grid_size(dt)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    if noise.size != n:
        raise ValueError(f"need {n} noise values, got {noise.size}")
    out = np.empty(n + 1)
    switch = int(round(process.switch_time / dt))
    k = _euler(process.kappa, switch, dt, noise, out)
    return DiffusionPath(process, dt, out, None if k < 0 else k * dt)


def simulate_limit_path(process: LimitProcess, dt: float, rng: Stream) -> DiffusionPath:
    return euler_path(process, dt, rng.normals(grid_size(dt)))


def _absorbed_in_window(path: DiffusionPath) -> bool:
    return path.absorb_time is not None and path.absorb_time < 1.0 - 0.5 * path.dt


def condition_on_window_absorption(process: LimitProcess, dt: float, rng: Stream,
                                   max_attempts: int = 10**5) -> tuple[DiffusionPath, float]:
    """Rejection-sample a path absorbed at 0 in [switch, 1); returns (path, acceptance rate)."""
    for attempt in range(1, max_attempts + 1):
        path = simulate_limit_path(process, dt, rng)
        if _absorbed_in_window(path):
            return path, 1.0 / attempt
    raise RejectionBudgetExceeded(
        f"no path absorbed in its window after {max_attempts} attempts",
        attempts=max_attempts,
        accepted=0,
    )


def time_reversal(path: DiffusionPath) -> DiffusionPath:
    absorb = None if path.absorb_time is None else 1.0 - path.absorb_time
    return replace(path, values=path.values[::-1].copy(), absorb_time=absorb, reversed=not path.reversed)


# ---------------------------------------------------------------- ensembles


@nb.njit(nogil=True, cache=True)
def _ens_paths(kappa, switch, dt, n, seed, i0, i1, idx, conditioned, max_attempts,
               out_values, out_attempts):
    noise = np.empty(n)
    path = np.empty(n + 1)
    for i in range(i0, i1):
        key = _nb_derive_key(seed, np.uint64(i))
        ctr = np.uint64(0)
        attempts = 0
        while True:
            attempts += 1
            ctr = _nb_fill_normals(key, ctr, noise)
            k = _euler(kappa, switch, dt, noise, path)
            if not conditioned or (0 <= k < n):
                break
            if attempts >= max_attempts:
                out_attempts[i] = -attempts
                return i
        out_attempts[i] = attempts
        for j in range(idx.shape[0]):
            out_values[i, j] = path[idx[j]]
    return -1


@dataclass(eq=False)
class PathEnsemble:
    process: LimitProcess
    dt: float
    times: np.ndarray
    values: np.ndarray  # (replicas, len(times)) on the forward grid
    attempts: np.ndarray

    @property
    def acceptance_rate(self) -> float:
        return float(self.values.shape[0] / self.attempts.sum())


def run_path_ensemble(process: LimitProcess, dt: float, replicas: int, master_seed: int, times,
                      *, conditioned: bool = False, max_attempts: int = 10**5,
                      workers: int = 1) -> PathEnsemble:
    """Path values at ``times`` for replicas keyed by (seed, index).

    With ``conditioned`` each replica rejection-samples until its path is
    absorbed in the window; replica i uses the same draws as repeated calls
    of :func:`simulate_limit_path` on ``Stream.for_replica(seed, i)``.
    """
    n = grid_size(dt)
    times = np.asarray(times, dtype=float)
    idx = np.rint(times / dt).astype(np.int64)
    if np.any((idx < 0) | (idx > n)):
        raise ValueError("times must lie in [0, 1]")
    switch = int(round(process.switch_time / dt))
    values = np.zeros((replicas, idx.size))
    attempts = np.zeros(replicas, dtype=np.int64)
    seed = np.uint64(master_seed & ((1 << 64) - 1))

    def work(bounds):
        return _ens_paths(process.kappa, switch, dt, n, seed, bounds[0], bounds[1], idx,
                          conditioned, max_attempts, values, attempts)

    edges = np.linspace(0, replicas, max(1, min(replicas, 4 * workers)) + 1).astype(np.int64)
    chunks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers <= 1:
        failures = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            failures = list(pool.map(work, chunks))
    if any(f >= 0 for f in failures):
        raise RejectionBudgetExceeded(
            f"a replica found no absorbed path in {max_attempts} attempts",
            attempts=max_attempts,
            accepted=0,
        )
    return PathEnsemble(process, dt, times, values, attempts)


def reversed_values(process: LimitProcess, dt: float, replicas: int, master_seed: int, times,
                    **kwargs) -> np.ndarray:
    """Conditioned values of ``Z_{1-t}`` at ``times``: the limit of ``G(floor(tN)) / (2N)``."""
    ens = run_path_ensemble(process, dt, replicas, master_seed, 1.0 - np.asarray(times, dtype=float),
                            conditioned=True, **kwargs)
    return ens.values


def ousq_mean(c: float, t):
    """Mean of the pre-switch squared OU phase, ``(1 - exp(-4ct)) / (4c)``."""
    t = np.asarray(t, dtype=float)
    if c == 0:
        return t
    return -np.expm1(-4 * c * t) / (4 * c)
