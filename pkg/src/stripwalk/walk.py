"""Absorbed walk simulation and deterministic ensembles.

Three samplers share one per-replica stream layout (word 0 draws a random
start, if any):

``trajectory``
    Step-by-step walk; records every local time.  Cost ~ exit time.
``extremes``
    Embedded chain of new minima/maxima.  From a fresh extreme the next event
    is "new max" or "new min" with the two-boundary ruin probability, so the
    chain reproduces (exit side, min, max) exactly in law at cost ~ range.
``sites``
    Trace of the walk on ``{0, N, x} + sites``.  Consecutive returns to a site
    are geometric, so the visit counts at the tracked sites and the exit side
    are exact at cost ~ number of moves between tracked sites.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import ResourceLimit, SiteOutOfRange, StepCapExceeded
from .exact import ruin_from_log_ratio
from .model import Side, UniformRandom, WalkSpec, resolve_probabilities
from .rng import Stream, _nb_derive_key, _nb_uniform, _nb_word

METHODS = ("trajectory", "extremes", "sites")
DENSE_MAX_N = 10**6
DEFAULT_MEMORY_BUDGET = 1 << 30  # bytes of dense local-time storage


class Parity(str, enum.Enum):
    UNVISITED = "unvisited"
    EVEN = "even"
    ODD = "odd"

    @classmethod
    def from_count(cls, g: int) -> "Parity":
        if g <= 0:
            return cls.UNVISITED
        return cls.ODD if g % 2 else cls.EVEN


@dataclass(eq=False)
class WalkOutcome:
    exit_side: Side
    exit_time: int
    local_times: np.ndarray
    range: int
    start: int

    @property
    def visited(self) -> np.ndarray:
        return np.flatnonzero(self.local_times)

    def same_as(self, other: "WalkOutcome") -> bool:
        return (
            self.exit_side == other.exit_side
            and self.exit_time == other.exit_time
            and self.range == other.range
            and self.start == other.start
            and np.array_equal(self.local_times, other.local_times)
        )


def step_cap(spec: WalkSpec) -> int:
    """Hard bound on the number of steps; exceeding it means a bug, not bad luck."""
    N = spec.N
    d = spec.drift
    factor = 1.0 if d == 0 else max(1.0, 1.0 / (4.0 * d * d))
    return int(min(10.0 * max(N, 1) ** 2 * factor, 2.0**62))


def _threshold(p: float) -> np.uint64:
    return np.uint64(min(int(p * 2.0**64), 2**64 - 1))


# ------------------------------------------------------------------ kernels


@nb.njit(nogil=True, cache=True)
def _walk_kernel(N, x, thr, symmetric, key, ctr, cap, lt):
    """Run one walk, accumulating visits into ``lt``.

    Returns (exit_right, steps, counter, capped).
    """
    pos = x
    lt[pos] += 1
    steps = 0
    if pos == 0 or pos == N:
        return pos == N, 0, ctr, False
    if symmetric:
        while True:
            w = _nb_word(key, ctr)
            ctr += np.uint64(1)
            for b in range(64):
                if (w >> np.uint64(b)) & np.uint64(1):
                    pos += 1
                else:
                    pos -= 1
                lt[pos] += 1
                steps += 1
                if pos == 0 or pos == N:
                    return pos == N, steps, ctr, False
            if steps > cap:
                return pos == N, steps, ctr, True
    while True:
        if _nb_word(key, ctr) < thr:
            pos += 1
        else:
            pos -= 1
        ctr += np.uint64(1)
        lt[pos] += 1
        steps += 1
        if pos == 0 or pos == N:
            return pos == N, steps, ctr, False
        if steps > cap:
            return pos == N, steps, ctr, True


@nb.njit(nogil=True, cache=True)
def _draw_start(N, start_x, key):
    if start_x >= 0:
        return start_x, np.uint64(0)
    u = _nb_uniform(key, np.uint64(0))
    return min(int(u * (N + 1)), N), np.uint64(1)


@nb.njit(nogil=True, cache=True)
def _ens_trajectory(N, start_x, thr, symmetric, seed, i0, i1, cap, sites,
                    out_start, out_right, out_time, out_lo, out_hi, out_sites, out_dense):
    lt = np.zeros(N + 1, dtype=np.int64)
    dense = out_dense.shape[0] > 0
    for i in range(i0, i1):
        key = _nb_derive_key(seed, np.uint64(i))
        x, ctr = _draw_start(N, start_x, key)
        lt[:] = 0
        right, steps, ctr, capped = _walk_kernel(N, x, thr, symmetric, key, ctr, cap, lt)
        if capped:
            return i
        out_start[i] = x
        out_right[i] = right
        out_time[i] = steps
        lo = 0
        while lt[lo] == 0:
            lo += 1
        hi = N
        while lt[hi] == 0:
            hi -= 1
        out_lo[i] = lo
        out_hi[i] = hi
        for k in range(sites.shape[0]):
            out_sites[i, k] = lt[sites[k]]
        if dense:
            out_dense[i, :] = lt
    return -1


@nb.njit(nogil=True, cache=True)
def _extremes_kernel(N, x, L, key, ctr):
    """Returns (exit_right, min, max, counter)."""
    lo = x
    hi = x
    if x == 0 or x == N:
        return x == N, lo, hi, ctr
    at_hi = True
    while True:
        pos = hi if at_hi else lo
        up = 1.0 - ruin_from_log_ratio(L, lo - 1, pos, hi + 1)
        u = _nb_uniform(key, ctr)
        ctr += np.uint64(1)
        if u < up:
            hi += 1
            at_hi = True
            if hi == N:
                return True, lo, hi, ctr
        else:
            lo -= 1
            at_hi = False
            if lo == 0:
                return False, lo, hi, ctr


@nb.njit(nogil=True, cache=True)
def _ens_extremes(N, start_x, L, seed, i0, i1, out_start, out_right, out_lo, out_hi):
    for i in range(i0, i1):
        key = _nb_derive_key(seed, np.uint64(i))
        x, ctr = _draw_start(N, start_x, key)
        right, lo, hi, ctr = _extremes_kernel(N, x, L, key, ctr)
        out_start[i] = x
        out_right[i] = right
        out_lo[i] = lo
        out_hi[i] = hi
    return -1


@nb.njit(nogil=True, cache=True)
def _sites_kernel(N, x, L, p, q, tracked, key, ctr, counts):
    """Trace chain on the sorted site set ``tracked`` (contains 0, N and x).

    Adds visit counts into ``counts``; returns (exit_right, counter).
    """
    idx = np.searchsorted(tracked, x)
    counts[idx] += 1
    if x == 0 or x == N:
        return x == N, ctr
    while True:
        y = tracked[idx]
        left = tracked[idx - 1]
        right = tracked[idx + 1]
        a = q * ruin_from_log_ratio(L, left, y - 1, y)
        b = p * (1.0 - ruin_from_log_ratio(L, y, y + 1, right))
        esc = a + b
        if esc < 1.0:
            u = _nb_uniform(key, ctr)
            ctr += np.uint64(1)
            counts[idx] += np.int64(math.floor(math.log(u) / math.log1p(-esc)))
        u = _nb_uniform(key, ctr)
        ctr += np.uint64(1)
        if u * esc < a:
            idx -= 1
        else:
            idx += 1
        counts[idx] += 1
        if tracked[idx] == 0 or tracked[idx] == N:
            return tracked[idx] == N, ctr


@nb.njit(nogil=True, cache=True)
def _ens_sites(N, start_x, L, p, q, seed, i0, i1, sites, out_start, out_right, out_sites):
    ends = np.empty(2, dtype=np.int64)
    ends[0] = 0
    ends[1] = N
    for i in range(i0, i1):
        key = _nb_derive_key(seed, np.uint64(i))
        x, ctr = _draw_start(N, start_x, key)
        xs = np.empty(1, dtype=np.int64)
        xs[0] = x
        tracked = np.unique(np.concatenate((sites, ends, xs)))
        counts = np.zeros(tracked.shape[0], dtype=np.int64)
        right, ctr = _sites_kernel(N, x, L, p, q, tracked, key, ctr, counts)
        out_start[i] = x
        out_right[i] = right
        for k in range(sites.shape[0]):
            out_sites[i, k] = counts[np.searchsorted(tracked, sites[k])]
    return -1


# ----------------------------------------------------------- single walks


def _start_for(spec: WalkSpec) -> int:
    x = spec.start_site()
    return -1 if x is None else x


def simulate_walk(spec: WalkSpec, rng: Stream) -> WalkOutcome:
    """Simulate one absorbed trajectory, consuming words from ``rng``."""
    p, _ = resolve_probabilities(spec)
    N = spec.N
    key = np.uint64(rng.key)
    ctr = np.uint64(rng.counter)
    if isinstance(spec.start, UniformRandom):
        x = min(int(rng.uniform() * (N + 1)), N)
        ctr = np.uint64(rng.counter)
    else:
        x = spec.start_site()
    lt = np.zeros(N + 1, dtype=np.int64)
    cap = step_cap(spec)
    right, steps, ctr, capped = _walk_kernel(N, x, _threshold(p), spec.is_symmetric, key, ctr, cap, lt)
    rng.advance_to(ctr)
    if capped:
        raise StepCapExceeded(f"walk exceeded {cap} steps (N={N})")
    visited = np.flatnonzero(lt)
    return WalkOutcome(
        exit_side=Side.RIGHT if right else Side.LEFT,
        exit_time=int(steps),
        local_times=lt,
        range=int(visited[-1] - visited[0] + 1),
        start=int(x),
    )


def _validate_sites(sites, N: int) -> np.ndarray:
    arr = np.asarray(list(sites), dtype=np.int64)
    bad = arr[(arr < 0) | (arr > N)]
    if bad.size:
        raise SiteOutOfRange(f"sites {bad.tolist()} outside [0, {N}]")
    return arr


def parity_of(outcome: WalkOutcome, sites) -> list[Parity]:
    arr = _validate_sites(sites, len(outcome.local_times) - 1)
    return [Parity.from_count(int(outcome.local_times[s])) for s in arr]


# ---------------------------------------------------------------- ensembles


def _parity_codes(counts: np.ndarray) -> np.ndarray:
    """-1 unvisited, 0 even, 1 odd."""
    return np.where(counts > 0, counts % 2, -1).astype(np.int8)


@dataclass(eq=False)
class EnsembleSummary:
    """Per-replica samples of one ensemble, slotted by replica index."""

    spec: WalkSpec
    master_seed: int
    method: str
    sites: np.ndarray
    start: np.ndarray
    exit_right: np.ndarray
    exit_time: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    site_counts: np.ndarray | None = None
    local_times: np.ndarray | None = field(default=None, repr=False)

    @property
    def replicas(self) -> int:
        return int(self.start.shape[0])

    @property
    def range(self) -> np.ndarray | None:
        if self.lo is None:
            return None
        return self.hi - self.lo + 1

    def parities(self) -> np.ndarray:
        """Parity codes per replica and site: -1 unvisited, 0 even, 1 odd."""
        if self.site_counts is None:
            raise ValueError("ensemble recorded no sites")
        return _parity_codes(self.site_counts)

    def visited(self, y: int) -> np.ndarray:
        """Whether site ``y`` lies in the range of each replica."""
        if self.lo is not None:
            return (self.lo <= y) & (y <= self.hi)
        k = np.flatnonzero(self.sites == y)
        if not k.size:
            raise SiteOutOfRange(f"site {y} was not recorded")
        return self.site_counts[:, k[0]] > 0

    def outcome(self, i: int) -> WalkOutcome:
        if self.local_times is None:
            raise ValueError("outcome() needs dense local times (trajectory method, dense=True)")
        return WalkOutcome(
            exit_side=Side.RIGHT if self.exit_right[i] else Side.LEFT,
            exit_time=int(self.exit_time[i]),
            local_times=self.local_times[i].copy(),
            range=int(self.range[i]),
            start=int(self.start[i]),
        )

    # -- serialization

    def to_dict(self) -> dict:
        n = self.replicas
        right = int(self.exit_right.sum())
        out = {
            "N": self.spec.N,
            "kind": type(self.spec.kind).__name__,
            "kind_params": {k: v for k, v in vars(self.spec.kind).items()},
            "method": self.method,
            "master_seed": self.master_seed,
            "replicas": n,
            "exit_right": right,
            "exit_left": n - right,
            "sites": self.sites.tolist(),
        }
        if self.exit_time is not None:
            out["exit_time_mean"] = float(self.exit_time.mean())
            out["exit_time_max"] = int(self.exit_time.max())
        rng_ = self.range
        if rng_ is not None:
            out["range_mean"] = float(rng_.mean())
            values, counts = np.unique(rng_, return_counts=True)
            out["range_histogram"] = {str(int(v)): int(c) for v, c in zip(values, counts)}
        if self.site_counts is not None:
            codes = self.parities()
            out["parity_counts"] = {
                str(int(y)): {
                    "unvisited": int((codes[:, k] == -1).sum()),
                    "even": int((codes[:, k] == 0).sum()),
                    "odd": int((codes[:, k] == 1).sum()),
                }
                for k, y in enumerate(self.sites)
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_header(self) -> list[str]:
        cols = ["replica_index", "exit_side", "exit_time", "range"]
        if self.site_counts is not None:
            cols += [f"G_{y}" for y in self.sites]
            cols += [f"parity_{y}" for y in self.sites]
        return cols

    def csv_rows(self):
        rng_ = self.range
        codes = self.parities() if self.site_counts is not None else None
        names = {-1: Parity.UNVISITED.value, 0: Parity.EVEN.value, 1: Parity.ODD.value}
        for i in range(self.replicas):
            row = [
                i,
                Side.RIGHT.value if self.exit_right[i] else Side.LEFT.value,
                "" if self.exit_time is None else int(self.exit_time[i]),
                "" if rng_ is None else int(rng_[i]),
            ]
            if codes is not None:
                row += [int(g) for g in self.site_counts[i]]
                row += [names[int(c)] for c in codes[i]]
            yield row


def _chunks(replicas: int, workers: int) -> list[tuple[int, int]]:
    n_chunks = max(1, min(replicas, 4 * workers))
    edges = np.linspace(0, replicas, n_chunks + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_ensemble(
    spec: WalkSpec,
    replicas: int,
    master_seed: int,
    workers: int = 1,
    *,
    sites=(),
    dense: bool = False,
    method: str = "trajectory",
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> EnsembleSummary:
    """Simulate ``replicas`` independent walks; replica i uses stream (master_seed, i).

    Results are slotted by replica index, so the output does not depend on
    ``workers``.
    """
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    p, q = resolve_probabilities(spec)
    N = spec.N
    site_arr = _validate_sites(sites, N)
    if method == "sites" and not site_arr.size:
        raise ValueError("method 'sites' needs at least one site")
    if dense:
        if method != "trajectory":
            raise ValueError("dense local times need the trajectory method")
        need = replicas * (N + 1) * 8
        if N > DENSE_MAX_N or need > memory_budget:
            raise ResourceLimit(
                f"dense local times need {need} bytes (budget {memory_budget}); "
                "record a site grid via sites= instead"
            )
    seed = np.uint64(master_seed & ((1 << 64) - 1))
    start_x = _start_for(spec)
    L = spec.log_ratio
    start = np.zeros(replicas, dtype=np.int64)
    right = np.zeros(replicas, dtype=np.bool_)
    n_sites = site_arr.shape[0]
    summary = EnsembleSummary(spec, master_seed, method, site_arr, start, right)

    if method == "trajectory":
        exit_time = np.zeros(replicas, dtype=np.int64)
        lo = np.zeros(replicas, dtype=np.int64)
        hi = np.zeros(replicas, dtype=np.int64)
        counts = np.zeros((replicas, n_sites), dtype=np.int64)
        out_dense = np.zeros((replicas if dense else 0, N + 1), dtype=np.int64)
        thr, sym, cap = _threshold(p), spec.is_symmetric, step_cap(spec)

        def work(bounds):
            return _ens_trajectory(N, start_x, thr, sym, seed, bounds[0], bounds[1], cap, site_arr,
                                   start, right, exit_time, lo, hi, counts, out_dense)

        summary.exit_time, summary.lo, summary.hi = exit_time, lo, hi
        summary.site_counts = counts if n_sites else None
        summary.local_times = out_dense if dense else None
    elif method == "extremes":
        lo = np.zeros(replicas, dtype=np.int64)
        hi = np.zeros(replicas, dtype=np.int64)

        def work(bounds):
            return _ens_extremes(N, start_x, L, seed, bounds[0], bounds[1], start, right, lo, hi)

        summary.lo, summary.hi = lo, hi
    else:
        counts = np.zeros((replicas, n_sites), dtype=np.int64)

        def work(bounds):
            return _ens_sites(N, start_x, L, p, q, seed, bounds[0], bounds[1], site_arr, start, right, counts)

        summary.site_counts = counts

    chunks = _chunks(replicas, workers)
    if workers <= 1:
        failures = [work(b) for b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            failures = list(pool.map(work, chunks))
    bad = [f for f in failures if f >= 0]
    if bad:
        raise StepCapExceeded(f"replica {min(bad)} exceeded the step cap {step_cap(spec)}")
    return summary
