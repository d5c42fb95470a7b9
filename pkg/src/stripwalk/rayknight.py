"""Local times from edge-crossing chains, and the subcritical stationary law.

For a walk leaving through N, let ``zeta_j`` be the number of left steps taken
from site ``N - j``.  Reading sites from N downwards, ``zeta`` is a branching
chain with Geometric-minus-one offspring ``P(D = n) = p q**n``, with one
immigrant per generation while the site is at or right of the start, and it
must die out before reaching site 0.  The left-exit chain is the mirror image
(right steps from site j, offspring ``P = q p**n``).

Conditioning is done by rejection: the unrestricted chain ``eta`` is run and
accepted iff it vanishes inside the window.  The acceptance probability equals
the exit probability through the chosen side.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ChainExplosion, NonSubcritical, RejectionBudgetExceeded, UnrestrictedChain
from .model import Side, WalkSpec, resolve_probabilities
from .rng import Stream, _nb_derive_key, _nb_uniform

EXPLOSION_CAP = 10**8
NEGBIN_THRESHOLD = 64
DEFAULT_BURN_IN = 1000


@dataclass(frozen=True)
class OffspringLaw:
    """Geometric minus one: ``P(D = n) = success * (1 - success)**n``."""

    success: float

    def __post_init__(self):
        if not 0 < self.success < 1:
            raise ValueError(f"success must lie in (0, 1), got {self.success}")

    @property
    def mean(self) -> float:
        return (1 - self.success) / self.success

    @property
    def variance(self) -> float:
        return (1 - self.success) / self.success**2

    def pmf(self, n):
        n = np.asarray(n)
        return self.success * (1 - self.success) ** n

    def pgf(self, s):
        return self.success / (1 - (1 - self.success) * s)


def offspring_law(spec: WalkSpec, side: Side) -> OffspringLaw:
    p, q = resolve_probabilities(spec)
    return OffspringLaw(p if side is Side.RIGHT else q)


def window_start(spec: WalkSpec, side: Side, x: int | None = None) -> int:
    """First chain index without immigration (N - x on the right, x on the left)."""
    x = spec.start_site() if x is None else x
    if x is None:
        raise ValueError("crossing chains need a resolved start (Fixed or Alpha)")
    return spec.N - x if side is Side.RIGHT else x


@dataclass(eq=False)
class CrossingChain:
    side: Side
    values: np.ndarray
    window_start: int
    restricted: bool
    start: int

    def vanishes_in_window(self) -> bool:
        return _vanishes(self.values, self.window_start)


# ------------------------------------------------------------------ kernels


@nb.njit(inline="always", cache=True)
def _geometric(u, log_fail):
    return np.int64(math.floor(math.log(u) / log_fail))


@nb.njit(cache=True)
def _negbin_inverse(m, success, u):
    """Failures before the m-th success, by inversion with the support
    enumerated outward from the mode (any fixed order gives an exact draw)."""
    fail = 1.0 - success
    mode = int(math.floor((m - 1) * fail / success)) if m > 1 else 0
    logp = (math.lgamma(m + mode) - math.lgamma(mode + 1) - math.lgamma(m)
            + m * math.log(success) + mode * math.log1p(-success))
    pm = math.exp(logp)
    acc = pm
    if acc >= u:
        return np.int64(mode)
    hi, p_hi = mode, pm
    lo, p_lo = mode, pm
    while True:
        nxt_hi = p_hi * (m + hi) / (hi + 1) * fail
        nxt_lo = p_lo * lo / ((m + lo - 1) * fail) if lo > 0 else 0.0
        if nxt_hi >= nxt_lo:
            hi += 1
            p_hi = nxt_hi
            acc += p_hi
            last = hi
        else:
            lo -= 1
            p_lo = nxt_lo
            acc += p_lo
            last = lo
        if acc >= u or (nxt_hi == 0.0 and nxt_lo == 0.0):
            return np.int64(last)


@nb.njit(cache=True)
def _offspring_sum(m, success, log_fail, key, ctr):
    if m <= 0:
        return np.int64(0), ctr
    if m < NEGBIN_THRESHOLD:
        total = np.int64(0)
        for _ in range(m):
            total += _geometric(_nb_uniform(key, ctr), log_fail)
            ctr += np.uint64(1)
        return total, ctr
    u = _nb_uniform(key, ctr)
    return _negbin_inverse(m, success, u), ctr + np.uint64(1)


@nb.njit(nogil=True, cache=True)
def _chain_kernel(success, window, N, key, ctr, cap, out):
    """Fill out[0..N] with an unrestricted crossing chain; returns (counter, exploded)."""
    log_fail = math.log1p(-success)
    out[0] = 0
    for j in range(N):
        m = out[j] + (1 if j < window else 0)
        total, ctr = _offspring_sum(m, success, log_fail, key, ctr)
        if total > cap:
            out[j + 1:] = -1
            return ctr, True
        out[j + 1] = total
    return ctr, False


@nb.njit(inline="always", cache=True)
def _vanishes(values, window):
    n = values.shape[0] - 1
    for j in range(window, n):
        if values[j] == 0:
            return True
    return False


@nb.njit(nogil=True, cache=True)
def _local_time_at(values, side_right, N, x, y):
    if side_right:
        if y == N:
            return np.int64(1)
        g = values[N - y] + values[N - y - 1]
        return g + (1 if y >= x else 0)
    if y == 0:
        return np.int64(1)
    g = values[y] + values[y - 1]
    return g + (1 if y <= x else 0)


@nb.njit(nogil=True, cache=True)
def _ens_chains(success, window, N, x, side_right, seed, i0, i1, cap, max_attempts, sites,
                out_attempts, out_accepted, out_sites):
    vals = np.zeros(N + 1, dtype=np.int64)
    for i in range(i0, i1):
        key = _nb_derive_key(seed, np.uint64(i))
        ctr = np.uint64(0)
        attempts = 0
        accepted = False
        while attempts < max_attempts:
            attempts += 1
            ctr, exploded = _chain_kernel(success, window, N, key, ctr, cap, vals)
            if exploded:
                return i
            if _vanishes(vals, window):
                accepted = True
                break
        out_attempts[i] = attempts
        out_accepted[i] = accepted
        if accepted:
            for k in range(sites.shape[0]):
                out_sites[i, k] = _local_time_at(vals, side_right, N, x, sites[k])
    return -1


# ---------------------------------------------------------- single chains


def sample_offspring(law: OffspringLaw, rng: Stream) -> int:
    """One draw by inversion, ``floor(log U / log(1 - success))``."""
    return int(math.floor(math.log(rng.uniform()) / math.log1p(-law.success)))


def branching_chain(success: float, window: int, N: int, rng: Stream, cap: int = EXPLOSION_CAP) -> np.ndarray:
    """Raw chain values 0..N: immigration before ``window``, pure branching after."""
    out = np.zeros(N + 1, dtype=np.int64)
    ctr, exploded = _chain_kernel(success, window, N, *rng.state, cap, out)
    rng.advance_to(ctr)
    if exploded:
        raise ChainExplosion(f"crossing chain exceeded {cap}")
    return out


def run_eta_chain(spec: WalkSpec, side: Side, rng: Stream, cap: int = EXPLOSION_CAP) -> CrossingChain:
    side = Side(side)
    x = spec.start_site()
    w = window_start(spec, side, x)
    values = branching_chain(offspring_law(spec, side).success, w, spec.N, rng, cap)
    return CrossingChain(side, values, w, False, x)


def run_zeta_chain(spec: WalkSpec, side: Side, rng: Stream, max_attempts: int = 10**6,
                   cap: int = EXPLOSION_CAP) -> tuple[CrossingChain, float]:
    """Rejection-sample the chain conditioned to vanish inside its window.

    Returns the accepted chain and the empirical acceptance rate.
    """
    for attempt in range(1, max_attempts + 1):
        chain = run_eta_chain(spec, side, rng, cap)
        if chain.vanishes_in_window():
            chain.restricted = True
            return chain, 1.0 / attempt
    raise RejectionBudgetExceeded(
        f"no chain vanished in its window after {max_attempts} attempts",
        attempts=max_attempts,
        accepted=0,
    )


def local_times_from_crossings(chain: CrossingChain, spec: WalkSpec) -> np.ndarray:
    """Visit counts G(0..N) of the walk encoded by an accepted chain.

    A site's visits equal its departures (plus one at the exit endpoint):
    crossings out of it on each side, plus the one forced crossing towards the
    exit for sites between the start and the exit.
    """
    if not chain.restricted:
        raise UnrestrictedChain("local times need a chain conditioned to vanish in its window")
    N = spec.N
    right = chain.side is Side.RIGHT
    return np.array(
        [_local_time_at(chain.values, right, N, chain.start, y) for y in range(N + 1)],
        dtype=np.int64,
    )


# ---------------------------------------------------------------- ensembles


@dataclass(eq=False)
class ChainEnsemble:
    spec: WalkSpec
    side: Side
    sites: np.ndarray
    attempts: np.ndarray
    accepted: np.ndarray
    site_counts: np.ndarray  # rows of rejected replicas are meaningless

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.sum() / self.attempts.sum())

    def accepted_counts(self) -> np.ndarray:
        return self.site_counts[self.accepted]


def run_chain_ensemble(spec: WalkSpec, side: Side, replicas: int, master_seed: int, *,
                       sites=(), max_attempts: int = 10**4, workers: int = 1,
                       cap: int = EXPLOSION_CAP) -> ChainEnsemble:
    """Per replica, rejection-sample one restricted chain on stream (seed, i).

    ``max_attempts=1`` turns each replica into one Bernoulli trial of the
    window-vanishing event.
    """
    side = Side(side)
    N = spec.N
    x = spec.start_site()
    w = window_start(spec, side, x)
    success = offspring_law(spec, side).success
    site_arr = np.asarray(list(sites), dtype=np.int64)
    attempts = np.zeros(replicas, dtype=np.int64)
    accepted = np.zeros(replicas, dtype=np.bool_)
    counts = np.zeros((replicas, site_arr.size), dtype=np.int64)
    seed = np.uint64(master_seed & ((1 << 64) - 1))

    def work(bounds):
        return _ens_chains(success, w, N, x, side is Side.RIGHT, seed, bounds[0], bounds[1], cap,
                           max_attempts, site_arr, attempts, accepted, counts)

    edges = np.linspace(0, replicas, max(1, min(replicas, 4 * workers)) + 1).astype(np.int64)
    chunks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers <= 1:
        failures = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            failures = list(pool.map(work, chunks))
    if any(f >= 0 for f in failures):
        raise ChainExplosion(f"crossing chain exceeded {cap}")
    return ChainEnsemble(spec, side, site_arr, attempts, accepted, counts)


# ----------------------------------------------------- stationary law (p > q)


def _check_subcritical(p: float, q: float) -> None:
    if not p > q:
        raise NonSubcritical(f"stationary law needs p > q, got p={p}, q={q}")


def stationary_pgf(p: float, q: float, s, tol: float = 1e-12):
    """PGF of the stationary law of the one-immigrant chain.

    Solves ``Psi(s) = Psi(phi(s)) phi(s)`` with ``phi(u) = p / (1 - q u)`` as
    the product of ``phi`` along the orbit of ``s``; the orbit converges to
    the fixed point 1, and the product stops once a factor is within ``tol``
    of 1.  Accepts real or complex arrays.
    """
    _check_subcritical(p, q)
    u = np.asarray(s, dtype=complex if np.iscomplexobj(s) else float)
    out = np.ones_like(u)
    for _ in range(100_000):
        u = p / (1 - q * u)
        out = out * u
        if np.all(np.abs(u - 1) <= tol):
            break
    return out.item() if np.ndim(s) == 0 else out


def stationary_pmf(p: float, q: float, size: int = 256, tol: float = 1e-14) -> np.ndarray:
    """pi(0..size-1) from the PGF sampled on the unit circle (inverse DFT)."""
    z = np.exp(2j * np.pi * np.arange(size) / size)
    vals = stationary_pgf(p, q, z, tol)
    pmf = np.real(np.fft.fft(vals)) / size
    return np.clip(pmf, 0.0, None)


@nb.njit(nogil=True, cache=True)
def _immigration_run(success, steps, key, ctr, out):
    log_fail = math.log1p(-success)
    v = np.int64(0)
    out[0] = 0
    for j in range(steps):
        v, ctr = _offspring_sum(v + 1, success, log_fail, key, ctr)
        out[j + 1] = v
    return ctr


def immigration_chain(p: float, q: float, steps: int, rng: Stream) -> np.ndarray:
    """Values 0..steps of the one-immigrant chain started at 0."""
    _check_subcritical(p, q)
    out = np.zeros(steps + 1, dtype=np.int64)
    rng.advance_to(_immigration_run(p, steps, *rng.state, out))
    return out


@dataclass(eq=False)
class ReversedSample:
    backward: np.ndarray  # beta_0..beta_M: the stationary chain read backwards from beta_0
    forward: np.ndarray   # beta_0, beta_-1, ..., beta_-M: pure branching from beta_0


@nb.njit(nogil=True, cache=True)
def _reversed_kernel(success, M, burn_in, key, ctr, backward, forward, scratch):
    ctr = _immigration_run(success, burn_in + M, key, ctr, scratch)
    end = burn_in + M
    for k in range(M + 1):
        backward[k] = scratch[end - k]
    log_fail = math.log1p(-success)
    forward[0] = scratch[end]
    for k in range(M):
        forward[k + 1], ctr = _offspring_sum(forward[k], success, log_fail, key, ctr)
    return ctr


def reversed_tail_sample(p: float, q: float, M: int, rng: Stream, burn_in: int = DEFAULT_BURN_IN) -> ReversedSample:
    """One draw of the chain around a stationary point, in both directions."""
    _check_subcritical(p, q)
    backward = np.zeros(M + 1, dtype=np.int64)
    forward = np.zeros(M + 1, dtype=np.int64)
    scratch = np.zeros(burn_in + M + 1, dtype=np.int64)
    rng.advance_to(_reversed_kernel(p, M, burn_in, *rng.state, backward, forward, scratch))
    return ReversedSample(backward, forward)


@nb.njit(nogil=True, cache=True)
def _ens_reversed(success, M, burn_in, seed, n, out_back, out_fwd):
    scratch = np.zeros(burn_in + M + 1, dtype=np.int64)
    for i in range(n):
        key = _nb_derive_key(seed, np.uint64(i))
        _reversed_kernel(success, M, burn_in, key, np.uint64(0), out_back[i], out_fwd[i], scratch)


def reversed_tail_ensemble(p: float, q: float, M: int, replicas: int, master_seed: int,
                           burn_in: int = DEFAULT_BURN_IN) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (replicas, M+1) of backward and forward branches; row i uses stream (seed, i)."""
    _check_subcritical(p, q)
    back = np.zeros((replicas, M + 1), dtype=np.int64)
    fwd = np.zeros((replicas, M + 1), dtype=np.int64)
    _ens_reversed(p, M, burn_in, np.uint64(master_seed & ((1 << 64) - 1)), replicas, back, fwd)
    return back, fwd
