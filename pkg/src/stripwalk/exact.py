"""Closed-form hitting, range, escape and parity probabilities.

Finite-N quantities are compositions of the two-boundary ruin probability via
the strong Markov property; the limit laws are the N -> infinity forms of the
same compositions.  Drifted formulas are written with ``expm1`` so that
``s_N^N ~ exp(-4c)`` and ``c -> 0`` are both evaluated without cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import InvalidRange
from .model import Asymmetric, Kind, Side, Symmetric, WalkSpec, WeaklyAsymmetric


@nb.njit(cache=True)
def ruin_from_log_ratio(L, a, z, b):
    """P_z(T_a < T_b) for a walk with ``log(q/p) = L``; requires a <= z <= b, a < b."""
    if z <= a:
        return 1.0
    if z >= b:
        return 0.0
    if L == 0.0:
        return (b - z) / (b - a)
    return math.exp((z - a) * L) * math.expm1((b - z) * L) / math.expm1((b - a) * L)


def ruin_prob(spec: WalkSpec, a: int, z: int, b: int) -> float:
    """Probability that the walk started at ``z`` hits ``a`` before ``b``."""
    if not (a <= z <= b and a < b):
        raise InvalidRange(f"need a <= z <= b and a < b, got ({a}, {z}, {b})")
    return float(ruin_from_log_ratio(spec.log_ratio, a, z, b))


def exit_right_prob_limit(kind: Kind, alpha: float) -> float:
    """Limiting probability of exiting at N when starting from floor(alpha N)."""
    if isinstance(kind, Symmetric):
        return alpha
    if isinstance(kind, WeaklyAsymmetric):
        c = kind.c
        return math.expm1(-4 * c * alpha) / math.expm1(-4 * c)
    return 1.0


def _check_interior(spec: WalkSpec, *sites: int) -> None:
    for s in sites:
        if not 1 <= s <= spec.N - 1:
            raise InvalidRange(f"site {s} not in [1, {spec.N - 1}]")


def hit_before_exit(spec: WalkSpec, x: int, y: int) -> float:
    """P_x(T_y < tau_N) with the time-0 visit counted: y is visited at all."""
    N = spec.N
    if not (0 <= x <= N and 0 <= y <= N):
        raise InvalidRange(f"sites ({x}, {y}) outside [0, {N}]")
    if x == y:
        return 1.0
    if x in (0, N):
        return 0.0
    L = spec.log_ratio
    if x < y:
        return 1.0 - ruin_from_log_ratio(L, 0, x, y)
    return ruin_from_log_ratio(L, y, x, N)


def range_tail_exact(spec: WalkSpec, x: int, m: int) -> float:
    """Exact P_x(R_N >= m), R_N the number of distinct sites visited.

    A left exit has range ``max + 1`` and a right exit ``N - min + 1``, so the
    event splits into "reach m-1 then exit at 0" and "reach N-m+1 then exit
    at N".
    """
    N = spec.N
    _check_interior(spec, x)
    if not 1 <= m <= N + 1:
        raise InvalidRange(f"m={m} not in [1, {N + 1}]")
    if m <= min(x, N - x) + 1:
        return 1.0
    L = spec.log_ratio
    top = m - 1
    if top <= x:
        left = ruin_from_log_ratio(L, 0, x, N)
    else:
        left = (1.0 - ruin_from_log_ratio(L, 0, x, top)) * ruin_from_log_ratio(L, 0, top, N)
    bottom = N - m + 1
    if bottom >= x:
        right = 1.0 - ruin_from_log_ratio(L, 0, x, N)
    else:
        right = ruin_from_log_ratio(L, bottom, x, N) * (1.0 - ruin_from_log_ratio(L, 0, bottom, N))
    return left + right


# ---------------------------------------------------------------- limit laws


def _arr(beta):
    return np.asarray(beta, dtype=float)


def _out(values, beta):
    return float(values) if np.ndim(beta) == 0 else values


class LimitLaw:
    """Limiting distribution with a tail ``P(X >= beta)``."""

    has_density = False

    def tail(self, beta):
        raise NotImplementedError

    def cdf(self, beta):
        """``P(X <= beta)`` (continuous laws only)."""
        return _out(1.0 - _arr(self.tail(beta)), beta)

    def density(self, beta):
        raise NotImplementedError(f"{type(self).__name__} exposes no density")


@dataclass(frozen=True)
class SymRange(LimitLaw):
    """Limit of R_N / N for the symmetric walk started at floor(alpha N)."""

    alpha: float
    has_density = True

    @property
    def bounds(self) -> tuple[float, float]:
        a = min(self.alpha, 1 - self.alpha)
        return a, 1 - a

    def tail(self, beta):
        b = _arr(beta)
        lo, hi = self.bounds
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.select(
                [b <= lo, b < hi, b <= 1.0],
                [1.0, lo / b, (1.0 - b) / b],
                default=0.0,
            )
        return _out(out, beta)

    def density(self, beta):
        b = _arr(beta)
        lo, hi = self.bounds
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.select(
                [b <= lo, b < hi, b <= 1.0],
                [0.0, lo / b**2, 1.0 / b**2],
                default=0.0,
            )
        return _out(out, beta)


@dataclass(frozen=True)
class WeakRange(LimitLaw):
    """Limit of R_N / N for the weakly asymmetric walk (drift c/N)."""

    alpha: float
    c: float

    def tail(self, beta):
        b = _arr(beta)
        a, c = self.alpha, self.c
        lo, hi = min(a, 1 - a), max(a, 1 - a)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            den = np.expm1(-4 * c * b)
            # exponents below are <= 0 on the branches where they are used
            mid_left = math.expm1(-4 * c * a) / den
            mid_right = np.exp(4 * c * (1 - a - b)) * math.expm1(-4 * c * (1 - a)) / den
            upper = np.exp(4 * c * (1 - a - b)) * np.expm1(-4 * c * (1 - b)) / den
            middle = mid_left if a < 0.5 else mid_right
            out = np.select(
                [b <= lo, b < hi, b <= 1.0],
                [1.0, middle, upper],
                default=0.0,
            )
        return _out(out, beta)


@dataclass(frozen=True)
class AsymGeometric(LimitLaw):
    """Law of the overshoot ``x - min = R_N - (N - x) - 1`` past the start,
    against the drift: ``P(Z >= z) = rho**z``."""

    rho: float

    def tail(self, z):
        zz = np.ceil(_arr(z))
        out = np.where(zz <= 0, 1.0, self.rho ** np.maximum(zz, 0))
        return _out(out, z)

    def pmf(self, z):
        zz = _arr(z)
        out = np.where(zz >= 0, (1 - self.rho) * self.rho ** np.maximum(zz, 0), 0.0)
        return _out(out, z)


@dataclass(frozen=True)
class Uniform01(LimitLaw):
    has_density = True

    def tail(self, beta):
        return _out(np.clip(1.0 - _arr(beta), 0.0, 1.0), beta)

    def density(self, beta):
        b = _arr(beta)
        return _out(np.where((b >= 0) & (b <= 1), 1.0, 0.0), beta)


@dataclass(frozen=True)
class BernoulliParity(LimitLaw):
    """Indicator of an odd visit count, success probability ``theta``."""

    theta: float

    def tail(self, beta):
        b = _arr(beta)
        out = np.select([b <= 0, b <= 1], [1.0, self.theta], default=0.0)
        return _out(out, beta)

    def cdf(self, beta):
        b = _arr(beta)
        out = np.select([b < 0, b < 1], [0.0, 1.0 - self.theta], default=1.0)
        return _out(out, beta)


def range_limit_law(kind: Kind, alpha: float) -> LimitLaw:
    if isinstance(kind, Symmetric):
        return SymRange(alpha)
    if isinstance(kind, WeaklyAsymmetric):
        return WeakRange(alpha, kind.c)
    return AsymGeometric((1 - kind.p) / kind.p)


def range_tail_limit(law: LimitLaw, beta):
    return law.tail(beta)


def expected_range_symmetric(alpha: float) -> float:
    """Limit of E[R_N / N]: the entropy of the exit law (1 - alpha, alpha)."""
    return float(-(1 - alpha) * math.log1p(-alpha) - alpha * math.log(alpha))


# ------------------------------------------------------- visits and parities


def point_visited_prob(spec: WalkSpec, x: int | None, y: int) -> float:
    """Exact probability that ``y`` is visited before exit.

    ``x=None`` averages over a start uniform on ``{0, ..., N}``.
    """
    if x is not None:
        return hit_before_exit(spec, x, y)
    N = spec.N
    return sum(hit_before_exit(spec, s, y) for s in range(N + 1)) / (N + 1)


def point_visited_limit(kind: Kind, beta: float) -> float:
    """Limit, for a uniformly random start, of P(floor(beta N) is visited)."""
    if isinstance(kind, Symmetric):
        return 0.5
    if isinstance(kind, Asymmetric):
        return beta
    c = kind.c
    # integral over the start of the limiting hitting probabilities
    left = -beta / math.expm1(-4 * c * beta)
    arg = 4 * c * (1 - beta)
    right = 0.0 if arg > 700 else (1 - beta) / math.expm1(arg)
    return left - right


def escape_prob_exact(spec: WalkSpec, y: int) -> float:
    """P_y(tau_N < return time to y)."""
    _check_interior(spec, y)
    N = spec.N
    if spec.is_symmetric:
        return N / (2.0 * y * (N - y))
    L = spec.log_ratio
    return spec.p * math.expm1(L) * math.expm1(N * L) / (math.expm1(y * L) * math.expm1((N - y) * L))


def escape_to_side(spec: WalkSpec, y: int, side: Side) -> float:
    """P_y(exit through ``side`` before returning to y)."""
    _check_interior(spec, y)
    N = spec.N
    if spec.is_symmetric:
        return 0.5 / (N - y) if side is Side.RIGHT else 0.5 / y
    L = spec.log_ratio
    if side is Side.RIGHT:
        return spec.p * math.expm1(L) / math.expm1((N - y) * L)
    return spec.p * math.exp(y * L) * math.expm1(L) / math.expm1(y * L)


def parity_open_prob_exact(spec: WalkSpec, x: int, y: int, condition: Side | None = None) -> float:
    """Probability that ``G(y)`` is odd, jointly with the exit event ``condition``.

    Given a visit, the number of returns is geometric, so
    ``P(odd) = P_x(visit y) / (2 - escape)``; the exit-side split weights that
    by the share of the escape probability through each endpoint.
    """
    _check_interior(spec, x, y)
    esc = escape_prob_exact(spec, y)
    base = hit_before_exit(spec, x, y) / (2.0 - esc)
    if condition is None:
        return base
    return base * escape_to_side(spec, y, Side(condition)) / esc


def parity_joint_limit(kind: Kind, k: int) -> float:
    """Limit of the probability that k well-separated visited sites are all odd."""
    if k < 0:
        raise InvalidRange(f"k must be >= 0, got {k}")
    if isinstance(kind, Asymmetric):
        return (2.0 - (2 * kind.p - 1)) ** (-k)
    return 0.5**k
