"""Walk parameterization: interval size, dynamics and start rule."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

from .errors import InvalidSpec

# floor(alpha * N) guard: 0.29 * 100 == 28.999999999999996 must give 29
_FLOOR_EPS = 1e-9


def scaled_site(fraction: float, N: int) -> int:
    """Integer part of ``fraction * N``, robust to binary rounding."""
    return math.floor(fraction * N + _FLOOR_EPS)


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def endpoint_is_zero(self) -> bool:
        return self is Side.LEFT


@dataclass(frozen=True)
class Symmetric:
    name = "symmetric"


@dataclass(frozen=True)
class WeaklyAsymmetric:
    c: float
    name = "weak"

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidSpec(f"weak asymmetry needs c > 0, got {self.c}")


@dataclass(frozen=True)
class Asymmetric:
    p: float
    name = "asymmetric"

    def __post_init__(self):
        if not 0.5 < self.p < 1:
            raise InvalidSpec(f"asymmetric walk needs 1/2 < p < 1, got {self.p}")


Kind = Union[Symmetric, WeaklyAsymmetric, Asymmetric]


@dataclass(frozen=True)
class Fixed:
    x: int


@dataclass(frozen=True)
class Alpha:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidSpec(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class UniformRandom:
    pass


Start = Union[Fixed, Alpha, UniformRandom]


@dataclass(frozen=True)
class WalkSpec:
    """Nearest-neighbour walk on ``{0, ..., N}`` absorbed at both ends."""

    N: int
    kind: Kind = Symmetric()
    start: Start = UniformRandom()

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 1:
            raise InvalidSpec(f"N must be a positive integer, got {self.N!r}")
        if isinstance(self.start, Fixed) and not 0 <= self.start.x <= self.N:
            raise InvalidSpec(f"start {self.start.x} outside [0, {self.N}]")
        if isinstance(self.kind, WeaklyAsymmetric) and not self.drift < 1:
            raise InvalidSpec(
                f"c={self.kind.c} too large for N={self.N}: q_N = 1/2 - c/N must be positive"
            )

    @property
    def drift(self) -> float:
        """``p_N - q_N``; zero exactly for the symmetric walk."""
        k = self.kind
        if isinstance(k, Symmetric):
            return 0.0
        if isinstance(k, WeaklyAsymmetric):
            return 2.0 * k.c / self.N
        return 2.0 * k.p - 1.0

    @property
    def p(self) -> float:
        return 0.5 + 0.5 * self.drift

    @property
    def q(self) -> float:
        return 0.5 - 0.5 * self.drift

    @property
    def log_ratio(self) -> float:
        """``log(q_N / p_N)``, computed without cancellation for small drift."""
        d = self.drift
        return math.log1p(-2.0 * d / (1.0 + d))

    @property
    def ratio(self) -> float:
        return math.exp(self.log_ratio)

    @property
    def is_symmetric(self) -> bool:
        return self.drift == 0.0

    def start_site(self) -> int | None:
        """Resolved start, or None for a uniformly random start."""
        s = self.start
        if isinstance(s, Fixed):
            return s.x
        if isinstance(s, Alpha):
            return scaled_site(s.alpha, self.N)
        return None

    def with_start(self, start: Start | int) -> "WalkSpec":
        if isinstance(start, int):
            start = Fixed(start)
        return WalkSpec(self.N, self.kind, start)

    def with_N(self, N: int) -> "WalkSpec":
        return WalkSpec(N, self.kind, self.start)


def resolve_probabilities(spec: WalkSpec) -> tuple[float, float]:
    """One-step right/left probabilities ``(p_N, q_N)``."""
    p, q = spec.p, spec.q
    if not (0 < q < 1 and 0 < p < 1):
        raise InvalidSpec(f"one-step probabilities ({p}, {q}) not in (0, 1)")
    return p, q


def kind_from_name(name: str, c: float | None = None, p: float | None = None) -> Kind:
    name = name.strip().lower()
    if name in ("symmetric", "sym"):
        return Symmetric()
    if name in ("weak", "weakly_asymmetric", "weakly-asymmetric"):
        if c is None:
            raise InvalidSpec("weakly asymmetric walk requires c")
        return WeaklyAsymmetric(float(c))
    if name in ("asymmetric", "asym"):
        if p is None:
            raise InvalidSpec("asymmetric walk requires p")
        return Asymmetric(float(p))
    raise InvalidSpec(f"unknown walk kind {name!r}")


def start_from_text(text: str) -> Start:
    """Parse ``uniform``, ``alpha:0.3`` or ``fixed:17``."""
    text = text.strip().lower()
    if text in ("uniform", "random", "uniformrandom"):
        return UniformRandom()
    head, _, value = text.partition(":")
    try:
        if head == "alpha":
            return Alpha(float(value))
        if head == "fixed":
            return Fixed(int(value))
    except ValueError as exc:
        raise InvalidSpec(f"bad start value in {text!r}") from exc
    raise InvalidSpec(f"unknown start rule {text!r}")


def start_to_text(start: Start) -> str:
    if isinstance(start, Alpha):
        return f"alpha:{start.alpha!r}"
    if isinstance(start, Fixed):
        return f"fixed:{start.x}"
    return "uniform"
