"""Distribution comparisons used by the verification experiments.

KS statistics are computed here from sorted samples; p-values are the
asymptotic Kolmogorov bounds (``scipy.special.kolmogorov``), not exact
small-sample values.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable, Mapping

import numpy as np
from scipy import special
from scipy import stats as sps

from .errors import EmptySample, SparseCells


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray

    @classmethod
    def of(cls, data) -> "EmpiricalDistribution":
        arr = np.sort(np.asarray(data, dtype=float).ravel())
        if arr.size == 0:
            raise EmptySample("empirical distribution of an empty sample")
        return cls(arr)

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def cdf(self, x):
        """Right-continuous ECDF: fraction of samples <= x."""
        return np.searchsorted(self.samples, x, side="right") / self.n


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float  # asymptotic bound
    n_eff: float


def _as_emp(data) -> EmpiricalDistribution:
    return data if isinstance(data, EmpiricalDistribution) else EmpiricalDistribution.of(data)


def ks_one_sample(emp, cdf: Callable) -> KSResult:
    e = _as_emp(emp)
    x = e.samples
    n = e.n
    F = np.asarray(cdf(x), dtype=float)
    # ECDF just after and just before each jump; ties share the last jump height
    after = np.searchsorted(x, x, side="right") / n
    before = np.searchsorted(x, x, side="left") / n
    d = float(max(np.max(after - F), np.max(F - before), 0.0))
    return KSResult(d, float(special.kolmogorov(math.sqrt(n) * d)), float(n))


def ks_two_sample(a, b) -> KSResult:
    ea, eb = _as_emp(a), _as_emp(b)
    grid = np.concatenate([ea.samples, eb.samples])
    d = float(np.max(np.abs(ea.cdf(grid) - eb.cdf(grid))))
    n_eff = ea.n * eb.n / (ea.n + eb.n)
    return KSResult(d, float(special.kolmogorov(math.sqrt(n_eff) * d)), n_eff)


def ks_threshold(level: float, n: int, m: int | None = None) -> float:
    """Asymptotic critical KS distance at significance ``level``."""
    n_eff = n if m is None else n * m / (n + m)
    return float(special.kolmogi(level) / math.sqrt(n_eff))


def total_variation(samples, pmf: Mapping[int, float] | Callable[[int], float], support=None) -> float:
    """TV distance between the empirical pmf of integer samples and ``pmf``.

    Mass outside ``support`` (on either side) is compared as one lump.
    """
    arr = np.asarray(samples).astype(np.int64)
    if arr.size == 0:
        raise EmptySample("total variation of an empty sample")
    f = pmf.get if isinstance(pmf, Mapping) else pmf
    if support is None:
        support = sorted(pmf) if isinstance(pmf, Mapping) else np.unique(arr)
    support = np.asarray(list(support), dtype=np.int64)
    emp = np.array([(arr == k).mean() for k in support])
    ref = np.array([float(f(int(k)) or 0.0) for k in support])
    rest = abs((1.0 - emp.sum()) - (1.0 - ref.sum()))
    return float(0.5 * (np.abs(emp - ref).sum() + rest))


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def batch_means_sigma(x, n_batches: int = 100) -> float:
    """Standard error of the mean of a correlated series by batch means."""
    arr = np.asarray(x, dtype=float)
    size = arr.size // n_batches
    means = arr[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


# ------------------------------------------------------------------ parity


def parity_table(bits) -> np.ndarray:
    """Contingency counts of shape (2,)*k from an (n, k) array of 0/1 bits."""
    b = np.asarray(bits, dtype=np.int64)
    k = b.shape[1]
    flat = b @ (1 << np.arange(k - 1, -1, -1))
    return np.bincount(flat, minlength=2**k).reshape((2,) * k)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float  # asymptotic chi-square bound


def parity_independence_test(table) -> ChiSquareResult:
    """Pearson test of a 2^k table against the product of its fitted marginals."""
    t = np.asarray(table, dtype=float)
    k = t.ndim
    n = t.sum()
    expected = np.full(t.shape, n)
    for axis in range(k):
        other = tuple(a for a in range(k) if a != axis)
        marg = t.sum(axis=other) / n
        shape = [1] * k
        shape[axis] = 2
        expected = expected * marg.reshape(shape)
    if np.any(expected < 5):
        raise SparseCells(f"expected counts below 5: min {expected.min():.3g}")
    stat = float(((t - expected) ** 2 / expected).sum())
    dof = 2**k - 1 - k
    return ChiSquareResult(stat, dof, float(sps.chi2.sf(stat, dof)))


def pattern_frequencies(bits) -> dict[tuple[int, ...], float]:
    table = parity_table(bits)
    n = table.sum()
    return {e: float(table[e] / n) for e in itertools.product((0, 1), repeat=table.ndim)}


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class Verdict:
    """One checked criterion: a statistic against a threshold."""

    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""
    op: str = "<="

    @classmethod
    def at_most(cls, name: str, statistic: float, threshold: float, detail: str = "") -> "Verdict":
        return cls(name, float(statistic), float(threshold), bool(statistic <= threshold), detail)

    @classmethod
    def at_least(cls, name: str, statistic: float, threshold: float, detail: str = "") -> "Verdict":
        return cls(name, float(statistic), float(threshold), bool(statistic >= threshold), detail, ">=")

    def to_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        text = f"[{mark}] {self.name}: {self.statistic:.6g} {self.op} {self.threshold:.6g}"
        return f"{text}  ({self.detail})" if self.detail else text
