"""Brute-force absorbing-chain oracles, independent of the closed forms.

Each oracle enumerates an augmented state space and solves ``(I - Q) B = R``
for the absorption probabilities.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def _solve(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    return np.linalg.solve(np.eye(Q.shape[0]) - Q, R)


def range_distribution(N: int, p: float, x: int) -> np.ndarray:
    """P_x(R_N = r) for r = 0..N+1, tracking (position, min, max)."""
    q = 1.0 - p
    states = [(pos, lo, hi) for lo in range(1, N) for hi in range(lo, N) for pos in range(lo, hi + 1)]
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    R = np.zeros((len(states), N + 2))
    for i, (pos, lo, hi) in enumerate(states):
        for step, prob in ((1, p), (-1, q)):
            nxt = pos + step
            nlo, nhi = min(lo, nxt), max(hi, nxt)
            if nxt in (0, N):
                R[i, nhi - nlo + 1] += prob
            else:
                Q[i, index[(nxt, nlo, nhi)]] += prob
    B = _solve(Q, R)
    return B[index[(x, x, x)]]


def range_tail(N: int, p: float, x: int, m: int) -> float:
    dist = range_distribution(N, p, x)
    return float(dist[m:].sum())


UNVISITED, ODD, EVEN = 0, 1, 2


def parity_open(N: int, p: float, x: int, y: int) -> tuple[float, float, float]:
    """(P(G(y) odd), P(G(y) odd, exit left), P(G(y) odd, exit right)) for interior x, y.

    The time-0 position counts as a visit.
    """
    q = 1.0 - p
    flip = {UNVISITED: ODD, ODD: EVEN, EVEN: ODD}
    states = [(pos, g) for pos in range(1, N) for g in (UNVISITED, ODD, EVEN)]
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    R = np.zeros((len(states), 2))  # columns: odd & left, odd & right
    for i, (pos, g) in enumerate(states):
        for step, prob in ((1, p), (-1, q)):
            nxt = pos + step
            if nxt == 0:
                R[i, 0] += prob * (g == ODD)
            elif nxt == N:
                R[i, 1] += prob * (g == ODD)
            else:
                Q[i, index[(nxt, flip[g] if nxt == y else g)]] += prob
    B = _solve(Q, R)
    row = B[index[(x, ODD if x == y else UNVISITED)]]
    return float(row.sum()), float(row[0]), float(row[1])


def ruin_rational(p: Fraction, a: int, z: int, b: int) -> Fraction:
    """Exact P_z(T_a < T_b) in rational arithmetic."""
    q = 1 - p
    if p == q:
        return Fraction(b - z, b - a)
    s = q / p
    return (s**z - s**b) / (s**a - s**b)


def walk_exit_right(N: int, p: float, x: int) -> float:
    """P_x(T_N < T_0) from the plain absorbing chain on positions."""
    q = 1.0 - p
    Q = np.zeros((N - 1, N - 1))
    R = np.zeros(N - 1)
    for pos in range(1, N):
        i = pos - 1
        if pos + 1 == N:
            R[i] += p
        else:
            Q[i, i + 1] += p
        if pos - 1 > 0:
            Q[i, i - 1] += q
    return float(_solve(Q, R[:, None])[x - 1, 0])


def enumerate_paths(N: int, x: int, max_len: int):
    """All absorbed nearest-neighbour paths from x with at most ``max_len`` steps."""
    out = []
    stack = [[x]]
    while stack:
        path = stack.pop()
        if path[-1] in (0, N):
            out.append(path)
            continue
        if len(path) > max_len:
            continue
        stack.append(path + [path[-1] + 1])
        stack.append(path + [path[-1] - 1])
    return out
