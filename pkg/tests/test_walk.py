import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stripwalk import exact, walk
from stripwalk.errors import ResourceLimit, SiteOutOfRange, StepCapExceeded
from stripwalk.model import Alpha, Asymmetric, Fixed, Side, Symmetric, UniformRandom, WalkSpec, WeaklyAsymmetric
from stripwalk.rng import Stream
from stripwalk.walk import Parity, parity_of, run_ensemble, simulate_walk

KINDS = [Symmetric(), WeaklyAsymmetric(1.0), Asymmetric(0.6)]

kinds = st.sampled_from(KINDS)


def check_outcome(out, N):
    lt = out.local_times
    visited = np.flatnonzero(lt)
    assert out.range == visited[-1] - visited[0] + 1 == visited.size
    assert lt.sum() == out.exit_time + 1
    assert lt[out.start] >= 1
    if out.exit_side is Side.LEFT:
        assert lt[0] == 1 and lt[N] == 0
    else:
        assert lt[N] == 1 and lt[0] == 0


@given(N=st.integers(1, 40), kind=kinds, seed=st.integers(0, 2**64 - 1), frac=st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_outcome_invariants(N, kind, seed, frac):
    if isinstance(kind, WeaklyAsymmetric) and N < 3:
        kind = Symmetric()
    spec = WalkSpec(N, kind, Fixed(min(int(frac * (N + 1)), N)))
    out = simulate_walk(spec, Stream.for_replica(seed, 0))
    check_outcome(out, N)
    # the exit endpoint is visited exactly once
    end = 0 if out.exit_side is Side.LEFT else N
    assert parity_of(out, [end]) == [Parity.ODD]


def test_born_absorbed():
    out = simulate_walk(WalkSpec(10, start=Fixed(0)), Stream(1))
    assert (out.exit_side, out.exit_time, out.range, out.local_times[0]) == (Side.LEFT, 0, 1, 1)
    out = simulate_walk(WalkSpec(10, start=Fixed(10)), Stream(1))
    assert (out.exit_side, out.exit_time, out.range) == (Side.RIGHT, 0, 1)


def test_one_step_exit():
    spec = WalkSpec(2, start=Fixed(1))
    outs = [simulate_walk(spec, Stream.for_replica(5, i)) for i in range(50)]
    right = [o for o in outs if o.exit_side is Side.RIGHT]
    assert right
    for o in right:
        assert (o.exit_time, o.range) == (1, 2)


def test_same_stream_same_outcome():
    spec = WalkSpec(50, WeaklyAsymmetric(1.0), UniformRandom())
    a = simulate_walk(spec, Stream.for_replica(9, 3))
    b = simulate_walk(spec, Stream.for_replica(9, 3))
    assert a.same_as(b)


def test_parity_classification():
    out = walk.WalkOutcome(Side.RIGHT, 4, np.array([0, 3, 0, 1]), 3, 1)
    assert parity_of(out, [0, 1]) == [Parity.UNVISITED, Parity.ODD]
    assert Parity.from_count(2) is Parity.EVEN
    with pytest.raises(SiteOutOfRange):
        parity_of(out, [4])


def test_exit_frequency_small_interval():
    ens = run_ensemble(WalkSpec(4, start=Fixed(2)), 100_000, 11)
    f = ens.exit_right.mean()
    assert abs(f - 0.5) <= 3 * math.sqrt(0.25 / 100_000)


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.name)
@pytest.mark.parametrize("N", [10, 100, 1000])
def test_exit_frequency_matches_ruin(kind, N):
    spec = WalkSpec(N, kind, Alpha(0.3))
    method = "trajectory" if N <= 100 else "extremes"
    n = 10_000
    ens = run_ensemble(spec, n, 17, method=method)
    p = 1 - exact.ruin_prob(spec, 0, spec.start_site(), N)
    sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
    assert abs(ens.exit_right.mean() - p) <= 4 * sigma + 1e-12


def test_single_replica_equals_simulate_walk():
    spec = WalkSpec(30, Asymmetric(0.6), UniformRandom())
    ens = run_ensemble(spec, 1, 77, dense=True)
    assert ens.outcome(0).same_as(simulate_walk(spec, Stream.for_replica(77, 0)))


@pytest.mark.parametrize("method", walk.METHODS)
def test_workers_do_not_change_output(method):
    spec = WalkSpec(60, WeaklyAsymmetric(1.0), UniformRandom())
    kw = dict(sites=[5, 30, 59], method=method)
    one = run_ensemble(spec, 3001, 5, 1, **kw)
    many = run_ensemble(spec, 3001, 5, 8, **kw)
    assert one.to_json() == many.to_json()
    assert list(one.csv_rows()) == list(many.csv_rows())


def test_methods_agree_with_oracles():
    N, n = 12, 100_000
    for kind in KINDS:
        spec = WalkSpec(N, kind, Fixed(4))
        dist = oracles.range_distribution(N, spec.p, 4)
        for method in ("trajectory", "extremes"):
            r = run_ensemble(spec, n, 3, method=method).range
            emp = np.bincount(r, minlength=N + 2) / n
            assert 0.5 * np.abs(emp - dist).sum() < 0.01
        # mean visits at y: P(hit) / escape
        sites = [2, 4, 9]
        counts = run_ensemble(spec, n, 4, sites=sites, method="sites").site_counts
        for k, y in enumerate(sites):
            mean = exact.hit_before_exit(spec, 4, y) / exact.escape_prob_exact(spec, y)
            se = counts[:, k].std() / math.sqrt(n)
            assert abs(counts[:, k].mean() - mean) < 4 * se


def test_exit_time_decreases_with_drift():
    means, ses = [], []
    for p in (0.55, 0.7, 0.9):
        ens = run_ensemble(WalkSpec(100, Asymmetric(p), Fixed(50)), 10_000, 21)
        means.append(ens.exit_time.mean())
        ses.append(ens.exit_time.std() / 100)
    for a, b, sa, sb in zip(means, means[1:], ses, ses[1:]):
        assert b <= a + 3 * math.hypot(sa, sb)


def test_dense_storage_budget():
    with pytest.raises(ResourceLimit):
        run_ensemble(WalkSpec(1000), 1000, 1, dense=True, memory_budget=1000)


def test_step_cap(monkeypatch):
    monkeypatch.setattr(walk, "step_cap", lambda spec: 3)
    spec = WalkSpec(1000, start=Fixed(500))
    with pytest.raises(StepCapExceeded):
        simulate_walk(spec, Stream(1))
    with pytest.raises(StepCapExceeded):
        run_ensemble(spec, 4, 1)


def test_step_cap_formula():
    assert walk.step_cap(WalkSpec(100)) == 10 * 100**2
    assert walk.step_cap(WalkSpec(100, WeaklyAsymmetric(1.0))) == pytest.approx(10 * 100**2 * 100**2 / 16, rel=1e-9)
    assert walk.step_cap(WalkSpec(100, Asymmetric(0.9))) == 10 * 100**2


def test_csv_schema():
    ens = run_ensemble(WalkSpec(10, start=Fixed(5)), 3, 1, sites=[2, 7])
    assert ens.csv_header() == ["replica_index", "exit_side", "exit_time", "range", "G_2", "G_7",
                                "parity_2", "parity_7"]
    rows = list(ens.csv_rows())
    assert [r[0] for r in rows] == [0, 1, 2]
    assert all(r[1] in ("left", "right") for r in rows)


def test_ensemble_rejects_bad_arguments():
    with pytest.raises(ValueError):
        run_ensemble(WalkSpec(10), 0, 1)
    with pytest.raises(ValueError):
        run_ensemble(WalkSpec(10), 5, 1, method="sites")
    with pytest.raises(SiteOutOfRange):
        run_ensemble(WalkSpec(10), 5, 1, sites=[11])
