"""Acceptance criteria at full scale.

Each test runs one criterion with the default (fixed) seed and records one
PASS/FAIL line, followed by the individual checks; the lines are echoed at
the end of the pytest run.  Run as a script to print them directly:

    python tests/test_acceptance.py
"""
import math
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles
from conftest import ACCEPTANCE_LINES
from stripwalk import diffusion, exact
from stripwalk.experiments import DEFAULT_SEED, get_experiment
from stripwalk.model import Asymmetric, Side, Symmetric, WalkSpec, WeaklyAsymmetric
from stripwalk.report import run_manifest
from stripwalk.rng import derive_key

pytestmark = pytest.mark.slow


def record(number: int, title: str, checks: list[tuple[str, bool]], info=()) -> bool:
    ok = all(passed for _, passed in checks)
    lines = [f"C{number:<2d} {'PASS' if ok else 'FAIL'}  {title}"]
    lines += [f"      {line}" for line, _ in checks]
    lines += [f"      [INFO] {line}" for line in info]
    ACCEPTANCE_LINES.extend(lines)
    print("\n".join(lines))
    return ok


def run(*ids: str):
    """Run experiments with their default manifests; returns (checks, info, seconds)."""
    checks, info = [], []
    t0 = time.perf_counter()
    for exp_id in ids:
        result, _ = run_manifest(get_experiment(exp_id).manifest())
        checks += [(v.line(), v.passed) for v in result.verdicts]
        info += [f"{k} = {v}" for k, v in result.info.items() if k != "pi_head"]
    return checks, info, time.perf_counter() - t0


def runtime_check(seconds: float, limit: float) -> tuple[str, bool]:
    ok = seconds <= limit
    return f"[{'PASS' if ok else 'FAIL'}] runtime: {seconds:.1f} s <= {limit:.0f} s", ok


def test_c1_range_fixed_start():
    checks, info, secs = run("range-fixed-start")
    checks.append(runtime_check(secs, 60))
    assert record(1, "range law, fixed start: KS of R_N/N to the limit law <= 0.02 (symmetric, weak c=1)",
                  checks, info)


def test_c2_asymmetric_geometric_tail():
    checks, info, _ = run("range-asymmetric-geometric")
    assert record(2, "asymmetric range overshoot: TV to geometric(2/3) on 0..30 <= 0.01", checks, info)


def test_c3_uniform_start():
    checks, info, _ = run("range-uniform-start")
    assert record(3, "uniform start: KS of R_N/N to U[0,1] <= 0.02 for all three kinds", checks, info)


def test_c4_entropy():
    checks, info, _ = run("entropy-expected-range")
    assert record(4, "expected range: |mean(R_N/N) - entropy| <= 0.01 at alpha 0.3, 0.5", checks, info)


def test_c5_point_visited():
    checks, info, _ = run("point-visited")
    c, beta = 1.0, 0.25
    literal = beta / (1 - math.exp(-4 * c * beta)) - (1 - beta) / (1 - math.exp(4 * c * (1 - beta)))
    info.append(f"weak limit read with the opposite exponent sign would give {literal:.4f} at beta=0.25; "
                f"the implemented limit {exact.point_visited_limit(WeaklyAsymmetric(c), beta):.4f} "
                "agrees with the exact finite-N value")
    assert record(5, "point visited from a uniform start: frequency within 0.01 of the limit", checks, info)


def _oracle_sweep() -> tuple[float, float, int]:
    """Max |exact - oracle| for range tails (N <= 12) and parities (N <= 10)."""
    kinds = [Symmetric(), WeaklyAsymmetric(1.0), Asymmetric(0.6)]
    worst_range = worst_parity = 0.0
    cases = 0
    for kind in kinds:
        for N in range(2, 13):
            if isinstance(kind, WeaklyAsymmetric) and N < 3:
                continue  # c/N must keep q_N > 0
            spec = WalkSpec(N, kind)
            for x in range(1, N):
                dist = oracles.range_distribution(N, spec.p, x)
                for m in range(1, N + 2):
                    diff = abs(exact.range_tail_exact(spec, x, m) - dist[m:].sum())
                    worst_range = max(worst_range, diff)
                    cases += 1
                if N > 10:
                    continue
                for y in range(1, N):
                    total, left, right = oracles.parity_open(N, spec.p, x, y)
                    for cond, ref in ((None, total), (Side.LEFT, left), (Side.RIGHT, right)):
                        diff = abs(exact.parity_open_prob_exact(spec, x, y, cond) - ref)
                        worst_parity = max(worst_parity, diff)
                        cases += 1
    return worst_range, worst_parity, cases


def test_c6_oracle_equivalence():
    t0 = time.perf_counter()
    worst_range, worst_parity, cases = _oracle_sweep()
    secs = time.perf_counter() - t0
    checks = [
        (f"[{'PASS' if worst_range <= 1e-10 else 'FAIL'}] range tails, N <= 12: "
         f"max |exact - oracle| = {worst_range:.3g} <= 1e-10", worst_range <= 1e-10),
        (f"[{'PASS' if worst_parity <= 1e-10 else 'FAIL'}] parity, N <= 10, unconditioned and per exit side: "
         f"max |exact - oracle| = {worst_parity:.3g} <= 1e-10", worst_parity <= 1e-10),
        runtime_check(secs, 30),
    ]
    info = [f"{cases} cases; kinds symmetric, weak c=1 (N >= 3), asymmetric p=0.6; all interior starts and sites"]
    assert record(6, "exact formulas against absorbing-chain oracles to 1e-10", checks, info)


def test_c7_rayknight():
    checks, info, _ = run("rayknight-equivalence")
    assert record(7, "crossing-chain local times vs direct walks: two-sample KS at level 0.01", checks, info)


def test_c8_diffusion():
    checks, info, _ = run("diffusion-limit")
    # start-up bias of the Euler scheme, reported only
    p = get_experiment("diffusion-limit").params(get_experiment("diffusion-limit").manifest())
    ens = diffusion.run_path_ensemble(diffusion.Besq(p["alpha"]), p["dt"], p["mean_paths"],
                                      derive_key(DEFAULT_SEED, 99), [0.1])
    v = ens.values[:, 0]
    z = (v.mean() - 0.1) / (v.std() / math.sqrt(v.size))
    info.append(f"Besq Euler mean at t=0.1: {v.mean():.5f} vs 0.1 ({z:+.1f} sigma; scheme bias of order dt)")
    assert record(8, "scaled local times vs reversed Besq / squared-OU paths; Euler means in 3 sigma bands",
                  checks, info)


def test_c9_parity():
    checks, info, _ = run("parity-single", "parity-joint")
    assert record(9, "parity: fair i.i.d. bits (symmetric), open probability 1/1.8 and 1/1.8^2 (p=0.6)",
                  checks, info)


def test_c10_stationary():
    checks, info, _ = run("asym-stationary")
    assert record(10, "immigration chain (p=0.7): Psi(0) within 4 sigma; reversed marginals vs pi at level 0.01",
                  checks, info)


if __name__ == "__main__":
    tests = [test_c1_range_fixed_start, test_c2_asymmetric_geometric_tail, test_c3_uniform_start, test_c4_entropy,
             test_c5_point_visited, test_c6_oracle_equivalence, test_c7_rayknight, test_c8_diffusion,
             test_c9_parity, test_c10_stationary]
    failed = 0
    for test in tests:
        try:
            test()
        except AssertionError:
            failed += 1
    print(f"\n{len(tests) - failed}/{len(tests)} criteria passed")
    sys.exit(1 if failed else 0)
