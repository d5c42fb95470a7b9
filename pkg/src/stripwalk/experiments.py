"""Built-in verification experiments.

Each experiment has a table of typed defaults (overridable from a manifest)
and a runner returning verdicts plus the samples they were computed from.
Every random input is keyed by the master seed and a fixed case index, so a
manifest determines its outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exact
from .config import COMMON_KEYS, Manifest, coerce, to_text
from .diffusion import LimitProcess, ousq_mean, run_path_ensemble
from .errors import ConfigError
from .model import Alpha, Side, UniformRandom, WalkSpec, kind_from_name, scaled_site
from .rayknight import (
    reversed_tail_ensemble,
    run_chain_ensemble,
    immigration_chain,
    stationary_pgf,
    stationary_pmf,
)
from .rng import Stream, derive_key
from .walk import run_ensemble
from .stats import (
    Verdict,
    batch_means_sigma,
    binomial_sigma,
    ks_one_sample,
    ks_threshold,
    ks_two_sample,
    parity_independence_test,
    parity_table,
    total_variation,
)

DEFAULT_SEED = 20240917


@dataclass
class ExperimentResult:
    verdicts: list[Verdict] = field(default_factory=list)
    samples: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


@dataclass(frozen=True)
class Experiment:
    id: str
    summary: str
    defaults: dict
    runner: Callable[[dict, int], ExperimentResult]

    def params(self, manifest: Manifest | None = None) -> dict:
        """Defaults overridden by the manifest; unknown keys raise ConfigError."""
        out = dict(self.defaults)
        out["seed"] = DEFAULT_SEED
        if manifest is None:
            return out
        for key, raw in manifest.values.items():
            if key in ("experiment", "workers", "out", "format"):
                continue
            if key not in out:
                raise ConfigError(f"unknown key {key!r} for experiment {self.id!r}")
            out[key] = coerce(key, raw, out[key])
        if out["replicas"] < 1:
            raise ConfigError(f"replicas must be >= 1, got {out['replicas']}")
        return out

    def manifest(self) -> Manifest:
        values = {"experiment": self.id, "seed": str(DEFAULT_SEED)}
        values.update({k: to_text(v) for k, v in self.defaults.items()})
        return Manifest(values)

    def run(self, params: dict, workers: int = 1) -> ExperimentResult:
        return self.runner(params, workers)


CATALOG: dict[str, Experiment] = {}


def experiment(id_: str, summary: str, **defaults):
    def register(fn):
        if id_ in CATALOG:
            raise ValueError(f"duplicate experiment id {id_!r}")
        CATALOG[id_] = Experiment(id_, summary, defaults, fn)
        return fn

    return register


def list_experiments() -> list[Experiment]:
    return list(CATALOG.values())


def get_experiment(id_: str) -> Experiment:
    try:
        return CATALOG[id_]
    except KeyError:
        raise ConfigError(f"unknown experiment {id_!r}; see 'stripwalk list'") from None


# ------------------------------------------------------------------ helpers


def _seed(params: dict, case: int) -> int:
    return derive_key(params["seed"], case)


def _kind(name: str, params: dict):
    return kind_from_name(name, c=params.get("c"), p=params.get("p"))


def _exit_counts(spec: WalkSpec, side: Side, sites, n: int, seed: int, workers: int) -> np.ndarray:
    """Visit counts at ``sites`` for the first ``n`` replicas exiting through ``side``."""
    x = spec.start_site()
    p_side = exact.ruin_prob(spec, 0, x, spec.N)
    if side is Side.RIGHT:
        p_side = 1.0 - p_side
    replicas = int(math.ceil((n + 6 * math.sqrt(n)) / p_side)) + 10
    ens = run_ensemble(spec, replicas, seed, workers, sites=sites, method="sites")
    mask = ens.exit_right if side is Side.RIGHT else ~ens.exit_right
    counts = ens.site_counts[mask]
    if counts.shape[0] < n:
        raise RuntimeError(f"only {counts.shape[0]} of {n} replicas exited {side.value}")
    return counts[:n]


# ------------------------------------------------------------ range laws


@experiment(
    "range-fixed-start",
    "R_N/N from a fixed start against the limiting range law (KS)",
    N=2000, alpha=0.3, c=1.0, kinds=("symmetric", "weak"), replicas=100_000, tolerance=0.02,
)
def _range_fixed(params, workers):
    res = ExperimentResult()
    for case, name in enumerate(params["kinds"]):
        kind = _kind(name, params)
        spec = WalkSpec(params["N"], kind, Alpha(params["alpha"]))
        ens = run_ensemble(spec, params["replicas"], _seed(params, case), workers, method="extremes")
        scaled = ens.range / spec.N
        law = exact.range_limit_law(kind, params["alpha"])
        ks = ks_one_sample(scaled, law.cdf)
        res.verdicts.append(Verdict.at_most(
            f"range-fixed-start/{name}", ks.statistic, params["tolerance"], "KS of R_N/N to the limit law"))
        res.samples[name] = {"range": ens.range, "exit_right": ens.exit_right.astype(np.int8)}
    return res


@experiment(
    "range-asymmetric-geometric",
    "overshoot of the range past N - x for the asymmetric walk (TV to geometric)",
    N=2000, alpha=0.3, p=0.6, replicas=100_000, truncate=30, tolerance=0.01,
)
def _range_geometric(params, workers):
    res = ExperimentResult()
    kind = _kind("asymmetric", params)
    spec = WalkSpec(params["N"], kind, Alpha(params["alpha"]))
    x = spec.start_site()
    ens = run_ensemble(spec, params["replicas"], _seed(params, 0), workers, method="extremes")
    overshoot = ens.range - (spec.N - x) - 1
    law = exact.range_limit_law(kind, params["alpha"])
    support = range(params["truncate"] + 1)
    tv = total_variation(overshoot, lambda z: float(law.pmf(z)), support)
    res.verdicts.append(Verdict.at_most(
        "range-asymmetric-geometric", tv, params["tolerance"],
        f"TV of R_N - (N - x) - 1 on 0..{params['truncate']} to rho^z (1 - rho), rho = {law.rho:.6g}"))
    res.samples["asymmetric"] = {"range": ens.range, "overshoot": overshoot}
    res.info["left_exits"] = int((~ens.exit_right).sum())
    return res


@experiment(
    "range-uniform-start",
    "R_N/N from a uniformly random start against U[0,1] (KS)",
    N=2000, c=1.0, p=0.6, kinds=("symmetric", "weak", "asymmetric"), replicas=100_000, tolerance=0.02,
)
def _range_uniform(params, workers):
    res = ExperimentResult()
    law = exact.Uniform01()
    for case, name in enumerate(params["kinds"]):
        spec = WalkSpec(params["N"], _kind(name, params), UniformRandom())
        ens = run_ensemble(spec, params["replicas"], _seed(params, case), workers, method="extremes")
        ks = ks_one_sample(ens.range / spec.N, law.cdf)
        res.verdicts.append(Verdict.at_most(
            f"range-uniform-start/{name}", ks.statistic, params["tolerance"], "KS of R_N/N to U[0,1]"))
        res.samples[name] = {"start": ens.start, "range": ens.range}
    return res


@experiment(
    "entropy-expected-range",
    "mean of R_N/N against the entropy of the exit law (symmetric walk)",
    N=4000, alphas=(0.3, 0.5), replicas=100_000, tolerance=0.01,
)
def _entropy(params, workers):
    res = ExperimentResult()
    for case, alpha in enumerate(params["alphas"]):
        spec = WalkSpec(params["N"], kind_from_name("symmetric"), Alpha(alpha))
        ens = run_ensemble(spec, params["replicas"], _seed(params, case), workers, method="extremes")
        mean = float((ens.range / spec.N).mean())
        target = exact.expected_range_symmetric(alpha)
        res.verdicts.append(Verdict.at_most(
            f"entropy-expected-range/alpha={alpha:g}", abs(mean - target), params["tolerance"],
            f"mean {mean:.5f} vs entropy {target:.5f}"))
        res.samples[f"alpha={alpha:g}"] = {"range": ens.range}
    return res


@experiment(
    "point-visited",
    "frequency with which floor(beta N) is visited from a uniform start",
    N=2000, betas=(0.25, 0.5, 0.75), c=1.0, p=0.6, kinds=("symmetric", "weak", "asymmetric"),
    replicas=100_000, tolerance=0.01,
)
def _point_visited(params, workers):
    res = ExperimentResult()
    N = params["N"]
    sites = [scaled_site(b, N) for b in params["betas"]]
    for case, name in enumerate(params["kinds"]):
        kind = _kind(name, params)
        spec = WalkSpec(N, kind, UniformRandom())
        ens = run_ensemble(spec, params["replicas"], _seed(params, case), workers, sites=sites, method="sites")
        group = {"start": ens.start}
        for k, (beta, y) in enumerate(zip(params["betas"], sites)):
            freq = float((ens.site_counts[:, k] > 0).mean())
            target = exact.point_visited_limit(kind, beta)
            res.verdicts.append(Verdict.at_most(
                f"point-visited/{name}/beta={beta:g}", abs(freq - target), params["tolerance"],
                f"frequency {freq:.5f} vs limit {target:.5f}"))
            group[f"G_{y}"] = ens.site_counts[:, k]
        res.samples[name] = group
    return res


# ---------------------------------------------------------- local times


@experiment(
    "rayknight-equivalence",
    "local times from crossing chains against direct walks (two-sample KS)",
    N=400, alpha=0.5, c=1.0, p=0.6, times=(0.25, 0.5, 0.75),
    cases=("symmetric:right", "symmetric:left", "weak:right", "weak:left", "asymmetric:right"),
    replicas=10_000, trials=10_000, level=0.01, sigmas=4.0,
)
def _rayknight(params, workers):
    res = ExperimentResult()
    N, n = params["N"], params["replicas"]
    sites = [scaled_site(t, N) for t in params["times"]]
    thr = ks_threshold(params["level"], n, n)
    for case, label in enumerate(params["cases"]):
        name, _, side_name = label.partition(":")
        side = Side(side_name or "right")
        spec = WalkSpec(N, _kind(name, params), Alpha(params["alpha"]))
        direct = _exit_counts(spec, side, sites, n, _seed(params, 3 * case), workers)
        chains = run_chain_ensemble(spec, side, n, _seed(params, 3 * case + 1), sites=sites, workers=workers)
        rk = chains.accepted_counts()
        for k, (t, y) in enumerate(zip(params["times"], sites)):
            ks = ks_two_sample(direct[:, k], rk[:, k])
            res.verdicts.append(Verdict.at_most(
                f"rayknight-equivalence/{name}/{side.value}/t={t:g}", ks.statistic, thr,
                f"two-sample KS at level {params['level']:g}, p~{ks.pvalue:.3g}"))
        # acceptance of the unrestricted chain against the exact exit probability
        trials = run_chain_ensemble(spec, side, params["trials"], _seed(params, 3 * case + 2), max_attempts=1,
                                    workers=workers)
        freq = float(trials.accepted.mean())
        x = spec.start_site()
        p_exit = exact.ruin_prob(spec, 0, x, N)
        if side is Side.RIGHT:
            p_exit = 1.0 - p_exit
        sigma = binomial_sigma(p_exit, params["trials"])
        dev = abs(freq - p_exit)
        res.verdicts.append(Verdict.at_most(
            f"rayknight-equivalence/{name}/{side.value}/acceptance", dev,
            max(params["sigmas"] * sigma, 1.0 / params["trials"]),
            f"vanishing frequency {freq:.5f} vs exit probability {p_exit:.5f}"))
        group = {}
        for k, y in enumerate(sites):
            group[f"direct_G_{y}"] = direct[:, k]
            group[f"chain_G_{y}"] = rk[:, k]
        res.samples[f"{name}-{side.value}"] = group
        res.info[f"{name}-{side.value}-acceptance_rate"] = chains.acceptance_rate
    return res


@experiment(
    "diffusion-limit",
    "scaled local times against reversed conditioned Besq / squared-OU paths",
    N=1000, alpha=0.5, c=1.0, times=(0.3, 0.6, 0.9), replicas=10_000, dt=1e-3, level=0.01,
    mean_paths=100_000, mean_times=(0.25, 0.5), sigmas=3.0, acceptance_N=400,
)
def _diffusion(params, workers):
    res = ExperimentResult()
    N, n, dt = params["N"], params["replicas"], params["dt"]
    times = np.asarray(params["times"], dtype=float)
    sites = [scaled_site(t, N) for t in times]
    thr = ks_threshold(params["level"], n, n)
    for case, name in enumerate(("symmetric", "weak")):
        kind = _kind(name, params)
        c = params["c"] if name == "weak" else 0.0
        proc = LimitProcess(params["alpha"], c, Side.RIGHT)
        spec = WalkSpec(N, kind, Alpha(params["alpha"]))
        direct = _exit_counts(spec, Side.RIGHT, sites, n, _seed(params, 10 * case), workers) / (2.0 * N)
        paths = run_path_ensemble(proc, dt, n, _seed(params, 10 * case + 1), 1.0 - times,
                                  conditioned=True, workers=workers)
        for k, t in enumerate(times):
            ks = ks_two_sample(direct[:, k], paths.values[:, k])
            res.verdicts.append(Verdict.at_most(
                f"diffusion-limit/{proc.name}/t={t:g}", ks.statistic, thr,
                f"G(tN)/(2N) vs Z_(1-t), two-sample KS at level {params['level']:g}, p~{ks.pvalue:.3g}"))
        res.samples[name] = {
            **{f"walk_t={t:g}": direct[:, k] for k, t in enumerate(times)},
            **{f"limit_t={t:g}": paths.values[:, k] for k, t in enumerate(times)},
        }

        # pre-switch Euler means
        mt = np.asarray(params["mean_times"], dtype=float)
        free = run_path_ensemble(proc, dt, params["mean_paths"], _seed(params, 10 * case + 2), mt, workers=workers)
        means = free.values.mean(axis=0)
        ses = free.values.std(axis=0, ddof=1) / math.sqrt(params["mean_paths"])
        for t, m, se in zip(mt, means, ses):
            target = float(ousq_mean(c, t))
            res.verdicts.append(Verdict.at_most(
                f"diffusion-limit/{proc.name}/mean/t={t:g}", abs(m - target), params["sigmas"] * se,
                f"Euler mean {m:.5f} vs {target:.5f} ({params['sigmas']:g} sigma band)"))

        # acceptance of the window event against the crossing chain at finite N
        if name == "symmetric":
            res.info["besq_acceptance"] = paths.acceptance_rate
            res.info["besq_acceptance_limit"] = exact.exit_right_prob_limit(kind, params["alpha"])
            continue
        spec_small = WalkSpec(params["acceptance_N"], kind, Alpha(params["alpha"]))
        chains = run_chain_ensemble(spec_small, Side.RIGHT, n, _seed(params, 10 * case + 3), max_attempts=1,
                                    workers=workers)
        a_chain = float(chains.accepted.mean())
        a_path = paths.acceptance_rate
        n_att = int(paths.attempts.sum())
        se = math.sqrt(a_chain * (1 - a_chain) / n + a_path * (1 - a_path) / n_att)
        res.verdicts.append(Verdict.at_most(
            f"diffusion-limit/{proc.name}/acceptance", abs(a_chain - a_path), params["sigmas"] * se,
            f"path acceptance {a_path:.5f} vs chain acceptance {a_chain:.5f} at N={params['acceptance_N']}"))
    return res


# --------------------------------------------------------------- parities


def _parity_bits(spec, sites, replicas, seed, workers):
    ens = run_ensemble(spec, replicas, seed, workers, sites=sites, method="sites")
    codes = ens.parities()
    visited = np.all(codes >= 0, axis=1)
    return codes[visited].astype(np.int64), codes


@experiment(
    "parity-single",
    "frequency of an odd visit count at one visited site",
    N=2000, p=0.6, asym_alpha=0.25, sym_alpha=0.5, site=0.5, replicas=100_000, tolerance=0.005,
)
def _parity_single(params, workers):
    res = ExperimentResult()
    N = params["N"]
    y = scaled_site(params["site"], N)
    for case, name in enumerate(("symmetric", "asymmetric")):
        kind = _kind(name, params)
        alpha = params["sym_alpha"] if name == "symmetric" else params["asym_alpha"]
        spec = WalkSpec(N, kind, Alpha(alpha))
        bits, codes = _parity_bits(spec, [y], params["replicas"], _seed(params, case), workers)
        freq = float(bits[:, 0].mean())
        target = exact.parity_joint_limit(kind, 1)
        res.verdicts.append(Verdict.at_most(
            f"parity-single/{name}", abs(freq - target), params["tolerance"],
            f"open frequency {freq:.5f} vs {target:.5f} over {bits.shape[0]} visits"))
        res.samples[name] = {f"parity_{y}": codes[:, 0]}
    return res


@experiment(
    "parity-joint",
    "joint parities at several visited sites: pattern frequencies and independence",
    N=2000, p=0.6, sym_alpha=0.5, sym_sites=(0.3, 0.5, 0.7), asym_alpha=0.25, asym_sites=(0.5, 0.75),
    replicas=100_000, tolerance=0.01, level=0.01,
)
def _parity_joint(params, workers):
    res = ExperimentResult()
    N = params["N"]
    for case, name in enumerate(("symmetric", "asymmetric")):
        kind = _kind(name, params)
        alpha = params["sym_alpha"] if name == "symmetric" else params["asym_alpha"]
        fractions = params["sym_sites"] if name == "symmetric" else params["asym_sites"]
        sites = [scaled_site(f, N) for f in fractions]
        spec = WalkSpec(N, kind, Alpha(alpha))
        bits, codes = _parity_bits(spec, sites, params["replicas"], _seed(params, case), workers)
        k = len(sites)
        table = parity_table(bits)
        n = bits.shape[0]
        if name == "symmetric":
            worst = float(np.abs(table / n - 0.5**k).max())
            res.verdicts.append(Verdict.at_most(
                f"parity-joint/{name}/patterns", worst, params["tolerance"],
                f"max |pattern frequency - 2^-{k}| over {n} replicas visiting all sites"))
            chi = parity_independence_test(table)
            res.verdicts.append(Verdict.at_least(
                f"parity-joint/{name}/independence", chi.pvalue, params["level"],
                f"chi-square p-value; statistic {chi.statistic:.4g} on {chi.dof} dof"))
        else:
            freq = float(np.all(bits == 1, axis=1).mean())
            target = exact.parity_joint_limit(kind, k)
            res.verdicts.append(Verdict.at_most(
                f"parity-joint/{name}/all-open", abs(freq - target), params["tolerance"],
                f"all-open frequency {freq:.5f} vs {target:.5f}"))
        res.samples[name] = {f"parity_{y}": codes[:, j] for j, y in enumerate(sites)}
    return res


# ------------------------------------------------------- stationary law


def _draw_from_pmf(pmf: np.ndarray, n: int, rng: Stream) -> np.ndarray:
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.uniforms(n), side="right").astype(np.int64)


@experiment(
    "asym-stationary",
    "stationary law of the immigration chain: PGF at 0 and reversed-process marginals",
    p=0.7, steps=1_000_000, burn_in=1000, M=5, replicas=10_000, level=0.01, sigmas=4.0, batches=100,
)
def _stationary(params, workers):
    res = ExperimentResult()
    p = params["p"]
    q = 1.0 - p
    chain = immigration_chain(p, q, params["burn_in"] + params["steps"], Stream.for_replica(params["seed"], 0))
    run = chain[params["burn_in"] + 1:]
    zeros = (run == 0).astype(float)
    psi0 = float(stationary_pgf(p, q, 0.0))
    se = batch_means_sigma(zeros, params["batches"])
    res.verdicts.append(Verdict.at_most(
        "asym-stationary/zero-frequency", abs(zeros.mean() - psi0), params["sigmas"] * se,
        f"empirical {zeros.mean():.5f} vs Psi(0) = {psi0:.5f} (batch-means sigma {se:.2g})"))
    pmf = stationary_pmf(p, q)
    mean_pi = float(np.arange(pmf.size) @ pmf)
    se_mean = batch_means_sigma(run, params["batches"])
    res.verdicts.append(Verdict.at_most(
        "asym-stationary/mean", abs(run.mean() - mean_pi), params["sigmas"] * se_mean,
        f"long-run mean {run.mean():.5f} vs mean of pi {mean_pi:.5f}"))

    n = params["replicas"]
    back, fwd = reversed_tail_ensemble(p, q, params["M"], n, _seed(params, 1), params["burn_in"])
    reference = _draw_from_pmf(pmf, n, Stream.for_replica(params["seed"], 2))
    thr = ks_threshold(params["level"], n, n)
    for k in range(params["M"] + 1):
        ks = ks_two_sample(back[:, k], reference)
        res.verdicts.append(Verdict.at_most(
            f"asym-stationary/reversed/k={k}", ks.statistic, thr,
            f"two-sample KS of beta_{k} against draws from pi at level {params['level']:g}"))
    res.samples["reversed"] = {**{f"backward_{k}": back[:, k] for k in range(params["M"] + 1)},
                               **{f"forward_{k}": fwd[:, k] for k in range(params["M"] + 1)}}
    res.info["pi_head"] = [float(v) for v in pmf[:8]]
    return res


def known_keys(exp: Experiment) -> set[str]:
    return set(COMMON_KEYS) | set(exp.defaults)
