"""Monte Carlo experiment driver: MSE sweeps, BER sweeps, slot simulation, rate tables.

Every experiment is described by an :class:`ExperimentSpec` and driven from a
single master seed. Per-trial seeds are derived deterministically from
``(master_seed, experiment tag, indices)`` via ``numpy.random.SeedSequence``,
so results are bit-reproducible and trials could be farmed out in any order
without changing the outcome (sums are reduced in trial order).

Outputs are :class:`ResultSet` objects: one curve per algorithm, each point
carrying mean, standard error and trial count, plus the full provenance
(spec echo, seed, tool version) needed to regenerate them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__, chain_sim, detectors, interconnect, signal_model
from .chain_sim import CostModel, PowerSavePolicy, TopologyConfig
from .detectors import AsgdParams, SgdParams
from .interconnect import TABLE_SCENARIOS, FrameConfig, RateReport, RateScenario
from .signal_model import CoherenceBlock, Constellation

__all__ = [
    "AlgorithmSpec",
    "Curve",
    "CurvePoint",
    "ExperimentSpec",
    "ResultSet",
    "run_ber_sweep",
    "run_experiment",
    "run_mse_sweep",
    "run_rate_table",
    "run_simulation",
]

EXPERIMENT_KINDS = ("mse_sweep", "ber_sweep", "rate_table", "simulate")
CSV_SCHEMA_VERSION = 1

CHAIN_ALGORITHMS = detectors.ALGORITHMS
ALL_ALGORITHMS = CHAIN_ALGORITHMS + ("zf",)


@dataclass(frozen=True)
class AlgorithmSpec:
    """One detector configuration to run: name plus its tuning knobs."""

    name: str
    mu: Optional[float] = None
    n0: Optional[int] = None

    def __post_init__(self):
        if self.name not in ALL_ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}; expected one of {ALL_ALGORITHMS}")
        if self.name in ("sgd", "asgd") and self.mu is None:
            raise ValueError(f"{self.name} needs a step size mu")
        if self.name == "asgd" and self.n0 is None:
            raise ValueError("asgd needs an averaging onset n0")
        if self.name in ("rls", "zf") and (self.mu is not None or self.n0 is not None):
            raise ValueError(f"{self.name} takes no mu/n0 parameters")

    @property
    def label(self) -> str:
        if self.name == "sgd":
            return f"sgd(mu={self.mu:g})"
        if self.name == "asgd":
            return f"asgd(mu={self.mu:g},n0={self.n0})"
        return self.name

    def detector_params(self):
        if self.name == "sgd":
            return SgdParams(mu=self.mu)
        if self.name == "asgd":
            return AsgdParams(mu=self.mu, n0=self.n0)
        return None

    def to_dict(self) -> dict:
        out = {"name": self.name}
        if self.mu is not None:
            out["mu"] = self.mu
        if self.n0 is not None:
            out["n0"] = self.n0
        return out


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete, reproducible description of one experiment run."""

    kind: str
    topology: Optional[TopologyConfig] = None
    algorithms: tuple = ()
    frame: FrameConfig = field(default_factory=FrameConfig)
    snr_db: float = 12.0
    snr_db_grid: tuple = ()
    constellation_order: int = 4
    trials: int = 1000
    master_seed: int = 0
    s0_mode: str = "zero"
    re_count: int = 32
    target_errors: int = 500
    max_trials_per_point: int = 10000
    power_save: Optional[PowerSavePolicy] = None
    re_ticks: int = 1
    prep_ticks: int = 0
    scenarios: tuple = TABLE_SCENARIOS

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {EXPERIMENT_KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.s0_mode not in ("zero", "random"):
            raise ValueError(f"unknown s0_mode {self.s0_mode!r}")
        if self.kind != "rate_table":
            if self.topology is None:
                raise ValueError(f"{self.kind} needs a topology")
            if not self.algorithms:
                raise ValueError(f"{self.kind} needs at least one algorithm")
        if self.kind == "ber_sweep" and not self.snr_db_grid:
            raise ValueError("ber_sweep needs a non-empty snr_db_grid")
        if self.kind == "simulate":
            if self.re_count < 1:
                raise ValueError("re_count must be >= 1")
            for alg in self.algorithms:
                if alg.name == "zf":
                    raise ValueError("zf is not a chain algorithm; simulate takes rls/sgd/asgd")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ValueError("algorithm labels must be unique")

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "snr_db": self.snr_db,
            "snr_db_grid": list(self.snr_db_grid),
            "constellation_order": self.constellation_order,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "s0_mode": self.s0_mode,
            "re_count": self.re_count,
            "target_errors": self.target_errors,
            "max_trials_per_point": self.max_trials_per_point,
            "re_ticks": self.re_ticks,
            "prep_ticks": self.prep_ticks,
            "algorithms": [a.to_dict() for a in self.algorithms],
            "frame": {
                "t_slot": self.frame.t_slot,
                "n_slot": self.frame.n_slot,
                "n_ul": self.frame.n_ul,
                "n_u": self.frame.n_u,
                "s_cb": self.frame.s_cb,
                "w_s": self.frame.w_s,
                "w_gamma": self.frame.w_gamma,
                "w_sc": self.frame.w_sc,
            },
            "scenarios": [
                {"m": s.m, "k": s.k, "c": s.c, "b": s.b, "n_iter": s.n_iter}
                for s in self.scenarios
            ],
        }
        if self.topology is not None:
            t = self.topology
            out["topology"] = {"m": t.m_antennas, "k": t.k_users, "c": t.c_clusters, "b": t.b_per_cluster}
        if self.power_save is not None:
            out["power_save"] = {"policy": self.power_save.mode, "threshold": self.power_save.threshold}
        return out


@dataclass(frozen=True)
class CurvePoint:
    x: float
    mean: float
    stderr: float
    n_trials: int


@dataclass(frozen=True)
class Curve:
    label: str
    points: tuple

    @property
    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9.]+", "_", self.label).strip("_")

    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.points])


@dataclass(frozen=True)
class ResultSet:
    """Experiment output: curves plus provenance (spec echo, seed, version)."""

    curves: tuple
    spec: ExperimentSpec
    tool_version: str = __version__

    def curve(self, label: str) -> Curve:
        for c in self.curves:
            if c.label == label:
                return c
        raise KeyError(f"no curve labeled {label!r}")

    def write_csv(self, out_dir) -> list:
        """One CSV per curve: x, mean, stderr, n_trials, schema_version."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for curve in self.curves:
            path = os.path.join(out_dir, f"{curve.slug}.csv")
            with open(path, "w", newline="") as fh:
                fh.write("x,mean,stderr,n_trials,schema_version\n")
                for p in curve.points:
                    fh.write(f"{p.x!r},{p.mean!r},{p.stderr!r},{p.n_trials},{CSV_SCHEMA_VERSION}\n")
            paths.append(path)
        return paths

    def manifest(self, wall_time_s: float) -> dict:
        return {
            "schema_version": CSV_SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "master_seed": self.spec.master_seed,
            "wall_time_s": wall_time_s,
            "spec": self.spec.to_dict(),
            "curves": [c.label for c in self.curves],
        }

    def write_manifest(self, path, wall_time_s: float) -> None:
        with open(path, "w") as fh:
            json.dump(self.manifest(wall_time_s), fh, indent=2, sort_keys=True)
            fh.write("\n")


def derive_seeds(master_seed: int, path: tuple, count: int) -> list:
    """Deterministic per-trial integer seeds from the master seed and an index path."""
    ss = np.random.SeedSequence([int(master_seed)] + [int(p) for p in path])
    return [int(x) for x in ss.generate_state(count, dtype=np.uint64)]


def _random_bits(n: int, seed: int) -> str:
    rng = np.random.default_rng(seed)
    return "".join("01"[b] for b in rng.integers(0, 2, n))


def _initial_estimate(spec: ExperimentSpec, k: int, seed: int):
    if spec.s0_mode == "zero":
        return None
    rng = np.random.default_rng(seed)
    return np.sqrt(0.5) * (rng.standard_normal(k) + 1j * rng.standard_normal(k))


def _mean_stderr(total: np.ndarray, total_sq: np.ndarray, n: int):
    mean = total / n
    if n < 2:
        return mean, np.zeros_like(mean)
    var = np.maximum(total_sq / n - mean**2, 0.0) * n / (n - 1)
    return mean, np.sqrt(var / n)


# Experiment tags keep the seed streams of the different kinds disjoint.
_TAG_MSE, _TAG_BER, _TAG_SIM = 1, 2, 3


def run_mse_sweep(spec: ExperimentSpec) -> ResultSet:
    """Average per-antenna-index MSE curves, one per configured algorithm.

    Each trial draws a fresh channel, symbol vector and noise, runs every
    algorithm's trajectory on the same data, and accumulates the per-index
    squared error ``||s_hat[n] - s||^2 / K``. The zero-forcing baseline has no
    antenna trajectory, so it contributes a single point at the final index.
    """
    if spec.kind != "mse_sweep":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'mse_sweep'")
    topo = spec.topology
    m, k = topo.m_antennas, topo.k_users
    const = Constellation.qam(spec.constellation_order)
    bits_per_vector = k * const.bits_per_symbol

    chain_algs = [a for a in spec.algorithms if a.name != "zf"]
    zf_algs = [a for a in spec.algorithms if a.name == "zf"]
    totals = {a.label: np.zeros(m) for a in chain_algs}
    totals_sq = {a.label: np.zeros(m) for a in chain_algs}
    zf_total = zf_total_sq = 0.0

    for t in range(spec.trials):
        ch_seed, bits_seed, noise_seed, s0_seed = derive_seeds(
            spec.master_seed, (_TAG_MSE, t), 4
        )
        h = signal_model.generate_rayleigh_channel(m, k, ch_seed)
        s = signal_model.modulate(_random_bits(bits_per_vector, bits_seed), const, k)
        y = signal_model.transmit(h, s, spec.snr_db, noise_seed)
        s0 = _initial_estimate(spec, k, s0_seed)
        for alg in chain_algs:
            traj = detectors.run_chain(alg.name, h, y, alg.detector_params(), s0=s0)
            stacked = np.stack([e.values for e in traj])
            sq = np.abs(stacked - s.symbols[None, :]) ** 2
            per_index = sq.sum(axis=1) / k
            totals[alg.label] += per_index
            totals_sq[alg.label] += per_index**2
        if zf_algs:
            est = detectors.zf_detect(h, y)
            mse = float(np.sum(np.abs(est.values - s.symbols) ** 2) / k)
            zf_total += mse
            zf_total_sq += mse**2

    curves = []
    for alg in chain_algs:
        mean, stderr = _mean_stderr(totals[alg.label], totals_sq[alg.label], spec.trials)
        points = tuple(
            CurvePoint(x=n + 1, mean=float(mean[n]), stderr=float(stderr[n]), n_trials=spec.trials)
            for n in range(m)
        )
        curves.append(Curve(label=alg.label, points=points))
    for alg in zf_algs:
        mean, stderr = _mean_stderr(np.array([zf_total]), np.array([zf_total_sq]), spec.trials)
        curves.append(
            Curve(
                label=alg.label,
                points=(CurvePoint(x=m, mean=float(mean[0]), stderr=float(stderr[0]), n_trials=spec.trials),),
            )
        )
    return ResultSet(curves=tuple(curves), spec=spec)


def _bit_errors(sent: str, received: str) -> int:
    return sum(a != b for a, b in zip(sent, received))


def run_ber_sweep(spec: ExperimentSpec) -> ResultSet:
    """Hard-decision BER vs SNR per algorithm, with common randomness across them.

    Each SNR point accumulates trials until every algorithm has seen at least
    ``target_errors`` bit errors or ``max_trials_per_point`` trials ran. All
    algorithms share each trial's channel, bits and noise, so comparisons
    between them are paired.
    """
    if spec.kind != "ber_sweep":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'ber_sweep'")
    topo = spec.topology
    m, k = topo.m_antennas, topo.k_users
    const = Constellation.qam(spec.constellation_order)
    bits_per_vector = k * const.bits_per_symbol

    per_point = {a.label: [] for a in spec.algorithms}
    for j, snr_db in enumerate(spec.snr_db_grid):
        errors = {a.label: 0 for a in spec.algorithms}
        frac_sum = {a.label: 0.0 for a in spec.algorithms}
        frac_sum_sq = {a.label: 0.0 for a in spec.algorithms}
        bits_total = 0
        trials_done = 0
        while trials_done < spec.max_trials_per_point and any(
            errors[a.label] < spec.target_errors for a in spec.algorithms
        ):
            t = trials_done
            ch_seed, bits_seed, noise_seed, s0_seed = derive_seeds(
                spec.master_seed, (_TAG_BER, j, t), 4
            )
            h = signal_model.generate_rayleigh_channel(m, k, ch_seed)
            bits = _random_bits(bits_per_vector, bits_seed)
            s = signal_model.modulate(bits, const, k)
            y = signal_model.transmit(h, s, snr_db, noise_seed)
            s0 = _initial_estimate(spec, k, s0_seed)
            precomp = None
            for alg in spec.algorithms:
                if alg.name == "zf":
                    est = detectors.zf_detect(h, y)
                else:
                    if alg.name == "rls" and precomp is None:
                        precomp = detectors.rls_preprocess(h.entries)
                    params = precomp if alg.name == "rls" else alg.detector_params()
                    est = detectors.run_chain(alg.name, h, y, params, s0=s0)[-1]
                decided = signal_model.demodulate_hard(est, const)
                n_err = _bit_errors(bits, decided)
                errors[alg.label] += n_err
                frac = n_err / bits_per_vector
                frac_sum[alg.label] += frac
                frac_sum_sq[alg.label] += frac**2
            bits_total += bits_per_vector
            trials_done += 1
        for alg in spec.algorithms:
            ber = errors[alg.label] / bits_total
            # Bits within one trial share a fade, so the standard error comes
            # from the scatter of per-trial error fractions, not a binomial count.
            mean, stderr = _mean_stderr(
                np.array([frac_sum[alg.label]]), np.array([frac_sum_sq[alg.label]]), trials_done
            )
            per_point[alg.label].append(
                CurvePoint(x=float(snr_db), mean=ber, stderr=float(stderr[0]), n_trials=trials_done)
            )
    curves = tuple(Curve(label=label, points=tuple(pts)) for label, pts in per_point.items())
    return ResultSet(curves=curves, spec=spec)


def run_simulation(spec: ExperimentSpec):
    """Drive the daisy-chain simulator over one coherence block of REs.

    All ``re_count`` resource elements share one channel draw (that is what
    makes them a coherence block and lets RLS preprocess once), with fresh
    symbols and noise per RE. Returns ``(ResultSet, timelines)`` where
    ``timelines`` maps algorithm labels to their
    :class:`chain_sim.TimelineReport`. Curves report the per-RE squared
    estimation error of the delivered estimates.
    """
    if spec.kind != "simulate":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'simulate'")
    topo = spec.topology
    m, k = topo.m_antennas, topo.k_users
    const = Constellation.qam(spec.constellation_order)
    bits_per_vector = k * const.bits_per_symbol

    ch_seed, s0_seed = derive_seeds(spec.master_seed, (_TAG_SIM,), 2)
    block = CoherenceBlock(
        channel=signal_model.generate_rayleigh_channel(m, k, ch_seed),
        re_count=spec.re_count,
    )
    chain = chain_sim.build_chain(topo, block.channel)
    s0 = _initial_estimate(spec, k, s0_seed)

    symbol_vectors = []
    re_batch = []
    for r in range(block.re_count):
        bits_seed, noise_seed = derive_seeds(spec.master_seed, (_TAG_SIM, r), 2)
        s = signal_model.modulate(_random_bits(bits_per_vector, bits_seed), const, k)
        symbol_vectors.append(s)
        re_batch.append(signal_model.transmit(h=block.channel, s=s, snr_db=spec.snr_db, rng_seed=noise_seed))

    cost = CostModel(re_ticks=spec.re_ticks, prep_ticks=spec.prep_ticks)
    curves = []
    timelines = {}
    for alg in spec.algorithms:
        outputs, timeline = chain_sim.simulate_slot(
            chain,
            alg.name,
            re_batch,
            params=alg.detector_params(),
            s0=s0,
            power_save=spec.power_save,
            cost=cost,
        )
        points = []
        for r, est in enumerate(outputs):
            err = float(np.sum(np.abs(est.values - symbol_vectors[r].symbols) ** 2) / k)
            points.append(CurvePoint(x=r, mean=err, stderr=0.0, n_trials=1))
        curves.append(Curve(label=alg.label, points=tuple(points)))
        timelines[alg.label] = timeline
    return ResultSet(curves=tuple(curves), spec=spec), timelines


def run_rate_table(spec: ExperimentSpec) -> RateReport:
    """Evaluate the interconnect comparison table for the spec's scenarios."""
    if spec.kind != "rate_table":
        raise ValueError(f"spec kind is {spec.kind!r}, expected 'rate_table'")
    return interconnect.comparison_table(spec.scenarios, spec.frame)


def run_experiment(spec: ExperimentSpec):
    """Dispatch on the experiment kind."""
    if spec.kind == "mse_sweep":
        return run_mse_sweep(spec)
    if spec.kind == "ber_sweep":
        return run_ber_sweep(spec)
    if spec.kind == "simulate":
        return run_simulation(spec)
    return run_rate_table(spec)
