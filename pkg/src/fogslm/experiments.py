"""Monte-Carlo latency sweeps, single-layer baselines and the rounding check.

Each sweep point draws its IoT->fog channel gains from substreams keyed by
``(seed, point index, realization index)``, so results do not depend on how
the work is split across processes.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import MEGABIT, ParameterSet
from .model import (
    Allocation,
    EvalResult,
    Solution,
    SystemInstance,
    UnboundedLatencyError,
    evaluate,
    frequency_at,
    link_rate,
)
from .oracle import DEFAULT_ORACLE_STEP, grid_oracle
from .slm import DEFAULT_GRID_STEP, StageCoeffs, power_grid, slm_run, stage1_inner

THREE_LAYER = "three-layer"
FOG_ONLY = "fog-only"
CLOUD_ONLY = "cloud-only"
ARCHITECTURES = (THREE_LAYER, FOG_ONLY, CLOUD_ONLY)
SOLVERS = ("slm", "oracle", "both")
CHANNELS = ("rayleigh", "mean")
# share of unbounded realizations above which a sweep point is unreliable
UNRELIABLE_SHARE = 0.01

CSV_COLUMNS = ("sweep_value", "architecture", "solver", "mean_latency_s", "stderr_s",
               "n_valid", "n_unbounded", "unreliable")


@dataclass(frozen=True)
class ExperimentConfig:
    params: ParameterSet = ParameterSet()
    sweep_axis: str = "workload"  # "workload" (bits) or "snr" (SNR_IF in dB)
    sweep_values: tuple = (1e6,)
    n_realizations: int = 4000
    seed: int = 42
    solver: str = "slm"
    architectures: tuple = (THREE_LAYER,)
    channel: str = "rayleigh"
    epsilon: float = 1e-9
    grid_step: float = DEFAULT_GRID_STEP
    oracle_step: float = DEFAULT_ORACLE_STEP
    optimized_baselines: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "architectures", tuple(self.architectures))
        if self.sweep_axis not in ("workload", "snr"):
            raise ValueError(f"sweep_axis must be 'workload' or 'snr', got {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ValueError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be at least 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}")
        unknown = set(self.architectures) - set(ARCHITECTURES)
        if unknown or not self.architectures:
            raise ValueError(f"architectures must be drawn from {ARCHITECTURES}")
        if self.workers < 0:
            raise ValueError("workers must be >= 0")

    @property
    def effective_realizations(self) -> int:
        # a deterministic channel gives the same answer every time
        return 1 if self.channel == "mean" else self.n_realizations

    def instance(self, sweep_value: float, gain_if: float) -> SystemInstance:
        key = "workload_bits" if self.sweep_axis == "workload" else "snr_if_db"
        return self.params.build(**{key: sweep_value, "gain_if": gain_if})


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    architecture: str
    solver: str
    mean_latency_s: float
    stderr_s: float
    n_valid: int
    n_unbounded: int
    unreliable: bool


@dataclass
class SweepPoint:
    sweep_value: float
    rows: list
    # |t_slm - t_oracle| / t_oracle over realizations, when both solvers ran
    gap_mean: float | None = None
    gap_max: float | None = None


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list = field(default_factory=list)

    @property
    def rows(self) -> list:
        return [r for p in self.points for r in p.rows]

    def series(self, architecture: str = THREE_LAYER, solver: str | None = None):
        """``(sweep_values, mean_latencies, stderrs)`` for one curve."""
        if solver is None:
            solver = _default_solver_label(self.config, architecture)
        picked = [r for r in self.rows if r.architecture == architecture and r.solver == solver]
        if not picked:
            raise KeyError(f"no rows for {architecture}/{solver}")
        return (np.array([r.sweep_value for r in picked]),
                np.array([r.mean_latency_s for r in picked]),
                np.array([r.stderr_s for r in picked]))

    def write_csv(self, dest) -> None:
        own = isinstance(dest, (str, Path))
        fh = open(dest, "w", newline="") if own else dest
        try:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([repr(r.sweep_value), r.architecture, r.solver,
                            repr(r.mean_latency_s), repr(r.stderr_s), r.n_valid,
                            r.n_unbounded, int(r.unreliable)])
        finally:
            if own:
                fh.close()


def _default_solver_label(config: ExperimentConfig, architecture: str) -> str:
    if architecture != THREE_LAYER:
        return "optimized" if config.optimized_baselines else "fixed"
    return "oracle" if config.solver == "oracle" else "slm"


def sample_gain(rng: np.random.Generator, size=None):
    """Rayleigh-fading power gain: exponential with unit mean."""
    return rng.exponential(1.0, size)


def realization_rng(seed: int, point_index: int, realization: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(point_index, realization))
    return np.random.default_rng(ss)


def point_gains(config: ExperimentConfig, point_index: int) -> np.ndarray:
    if config.channel == "mean":
        return np.ones(1)
    return np.array([sample_gain(realization_rng(config.seed, point_index, r))
                     for r in range(config.n_realizations)])


def random_instance(rng: np.random.Generator, params: ParameterSet | None = None,
                    gain_range=(0.1, 4.0), workload_range=(1e5, 2e6),
                    snr_range_db=(2.0, 10.0)) -> SystemInstance:
    """An instance around the default set with both gains, B and SNR_IF drawn uniformly."""
    params = params or ParameterSet()
    return params.build(
        gain_if=float(rng.uniform(*gain_range)),
        gain_fc=float(rng.uniform(*gain_range)),
        workload_bits=float(rng.uniform(*workload_range)),
        snr_if_db=float(rng.uniform(*snr_range_db)),
    )


def fog_only(instance: SystemInstance, optimize_power: bool = False,
             grid_step: float = DEFAULT_GRID_STEP) -> EvalResult:
    """Everything offloaded to and processed at the fog.

    Fixed variant: the IoT transmits at full power, the fog processes at full
    power. ``optimize_power`` instead lets the IoT keep part of the work and
    grid-searches its power split (the fog still processes everything it gets).
    """
    B = instance.workload_bits
    if not optimize_power:
        return evaluate(instance, Allocation(B, 0.0, 1.0, 0.0))
    fog_per_bit = instance.fog.seconds_per_bit(instance.fog.p_total)
    m, alpha = _two_layer_split(instance, fog_per_bit, grid_step)
    return evaluate(instance, Allocation(m, 0.0, alpha, 0.0))


def cloud_only(instance: SystemInstance, optimize_power: bool = False,
               grid_step: float = DEFAULT_GRID_STEP) -> EvalResult:
    """Everything relayed by the fog at full power and processed at the cloud."""
    B = instance.workload_bits
    if not optimize_power:
        return evaluate(instance, Allocation(B, B, 1.0, 1.0))
    r_fc = link_rate(instance.fog.p_total, instance.link_fc)
    per_bit = (1.0 / r_fc if r_fc > 0 else math.inf) + \
        instance.cloud.seconds_per_bit(instance.cloud.p_total)
    m, alpha = _two_layer_split(instance, per_bit, grid_step)
    return evaluate(instance, Allocation(m, m, alpha, 1.0))


def _two_layer_split(instance: SystemInstance, remote_per_bit: float, grid_step: float):
    """Best ``(m, alpha)`` when the IoT splits work with one remote processor."""
    B = instance.workload_bits
    iot = instance.iot
    alphas = power_grid(instance.alpha_max, grid_step, iot, 0.0)
    p_iot = iot.c / np.asarray(frequency_at((1.0 - alphas) * iot.p_total, iot))
    rate = np.asarray(link_rate(alphas * iot.p_total, instance.link_if))
    with np.errstate(divide="ignore"):
        c = np.where(rate > 0, 1.0 / np.where(rate > 0, rate, 1.0), np.inf) + remote_per_bit
    coeffs = StageCoeffs(B * p_iot, p_iot, c, np.zeros_like(c))
    t, m = stage1_inner(coeffs, B)
    j = int(np.argmin(t))
    return float(m[j]), float(alphas[j])


def baseline_latency(architecture: str, instance: SystemInstance, optimize_power: bool = False,
                     grid_step: float = DEFAULT_GRID_STEP) -> EvalResult:
    fn = {FOG_ONLY: fog_only, CLOUD_ONLY: cloud_only}[architecture]
    return fn(instance, optimize_power, grid_step)


@dataclass(frozen=True)
class RoundingLoss:
    relative_increase: float
    raw_relative_increase: float
    m: int
    k: int
    clipped: bool


def rounding_loss(instance: SystemInstance, solution: Solution) -> RoundingLoss:
    """Latency cost of rounding ``(m, k)`` to integers at the solution's power split.

    Tries every floor/ceil combination that keeps ``0 <= k <= m <= B`` and keeps
    the best. A rounded point that beats the relaxed one (possible when the
    relaxed point came from a grid search) is clipped to zero and flagged.
    """
    alloc = solution.allocation
    relaxed = evaluate(instance, alloc)
    if not relaxed.bounded:
        raise UnboundedLatencyError("relaxed allocation has unbounded latency")
    B = instance.workload_bits
    best = None
    for m in {math.floor(alloc.m), math.ceil(alloc.m)}:
        for k in {math.floor(alloc.k), math.ceil(alloc.k)}:
            if not 0 <= k <= m <= B:
                continue
            res = evaluate(instance, Allocation(m, k, alloc.alpha, alloc.gamma))
            if res.bounded and (best is None or res.T < best[0]):
                best = (res.T, m, k)
    if best is None:
        raise UnboundedLatencyError("no integral rounding of the solution is feasible")
    T_rel = relaxed.T
    raw = 0.0 if T_rel == 0 else (best[0] - T_rel) / T_rel
    return RoundingLoss(max(raw, 0.0), raw, int(best[1]), int(best[2]), raw < 0)


def _summarize(value, architecture, solver, samples, n_unbounded) -> SweepRow:
    x = np.asarray(samples, dtype=float)
    n = x.size
    mean = float(x.mean()) if n else math.nan
    stderr = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    total = n + n_unbounded
    unreliable = total > 0 and n_unbounded / total > UNRELIABLE_SHARE
    return SweepRow(value, architecture, solver, mean, stderr, n, n_unbounded, unreliable)


def _solve_three_layer(config: ExperimentConfig, instance: SystemInstance, solver: str) -> float:
    if solver == "slm":
        return slm_run(instance, config.epsilon, config.grid_step)[0].t
    return grid_oracle(instance, config.oracle_step).t


def average_latency(config: ExperimentConfig, point_index: int) -> SweepPoint:
    """Mean optimal latency over channel realizations at one sweep point."""
    value = config.sweep_values[point_index]
    gains = point_gains(config, point_index)
    solvers = ("slm", "oracle") if config.solver == "both" else (config.solver,)
    samples: dict = {}
    unbounded: dict = {}
    gaps = []
    for g in gains:
        inst = config.instance(value, float(g))
        for arch in config.architectures:
            if arch == THREE_LAYER:
                found = {}
                for solver in solvers:
                    key = (arch, solver)
                    try:
                        found[solver] = _solve_three_layer(config, inst, solver)
                        samples.setdefault(key, []).append(found[solver])
                    except UnboundedLatencyError:
                        unbounded[key] = unbounded.get(key, 0) + 1
                if len(found) == 2 and found["oracle"] > 0:
                    gaps.append(abs(found["slm"] - found["oracle"]) / found["oracle"])
            else:
                key = (arch, _default_solver_label(config, arch))
                res = baseline_latency(arch, inst, config.optimized_baselines, config.grid_step)
                if res.bounded:
                    samples.setdefault(key, []).append(res.T)
                else:
                    unbounded[key] = unbounded.get(key, 0) + 1
    rows = []
    for arch in config.architectures:
        labels = solvers if arch == THREE_LAYER else (_default_solver_label(config, arch),)
        for solver in labels:
            key = (arch, solver)
            rows.append(_summarize(value, arch, solver, samples.get(key, []),
                                   unbounded.get(key, 0)))
    point = SweepPoint(value, rows)
    if gaps:
        point.gap_mean = float(np.mean(gaps))
        point.gap_max = float(np.max(gaps))
    return point


def _point_task(args):
    config, index = args
    return average_latency(config, index)


def run_sweep(config: ExperimentConfig) -> SweepResult:
    indices = range(len(config.sweep_values))
    workers = config.workers or os.cpu_count() or 1
    if workers == 1 or len(config.sweep_values) == 1:
        points = [average_latency(config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_point_task, [(config, i) for i in indices]))
    return SweepResult(config, points)


def threshold_crossing(x, y, level: float):
    """First ``x`` where ``y`` reaches ``level``, linearly interpolated; ``None`` if never."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float) - level
    for i in range(len(x) - 1):
        if y[i] == 0:
            return float(x[i])
        if y[i] * y[i + 1] < 0:
            return float(x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i]))
    if len(y) and y[-1] == 0:
        return float(x[-1])
    return None


def linear_fit(x, y):
    """Least-squares ``(slope, intercept, r_squared)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


FIG3_SNRS_DB = (2.0, 5.0, 10.0)
FIG3_WORKLOADS = tuple(x * MEGABIT for x in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5))
FIG4_SNRS_DB = tuple(float(s) for s in range(0, 21))


def figure_configs(figure: str, base: ExperimentConfig | None = None, **changes) -> dict:
    """Named sweep configurations for the two latency figures.

    ``fig3``: latency vs workload at SNR_IF = 2, 5, 10 dB under Rayleigh fading.
    ``fig4``: latency vs SNR_IF at 1 Mb for all three architectures under
    Rayleigh fading; pass ``channel="mean"`` for the unit-gain channel.
    """
    base = base or ExperimentConfig()
    if figure == "fig3":
        out = {}
        for snr in FIG3_SNRS_DB:
            cfg = dataclasses.replace(
                base, params=base.params.replace(snr_if_db=snr), sweep_axis="workload",
                sweep_values=FIG3_WORKLOADS, architectures=(THREE_LAYER,), channel="rayleigh",
            )
            out[f"fig3_snr{snr:g}"] = dataclasses.replace(cfg, **changes)
        return out
    if figure == "fig4":
        cfg = dataclasses.replace(
            base, params=base.params.replace(workload_bits=MEGABIT), sweep_axis="snr",
            sweep_values=FIG4_SNRS_DB, architectures=ARCHITECTURES, channel="rayleigh",
        )
        return {"fig4": dataclasses.replace(cfg, **changes)}
    raise ValueError(f"unknown figure {figure!r}")
