"""Physical model of the IoT -> fog -> cloud processing chain.

Every quantity here is a closed-form function of the layer/link parameters.
Processing follows the power-frequency law ``P = a * f**beta + b`` and links
follow the Shannon rate ``W * log2(1 + g * P / (N0 * W))``.

Bit counts may be numpy arrays wherever noted; powers and parameters are
scalars.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

# Strict inequalities P_p > b are enforced as P_p >= b + POWER_MARGIN.
POWER_MARGIN = 1e-12


class ModelDomainError(ValueError):
    """A processing power at or below the idle offset was asked to do work."""


class UnboundedLatencyError(RuntimeError):
    """No allocation with finite latency exists."""


@dataclass(frozen=True)
class LayerParams:
    a: float
    b: float
    c: float
    beta: float
    p_total: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.b >= 0:
            raise ValueError(f"b must be non-negative, got {self.b}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.beta >= 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if not self.p_total > self.b:
            raise ValueError(
                f"p_total ({self.p_total}) must exceed idle power b ({self.b})"
            )

    def seconds_per_bit(self, power: float) -> float:
        """Processing time per bit at the given processing power."""
        return self.c / frequency_at(power, self)


@dataclass(frozen=True)
class LinkParams:
    bandwidth: float
    noise_density: float
    gain: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.noise_density > 0:
            raise ValueError(f"noise_density must be positive, got {self.noise_density}")
        if not self.gain >= 0:
            raise ValueError(f"gain must be non-negative, got {self.gain}")

    @property
    def noise_power(self) -> float:
        return self.noise_density * self.bandwidth

    @property
    def normalized_gain(self) -> float:
        """g / (N0 W): SNR per Watt of transmit power."""
        return self.gain / self.noise_power


@dataclass(frozen=True)
class SystemInstance:
    workload_bits: float
    iot: LayerParams
    fog: LayerParams
    cloud: LayerParams
    link_if: LinkParams
    link_fc: LinkParams

    def __post_init__(self):
        if not self.workload_bits >= 0:
            raise ValueError(f"workload_bits must be non-negative, got {self.workload_bits}")

    @property
    def alpha_max(self) -> float:
        return 1.0 - self.iot.b / self.iot.p_total

    @property
    def gamma_max(self) -> float:
        return 1.0 - self.fog.b / self.fog.p_total

    def with_workload(self, bits: float) -> "SystemInstance":
        return SystemInstance(bits, self.iot, self.fog, self.cloud, self.link_if, self.link_fc)


@dataclass(frozen=True)
class Allocation:
    """Bits offloaded (m to fog, k onwards to cloud) and communication power fractions."""

    m: float
    k: float
    alpha: float
    gamma: float

    def __post_init__(self):
        if not 0 <= self.k <= self.m:
            raise ValueError(f"need 0 <= k <= m, got k={self.k}, m={self.m}")
        for name in ("alpha", "gamma"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def check_against(self, instance: SystemInstance) -> None:
        if self.m > instance.workload_bits:
            raise ValueError(
                f"m={self.m} exceeds workload {instance.workload_bits}"
            )

    def powers(self, instance: SystemInstance) -> dict:
        """Per-component powers with every budget spent in full."""
        p_i, p_f = instance.iot.p_total, instance.fog.p_total
        return {
            "comm_iot": self.alpha * p_i,
            "proc_iot": (1.0 - self.alpha) * p_i,
            "comm_fog": self.gamma * p_f,
            "proc_fog": (1.0 - self.gamma) * p_f,
            "proc_cloud": instance.cloud.p_total,
        }


@dataclass(frozen=True)
class LatencyBreakdown:
    t_proc_iot: float
    t_proc_fog: float
    t_proc_cloud: float
    t_comm_if: float
    t_comm_fc: float

    bounded = True

    @property
    def T_I(self) -> float:
        return self.t_proc_iot

    @property
    def T_F(self) -> float:
        return self.t_comm_if + self.t_proc_fog

    @property
    def T_C(self) -> float:
        return self.t_comm_if + self.t_comm_fc + self.t_proc_cloud

    @property
    def T(self) -> float:
        return max(self.T_I, self.T_F, self.T_C)


@dataclass(frozen=True)
class Unbounded:
    """Evaluation result when bits must cross a link whose rate is zero."""

    reason: str
    bounded = False


EvalResult = Union[LatencyBreakdown, Unbounded]


def latency_key(result: EvalResult) -> tuple:
    """Sort key placing every bounded result before any unbounded one."""
    return (0, result.T) if result.bounded else (1, 0.0)


@dataclass(frozen=True)
class Solution:
    t: float
    m: float
    k: float
    alpha: float
    gamma: float

    @property
    def allocation(self) -> Allocation:
        # clamp float drift from cumulative sums
        k = min(self.k, self.m)
        return Allocation(self.m, k, min(self.alpha, 1.0), min(self.gamma, 1.0))


def calibrate_a(max_power: float, max_frequency: float, b: float, beta: float) -> float:
    """Coefficient ``a`` such that ``max_power`` drives the processor at ``max_frequency``."""
    if not max_power > b:
        raise ValueError(f"max_power ({max_power}) must exceed b ({b})")
    if not max_frequency > 0:
        raise ValueError("max_frequency must be positive")
    if not beta >= 1:
        raise ValueError("beta must be >= 1")
    return (max_power - b) / max_frequency ** beta


def frequency_at(power, layer: LayerParams):
    """Clock frequency sustained at ``power``; accepts a scalar or an array of powers."""
    headroom = np.asarray(power, dtype=float) - layer.b
    if not np.all(headroom >= POWER_MARGIN):
        raise ModelDomainError(
            f"processing power {power} W does not exceed idle power {layer.b} W"
        )
    f = (headroom / layer.a) ** (1.0 / layer.beta)
    return float(f) if f.ndim == 0 else f


def proc_time(bits, power: float, layer: LayerParams):
    """Seconds to process ``bits`` at ``power``; zero bits need no power at all."""
    if np.ndim(bits) == 0:
        if bits == 0:
            return 0.0
        return layer.c * bits / frequency_at(power, layer)
    bits = np.asarray(bits, dtype=float)
    if not np.any(bits):
        return np.zeros_like(bits)
    return layer.c * bits / frequency_at(power, layer)


def link_rate(comm_power, link: LinkParams):
    power = np.asarray(comm_power, dtype=float)
    if np.any(power < 0):
        raise ValueError("comm_power must be non-negative")
    r = link.bandwidth * np.log2(1.0 + link.gain * power / link.noise_power)
    return float(r) if r.ndim == 0 else r


def comm_time(bits, rate: float):
    """``bits / rate`` with 0/0 -> 0 and x/0 -> inf (callers map inf to Unbounded)."""
    if rate > 0:
        return np.asarray(bits, dtype=float) / rate if np.ndim(bits) else bits / rate
    if np.ndim(bits) == 0:
        return 0.0 if bits == 0 else math.inf
    return np.where(np.asarray(bits) == 0, 0.0, np.inf)


def snr_to_power(snr_db: float, link: LinkParams) -> float:
    """Transmit power giving ``snr_db`` at unit gain: 10**(snr/10) * N0 * W."""
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return 10.0 ** (snr_db / 10.0) * link.noise_power


def evaluate_powers(instance: SystemInstance, m: float, k: float, powers: dict) -> EvalResult:
    """Latencies for the split ``(m, k)`` under explicit per-component powers.

    ``powers`` uses the keys of ``Allocation.powers``; budgets are not checked,
    so any single component can be perturbed on its own.
    """
    B = instance.workload_bits
    if not 0 <= k <= m <= B:
        raise ValueError(f"need 0 <= k <= m <= B, got m={m}, k={k}, B={B}")
    r_if = link_rate(powers["comm_iot"], instance.link_if)
    r_fc = link_rate(powers["comm_fog"], instance.link_fc)
    if m > 0 and r_if <= 0:
        return Unbounded(f"{m} bits over a zero-rate IoT->fog link")
    if k > 0 and r_fc <= 0:
        return Unbounded(f"{k} bits over a zero-rate fog->cloud link")
    return LatencyBreakdown(
        t_proc_iot=proc_time(B - m, powers["proc_iot"], instance.iot),
        t_proc_fog=proc_time(m - k, powers["proc_fog"], instance.fog),
        t_proc_cloud=proc_time(k, powers["proc_cloud"], instance.cloud),
        t_comm_if=comm_time(m, r_if),
        t_comm_fc=comm_time(k, r_fc),
    )


def evaluate(instance: SystemInstance, alloc: Allocation) -> EvalResult:
    """Latencies with every power budget spent in full at the allocation's split."""
    alloc.check_against(instance)
    return evaluate_powers(instance, alloc.m, alloc.k, alloc.powers(instance))
