"""Ground-truth solver for the relaxed problem.

At fixed power fractions ``(alpha, gamma)`` every layer latency is affine in
the bit split ``(m, k)``, so the min-max over ``(m, k)`` is an epigraph
feasibility question with a closed-form answer. Bisection on the epigraph
level ``t`` gives the inner optimum; a grid over ``(alpha, gamma)`` gives the
outer one. ``brute_minmax`` enumerates an ``(m, k)`` grid as an independent
cross-check.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    POWER_MARGIN,
    Solution,
    SystemInstance,
    UnboundedLatencyError,
    comm_time,
    frequency_at,
    link_rate,
    proc_time,
)

DEFAULT_ORACLE_STEP = 1e-2


@dataclass(frozen=True)
class EpigraphProbe:
    t_candidate: float
    feasible: bool
    witness_m: float | None = None
    witness_k: float | None = None


@dataclass(frozen=True)
class _PerBit:
    """Seconds per bit for each term; ``inf`` marks a dead link."""

    iot: np.ndarray
    link_if: np.ndarray
    fog: np.ndarray
    cloud_path: np.ndarray  # fog->cloud transfer plus cloud processing

    @property
    def fog_or_cloud(self) -> np.ndarray:
        # per-bit cost once the fog splits optimally between itself and the cloud
        with np.errstate(divide="ignore"):
            return 1.0 / (1.0 / self.fog + 1.0 / self.cloud_path)


def _inverse(rate):
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, 1.0 / np.where(rate > 0, rate, 1.0), np.inf)


def _check_fraction(name: str, value, upper: float) -> None:
    v = np.asarray(value)
    if np.any(v < 0) or np.any(v >= upper):
        raise ValueError(f"{name} must lie in [0, {upper})")


def _per_bit(instance: SystemInstance, alpha, gamma) -> _PerBit:
    _check_fraction("alpha", alpha, instance.alpha_max)
    _check_fraction("gamma", gamma, instance.gamma_max)
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    iot, fog, cloud = instance.iot, instance.fog, instance.cloud
    p_iot = np.maximum((1.0 - alpha) * iot.p_total, iot.b + POWER_MARGIN)
    p_fog = np.maximum((1.0 - gamma) * fog.p_total, fog.b + POWER_MARGIN)
    return _PerBit(
        iot=iot.c / np.asarray(frequency_at(p_iot, iot)),
        link_if=_inverse(link_rate(alpha * iot.p_total, instance.link_if)),
        fog=fog.c / np.asarray(frequency_at(p_fog, fog)),
        cloud_path=_inverse(link_rate(gamma * fog.p_total, instance.link_fc))
        + cloud.c / frequency_at(cloud.p_total, cloud),
    )


def _probe(pb: _PerBit, B: float, t):
    """Vectorized feasibility of level ``t``.

    ``T_I <= t`` is a lower bound on ``m``; the fog and cloud constraints
    bound ``k`` from below and above by affine functions of ``m``. Those
    bounds are compatible exactly when ``m <= t / (r + h)`` with ``r`` the
    IoT->fog cost and ``h`` the combined fog/cloud per-bit cost.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        m_lo = np.maximum(0.0, B - t / pb.iot)
        m_hi = np.minimum(B, t / (pb.link_if + pb.fog_or_cloud))
    feasible = (t >= 0) & (m_lo <= m_hi)
    m = np.where(feasible, m_lo, 0.0)
    with np.errstate(invalid="ignore"):
        k_lo = ((pb.link_if + pb.fog) * m - t) / pb.fog
    k = np.where(m > 0, np.clip(k_lo, 0.0, m), 0.0)
    return feasible, m, k


def feasibility(instance: SystemInstance, alpha: float, gamma: float, t_candidate: float) -> EpigraphProbe:
    """Is there a split ``0 <= k <= m <= B`` with every layer latency ``<= t_candidate``?"""
    pb = _per_bit(instance, alpha, gamma)
    ok, m, k = _probe(pb, instance.workload_bits, t_candidate)
    if bool(ok):
        return EpigraphProbe(float(t_candidate), True, float(m), float(k))
    return EpigraphProbe(float(t_candidate), False)


def _default_tol(upper):
    return np.maximum(1e-9, 1e-9 * upper)


def _bisect(pb: _PerBit, B: float, tol=None):
    # all-at-IoT latency is finite for every alpha < alpha_max
    hi = np.asarray(pb.iot * B, dtype=float)
    if not np.all(np.isfinite(hi)):
        raise UnboundedLatencyError("no finite upper bracket")
    lo = np.zeros_like(hi)
    tol = _default_tol(hi) if tol is None else np.broadcast_to(np.asarray(tol, float), hi.shape)
    if np.any(tol <= 0):
        raise ValueError("tol must be positive")
    width = np.max(hi / tol) if hi.size else 0.0
    steps = int(math.ceil(math.log2(width))) if width > 1 else 0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        ok, _, _ = _probe(pb, B, mid)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    _, m, k = _probe(pb, B, hi)
    return hi, m, k


def inner_minmax(instance: SystemInstance, alpha: float, gamma: float, tol: float | None = None):
    """Optimal ``(t, m, k)`` at fixed power fractions, ``t`` within ``tol`` above the optimum.

    ``tol`` defaults to 1e-9 s or 1e-9 of the all-at-IoT latency, whichever is
    larger.
    """
    pb = _per_bit(instance, alpha, gamma)
    t, m, k = _bisect(pb, instance.workload_bits, tol)
    return float(t), float(m), float(k)


def brute_minmax(instance: SystemInstance, alpha: float, gamma: float, n_steps: int = 400):
    """Exhaustive search over ``{0, B/n, ..., B}^2`` with ``k <= m``.

    Ties go to the lexicographically smallest ``(m, k)``.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    _check_fraction("alpha", alpha, instance.alpha_max)
    _check_fraction("gamma", gamma, instance.gamma_max)
    B = instance.workload_bits
    if B == 0:
        return 0.0, 0.0, 0.0
    levels = np.arange(n_steps + 1) * (B / n_steps)
    levels[-1] = B
    m, k = np.meshgrid(levels, levels, indexing="ij")
    valid = k <= m
    iot, fog, cloud = instance.iot, instance.fog, instance.cloud
    p_i, p_f = iot.p_total, fog.p_total
    t_comm_if = comm_time(m, link_rate(alpha * p_i, instance.link_if))
    t_comm_fc = comm_time(k, link_rate(gamma * p_f, instance.link_fc))
    T_I = proc_time(B - m, (1 - alpha) * p_i, iot)
    T_F = t_comm_if + proc_time(m - k, (1 - gamma) * p_f, fog)
    with np.errstate(invalid="ignore"):
        T_C = t_comm_if + t_comm_fc + proc_time(k, cloud.p_total, cloud)
    T = np.maximum(np.maximum(T_I, T_F), T_C)
    T = np.where(valid, T, np.inf)
    j = int(np.argmin(T))  # row-major: smallest m first, then smallest k
    return float(T.flat[j]), float(m.flat[j]), float(k.flat[j])


def fraction_grid(upper: float, step: float, layer) -> np.ndarray:
    """``{0, step, ...}`` strictly below ``upper``, keeping processing power above idle."""
    if not step > 0:
        raise ValueError("grid_step must be positive")
    n = int(math.ceil(upper / step))
    g = np.arange(n + 1) * step
    g = g[g < upper]
    return g[(1.0 - g) * layer.p_total - layer.b >= POWER_MARGIN]


@dataclass(frozen=True)
class GridTable:
    alpha: np.ndarray
    gamma: np.ndarray
    t: np.ndarray  # shape (len(alpha), len(gamma))
    m: np.ndarray
    k: np.ndarray

    def best(self) -> Solution:
        if not np.any(np.isfinite(self.t)):
            raise UnboundedLatencyError("every grid cell has unbounded latency")
        i, j = np.unravel_index(int(np.argmin(self.t)), self.t.shape)
        return Solution(float(self.t[i, j]), float(self.m[i, j]), float(self.k[i, j]),
                        float(self.alpha[i]), float(self.gamma[j]))

    def write_csv(self, dest) -> None:
        own = isinstance(dest, (str, Path))
        fh = open(dest, "w", newline="") if own else dest
        try:
            w = csv.writer(fh)
            w.writerow(["alpha", "gamma", "t", "m", "k"])
            for i, a in enumerate(self.alpha):
                for j, g in enumerate(self.gamma):
                    w.writerow([repr(float(a)), repr(float(g)), repr(float(self.t[i, j])),
                                repr(float(self.m[i, j])), repr(float(self.k[i, j]))])
        finally:
            if own:
                fh.close()


def grid_table(instance: SystemInstance, grid_step: float = DEFAULT_ORACLE_STEP,
               inner_tol: float | None = None) -> GridTable:
    alphas = fraction_grid(instance.alpha_max, grid_step, instance.iot)
    gammas = fraction_grid(instance.gamma_max, grid_step, instance.fog)
    A, G = np.meshgrid(alphas, gammas, indexing="ij")
    pb = _per_bit(instance, A, G)
    t, m, k = _bisect(pb, instance.workload_bits, inner_tol)
    return GridTable(alphas, gammas, t, m, k)


def _split_grid_oracle(instance: SystemInstance, grid_step: float) -> Solution:
    """Brute force over ``(m/B, k/B, alpha, gamma)``, each on the same step grid."""
    B = instance.workload_bits
    alphas = fraction_grid(instance.alpha_max, grid_step, instance.iot)
    gammas = fraction_grid(instance.gamma_max, grid_step, instance.fog)
    n = int(round(1.0 / grid_step))
    frac = np.minimum(np.arange(n + 1) * grid_step, 1.0)
    mi, ki = np.tril_indices(n + 1)
    m = frac[mi] * B
    k = frac[ki] * B
    iot, fog, cloud = instance.iot, instance.fog, instance.cloud
    fog_rate = link_rate(gammas * fog.p_total, instance.link_fc)
    fog_proc = np.array([proc_time(1.0, (1 - g) * fog.p_total, fog) for g in gammas])
    cloud_proc = proc_time(1.0, cloud.p_total, cloud)
    with np.errstate(invalid="ignore"):
        t_fc = np.where(k[:, None] == 0, 0.0, k[:, None] * _inverse(fog_rate)[None, :])
    best = (math.inf, 0.0, 0.0, 0.0, 0.0)
    for a in alphas:
        t_if = comm_time(m, link_rate(a * iot.p_total, instance.link_if))
        T_I = proc_time(B - m, (1 - a) * iot.p_total, iot)
        T_F = t_if[:, None] + (m - k)[:, None] * fog_proc[None, :]
        with np.errstate(invalid="ignore"):
            T_C = t_if[:, None] + t_fc + (k * cloud_proc)[:, None]
        T = np.maximum(np.maximum(T_I[:, None], T_F), T_C)
        T = np.where(np.isnan(T), np.inf, T)
        j = np.unravel_index(int(np.argmin(T)), T.shape)
        if T[j] < best[0]:
            best = (float(T[j]), float(m[j[0]]), float(k[j[0]]), float(a), float(gammas[j[1]]))
    if not math.isfinite(best[0]):
        raise UnboundedLatencyError("every grid cell has unbounded latency")
    return Solution(*best)


def grid_oracle(instance: SystemInstance, grid_step: float = DEFAULT_ORACLE_STEP,
                inner_tol: float | None = None, mode: str = "power") -> Solution:
    """Exhaustive grid search for the relaxed problem.

    ``mode="power"`` grids ``(alpha, gamma)`` and solves ``(m, k)`` exactly per
    cell; ties go to the smallest ``(alpha, gamma)``. ``mode="split"`` grids
    all four variables with the same step instead (slow; for sensitivity runs).
    """
    if mode == "power":
        return grid_table(instance, grid_step, inner_tol).best()
    if mode == "split":
        return _split_grid_oracle(instance, grid_step)
    raise ValueError(f"unknown oracle mode {mode!r}")
