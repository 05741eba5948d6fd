"""Sequential Latency Minimization (SLM).

Alternates two stages until their objectives meet:

* stage 1 moves ``m`` extra bits from the IoT device to the fog and raises the
  IoT communication power fraction by ``alpha``; it balances the IoT line
  ``a - b*m`` against the fog line ``d + c*m``;
* stage 2 moves ``k`` extra bits from the fog to the cloud and raises the fog
  communication fraction by ``gamma``; it balances the fog line against the
  cloud line, both shifted by the IoT->fog transfer time ``offset``.

For a fixed power increment each stage is the intersection of two lines; the
power increment itself comes from a scalar grid search. All increments are
non-negative, so the cumulative sums only grow.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import (
    POWER_MARGIN,
    Allocation,
    ModelDomainError,
    Solution,
    SystemInstance,
    UnboundedLatencyError,
    evaluate,
    frequency_at,
    link_rate,
)

CONVERGED = "converged"
STALLED = "grid-stalled"
MAX_ITERATIONS = "max-iterations"

DEFAULT_GRID_STEP = 1e-3
DEFAULT_MAX_ITERATIONS = 500


@dataclass(frozen=True)
class SlmState:
    instance: SystemInstance
    cum_m: float = 0.0
    cum_k: float = 0.0
    cum_alpha: float = 0.0
    cum_gamma: float = 0.0
    iteration: int = 1

    @property
    def remaining_bits(self) -> float:
        return max(self.instance.workload_bits - self.cum_m, 0.0)

    @property
    def fog_bits(self) -> float:
        return max(self.cum_m - self.cum_k, 0.0)

    def fold_stage1(self, m: float, alpha: float) -> "SlmState":
        m = min(self.cum_m + m, self.instance.workload_bits)
        return replace(self, cum_m=m, cum_alpha=self.cum_alpha + alpha)

    def fold_stage2(self, k: float, gamma: float) -> "SlmState":
        k = min(self.cum_k + k, self.cum_m)
        return replace(self, cum_k=k, cum_gamma=self.cum_gamma + gamma)

    def allocation(self) -> Allocation:
        return Allocation(self.cum_m, min(self.cum_k, self.cum_m), self.cum_alpha, self.cum_gamma)


@dataclass(frozen=True)
class StageCoeffs:
    """Lines ``a - b*x`` and ``d + c*x`` (plus a constant ``offset``).

    Fields are floats or arrays aligned with the power-increment grid. A zero
    link rate shows up as ``c = inf``.
    """

    a_coef: object
    b_coef: object
    c_coef: object
    d_coef: object
    offset: float = 0.0


@dataclass(frozen=True)
class IterationRecord:
    i: int
    t: float
    s: float
    m_inc: float
    k_inc: float
    alpha_inc: float
    gamma_inc: float


@dataclass
class SlmTrace:
    records: list = field(default_factory=list)
    solution: Solution | None = None
    status: str = ""
    epsilon: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def t_values(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def s_values(self) -> np.ndarray:
        return np.array([r.s for r in self.records])

    def write_csv(self, dest) -> None:
        """One row per iteration: i, t, s, m_inc, k_inc, alpha_inc, gamma_inc."""
        own = isinstance(dest, (str, Path))
        fh = open(dest, "w", newline="") if own else dest
        try:
            w = csv.writer(fh)
            w.writerow(["i", "t", "s", "m_inc", "k_inc", "alpha_inc", "gamma_inc"])
            for r in self.records:
                w.writerow([r.i, repr(r.t), repr(r.s), repr(r.m_inc), repr(r.k_inc),
                            repr(r.alpha_inc), repr(r.gamma_inc)])
        finally:
            if own:
                fh.close()

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _inverse(rate):
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(rate > 0, 1.0 / np.where(rate > 0, rate, 1.0), np.inf)
    return inv


def _bits_times(bits: float, per_bit):
    # zero bits cost nothing even over a dead link
    if bits == 0:
        return np.zeros_like(np.asarray(per_bit, dtype=float))
    return bits * np.asarray(per_bit, dtype=float)


def _per_bit_proc(layer, fraction_for_processing):
    power = np.asarray(fraction_for_processing, dtype=float) * layer.p_total
    if np.any(power - layer.b < POWER_MARGIN):
        raise ModelDomainError("power increment leaves no processing headroom")
    return layer.c / np.asarray(frequency_at(power, layer))


def power_grid(range_: float, step: float, layer, used: float) -> np.ndarray:
    """Grid ``{0, step, 2 step, ...}`` strictly below ``range_``.

    Points leaving less than the strict-inequality margin of processing power
    at ``layer`` (given ``used`` fraction already spent) are dropped.
    """
    if step <= 0:
        raise ValueError("grid_step must be positive")
    if range_ <= 0:
        return np.empty(0)
    n = int(math.ceil(range_ / step))
    grid = np.arange(n + 1) * step
    grid = grid[grid < range_]
    ok = (1.0 - used - grid) * layer.p_total - layer.b >= POWER_MARGIN
    return grid[ok]


def stage1_coeffs(state: SlmState, alpha_inc) -> StageCoeffs:
    inst = state.instance
    total = state.cum_alpha + np.asarray(alpha_inc, dtype=float)
    if np.any(np.asarray(alpha_inc) < 0) or np.any(total >= inst.alpha_max):
        raise ModelDomainError("alpha increment outside [0, alpha_max - cum_alpha)")
    remaining = state.remaining_bits
    p_iot = _per_bit_proc(inst.iot, 1.0 - total)
    if remaining > 0:
        a = remaining * p_iot
        b = p_iot
    else:
        a = np.zeros_like(p_iot)
        b = np.zeros_like(p_iot)
    inv_if = _inverse(link_rate(total * inst.iot.p_total, inst.link_if))
    p_fog = float(_per_bit_proc(inst.fog, 1.0 - state.cum_gamma))
    c = inv_if + p_fog
    d = _bits_times(state.cum_m, inv_if) + p_fog * state.fog_bits
    return StageCoeffs(a, b, c, d, 0.0)


def stage2_coeffs(state: SlmState, gamma_inc) -> StageCoeffs:
    inst = state.instance
    total = state.cum_gamma + np.asarray(gamma_inc, dtype=float)
    if np.any(np.asarray(gamma_inc) < 0) or np.any(total >= inst.gamma_max):
        raise ModelDomainError("gamma increment outside [0, gamma_max - cum_gamma)")
    fog_bits = state.fog_bits
    p_fog = _per_bit_proc(inst.fog, 1.0 - total)
    if fog_bits > 0:
        a = fog_bits * p_fog
        b = p_fog
    else:
        a = np.zeros_like(p_fog)
        b = np.zeros_like(p_fog)
    inv_fc = _inverse(link_rate(total * inst.fog.p_total, inst.link_fc))
    p_cloud = float(_per_bit_proc(inst.cloud, 1.0))
    c = inv_fc + p_cloud
    d = _bits_times(state.cum_k, c)
    inv_if = float(_inverse(link_rate(state.cum_alpha * inst.iot.p_total, inst.link_if)))
    offset = float(_bits_times(state.cum_m, inv_if))
    return StageCoeffs(a, b, c, d, offset)


def stage1_inner(coeffs: StageCoeffs, m_upper: float):
    """Minimize ``max(a - b x, d + c x)`` over ``0 <= x <= m_upper``.

    Returns ``(t, x)``; ``t`` excludes ``coeffs.offset``. Works elementwise on
    coefficient arrays.
    """
    a = np.asarray(coeffs.a_coef, dtype=float)
    b = np.asarray(coeffs.b_coef, dtype=float)
    c = np.asarray(coeffs.c_coef, dtype=float)
    d = np.asarray(coeffs.d_coef, dtype=float)
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    denom = b + c
    movable = np.isfinite(c) & (denom > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(movable, (a - d) / np.where(movable, denom, 1.0), 0.0)
    x = np.clip(x, 0.0, m_upper)
    with np.errstate(invalid="ignore"):
        t = np.where(movable, np.maximum(a - b * x, d + c * x), np.maximum(a, d))
    if t.ndim == 0:
        return float(t), float(x)
    return t, x


stage2_inner = stage1_inner


def _current_latency(state: SlmState) -> float:
    res = evaluate(state.instance, state.allocation())
    return max(res.T_I, res.T_F) if res.bounded else math.inf


def stage1_solve(state: SlmState, grid_step: float = DEFAULT_GRID_STEP):
    """Returns ``(t, m_inc, alpha_inc)``; ties go to the smallest alpha."""
    inst = state.instance
    grid = power_grid(inst.alpha_max - state.cum_alpha, grid_step, inst.iot, state.cum_alpha)
    if grid.size == 0:
        return _current_latency(state), 0.0, 0.0
    t, m = stage1_inner(stage1_coeffs(state, grid), state.remaining_bits)
    j = int(np.argmin(t))
    return float(t[j]), float(m[j]), float(grid[j])


def stage2_solve(state: SlmState, grid_step: float = DEFAULT_GRID_STEP):
    """Returns ``(s, k_inc, gamma_inc)``; ties go to the smallest gamma."""
    inst = state.instance
    grid = power_grid(inst.gamma_max - state.cum_gamma, grid_step, inst.fog, state.cum_gamma)
    if grid.size == 0:
        res = evaluate(inst, state.allocation())
        return (max(res.T_F, res.T_C) if res.bounded else math.inf), 0.0, 0.0
    coeffs = stage2_coeffs(state, grid)
    s, k = stage2_inner(coeffs, state.fog_bits)
    s = s + coeffs.offset
    j = int(np.argmin(s))
    return float(s[j]), float(k[j]), float(grid[j])


def slm_run(
    instance: SystemInstance,
    epsilon: float = 1e-9,
    grid_step: float = DEFAULT_GRID_STEP,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    *,
    rel_epsilon: float | None = None,
):
    """Run SLM to the stopping rule ``|t - s| <= epsilon``.

    ``rel_epsilon`` replaces ``epsilon`` by ``rel_epsilon * t`` of the first
    iteration. Besides convergence the loop stops when ``t`` has dropped by no
    more than ``epsilon / 10`` over the last two iterations (``grid-stalled``)
    or at ``max_iterations``; ``trace.status`` says which.

    Returns ``(Solution, SlmTrace)`` with ``Solution.t`` the last stage-1 value.
    """
    if rel_epsilon is None and not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    if max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")

    state = SlmState(instance)
    trace = SlmTrace(epsilon=epsilon)
    status = MAX_ITERATIONS
    for i in range(1, max_iterations + 1):
        state = replace(state, iteration=i)
        t, m_inc, a_inc = stage1_solve(state, grid_step)
        state = state.fold_stage1(m_inc, a_inc)
        s, k_inc, g_inc = stage2_solve(state, grid_step)
        state = state.fold_stage2(k_inc, g_inc)
        trace.records.append(IterationRecord(i, t, s, m_inc, k_inc, a_inc, g_inc))
        if i == 1 and rel_epsilon is not None:
            epsilon = trace.epsilon = rel_epsilon * t
        if abs(t - s) <= epsilon:
            status = CONVERGED
            break
        if i >= 3 and trace.records[-3].t - t <= epsilon / 10:
            status = STALLED
            break

    if not math.isfinite(t):
        raise UnboundedLatencyError("no allocation with finite latency was found")
    trace.status = status
    trace.solution = Solution(t, state.cum_m, state.cum_k, state.cum_alpha, state.cum_gamma)
    return trace.solution, trace
