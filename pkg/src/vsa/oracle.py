"""Unbalanced three-phase backward/forward sweep power flow and perturb-and-observe.

This is the ground-truth baseline for the analytic approximation. It shares no
formula with :mod:`vsa.analytic`: loads draw exact constant-power currents at
the iterated voltages, and delta loads are modelled physically from
phase-to-phase voltages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytic import NOMINAL_ROTATION, PowerChange, VoltageChange, VoltageState
from .feeder import FeederError, FeederModel
from .topology import path_index


class SolverError(FeederError):
    pass


class NonConvergence(SolverError):
    def __init__(self, report: "SolveReport"):
        self.report = report
        super().__init__(f"no convergence after {report.iterations} iterations "
                         f"(mismatch {report.final_mismatch:.3e} pu)")


class VoltageCollapse(SolverError):
    def __init__(self, bus_id: str, magnitude: float, iteration: int):
        self.bus_id, self.magnitude, self.iteration = bus_id, magnitude, iteration
        super().__init__(f"voltage at {bus_id} fell to {magnitude:.3g} pu at iteration {iteration}")


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-9
    max_iterations: int = 100
    start: VoltageState | None = None  # None means flat start
    voltage_floor_pu: float = 0.3

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True, eq=False)
class SolveReport:
    state: VoltageState
    iterations: int
    final_mismatch: float
    converged: bool
    branch_current_pu: np.ndarray = field(repr=False)  # current in the edge feeding each bus
    slack_power_pu: np.ndarray = field(repr=False)  # per phase
    load_power_pu: complex = 0j


def load_arrays(model: FeederModel, changes: Sequence[PowerChange] = ()):
    """Per-unit star and delta load arrays (n, 3) with ``changes`` applied.

    A change is added to the actor's existing load connection (star if unloaded).
    """
    idx = path_index(model)
    n = len(idx.ids)
    s_star = np.zeros((n, 3), dtype=complex)
    s_delta = np.zeros((n, 3), dtype=complex)
    sbase = model.base.power
    for b in model.buses:
        if b.load is not None:
            target = s_delta if b.load.configuration == "delta" else s_star
            target[idx.pos[b.id]] += np.asarray(b.load.s_va) / sbase
    for c in changes:
        i = idx.index(c.actor)
        load = model.bus(c.actor).load
        target = s_delta if load is not None and load.configuration == "delta" else s_star
        target[i] += np.asarray(c.delta_s) / sbase
    return s_star, s_delta


def _load_currents(v, s_star, s_delta, has_delta):
    i = np.zeros_like(v)
    np.divide(np.conj(s_star), np.conj(v), out=i, where=s_star != 0)
    if has_delta:
        v_ll = v - np.roll(v, -1, axis=1)  # ab, bc, ca
        i_br = np.zeros_like(v)
        np.divide(np.conj(s_delta), np.conj(v_ll), out=i_br, where=s_delta != 0)
        i += i_br - np.roll(i_br, 1, axis=1)  # I_a = I_ab - I_ca, ...
    return i


def powerflow_solve(model: FeederModel, options: SolveOptions | None = None,
                    *, changes: Sequence[PowerChange] = ()) -> SolveReport:
    """Solve the feeder with constant-power loads (plus optional ``changes``).

    Raises :class:`NonConvergence` or :class:`VoltageCollapse`.
    """
    options = options or SolveOptions()
    idx = path_index(model)
    s_star, s_delta = load_arrays(model, changes)
    has_delta = bool(np.any(s_delta))
    mask = idx.mask
    parent = idx.parent.tolist()
    order = idx.order.tolist()
    down = order[1:]
    up = down[::-1]
    z = idx.z_pu
    root = idx.root
    present = mask.astype(bool)

    v_slack = mask[root] * NOMINAL_ROTATION
    if options.start is None:
        v = mask * NOMINAL_ROTATION
    else:
        v = np.array(options.start.v_pu, dtype=complex) * mask
    v[root] = v_slack

    mismatch = np.inf
    iteration = 0
    for iteration in range(1, options.max_iterations + 1):
        ib = _load_currents(v, s_star, s_delta, has_delta)
        for i in up:
            ib[parent[i]] += ib[i]
        drop = np.einsum("nij,nj->ni", z, ib)
        v_new = np.empty_like(v)
        v_new[root] = v_slack
        for i in down:
            v_new[i] = v_new[parent[i]] - drop[i]
        v_new *= mask
        mags = np.abs(v_new)
        low = present & ~(mags >= options.voltage_floor_pu)
        if low.any():
            bus = int(np.argwhere(low)[0][0])
            raise VoltageCollapse(idx.ids[bus], float(np.nan_to_num(mags[bus][low[bus]].min())), iteration)
        mismatch = float(np.max(np.abs(v_new - v)))
        v = v_new
        if mismatch < options.tolerance:
            break

    # currents consistent with the final voltages
    ib = _load_currents(v, s_star, s_delta, has_delta)
    load_power = complex(np.sum(s_star) + np.sum(s_delta))
    for i in up:
        ib[parent[i]] += ib[i]
    report = SolveReport(
        state=VoltageState(idx.ids, v, model.base),
        iterations=iteration,
        final_mismatch=mismatch,
        converged=mismatch < options.tolerance,
        branch_current_pu=ib,
        slack_power_pu=v_slack * np.conj(ib[root]),
        load_power_pu=load_power,
    )
    if not report.converged:
        raise NonConvergence(report)
    return report


def perturb_and_observe(model: FeederModel, base: SolveReport, changes: Sequence[PowerChange],
                        options: SolveOptions | None = None) -> dict[str, VoltageChange]:
    """Exact voltage change ``V_new - V_base`` at every bus after applying ``changes``.

    The re-solve is warm-started from ``base.state``.
    """
    if not base.converged:
        raise ValueError("base solution did not converge")
    vbase = model.base.voltage
    if not changes:
        return {b: VoltageChange.zero(b, vbase) for b in base.state.bus_ids}
    options = options or SolveOptions()
    options = SolveOptions(options.tolerance, options.max_iterations, base.state,
                           options.voltage_floor_pu)
    new = powerflow_solve(model, options, changes=changes)
    dv = new.state.v_pu - base.state.v_pu
    return {b: VoltageChange(b, dv[i], vbase) for i, b in enumerate(base.state.bus_ids)}


def kvl_residual(model: FeederModel, report: SolveReport) -> float:
    """Max |V_from - V_to - Z I| over all edges, per-unit."""
    idx = path_index(model)
    v = report.state.v_pu
    worst = 0.0
    for i in idx.order[1:]:
        r = v[idx.parent[i]] * idx.mask[i] - v[i] - idx.z_pu[i] @ report.branch_current_pu[i]
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def line_losses_pu(model: FeederModel, report: SolveReport) -> complex:
    idx = path_index(model)
    ib = report.branch_current_pu
    return complex(sum(np.conj(ib[i]) @ idx.z_pu[i] @ ib[i] for i in idx.order[1:]))
