"""Closed-form voltage change at an observation bus due to power changes at actor buses.

Sign convention used throughout the package: ``dv = V_new - V_base``, so an
increase in consumption (positive real power change) gives a voltage drop.

For a single actor with per-phase power change ``dS`` and shared-path
impedance ``Z`` (per-unit, configured for the actor's load connection)::

    dv[q] = -sum_p conj(dS[p]) * Z[q, p] / conj(V_actor[p])

Multiple actors superpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .feeder import PHASES, FeederModel, FeederError, PerUnitBase
from .topology import path_index

#: Slack phasor angles for phases a, b, c.
NOMINAL_ROTATION = np.exp(-2j * np.pi / 3 * np.arange(3))

VOLTAGE_FLOOR_PU = 1e-6


class ZeroVoltage(FeederError):
    def __init__(self, bus_id, phase, magnitude):
        self.bus_id, self.phase, self.magnitude = bus_id, phase, magnitude
        super().__init__(f"voltage at {bus_id}.{phase} is {magnitude:.3g} pu, below floor")


@dataclass(frozen=True)
class PowerChange:
    """Per-phase complex power change (VA) at an actor bus; positive P is more consumption."""

    actor: str
    delta_s: tuple[complex, complex, complex]

    def __post_init__(self):
        ds = tuple(complex(x) for x in self.delta_s)
        if len(ds) != 3:
            raise ValueError("delta_s needs exactly three phase entries")
        object.__setattr__(self, "delta_s", ds)

    @classmethod
    def single_phase(cls, actor: str, phase: str, p_w: float, q_var: float = 0.0):
        ds = [0j, 0j, 0j]
        ds[PHASES.index(phase)] = complex(p_w, q_var)
        return cls(actor, tuple(ds))

    def scaled(self, factor: float) -> "PowerChange":
        return PowerChange(self.actor, tuple(factor * s for s in self.delta_s))


class VoltageState:
    """Phase-to-ground voltage phasors for every bus, stored in per-unit."""

    def __init__(self, bus_ids: Sequence[str], v_pu: np.ndarray, base: PerUnitBase):
        self.bus_ids = list(bus_ids)
        self.pos = {b: i for i, b in enumerate(self.bus_ids)}
        self.v_pu = np.array(v_pu, dtype=complex)
        self.v_pu.setflags(write=False)
        self.base = base

    @classmethod
    def flat(cls, model: FeederModel) -> "VoltageState":
        """Nominal magnitude at 0/-120/+120 degrees on every present phase."""
        idx = path_index(model)
        return cls(idx.ids, idx.mask * NOMINAL_ROTATION, model.base)

    @classmethod
    def from_volts(cls, model: FeederModel, volts: Mapping[str, Sequence[complex]]) -> "VoltageState":
        idx = path_index(model)
        v = np.zeros((len(idx.ids), 3), dtype=complex)
        for b, vals in volts.items():
            v[idx.index(b)] = np.asarray(vals, dtype=complex) / model.base.voltage
        return cls(idx.ids, v, model.base)

    def pu(self, bus_id: str) -> np.ndarray:
        return self.v_pu[self.pos[bus_id]]

    def volts(self, bus_id: str) -> np.ndarray:
        return self.pu(bus_id) * self.base.voltage

    def as_dict(self) -> dict[str, np.ndarray]:
        """Map bus id to its three phase voltages in volts."""
        return {b: self.v_pu[i] * self.base.voltage for i, b in enumerate(self.bus_ids)}

    def __repr__(self):
        return f"VoltageState({len(self.bus_ids)} buses)"


@dataclass(frozen=True, eq=False)
class VoltageChange:
    observation: str
    dv_pu: np.ndarray
    base_voltage: float

    @property
    def dv_volts(self) -> np.ndarray:
        return self.dv_pu * self.base_voltage

    @classmethod
    def zero(cls, observation: str, base_voltage: float) -> "VoltageChange":
        return cls(observation, np.zeros(3, dtype=complex), base_voltage)

    def __add__(self, other: "VoltageChange") -> "VoltageChange":
        if other.observation != self.observation:
            raise ValueError("cannot add voltage changes at different buses")
        return VoltageChange(self.observation, self.dv_pu + other.dv_pu, self.base_voltage)


def actor_configuration(model: FeederModel, actor: str) -> str:
    load = model.bus(actor).load
    return load.configuration if load is not None else "star"


def sensitivity_row(model: FeederModel, state: VoltageState | None, obs: str, actor: str,
                    *, configuration: str | None = None,
                    floor_pu: float = VOLTAGE_FLOOR_PU) -> np.ndarray:
    """3x3 per-unit matrix ``M`` with ``dv_pu = M @ conj(dS_pu)``.

    Columns for phases absent at the actor are zero. Raises :class:`ZeroVoltage`
    if a present actor phase sits below ``floor_pu``.
    """
    idx = path_index(model)
    o, a = idx.index(obs), idx.index(actor)
    if configuration is None:
        configuration = actor_configuration(model, actor)
    v = _actor_voltage(model, state, idx, a)
    present = idx.mask[a]
    mags = np.abs(v)
    low = present & (mags < floor_pu)
    if low.any():
        p = int(np.argmax(low))
        raise ZeroVoltage(actor, PHASES[p], mags[p])
    z = idx.shared_impedance_pu(o, a, configuration)
    inv = np.zeros(3, dtype=complex)
    inv[present] = 1.0 / np.conj(v[present])
    return -(z * inv[None, :]) * idx.mask[o][:, None]


def _actor_voltage(model, state, idx, a):
    if state is None:
        return idx.mask[a] * NOMINAL_ROTATION
    return state.v_pu[state.pos[idx.ids[a]]]


def analytic_delta_v(model: FeederModel, state: VoltageState | None, obs: str,
                     change: PowerChange, *, configuration: str | None = None,
                     delta_reference: str = "phase",
                     floor_pu: float = VOLTAGE_FLOOR_PU) -> VoltageChange:
    """Approximate voltage change at ``obs`` caused by ``change``.

    ``state`` is the pre-change operating point; ``None`` falls back to flat
    nominal voltages. The actor's load configuration selects the star or delta
    impedance form unless ``configuration`` overrides it.

    For delta loads the branch currents are divided by the phase-to-ground
    actor voltages by default. ``delta_reference="line"`` uses the
    phase-to-phase voltages (ab, bc, ca) instead, which is what a delta branch
    physically sees.
    """
    base = model.base
    idx = path_index(model)
    o, a = idx.index(obs), idx.index(change.actor)
    ds_pu = np.asarray(change.delta_s) / base.power
    active = ds_pu != 0
    if np.any(active & ~idx.mask[a]):
        raise ValueError(f"power change on a phase absent at {change.actor}")
    if not active.any():
        return VoltageChange.zero(obs, base.voltage)
    if configuration is None:
        configuration = actor_configuration(model, change.actor)
    v = _actor_voltage(model, state, idx, a)
    if configuration == "delta" and delta_reference == "line":
        v = v - np.roll(v, -1)
    elif delta_reference not in ("phase", "line"):
        raise ValueError(f"delta_reference must be phase or line, got {delta_reference!r}")
    v = v[active]
    mags = np.abs(v)
    if np.any(mags < floor_pu):
        k = int(np.argmin(mags))
        raise ZeroVoltage(change.actor, PHASES[int(np.flatnonzero(active)[k])], mags[k])
    z = idx.shared_impedance_pu(o, a, configuration)
    dv = -(z[:, active] @ (np.conj(ds_pu[active]) / np.conj(v)))
    return VoltageChange(obs, dv * idx.mask[o], base.voltage)


def analytic_delta_v_multi(model: FeederModel, state: VoltageState | None, obs: str,
                           changes: Sequence[PowerChange], **kwargs) -> VoltageChange:
    """Superposed voltage change at ``obs`` from several actors."""
    total = VoltageChange.zero(obs, model.base.voltage)
    for change in changes:
        try:
            total = total + analytic_delta_v(model, state, obs, change, **kwargs)
        except (FeederError, ValueError) as exc:
            exc.actor = change.actor
            raise
    return total
