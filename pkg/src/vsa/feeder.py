"""Feeder data model: buses, three-phase edges, loads, parsing and validation.

Files use SI units (ohms, volts, volt-amperes). Conversion to per-unit happens
in the computation layers via :class:`PerUnitBase`.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PHASES = ("a", "b", "c")
PHASE_INDEX = {p: i for i, p in enumerate(PHASES)}
CONFIGURATIONS = ("star", "delta")

#: Three-phase apparent power base used for per-unit conversion.
DEFAULT_BASE_POWER_VA = 1.0e6


class FeederError(ValueError):
    """Base class for feeder construction failures."""


class SchemaError(FeederError):
    """Malformed field or missing key in a feeder document."""


class ValidationError(FeederError):
    """A parsed model violates one or more invariants."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {lines}")


class TopologyError(ValidationError):
    """Cycle, disconnection, duplicate id, or load on the source bus."""


class UnitError(ValidationError):
    """Non-positive or non-finite nominal voltage."""


class UnknownBus(FeederError, LookupError):
    def __init__(self, bus_id):
        self.bus_id = bus_id
        super().__init__(f"unknown bus {bus_id!r}")


TOPOLOGY_KINDS = frozenset(
    {"Cycle", "Disconnected", "DuplicateId", "SourceWithLoad", "UnknownSource",
     "UnknownEndpoint", "SelfLoop"}
)
UNIT_KINDS = frozenset({"NonPositiveVoltage"})


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str = ""

    def __str__(self):
        s = f"{self.kind}({self.subject})"
        return f"{s}: {self.detail}" if self.detail else s


@dataclass(frozen=True)
class PerUnitBase:
    """Per-phase per-unit base derived from a line-to-line nominal voltage.

    Voltages are phase-to-ground on ``v_ll / sqrt(3)``; per-phase powers are
    on one third of the three-phase base power.
    """

    nominal_voltage_v: float
    base_power_va: float = DEFAULT_BASE_POWER_VA

    @property
    def voltage(self) -> float:
        return self.nominal_voltage_v / math.sqrt(3.0)

    @property
    def power(self) -> float:
        return self.base_power_va / 3.0

    @property
    def impedance(self) -> float:
        return self.nominal_voltage_v**2 / self.base_power_va

    @property
    def current(self) -> float:
        return self.power / self.voltage


@dataclass(frozen=True)
class LoadSpec:
    """Constant-power load. For ``delta`` the entries are the ab, bc, ca branches."""

    configuration: str
    s_va: tuple[complex, complex, complex]

    def __post_init__(self):
        object.__setattr__(self, "s_va", tuple(complex(x) for x in self.s_va))


@dataclass(frozen=True)
class Bus:
    id: str
    phases: tuple[str, ...]
    load: LoadSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))

    @property
    def mask(self) -> np.ndarray:
        return np.array([p in self.phases for p in PHASES])


@dataclass(frozen=True, eq=False)
class Edge:
    from_bus: str
    to_bus: str
    z_ohm: np.ndarray

    def __post_init__(self):
        z = np.array(self.z_ohm, dtype=complex)
        z.setflags(write=False)
        object.__setattr__(self, "z_ohm", z)

    def __repr__(self):
        return f"Edge({self.from_bus!r} -> {self.to_bus!r})"


@dataclass(frozen=True, eq=False)
class FeederModel:
    """Radial feeder. Immutable; equality is identity (compare via :func:`to_dict`)."""

    source: str
    nominal_voltage_v: float
    buses: tuple[Bus, ...]
    edges: tuple[Edge, ...]
    base_power_va: float = DEFAULT_BASE_POWER_VA
    _bus_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "_bus_index", {b.id: b for b in self.buses})

    @property
    def base(self) -> PerUnitBase:
        return PerUnitBase(self.nominal_voltage_v, self.base_power_va)

    def bus(self, bus_id: str) -> Bus:
        try:
            return self._bus_index[bus_id]
        except KeyError:
            raise UnknownBus(bus_id) from None

    def __contains__(self, bus_id) -> bool:
        return bus_id in self._bus_index

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------


def _require(obj, key, where):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}")
    return obj[key]


def _number(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _complex_pair(x, where) -> complex:
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise SchemaError(f"{where}: expected [re, im], got {x!r}")
    return complex(_number(x[0], where), _number(x[1], where))


def from_dict(doc) -> FeederModel:
    """Build a model from a decoded feeder document. Checks schema only."""
    source = _require(doc, "source", "feeder")
    if not isinstance(source, str):
        raise SchemaError("feeder.source: expected a string")
    vnom = _number(_require(doc, "nominal_voltage_v", "feeder"), "feeder.nominal_voltage_v")
    base_power = _number(doc.get("base_power_va", DEFAULT_BASE_POWER_VA), "feeder.base_power_va")

    raw_buses = _require(doc, "buses", "feeder")
    if not isinstance(raw_buses, list):
        raise SchemaError("feeder.buses: expected an array")
    buses = []
    for i, rb in enumerate(raw_buses):
        where = f"buses[{i}]"
        bid = _require(rb, "id", where)
        if not isinstance(bid, str):
            raise SchemaError(f"{where}.id: expected a string")
        phases = _require(rb, "phases", where)
        if isinstance(phases, str):
            phases = list(phases)
        if not isinstance(phases, list) or any(p not in PHASE_INDEX for p in phases):
            raise SchemaError(f"{where}.phases: expected a subset of a, b, c, got {phases!r}")
        if len(set(phases)) != len(phases) or not phases:
            raise SchemaError(f"{where}.phases: must be non-empty and distinct")
        phases = sorted(phases, key=PHASE_INDEX.__getitem__)
        load = None
        if rb.get("load") is not None:
            rl = rb["load"]
            conf = _require(rl, "configuration", f"{where}.load")
            if conf not in CONFIGURATIONS:
                raise SchemaError(f"{where}.load.configuration: expected star|delta, got {conf!r}")
            s = _require(rl, "s_va", f"{where}.load")
            if not isinstance(s, list) or len(s) != 3:
                raise SchemaError(f"{where}.load.s_va: expected three [re, im] pairs")
            load = LoadSpec(conf, tuple(_complex_pair(x, f"{where}.load.s_va") for x in s))
        buses.append(Bus(bid, tuple(phases), load))

    raw_edges = _require(doc, "edges", "feeder")
    if not isinstance(raw_edges, list):
        raise SchemaError("feeder.edges: expected an array")
    edges = []
    for i, re_ in enumerate(raw_edges):
        where = f"edges[{i}]"
        fb = _require(re_, "from", where)
        tb = _require(re_, "to", where)
        if not isinstance(fb, str) or not isinstance(tb, str):
            raise SchemaError(f"{where}: endpoints must be strings")
        z = _require(re_, "z_ohm", where)
        if not isinstance(z, list) or len(z) != 3 or any(
            not isinstance(row, list) or len(row) != 3 for row in z
        ):
            raise SchemaError(f"{where}.z_ohm: expected a 3x3 array of [re, im]")
        zm = np.array([[_complex_pair(x, f"{where}.z_ohm") for x in row] for row in z])
        edges.append(Edge(fb, tb, zm))

    return FeederModel(source, vnom, tuple(buses), tuple(edges), base_power)


def to_dict(model: FeederModel) -> dict:
    def pair(c):
        return [c.real, c.imag]

    buses = []
    for b in model.buses:
        d = {"id": b.id, "phases": list(b.phases)}
        if b.load is not None:
            d["load"] = {"configuration": b.load.configuration,
                         "s_va": [pair(s) for s in b.load.s_va]}
        buses.append(d)
    doc = {
        "source": model.source,
        "nominal_voltage_v": model.nominal_voltage_v,
        "buses": buses,
        "edges": [
            {"from": e.from_bus, "to": e.to_bus,
             "z_ohm": [[pair(complex(z)) for z in row] for row in e.z_ohm]}
            for e in model.edges
        ],
    }
    if model.base_power_va != DEFAULT_BASE_POWER_VA:
        doc["base_power_va"] = model.base_power_va
    return doc


def serialize(model: FeederModel) -> str:
    return json.dumps(to_dict(model), indent=1)


def parse_feeder(text: str) -> FeederModel:
    """Parse and validate feeder text, raising on the first class of violation."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    model = from_dict(doc)
    violations = validate(model)
    if violations:
        kinds = {v.kind for v in violations}
        if kinds & TOPOLOGY_KINDS:
            raise TopologyError(violations)
        if kinds & UNIT_KINDS:
            raise UnitError(violations)
        raise ValidationError(violations)
    return model


def load_feeder(path) -> FeederModel:
    return parse_feeder(Path(path).read_text())


def bundled_feeder(name: str = "feeder12") -> FeederModel:
    """Load a feeder shipped with the package (``feeder12`` or ``feeder12_delta``)."""
    text = resources.files("vsa.data").joinpath(f"{name}.json").read_text()
    return parse_feeder(text)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(model: FeederModel) -> list[Violation]:
    """Enumerate every invariant violation; an empty list means the model is valid."""
    out: list[Violation] = []

    if not math.isfinite(model.nominal_voltage_v) or model.nominal_voltage_v <= 0:
        out.append(Violation("NonPositiveVoltage", "feeder", f"{model.nominal_voltage_v}"))

    seen = set()
    for b in model.buses:
        if b.id in seen:
            out.append(Violation("DuplicateId", b.id))
        seen.add(b.id)

    if model.source not in seen:
        out.append(Violation("UnknownSource", model.source))
    else:
        src = model.bus(model.source)
        if src.load is not None and any(s != 0 for s in src.load.s_va):
            out.append(Violation("SourceWithLoad", model.source))

    for b in model.buses:
        if b.load is None:
            continue
        s = b.load.s_va
        if not all(math.isfinite(x.real) and math.isfinite(x.imag) for x in s):
            out.append(Violation("NonFinite", b.id, "load"))
        for i, p in enumerate(PHASES):
            if s[i] == 0:
                continue
            needed = {p} if b.load.configuration == "star" else {p, PHASES[(i + 1) % 3]}
            if not needed <= set(b.phases):
                out.append(Violation("PhaseMismatch", b.id,
                                     f"{b.load.configuration} load on {''.join(sorted(needed))}"))

    for k, e in enumerate(model.edges):
        name = f"{e.from_bus}->{e.to_bus}"
        if e.from_bus == e.to_bus:
            out.append(Violation("SelfLoop", name))
        missing = [x for x in (e.from_bus, e.to_bus) if x not in seen]
        if missing:
            out.append(Violation("UnknownEndpoint", name, ",".join(missing)))
        z = e.z_ohm
        if not np.all(np.isfinite(z)):
            out.append(Violation("NonFinite", name, "impedance"))
            continue
        if not np.array_equal(z, z.T):
            out.append(Violation("AsymmetricImpedance", name))
        if not missing:
            carried = model.bus(e.from_bus).mask & model.bus(e.to_bus).mask
            absent = ~carried
            if np.any(z[absent, :] != 0) or np.any(z[:, absent] != 0):
                out.append(Violation("AbsentPhaseImpedance", name))
            diag = np.abs(np.diag(z))
            off = np.abs(z - np.diag(np.diag(z)))
            if np.any(off > diag[:, None]) or np.any(off > diag[None, :]):
                out.append(Violation("MutualExceedsSelf", name))

    if len(seen) == len(model.buses) and model.source in seen:
        out.extend(_check_radial(model))
    return out


def _check_radial(model: FeederModel) -> list[Violation]:
    out = []
    adj: dict[str, list[tuple[str, Edge]]] = {b.id: [] for b in model.buses}
    for e in model.edges:
        if e.from_bus in adj and e.to_bus in adj and e.from_bus != e.to_bus:
            adj[e.from_bus].append((e.to_bus, e))
            adj[e.to_bus].append((e.from_bus, e))

    parent = {model.source: None}
    queue = deque([model.source])
    while queue:
        u = queue.popleft()
        for v, e in adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
                carried = model.bus(u).mask
                extra = [p for p, m, c in zip(PHASES, model.bus(v).mask, carried) if m and not c]
                if extra:
                    out.append(Violation("UnsuppliedPhase", v, "".join(extra)))

    if len(model.edges) != len(model.buses) - 1:
        out.append(Violation("Cycle" if len(model.edges) >= len(model.buses) else "Disconnected",
                             "feeder",
                             f"{len(model.edges)} edges for {len(model.buses)} buses"))
    unreached = [b.id for b in model.buses if b.id not in parent]
    if unreached:
        out.append(Violation("Disconnected", ",".join(unreached)))
    return out


# ---------------------------------------------------------------------------
# Model construction helpers
# ---------------------------------------------------------------------------


def with_configuration(model: FeederModel, configuration: str,
                       buses: Iterable[str] | None = None) -> FeederModel:
    """Return a copy with the loads of ``buses`` (default: all loaded buses) reconfigured.

    Load entries that the new configuration cannot host on the bus's phases are
    left in place for :func:`validate` to report.
    """
    if configuration not in CONFIGURATIONS:
        raise ValueError(f"configuration must be star or delta, got {configuration!r}")
    targets = set(model.bus_ids if buses is None else buses)
    for t in targets:
        model.bus(t)
    new_buses = tuple(
        replace(b, load=replace(b.load, configuration=configuration))
        if b.id in targets and b.load is not None else b
        for b in model.buses
    )
    return replace(model, buses=new_buses)


def chain_feeder(n_buses: int, *, z_ohm=None, load_va=None,
                 nominal_voltage_v: float = 4800.0) -> FeederModel:
    """Synthetic three-phase chain feeder ``s - n1 - ... - n{k}`` with uniform spans.

    Default span impedance and load are scaled by ``37 / n_buses`` so total
    voltage drop stays comparable across sizes.
    """
    if n_buses < 2:
        raise ValueError("a chain needs at least two buses")
    scale = 37.0 / n_buses
    if z_ohm is None:
        z_ohm = np.array([
            [0.2926 + 0.1973j, 0.0673 - 0.0368j, 0.0337 - 0.0417j],
            [0.0673 - 0.0368j, 0.2646 + 0.1900j, 0.0673 - 0.0368j],
            [0.0337 - 0.0417j, 0.0673 - 0.0368j, 0.2926 + 0.1973j],
        ]) * 0.1 * scale
    if load_va is None:
        load_va = tuple(np.array([12e3 + 6e3j, 9e3 + 4e3j, 15e3 + 7e3j]) * scale)
    ids = ["s"] + [f"n{i}" for i in range(1, n_buses)]
    buses = [Bus("s", PHASES)] + [Bus(i, PHASES, LoadSpec("star", load_va)) for i in ids[1:]]
    edges = [Edge(ids[i], ids[i + 1], z_ohm) for i in range(n_buses - 1)]
    return FeederModel("s", nominal_voltage_v, tuple(buses), tuple(edges))
