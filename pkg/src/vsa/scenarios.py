"""Scenario runners: power sweeps at an actor, network-wide maps, timing benchmarks."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytic import PowerChange, analytic_delta_v
from .feeder import PHASES, FeederModel, chain_feeder, load_feeder, with_configuration
from .oracle import perturb_and_observe, powerflow_solve
from .topology import path_index

CSV_HEADER = (
    "delta_p_w", "delta_q_var", "bus", "phase",
    "dv_analytic_re_pu", "dv_analytic_im_pu", "dv_oracle_re_pu", "dv_oracle_im_pu", "abs_err_pu",
)
BENCH_HEADER = ("n_buses", "analytic_median_s", "oracle_median_s", "speedup", "oracle_iterations")


def sweep_points(from_w: float, to_w: float, step_w: float) -> list[float]:
    """Inclusive arithmetic sweep; ``step_w`` must divide the range."""
    if step_w <= 0:
        raise ValueError("step must be positive")
    span = (to_w - from_w) / step_w
    n = round(span)
    if n < 0 or not math.isclose(span, n, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"step {step_w} does not divide the range [{from_w}, {to_w}]")
    return [from_w + k * step_w for k in range(n + 1)]


@dataclass
class ScenarioSpec:
    feeder: FeederModel | str | Path
    actor: str
    phase: str
    deltas_w: Sequence[float]
    observations: str | Sequence[str] = "all"
    q_var: float = 0.0
    configuration: str | None = None

    def load_model(self) -> FeederModel:
        model = self.feeder if isinstance(self.feeder, FeederModel) else load_feeder(self.feeder)
        if self.configuration is not None:
            model = with_configuration(model, self.configuration, [self.actor])
        if self.phase not in PHASES:
            raise ValueError(f"phase must be one of a, b, c, got {self.phase!r}")
        if self.phase not in model.bus(self.actor).phases:
            raise ValueError(f"bus {self.actor} has no phase {self.phase}")
        return model

    def observation_ids(self, model: FeederModel) -> list[str]:
        if isinstance(self.observations, str):
            if self.observations == "all":
                return model.bus_ids
            obs = [self.observations]
        else:
            obs = list(self.observations)
        for b in obs:
            model.bus(b)
        return obs


@dataclass(frozen=True)
class Row:
    delta_p_w: float
    delta_q_var: float
    bus: str
    phase: str
    dv_analytic: complex
    dv_oracle: complex

    @property
    def abs_err(self) -> float:
        return abs(self.dv_analytic - self.dv_oracle)

    def as_csv(self) -> list:
        a, o = self.dv_analytic, self.dv_oracle
        return [repr(self.delta_p_w), repr(self.delta_q_var), self.bus, self.phase,
                repr(a.real), repr(a.imag), repr(o.real), repr(o.imag), repr(self.abs_err)]


@dataclass
class ScenarioResult:
    rows: list[Row]
    summary: dict = field(default_factory=dict)

    def write_csv(self, out) -> None:
        """Write rows to a path or an open text stream."""
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        w = csv.writer(out)
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.as_csv())

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _evaluate(model, base, obs, change):
    t0 = time.perf_counter()
    analytic = {b: analytic_delta_v(model, base.state, b, change).dv_pu for b in obs}
    t1 = time.perf_counter()
    changes = [change] if any(change.delta_s) else []
    exact = perturb_and_observe(model, base, changes)
    t2 = time.perf_counter()
    return analytic, {b: exact[b].dv_pu for b in obs}, t1 - t0, t2 - t1


def _summarize(rows, t_analytic, t_oracle, base, n_points):
    errs = [r.abs_err for r in rows]
    return {
        "points": n_points,
        "rows": len(rows),
        "max_abs_err_pu": max(errs, default=0.0),
        "mean_abs_err_pu": statistics.fmean(errs) if errs else 0.0,
        "analytic_seconds": t_analytic,
        "oracle_seconds": t_oracle,
        "base_iterations": base.iterations,
    }


def run_sweep(spec: ScenarioSpec) -> ScenarioResult:
    """Analytic vs perturb-and-observe voltage change for each sweep point.

    Negative power values mean reduced consumption or increased injection.
    """
    model = spec.load_model()
    obs = spec.observation_ids(model)
    base = powerflow_solve(model)
    rows, t_a, t_o = [], 0.0, 0.0
    for p in spec.deltas_w:
        change = PowerChange.single_phase(spec.actor, spec.phase, p, spec.q_var)
        analytic, exact, da, do = _evaluate(model, base, obs, change)
        t_a += da
        t_o += do
        for b in obs:
            for k, ph in enumerate(PHASES):
                rows.append(Row(float(p), float(spec.q_var), b, ph,
                                complex(analytic[b][k]), complex(exact[b][k])))
    return ScenarioResult(rows, _summarize(rows, t_a, t_o, base, len(spec.deltas_w)))


def run_network_map(spec: ScenarioSpec) -> ScenarioResult:
    """Single perturbation observed at every bus, rows ordered by source-path depth."""
    if len(spec.deltas_w) != 1:
        raise ValueError("a network map takes exactly one power change")
    model = spec.load_model()
    idx = path_index(model)
    obs = sorted(spec.observation_ids(model), key=lambda b: (idx.depth[idx.index(b)], b))
    ordered = ScenarioSpec(model, spec.actor, spec.phase, spec.deltas_w, obs, spec.q_var)
    result = run_sweep(ordered)
    result.summary["depths"] = {b: int(idx.depth[idx.index(b)]) for b in obs}
    return result


@dataclass(frozen=True)
class BenchRow:
    n_buses: int
    analytic_median_s: float
    oracle_median_s: float
    oracle_iterations: int

    @property
    def speedup(self) -> float:
        return self.oracle_median_s / self.analytic_median_s


def _median_time(fn, repetitions):
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def run_benchmark(feeders: Sequence[int | str | Path | FeederModel],
                  repetitions: int = 100) -> list[BenchRow]:
    """Median wall time of one analytic query and one full power-flow solve per feeder.

    Integers are synthetic chain sizes. The analytic query observes the
    deepest bus with the deepest bus as actor (longest shared path); the
    path index and base operating point are built before timing.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    table = []
    for f in feeders:
        if isinstance(f, FeederModel):
            model = f
        elif isinstance(f, int):
            model = chain_feeder(f)
        else:
            model = load_feeder(f)
        idx = path_index(model)
        base = powerflow_solve(model)
        deepest = idx.ids[int(np.argmax(idx.depth))]
        phase = model.bus(deepest).phases[0]
        change = PowerChange.single_phase(deepest, phase, 1e3, 5e2)
        state = base.state
        analytic_delta_v(model, state, deepest, change)
        t_a = _median_time(lambda: analytic_delta_v(model, state, deepest, change), repetitions)
        t_o = _median_time(lambda: powerflow_solve(model), repetitions)
        table.append(BenchRow(len(model.buses), t_a, t_o, base.iterations))
    return table


def write_bench_csv(table: Sequence[BenchRow], out) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            return write_bench_csv(table, fh)
    w = csv.writer(out)
    w.writerow(BENCH_HEADER)
    for r in table:
        w.writerow([r.n_buses, repr(r.analytic_median_s), repr(r.oracle_median_s),
                    repr(r.speedup), r.oracle_iterations])


def plot_csv(csv_path, out_svg) -> None:
    """Render a sweep or map CSV as an SVG line chart of the real part of dv."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != CSV_HEADER:
        raise ValueError(f"{csv_path} is not a scenario CSV")
    sweep = len({r["delta_p_w"] for r in rows}) > 1
    fig, ax = plt.subplots(figsize=(8, 5))
    series: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        series.setdefault((r["bus"], r["phase"]), []).append(r)
    if sweep:
        for (bus, ph), rs in series.items():
            if all(float(r["dv_oracle_re_pu"]) == 0 for r in rs):
                continue
            x = [float(r["delta_p_w"]) / 1e3 for r in rs]
            line, = ax.plot(x, [float(r["dv_oracle_re_pu"]) for r in rs], label=f"{bus}.{ph} load flow")
            ax.plot(x, [float(r["dv_analytic_re_pu"]) for r in rs], "o", color=line.get_color(),
                    mfc="none", label=f"{bus}.{ph} analytic")
        ax.set_xlabel("power change (kW)")
    else:
        buses = list(dict.fromkeys(r["bus"] for r in rows))
        for ph in PHASES:
            rs = [series[(b, ph)][0] for b in buses]
            line, = ax.plot(range(len(buses)), [float(r["dv_oracle_re_pu"]) for r in rs],
                            label=f"phase {ph} load flow")
            ax.plot(range(len(buses)), [float(r["dv_analytic_re_pu"]) for r in rs], "x",
                    color=line.get_color(), label=f"phase {ph} analytic")
        ax.set_xticks(range(len(buses)), buses, rotation=60)
        ax.set_xlabel("observation bus")
    ax.set_ylabel("Re(dv) (pu)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_svg, format="svg")
    plt.close(fig)
