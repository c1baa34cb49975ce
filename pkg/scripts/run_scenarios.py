"""Run both validation scenarios and the timing benchmark on the bundled feeder.

Writes CSVs and SVG charts to results/ (or the directory given as argv[1]).
Scenario 1: phase-c real power at 707 swept over +/-42 kW in 7 kW steps,
observed at 704 (sibling lateral). Scenario 2: +21 kW on 707 phase c,
observed at every bus.
"""

import json
import sys
from pathlib import Path

import numpy as np

from vsa.feeder import bundled_feeder
from vsa.scenarios import (ScenarioSpec, plot_csv, run_benchmark, run_network_map, run_sweep,
                           sweep_points, write_bench_csv)


def main(out_dir="results"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    feeder = bundled_feeder()

    sweep = run_sweep(ScenarioSpec(feeder, "707", "c", sweep_points(-42e3, 42e3, 7e3), ["704"]))
    sweep.write_csv(out / "sweep_707c_obs704.csv")
    plot_csv(out / "sweep_707c_obs704.csv", out / "sweep_707c_obs704.svg")
    ratios = []
    for p in {r.delta_p_w for r in sweep.rows} - {0.0}:
        by = {r.phase: abs(r.dv_oracle) for r in sweep.rows if r.delta_p_w == p}
        ratios.append(by["c"] / by["a"])
    print("sweep:", json.dumps(sweep.summary))
    print(f"same-phase / cross-phase (a) ratio at 704: {np.mean(ratios):.2f}")

    net = run_network_map(ScenarioSpec(feeder, "707", "c", [21e3]))
    net.write_csv(out / "map_707c_21kw.csv")
    plot_csv(out / "map_707c_21kw.csv", out / "map_707c_21kw.svg")
    acc = [1 - r.abs_err / abs(r.dv_oracle) for r in net.rows
           if r.phase == "c" and abs(r.dv_oracle) > 1e-9]
    print("map:", json.dumps({k: v for k, v in net.summary.items() if k != "depths"}))
    print(f"same-phase relative accuracy: min {min(acc):.3%}")

    table = run_benchmark([37, 74, 148, 370])
    write_bench_csv(table, out / "bench.csv")
    for r in table:
        print(f"n={r.n_buses:4d}  analytic {r.analytic_median_s * 1e6:7.1f} us  "
              f"load flow {r.oracle_median_s * 1e3:7.2f} ms  x{r.speedup:.0f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
