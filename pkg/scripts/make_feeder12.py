"""Regenerate the bundled 12-bus unbalanced test feeders in src/vsa/data/.

Line configurations use IEEE 37-bus style underground cable impedances
(ohm/mile); span lengths and loads are synthetic.
"""

import json
from pathlib import Path

import numpy as np

from vsa.feeder import PHASE_INDEX

FT_PER_MILE = 5280.0

CONFIGS = {
    "721": [[0.2926 + 0.1973j, 0.0673 - 0.0368j, 0.0337 - 0.0417j],
            [0.0673 - 0.0368j, 0.2646 + 0.1900j, 0.0673 - 0.0368j],
            [0.0337 - 0.0417j, 0.0673 - 0.0368j, 0.2926 + 0.1973j]],
    "722": [[0.4751 + 0.2973j, 0.1629 - 0.0326j, 0.1234 - 0.0607j],
            [0.1629 - 0.0326j, 0.4488 + 0.2678j, 0.1629 - 0.0326j],
            [0.1234 - 0.0607j, 0.1629 - 0.0326j, 0.4751 + 0.2973j]],
    "723": [[1.2936 + 0.6713j, 0.4871 + 0.2111j, 0.4585 + 0.1521j],
            [0.4871 + 0.2111j, 1.3022 + 0.6326j, 0.4871 + 0.2111j],
            [0.4585 + 0.1521j, 0.4871 + 0.2111j, 1.2936 + 0.6713j]],
    "724": [[2.0952 + 0.7758j, 0.5204 + 0.2738j, 0.4926 + 0.2123j],
            [0.5204 + 0.2738j, 2.1068 + 0.7398j, 0.5204 + 0.2738j],
            [0.4926 + 0.2123j, 0.5204 + 0.2738j, 2.0952 + 0.7758j]],
}

BUSES = {
    "sub": "abc", "701": "abc", "702": "abc", "703": "abc", "704": "abc", "705": "ac",
    "706": "abc", "707": "abc", "708": "abc", "709": "b", "710": "abc", "711": "bc",
}

# (from, to, config, length ft)
EDGES = [
    ("sub", "701", "721", 1850), ("701", "702", "722", 960), ("702", "703", "723", 1320),
    ("703", "704", "724", 600), ("703", "705", "724", 400), ("702", "706", "723", 800),
    ("706", "707", "724", 920), ("707", "708", "724", 280), ("706", "709", "724", 520),
    ("sub", "710", "723", 1200), ("710", "711", "724", 600),
]

# per-phase kW + j kvar
LOADS = {
    "701": (42 + 21j, 0, 42 + 21j),
    "702": (21 + 10j, 0, 0),
    "703": (0, 42 + 21j, 0),
    "704": (85 + 40j, 42 + 21j, 42 + 21j),
    "705": (42 + 21j, 0, 85 + 40j),
    "707": (42 + 21j, 42 + 21j, 42 + 21j),
    "708": (21 + 10j, 0, 42 + 21j),
    "709": (0, 85 + 40j, 0),
    "710": (42 + 21j, 42 + 21j, 85 + 40j),
    "711": (0, 42 + 21j, 42 + 21j),
}


def edge_matrix(a, b, config, length_ft):
    carried = [PHASE_INDEX[p] for p in BUSES[a] if p in BUSES[b]]
    z = np.zeros((3, 3), dtype=complex)
    full = np.array(CONFIGS[config]) * (length_ft / FT_PER_MILE)
    for i in carried:
        for j in carried:
            z[i, j] = full[i, j]
    return [[[round(x.real, 10), round(x.imag, 10)] for x in row] for row in z]


def feeder_doc(delta: bool):
    buses = []
    for bid, phases in BUSES.items():
        d = {"id": bid, "phases": list(phases)}
        if bid in LOADS:
            s = LOADS[bid]
            conf = "star"
            if delta and len(phases) >= 2:
                conf = "delta"
                if len(phases) == 2:
                    # a two-phase bus hosts a single branch: ab, bc or ca
                    branch = {"ab": 0, "bc": 1, "ac": 2}[phases]
                    total = sum(complex(x) for x in s)
                    s = tuple(total if i == branch else 0 for i in range(3))
            d["load"] = {"configuration": conf,
                         "s_va": [[complex(x).real * 1e3, complex(x).imag * 1e3] for x in s]}
        buses.append(d)
    return {
        "source": "sub",
        "nominal_voltage_v": 4800.0,
        "buses": buses,
        "edges": [{"from": a, "to": b, "z_ohm": edge_matrix(a, b, c, L)} for a, b, c, L in EDGES],
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "src" / "vsa" / "data"
    for name, delta in (("feeder12", False), ("feeder12_delta", True)):
        (out / f"{name}.json").write_text(json.dumps(feeder_doc(delta), indent=1) + "\n")
        print("wrote", out / f"{name}.json")
