"""Regenerate the bundled artificial instances (src/adrplan/data/benchmarks).

N_t = 2, 3, 4 and 6 are the published tables.  Every other size pads the
N_t = 4 core with nodes whose alignment times (7.1) miss the deadline of 7 and
whose costs (10) dominate, which keeps the feasible set of the N_t = 4 case.
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "adrplan" / "data" / "benchmarks"

SMALL = {
    2: dict(n_s=2, T=[[0, 2], [2, 0]], C=[[0, 1], [1, 0]], c=[1, 6]),
    3: dict(
        n_s=3,
        T=[[0, 2, 4], [2, 0, 6], [4, 6, 0]],
        C=[[0, 1, 3], [1, 0, 2], [3, 2, 0]],
        c=[1, 6, 1],
    ),
}

CORE_T = [[0, 2, 4, 7.1], [2, 0, 6, 7.1], [4, 6, 0, 6], [7.1, 7.1, 6, 0]]
CORE_C = [[0, 1, 3, 0.5], [1, 0, 2, 0.5], [3, 2, 0, 3], [0.5, 0.5, 3, 0]]
CORE_c = [1, 6, 1, 2]


def padded(n_t: int) -> dict:
    T = [[7.1 if i != j else 0 for j in range(n_t)] for i in range(n_t)]
    C = [[10 if i != j else 0 for j in range(n_t)] for i in range(n_t)]
    c = [10] * n_t
    for i in range(4):
        c[i] = CORE_c[i]
        for j in range(4):
            T[i][j] = CORE_T[i][j]
            C[i][j] = CORE_C[i][j]
    return dict(n_s=3, T=T, C=C, c=c)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for n_t in range(2, 12):
        tables = SMALL.get(n_t) or padded(n_t)
        doc = {
            "format": "adr-instance",
            "version": 1,
            "dummy_included": False,
            "n_t": n_t,
            "n_s": tables["n_s"],
            "t_max": 7,
            "t_s": 1,
            "labels": [str(i) for i in range(1, n_t + 1)],
            "T": tables["T"],
            "C": tables["C"],
            "c": tables["c"],
        }
        (OUT / f"nt{n_t:02d}.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
