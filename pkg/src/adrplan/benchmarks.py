"""Bundled artificial instances with N_t = 2..11 debris.

Sizes 2, 3, 4 and 6 carry the published tables.  The others pad the N_t = 4
core with nodes whose alignment times (7.1) miss the deadline and whose costs
(10) are high, so every size from 4 up shares the same four feasible tours.
"""

from __future__ import annotations

import json
from importlib import resources

from .orbits import ProblemInstance

SIZES = tuple(range(2, 12))

# feasible tours and costs shared by every instance with N_t >= 4
REFERENCE_SOLUTIONS = {(1, 3, 4): 10.0, (1, 2, 3): 11.0, (2, 1, 3): 12.0, (1, 3, 2): 13.0}


def benchmark_path(n_t: int):
    if n_t not in SIZES:
        raise KeyError(f"no bundled instance with n_t={n_t}; available: {SIZES}")
    return resources.files("adrplan") / "data" / "benchmarks" / f"nt{n_t:02d}.json"


def load_benchmark(n_t: int) -> ProblemInstance:
    with benchmark_path(n_t).open(encoding="utf-8") as fh:
        return ProblemInstance.from_dict(json.load(fh))
