"""Classical samplers over :class:`~adrplan.qubo.QuboModel`.

All local-search methods use the single-bit-flip neighbourhood with cached
local fields, so evaluating a flip is O(1) and applying one is O(n).  Each
read draws from its own splitmix64 stream seeded from ``(seed, read_index)``,
which makes results independent of how reads are scheduled.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numba
import numpy as np

from .qubo import QuboError, QuboModel, energy

MAX_EXHAUSTIVE_VARS = 26
MAX_TENURE = 20
_EXHAUSTIVE_TIE_CAP = 1 << 20


class SolverError(ValueError):
    pass


@dataclass
class SolverConfig:
    seed: int = 0
    reads: int = 100
    sweeps: int = 1000
    tenure: int = MAX_TENURE
    beta_range: tuple[float, float] | None = None
    max_no_improve: int | None = None  # tabu; defaults to 4 * n_vars
    max_iterations: int | None = None  # tabu hard cap per read

    def __post_init__(self) -> None:
        if self.reads < 1:
            raise SolverError("reads must be at least 1")
        if self.sweeps < 1:
            raise SolverError("sweeps must be at least 1")
        if not 1 <= self.tenure <= MAX_TENURE:
            raise SolverError(f"tenure must lie in 1..{MAX_TENURE}")
        if self.beta_range is not None:
            lo, hi = self.beta_range
            if lo <= 0 or hi <= 0:
                raise SolverError("beta_range bounds must be positive")
            self.beta_range = (float(lo), float(hi))
        if not 0 <= self.seed < 2**64:
            raise SolverError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["beta_range"] is not None:
            d["beta_range"] = list(d["beta_range"])
        return d


@dataclass
class Sample:
    bits: np.ndarray
    energy: float
    occurrences: int = 1

    @property
    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


@dataclass
class SampleSet:
    samples: list[Sample]
    solver: str
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def first(self) -> Sample:
        return self.samples[0]

    @property
    def total_occurrences(self) -> int:
        return sum(s.occurrences for s in self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "config": self.config,
            "wall_time": self.wall_time,
            "info": {k: v for k, v in self.info.items() if k != "traces"},
            "samples": [
                {"bits": s.bitstring, "energy": s.energy, "occurrences": s.occurrences}
                for s in self.samples
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SampleSet":
        samples = [
            Sample(
                bits=np.frombuffer(s["bits"].encode(), dtype=np.uint8) - ord("0"),
                energy=float(s["energy"]),
                occurrences=int(s["occurrences"]),
            )
            for s in doc["samples"]
        ]
        return cls(
            samples=samples,
            solver=doc["solver"],
            wall_time=float(doc.get("wall_time", 0.0)),
            config=doc.get("config", {}),
            info=doc.get("info", {}),
        )


def aggregate(
    model: QuboModel,
    states: np.ndarray,
    solver: str,
    wall_time: float,
    config: dict,
    info: dict | None = None,
) -> SampleSet:
    """Collapse per-read states into unique samples sorted by energy then bits."""
    states = np.asarray(states, dtype=np.uint8)
    uniq, counts = np.unique(states, axis=0, return_counts=True)
    samples = [Sample(row.copy(), energy(model, row), int(cnt)) for row, cnt in zip(uniq, counts)]
    samples.sort(key=lambda s: (s.energy, s.bitstring))
    return SampleSet(samples, solver, wall_time, config, info or {})


def read_seeds(seed: int, reads: int) -> np.ndarray:
    """One 64-bit stream seed per read, derived from the master seed and read index."""
    return np.array(
        [
            np.random.SeedSequence(seed, spawn_key=(r,)).generate_state(1, np.uint64)[0]
            for r in range(reads)
        ],
        dtype=np.uint64,
    )


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U63 = np.uint64(63)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True)
def _next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


@numba.njit(cache=True)
def _uniform(state):
    return float(_next_u64(state) >> _U11) * _INV53


@numba.njit(cache=True)
def _random_state(state, x):
    for k in range(x.shape[0]):
        x[k] = np.uint8(_next_u64(state) >> _U63)


@numba.njit(cache=True)
def _fields(linear, coupling, x, h):
    n = x.shape[0]
    for k in range(n):
        h[k] = linear[k]
    for l in range(n):
        if x[l]:
            row = coupling[l]
            for k in range(n):
                h[k] += row[k]


@numba.njit(cache=True)
def _relative_energy(linear, coupling, x):
    n = x.shape[0]
    e = 0.0
    for k in range(n):
        if x[k]:
            e += linear[k]
            row = coupling[k]
            for l in range(k + 1, n):
                if x[l]:
                    e += row[l]
    return e


@numba.njit(cache=True)
def _flip(coupling, x, h, k):
    row = coupling[k]
    if x[k]:
        x[k] = 0
        for l in range(x.shape[0]):
            h[l] -= row[l]
    else:
        x[k] = 1
        for l in range(x.shape[0]):
            h[l] += row[l]


@numba.njit(cache=True)
def _descend(linear, coupling, x):
    n = x.shape[0]
    h = np.empty(n)
    _fields(linear, coupling, x, h)
    while True:
        best_k = -1
        best_d = 0.0
        for k in range(n):
            d = h[k] if x[k] == 0 else -h[k]
            if d < best_d:
                best_d = d
                best_k = k
        if best_k < 0:
            return
        _flip(coupling, x, h, best_k)


@numba.njit(cache=True)
def _anneal(linear, coupling, betas, seeds, init, use_init, out, traces, record):
    n = linear.shape[0]
    sweeps = betas.shape[0]
    rng = np.empty(1, dtype=np.uint64)
    x = np.empty(n, dtype=np.uint8)
    h = np.empty(n)
    for r in range(seeds.shape[0]):
        rng[0] = seeds[r]
        if use_init:
            x[:] = init[r]
        else:
            _random_state(rng, x)
        _fields(linear, coupling, x, h)
        e = _relative_energy(linear, coupling, x)
        best = e
        for s in range(sweeps):
            beta = betas[s]
            for k in range(n):
                d = h[k] if x[k] == 0 else -h[k]
                if d > 0.0:
                    bd = beta * d
                    # exp(-40) ~ 4e-18: treat as a certain rejection without a draw
                    if bd > 40.0 or _uniform(rng) >= math.exp(-bd):
                        continue
                _flip(coupling, x, h, k)
                e += d
            if record:
                if e < best:
                    best = e
                traces[r, s] = best
        out[r, :] = x


@numba.njit(cache=True)
def _tabu(linear, coupling, seeds, tenure, max_stall, max_iter, out):
    n = linear.shape[0]
    rng = np.empty(1, dtype=np.uint64)
    x = np.empty(n, dtype=np.uint8)
    h = np.empty(n)
    until = np.zeros(n, dtype=np.int64)
    scale = 0.0
    for k in range(n):
        scale = max(scale, abs(linear[k]))
    tol = 1e-12 * max(scale, 1.0)
    for r in range(seeds.shape[0]):
        rng[0] = seeds[r]
        _random_state(rng, x)
        _fields(linear, coupling, x, h)
        e = _relative_energy(linear, coupling, x)
        best_e = e
        out[r, :] = x
        until[:] = 0
        stall = 0
        it = 0
        while stall < max_stall and it < max_iter:
            pick = -1
            pick_d = 0.0
            ties = 0
            for k in range(n):
                d = h[k] if x[k] == 0 else -h[k]
                if until[k] > it and not (e + d < best_e - tol):
                    continue
                if pick < 0 or d < pick_d:
                    pick, pick_d, ties = k, d, 1
                elif d == pick_d:
                    ties += 1
                    if _next_u64(rng) % np.uint64(ties) == np.uint64(0):
                        pick = k
            if pick < 0:
                break
            _flip(coupling, x, h, pick)
            e += pick_d
            until[pick] = it + 1 + tenure
            it += 1
            if e < best_e - tol:
                best_e = e
                out[r, :] = x
                stall = 0
            else:
                stall += 1


@numba.njit(cache=True)
def _enumerate(linear, coupling, tol, ties_out):
    n = linear.shape[0]
    x = np.zeros(n, dtype=np.uint8)
    h = linear.copy()
    e = 0.0
    best = 0.0
    code = np.int64(0)
    ties_out[0] = 0
    count = 1
    total = np.int64(1) << n
    for g in range(1, total):
        k = 0
        while ((g >> k) & 1) == 0:
            k += 1
        d = h[k] if x[k] == 0 else -h[k]
        _flip(coupling, x, h, k)
        e += d
        code ^= np.int64(1) << k
        if e < best - tol:
            best = e
            count = 0
        if abs(e - best) <= tol:
            if count < ties_out.shape[0]:
                ties_out[count] = code
            count += 1
    return best, count


# --------------------------------------------------------------------------
# Public samplers
# --------------------------------------------------------------------------


def _check_initial(model: QuboModel, initial) -> np.ndarray:
    x = np.asarray(initial)
    if x.ndim != 1 or x.shape[0] != model.n_vars:
        raise QuboError(f"initial state must have {model.n_vars} bits, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise QuboError("initial state entries must be 0 or 1")
    return x.astype(np.uint8).copy()


def steepest_descent(model: QuboModel, initial: Sequence[int] | np.ndarray) -> Sample:
    """Greedy single-flip descent to a local minimum (ties go to the lowest index)."""
    x = _check_initial(model, initial)
    _descend(model.linear, model.coupling, x)
    return Sample(x, energy(model, x), 1)


def steepest_descent_sampler(
    model: QuboModel,
    config: SolverConfig,
    initial_states: np.ndarray | None = None,
) -> SampleSet:
    """Steepest descent from ``config.reads`` seeded random (or given) starts."""
    t0 = time.perf_counter()
    if initial_states is None:
        states = np.empty((config.reads, model.n_vars), dtype=np.uint8)
        rng = np.empty(1, dtype=np.uint64)
        for r, seed in enumerate(read_seeds(config.seed, config.reads)):
            rng[0] = seed
            _random_state(rng, states[r])
    else:
        states = np.array([_check_initial(model, s) for s in initial_states], dtype=np.uint8)
    for r in range(states.shape[0]):
        _descend(model.linear, model.coupling, states[r])
    return aggregate(model, states, "steepest_descent", time.perf_counter() - t0, config.to_dict())


def default_beta_range(model: QuboModel) -> tuple[float, float]:
    """Hot end accepts the largest single-flip rise with probability 1/2,
    cold end accepts the smallest nonzero rise with probability 1/100."""
    hi, lo = model.single_flip_bounds()
    if hi <= 0.0:
        return 1.0, 1.0
    return math.log(2.0) / hi, math.log(100.0) / lo


def beta_schedule(beta_range: tuple[float, float], sweeps: int) -> np.ndarray:
    return np.geomspace(beta_range[0], beta_range[1], sweeps)


def simulated_annealing(
    model: QuboModel,
    config: SolverConfig,
    initial_states: np.ndarray | None = None,
    record_traces: bool = False,
) -> SampleSet:
    """Metropolis annealing over a geometric inverse-temperature schedule.

    Each sweep proposes one flip per variable in index order.  Returns the
    final state of every read.  With ``record_traces`` the per-read
    best-so-far energy after each sweep (offset excluded) is stored in
    ``info["traces"]``.
    """
    t0 = time.perf_counter()
    beta_range = config.beta_range or default_beta_range(model)
    betas = beta_schedule(beta_range, config.sweeps)
    n = model.n_vars
    if initial_states is not None:
        init = np.array([_check_initial(model, s) for s in initial_states], dtype=np.uint8)
        if init.shape[0] != config.reads:
            raise SolverError("need exactly one initial state per read")
    else:
        init = np.zeros((1, n), dtype=np.uint8)
    out = np.empty((config.reads, n), dtype=np.uint8)
    traces = np.empty((config.reads, config.sweeps) if record_traces else (1, 1))
    _anneal(
        model.linear,
        model.coupling,
        betas,
        read_seeds(config.seed, config.reads),
        init,
        initial_states is not None,
        out,
        traces,
        record_traces,
    )
    info: dict[str, Any] = {"beta_range": list(beta_range)}
    if record_traces:
        info["traces"] = traces
    return aggregate(model, out, "simulated_annealing", time.perf_counter() - t0, config.to_dict(), info)


def tabu_search(model: QuboModel, config: SolverConfig) -> SampleSet:
    """Tabu search with flip-recency tabu attributes and best-ever aspiration.

    A read stops after ``max_no_improve`` consecutive iterations without a
    new best (default ``4 * n_vars``) and reports its best state.
    """
    t0 = time.perf_counter()
    n = model.n_vars
    tenure = min(config.tenure, max(n - 1, 0))
    stall = config.max_no_improve if config.max_no_improve is not None else 4 * n
    cap = config.max_iterations if config.max_iterations is not None else np.iinfo(np.int64).max
    out = np.empty((config.reads, n), dtype=np.uint8)
    _tabu(
        model.linear,
        model.coupling,
        read_seeds(config.seed, config.reads),
        tenure,
        stall,
        cap,
        out,
    )
    return aggregate(model, out, "tabu_search", time.perf_counter() - t0, config.to_dict())


def integer_to_bits(value: int, n_vars: int) -> np.ndarray:
    """Little-endian decoding: bit ``b`` of ``value`` is variable ``b``."""
    return np.array([(value >> b) & 1 for b in range(n_vars)], dtype=np.uint8)


def bits_to_integer(bits: Sequence[int] | np.ndarray) -> int:
    return sum(int(b) << k for k, b in enumerate(bits))


def exhaustive_minimum(model: QuboModel, max_vars: int = MAX_EXHAUSTIVE_VARS) -> SampleSet:
    """Enumerate all ``2**n`` states and return every global minimiser."""
    n = model.n_vars
    if n > max_vars:
        raise SolverError(f"exhaustive search is limited to {max_vars} variables; model has {n}")
    t0 = time.perf_counter()
    scale = float(np.abs(model.linear).sum() + 0.5 * np.abs(model.coupling).sum())
    tol = 1e-9 * max(scale, 1.0)
    ties = np.empty(_EXHAUSTIVE_TIE_CAP, dtype=np.int64)
    if n == 0:
        best, count = 0.0, 1
        ties[0] = 0
    else:
        best, count = _enumerate(model.linear, model.coupling, tol, ties)
    if count > ties.shape[0]:
        raise SolverError(f"{count} states tie for the minimum; more than can be listed")
    codes = np.sort(ties[:count])
    states = np.array([integer_to_bits(int(c), n) for c in codes], dtype=np.uint8).reshape(count, n)
    exact = np.array([energy(model, s) for s in states])
    keep = exact <= exact.min() + 1e-12 * max(1.0, abs(exact.min()))
    samples = [Sample(states[i], float(exact[i]), 1) for i in np.flatnonzero(keep)]
    info = {"states_enumerated": 2**n, "minimizer_integers": [int(c) for c in codes[keep]]}
    return SampleSet(samples, "exhaustive", time.perf_counter() - t0, {"max_vars": max_vars}, info)


def landscape_scan(
    model: QuboModel,
    start: int,
    stop: int,
    stride: int = 1,
    max_points: int = 10_000_000,
) -> list[tuple[int, float]]:
    """Energies of the integer-encoded states ``range(start, stop, stride)``."""
    n = model.n_vars
    if stride < 1:
        raise SolverError("stride must be at least 1")
    if not 0 <= start < stop <= 2**n:
        raise SolverError(f"need 0 <= start < stop <= 2**{n}")
    count = len(range(start, stop, stride))
    if count > max_points:
        raise SolverError(f"scan of {count} points exceeds the limit of {max_points}")
    return [(v, energy(model, integer_to_bits(v, n))) for v in range(start, stop, stride)]
