"""Mission plans: bit-vector encoding/decoding, constraint checks and the path oracle.

The checks here work on the tour itself (edge counts, flow balance, visit
times) and never look at the expanded QUBO, so they can be used to audit it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .orbits import ProblemInstance
from .qubo import VariableRegistry

DEFAULT_ORACLE_GUARD = 10_000_000


class InvalidSolution(ValueError):
    """Raised when a bit vector does not encode a valid tour."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("bit vector violates constraints: " + ", ".join(report.failed()))


class OracleGuardExceeded(ValueError):
    def __init__(self, candidates: int, guard: int):
        self.candidates = candidates
        self.guard = guard
        super().__init__(f"{candidates} candidate sequences exceed the oracle guard of {guard}")


@dataclass
class MissionPlan:
    sequence: list[int]
    labels: list[str]
    arrival_times: list[float]  # one per visited debris, then the return to the dummy node
    transfer_costs: list[float]  # legs between consecutive real debris
    disposal_costs: list[float]
    t_max: float
    t_s: float

    @property
    def total_transfer(self) -> float:
        return float(sum(self.transfer_costs))

    @property
    def total_disposal(self) -> float:
        return float(sum(self.disposal_costs))

    @property
    def total(self) -> float:
        return self.total_transfer + self.total_disposal

    @property
    def duration(self) -> float:
        """Arrival time at the last real debris."""
        return self.arrival_times[len(self.sequence) - 1]

    @property
    def margin(self) -> float:
        return self.t_max - self.duration


@dataclass
class ConstraintVerdict:
    passed: bool
    details: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    verdicts: dict[str, ConstraintVerdict]

    @property
    def valid(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def failed(self) -> list[str]:
        return [k for k, v in self.verdicts.items() if not v.passed]

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "constraints": {
                k: {"passed": v.passed, "details": v.details} for k, v in self.verdicts.items()
            },
        }

    def render(self) -> str:
        lines = []
        for key, verdict in self.verdicts.items():
            status = "pass" if verdict.passed else "FAIL"
            lines.append(f"{key.upper():<3} {status}")
            lines.extend(f"      {d}" for d in verdict.details)
        lines.append("valid" if self.valid else "INVALID")
        return "\n".join(lines)


def _bits(bits, reg: VariableRegistry) -> np.ndarray:
    b = np.asarray(bits)
    if b.ndim != 1 or b.shape[0] != reg.n_vars:
        raise ValueError(f"expected {reg.n_vars} bits, got shape {b.shape}")
    return b.astype(np.int64)


def validate(bits: Sequence[int] | np.ndarray, instance: ProblemInstance) -> ValidationReport:
    reg = VariableRegistry(instance.n_t)
    b = _bits(bits, reg)
    X = reg.edge_matrix(b)
    s4, s5 = reg.slacks(b)
    n = instance.n_t + 1
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and X[i, j]]
    v: dict[str, ConstraintVerdict] = {}

    want = instance.n_s + 1
    v["c1"] = ConstraintVerdict(
        len(edges) == want,
        [] if len(edges) == want else [f"{len(edges)} edges selected, need {want}"],
    )
    dep0 = [j for (i, j) in edges if i == 0]
    arr0 = [i for (i, j) in edges if j == 0]
    v["c2"] = ConstraintVerdict(len(dep0) == 1, [] if len(dep0) == 1 else [f"dummy departures to {dep0}"])
    v["c3"] = ConstraintVerdict(len(arr0) == 1, [] if len(arr0) == 1 else [f"dummy arrivals from {arr0}"])

    for key, slack, degree in (("c4", s4, X.sum(axis=1)), ("c5", s5, X.sum(axis=0))):
        word = "departures" if key == "c4" else "arrivals"
        details = [
            f"node {i}: {degree[i]} {word}, slack {slack[i - 1]}"
            for i in range(1, n)
            if degree[i] + slack[i - 1] != 1
        ]
        v[key] = ConstraintVerdict(not details, details)

    in_deg, out_deg = X.sum(axis=0), X.sum(axis=1)
    details = [
        f"node {j}: {in_deg[j]} arrivals vs {out_deg[j]} departures"
        for j in range(1, n)
        if in_deg[j] != out_deg[j]
    ]
    v["c6"] = ConstraintVerdict(not details, details)

    details = [f"edges {i}->{j} and {j}->{i}" for (i, j) in edges if i < j and X[j, i]]
    v["c7"] = ConstraintVerdict(not details, details)

    T, t_s = instance.T, instance.t_s
    details = []
    for (i, j) in edges:
        if j == 0:
            continue
        for k in range(n):
            if k in (i, j) or not X[j, k]:
                continue
            if T[i, j] + t_s > T[j, k]:
                details.append(
                    f"triple ({i},{j},{k}): arrive {T[i, j]:g} + service {t_s:g} > depart {T[j, k]:g}"
                )
    v["c8"] = ConstraintVerdict(not details, details)
    return ValidationReport(v)


def _plan(sequence: Sequence[int], instance: ProblemInstance) -> MissionPlan:
    path = [0, *sequence, 0]
    arrivals = [float(instance.T[a, b]) for a, b in zip(path, path[1:])]
    return MissionPlan(
        sequence=list(sequence),
        labels=[instance.labels[i - 1] for i in sequence],
        arrival_times=arrivals,
        transfer_costs=[float(instance.C[a, b]) for a, b in zip(sequence, sequence[1:])],
        disposal_costs=[float(instance.c[i]) for i in sequence],
        t_max=instance.t_max,
        t_s=instance.t_s,
    )


def decode(bits: Sequence[int] | np.ndarray, instance: ProblemInstance) -> MissionPlan:
    """Turn a valid bit vector into the tour it encodes."""
    report = validate(bits, instance)
    if not report.valid:
        raise InvalidSolution(report)
    reg = VariableRegistry(instance.n_t)
    X = reg.edge_matrix(_bits(bits, reg))
    sequence: list[int] = []
    node = int(np.flatnonzero(X[0])[0])
    while node != 0 and len(sequence) <= instance.n_t:
        sequence.append(node)
        node = int(np.flatnonzero(X[node])[0])
    if len(sequence) != instance.n_s:
        # edges outside the main tour form a detached loop (possible only with t_s == 0)
        report.verdicts["c1"].details.append(
            f"tour from node 0 visits {len(sequence)} debris; the remaining edges form a detached loop"
        )
        report.verdicts["c1"].passed = False
        raise InvalidSolution(report)
    return _plan(sequence, instance)


def encode(sequence: Sequence[int], instance: ProblemInstance) -> np.ndarray:
    seq = [int(s) for s in sequence]
    if len(set(seq)) != len(seq):
        raise ValueError(f"sequence {seq} repeats a debris index")
    if any(not 1 <= s <= instance.n_t for s in seq):
        raise ValueError(f"sequence {seq} has indices outside 1..{instance.n_t}")
    if not seq:
        raise ValueError("sequence is empty")
    reg = VariableRegistry(instance.n_t)
    bits = np.zeros(reg.n_vars, dtype=np.uint8)
    path = [0, *seq, 0]
    for a, b in zip(path, path[1:]):
        bits[reg.edge(a, b)] = 1
    visited = set(seq)
    for i in range(1, instance.n_t + 1):
        if i not in visited:
            bits[reg.s4(i)] = bits[reg.s5(i)] = 1
    return bits


def count_paths(n_t: int, n_s: int) -> int:
    """Ordered selections of ``n_s`` out of ``n_t`` debris: ``n_t! / (n_t - n_s)!``."""
    if not 1 <= n_s <= n_t:
        raise ValueError(f"need 1 <= n_s <= n_t, got n_s={n_s}, n_t={n_t}")
    return math.perm(n_t, n_s)


@dataclass(frozen=True)
class OracleSolution:
    sequence: tuple[int, ...]
    cost: float
    arrival_times: tuple[float, ...]


def oracle_enumerate(
    instance: ProblemInstance,
    guard: int = DEFAULT_ORACLE_GUARD,
) -> list[OracleSolution]:
    """All timing-feasible tours, cheapest first (ties by sequence).

    A tour ``0 -> s1 -> ... -> sN -> 0`` is feasible when each arrival time
    plus the servicing time does not exceed the next departure's alignment
    time, including the final return whose time is ``t_max``.  Partial
    sequences that already break the chain are pruned, which does not
    change the result.
    """
    candidates = count_paths(instance.n_t, instance.n_s)
    if candidates > guard:
        raise OracleGuardExceeded(candidates, guard)
    T, C, c, t_s = instance.T, instance.C, instance.c, instance.t_s
    n_s = instance.n_s
    found: list[OracleSolution] = []

    def extend(seq: list[int], prev: int, arrived: float, cost: float) -> None:
        node = seq[-1]
        if len(seq) == n_s:
            # a single-target tour has no triple of distinct nodes to check
            if n_s == 1 or arrived + t_s <= T[node, 0]:
                times = tuple(float(T[a, b]) for a, b in zip([0, *seq], [*seq, 0]))
                found.append(OracleSolution(tuple(seq), cost + C[node, 0] + c[node], times))
            return
        for nxt in range(1, instance.n_t + 1):
            if nxt in seq:
                continue
            if arrived + t_s <= T[node, nxt]:
                seq.append(nxt)
                extend(seq, node, float(T[node, nxt]), cost + C[node, nxt] + c[node])
                seq.pop()

    for first in range(1, instance.n_t + 1):
        extend([first], 0, float(T[0, first]), float(C[0, first] + c[0]))
    found.sort(key=lambda s: (s.cost, s.sequence))
    return found


def plan_report(plan: MissionPlan) -> dict:
    legs = []
    for k in range(len(plan.sequence) - 1):
        legs.append(
            {
                "from": plan.labels[k],
                "to": plan.labels[k + 1],
                "depart_leg": f"{k + 1}-{k + 2}",
                "arrival_day": plan.arrival_times[k + 1],
                "transfer_cost": plan.transfer_costs[k],
            }
        )
    return {
        "sequence": plan.sequence,
        "targets": plan.labels,
        "arrival_times": plan.arrival_times,
        "legs": legs,
        "transfer_costs": plan.transfer_costs,
        "disposal_costs": plan.disposal_costs,
        "total_transfer": plan.total_transfer,
        "total_disposal": plan.total_disposal,
        "total": plan.total,
        "duration": plan.duration,
        "deadline": plan.t_max,
        "margin": plan.margin,
    }


def format_plan(plan: MissionPlan, unit: str = "m/s") -> str:
    """Plain-text breakdown: targets, costs, and leg arrival days."""
    lines = ["Targets, in order:"]
    lines += [f"  {k}. {label}" for k, label in enumerate(plan.labels, start=1)]
    lines += [
        "Propellant cost:",
        f"  Transfer cost: {plan.total_transfer:g} {unit}",
        f"  Disposal cost: {plan.total_disposal:g} {unit}",
        f"  Total cost:    {plan.total:g} {unit}",
    ]
    if len(plan.sequence) > 1:
        lines.append("Transfer times (days from reference date):")
        lines += [
            f"  {k}-{k + 1}: {plan.arrival_times[k]:g}" for k in range(1, len(plan.sequence))
        ]
    lines.append(
        f"Duration: {plan.duration:g} days (deadline {plan.t_max:g}, margin {plan.margin:g})"
    )
    return "\n".join(lines)


def valid_fraction(samples, instance: ProblemInstance) -> float:
    """Share of reads (weighted by occurrences) whose state passes every constraint."""
    total = valid = 0
    for s in samples:
        total += s.occurrences
        if validate(s.bits, instance).valid:
            valid += s.occurrences
    return valid / total if total else 0.0
