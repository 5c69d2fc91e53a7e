"""QUBO assembly for the debris-selection problem.

Variables are the directed edges ``x[i,j]`` of the complete graph on the dummy
node 0 plus ``n_t`` real debris, followed by one slack per real node for the
"at most one departure" (``s4[i]``) and "at most one arrival" (``s5[i]``)
constraints.  The model is

    F = L_H * H + sum_k L_k * C_k ,   k = 1..8

with the squared penalties expanded using ``x*x == x`` into linear terms,
pair couplings and a constant offset.  The offset is kept so that energies of
feasible vectors read directly as mission cost when ``L_H == 1``.

Storage is dense (a symmetric coupling matrix and a linear vector).  The
edge-count penalty couples every pair of edge variables, so for these models a
"sparse" map would hold nearly all ``n*(n-1)/2`` pairs anyway.
"""

from __future__ import annotations

import io
import json
import re
from dataclasses import asdict, dataclass
from typing import Iterator, Mapping, Sequence, TextIO

import numpy as np

from .orbits import ProblemInstance


class QuboError(ValueError):
    pass


# --------------------------------------------------------------------------
# Variable registry
# --------------------------------------------------------------------------

_EDGE_RE = re.compile(r"^x\[(\d+),(\d+)\]$")
_SLACK_RE = re.compile(r"^s([45])\[(\d+)\]$")


def edge_name(i: int, j: int) -> str:
    return f"x[{i},{j}]"


def slack_name(kind: int, i: int) -> str:
    return f"s{kind}[{i}]"


class VariableRegistry:
    """Bijection between variable names and indices ``0..n_vars-1``.

    Canonical order: edges ``x[i,j]`` lexicographically by ``(i, j)`` with
    ``j != i``, then ``s4[1..n_t]``, then ``s5[1..n_t]``.
    """

    def __init__(self, n_t: int):
        if n_t < 1:
            raise QuboError(f"n_t must be at least 1, got {n_t}")
        self.n_t = n_t
        self.n_edges = n_t * (n_t + 1)
        self.n_vars = n_t * (n_t + 3)
        names = [edge_name(i, j) for i in range(n_t + 1) for j in range(n_t + 1) if j != i]
        names += [slack_name(4, i) for i in range(1, n_t + 1)]
        names += [slack_name(5, i) for i in range(1, n_t + 1)]
        self.names = names
        self._index = {name: k for k, name in enumerate(names)}

    def __len__(self) -> int:
        return self.n_vars

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VariableRegistry) and other.n_t == self.n_t

    def __repr__(self) -> str:
        return f"VariableRegistry(n_t={self.n_t}, n_vars={self.n_vars})"

    def index(self, name: str) -> int:
        return self._index[name]

    def edge(self, i: int, j: int) -> int:
        if i == j or not (0 <= i <= self.n_t and 0 <= j <= self.n_t):
            raise KeyError(edge_name(i, j))
        return i * self.n_t + j - (1 if j > i else 0)

    def s4(self, i: int) -> int:
        if not 1 <= i <= self.n_t:
            raise KeyError(slack_name(4, i))
        return self.n_edges + i - 1

    def s5(self, i: int) -> int:
        if not 1 <= i <= self.n_t:
            raise KeyError(slack_name(5, i))
        return self.n_edges + self.n_t + i - 1

    def edge_matrix(self, bits: np.ndarray) -> np.ndarray:
        """Scatter the edge bits into an ``(n_t+1, n_t+1)`` adjacency matrix."""
        n = self.n_t + 1
        X = np.zeros((n, n), dtype=np.int64)
        off = ~np.eye(n, dtype=bool)
        X[off] = np.asarray(bits[: self.n_edges], dtype=np.int64)
        return X

    def slacks(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(bits, dtype=np.int64)
        return b[self.n_edges : self.n_edges + self.n_t], b[self.n_edges + self.n_t :]

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "VariableRegistry | None":
        """Recover the registry from a name list, or ``None`` if it is not canonical."""
        k = len(names)
        # n_t^2 + 3 n_t = k
        n_t = int(round((-3 + (9 + 4 * k) ** 0.5) / 2))
        if n_t < 1 or n_t * (n_t + 3) != k:
            return None
        reg = cls(n_t)
        return reg if list(names) == reg.names else None


def build_registry(n_t: int) -> VariableRegistry:
    return VariableRegistry(n_t)


# --------------------------------------------------------------------------
# Weights and model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LagrangeWeights:
    l_h: float = 1.0
    l_1: float = 2500.0
    l_2: float = 300.0
    l_3: float = 300.0
    l_4: float = 300.0
    l_5: float = 300.0
    l_6: float = 2500.0
    l_7: float = 4000.0
    l_8: float = 5000.0

    def __post_init__(self) -> None:
        for key, value in asdict(self).items():
            if value < 0:
                raise QuboError(f"Lagrange weight {key} must be nonnegative, got {value}")

    @property
    def constraint_weights(self) -> tuple[float, ...]:
        return (self.l_1, self.l_2, self.l_3, self.l_4, self.l_5, self.l_6, self.l_7, self.l_8)

    def scaled(self, factor: float) -> "LagrangeWeights":
        """Scale the eight constraint weights, leaving ``l_h`` alone."""
        return LagrangeWeights(self.l_h, *(w * factor for w in self.constraint_weights))

    def to_dict(self) -> dict:
        return asdict(self)


class QuboModel:
    """Quadratic binary model ``offset + sum_i q_ii x_i + sum_{i<j} q_ij x_i x_j``.

    ``linear[i]`` is ``q_ii``; ``coupling`` is symmetric with a zero diagonal
    and ``coupling[i, j] == q_ij`` for ``i < j``.  Both arrays are read-only.
    """

    def __init__(
        self,
        linear: np.ndarray,
        coupling: np.ndarray,
        offset: float = 0.0,
        registry: VariableRegistry | None = None,
    ):
        linear = np.array(linear, dtype=np.float64)
        coupling = np.array(coupling, dtype=np.float64)
        n = linear.shape[0]
        if coupling.shape != (n, n):
            raise QuboError(f"coupling must be {n}x{n}, got {coupling.shape}")
        if registry is not None and registry.n_vars != n:
            raise QuboError("registry size does not match the model")
        linear.setflags(write=False)
        coupling.setflags(write=False)
        self.linear = linear
        self.coupling = coupling
        self.offset = float(offset)
        self.registry = registry

    @property
    def n_vars(self) -> int:
        return self.linear.shape[0]

    @classmethod
    def from_terms(
        cls,
        n_vars: int,
        terms: Mapping[tuple[int, int], float],
        offset: float = 0.0,
        registry: VariableRegistry | None = None,
    ) -> "QuboModel":
        linear = np.zeros(n_vars)
        coupling = np.zeros((n_vars, n_vars))
        for (i, j), value in terms.items():
            if not (0 <= i <= j < n_vars):
                raise QuboError(f"coefficient key ({i}, {j}) must satisfy 0 <= i <= j < {n_vars}")
            if i == j:
                linear[i] += value
            else:
                coupling[i, j] += value
                coupling[j, i] += value
        return cls(linear, coupling, offset, registry)

    def terms(self) -> Iterator[tuple[int, int, float]]:
        """Nonzero coefficients as ``(i, j, value)`` with ``i <= j``, sorted by ``(i, j)``."""
        n = self.n_vars
        for i in range(n):
            row = self.coupling[i, i + 1 :]
            cols = np.flatnonzero(row)
            if self.linear[i] != 0.0:
                yield i, i, float(self.linear[i])
            for j, value in zip((cols + i + 1).tolist(), row[cols].tolist()):
                yield i, j, value

    def n_terms(self) -> int:
        upper = np.count_nonzero(np.triu(self.coupling, 1)) if self.n_vars < 2000 else sum(
            int(np.count_nonzero(self.coupling[i, i + 1 :])) for i in range(self.n_vars)
        )
        return int(np.count_nonzero(self.linear)) + int(upper)

    @property
    def coefficients(self) -> dict[tuple[int, int], float]:
        return {(i, j): v for i, j, v in self.terms()}

    def energy(self, bits: Sequence[int] | np.ndarray) -> float:
        return energy(self, bits)

    def energies(self, batch: np.ndarray) -> np.ndarray:
        X = np.asarray(batch)
        if X.ndim != 2 or X.shape[1] != self.n_vars:
            raise QuboError(f"batch must have shape (k, {self.n_vars})")
        return np.array([energy(self, row) for row in X])

    def single_flip_bounds(self) -> tuple[float, float]:
        """Largest possible and smallest nonzero single-flip energy change magnitudes.

        The largest is bounded by ``|q_ii| + sum_j |q_ij|``; the smallest is
        taken as the smallest nonzero coefficient magnitude.
        """
        abs_c = np.abs(self.coupling)
        hi = float(np.max(np.abs(self.linear) + abs_c.sum(axis=1))) if self.n_vars else 0.0
        mins = []
        lin = np.abs(self.linear[self.linear != 0])
        if lin.size:
            mins.append(float(lin.min()))
        nz = abs_c[abs_c > 0]
        if nz.size:
            mins.append(float(nz.min()))
        lo = min(mins) if mins else 0.0
        return hi, lo


def _as_bits(model: QuboModel, bits) -> np.ndarray:
    x = np.asarray(bits)
    if x.ndim != 1 or x.shape[0] != model.n_vars:
        raise QuboError(f"expected {model.n_vars} bits, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise QuboError("bit vector entries must be 0 or 1")
    return x.astype(np.float64)


def energy(model: QuboModel, bits) -> float:
    on = np.flatnonzero(_as_bits(model, bits))
    pairs = np.triu(model.coupling[np.ix_(on, on)], 1).sum()
    return float(model.offset + model.linear[on].sum() + pairs)


# --------------------------------------------------------------------------
# Builder
# --------------------------------------------------------------------------


def timing_conflicts(instance: ProblemInstance) -> np.ndarray:
    """Boolean mask ``M[i, j, k]`` of the triples whose consecutive use is forbidden.

    ``M[i, j, k]`` is set when ``j >= 1``, ``i, j, k`` pairwise distinct and
    ``T[i][j] + t_s > T[j][k]`` (equality is allowed).
    """
    n = instance.n_t + 1
    T = instance.T
    mask = (T[:, :, None] + instance.t_s) > T[None, :, :]
    idx = np.arange(n)
    i, j, k = np.meshgrid(idx, idx, idx, indexing="ij")
    mask &= (j >= 1) & (i != j) & (k != j) & (k != i)
    return mask


def _add_square(
    linear: np.ndarray,
    coupling: np.ndarray,
    idx: np.ndarray,
    a: np.ndarray,
    b: float,
    w: float,
) -> float:
    """Add ``w * (sum_k a_k x_idx[k] + b)^2``; returns the constant part."""
    sub = 2.0 * w * np.outer(a, a)
    np.fill_diagonal(sub, 0.0)
    coupling[np.ix_(idx, idx)] += sub
    linear[idx] += w * (a * a + 2.0 * b * a)
    return w * b * b


def build_qubo(instance: ProblemInstance, weights: LagrangeWeights = LagrangeWeights()) -> QuboModel:
    instance.check()
    reg = VariableRegistry(instance.n_t)
    n_t, E = instance.n_t, reg.n_edges
    nodes = np.arange(n_t + 1)
    linear = np.zeros(reg.n_vars)
    coupling = np.zeros((reg.n_vars, reg.n_vars))
    offset = 0.0

    def edges(i_arr, j_arr) -> np.ndarray:
        i_arr = np.asarray(i_arr)
        j_arr = np.asarray(j_arr)
        return i_arr * n_t + j_arr - (j_arr > i_arr)

    # objective: each used edge i->j pays the transfer and the disposal of i
    src, dst = np.nonzero(~np.eye(n_t + 1, dtype=bool))
    linear[edges(src, dst)] += weights.l_h * (instance.C[src, dst] + instance.c[src])

    # C1: total edge count equals n_s + 1 (all edges, done in place for size)
    w1, target = weights.l_1, instance.n_s + 1
    if w1:
        coupling[:E, :E] += 2.0 * w1
        coupling[np.arange(E), np.arange(E)] = 0.0
        linear[:E] += w1 * (1.0 - 2.0 * target)
        offset += w1 * target * target

    real = nodes[1:]
    ones = np.ones(n_t)
    # C2 / C3: dummy node has exactly one departure and one arrival
    offset += _add_square(linear, coupling, edges(0, real), ones, -1.0, weights.l_2)
    offset += _add_square(linear, coupling, edges(real, 0), ones, -1.0, weights.l_3)

    # C4 / C5: at most one departure / arrival per real node, one slack each
    slack_a = np.ones(n_t + 1)
    for i in real:
        others = nodes[nodes != i]
        out_idx = np.append(edges(i, others), reg.s4(i))
        in_idx = np.append(edges(others, i), reg.s5(i))
        offset += _add_square(linear, coupling, out_idx, slack_a, -1.0, weights.l_4)
        offset += _add_square(linear, coupling, in_idx, slack_a, -1.0, weights.l_5)

    # C6: flow conservation at every real node
    flow_a = np.concatenate([np.ones(n_t), -np.ones(n_t)])
    for j in real:
        others = nodes[nodes != j]
        idx = np.concatenate([edges(others, j), edges(j, others)])
        offset += _add_square(linear, coupling, idx, flow_a, 0.0, weights.l_6)

    # C7: no immediate return along the reverse edge
    lo, hi = np.triu_indices(n_t + 1, 1)
    fwd, rev = edges(lo, hi), edges(hi, lo)
    coupling[fwd, rev] += weights.l_7
    coupling[rev, fwd] += weights.l_7

    # C8: servicing-time conflicts between consecutive edges
    ti, tj, tk = np.nonzero(timing_conflicts(instance))
    first, second = edges(ti, tj), edges(tj, tk)
    np.add.at(coupling, (first, second), weights.l_8)
    np.add.at(coupling, (second, first), weights.l_8)

    return QuboModel(linear, coupling, offset, reg)


# --------------------------------------------------------------------------
# Definitional penalties
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyBreakdown:
    h: float
    c: tuple[float, ...]  # c1..c8, unweighted
    weighted_total: float

    def __getattr__(self, name: str):
        m = re.fullmatch(r"c([1-8])", name)
        if m:
            return self.c[int(m.group(1)) - 1]
        raise AttributeError(name)

    @property
    def feasible(self) -> bool:
        return all(v == 0 for v in self.c)

    def to_dict(self) -> dict:
        out = {"h": self.h}
        out.update({f"c{k + 1}": v for k, v in enumerate(self.c)})
        out["weighted_total"] = self.weighted_total
        return out


def penalty_breakdown(
    instance: ProblemInstance,
    weights: LagrangeWeights,
    bits: Sequence[int] | np.ndarray,
) -> PenaltyBreakdown:
    """Evaluate the objective and each constraint straight from its definition."""
    reg = VariableRegistry(instance.n_t)
    b = np.asarray(bits)
    if b.ndim != 1 or b.shape[0] != reg.n_vars:
        raise QuboError(f"expected {reg.n_vars} bits, got shape {b.shape}")
    X = reg.edge_matrix(b)
    s4, s5 = reg.slacks(b)
    n_t = instance.n_t

    h = float(np.sum(X * (instance.C + instance.c[:, None])))
    c1 = float((X.sum() - (instance.n_s + 1)) ** 2)
    c2 = float((X[0, 1:].sum() - 1) ** 2)
    c3 = float((X[1:, 0].sum() - 1) ** 2)
    out_deg = X.sum(axis=1)
    in_deg = X.sum(axis=0)
    c4 = float(np.sum((out_deg[1:] + s4 - 1) ** 2))
    c5 = float(np.sum((in_deg[1:] + s5 - 1) ** 2))
    c6 = float(np.sum((in_deg[1:] - out_deg[1:]) ** 2))
    c7 = float(sum(X[i, j] * X[j, i] for i in range(n_t + 1) for j in range(i + 1, n_t + 1)))
    c8 = float(np.einsum("ijk,ij,jk->", timing_conflicts(instance).astype(np.int64), X, X))
    cs = (c1, c2, c3, c4, c5, c6, c7, c8)
    total = weights.l_h * h + sum(w * v for w, v in zip(weights.constraint_weights, cs))
    return PenaltyBreakdown(h=h, c=cs, weighted_total=float(total))


# --------------------------------------------------------------------------
# Text export
# --------------------------------------------------------------------------


def write_qubo(model: QuboModel, fh: TextIO, comments: Sequence[str] = ()) -> None:
    for line in comments:
        fh.write(f"c {line}\n")
    fh.write(f"p qubo {model.n_vars} {model.n_terms()} {model.offset!r}\n")
    n = model.n_vars
    for i in range(n):
        parts = []
        if model.linear[i] != 0.0:
            parts.append(f"{i} {i} {float(model.linear[i])!r}")
        row = model.coupling[i, i + 1 :]
        cols = np.flatnonzero(row)
        parts.extend(f"{i} {j} {v!r}" for j, v in zip((cols + i + 1).tolist(), row[cols].tolist()))
        if parts:
            fh.write("\n".join(parts))
            fh.write("\n")


def write_names(model: QuboModel, fh: TextIO) -> None:
    names = model.registry.names if model.registry else [f"v{k}" for k in range(model.n_vars)]
    for k, name in enumerate(names):
        fh.write(f"{k} {name}\n")


def export_qubo(model: QuboModel, comments: Sequence[str] = ()) -> tuple[str, str]:
    """Return the QUBO text and its name-map sidecar."""
    body, names = io.StringIO(), io.StringIO()
    write_qubo(model, body, comments)
    write_names(model, names)
    return body.getvalue(), names.getvalue()


def read_qubo(text: str | TextIO, names: str | TextIO | None = None) -> QuboModel:
    """Parse the export format back into a model (``c`` lines are comments)."""
    fh = io.StringIO(text) if isinstance(text, str) else text
    header = None
    linear = coupling = None
    seen = 0
    for lineno, line in enumerate(fh, start=1):
        if not line.strip() or line.startswith("c"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 5 or parts[:2] != ["p", "qubo"]:
                raise QuboError(f"line {lineno}: expected 'p qubo <n_vars> <n_terms> <offset>'")
            n = int(parts[2])
            header = (n, int(parts[3]), float(parts[4]))
            linear = np.zeros(n)
            coupling = np.zeros((n, n))
            continue
        if len(parts) != 3:
            raise QuboError(f"line {lineno}: expected 'i j value'")
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not 0 <= i <= j < header[0]:
            raise QuboError(f"line {lineno}: index pair ({i}, {j}) out of order or range")
        if i == j:
            linear[i] += v
        else:
            coupling[i, j] += v
            coupling[j, i] += v
        seen += 1
    if header is None:
        raise QuboError("missing 'p qubo' header")
    if seen != header[1]:
        raise QuboError(f"header declares {header[1]} terms but {seen} were read")
    registry = None
    if names is not None:
        nfh = io.StringIO(names) if isinstance(names, str) else names
        pairs = [line.split(maxsplit=1) for line in nfh if line.strip()]
        ordered = [name.strip() for _, name in sorted(pairs, key=lambda p: int(p[0]))]
        if len(ordered) != header[0]:
            raise QuboError("name map size does not match the model")
        registry = VariableRegistry.from_names(ordered)
    return QuboModel(linear, coupling, header[2], registry)


def manifest_comments(manifest: Mapping) -> list[str]:
    return ["manifest " + json.dumps(manifest, sort_keys=True)]
