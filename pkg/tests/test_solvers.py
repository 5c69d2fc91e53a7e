import itertools

import numpy as np
import pytest

from adrplan.benchmarks import load_benchmark
from adrplan.mission import encode
from adrplan.qubo import QuboModel, build_qubo, energy
from adrplan.solvers import (
    SampleSet,
    SolverConfig,
    SolverError,
    bits_to_integer,
    default_beta_range,
    exhaustive_minimum,
    integer_to_bits,
    landscape_scan,
    read_seeds,
    simulated_annealing,
    steepest_descent,
    steepest_descent_sampler,
    tabu_search,
)

from . import oracles


@pytest.fixture(scope="module")
def m2():
    return build_qubo(load_benchmark(2))


@pytest.fixture(scope="module")
def m3():
    return build_qubo(load_benchmark(3))


@pytest.fixture(scope="module")
def m4():
    return build_qubo(load_benchmark(4))


def single_flip_deltas(model, bits):
    base = energy(model, bits)
    out = []
    for k in range(model.n_vars):
        y = np.array(bits, dtype=np.uint8)
        y[k] ^= 1
        out.append(energy(model, y) - base)
    return np.array(out)


def test_config_validation():
    with pytest.raises(SolverError):
        SolverConfig(reads=0)
    with pytest.raises(SolverError):
        SolverConfig(tenure=21)
    with pytest.raises(SolverError):
        SolverConfig(beta_range=(0.0, 1.0))


def test_read_seeds_independent_of_read_count():
    assert np.array_equal(read_seeds(7, 3), read_seeds(7, 10)[:3])
    assert not np.array_equal(read_seeds(7, 3), read_seeds(8, 3))


# --------------------------------------------------------------------------
# steepest descent
# --------------------------------------------------------------------------


def test_descent_stays_at_optimum(m4):
    opt = encode((1, 3, 4), load_benchmark(4))
    s = steepest_descent(m4, opt)
    assert s.energy == 10 and np.array_equal(s.bits, opt)


def test_descent_from_zero_is_local_minimum(m3):
    s = steepest_descent(m3, np.zeros(m3.n_vars, dtype=np.uint8))
    assert s.energy > 11
    assert np.all(single_flip_deltas(m3, s.bits) >= 0)


def test_descent_result_has_no_improving_flip(m4):
    rng = np.random.default_rng(5)
    for _ in range(30):
        s = steepest_descent(m4, rng.integers(0, 2, m4.n_vars))
        assert np.all(single_flip_deltas(m4, s.bits) >= -1e-9)
        assert s.energy == energy(m4, s.bits)


def test_descent_lowest_index_tie_break():
    # both flips lower the energy by 1; index 0 must be taken first, then index 1 is blocked
    model = QuboModel.from_terms(2, {(0, 0): -1.0, (1, 1): -1.0, (0, 1): 5.0})
    s = steepest_descent(model, [0, 0])
    assert s.bits.tolist() == [1, 0]


def test_descent_sampler_deterministic(m3):
    a = steepest_descent_sampler(m3, SolverConfig(seed=4, reads=20))
    b = steepest_descent_sampler(m3, SolverConfig(seed=4, reads=20))
    assert a.to_dict()["samples"] == b.to_dict()["samples"]


# --------------------------------------------------------------------------
# tabu
# --------------------------------------------------------------------------


def test_tabu_single_variable():
    model = QuboModel.from_terms(1, {(0, 0): -1.0})
    ss = tabu_search(model, SolverConfig(seed=0, reads=3))
    assert ss.first.bits.tolist() == [1] and ss.first.energy == -1.0


@pytest.mark.parametrize("n_t", [2, 3])
def test_tabu_matches_exhaustive(n_t):
    model = build_qubo(load_benchmark(n_t))
    best = exhaustive_minimum(model).first.energy
    assert tabu_search(model, SolverConfig(seed=1, reads=1000)).first.energy == best


def test_tabu_deterministic(m4):
    cfg = SolverConfig(seed=9, reads=1)
    assert tabu_search(m4, cfg).to_dict()["samples"] == tabu_search(m4, cfg).to_dict()["samples"]


# --------------------------------------------------------------------------
# annealing
# --------------------------------------------------------------------------


@pytest.mark.parametrize("n_t", [2, 3])
def test_annealing_matches_exhaustive(n_t):
    model = build_qubo(load_benchmark(n_t))
    best = exhaustive_minimum(model).first.energy
    ss = simulated_annealing(model, SolverConfig(seed=2, reads=1000, sweeps=1000))
    assert ss.first.energy == best
    assert ss.total_occurrences == 1000


def test_annealing_quench_keeps_optimum(m4):
    opt = encode((1, 3, 4), load_benchmark(4))
    cfg = SolverConfig(seed=0, reads=2, sweeps=50, beta_range=(1e6, 1e6))
    ss = simulated_annealing(m4, cfg, initial_states=[opt, opt])
    assert ss.first.energy == 10 and ss.first.occurrences == 2


def test_annealing_deterministic_and_consistent(m4):
    cfg = SolverConfig(seed=123, reads=40, sweeps=300)
    a = simulated_annealing(m4, cfg)
    b = simulated_annealing(m4, cfg)
    assert a.to_dict()["samples"] == b.to_dict()["samples"]
    energies = [s.energy for s in a]
    assert energies == sorted(energies)
    for s in a:
        assert s.energy == energy(m4, s.bits)


def test_annealing_reads_do_not_depend_on_batch(m4):
    # per-read streams: the first 5 reads of a 20-read run equal a 5-read run
    small = simulated_annealing(m4, SolverConfig(seed=3, reads=5, sweeps=200), record_traces=True)
    big = simulated_annealing(m4, SolverConfig(seed=3, reads=20, sweeps=200), record_traces=True)
    assert np.array_equal(small.info["traces"], big.info["traces"][:5])


def test_annealing_trace_monotone(m4):
    ss = simulated_annealing(m4, SolverConfig(seed=8, reads=10, sweeps=400), record_traces=True)
    traces = ss.info["traces"]
    assert np.all(np.diff(traces, axis=1) <= 0)


def test_default_beta_range(m4):
    hot, cold = default_beta_range(m4)
    hi, lo = m4.single_flip_bounds()
    assert np.exp(-hot * hi) == pytest.approx(0.5)
    assert np.exp(-cold * lo) == pytest.approx(0.01)
    assert hot < cold


def test_sampleset_json_round_trip(m3):
    ss = simulated_annealing(m3, SolverConfig(seed=1, reads=10, sweeps=100))
    doc = ss.to_dict()
    again = SampleSet.from_dict(doc)
    assert again.to_dict() == doc


# --------------------------------------------------------------------------
# exhaustive search and landscape
# --------------------------------------------------------------------------


def test_exhaustive_against_brute_force():
    rng = np.random.default_rng(0)
    for n in (1, 5, 9):
        terms = {(i, j): float(rng.integers(-5, 6)) for i in range(n) for j in range(i, n)}
        model = QuboModel.from_terms(n, terms, offset=2.0)
        values = {
            bits: model.energy(bits) for bits in itertools.product((0, 1), repeat=n)
        }
        best = min(values.values())
        ss = exhaustive_minimum(model)
        assert ss.first.energy == best
        assert {tuple(s.bits.tolist()) for s in ss} == {b for b, v in values.items() if v == best}


def test_exhaustive_guard(m4):
    with pytest.raises(SolverError, match="26"):
        exhaustive_minimum(m4)


def test_exhaustive_matches_state_table(m2):
    table = oracles.all_state_energies(load_benchmark(2))
    ss = exhaustive_minimum(m2)
    assert ss.first.energy == table.min()
    assert sorted(ss.info["minimizer_integers"]) == sorted(np.flatnonzero(table == table.min()).tolist())


def test_integer_encoding_little_endian():
    assert integer_to_bits(6, 4).tolist() == [0, 1, 1, 0]
    assert bits_to_integer([0, 1, 1, 0]) == 6


def test_landscape_scan(m3):
    rows = landscape_scan(m3, 0, 2**18, 200)
    assert len(rows) == 1311
    for value, e in rows[:50]:
        assert e == energy(m3, integer_to_bits(value, 18))
    with pytest.raises(SolverError):
        landscape_scan(m3, 0, 2**18, 0)
