import inspect
import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from locklab.circuits import locked_majority, random_circuit
from locklab.locking import lock, lock_rll
from locklab.netlist import GateKind, Netlist, parse_bench, propagate_constants, simulate, stats
from locklab.ol_attack import (UNKNOWN, EnsembleSolution, FeatureDelta, KeyBitGuess, KeyValue,
                               SolutionVector, attack_netlist, decide, feature_deltas, harden_key_bit,
                               merge_votes, merged_value, score)
from strategies import netlists

Z, O, X = KeyValue.ZERO, KeyValue.ONE, KeyValue.UNKNOWN


def sv(*vals):
    return SolutionVector([UNKNOWN if v is X else KeyBitGuess(v, 1.0, "decided") for v in vals])


def _cone_circuit(key_polarity_zero=True):
    # keyinput0 gates a 10-gate cone; tying it to 0 removes the cone entirely
    lines = [f"INPUT(x{j})" for j in range(6)] + ["INPUT(keyinput0)", "OUTPUT(y)", "OUTPUT(z)"]
    kinds = ["AND", "OR", "NAND", "NOR", "AND", "OR", "NAND", "NOR", "AND", "OR"]
    prev = "x0"
    for j, k in enumerate(kinds):
        lines.append(f"c{j} = {k}({prev}, x{(j % 5) + 1})")
        prev = f"c{j}"
    gate = "AND" if key_polarity_zero else "OR"
    lines.append(f"t = {gate}(c9, keyinput0)")
    lines.append("y = OR(t, x5)")
    lines.append("z = AND(x0, x1)")
    return parse_bench("\n".join(lines) + "\n")


# -- hardening -----------------------------------------------------------------------------

def test_harden_matches_restricted_simulation():
    n, rec = lock(random_circuit(8, 40, 3, seed=3), "rll", 4, seed=3)
    for i in range(4):
        for v in (False, True):
            h = harden_key_bit(n, i, v)
            assert len(h.keys) == 3
            rest = [k for j, k in enumerate(n.keys) if j != i]
            assert h.keys == tuple(rest)
            for bits in itertools.product([False, True], repeat=len(n.inputs) + 3):
                x, kr = bits[:len(n.inputs)], list(bits[len(n.inputs):])
                full = kr[:i] + [v] + kr[i:]
                assert simulate(h, x, kr) == simulate(n, x, full)


@given(netlists(max_keys=3), st.data())
def test_harden_property(n, data):
    if not n.keys:
        return
    i = data.draw(st.integers(0, len(n.keys) - 1))
    v = data.draw(st.booleans())
    h = harden_key_bit(n, i, v)
    for bits in itertools.product([False, True], repeat=len(h.inputs) + len(h.keys)):
        val = dict(zip(h.inputs + h.keys, bits))
        val[n.keys[i]] = v
        x = [val.get(a, False) for a in n.inputs]
        k = [val.get(a, False) for a in n.keys]
        hx = [val[a] for a in h.inputs]
        hk = [val[a] for a in h.keys]
        assert simulate(h, hx, hk) == simulate(n, x, k)


def test_harden_matching_rll_bit_gives_buffer():
    n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(keyinput0)\nOUTPUT(y)\nw = AND(a, b)\nl = XOR(w, keyinput0)\ny = NOT(l)\n")
    h = harden_key_bit(n, 0, False)
    g = {x.out: x for x in h.gates}["l"]
    assert g.kind is GateKind.BUF and g.fanins == ("w",)


def test_locked_majority_constant_propagation():
    h = propagate_constants(locked_majority(), {"a": False, "b": False, "c": False})
    assert {g.kind for g in h.gates} == {GateKind.BUF, GateKind.NOT, GateKind.OR}
    assert set(h.keys) == {"keyinput0", "keyinput1"}


def test_harden_index_error():
    with pytest.raises(IndexError):
        harden_key_bit(locked_majority(), 2, True)


# -- single-netlist attack ------------------------------------------------------------------

def test_cone_collapse_guesses_zero():
    sol = attack_netlist(_cone_circuit(True))
    assert sol.values() == [Z]
    assert sol.guesses[0].reason == "decided" and sol.guesses[0].confidence > 0


def test_cone_collapse_guesses_one():
    # OR gate: tying the key to 1 makes the cone dead
    assert attack_netlist(_cone_circuit(False)).values() == [O]


def test_symmetric_key_gate_is_unknown():
    n = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)\n")
    sol = attack_netlist(n)
    assert sol.values() == [X] and sol.guesses[0].reason == "tie"


def test_sub_threshold_is_unknown():
    base = stats(_cone_circuit())
    d = FeatureDelta({"gate_count": 0, "depth": 0, "literal_count": 0, "area_proxy": -0.1, "power_proxy": 0})
    g = decide(base, [d], "threshold", tau=0.02)[0]
    assert g.value is X and g.reason == "sub-threshold"


def test_cluster_falls_back_for_single_bit():
    n = _cone_circuit()
    assert attack_netlist(n, "cluster").values() == attack_netlist(n, "threshold").values()


def test_cluster_policy_runs_on_rll():
    n, rec = lock(random_circuit(16, 150, 6, seed=1), "rll", 8, seed=1)
    sol = attack_netlist(n, "cluster")
    assert len(sol) == 8
    for g in sol.guesses:
        assert (g.value is X) == (g.confidence == 0)


def test_unknown_policy_rejected():
    n, _ = lock(random_circuit(8, 40, 3, seed=1), "rll", 2, seed=1)
    base, deltas = feature_deltas(n)
    with pytest.raises(ValueError):
        decide(base, deltas, "regression")


def test_attack_is_deterministic_and_truth_free():
    n, _ = lock(random_circuit(12, 100, 4, seed=2), "rll", 6, seed=2)
    assert attack_netlist(n).to_json() == attack_netlist(n).to_json()
    params = set(inspect.signature(attack_netlist).parameters)
    assert not params & {"truth", "key", "true_key", "record"}


def test_feature_deltas_finite():
    n, _ = lock(random_circuit(12, 100, 4, seed=7), "antisat", 4, seed=7)
    base, ds = feature_deltas(n)
    assert len(ds) == 4
    for d in ds:
        assert all(abs(v) < float("inf") for v in d.vector())


def test_guess_invariants():
    with pytest.raises(ValueError):
        KeyBitGuess(X, 0.5)
    with pytest.raises(ValueError):
        KeyBitGuess(O, 1.5)


def test_solution_json_roundtrip():
    s = SolutionVector([KeyBitGuess(Z, 0.25, "decided"), UNKNOWN], "abc")
    assert SolutionVector.from_json(s.to_json()) == s


# -- merging and scoring -------------------------------------------------------------------

def test_merge_example():
    e = merge_votes([sv(Z), sv(Z), sv(O), sv(X)])
    assert (e.dk0, e.dk1, e.values()) == ([2], [1], [Z])


def test_merge_tie_unknown():
    e = merge_votes([sv(Z)] * 3 + [sv(O)] * 3)
    assert e.values() == [X]


def test_merge_all_unknown():
    e = merge_votes([sv(X, X)] * 4)
    assert e.dk0 == [0, 0] and e.dk1 == [0, 0] and e.values() == [X, X]


def test_merge_errors():
    with pytest.raises(ValueError):
        merge_votes([])
    with pytest.raises(ValueError):
        merge_votes([sv(Z), sv(Z, O)])


def test_merge_rule_exhaustive():
    for a in range(11):
        for b in range(11):
            v = merged_value(a, b).value
            assert v is (Z if a > b else O if b > a else X)


@given(st.lists(st.lists(st.sampled_from([Z, O, X]), min_size=3, max_size=3), min_size=1, max_size=12),
       st.randoms(use_true_random=False))
def test_merge_permutation_invariant(rows, rnd):
    sols = [sv(*r) for r in rows]
    e = merge_votes(sols)
    shuffled = list(sols)
    rnd.shuffle(shuffled)
    f = merge_votes(shuffled)
    assert (e.dk0, e.dk1, e.values()) == (f.dk0, f.dk1, f.values())
    for i in range(3):
        assert e.dk0[i] + e.dk1[i] <= len(sols)


@given(st.lists(st.sampled_from([Z, O, X]), min_size=1, max_size=8))
def test_merge_single_is_identity(vals):
    assert merge_votes([sv(*vals)]).values() == vals


def test_score_examples():
    truth = [True, False, True]
    assert score(sv(O, Z, O), truth) == (3, 3)
    assert score(sv(X, X, X), truth) == (0, 0)
    assert score(sv(Z, Z, X), truth) == (1, 2)
    with pytest.raises(ValueError):
        score(sv(Z), truth)


def test_score_monte_carlo_half():
    rnd = random.Random(0)
    c = d = 0
    for _ in range(10_000):
        truth = [rnd.random() < 0.5 for _ in range(4)]
        guess = sv(*[rnd.choice([Z, O]) for _ in range(4)])
        a, b = score(guess, truth)
        c += a
        d += b
    assert abs(c / d - 0.5) < 0.02


def test_score_accepts_ensemble():
    e = merge_votes([sv(O, Z)])
    assert isinstance(e, EnsembleSolution)
    assert score(e, [True, True]) == (1, 2)
