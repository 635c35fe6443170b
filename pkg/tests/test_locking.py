import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from locklab.circuits import c17, majority, random_circuit
from locklab.cnf import check_equivalence, truth_table_equal
from locklab.locking import (LockingError, LockRecord, LockScheme, lock, lock_antisat, lock_caslock,
                             lock_compound, lock_rll, lock_sfll_point, substitute_key)
from locklab.netlist import GateKind, Netlist, parse_bench, simulate, write_bench

SCHEMES = ["rll", "antisat", "caslock", "sfll_point", "compound"]


def _agrees_exhaustive(orig, locked, key):
    for x in itertools.product([False, True], repeat=len(orig.inputs)):
        if simulate(locked, x, key) != simulate(orig, x):
            return False
    return True


def _agrees_random(orig, locked, key, vectors=10_000, seed=0):
    from locklab.netlist import output_words, random_words
    rnd = random.Random(seed)
    pi = random_words(len(orig.inputs), vectors, rnd)
    mask = (1 << vectors) - 1
    kw = [mask if b else 0 for b in key]
    return output_words(orig, pi, [], vectors) == output_words(locked, pi, kw, vectors)


def test_rll_majority_sites_give_key_01():
    n = majority()
    locked, rec = lock_rll(n, 2, seed=0, sites=["g1", "g2"], key=[False, True])
    assert rec.true_key == (False, True)
    kinds = {g.out: g.kind for g in locked.gates}
    assert kinds["g1_lk"] is GateKind.XOR and kinds["g2_lk"] is GateKind.XNOR
    assert _agrees_exhaustive(n, locked, [False, True])
    for wrong in ([False, False], [True, True], [True, False]):
        assert not _agrees_exhaustive(n, locked, wrong)


def test_rll_p0_is_identity():
    n = c17()
    locked, rec = lock_rll(n, 0, seed=1)
    assert locked == n and rec.true_key == ()


def test_rll_too_many_sites():
    with pytest.raises(LockingError, match="exceeds"):
        lock_rll(c17(), 5, seed=0)


def test_name_clash_detected():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nkeyinput0 = AND(a, b)\ny = NOT(keyinput0)\n", key_prefix="kk")
    with pytest.raises(LockingError, match="clash"):
        lock_rll(n, 1, seed=0)


def test_relocking_rejected():
    locked, _ = lock(c17(), "rll", 2, seed=0)
    with pytest.raises(LockingError):
        lock(locked, "rll", 1, seed=0)


@pytest.mark.parametrize("seed", range(5))
def test_rll_adds_exactly_p_gates(seed):
    n = random_circuit(10, 60, 4, seed=seed)
    locked, rec = lock_rll(n, 8, seed)
    assert len(locked.gates) == len(n.gates) + 8
    assert len(rec.true_key) == len(locked.keys) == 8
    assert len(set(rec.insertion_sites)) == 8
    assert not set(rec.insertion_sites) & set(n.outputs)


@pytest.mark.parametrize("scheme,p", [("antisat", 8), ("caslock", 8), ("antisat", 2), ("caslock", 12)])
def test_flip_schemes_gate_count(scheme, p):
    n = random_circuit(12, 60, 4, seed=p)
    locked, rec = lock(n, scheme, p, seed=3)
    # p XORs + (p - 2) tree gates + AND + output XOR
    assert len(locked.gates) - len(n.gates) == p + (p - 2) + 2


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("seed", range(4))
def test_true_key_restores_function(scheme, seed):
    n = random_circuit(12, 80, 6, seed=seed)
    locked, rec = lock(n, scheme, 6, seed=seed, p_sfll=4)
    assert len(rec.true_key) == len(locked.keys)
    assert _agrees_exhaustive(n, locked, rec.true_key)
    assert _agrees_random(n, locked, rec.true_key)
    # miter with the key hard-wired is UNSAT
    assert check_equivalence(n, substitute_key(locked, rec.true_key), share="inputs_only").equivalent


@pytest.mark.parametrize("scheme", SCHEMES)
def test_true_key_on_larger_circuit(scheme):
    n = random_circuit(32, 400, 16, seed=9)
    locked, rec = lock(n, scheme, 16, seed=9, p_sfll=8)
    assert _agrees_random(n, locked, rec.true_key)
    assert check_equivalence(n, locked, share="inputs_only", fixed_keys_b=rec.true_key).equivalent


@pytest.mark.parametrize("scheme", SCHEMES)
def test_locking_is_deterministic(scheme):
    n = random_circuit(16, 100, 6, seed=1)
    a = lock(n, scheme, 8, seed=5, p_sfll=4)
    b = lock(n, scheme, 8, seed=5, p_sfll=4)
    assert write_bench(a[0]) == write_bench(b[0]) and a[1] == b[1]


@pytest.mark.parametrize("scheme", ["antisat", "caslock", "sfll_point", "compound"])
def test_wrong_key_corrupts_something(scheme):
    n = random_circuit(12, 80, 6, seed=2)
    locked, rec = lock(n, scheme, 8, seed=2, p_sfll=4)
    res = check_equivalence(n, locked, share="inputs_only")  # key free in copy b
    assert not res.equivalent


def test_antisat_one_bit_wrong_flips_exactly_one_pattern():
    n = random_circuit(10, 60, 4, seed=7)
    locked, rec = lock_antisat(n, 8, seed=7)
    m = 4
    out_pos = n.outputs.index(rec.protected_output)
    rnd = random.Random(0)
    for j in range(m):
        key = list(rec.true_key)
        key[j] = not key[j]
        base = [rnd.random() < 0.5 for _ in n.inputs]
        flips = 0
        for pat in itertools.product([False, True], repeat=m):
            x = list(base)
            for name, b in zip(rec.chosen_inputs, pat):
                x[n.inputs.index(name)] = b
            flips += simulate(locked, x, key)[out_pos] != simulate(n, x)[out_pos]
        assert flips == 1


def test_antisat_p2_key_classes_bruteforce():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n")
    locked, rec = lock_antisat(n, 2, seed=0)
    good = [k for k in itertools.product([False, True], repeat=2) if _agrees_exhaustive(n, locked, k)]
    assert tuple(rec.true_key) in good
    # with 1-input trees, only keys with equal halves cancel the flip
    assert all(k[0] == k[1] for k in good)


def test_caslock_all_and_pattern_is_antisat():
    n = random_circuit(10, 50, 4, seed=3)
    a, ra = lock_antisat(n, 8, seed=4)
    c, rc = lock_caslock(n, 8, seed=4, pattern=("AND",))
    assert write_bench(a) == write_bench(c)
    assert ra.true_key == rc.true_key


def test_caslock_pattern_recorded_and_keys_bruteforce():
    n = random_circuit(8, 40, 3, seed=5)
    locked, rec = lock_caslock(n, 4, seed=11, pattern=("OR",))
    assert rec.tree_pattern == ("OR",)
    kinds = {g.kind for g in locked.gates[len(n.gates):]}
    assert GateKind.OR in kinds or GateKind.NOR in kinds
    good = [k for k in itertools.product([False, True], repeat=4) if _agrees_exhaustive(n, locked, k)]
    assert good and tuple(rec.true_key) in good


def test_sfll_majority_pattern_101():
    n = majority()
    locked, rec = lock_sfll_point(n, 3, seed=0, pattern=[True, False, True], output="f", inputs=["a", "b", "c"])
    assert rec.true_key == (True, False, True) == rec.protected_pattern
    wrong = [False, False, False]
    bad = [x for x in itertools.product([False, True], repeat=3) if simulate(locked, x, wrong) != simulate(n, x)]
    # corrupted on the protected pattern and on the pattern equal to the wrong key
    assert sorted(bad) == sorted([(True, False, True), (False, False, False)])


def test_sfll_wrong_key_corrupts_exactly_two_patterns():
    n = random_circuit(10, 60, 4, seed=8)
    locked, rec = lock_sfll_point(n, 5, seed=8)
    pos = n.outputs.index(rec.protected_output)
    rnd = random.Random(2)
    wrong = list(rec.true_key)
    wrong[1] = not wrong[1]
    base = [rnd.random() < 0.5 for _ in n.inputs]
    hits = []
    for pat in itertools.product([False, True], repeat=5):
        x = list(base)
        for name, b in zip(rec.chosen_inputs, pat):
            x[n.inputs.index(name)] = b
        if simulate(locked, x, wrong)[pos] != simulate(n, x)[pos]:
            hits.append(pat)
    assert sorted(hits) == sorted([tuple(rec.protected_pattern), tuple(wrong)])


def test_sfll_pattern_length():
    n = random_circuit(12, 60, 4, seed=1)
    _, rec = lock_sfll_point(n, 6, seed=1)
    assert len(rec.protected_pattern) == 6 == len(rec.chosen_inputs)


def test_sfll_insufficient_inputs():
    with pytest.raises(LockingError):
        lock_sfll_point(majority(), 4, seed=0)


def test_antisat_odd_p_rejected():
    with pytest.raises(LockingError):
        lock_antisat(random_circuit(8, 30, 2, seed=0), 5, seed=0)


def test_compound_p_rll_zero_matches_sfll():
    n = random_circuit(12, 60, 4, seed=6)
    a, ra = lock_compound(n, 0, 6, seed=6)
    b, rb = lock_sfll_point(n, 6, seed=6)
    assert write_bench(a) == write_bench(b)
    assert ra.true_key == rb.true_key


def test_compound_key_ranges_disjoint():
    n = random_circuit(48, 400, 16, seed=6)
    locked, rec = lock_compound(n, 40, 40, seed=6)
    assert rec.key_ranges == {"sfll_point": (0, 40), "rll": (40, 80)}
    assert len(rec.true_key) == len(locked.keys) == 80
    assert rec.true_key[:40] == rec.protected_pattern
    assert _agrees_random(n, locked, rec.true_key)


@given(st.sampled_from(SCHEMES), st.integers(0, 10_000))
def test_lock_record_json_roundtrip(scheme, seed):
    n = random_circuit(10, 50, 4, seed=seed % 7)
    _, rec = lock(n, scheme, 4, seed=seed, p_sfll=2)
    again = LockRecord.from_json(rec.to_json())
    assert again == rec
    assert again.scheme is LockScheme(scheme)


def test_substitute_key_length_check():
    locked, rec = lock(c17(), "rll", 3, seed=0)
    with pytest.raises(ValueError):
        substitute_key(locked, [True])
    assert truth_table_equal(c17(), substitute_key(locked, rec.true_key), share_keys=False)
