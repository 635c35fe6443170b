import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locklab.circuits import c17, full_adder, random_circuit
from locklab.netlist import (BenchParseError, Gate, GateKind, Netlist, NetlistError, depth,
                             exhaustive_words, extract_logic_cone, format_key, output_words, parse_bench,
                             parse_key, propagate_constants, simulate, stats, structural_signature,
                             sweep, write_bench)
from strategies import netlists


def brute_outputs(n, inputs, key=()):
    """Independent gate-by-gate evaluator, deliberately naive."""
    val = dict(zip(n.inputs, inputs))
    val.update(zip(n.keys, key))
    pending = list(n.gates)
    while pending:
        rest = []
        for g in pending:
            if not all(f in val for f in g.fanins):
                rest.append(g)
                continue
            x = [val[f] for f in g.fanins]
            k = g.kind
            if k is GateKind.AND:
                v = all(x)
            elif k is GateKind.NAND:
                v = not all(x)
            elif k is GateKind.OR:
                v = any(x)
            elif k is GateKind.NOR:
                v = not any(x)
            elif k is GateKind.XOR:
                v = sum(x) % 2 == 1
            elif k is GateKind.XNOR:
                v = sum(x) % 2 == 0
            elif k is GateKind.NOT:
                v = not x[0]
            elif k is GateKind.BUF:
                v = x[0]
            elif k is GateKind.MUX:
                v = x[2] if x[0] else x[1]
            else:
                v = k is GateKind.CONST1
            val[g.out] = bool(v)
        assert len(rest) < len(pending)
        pending = rest
    return [val[o] for o in n.outputs]


# -- parsing ----------------------------------------------------------------------

def test_parse_majority_counts(maj):
    assert (len(maj.inputs), len(maj.keys), len(maj.outputs), len(maj.gates)) == (3, 0, 1, 4)


def test_parse_key_inputs_by_prefix(locked_maj):
    assert locked_maj.keys == ("keyinput0", "keyinput1")
    assert locked_maj.inputs == ("a", "b", "c")


def test_key_inputs_sorted_by_index():
    n = parse_bench("INPUT(a)\nINPUT(keyinput10)\nINPUT(keyinput2)\nOUTPUT(y)\ny = AND(a, keyinput10, keyinput2)\n")
    assert n.keys == ("keyinput2", "keyinput10")


def test_aliases_and_comments():
    n = parse_bench("# hdr\nINPUT(a)\nOUTPUT(y)\nOUTPUT(z)\ny = BUFF(a)  # trailing\nz = INV(a)\n")
    assert [g.kind for g in n.gates] == [GateKind.BUF, GateKind.NOT]


def test_wide_gates_accepted():
    n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(y)\ny = NAND(a, b, c, d)\n")
    assert len(n.gates[0].fanins) == 4


@pytest.mark.parametrize("text,line", [
    ("INPUT(a)\nOUTPUT(y)\ny = FOO(a)\n", 3),
    ("INPUT(a)\nOUTPUT(y)\ny = AND(a)\n", 3),
    ("INPUT(a)\nOUTPUT(y)\ny AND a\n", 3),
])
def test_parse_errors_report_line(text, line):
    with pytest.raises(BenchParseError) as e:
        parse_bench(text)
    assert e.value.line == line


def test_undriven_fanin_rejected():
    with pytest.raises(NetlistError, match="undriven"):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, q)\n")


def test_cycle_rejected():
    with pytest.raises(NetlistError, match="cycle"):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, z)\nz = AND(a, y)\n")


def test_duplicate_driver_rejected():
    with pytest.raises(NetlistError):
        parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\ny = OR(a, b)\n")


def test_undriven_output_rejected():
    with pytest.raises(NetlistError):
        parse_bench("INPUT(a)\nOUTPUT(q)\ny = NOT(a)\n")


@given(netlists())
def test_write_parse_roundtrip(n):
    text = write_bench(n)
    m = parse_bench(text)
    assert m == n
    assert write_bench(m) == text


def test_write_is_lf_and_deterministic(locked_maj):
    t = write_bench(locked_maj)
    assert "\r" not in t and t.endswith("\n")
    assert t == write_bench(parse_bench(t))


def test_key_file_roundtrip():
    bits = (True, False, False, True)
    assert format_key(bits) == "1001"
    assert parse_key("1001\n") == bits
    with pytest.raises(ValueError):
        parse_key("10x1")


# -- simulation -------------------------------------------------------------------

def test_majority_truth_table(maj):
    for a, b, c in itertools.product([False, True], repeat=3):
        assert simulate(maj, [a, b, c]) == [(a + b + c) >= 2]


def test_full_adder_truth_table():
    fa = full_adder()
    for a, b, c in itertools.product([0, 1], repeat=3):
        s, cout = simulate(fa, [bool(a), bool(b), bool(c)])
        assert (int(s), int(cout)) == ((a + b + c) % 2, (a + b + c) // 2)


def test_locked_majority_correct_key(locked_maj, maj):
    for x in itertools.product([False, True], repeat=3):
        assert simulate(locked_maj, x, [False, True]) == simulate(maj, x)


def test_simulate_width_errors(maj):
    with pytest.raises(ValueError):
        simulate(maj, [True, False])


@given(netlists(), st.randoms(use_true_random=False))
def test_simulate_matches_naive_evaluator(n, rnd):
    for _ in range(8):
        x = [rnd.random() < 0.5 for _ in n.inputs]
        k = [rnd.random() < 0.5 for _ in n.keys]
        assert simulate(n, x, k) == brute_outputs(n, x, k)


@given(netlists())
def test_bit_parallel_agrees_with_scalar(n):
    nv = len(n.inputs) + len(n.keys)
    words = exhaustive_words(nv)
    outs = output_words(n, words[:len(n.inputs)], words[len(n.inputs):], 1 << nv)
    for row in range(1 << nv):
        bits = [bool(w >> row & 1) for w in words]
        got = [bool(w >> row & 1) for w in outs]
        assert got == simulate(n, bits[:len(n.inputs)], bits[len(n.inputs):])


@given(netlists())
def test_simulate_is_pure(n):
    x = [True] * len(n.inputs)
    k = [False] * len(n.keys)
    assert simulate(n, x, k) == simulate(n, x, k)


# -- stats -------------------------------------------------------------------------

def test_stats_majority(maj):
    s = stats(maj)
    # three 2-input ANDs (2 each) and a 3-input OR (3)
    assert (s.gate_count, s.depth, s.literal_count, s.area_proxy) == (4, 2, 9, 9.0)
    assert s.power_proxy >= 0


def test_stats_empty_netlist():
    n = Netlist(["a"], [], ["a"], [])
    assert stats(n).gate_count == 0 and stats(n).depth == 0


def test_stats_power_seeded(maj):
    assert stats(maj, seed=3) == stats(maj, seed=3)


def _longest_path(n):
    memo = {x: 0 for x in n.inputs + n.keys}
    drv = {g.out: g for g in n.gates}

    def d(net):
        if net not in memo:
            g = drv[net]
            memo[net] = 1 + max((d(f) for f in g.fanins), default=-1)
        return memo[net]

    return max((d(o) for o in n.outputs), default=0)


@given(netlists(max_gates=20))
def test_depth_equals_longest_path(n):
    assert depth(n) == _longest_path(n)


def test_depth_on_random_circuit():
    n = random_circuit(16, 300, 8, seed=4)
    assert depth(n) == _longest_path(n)


# -- signatures --------------------------------------------------------------------

def _rename(n, rnd):
    internal = [g.out for g in n.gates if g.out not in n.outputs]
    new = {x: f"r{j}_{rnd.randrange(10**6)}" for j, x in enumerate(internal)}
    m = lambda x: new.get(x, x)
    gates = [Gate(m(g.out), g.kind, tuple(m(f) for f in g.fanins)) for g in n.gates]
    rnd.shuffle(gates)
    return Netlist(n.inputs, n.keys, n.outputs, gates)


@given(netlists(), st.randoms(use_true_random=False))
def test_signature_invariant_under_renaming(n, rnd):
    assert structural_signature(_rename(n, rnd)) == structural_signature(n)


def test_signature_invariant_under_commutative_swap():
    a = parse_bench("INPUT(x)\nINPUT(y)\nOUTPUT(o)\no = AND(x, y)\n")
    b = parse_bench("INPUT(x)\nINPUT(y)\nOUTPUT(o)\no = AND(y, x)\n")
    c = parse_bench("INPUT(x)\nINPUT(y)\nINPUT(s)\nOUTPUT(o)\no = MUX(s, x, y)\n")
    d = parse_bench("INPUT(x)\nINPUT(y)\nINPUT(s)\nOUTPUT(o)\no = MUX(s, y, x)\n")
    assert structural_signature(a) == structural_signature(b)
    assert structural_signature(c) != structural_signature(d)


def test_signature_is_sha256_hex(maj):
    s = structural_signature(maj)
    assert len(s) == 64 and int(s, 16) >= 0


def _exact_canon(n):
    """Brute-force canonical text: minimum over all internal-net relabelings."""
    internal = [g.out for g in n.gates if g.out not in n.outputs]
    best = None
    for perm in itertools.permutations(range(len(internal))):
        name = {x: f"#{p}" for x, p in zip(internal, perm)}
        rows = []
        for g in n.gates:
            fi = [name.get(f, f) for f in g.fanins]
            if g.kind.value in ("AND", "OR", "NAND", "NOR", "XOR", "XNOR"):
                fi.sort()
            rows.append(f"{name.get(g.out, g.out)}={g.kind.value}({','.join(fi)})")
        form = "\n".join(sorted(rows))
        if best is None or form < best:
            best = form
    return best


def _tiny(rnd):
    ins = ["a", "b", "c"]
    nets = list(ins)
    gates = []
    for j in range(rnd.randint(2, 5)):
        kind = rnd.choice([GateKind.AND, GateKind.OR, GateKind.NAND, GateKind.NOT, GateKind.XOR])
        ar = 1 if kind is GateKind.NOT else 2
        gates.append(Gate(f"g{j}", kind, tuple(rnd.choice(nets) for _ in range(ar))))
        nets.append(f"g{j}")
    return Netlist(ins, [], [gates[-1].out], gates)


def _mutate(n, rnd):
    gates = list(n.gates)
    i = rnd.randrange(len(gates))
    g = gates[i]
    if rnd.random() < 0.5 and g.kind is not GateKind.NOT:
        kind = rnd.choice([k for k in (GateKind.AND, GateKind.OR, GateKind.NAND, GateKind.XOR) if k is not g.kind])
        gates[i] = Gate(g.out, kind, g.fanins)
    else:
        avail = list(n.inputs) + [h.out for h in gates[:i]]
        fi = list(g.fanins)
        fi[rnd.randrange(len(fi))] = rnd.choice(avail)
        gates[i] = Gate(g.out, g.kind, tuple(fi))
    return Netlist(n.inputs, n.keys, n.outputs, gates)


def test_signature_matches_exact_canonical_comparison():
    rnd = random.Random(11)
    changed = 0
    for _ in range(1000):
        a = _tiny(rnd)
        b = _mutate(a, rnd) if rnd.random() < 0.7 else _rename(a, rnd)
        same_exact = _exact_canon(a) == _exact_canon(b)
        same_sig = structural_signature(a) == structural_signature(b)
        assert same_exact == same_sig, (write_bench(a), write_bench(b))
        changed += not same_exact
    assert changed > 300


# -- cones, sweep, constant propagation ---------------------------------------------

def test_cone_of_single_output_is_whole(maj):
    cone = extract_logic_cone(maj, "f")
    assert len(cone.gates) == len(maj.gates)


def test_disjoint_cones_partition_gates():
    n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(x)\nOUTPUT(y)\n"
                    "p = AND(a, b)\nx = NOT(p)\nq = OR(c, d)\ny = NOT(q)\n")
    assert len(extract_logic_cone(n, "x").gates) + len(extract_logic_cone(n, "y").gates) == len(n.gates)


def test_cone_unknown_output(maj):
    with pytest.raises(KeyError):
        extract_logic_cone(maj, "nope")


def _cone_agrees(n, o, vectors=None, seed=0):
    cone = extract_logic_cone(n, o)
    pos = n.outputs.index(o)
    rnd = random.Random(seed)
    rows = (itertools.product([False, True], repeat=len(n.inputs) + len(n.keys)) if vectors is None else
            ([rnd.random() < 0.5 for _ in range(len(n.inputs) + len(n.keys))] for _ in range(vectors)))
    for bits in rows:
        x, k = bits[:len(n.inputs)], bits[len(n.inputs):]
        full = simulate(n, x, k)[pos]
        cx = [b for b, name in zip(x, n.inputs) if name in cone.inputs]
        ck = [b for b, name in zip(k, n.keys) if name in cone.keys]
        assert simulate(cone, cx, ck) == [full]


@given(netlists())
def test_cone_output_equivalence_exhaustive(n):
    for o in n.outputs:
        _cone_agrees(n, o)


def test_cone_of_locked_protected_output_is_smaller():
    from locklab.locking import lock
    n = random_circuit(24, 400, 12, seed=2)
    locked, rec = lock(n, "sfll_point", 8, seed=2)
    cone = extract_logic_cone(locked, rec.protected_output)
    assert len(cone.gates) < len(locked.gates)
    assert set(cone.keys) == set(locked.keys)
    _cone_agrees(locked, rec.protected_output, vectors=2000)
    # bit-parallel check on 10^4 vectors
    rnd = random.Random(1)
    from locklab.netlist import random_words
    pi = random_words(len(locked.inputs), 10_000, rnd)
    ky = random_words(len(locked.keys), 10_000, rnd)
    full = output_words(locked, pi, ky, 10_000)[locked.outputs.index(rec.protected_output)]
    sub = output_words(cone, [w for w, x in zip(pi, locked.inputs) if x in cone.inputs], ky, 10_000)[0]
    assert full == sub


def test_sweep_drops_dead_gates():
    n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\ndead = OR(a, b)\n")
    assert [g.out for g in sweep(n).gates] == ["y"]


@given(netlists(), st.randoms(use_true_random=False))
def test_propagate_constants_equivalence(n, rnd):
    srcs = list(n.inputs + n.keys)
    fixed = {x: rnd.random() < 0.5 for x in srcs if rnd.random() < 0.4}
    m = propagate_constants(n, fixed)
    assert len(m.gates) <= len(n.gates) + len(n.outputs)
    for bits in itertools.product([False, True], repeat=len(m.inputs) + len(m.keys)):
        val = dict(zip(m.inputs + m.keys, bits))
        val.update(fixed)
        x = [val[i] for i in n.inputs]
        k = [val[i] for i in n.keys]
        assert simulate(m, bits[:len(m.inputs)], bits[len(m.inputs):]) == simulate(n, x, k)


@given(netlists())
def test_propagate_constants_never_grows_gate_count(n):
    # with nothing fixed only dead gates can go away
    assert len(propagate_constants(n, {}).gates) <= len(n.gates)


def test_propagate_constants_locked_majority_query(locked_maj):
    m = propagate_constants(locked_maj, {"a": False, "b": False, "c": False})
    kinds = {g.out: (g.kind, g.fanins) for g in m.gates}
    assert kinds["l1"] == (GateKind.BUF, ("keyinput0",))
    assert kinds["l2"] == (GateKind.NOT, ("keyinput1",))
    assert kinds["f"] == (GateKind.OR, ("l1", "l2"))


def test_propagate_constants_unknown_input(maj):
    with pytest.raises(KeyError):
        propagate_constants(maj, {"zz": True})


def test_c17_known_vector():
    # all-ones input: G10=0, G11=0, G16=1, G19=1 -> G22=1, G23=0
    assert simulate(c17(), [True] * 5) == [True, False]
