import random

import pytest

from conftest import gen_instance
from intruder.elementary import ElemWitness
from intruder.engine import deduce
from intruder.proofs import (Derivation, Sequent, check, dumps, find_error,
                             from_json, is_normal_derivation, left_rule_count,
                             linear_to_seq, loads, nd_to_seq, render_text,
                             seq_to_nd, sequents_of, to_json, weaken)
from intruder.rewriting import make_theories
from intruder.terms import blind, eapp, enc, name, pair, pub, sign, var

a, b, c, k, m, r = (name(n) for n in "abckmr")
EMPTYS = make_theories(("empty",))
ACS = make_theories(("ac",))
XORS = make_theories(("xor",))


def plus(*ts):
    return eapp("+", ts)


def s_id(gamma, goal, theory="empty"):
    w = ElemWitness(theory, "empty", (goal,))
    return Derivation("S", "id", Sequent(frozenset(gamma), goal), (),
                      {"witness": w, "theory": theory})


def n_id(gamma, goal):
    return Derivation("N", "id", Sequent(frozenset(gamma), goal))


def pair_intro_proof():
    g = {a, b}
    return Derivation("S", "p_R", Sequent(frozenset(g), pair(a, b)),
                      (s_id(g, a), s_id(g, b)))


def test_check_pair_intro():
    assert check(pair_intro_proof(), EMPTYS)


def test_check_rejects_swapped_premises():
    g = {a, b}
    bad = Derivation("S", "p_R", Sequent(frozenset(g), pair(a, b)),
                     (s_id(g, b), s_id(g, a)))
    err = find_error(bad, EMPTYS)
    assert err is not None and "premise goals" in err


def test_check_rejects_unknown_rule_and_bad_arity():
    g = frozenset({a})
    assert find_error(Derivation("S", "nosuch", Sequent(g, a)), EMPTYS)
    assert find_error(Derivation("X", "id", Sequent(g, a)), EMPTYS)
    assert find_error(Derivation("S", "p_R", Sequent(g, pair(a, a)),
                                 (s_id(g, a),)), EMPTYS)


def test_check_rejects_unnormalized_sequents():
    g = frozenset({plus(a, a)})
    err = find_error(s_id(g, plus(a, a), "xor"), XORS)
    assert err is not None and "normal form" in err


def test_check_rejects_nonreplaying_witness():
    g = frozenset({a, b})
    lying = Derivation("S", "id", Sequent(g, b), (),
                       {"witness": ElemWitness("empty", "empty", (a,)),
                        "theory": "empty"})
    err = find_error(lying, EMPTYS)
    assert err is not None and "replay" in err
    outside = Derivation("S", "id", Sequent(g, c), (),
                         {"witness": ElemWitness("empty", "empty", (c,)),
                          "theory": "empty"})
    assert find_error(outside, EMPTYS) is not None


def test_check_l_side_conditions():
    g = frozenset({enc(a, k)})
    prem = Derivation("L", "r", Sequent(g | {a, k}, a))
    bad = Derivation("L", "le", Sequent(g, a), (prem,),
                     {"principal": enc(a, k)})
    err = find_error(bad, EMPTYS)
    assert err is not None and "right-deducible" in err


def test_check_engine_output_on_random_instances():
    rng = random.Random(50)
    names = [a, b, c, k]
    for _ in range(100):
        gamma, goal = gen_instance(rng, names, (), st_cap=15)
        d = deduce(gamma, goal, EMPTYS)
        if d is not None:
            assert check(d, EMPTYS)


def test_nd_to_seq_id_leaf():
    out = nd_to_seq(n_id({a}, a), EMPTYS)
    assert out.rule == "id" and out.system == "S"
    assert check(out, EMPTYS)


def test_nd_to_seq_enc_elimination():
    g = {enc(a, k), k}
    nd = Derivation("N", "e_E", Sequent(frozenset(g), a),
                    (n_id(g, enc(a, k)), n_id(g, k)))
    out = nd_to_seq(nd, EMPTYS)
    assert check(out, EMPTYS)
    assert out.conclusion == Sequent(frozenset(g), a)
    rules = {d.rule for d in _nodes(out)}
    assert "cut" in rules and "e_L" in rules
    assert not is_normal_derivation(out)  # cuts are not normal


def test_nd_to_seq_xor_fold():
    g = {a, b}
    goal = plus(a, b)
    nd = Derivation("N", "f_I", Sequent(frozenset(g), goal),
                    (n_id(g, a), n_id(g, b)))
    out = nd_to_seq(nd, XORS)
    assert check(out, XORS)
    cuts = [d for d in _nodes(out) if d.rule == "cut"]
    assert len(cuts) == 2
    leaves = [d for d in _nodes(out) if d.rule == "id" and d.aux["witness"].kind == "xor"]
    assert len(leaves) == 1
    assert leaves[0].aux["witness"].holes() == 2  # the context hole + hole
    assert set(leaves[0].aux["witness"].entries) == {a, b}


def test_nd_to_seq_rejects_broken_input():
    broken = Derivation("N", "e_E", Sequent(frozenset({a}), a),
                        (n_id({a}, a), n_id({a}, a)))
    with pytest.raises(ValueError):
        nd_to_seq(broken, EMPTYS)
    with pytest.raises(ValueError):
        seq_to_nd(Derivation("S", "id", Sequent(frozenset({a}), b), (),
                             {"witness": ElemWitness("empty", "empty", (b,)),
                              "theory": "empty"}), EMPTYS)


def test_seq_to_nd_ac_context():
    g = frozenset({pair(a, b), a})
    goal = plus(pair(a, b), a)
    w = ElemWitness("ac", "ac", ((a, 1), (pair(a, b), 1)))
    d = Derivation("S", "id", Sequent(g, goal), (), {"witness": w, "theory": "ac"})
    out = seq_to_nd(d, ACS)
    assert check(out, ACS)
    assert out.conclusion == Sequent(g, goal)
    # the two-hole context becomes one fold over two hypothesis leaves
    assert out.rule == "f_I"
    assert [p.rule for p in out.premises] == ["id", "id"]
    assert {p.conclusion.goal for p in out.premises} == {a, pair(a, b)}


def test_seq_to_nd_normalizing_context_needs_approx():
    g = frozenset({plus(a, b), b})
    d = Derivation("S", "id", Sequent(g, a), (),
                   {"witness": ElemWitness("xor", "xor", (plus(a, b), b)),
                    "theory": "xor"})
    out = seq_to_nd(d, XORS)
    assert check(out, XORS)
    assert out.rule == "approx"  # fold concludes a+b+b, approx steps to a
    assert out.premises[0].rule == "f_I"


def test_seq_to_nd_pair_left():
    g = frozenset({pair(a, b)})
    d = Derivation("S", "p_L", Sequent(g, a),
                   (s_id(g | {a, b}, a),), {"principal": pair(a, b)})
    out = seq_to_nd(d, EMPTYS)
    assert check(out, EMPTYS)
    assert out.rule == "p_E"
    assert out.premises[0].rule == "id"
    assert out.premises[0].conclusion.goal is pair(a, b)


ROUND_TRIP_CASES = [
    ({enc(a, k), k}, a, EMPTYS),
    ({pair(a, b)}, b, EMPTYS),
    ({sign(blind(m, r), k), r, pub(k)}, m, EMPTYS),
    ({a, b}, plus(pair(a, b), a), ACS),
    ({plus(a, b), b}, enc(a, b), XORS),
]


@pytest.mark.parametrize("gamma,goal,ths", ROUND_TRIP_CASES)
def test_round_trip_named_cases(gamma, goal, ths):
    d = deduce(gamma, goal, ths)
    assert d is not None
    s = linear_to_seq(d, ths)
    assert check(s, ths)
    assert is_normal_derivation(s)
    nd = seq_to_nd(s, ths)
    assert check(nd, ths)
    assert nd.conclusion == s.conclusion
    back = nd_to_seq(nd, ths)
    assert check(back, ths)
    assert back.conclusion == s.conclusion


def test_round_trip_random():
    rng = random.Random(51)
    names = [a, b, c, k]
    done = 0
    for _ in range(120):
        gamma, goal = gen_instance(rng, names, (), st_cap=15)
        d = deduce(gamma, goal, EMPTYS)
        if d is None:
            continue
        s = linear_to_seq(d, EMPTYS)
        nd = seq_to_nd(s, EMPTYS)
        assert check(nd, EMPTYS)
        back = nd_to_seq(nd, EMPTYS)
        assert check(back, EMPTYS)
        assert back.conclusion == s.conclusion
        done += 1
    assert done >= 25


def test_weaken_by_nothing_is_identity():
    d = pair_intro_proof()
    assert weaken(d, set()) is d


def test_weaken_enlarges_every_sequent():
    d = pair_intro_proof()
    w = weaken(d, {c})
    assert check(w, EMPTYS)
    assert w.conclusion.gamma == frozenset({a, b, c})
    assert all(c in s.gamma for s in sequents_of(w))
    assert w.height() == d.height()
    assert [p.rule for p in w.premises] == [p.rule for p in d.premises]


def test_weaken_preserves_height_on_random_proofs():
    rng = random.Random(52)
    names = [a, b, k]
    done = 0
    for _ in range(60):
        gamma, goal = gen_instance(rng, names, (), st_cap=12)
        d = deduce(gamma, goal, EMPTYS)
        if d is None:
            continue
        s = linear_to_seq(d, EMPTYS)
        extra = {name("w"), pair(name("w"), a)}
        w = weaken(s, extra)
        assert w.height() == s.height()
        assert check(w, EMPTYS)
        done += 1
    assert done >= 15


def test_left_rule_count():
    g = frozenset({pair(a, b)})
    d = Derivation("S", "p_L", Sequent(g, a),
                   (s_id(g | {a, b}, a),), {"principal": pair(a, b)})
    assert left_rule_count(d) == 1
    assert left_rule_count(pair_intro_proof()) == 0


def test_json_schema_fields():
    d = deduce({a, b}, plus(pair(a, b), a), ACS)
    obj = to_json(d)
    assert set(obj) == {"system", "rule", "gamma", "goal", "aux", "premises"}
    assert obj["system"] == "L" and obj["rule"] == "ls"
    assert obj["gamma"] == ["a", "b"]
    assert obj["goal"] == "a+pair(a,b)"
    assert obj["aux"]["principal"] == "pair(a,b)"


def test_json_round_trip():
    for gamma, goal, ths in ROUND_TRIP_CASES:
        d = deduce(gamma, goal, ths)
        for form in (d, linear_to_seq(d, ths), seq_to_nd(linear_to_seq(d, ths), ths)):
            back = loads(dumps(form))
            assert back.conclusion == form.conclusion
            assert [n.rule for n in _nodes(back)] == [n.rule for n in _nodes(form)]
            th_names = tuple(t.name for t in ths)
            assert find_error(back, make_theories(th_names)) is None


def test_loads_rejects_malformed_input():
    with pytest.raises(ValueError):
        loads("{not json")
    with pytest.raises(ValueError):
        loads("[1, 2]")
    with pytest.raises(ValueError):
        loads('{"system": "S"}')
    with pytest.raises(ValueError):
        loads('{"system": "S", "rule": "id", "gamma": ["???"], "goal": "a"}')


def test_linear_to_seq_rejects_wrong_system():
    with pytest.raises(ValueError):
        linear_to_seq(pair_intro_proof(), EMPTYS)


def test_render_text_mentions_rules_and_principals():
    d = deduce({enc(a, k), k}, a, EMPTYS)
    text = render_text(d)
    assert "le" in text and "enc(a,k)" in text and "|-" in text


def _nodes(d):
    out = [d]
    for p in d.premises:
        out.extend(_nodes(p))
    emb = d.aux.get("right")
    if isinstance(emb, Derivation):
        out.extend(_nodes(emb))
    return out
