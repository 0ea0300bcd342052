import io
import json
import random

import pytest

from conftest import gen_ground, gen_instance
from intruder import cli, engine
from intruder.proofs import dumps, linear_to_seq, loads, seq_to_nd
from intruder.rewriting import make_theories
from intruder.terms import format_term, name, parse_term

AC_PROBLEM = """
# worked example
theory: ac
knows: a, b
goal: pair(a, b) + a
"""


def write(tmp_path, text, filename="input.txt"):
    p = tmp_path / filename
    p.write_text(text)
    return str(p)


def test_deduce_ac_example(tmp_path, capsys):
    path = write(tmp_path, AC_PROBLEM)
    assert cli.main(["deduce", "--input", path, "--emit-proof", "json"]) == 0
    proof = loads(capsys.readouterr().out)
    assert proof.system == "L" and proof.rule == "ls"
    leaf = proof
    while leaf.premises:
        leaf = leaf.premises[0]
    assert leaf.rule == "r"


def test_deduce_underivable(tmp_path, capsys):
    path = write(tmp_path, "theory: empty\nknows: enc(a, k)\ngoal: a\n")
    assert cli.main(["deduce", "--input", path]) == 1
    assert capsys.readouterr().out.strip() == "not derivable"


def test_deduce_empty_knowledge(tmp_path, capsys):
    path = write(tmp_path, "theory: empty\ngoal: a\n")
    assert cli.main(["deduce", "--input", path]) == 1
    capsys.readouterr()


def test_deduce_from_flags(capsys):
    rc = cli.main(["deduce", "--knows", "a, b", "--goal", "pair(a,b)+a",
                   "--theory", "ac"])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "derivable"


def test_deduce_quiet(capsys):
    rc = cli.main(["deduce", "--knows", "enc(a, k), k", "--goal", "a",
                   "--theory", "empty", "--quiet"])
    assert rc == 0
    out, err = capsys.readouterr()
    assert out == "" and err == ""


def test_deduce_seed_does_not_change_the_verdict(capsys):
    for seed in ("0", "1", "17"):
        rc = cli.main(["deduce", "--knows", "blind(m, r), r, pub(k)",
                       "--goal", "m", "--theory", "empty",
                       "--quiet", "--seed", seed])
        assert rc == 0
    capsys.readouterr()


def test_deduce_stdin(monkeypatch, capsys):
    monkeypatch.setattr("sys.stdin", io.StringIO(AC_PROBLEM))
    assert cli.main(["deduce", "--input", "-", "--quiet"]) == 0
    capsys.readouterr()


def test_deduce_json_failure_keeps_stdout_clean(tmp_path, capsys):
    path = write(tmp_path, "theory: empty\nknows: enc(a, k)\ngoal: a\n")
    assert cli.main(["deduce", "--input", path, "--emit-proof", "json"]) == 1
    out, err = capsys.readouterr()
    assert out == ""
    assert "not derivable" in err


def test_deduce_emitted_text_proof(tmp_path, capsys):
    path = write(tmp_path, AC_PROBLEM)
    assert cli.main(["deduce", "--input", path, "--emit-proof", "text"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("derivable")
    assert "|-" in out


@pytest.mark.parametrize("text,needle", [
    ("theory: empty\nknows: a\n", "no goal"),
    ("theory: empty\ngoal: a\ngoal: b\n", "line 3"),
    ("theory: empty\nbogus: a\ngoal: a\n", "line 2"),
    ("theory: empty\nknows: pair(a\ngoal: a\n", "line 2"),
    ("theory: empty\ngoal: ?x\n", "contains variables"),
    ("theory: empty\nknows: a+b\ngoal: a\n", "not part of the selected theories"),
])
def test_deduce_input_errors(tmp_path, capsys, text, needle):
    path = write(tmp_path, text)
    assert cli.main(["deduce", "--input", path]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and needle in err


def test_deduce_missing_file(capsys):
    assert cli.main(["deduce", "--input", "/no/such/file", "--goal", "a"]) == 2
    capsys.readouterr()


def test_deduce_rejects_unknown_theory_flag(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["deduce", "--goal", "a", "--theory", "bogus"])
    assert e.value.code == 2
    capsys.readouterr()


def test_theory_flag_overrides_file_header(tmp_path, capsys):
    path = write(tmp_path, AC_PROBLEM)
    assert cli.main(["deduce", "--input", path, "--theory", "empty"]) == 2
    assert "'+'" in capsys.readouterr().err


def test_constraints_solved_form(tmp_path, capsys):
    path = write(tmp_path, "public a\na, b |-R ?x\n")
    assert cli.main(["constraints", "--input", path, "--emit", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["satisfiable"] is True
    assert data["solutions"][0]["subst"] == {}
    assert data["solutions"][0]["ground"] == {"?x": "a"}


def test_constraints_decryption_example(tmp_path, capsys):
    path = write(tmp_path, "a, enc(m, k), k |- m\n")
    assert cli.main(["constraints", "--input", path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("satisfiable")
    assert "solution 0" in out


def test_constraints_unsatisfiable(tmp_path, capsys):
    path = write(tmp_path, "public a\na |-R enc(b, ?x)\n")
    assert cli.main(["constraints", "--input", path]) == 1
    assert capsys.readouterr().out.strip() == "unsatisfiable"
    assert cli.main(["constraints", "--input", path, "--emit", "json"]) == 1
    assert json.loads(capsys.readouterr().out)["satisfiable"] is False


def test_constraints_origination_violation(tmp_path, capsys):
    path = write(tmp_path, "a, enc(b, ?x) |- enc(b, a)\n")
    assert cli.main(["constraints", "--input", path]) == 2
    err = capsys.readouterr().err
    assert "condition 2" in err


def test_constraints_monotonicity_violation(tmp_path, capsys):
    path = write(tmp_path, "a, b |- a\na |- a\n")
    assert cli.main(["constraints", "--input", path]) == 2
    assert "condition 1" in capsys.readouterr().err


def test_constraints_parse_error(tmp_path, capsys):
    path = write(tmp_path, "a, b\n")
    assert cli.main(["constraints", "--input", path]) == 2
    assert "line 1" in capsys.readouterr().err


def test_constraints_all_solutions(tmp_path, capsys):
    path = write(tmp_path,
                 "public a\na, b |-R ?x\na, b, pair(a, k), pair(b, k) |- pair(?x, k)\n")
    rc = cli.main(["constraints", "--input", path, "--all-solutions",
                   "--emit", "json"])
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data["satisfiable"] is True
    substs = [s["subst"] for s in data["solutions"]]
    grounds = [s["ground"]["?x"] for s in data["solutions"]]
    # unifying the goal against either known pair binds ?x differently
    assert {"?x": "a"} in substs and {"?x": "b"} in substs
    assert set(grounds) == {"a", "b"}


def test_check_engine_proof(tmp_path, capsys):
    write_proof = tmp_path / "proof.json"
    ths = make_theories(("ac",))
    d = engine.deduce([parse_term("a"), parse_term("b")],
                      parse_term("pair(a,b)+a"), ths)
    write_proof.write_text(dumps(d))
    assert cli.main(["check", "--proof", str(write_proof), "--theory", "ac"]) == 0
    assert capsys.readouterr().out.startswith("valid L proof")


def test_check_corrupted_premise(tmp_path, capsys):
    ths = make_theories(("empty",))
    d = engine.deduce([parse_term("enc(a, k)"), parse_term("k")],
                      parse_term("a"), ths)
    blob = json.loads(dumps(d))
    node = blob
    while node["premises"]:
        node = node["premises"][-1]
    node["goal"] = "pair(a, a)"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(blob))
    assert cli.main(["check", "--proof", str(path), "--theory", "empty"]) == 1
    assert capsys.readouterr().out.startswith("invalid")


@pytest.mark.parametrize("blob", ["{oops", "[1, 2]", '{"system": "L"}'])
def test_check_malformed_json(tmp_path, capsys, blob):
    path = write(tmp_path, blob, "broken.json")
    assert cli.main(["check", "--proof", str(path), "--theory", "empty"]) == 2
    capsys.readouterr()


def test_translate_round_trip_via_cli(tmp_path, capsys):
    ths = make_theories(("xor",))
    d = engine.deduce([parse_term("a+b"), parse_term("b+c")],
                      parse_term("a+c"), ths)
    lpath = tmp_path / "linear.json"
    lpath.write_text(dumps(d))

    rc = cli.main(["translate", "--proof", str(lpath), "--direction", "seq2nd",
                   "--theory", "xor"])
    assert rc == 0
    nd_text = capsys.readouterr().out
    nd = loads(nd_text)
    assert nd.system == "N"

    npath = tmp_path / "nd.json"
    npath.write_text(nd_text)
    rc = cli.main(["translate", "--proof", str(npath), "--direction", "nd2seq",
                   "--theory", "xor"])
    assert rc == 0
    seq = loads(capsys.readouterr().out)
    assert seq.system == "S"
    assert seq.conclusion.goal == d.conclusion.goal


def test_translate_direction_mismatch(tmp_path, capsys):
    ths = make_theories(("empty",))
    d = engine.deduce([parse_term("pair(a, b)")], parse_term("a"), ths)
    nd = seq_to_nd(linear_to_seq(d, ths), ths)
    path = tmp_path / "nd.json"
    path.write_text(dumps(nd))
    rc = cli.main(["translate", "--proof", str(path), "--direction", "seq2nd",
                   "--theory", "empty"])
    assert rc == 2
    assert "seq2nd expects" in capsys.readouterr().err


def test_translate_rejects_invalid_input_proof(tmp_path, capsys):
    ths = make_theories(("empty",))
    d = engine.deduce([parse_term("pair(a, b)")], parse_term("a"), ths)
    blob = json.loads(dumps(d))
    blob["goal"] = "b"
    path = tmp_path / "tampered.json"
    path.write_text(json.dumps(blob))
    rc = cli.main(["translate", "--proof", str(path), "--direction", "seq2nd",
                   "--theory", "empty"])
    assert rc == 2
    assert "invalid" in capsys.readouterr().err


def test_nd2seq_then_check_pipeline(tmp_path, capsys):
    rng = random.Random(17)
    ths = make_theories(("empty",))
    names = [name(n) for n in "abc"]
    nd_path = tmp_path / "nd.json"
    seq_path = tmp_path / "seq.json"
    done = 0
    while done < 100:
        gamma, goal = gen_instance(rng, names, ths, max_gamma=3, depth=2)
        d = engine.deduce(gamma, goal, ths)
        if d is None:
            continue
        nd = seq_to_nd(linear_to_seq(d, ths), ths)
        nd_path.write_text(dumps(nd))
        rc = cli.main(["translate", "--proof", str(nd_path),
                       "--direction", "nd2seq", "--theory", "empty"])
        assert rc == 0
        seq_path.write_text(capsys.readouterr().out)
        assert cli.main(["check", "--proof", str(seq_path),
                         "--theory", "empty"]) == 0
        capsys.readouterr()
        done += 1


def test_print_parse_round_trip_random():
    rng = random.Random(23)
    ths = make_theories(("xor", "ag"))
    names = [name(n) for n in "abck"]
    for _ in range(400):
        t = gen_ground(rng, names, ths)
        assert parse_term(format_term(t)) is t
