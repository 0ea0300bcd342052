"""Tour of the deduction engine across the built-in equational theories.

Each section poses a question of the form "given these messages, can the
intruder produce that one?", runs the engine, and prints the derivation it
returns. Run from the repository root after installing the package:

    python3 demos/deduction_walkthrough.py
"""
import time

from intruder import deduce, make_theories
from intruder.proofs import find_error, render_text
from intruder.terms import format_term, parse_term


def show(title, knows, goal, theory_names):
    theories = make_theories(theory_names)
    gamma = [parse_term(t) for t in knows]
    target = parse_term(goal)
    print(f"=== {title} ===")
    print(f"theories: {', '.join(theory_names)}")
    print(f"knows:    {', '.join(format_term(t) for t in gamma)}")
    print(f"goal:     {format_term(target)}")
    t0 = time.monotonic()
    proof = deduce(gamma, target, theories)
    dt = (time.monotonic() - t0) * 1000
    if proof is None:
        print(f"verdict:  not derivable ({dt:.1f} ms)\n")
        return
    err = find_error(proof, theories)
    assert err is None, err
    print(f"verdict:  derivable ({dt:.1f} ms), proof checked")
    print(render_text(proof))
    print()


def main():
    # pairing plus an AC operator: the goal is assembled from both parts
    show("Sums of pairs (the worked example)",
         ["a", "b"], "pair(a,b) + a", ("ac",))

    # symmetric decryption needs the key in the clear
    show("Decrypt with a known key",
         ["enc(secret, k)", "k"], "secret", ("empty",))
    show("Decrypt without the key",
         ["enc(secret, k)"], "secret", ("empty",))

    # blind signatures: signing a blinded message and unblinding afterwards
    # leaks a signature on the hidden message
    show("Unblinding a blind signature",
         ["sign(blind(m, r), sk)", "r", "pub(sk)"], "sign(m, sk)", ("empty",))

    # exclusive or: two overlapping one-time pads cancel
    show("Xor cancellation",
         ["m + k1", "k1 + k2", "k2"], "m", ("xor",))

    # abelian groups: inverses let the intruder rebalance a product (a solo
    # theory always owns +; * only appears in combinations)
    show("Group rebalancing",
         ["a + a + b", "b + inv(a)"], "a + a + a", ("ag",))

    # disjoint combination: + is xor, * is the group operator; the goal needs
    # an xor cancellation first and a group division after
    show("Mixed xor and group traffic",
         ["a * b + c", "c", "inv(b)"], "a", ("xor", "ag"))


if __name__ == "__main__":
    main()
