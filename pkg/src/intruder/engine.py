"""The deduction engine.

right_deduce builds sequent proofs that use only id and right-introduction
rules. deduce runs the saturation sweep of the linear system: it grows the
context with left-rule conclusions drawn from the saturated subterm set until
the goal becomes right-deducible or nothing new can be added, and returns the
resulting one-branch derivation. nd_closure_oracle is a slow, independent
closure over the natural-deduction rules used to cross-check the engine.
"""
from __future__ import annotations

import itertools
from random import Random
from typing import Iterable

from .elementary import elem_deduce
from .proofs import Derivation, Sequent
from .rewriting import Abstraction, Theory, as_theories, normalize
from .terms import CAPP, EAPP, Term, capp, e_factors, eapp, saturate, sign

_RIGHT_RULE = {"pair": "p_R", "enc": "e_R", "sign": "sign_R", "blind": "blind_R"}


class OracleBoundExceeded(RuntimeError):
    """The reference closure hit an enumeration or depth limit."""


def right_deduce(gamma: Iterable[Term], goal: Term, theories,
                 table: Abstraction | None = None,
                 memo: dict | None = None) -> Derivation | None:
    """An S proof of gamma |- goal from id and right rules alone, or None.

    Inputs are assumed normalized; deduce() and the CLI normalize first.
    """
    theories = as_theories(theories)
    gamma = frozenset(gamma)
    if table is None:
        table = Abstraction(theories)
    if memo is None:
        memo = {}
    return _right(gamma, goal, theories, table, memo)


def _right(gamma, goal, theories, table, memo):
    key = (gamma, goal)
    if key in memo:
        return memo[key]
    found = None
    for th in theories:
        w = elem_deduce(th, gamma, goal, table, theories)
        if w is not None:
            found = Derivation("S", "id", Sequent(gamma, goal), (),
                               {"witness": w, "theory": th.name})
            break
    if found is None and goal.kind == CAPP and goal.sym in _RIGHT_RULE:
        left = _right(gamma, goal.args[0], theories, table, memo)
        if left is not None:
            right = _right(gamma, goal.args[1], theories, table, memo)
            if right is not None:
                found = Derivation("S", _RIGHT_RULE[goal.sym], Sequent(gamma, goal),
                                   (left, right))
    memo[key] = found
    return found


# --- left-rule applicability ---------------------------------------------------


def _rules_for(t: Term):
    if t.kind != CAPP:
        return ()
    if t.sym == "pair":
        return ("lp",)
    if t.sym == "enc":
        return ("le",)
    if t.sym == "blind":
        return ("blind1",)
    if t.sym == "sign":
        if t.args[0].kind == CAPP and t.args[0].sym == "blind":
            return ("sign", "blind2")
        return ("sign",)
    return ()


def _apply_left(rule: str, principal: Term, gamma: frozenset[Term], goal: Term,
                theories, table, memo):
    """(added terms, side proof or None) when the rule fires, else None.

    For the principal-based rules the principal must already be in gamma; for
    ls the principal is the alien factor being abstracted into the context.
    """
    if rule == "ls":
        if principal in gamma:
            return None
        side = _right(gamma, principal, theories, table, memo)
        if side is None:
            return None
        return (principal,), side
    if principal not in gamma:
        return None
    if rule == "lp":
        return principal.args, None
    if rule == "le":
        payload, key = principal.args
        side = _right(gamma, key, theories, table, memo)
        if side is None:
            return None
        return (payload, key), side
    if rule == "sign":
        payload, key = principal.args
        if capp("pub", (key,)) not in gamma:
            return None
        return (payload,), None
    if rule == "blind1":
        payload, factor = principal.args
        side = _right(gamma, factor, theories, table, memo)
        if side is None:
            return None
        return (payload, factor), side
    if rule == "blind2":
        blinded, key = principal.args
        payload, factor = blinded.args
        side = _right(gamma, factor, theories, table, memo)
        if side is None:
            return None
        return (sign(payload, key), factor), side
    raise ValueError(f"unknown left rule {rule!r}")


def applicable(rule: str, principal: Term, gamma: Iterable[Term], goal: Term,
               theories) -> Sequent | None:
    """The premise sequent of a left rule instance, or None if it cannot fire."""
    theories = as_theories(theories)
    gamma = frozenset(gamma)
    if rule == "ls" and not _is_factor(principal, gamma | {goal}, theories):
        return None
    table = Abstraction(theories)
    hit = _apply_left(rule, principal, gamma, goal, theories, table, {})
    if hit is None:
        return None
    added, _ = hit
    return Sequent(gamma | set(added), goal)


def _is_factor(a: Term, over: frozenset[Term], theories) -> bool:
    return any(a in e_factors(t, th) for t in over for th in theories)


# --- the saturation sweep --------------------------------------------------------


def deduce(gamma: Iterable[Term], goal: Term, theories,
           rng: Random | None = None) -> Derivation | None:
    """A linear-system derivation of gamma |- goal, or None if underivable.

    The context only ever grows by members of the saturated subterm set, so
    the number of left-rule applications is bounded by its size and each
    sweep either adds a term or reaches a fixpoint.
    """
    theories = as_theories(theories)
    delta = frozenset(normalize(t, theories) for t in gamma)
    goal = normalize(goal, theories)
    table = Abstraction(theories)
    memo: dict = {}

    steps: list[tuple[str, Term, str | None, Derivation | None, frozenset[Term]]] = []

    def finish(right_proof: Derivation) -> Derivation:
        node = Derivation("L", "r", Sequent(delta, goal), (), {"right": right_proof})
        for rule, principal, th_name, side, before in reversed(steps):
            aux: dict = {"principal": principal}
            if th_name is not None:
                aux["theory"] = th_name
            if side is not None:
                aux["right"] = side
            node = Derivation("L", rule, Sequent(before, goal), (node,), aux)
        return node

    rp = _right(delta, goal, theories, table, memo)
    if rp is not None:
        return finish(rp)

    while True:
        grew = False
        candidates = []
        for t in sorted(delta, key=lambda u: u.key):
            for rule in _rules_for(t):
                candidates.append((rule, t, None))
        factor_seen = set()
        for th in theories:
            if not th.symbols:
                continue
            for t in sorted(delta | {goal}, key=lambda u: u.key):
                for a in sorted(e_factors(t, th), key=lambda u: u.key):
                    if a not in delta and (a, th.name) not in factor_seen:
                        factor_seen.add((a, th.name))
                        candidates.append(("ls", a, th.name))
        if rng is not None:
            rng.shuffle(candidates)
        for rule, principal, th_name in candidates:
            hit = _apply_left(rule, principal, delta, goal, theories, table, memo)
            if hit is None:
                continue
            added, side = hit
            new = frozenset(added) - delta
            if not new:
                continue
            steps.append((rule, principal, th_name, side, delta))
            delta = delta | new
            grew = True
            rp = _right(delta, goal, theories, table, memo)
            if rp is not None:
                return finish(rp)
        if not grew:
            return None


def deducible(gamma: Iterable[Term], goal: Term, theories) -> bool:
    return deduce(gamma, goal, theories) is not None


# --- independent reference closure ------------------------------------------------


_ORACLE_COMBO_CAP = 200_000


def nd_closure_oracle(gamma: Iterable[Term], goal: Term, theories,
                      depth_bound: int | None = None,
                      coeff_bound: int = 4) -> bool:
    """Forward closure over the natural-deduction rules, for cross-checking.

    Analysis rules run unrestricted inside the known set; introduction rules
    only target saturated subterms, which keeps the closure finite. Equational
    steps enumerate small combinations of known terms directly (fold, then
    normalize), so nothing here depends on the elementary solvers. Exact for
    the empty theory and exclusive-or; for AC it is exact whenever coeff_bound
    is at least the largest multiplicity appearing in the saturated set, and
    for abelian groups coefficients beyond coeff_bound are out of reach.
    Raises OracleBoundExceeded when an enumeration would explode or the depth
    bound runs out before the fixpoint.
    """
    theories = as_theories(theories)
    known = {normalize(t, theories) for t in gamma}
    goal = normalize(goal, theories)
    if not known:
        return False
    index = saturate(known, goal)
    targets = frozenset(index)

    rounds = 0
    while True:
        if goal in known:
            return True
        new = _close_once(known, targets, theories, coeff_bound)
        if not new:
            return goal in known
        known |= new
        rounds += 1
        if depth_bound is not None and rounds >= depth_bound:
            raise OracleBoundExceeded(f"no fixpoint within {depth_bound} rounds")


def _close_once(known: set[Term], targets: frozenset[Term], theories,
                coeff_bound: int) -> set[Term]:
    new: set[Term] = set()

    def add(t: Term) -> None:
        if t not in known:
            new.add(t)

    for t in known:
        if t.kind != CAPP:
            continue
        if t.sym == "pair":
            add(t.args[0])
            add(t.args[1])
        elif t.sym == "enc":
            if t.args[1] in known:
                add(t.args[0])
        elif t.sym == "sign":
            payload, key = t.args
            if capp("pub", (key,)) in known:
                add(payload)
            if payload.kind == CAPP and payload.sym == "blind" and payload.args[1] in known:
                add(sign(payload.args[0], key))
        elif t.sym == "blind":
            if t.args[1] in known:
                add(t.args[0])

    for st in targets:
        if st in known or st.kind != CAPP or st.sym == "pub":
            continue
        if all(a in known for a in st.args):
            add(st)

    for th in theories:
        for t in _equational_step(known, targets, th, theories, coeff_bound):
            add(t)
    return new


def _atom_vector(t: Term, th: Theory) -> dict[Term, int]:
    """Multiplicities of the maximal non-theory subterms of a normal term.

    Interprets the theory arithmetic directly, without the rewrite engine or
    the elementary solvers: sums concatenate, inv flips sign, units vanish,
    everything else is an atom.
    """
    out: dict[Term, int] = {}
    stack = [(t, 1)]
    while stack:
        u, sgn = stack.pop()
        if u.kind == EAPP and u.sym in th.symbols:
            if u.sym == th.ac_symbol:
                stack.extend((a, sgn) for a in u.args)
            elif u.sym == "inv":
                stack.append((u.args[0], -sgn))
            # unit constants contribute nothing
        else:
            out[u] = out.get(u, 0) + sgn
    return out


def _vector_term(counts: dict[Term, int], th: Theory) -> Term | None:
    parts: list[Term] = []
    for atom, c in counts.items():
        if th.backend == "xor":
            c %= 2
        if c > 0:
            parts.extend([atom] * c)
        elif c < 0:
            parts.extend([eapp("inv", (atom,))] * (-c))
    if not parts:
        if th.backend == "xor":
            return eapp("0", ())
        if th.backend == "ag":
            return eapp("1", ())
        return None
    if len(parts) == 1:
        return parts[0]
    return eapp(th.ac_symbol, tuple(parts))


def _equational_step(known: set[Term], targets: frozenset[Term], th: Theory,
                     theories, coeff_bound: int) -> Iterable[Term]:
    if th.backend == "empty":
        return
    members = sorted(known, key=lambda t: t.key)
    vectors = [_atom_vector(m, th) for m in members]
    n = len(members)
    if th.backend == "xor":
        lo, hi = 0, 1
        unit = eapp("0", ())
    elif th.backend == "ac":
        lo, hi = 0, coeff_bound
        unit = None
    else:  # ag
        lo, hi = -coeff_bound, coeff_bound
        unit = eapp("1", ())
    if unit is not None and unit in targets and members:
        # m+m (xor) or m+inv(m) (ag): one coefficient per member cannot say it
        yield unit
    width = hi - lo + 1
    if width ** n > _ORACLE_COMBO_CAP:
        raise OracleBoundExceeded(f"{width}^{n} coefficient vectors is too many")
    for coeffs in itertools.product(range(lo, hi + 1), repeat=n):
        if not any(coeffs):
            continue
        acc: dict[Term, int] = {}
        for vec, c in zip(vectors, coeffs):
            if c:
                for atom, k in vec.items():
                    acc[atom] = acc.get(atom, 0) + c * k
        t = _vector_term(acc, th)
        if t is not None and t in targets:
            yield t
