"""Elementary deduction: can one theory's contexts build the goal from Gamma?

A witness cites the context, one theory at a time: a matching member for the
empty theory, hole multiplicities for plain AC, a fold of cited members for
exclusive-or, and signed integer coefficients for abelian groups.  Contexts
must contain at least one hole, so the group unit is only deducible from a
non-empty Gamma, through the paired context x + inv(x) filled twice with the
same member (and x + x for exclusive-or).

All decisions run on variable-abstracted problems: alien subterms collapse
to class variables, after which membership, a natural-number multiset
equation, GF(2) elimination, or exact integer elimination settles the
question.  Inputs are expected in normal form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .rewriting import Abstraction, Theory, abstract, as_theories, normalize
from .terms import EAPP, NAME, Term, VAR, eapp


@dataclass(frozen=True)
class ElemWitness:
    """A checkable context certificate for one elementary judgement."""

    theory: str
    kind: str  # backend tag: empty | ac | xor | ag
    entries: tuple

    def holes(self) -> int:
        if self.kind == "empty":
            return 1
        if self.kind == "xor":
            return len(self.entries)
        return sum(abs(c) for _, c in self.entries)


def elem_deduce(theory: Theory, gamma: Iterable[Term], goal: Term,
                table: Abstraction | None = None,
                theories: Sequence[Theory] | None = None) -> ElemWitness | None:
    """Decide whether some context over the theory maps Gamma members to goal."""
    gamma = sorted(set(gamma), key=lambda t: t.key)
    theories = as_theories(theories) if theories is not None else (theory,)
    if theory.backend == "empty":
        if goal in gamma:
            return ElemWitness(theory.name, "empty", (goal,))
        return None
    if table is None:
        table = Abstraction(theories)
    if theory.backend == "ac":
        return _decide_ac(theory, gamma, goal, table)
    if theory.backend == "xor":
        return _decide_xor(theory, gamma, goal, table)
    if theory.backend == "ag":
        return _decide_ag(theory, gamma, goal, table)
    raise ValueError(f"theory {theory.name!r} has no elementary backend")


def replay(witness: ElemWitness, gamma: Iterable[Term], theories) -> Term:
    """Instantiate the witnessed context and normalize; raises on malformed input."""
    gamma = set(gamma)
    theories = as_theories(theories)
    by_name = {th.name: th for th in theories}
    th = by_name.get(witness.theory)
    if th is None:
        raise ValueError(f"witness cites unknown theory {witness.theory!r}")
    if witness.kind == "empty":
        (elem,) = witness.entries
        _cited(elem, gamma)
        return normalize(elem, theories)
    op = th.ac_symbol
    if op is None:
        raise ValueError(f"theory {witness.theory!r} has no AC symbol to fold with")
    parts: list[Term] = []
    if witness.kind == "xor":
        for elem in witness.entries:
            _cited(elem, gamma)
            parts.append(elem)
    elif witness.kind == "ac":
        for elem, count in witness.entries:
            _cited(elem, gamma)
            if count < 1:
                raise ValueError("AC witness multiplicities must be positive")
            parts.extend([elem] * count)
    elif witness.kind == "ag":
        for elem, coeff in witness.entries:
            _cited(elem, gamma)
            if coeff == 0:
                raise ValueError("AG witness coefficients must be non-zero")
            piece = elem if coeff > 0 else eapp("inv", (elem,))
            parts.extend([piece] * abs(coeff))
    else:
        raise ValueError(f"unknown witness kind {witness.kind!r}")
    if not parts:
        raise ValueError("contexts must contain at least one hole")
    folded = parts[0] if len(parts) == 1 else eapp(op, parts)
    return normalize(folded, theories)


def _cited(elem: Term, gamma: set[Term]) -> None:
    if elem not in gamma:
        raise ValueError(f"witness cites {elem} outside Gamma")


# --- vector extraction on abstracted pure terms ------------------------------


def _vec(t: Term, theory: Theory, table: Abstraction, signed: bool) -> dict[Term, int]:
    """Atom-count vector of the abstraction of ``t`` for one constituent."""
    pure = abstract(t, theory, table)
    out: dict[Term, int] = {}
    for part, coeff in _parts(pure, theory, signed):
        out[part] = out.get(part, 0) + coeff
        if not out[part]:
            del out[part]
    return out


def _parts(pure: Term, theory: Theory, signed: bool):
    op = theory.ac_symbol
    if pure.kind == EAPP and pure.sym == op:
        for a in pure.args:
            yield from _parts(a, theory, signed)
    elif pure.kind == EAPP and pure.sym == "inv" and signed:
        ((atom, c),) = list(_parts(pure.args[0], theory, signed))
        yield atom, -c
    elif pure.kind == EAPP and not pure.args:  # the unit constant
        return
    elif pure.kind in (NAME, VAR):
        yield pure, 1
    else:
        raise ValueError(f"not a pure abstracted term: {pure}")


# --- backends ----------------------------------------------------------------


def _decide_ac(theory: Theory, gamma: list[Term], goal: Term,
               table: Abstraction) -> ElemWitness | None:
    target = _vec(goal, theory, table, signed=False)
    vecs = [_vec(g, theory, table, signed=False) for g in gamma]
    counts = _solve_nat(vecs, target)
    if counts is None:
        return None
    entries = tuple((g, c) for g, c in zip(gamma, counts) if c)
    return ElemWitness(theory.name, "ac", entries)


def _solve_nat(vecs: list[dict[Term, int]], target: dict[Term, int]) -> list[int] | None:
    """Natural-number solution of sum(c_i * vec_i) = target, exact and total >= 1."""

    def rec(i: int, remaining: dict[Term, int]) -> list[int] | None:
        if not remaining:
            return [0] * (len(vecs) - i)
        if i == len(vecs):
            return None
        v = vecs[i]
        bound = min((remaining.get(a, 0) // c for a, c in v.items()), default=0)
        for c in range(bound, -1, -1):
            rest = dict(remaining)
            ok = True
            for a, n in v.items():
                rest[a] = rest.get(a, 0) - c * n
                if rest[a] < 0:
                    ok = False
                    break
                if not rest[a]:
                    del rest[a]
            if not ok:
                continue
            tail = rec(i + 1, rest)
            if tail is not None:
                return [c] + tail
        return None

    sol = rec(0, dict(target))
    if sol is None or not any(sol):
        return None
    return sol


def _decide_xor(theory: Theory, gamma: list[Term], goal: Term,
                table: Abstraction) -> ElemWitness | None:
    target = _vec(goal, theory, table, signed=False)
    if not target:  # the goal is the zero constant
        if gamma:
            g = gamma[0]
            return ElemWitness(theory.name, "xor", (g, g))
        return None
    atoms = sorted(set(target) | {a for g in gamma for a in _vec(g, theory, table, False)},
                   key=lambda t: t.key)
    bit = {a: 1 << i for i, a in enumerate(atoms)}
    masks = []
    for g in gamma:
        m = 0
        for a in _vec(g, theory, table, signed=False):
            m |= bit[a]
        masks.append(m)
    want = 0
    for a in target:
        want |= bit[a]
    combo = _solve_gf2(masks, want)
    if combo is None:
        return None
    return ElemWitness(theory.name, "xor", tuple(gamma[i] for i in combo))


def _solve_gf2(masks: list[int], target: int) -> list[int] | None:
    """Indices of a subset of masks whose xor equals target, by elimination."""
    basis: list[tuple[int, int]] = []  # (vector, index-set bitmap)
    for i, m in enumerate(masks):
        combo = 1 << i
        v = m
        for bv, bc in basis:
            pivot = bv & -bv
            if v & pivot:
                v ^= bv
                combo ^= bc
        if v:
            basis.append((v, combo))
    v, combo = target, 0
    for bv, bc in basis:
        pivot = bv & -bv
        if v & pivot:
            v ^= bv
            combo ^= bc
    if v:
        return None
    return [i for i in range(len(masks)) if combo >> i & 1]


def _decide_ag(theory: Theory, gamma: list[Term], goal: Term,
               table: Abstraction) -> ElemWitness | None:
    target = _vec(goal, theory, table, signed=True)
    if not target:  # the goal is the group unit
        if gamma:
            g = gamma[0]
            return ElemWitness(theory.name, "ag", ((g, 1), (g, -1)))
        return None
    vecs = [_vec(g, theory, table, signed=True) for g in gamma]
    atoms = sorted(set(target) | {a for v in vecs for a in v}, key=lambda t: t.key)
    rows = [[v.get(a, 0) for v in vecs] for a in atoms]
    b = [target.get(a, 0) for a in atoms]
    coeffs = _solve_int(rows, b)
    if coeffs is None:
        return None
    entries = tuple((g, c) for g, c in zip(gamma, coeffs) if c)
    return ElemWitness(theory.name, "ag", entries)


def _solve_int(rows: list[list[int]], b: list[int]) -> list[int] | None:
    """An integer solution x of A x = b, by column elimination (Hermite style).

    Column operations are accumulated in a unimodular transform so a solution
    of the triangular system pulls back to the original variables.  Exact
    integer arithmetic throughout.
    """
    m = len(rows)
    n = len(rows[0]) if rows else 0
    a = [row[:] for row in rows]
    u = [[int(i == j) for j in range(n)] for i in range(n)]  # column transform

    def col_sub(j: int, k: int, q: int) -> None:
        for i in range(m):
            a[i][j] -= q * a[i][k]
        for i in range(n):
            u[i][j] -= q * u[i][k]

    def col_swap(j: int, k: int) -> None:
        for i in range(m):
            a[i][j], a[i][k] = a[i][k], a[i][j]
        for i in range(n):
            u[i][j], u[i][k] = u[i][k], u[i][j]

    lead = 0
    pivots: list[tuple[int, int]] = []
    for r in range(m):
        while True:
            cols = [j for j in range(lead, n) if a[r][j]]
            if not cols:
                break
            j0 = min(cols, key=lambda j: abs(a[r][j]))
            col_swap(lead, j0)
            done = True
            for j in range(lead + 1, n):
                if a[r][j]:
                    col_sub(j, lead, a[r][j] // a[r][lead])
                    if a[r][j]:
                        done = False
            if done:
                break
        if lead < n and a[r][lead]:
            pivots.append((r, lead))
            lead += 1
    y = [0] * n
    used = set()
    for r, j in pivots:
        resid = b[r] - sum(a[r][k] * y[k] for k in used)
        if resid % a[r][j]:
            return None
        y[j] = resid // a[r][j]
        used.add(j)
    # rows without a pivot must be consistent
    pivot_rows = {r for r, _ in pivots}
    for r in range(m):
        if r not in pivot_rows and sum(a[r][k] * y[k] for k in range(n)) != b[r]:
            return None
    x = [sum(u[i][j] * y[j] for j in range(n)) for i in range(n)]
    for r in range(m):  # exactness check is cheap at this scale
        assert sum(rows[r][i] * x[i] for i in range(n)) == b[r]
    return x
