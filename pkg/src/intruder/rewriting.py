"""Equational theories and rewriting modulo AC.

A theory bundles a signature, at most one AC symbol, an AC-convergent rule
set and the tag of its elementary-deduction backend.  Normalization rewrites
with the rules plus their AC extensions (lhs + z -> rhs + z for AC-headed
left sides), which realizes class rewriting on the flattened representation.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .terms import (
    AC_SYMBOLS, EAPP, NAME, VAR, Term, capp, eapp, substitute, var, variables,
)


class NormalizationBudgetExceeded(RuntimeError):
    """Raised when normalize() spends its step budget; suspect non-termination."""


@dataclass(frozen=True)
class RewriteRule:
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if not variables(self.rhs) <= variables(self.lhs):
            raise ValueError("rewrite rule introduces variables on the right")


class Theory:
    """One equational constituent: signature, AC symbol, rules, backend tag."""

    def __init__(self, name: str, symbols: dict[str, int], ac_symbol: str | None,
                 rules: Sequence[RewriteRule], backend: str):
        if ac_symbol is not None and ac_symbol not in AC_SYMBOLS:
            raise ValueError(f"{ac_symbol!r} is not a reserved AC symbol")
        self.name = name
        self.symbols = dict(symbols)
        self.ac_symbol = ac_symbol
        self.rules = tuple(rules)
        self.backend = backend

    def __repr__(self) -> str:
        return f"Theory({self.name})"


def _x() -> Term:
    return var("x")


def _y() -> Term:
    return var("y")


@lru_cache(maxsize=None)
def empty_theory() -> Theory:
    return Theory("empty", {}, None, (), "empty")


@lru_cache(maxsize=None)
def ac_theory(op: str = "+") -> Theory:
    return Theory("ac", {op: 2}, op, (), "ac")


@lru_cache(maxsize=None)
def xor_theory(op: str = "+") -> Theory:
    zero = eapp("0", ())
    rules = (
        RewriteRule(eapp(op, (_x(), _x())), zero),
        RewriteRule(eapp(op, (_x(), zero)), _x()),
    )
    return Theory("xor", {op: 2, "0": 0}, op, rules, "xor")


@lru_cache(maxsize=None)
def ag_theory(op: str = "+") -> Theory:
    one = eapp("1", ())
    inv_x = eapp("inv", (_x(),))
    rules = (
        RewriteRule(eapp(op, (_x(), one)), _x()),
        RewriteRule(eapp(op, (_x(), inv_x)), one),
        RewriteRule(eapp("inv", (one,)), one),
        RewriteRule(eapp("inv", (inv_x,)), _x()),
        RewriteRule(eapp("inv", (eapp(op, (_x(), _y())),)),
                    eapp(op, (inv_x, eapp("inv", (_y(),))))),
        RewriteRule(eapp(op, (_x(), inv_x, _y())), _y()),
    )
    return Theory("ag", {op: 2, "1": 0, "inv": 1}, op, rules, "ag")


THEORY_BUILDERS = {
    "empty": empty_theory,
    "ac": ac_theory,
    "xor": xor_theory,
    "ag": ag_theory,
}


def make_theories(names: Sequence[str]) -> tuple[Theory, ...]:
    """Instantiate builtin theories, assigning + then * to the AC users.

    The constituents of a combination must have pairwise disjoint signatures.
    """
    theories = []
    ops = iter(AC_SYMBOLS)
    for n in names:
        builder = THEORY_BUILDERS.get(n)
        if builder is None:
            raise ValueError(f"unknown theory {n!r}")
        if n == "empty":
            theories.append(builder())
            continue
        try:
            theories.append(builder(next(ops)))
        except StopIteration:
            raise ValueError("at most two AC theories can be combined") from None
    seen: set[str] = set()
    for th in theories:
        overlap = seen & th.symbols.keys()
        if overlap:
            raise ValueError(f"combined signatures overlap on {sorted(overlap)}")
        seen |= th.symbols.keys()
    return tuple(theories)


def as_theories(theories) -> tuple[Theory, ...]:
    if isinstance(theories, Theory):
        return (theories,)
    out = tuple(theories)
    return out if out else (empty_theory(),)


# --- matching modulo AC -----------------------------------------------------


def match_mod_ac(pattern: Term, subject: Term) -> list[dict[Term, Term]]:
    """The complete set of substitutions s with pattern*s equal to subject mod AC."""
    return [dict(env) for env in _match_cached(pattern, subject)]


@lru_cache(maxsize=65536)
def _match_cached(pattern: Term, subject: Term) -> tuple[tuple[tuple[Term, Term], ...], ...]:
    seen: set[tuple] = set()
    out = []
    for env in _match(pattern, subject, {}):
        frozen = tuple(sorted(env.items(), key=lambda kv: kv[0].key))
        if frozen not in seen:
            seen.add(frozen)
            out.append(frozen)
    return tuple(out)


def _match(p: Term, s: Term, env: dict[Term, Term]) -> Iterator[dict[Term, Term]]:
    if p.kind == VAR:
        bound = env.get(p)
        if bound is not None:
            if bound is s:
                yield env
        else:
            ext = dict(env)
            ext[p] = s
            yield ext
        return
    if p.kind == NAME:
        if p is s:
            yield env
        return
    if p.kind == EAPP and p.sym in AC_SYMBOLS:
        if s.kind == EAPP and s.sym == p.sym:
            yield from _match_ac(p.sym, p.args, Counter(s.args), env)
        return
    if p.kind == s.kind and p.sym == s.sym and len(p.args) == len(s.args):
        envs = [env]
        for pa, sa in zip(p.args, s.args):
            envs = [e2 for e1 in envs for e2 in _match(pa, sa, e1)]
            if not envs:
                return
        yield from envs


def _match_ac(sym: str, pargs: tuple[Term, ...], sargs: Counter,
              env: dict[Term, Term]) -> Iterator[dict[Term, Term]]:
    # ground-unfriendly arguments first: structural patterns, then bound
    # variables, then free variables absorbing submultisets
    order = sorted(pargs, key=lambda t: (t.kind == VAR, t.key))
    yield from _match_ac_rec(sym, order, sargs, env)


def _match_ac_rec(sym: str, pargs: list[Term], sargs: Counter,
                  env: dict[Term, Term]) -> Iterator[dict[Term, Term]]:
    if not pargs:
        if not +sargs:
            yield env
        return
    p, rest = pargs[0], pargs[1:]
    if p.kind == VAR and p in env:
        parts = _ac_parts(sym, env[p])
        if all(sargs[u] >= c for u, c in parts.items()):
            yield from _match_ac_rec(sym, rest, sargs - parts, env)
        return
    if p.kind == VAR:
        remaining = +sargs
        if not remaining:
            return
        if not rest:
            ext = dict(env)
            ext[p] = _ac_join(sym, remaining)
            yield ext
            return
        for sub in _nonempty_submultisets(remaining):
            ext = dict(env)
            ext[p] = _ac_join(sym, sub)
            yield from _match_ac_rec(sym, rest, sargs - sub, ext)
        return
    for u in sorted(+sargs, key=lambda t: t.key):
        for env2 in _match(p, u, env):
            yield from _match_ac_rec(sym, rest, sargs - Counter((u,)), env2)


def _ac_parts(sym: str, t: Term) -> Counter:
    if t.kind == EAPP and t.sym == sym:
        return Counter(t.args)
    return Counter((t,))


def _ac_join(sym: str, parts: Counter) -> Term:
    flat = list(parts.elements())
    return flat[0] if len(flat) == 1 else eapp(sym, flat)


def _nonempty_submultisets(bag: Counter) -> Iterator[Counter]:
    items = sorted(bag.items(), key=lambda kv: kv[0].key)
    ranges = [range(c + 1) for _, c in items]
    for counts in itertools.product(*ranges):
        if not any(counts):
            continue
        yield Counter({u: c for (u, _), c in zip(items, counts) if c})


# --- normalization ----------------------------------------------------------

_EXT_VAR = var("_z")  # reserved: the parser cannot produce a leading underscore

DEFAULT_MAX_STEPS = 10 ** 6


def _compiled_rules(theories: tuple[Theory, ...]) -> tuple[tuple[Term, Term], ...]:
    out = []
    for th in theories:
        for rule in th.rules:
            out.append((rule.lhs, rule.rhs))
            lhs = rule.lhs
            if lhs.kind == EAPP and lhs.sym in AC_SYMBOLS:
                out.append((eapp(lhs.sym, lhs.args + (_EXT_VAR,)),
                            eapp(lhs.sym, (rule.rhs, _EXT_VAR))))
    return tuple(out)


def _root_step(t: Term, rules) -> Term | None:
    for lhs, rhs in rules:
        for env in _match_cached(lhs, t):
            return substitute(rhs, dict(env))
    return None


def normalize(t: Term, theories, max_steps: int = DEFAULT_MAX_STEPS,
              strategy: str = "innermost") -> Term:
    """The unique normal form of ``t`` modulo AC.

    Convergence makes the redex strategy irrelevant for the result; the
    innermost default is the fast path, the others exist so tests can check
    exactly that.  Raises NormalizationBudgetExceeded after max_steps rule
    applications.
    """
    theories = as_theories(theories)
    rules = _compiled_rules(theories)
    if not rules:
        return t
    budget = [max_steps]
    if strategy == "innermost":
        return _norm_inner(t, rules, budget, {})
    if strategy == "outermost":
        cur = t
        while True:
            nxt = _step_outer(cur, rules)
            if nxt is None:
                return cur
            _spend(budget)
            cur = nxt
    raise ValueError(f"unknown strategy {strategy!r}")


def _spend(budget: list[int]) -> None:
    budget[0] -= 1
    if budget[0] < 0:
        raise NormalizationBudgetExceeded("normalization step budget exhausted")


def _norm_inner(t: Term, rules, budget, cache: dict[Term, Term]) -> Term:
    done = cache.get(t)
    if done is not None:
        return done
    cur = t
    if cur.args:
        args = tuple(_norm_inner(a, rules, budget, cache) for a in cur.args)
        if args != cur.args:
            cur = eapp(cur.sym, args) if cur.kind == EAPP else _rebuild_capp(cur, args)
    while True:
        red = _root_step(cur, rules)
        if red is None:
            break
        _spend(budget)
        if red.args:
            args = tuple(_norm_inner(a, rules, budget, cache) for a in red.args)
            red = eapp(red.sym, args) if red.kind == EAPP else _rebuild_capp(red, args)
        cur = red
    cache[t] = cur
    cache[cur] = cur
    return cur


def _rebuild_capp(t: Term, args: tuple[Term, ...]) -> Term:
    return capp(t.sym, args)


def _step_outer(t: Term, rules) -> Term | None:
    red = _root_step(t, rules)
    if red is not None:
        return red
    for i, a in enumerate(t.args):
        sub = _step_outer(a, rules)
        if sub is not None:
            args = t.args[:i] + (sub,) + t.args[i + 1:]
            return eapp(t.sym, args) if t.kind == EAPP else _rebuild_capp(t, args)
    return None


def one_step_rewrites(t: Term, theories) -> frozenset[Term]:
    """Every term reachable from ``t`` by a single rewrite step modulo AC."""
    rules = _compiled_rules(as_theories(theories))
    out: set[Term] = set()
    for lhs, rhs in rules:
        for env in _match_cached(lhs, t):
            out.add(substitute(rhs, dict(env)))
    for i, a in enumerate(t.args):
        for sub in one_step_rewrites(a, theories):
            args = t.args[:i] + (sub,) + t.args[i + 1:]
            out.add(eapp(t.sym, args) if t.kind == EAPP else _rebuild_capp(t, args))
    return frozenset(out)


def is_normal(t: Term, theories) -> bool:
    theories = as_theories(theories)
    return normalize(t, theories) is t


# --- variable abstraction ---------------------------------------------------


class Abstraction:
    """The v_E table: one fresh variable per equivalence class of alien terms.

    Keys are normal forms under the combined theory, so two terms get the
    same variable exactly when they are equal modulo E.  One table serves
    all constituents of one problem instance.
    """

    def __init__(self, theories):
        self.theories = as_theories(theories)
        self.table: dict[Term, Term] = {}
        self._n = 0

    def var_for(self, t: Term) -> Term:
        key = normalize(t, self.theories)
        v = self.table.get(key)
        if v is None:
            self._n += 1
            v = var(f"v{self._n}")
            self.table[key] = v
        return v


def abstract(t: Term, theory: Theory, table: Abstraction) -> Term:
    """Replace maximal alien subterms of a ground term by class variables.

    Symbols of the given constituent are kept; everything else headed by a
    symbol collapses to the table's variable for its class.
    """
    if t.kind == NAME:
        return t
    if t.kind == EAPP and t.sym in theory.symbols:
        if not t.args:
            return t
        return eapp(t.sym, tuple(abstract(a, theory, table) for a in t.args))
    return table.var_for(t)
