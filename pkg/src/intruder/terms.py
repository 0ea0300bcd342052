"""Message terms with a canonical AC representation.

Terms are names, variables, constructor applications (pub, sign, blind,
pair, enc) or equational-symbol applications.  The two reserved AC symbols
``+`` and ``*`` are stored flattened with their argument multiset in a fixed
total order, so structural identity coincides with equality modulo AC.
Terms are hash-consed: building the same canonical term twice yields the
same object, which makes term sets behave like shared-DAG node sets.
"""
from __future__ import annotations

import re
import threading
from typing import Iterable, Iterator

NAME, VAR, CAPP, EAPP = range(4)  # also the major sort rank of a head

CONSTRUCTOR_ARITY = {"pub": 1, "sign": 2, "blind": 2, "pair": 2, "enc": 2}
AC_SYMBOLS = ("+", "*")
E_FUNCTION_ARITY = {"+": 2, "*": 2, "inv": 1, "0": 0, "1": 0}

_IDENT = re.compile(r"[a-z][a-zA-Z0-9_]*")


class Term:
    """A hash-consed term node.

    ``kind`` is one of NAME, VAR, CAPP, EAPP; ``sym`` the identifier or head
    symbol; ``args`` the (canonically ordered, flattened for AC) argument
    tuple.  ``key`` is a precomputed structural sort key giving the total
    order used everywhere deterministic output matters.
    """

    __slots__ = ("kind", "sym", "args", "key")

    kind: int
    sym: str
    args: tuple[Term, ...]
    key: tuple

    def __lt__(self, other: Term) -> bool:
        return self.key < other.key

    def __repr__(self) -> str:
        return f"Term({format_term(self)})"

    def __str__(self) -> str:
        return format_term(self)


_intern: dict[tuple, Term] = {}
_intern_lock = threading.Lock()


def _mk(kind: int, sym: str, args: tuple[Term, ...]) -> Term:
    ident = (kind, sym, args)
    t = _intern.get(ident)
    if t is None:
        # double-checked: the dict is the only shared mutable state
        with _intern_lock:
            t = _intern.get(ident)
            if t is None:
                t = object.__new__(Term)
                t.kind = kind
                t.sym = sym
                t.args = args
                t.key = (kind, sym, len(args), tuple(a.key for a in args))
                _intern[ident] = t
    return t


def name(ident: str) -> Term:
    return _mk(NAME, ident, ())


def var(ident: str) -> Term:
    return _mk(VAR, ident, ())


def capp(sym: str, args: Iterable[Term]) -> Term:
    args = tuple(args)
    arity = CONSTRUCTOR_ARITY.get(sym)
    if arity is None:
        raise ValueError(f"unknown constructor {sym!r}")
    if len(args) != arity:
        raise ValueError(f"{sym} expects {arity} arguments, got {len(args)}")
    return _mk(CAPP, sym, args)


def eapp(sym: str, args: Iterable[Term]) -> Term:
    """Build an equational-symbol application, flattening and sorting AC heads."""
    args = tuple(args)
    if sym in AC_SYMBOLS:
        flat: list[Term] = []
        for a in args:
            if a.kind == EAPP and a.sym == sym:
                flat.extend(a.args)
            else:
                flat.append(a)
        if not flat:
            raise ValueError(f"AC symbol {sym!r} needs at least one argument")
        if len(flat) == 1:
            return flat[0]
        return _mk(EAPP, sym, tuple(sorted(flat, key=lambda t: t.key)))
    return _mk(EAPP, sym, args)


def pub(k: Term) -> Term:
    return capp("pub", (k,))


def sign(m: Term, k: Term) -> Term:
    return capp("sign", (m, k))


def blind(m: Term, r: Term) -> Term:
    return capp("blind", (m, r))


def pair(a: Term, b: Term) -> Term:
    return capp("pair", (a, b))


def enc(m: Term, k: Term) -> Term:
    return capp("enc", (m, k))


def canonicalize(t: Term) -> Term:
    """Rebuild a term bottom-up through the smart constructors (idempotent)."""
    if not t.args:
        return t
    args = tuple(canonicalize(a) for a in t.args)
    if t.kind == CAPP:
        return capp(t.sym, args)
    return eapp(t.sym, args)


def equal_mod_ac(s: Term, t: Term) -> bool:
    """Equality modulo AC; on canonical terms this is object identity."""
    return canonicalize(s) is canonicalize(t)


def subterms(t: Term) -> frozenset[Term]:
    """All subterms of ``t``, with AC arguments read from the flattened node."""
    seen: set[Term] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(u.args)
    return frozenset(seen)


def proper_subterms(t: Term) -> frozenset[Term]:
    return subterms(t) - {t}


def immediate_subterms(t: Term) -> tuple[Term, ...]:
    return t.args


def size(t: Term) -> int:
    """Number of symbol, name and variable occurrences.

    A flattened AC node with n arguments counts as the n-1 binary
    applications it abbreviates, so size agrees with the unflattened tree.
    """
    if not t.args:
        return 1
    own = len(t.args) - 1 if t.sym in AC_SYMBOLS and t.kind == EAPP else 1
    return own + sum(size(a) for a in t.args)


def variables(t: Term) -> frozenset[Term]:
    return frozenset(u for u in subterms(t) if u.kind == VAR)


def is_ground(t: Term) -> bool:
    return not variables(t)


def substitute(t: Term, mapping: dict[Term, Term]) -> Term:
    """Apply a variable substitution, re-canonicalizing on the way up."""
    if not mapping:
        return t
    if t.kind == VAR:
        return mapping.get(t, t)
    if not t.args:
        return t
    args = tuple(substitute(a, mapping) for a in t.args)
    if args == t.args:
        return t
    if t.kind == CAPP:
        return capp(t.sym, args)
    return eapp(t.sym, args)


# --- theory-relative structure ---------------------------------------------


def is_e_alien(t: Term, theory) -> bool:
    """True if ``t`` is headed by a symbol outside the theory's signature.

    Names and variables are not headed by any symbol, hence never alien.
    """
    if t.kind == CAPP:
        return True
    if t.kind == EAPP:
        return t.sym not in theory.symbols
    return False


def e_factors(t: Term, theory) -> frozenset[Term]:
    """Alien immediate subterms of the theory-headed subterms of ``t``."""
    out: set[Term] = set()
    for u in subterms(t):
        if u.kind == EAPP and u.sym in theory.symbols:
            for a in u.args:
                if is_e_alien(a, theory):
                    out.add(a)
    return frozenset(out)


class TermIndex:
    """The saturated node set of a deduction problem.

    Holds St(Gamma ∪ {goal}): the problem terms, their proper subterms, and
    every sign(A, B) over pairs of proper subterms.  Nodes carry their
    origin tags through ``in_gamma`` / ``is_goal``.
    """

    __slots__ = ("gamma", "goal", "nodes")

    def __init__(self, gamma: frozenset[Term], goal: Term, nodes: frozenset[Term]):
        self.gamma = gamma
        self.goal = goal
        self.nodes = nodes

    @property
    def size(self) -> int:
        return len(self.nodes)

    def __contains__(self, t: Term) -> bool:
        return t in self.nodes

    def __iter__(self) -> Iterator[Term]:
        return iter(sorted(self.nodes, key=lambda t: t.key))

    def in_gamma(self, t: Term) -> bool:
        return t in self.gamma

    def is_goal(self, t: Term) -> bool:
        return t is self.goal


def saturate(gamma: Iterable[Term], goal: Term) -> TermIndex:
    gamma = frozenset(gamma)
    base = gamma | {goal}
    pst: set[Term] = set()
    for t in base:
        pst |= proper_subterms(t)
    # sst exists to absorb the sign terms the signature-extraction rule can
    # create; only that rule introduces them and it needs one to start from,
    # so a sign-free problem never leaves base ∪ pst.
    sst: set[Term] = set()
    if any(t.kind == CAPP and t.sym == "sign" for t in base | pst):
        sorted_pst = sorted(pst, key=lambda t: t.key)
        sst = {sign(a, b) for a in sorted_pst for b in sorted_pst}
    return TermIndex(gamma, goal, frozenset(base | pst | sst))


# --- concrete syntax --------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (column {pos + 1})")
        self.pos = pos


_TOKEN = re.compile(
    r"\s*(?:(?P<var>\?[a-z][a-zA-Z0-9_]*)|(?P<ident>[a-z][a-zA-Z0-9_]*)"
    r"|(?P<zero>0)|(?P<one>1)|(?P<punct>[(),+*]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos:].lstrip()[0]!r}",
                             len(text) - len(text[pos:].lstrip()))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, pos = self.next()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Term:
        t = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {text!r}", pos)
        return t

    def sum(self) -> Term:
        parts = [self.product()]
        while self.peek()[1] == "+":
            self.next()
            parts.append(self.product())
        return parts[0] if len(parts) == 1 else eapp("+", parts)

    def product(self) -> Term:
        parts = [self.atom()]
        while self.peek()[1] == "*":
            self.next()
            parts.append(self.atom())
        return parts[0] if len(parts) == 1 else eapp("*", parts)

    def atom(self) -> Term:
        kind, text, pos = self.next()
        if kind == "zero":
            return eapp("0", ())
        if kind == "one":
            return eapp("1", ())
        if kind == "var":
            return var(text[1:])
        if kind == "punct" and text == "(":
            t = self.sum()
            self.expect(")")
            return t
        if kind == "ident":
            if self.peek()[1] != "(":
                return name(text)
            self.next()
            args = [self.sum()]
            while self.peek()[1] == ",":
                self.next()
                args.append(self.sum())
            self.expect(")")
            if text in CONSTRUCTOR_ARITY:
                if len(args) != CONSTRUCTOR_ARITY[text]:
                    raise ParseError(
                        f"{text} expects {CONSTRUCTOR_ARITY[text]} arguments, got {len(args)}", pos)
                return capp(text, args)
            if text == "inv":
                if len(args) != 1:
                    raise ParseError(f"inv expects 1 argument, got {len(args)}", pos)
                return eapp("inv", args)
            raise ParseError(f"unknown function {text!r}", pos)
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse_term(text: str) -> Term:
    """Parse the concrete term grammar; raises ParseError with a column."""
    return _Parser(text).parse()


_PRECEDENCE = {"+": 1, "*": 2}


def format_term(t: Term) -> str:
    """Print a term so that parse_term(format_term(t)) is t."""
    if t.kind in (NAME, VAR):
        return t.sym if t.kind == NAME else "?" + t.sym
    if t.kind == EAPP and t.sym in AC_SYMBOLS:
        parts = []
        for a in t.args:
            s = format_term(a)
            if a.kind == EAPP and a.sym in AC_SYMBOLS and _PRECEDENCE[a.sym] < _PRECEDENCE[t.sym]:
                s = f"({s})"
            parts.append(s)
        return t.sym.join(parts)
    if not t.args:
        return t.sym
    return f"{t.sym}({','.join(format_term(a) for a in t.args)})"
