"""Deducibility constraints for the pair/enc intruder and their reduction.

A system is a sequence of constraints Sigma |- M (proper) or Sigma |-R M
(right, synthesis only) over terms built from names, variables, pairing and
symmetric encryption, together with a public name the intruder holds in
every Sigma. Reduction rules C1 to C5 rewrite a system while instantiating
variables, terminating because a lexicographic measure drops at every step;
systems whose constraints are all right constraints with variable goals are
solved, and any assignment of deducible values to those variables (the
public name is always one) yields a solution.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

from .terms import (CAPP, NAME, VAR, Term, format_term, parse_term, size,
                    substitute, variables)

PROPER = "proper"
RIGHT = "right"

_SPLITTABLE = ("pair", "enc")


@dataclass(frozen=True)
class Constraint:
    kind: str
    sigma: frozenset[Term]
    goal: Term

    def __repr__(self) -> str:
        left = ", ".join(format_term(t) for t in sorted(self.sigma, key=lambda u: u.key))
        sep = "|-" if self.kind == PROPER else "|-R"
        return f"{left} {sep} {format_term(self.goal)}"

    def is_solved(self) -> bool:
        return self.kind == RIGHT and self.goal.kind == VAR


@dataclass(frozen=True)
class ConstraintSystem:
    constraints: tuple[Constraint, ...]
    public_name: Term | None = None

    def __repr__(self) -> str:
        head = [f"public {format_term(self.public_name)}"] if self.public_name else []
        return "\n".join(head + [repr(c) for c in self.constraints])

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def is_solved(self) -> bool:
        return all(c.is_solved() for c in self.constraints)

    def variables(self) -> frozenset[Term]:
        out: set[Term] = set()
        for c in self.constraints:
            out |= variables(c.goal)
            for t in c.sigma:
                out |= variables(t)
        return frozenset(out)

    def replace(self, constraints: tuple[Constraint, ...]) -> ConstraintSystem:
        return ConstraintSystem(constraints, self.public_name)


def proper(sigma: Iterable[Term], goal: Term) -> Constraint:
    return Constraint(PROPER, frozenset(sigma), goal)


def right(sigma: Iterable[Term], goal: Term) -> Constraint:
    return Constraint(RIGHT, frozenset(sigma), goal)


def system(*constraints: Constraint, public_name: Term | None = None) -> ConstraintSystem:
    s = ConstraintSystem(tuple(constraints), public_name)
    if public_name is None:
        shared = shared_names(s)
        if shared:
            s = ConstraintSystem(s.constraints, min(shared, key=lambda t: t.key))
    return s


@dataclass(frozen=True)
class Substitution:
    pairs: tuple[tuple[Term, Term], ...] = ()

    @staticmethod
    def of(mapping: dict[Term, Term]) -> Substitution:
        items = tuple(sorted(((v, t) for v, t in mapping.items() if v is not t),
                             key=lambda vt: vt[0].key))
        return Substitution(items)

    def as_dict(self) -> dict[Term, Term]:
        return dict(self.pairs)

    def is_identity(self) -> bool:
        return not self.pairs

    def __call__(self, t: Term) -> Term:
        return substitute(t, self.as_dict())

    def apply_constraint(self, c: Constraint) -> Constraint:
        m = self.as_dict()
        return Constraint(c.kind, frozenset(substitute(t, m) for t in c.sigma),
                          substitute(c.goal, m))

    def apply_system(self, s: ConstraintSystem) -> ConstraintSystem:
        return s.replace(tuple(self.apply_constraint(c) for c in s.constraints))

    def compose(self, later: Substitution) -> Substitution:
        """The substitution acting as self first, then later."""
        m = later.as_dict()
        out = {v: substitute(t, m) for v, t in self.pairs}
        for v, t in later.pairs:
            out.setdefault(v, t)
        return Substitution.of(out)

    def restrict(self, keep: Iterable[Term]) -> Substitution:
        keep = set(keep)
        return Substitution(tuple((v, t) for v, t in self.pairs if v in keep))

    def __repr__(self) -> str:
        if not self.pairs:
            return "{}"
        inner = ", ".join(f"{format_term(v)} := {format_term(t)}" for v, t in self.pairs)
        return "{" + inner + "}"


def mgu(s: Term, t: Term) -> Substitution | None:
    """Most general syntactic unifier, or None. AC symbols are not unified
    modulo their axioms; constraint terms never contain them."""
    binding: dict[Term, Term] = {}
    stack = [(s, t)]
    while stack:
        a, b = stack.pop()
        a = substitute(a, binding)
        b = substitute(b, binding)
        if a is b:
            continue
        if a.kind == VAR or b.kind == VAR:
            if b.kind == VAR and a.kind != VAR:
                a, b = b, a
            if a in variables(b):
                return None
            one = {a: b}
            binding = {v: substitute(u, one) for v, u in binding.items()}
            binding[a] = b
            continue
        if a.kind != b.kind or a.sym != b.sym or len(a.args) != len(b.args):
            return None
        stack.extend(zip(a.args, b.args))
    return Substitution.of(binding)


# --- well-formedness -------------------------------------------------------------


def _constructor_only(t: Term) -> bool:
    if t.kind in (NAME, VAR):
        return True
    if t.kind == CAPP and t.sym in _SPLITTABLE:
        return all(_constructor_only(a) for a in t.args)
    return False


def shared_names(s: ConstraintSystem) -> frozenset[Term]:
    """Names the intruder holds in every knowledge set of the system."""
    common: set[Term] | None = None
    for c in s.constraints:
        held = {t for t in c.sigma if t.kind == NAME}
        common = held if common is None else common & held
    return frozenset(common or ())


def effective_public(s: ConstraintSystem) -> Term | None:
    if s.public_name is not None:
        return s.public_name
    shared = shared_names(s)
    return min(shared, key=lambda t: t.key) if shared else None


def well_formed(s: ConstraintSystem) -> list[str]:
    """Violation messages; empty means the system is admissible for solve().

    Condition 1 (knowledge monotonicity) passes outright when the left sides
    form an inclusion chain; where inclusion fails, an earlier left side must
    be re-derivable from the later one, restricted to terms whose variables
    the earlier side knows, helped by the goals already posted before it.
    Reduction steps that rewrite left sides keep that weaker reading true
    even though they break the chain. Condition 2 is variable origination:
    a variable enters a left side only after a goal introduced it.
    """
    problems = []
    for i, c in enumerate(s.constraints):
        for t in list(c.sigma) + [c.goal]:
            if not _constructor_only(t):
                problems.append(f"constraint {i}: {format_term(t)} uses symbols "
                                "outside pair, enc, names, and variables")
    pub = effective_public(s)
    if s.constraints and pub is None:
        problems.append("no public name is shared by every knowledge set")
    elif s.public_name is not None:
        for i, c in enumerate(s.constraints):
            if s.public_name not in c.sigma:
                problems.append(f"public name {format_term(s.public_name)} missing "
                                f"from knowledge set {i}")
                break
    if not _originating(s):
        problems.append("condition 2 (variable origination): a variable occurs in "
                        "a knowledge set before any goal introduces it")
    for i, j in _monotone_failures(s):
        problems.append(f"condition 1 (knowledge monotonicity): knowledge set {i} "
                        f"is not recoverable at constraint {j}")
    return problems


def _originating(s: ConstraintSystem) -> bool:
    seen: set[Term] = set()
    for c in s.constraints:
        for t in c.sigma:
            if not variables(t) <= seen:
                return False
        seen |= variables(c.goal)
    return True


def _monotone_failures(s: ConstraintSystem) -> list[tuple[int, int]]:
    cs = s.constraints
    out = []
    for j in range(1, len(cs)):
        for i in range(j):
            if cs[i].sigma <= cs[j].sigma:
                continue
            if not _recoverable(cs, i, j):
                out.append((i, j))
    return out


def _recoverable(cs: tuple[Constraint, ...], i: int, j: int) -> bool:
    """Whether knowledge set i is deducible from knowledge set j, read with
    variables as opaque atoms.

    Terms of set j mentioning variables unknown to set i are discarded, and
    the goals of constraints before i may be used as extra knowledge: any
    solution makes those goals deducible, so a syntactic derivation here
    witnesses the semantic containment for every solution.
    """
    from . import engine
    from .rewriting import make_theories

    vi: set[Term] = set()
    for t in cs[i].sigma:
        vi |= variables(t)
    usable = {t for t in cs[j].sigma if variables(t) <= vi}
    usable |= {cs[k].goal for k in range(i)}
    if not usable:
        return not cs[i].sigma
    ths = make_theories(("empty",))
    return all(t in usable or engine.deduce(usable, t, ths) is not None
               for t in cs[i].sigma)


# --- the termination measure -------------------------------------------------------


def constraint_measure(c: Constraint) -> tuple[int, int]:
    if c.kind == RIGHT:
        return (0, size(c.goal))
    return (1, sum(size(t) for t in c.sigma))


def system_measure(s: ConstraintSystem):
    """(variable count, multiset of per-constraint measures)."""
    return (len(s.variables()), Counter(constraint_measure(c) for c in s.constraints))


def measure_less(a, b) -> bool:
    if a[0] != b[0]:
        return a[0] < b[0]
    m, n = a[1], b[1]
    if m == n:
        return False
    gained = m - n
    lost = n - m
    return all(any(y > x for y in lost) for x in gained)


# --- reduction rules ----------------------------------------------------------------

RULES = ("C1", "C2", "C3", "C4", "C5")


def _apply(s: ConstraintSystem, rule: str, index: int,
           member: Term | None = None) -> tuple[ConstraintSystem, Substitution] | None:
    """Apply one reduction rule at the given constraint, or None if it does not fire.

    C1 closes a right constraint by unifying its non-variable goal with the
    cited knowledge term. C2 splits a constructor goal into right constraints
    for its components. C3 relaxes a proper constraint to a right one. C4
    replaces a known pair by its components. C5 trades a known ciphertext for
    its payload and key, at the price of a right constraint on the key.
    """
    if not 0 <= index < len(s.constraints):
        return None
    c = s.constraints[index]
    before = s.constraints[:index]
    after = s.constraints[index + 1:]
    identity = Substitution()

    result = None
    if rule == "C1":
        if c.kind != RIGHT or member is None or member not in c.sigma:
            return None
        if c.goal.kind == VAR:
            return None
        theta = mgu(c.goal, member)
        if theta is None:
            return None
        result = (s.replace(tuple(theta.apply_constraint(d)
                                  for d in before + after)), theta)
    elif rule == "C2":
        g = c.goal
        if c.kind != RIGHT or g.kind != CAPP or g.sym not in _SPLITTABLE:
            return None
        split = (Constraint(RIGHT, c.sigma, g.args[0]),
                 Constraint(RIGHT, c.sigma, g.args[1]))
        result = (s.replace(before + split + after), identity)
    elif rule == "C3":
        if c.kind != PROPER:
            return None
        result = (s.replace(before + (Constraint(RIGHT, c.sigma, c.goal),) + after),
                  identity)
    elif rule == "C4":
        if c.kind != PROPER or member is None or member not in c.sigma:
            return None
        if member.kind != CAPP or member.sym != "pair":
            return None
        sigma = (c.sigma - {member}) | set(member.args)
        result = (s.replace(before + (Constraint(PROPER, sigma, c.goal),) + after),
                  identity)
    elif rule == "C5":
        if c.kind != PROPER or member is None or member not in c.sigma:
            return None
        if member.kind != CAPP or member.sym != "enc":
            return None
        payload, key = member.args
        key_c = Constraint(RIGHT, c.sigma, key)
        body = Constraint(PROPER, (c.sigma - {member}) | {payload, key}, c.goal)
        result = (s.replace(before + (key_c, body) + after), identity)
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")

    if result is None:
        return None
    new_system, theta = result
    assert measure_less(system_measure(new_system), system_measure(s)), \
        f"{rule} did not decrease the measure"
    if _originating(s):
        assert _originating(new_system), f"{rule} broke variable origination"
    return result


def step(s: ConstraintSystem) -> list[tuple[str, Substitution, ConstraintSystem]]:
    """The complete set of one-step reducts of a well-formed system.

    Each entry carries the rule tag and the substitution introduced by the
    step (the identity except for C1). Every reduct is itself well formed
    and strictly smaller in the termination measure.
    """
    out = []
    # reduction acts on arbitrary constraint lists; well-formedness is only
    # promised for successors of well-formed systems
    parent_ok = not well_formed(s)
    for rule, _index, _member, nxt, theta in successors(s):
        if parent_ok:
            assert not well_formed(nxt), f"{rule} produced an ill-formed system"
        out.append((rule, theta, nxt))
    return out


def successors(s: ConstraintSystem, strategy: str = "exhaustive"):
    """All (rule, index, member, system, substitution) edges out of a system."""
    indices: Iterable[int]
    if strategy == "first-unsolved":
        unsolved = [i for i, c in enumerate(s.constraints) if not c.is_solved()]
        indices = unsolved[:1]
    elif strategy == "exhaustive":
        indices = range(len(s.constraints))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    for i in indices:
        c = s.constraints[i]
        members = sorted(c.sigma, key=lambda t: t.key)
        for n in members:
            hit = _apply(s, "C1", i, n)
            if hit is not None:
                yield ("C1", i, n) + hit
        hit = _apply(s, "C2", i)
        if hit is not None:
            yield ("C2", i, None) + hit
        hit = _apply(s, "C3", i)
        if hit is not None:
            yield ("C3", i, None) + hit
        for n in members:
            for rule in ("C4", "C5"):
                hit = _apply(s, rule, i, n)
                if hit is not None:
                    yield (rule, i, n) + hit


# --- search ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    system: ConstraintSystem
    subst: Substitution
    public: Term

    def __repr__(self) -> str:
        return f"Solution(subst={self.subst!r})"


def solve(s: ConstraintSystem, strategy: str = "exhaustive",
          all_solutions: bool = False, max_nodes: int = 200_000,
          on_edge=None) -> list[Solution]:
    """Solved forms reachable from a well-formed system.

    Returns the first solution found unless all_solutions is set, in which
    case distinct (solved system, substitution) pairs are collected. The
    search deduplicates visited states, so it terminates even when different
    rule orders commute. on_edge, if given, is called with
    (parent, rule, substitution, child) for every reduction edge explored.
    """
    problems = well_formed(s)
    if problems:
        raise ValueError("; ".join(problems))
    pub = effective_public(s)
    orig_vars = s.variables()

    seen: set = set()
    found: list[Solution] = []
    found_keys: set = set()
    budget = [max_nodes]

    def key_of(current: ConstraintSystem, theta: Substitution):
        return (current.constraints, theta.restrict(orig_vars))

    def dfs(current: ConstraintSystem, theta: Substitution) -> bool:
        k = key_of(current, theta)
        if k in seen:
            return False
        seen.add(k)
        if budget[0] <= 0:
            raise RuntimeError(f"gave up after exploring {max_nodes} systems")
        budget[0] -= 1
        if current.is_solved():
            if k not in found_keys:
                found_keys.add(k)
                found.append(Solution(current, theta.restrict(orig_vars), pub))
            return not all_solutions
        for rule, _i, _n, nxt, delta in successors(current, strategy):
            if on_edge is not None:
                on_edge(current, rule, delta, nxt)
            if dfs(nxt, theta.compose(delta)):
                return True
        return False

    dfs(s, Substitution())
    return found


def extract_solution(sigma: Substitution, original: ConstraintSystem) -> Substitution:
    """Ground the recorded bindings: every variable of the original system is
    sent through sigma, and whatever variables remain go to the public name."""
    pub = effective_public(original)
    if pub is None:
        raise ValueError("system has no public name to instantiate with")
    out: dict[Term, Term] = {}
    for v in sorted(original.variables(), key=lambda t: t.key):
        t = sigma(v)
        fill = {u: pub for u in variables(t)}
        out[v] = substitute(t, fill)
    return Substitution.of(out)


def verify_solution(s: ConstraintSystem, assignment: Substitution,
                    theories=("empty",)) -> bool:
    """Check a ground assignment against the original system with the engine."""
    from . import engine
    from .rewriting import as_theories, make_theories

    ths = tuple(theories) if not hasattr(theories, "name") else (theories,)
    if ths and isinstance(ths[0], str):
        ths = make_theories(ths)
    ths = as_theories(ths)
    for c in s.constraints:
        sigma = [assignment(t) for t in c.sigma]
        goal = assignment(c.goal)
        for t in sigma + [goal]:
            if variables(t):
                return False
        if c.kind == PROPER:
            if engine.deduce(sigma, goal, ths) is None:
                return False
        else:
            if engine.right_deduce(frozenset(sigma), goal, ths) is None:
                return False
    return True


# --- file format -----------------------------------------------------------------------


def split_top(text: str, sep: str = ",") -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_constraint_line(line: str) -> Constraint:
    if "|-R" in line:
        left, _, goal = line.partition("|-R")
        kind = RIGHT
    elif "|-" in line:
        left, _, goal = line.partition("|-")
        kind = PROPER
    else:
        raise ValueError(f"expected '|-' or '|-R' in constraint line: {line!r}")
    left = left.strip()
    sigma = [parse_term(p) for p in split_top(left) if p.strip()] if left else []
    return Constraint(kind, frozenset(sigma), parse_term(goal))


def parse_constraint_file(text: str) -> ConstraintSystem:
    """One constraint per line, written 'a, pair(b, ?x) |- goal'; right
    constraints use |-R. An optional leading line 'public a' names the
    public constant (defaulting to a name every left side holds). Blank
    lines and # comments are skipped."""
    out: list[Constraint] = []
    pub: Term | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("public"):
                if out or pub is not None:
                    raise ValueError("'public' must be the first line")
                t = parse_term(line[len("public"):])
                if t.kind != NAME:
                    raise ValueError(f"public constant must be a name, got {line!r}")
                pub = t
            else:
                out.append(parse_constraint_line(line))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
    return system(*out, public_name=pub)
