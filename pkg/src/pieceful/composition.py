"""Rule composition (existential, compact, Skolem) and bounded saturation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .chase import iter_triggers
from .homomorphism import maps_to
from .logic import (Atom, FunctionTerm, Rule, Variable, base_name, freeze, rename_apart, rule_key, sort_atoms,
                    sort_terms, substitute, substitute_term, term_key, variables)
from .unification import PieceUnifier, is_piece_unifier, piece_unifiers


def _require(r2: Rule, r1: Rule, mu: PieceUnifier):
    if r1.all_vars & r2.all_vars:
        raise ValueError(f"rules {r2.id} and {r1.id} must be standardized apart")
    if not is_piece_unifier(r2.body, r1, mu):
        raise ValueError(f"not a piece-unifier of body({r2.id}) with {r1.id}")


def is_stable(r2: Rule, r1: Rule, mu: PieceUnifier) -> bool:
    """Existential stability of a unifier of body(r2) with r1."""
    touched = {mu.image(x) for x in r2.frontier} & r1.exist_vars
    return not touched or r2.frontier <= variables(mu.s_prime)


def tidy_variables(rule: Rule) -> Rule:
    """Rename variables back to their base names when this is unambiguous."""
    groups: dict = {}
    for v in rule.all_vars:
        groups.setdefault(base_name(v.name), []).append(v)
    mapping = {}
    for base, vs in groups.items():
        vs.sort(key=lambda v: (v.name != base, len(v.name), v.name))
        for i, v in enumerate(vs):
            mapping[v] = Variable(base if i == 0 else f"{base}_{i}")
    return Rule(rule.id, substitute(rule.body, mapping), substitute(rule.head, mapping), rule.provenance)


def composed_id(r2: Rule, r1: Rule, index: int = 0) -> str:
    base = f"({r2.id}*{r1.id})"
    return base if index == 0 else f"{base}~{index + 1}"


def compose_existential(r2: Rule, r1: Rule, mu: PieceUnifier, *, general: bool = False,
                        rule_id: str | None = None, index: int = 0) -> Rule:
    """R2 composed with R1 along mu.

    When no frontier variable of R2 meets an existential of R1 the head is
    u(H2); otherwise it is u(H1) together with u(H2).  ``general=True`` always
    uses the second form.
    """
    _require(r2, r1, mu)
    body = mu.apply(r1.body) | mu.apply(r2.body - mu.s_prime)
    point1 = not ({mu.image(x) for x in r2.frontier} & r1.exist_vars)
    head = mu.apply(r2.head) if point1 and not general else mu.apply(r1.head) | mu.apply(r2.head)
    rid = rule_id or composed_id(r2, r1, index)
    return tidy_variables(Rule(rid, body, head, ("compose", r2.id, r1.id, index)))


# ---------------------------------------------------------------------------
# Compact composition
# ---------------------------------------------------------------------------

BLOCK_NAMES = ("x1", "y1", "z1", "x2", "y2")


@dataclass(frozen=True)
class PrefixFormula:
    """Closed formula  Q1 v1 ... Qk vk (body -> exists inner_exists. head).

    ``blocks`` always has the five blocks x1', y1, z1, x2', y2' in this order,
    possibly empty.  ``symbols`` names the Skolem function of each existential.
    """

    id: str
    blocks: tuple
    body: frozenset
    head: frozenset
    inner_exists: frozenset
    symbols: tuple = ()

    def block(self, name: str) -> frozenset:
        return self.blocks[BLOCK_NAMES.index(name)][1]

    def prefix(self) -> list:
        """Non-empty quantifier blocks with consecutive equal quantifiers merged."""
        out: list = []
        for q, vs in self.blocks:
            if not vs:
                continue
            if out and out[-1][0] == q:
                out[-1] = (q, out[-1][1] | vs)
            else:
                out.append((q, frozenset(vs)))
        return out


def compose_compact(r2: Rule, r1: Rule, mu: PieceUnifier, rule_id: str | None = None) -> PrefixFormula:
    _require(r2, r1, mu)
    s_vars = variables(mu.s_prime)
    x1 = frozenset(mu.image(x) for x in r1.frontier)
    y1 = r1.body_vars - r1.frontier
    z1 = r1.exist_vars
    x2 = r2.frontier - s_vars
    y2 = (r2.body_vars - r2.frontier) - s_vars
    blocks = (("forall", x1), ("forall", y1), ("exists", z1), ("forall", x2), ("forall", y2))
    symbols = tuple(sorted([(z.name, _skolem_symbol(r1.id, z)) for z in z1]
                           + [(z.name, _skolem_symbol(r2.id, z)) for z in r2.exist_vars]))
    return PrefixFormula(rule_id or f"({r2.id}.{r1.id})", blocks,
                         mu.apply(r1.body) | mu.apply(r2.body - mu.s_prime),
                         mu.apply(r1.head) | mu.apply(r2.head), r2.exist_vars, symbols)


def check_swap_condition(f: PrefixFormula, mu: PieceUnifier, r1: Rule, r2: Rule) -> bool:
    """True iff u(H2) avoids x2' or avoids z1, i.e. the exists-block may move inwards."""
    uh2 = variables(mu.apply(r2.head))
    return not (uh2 & f.block("x2")) or not (uh2 & f.block("z1"))


# ---------------------------------------------------------------------------
# Skolemization
# ---------------------------------------------------------------------------


def _skolem_symbol(rule_id: str, z: Variable) -> str:
    return f"f_{rule_id}_{base_name(z.name)}"


@dataclass(frozen=True)
class SkolemRule:
    id: str
    body: frozenset
    head: frozenset

    def __str__(self):
        return (f"{self.id}: " + ", ".join(map(str, sort_atoms(self.body))) + " -> "
                + ", ".join(map(str, sort_atoms(self.head))))


def skolemize(r: Rule | PrefixFormula) -> SkolemRule:
    """Replace existential variables by Skolem terms.

    For a rule the arguments are its frontier; for a prefix formula they are
    the universally quantified variables to the left of the existential that
    also occur in the head.  Universals that only occur in the body can be
    moved out of the scope of the existential, so dropping them keeps the
    formula equivalent while the chase stays semi-oblivious.
    """
    if isinstance(r, Rule):
        args = tuple(sort_terms(r.frontier))
        sub = {z: FunctionTerm(_skolem_symbol(r.id, z), args) for z in r.exist_vars}
        return SkolemRule(r.id, r.body, substitute(r.head, sub))
    symbols = dict(r.symbols)
    in_head = variables(r.head)
    sub = {}
    left: set = set()
    for q, vs in r.blocks:
        if q == "forall":
            left |= vs & in_head
        else:
            for z in vs:
                sub[z] = FunctionTerm(symbols.get(z.name, f"f_{r.id}_{z.name}"), tuple(sort_terms(left)))
    for z in r.inner_exists:
        sub[z] = FunctionTerm(symbols.get(z.name, f"f_{r.id}_{z.name}"), tuple(sort_terms(left)))
    return SkolemRule(f"sk{r.id}", r.body, substitute(r.head, sub))


def _walk(t, s):
    while isinstance(t, Variable) and t in s:
        t = s[t]
    return t


def _occurs(v, t, s) -> bool:
    t = _walk(t, s)
    if t == v:
        return True
    return isinstance(t, FunctionTerm) and any(_occurs(v, a, s) for a in t.args)


def _unify(a, b, s: dict) -> bool:
    a, b = _walk(a, s), _walk(b, s)
    if a == b:
        return True
    if isinstance(a, Variable):
        if _occurs(a, b, s):
            return False
        s[a] = b
        return True
    if isinstance(b, Variable):
        return _unify(b, a, s)
    if isinstance(a, FunctionTerm) and isinstance(b, FunctionTerm):
        if a.symbol != b.symbol or len(a.args) != len(b.args):
            return False
        return all(_unify(x, y, s) for x, y in zip(a.args, b.args))
    return False


def mgu(a: Atom, b: Atom) -> dict | None:
    """Most general unifier of two atoms (with occurs check), fully resolved."""
    if a.predicate != b.predicate or len(a.args) != len(b.args):
        return None
    s: dict = {}
    if not all(_unify(x, y, s) for x, y in zip(a.args, b.args)):
        return None

    def resolve(t):
        t = _walk(t, s)
        if isinstance(t, FunctionTerm):
            return FunctionTerm(t.symbol, tuple(resolve(x) for x in t.args))
        return t

    return {v: resolve(v) for v in s}


def compose_skolem(r2: Rule | SkolemRule, r1: SkolemRule) -> list[SkolemRule]:
    """Classical compositions of r2 with r1: one per body atom of r2 and head
    atom of r1 that unify; the head keeps sigma(H1) next to sigma(H2)."""
    avoid = variables(r2.body) | variables(r2.head)
    taken = {v.name for v in avoid}
    ren = {}
    for v in sort_terms(variables(r1.body) | variables(r1.head)):
        if v.name in taken:
            n = 1
            while f"{v.name}_{n}" in taken:
                n += 1
            ren[v] = Variable(f"{v.name}_{n}")
            taken.add(ren[v].name)
    b1, h1 = substitute(r1.body, ren), substitute(r1.head, ren)
    out = []
    for a in sort_atoms(r2.body):
        for h in sort_atoms(h1):
            s = mgu(a, h)
            if s is None:
                continue
            out.append(SkolemRule(f"({r2.id}*{r1.id})", substitute(b1, s) | substitute(r2.body - {a}, s),
                                  substitute(h1, s) | substitute(r2.head, s)))
    return out


def _match_terms(p, t, binding: dict) -> bool:
    if isinstance(p, Variable):
        cur = binding.get(p)
        if cur is None:
            binding[p] = t
            return True
        return cur == t
    if isinstance(p, FunctionTerm):
        return (isinstance(t, FunctionTerm) and t.symbol == p.symbol and len(t.args) == len(p.args)
                and all(_match_terms(x, y, binding) for x, y in zip(p.args, t.args)))
    return p == t


def _skolem_matches(body: list, instance: frozenset, by_pred: dict, binding: dict):
    if not body:
        yield dict(binding)
        return
    a, rest = body[0], body[1:]
    for b in by_pred.get((a.predicate, len(a.args)), ()):
        trial = dict(binding)
        if all(_match_terms(p, t, trial) for p, t in zip(a.args, b.args)):
            yield from _skolem_matches(rest, instance, by_pred, trial)


def skolem_chase_step(instance: Iterable[Atom], rules: Sequence[SkolemRule]) -> frozenset:
    instance = frozenset(instance)
    by_pred: dict = {}
    for b in sort_atoms(instance):
        by_pred.setdefault((b.predicate, len(b.args)), []).append(b)
    out = set(instance)
    for r in rules:
        for h in _skolem_matches(sort_atoms(r.body), instance, by_pred, {}):
            out |= substitute(r.head, h)
    return frozenset(out)


def skolem_chase(instance: Iterable[Atom], rules: Sequence[SkolemRule], levels: int) -> frozenset:
    current = frozenset(instance)
    for _ in range(levels):
        nxt = skolem_chase_step(current, rules)
        if nxt == current:
            break
        current = nxt
    return current


# ---------------------------------------------------------------------------
# Saturation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityRecord:
    r2: Rule
    r1: Rule  # renamed apart from r2, as unified
    unifier: PieceUnifier
    stable: bool
    depth: int  # the larger saturation depth of the two rules
    composed_id: str


@dataclass
class SaturationResult:
    rules: list
    fixpoint: bool
    depth_reached: int
    stability_log: list = field(default_factory=list)
    depth_of: dict = field(default_factory=dict)
    stopped_on_violation: bool = False

    @property
    def violations(self) -> list:
        return [rec for rec in self.stability_log if not rec.stable]

    @property
    def composed(self) -> list:
        return [r for r in self.rules if self.depth_of.get(r.id, 0) > 0]


REDUNDANCY_BUDGET = 20000


def is_redundant(candidate: Rule, rules: Sequence[Rule], max_atoms: int | None = REDUNDANCY_BUDGET) -> bool:
    """True when one chase step from the frozen body already entails the head.

    If that step would exceed ``max_atoms`` atoms the answer is False, so a
    budget overrun keeps the candidate rather than dropping it.
    """
    frozen, mapping = freeze(candidate.body)
    head = substitute(candidate.head, mapping)
    if maps_to(head, frozen):
        return True
    # a single step can only use rules that produce one of the head predicates
    wanted = {a.predicate for a in head}
    useful = [r for r in rules if any(a.predicate in wanted for a in r.head)]
    out = set(frozen)
    for trig in iter_triggers(frozen, useful):
        out |= trig.output()
        if max_atoms is not None and len(out) > max_atoms:
            return False
    return maps_to(head, out)


def saturate(rules: Sequence[Rule], max_depth: int = 4, max_rules: int = 200, *, prune: bool = True,
             stop_on_violation: bool = False, redundancy_budget: int | None = REDUNDANCY_BUDGET
             ) -> SaturationResult:
    """Breadth-first closure of the rule set under existential composition.

    Level d composes every ordered pair of current rules in which at least one
    rule was added at level d-1, over every piece-unifier.  Isomorphic and
    redundant candidates are dropped.
    """
    if max_depth < 1 or max_rules < 1:
        raise ValueError("budgets must be positive")
    current = list(rules)
    depth_of = {r.id: 0 for r in current}
    seen = {rule_key(r) for r in current}
    new_ids = set(depth_of)
    log: list = []
    for depth in range(1, max_depth + 1):
        candidates = []
        for r2, r1 in itertools.product(current, repeat=2):
            if r2.id not in new_ids and r1.id not in new_ids:
                continue
            r1r = rename_apart(r1, r2.all_vars)
            for k, mu in enumerate(piece_unifiers(r2.body, r1r)):
                rid = composed_id(r2, r1, k)
                stable = is_stable(r2, r1r, mu)
                log.append(StabilityRecord(r2, r1r, mu, stable, max(depth_of[r2.id], depth_of[r1.id]), rid))
                if not stable and stop_on_violation:
                    return SaturationResult(current, False, depth, log, depth_of, True)
                candidates.append(compose_existential(r2, r1r, mu, rule_id=rid, index=k))
        added = []
        for c in candidates:
            key = rule_key(c)
            if key in seen:
                continue
            seen.add(key)
            if prune and is_redundant(c, current + added, redundancy_budget):
                continue
            added.append(c)
            depth_of[c.id] = depth
            if len(current) + len(added) > max_rules:
                return SaturationResult(current + added, False, depth, log, depth_of)
        if not added:
            return SaturationResult(current, True, depth, log, depth_of)
        current += added
        new_ids = {c.id for c in added}
    return SaturationResult(current, False, max_depth, log, depth_of)
