"""Piece-unifiers, direct rewriting and breadth-first rewriting closure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .homomorphism import maps_to
from .logic import (Atom, Constant, Rule, Variable, atom_key, canonical_renaming, rename_apart, sort_atoms,
                    sort_terms, substitute, term_key, terms, variables)


@dataclass(frozen=True)
class PieceUnifier:
    """A piece-unifier (S', H', u) of a set of atoms S with a rule.

    ``classes`` is the term partition induced by u; ``u`` lists the images of
    the rule frontier and of the variables of S'.
    """

    s_prime: frozenset
    h_prime: frozenset
    u: tuple
    classes: frozenset
    rule_id: str = ""

    @property
    def mapping(self) -> dict:
        return dict(self.u)

    def apply(self, atoms: Iterable[Atom]) -> frozenset:
        return substitute(atoms, self.mapping)

    def image(self, t):
        return self.mapping.get(t, t)

    def sort_key(self) -> tuple:
        return (tuple(atom_key(a) for a in sort_atoms(self.s_prime)),
                tuple((term_key(k), term_key(v)) for k, v in self.u))

    def __str__(self):
        s = ", ".join(map(str, sort_atoms(self.s_prime)))
        h = ", ".join(map(str, sort_atoms(self.h_prime)))
        u = ", ".join(f"{k}->{v}" for k, v in self.u)
        return f"({{{s}}}, {{{h}}}, {{{u}}})"


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def classes(self) -> list[frozenset]:
        groups: dict = {}
        for x in self.parent:
            groups.setdefault(self.find(x), set()).add(x)
        return [frozenset(g) for g in groups.values()]


def _partition(assign: dict) -> list[frozenset]:
    uf = _UnionFind()
    for a, b in assign.items():
        for s, t in zip(a.args, b.args):
            uf.union(s, t)
    return uf.classes()


def _representatives(classes, rule: Rule) -> dict | None:
    """Image of every term of every class, or None when u cannot exist.

    A class may hold at most one existential variable, never together with a
    frontier variable or a constant, and at most one constant.
    """
    reps = {}
    for cls in classes:
        ex = [t for t in cls if t in rule.exist_vars]
        fr = [t for t in cls if t in rule.frontier]
        consts = [t for t in cls if not isinstance(t, Variable)]
        if len(ex) > 1 or (ex and (fr or consts)) or len(consts) > 1:
            return None
        if consts:
            rep = consts[0]
        elif fr:
            rep = min(fr, key=lambda v: v.name)
        elif ex:
            rep = ex[0]
        else:
            return None
        for t in cls:
            reps[t] = rep
    return reps


def _build(S: frozenset, rule: Rule, assign: dict):
    """Return (unifier, sticky-but-uncovered atoms) for an assignment S' -> H."""
    classes = _partition(assign)
    reps = _representatives(classes, rule)
    if reps is None:
        return None, None
    s_prime = frozenset(assign)
    s_vars = variables(s_prime)
    sticky = {v for v in s_vars if reps[v] in rule.exist_vars}
    pending = [a for a in sort_atoms(S - s_prime) if any(t in sticky for t in a.args)]
    u = {v: reps[v] for v in s_vars}
    for x in rule.frontier:
        u[x] = reps.get(x, x)
    mu = PieceUnifier(s_prime, frozenset(assign.values()),
                      tuple(sorted(u.items(), key=lambda kv: term_key(kv[0]))),
                      frozenset(frozenset(c) for c in classes), rule.id)
    return mu, pending


def _key(mu: PieceUnifier) -> tuple:
    return (mu.s_prime, mu.classes)


def piece_unifiers(S: Iterable[Atom], rule: Rule) -> list[PieceUnifier]:
    """All piece-unifiers of S with the rule, one per (S', induced partition).

    Single-piece unifiers are grown from one atom pair by adding every atom of
    S that shares a variable unified with an existential variable; the
    remaining unifiers are unions of compatible single-piece ones.
    """
    S = frozenset(S)
    if variables(S) & rule.all_vars:
        raise ValueError("the atom set and the rule must not share variables")
    head = sort_atoms(rule.head)
    s_atoms = sort_atoms(S)
    partners = {a: [b for b in head if b.predicate == a.predicate and len(b.args) == len(a.args)]
                for a in s_atoms}
    singles: dict = {}

    def grow(assign):
        mu, pending = _build(S, rule, assign)
        if mu is None:
            return
        if not pending:
            singles.setdefault(_key(mu), (mu, dict(assign)))
            return
        nxt = pending[0]
        for b in partners[nxt]:
            grow({**assign, nxt: b})

    for a in s_atoms:
        for b in partners[a]:
            grow({a: b})

    found = dict((k, v[0]) for k, v in singles.items())
    basis = sorted(singles.values(), key=lambda item: item[0].sort_key())

    def combine(start, assign, size):
        for i in range(start, len(basis)):
            mu_i, assign_i = basis[i]
            if any(a in assign for a in assign_i):
                continue
            merged = {**assign, **assign_i}
            mu, pending = _build(S, rule, merged)
            if mu is None:
                continue
            if not pending and size + 1 >= 2:
                found.setdefault(_key(mu), mu)
            combine(i + 1, merged, size + 1)

    if len(basis) > 1:
        combine(0, {}, 0)
    return sorted(found.values(), key=PieceUnifier.sort_key)


def is_piece_unifier(S: Iterable[Atom], rule: Rule, mu: PieceUnifier) -> bool:
    """Check the three defining conditions directly on u."""
    S = frozenset(S)
    if not mu.s_prime or not mu.s_prime <= S or not mu.h_prime <= rule.head:
        return False
    u = mu.mapping

    def ok_image(x):
        img = u.get(x, x)
        return img in rule.frontier or isinstance(img, Constant)

    if not all(ok_image(x) for x in rule.frontier):
        return False
    separating = variables(mu.s_prime) & variables(S - mu.s_prime)
    if not all(ok_image(x) for x in separating):
        return False
    head_terms = rule.head_vars
    if not all(u.get(v) in head_terms or isinstance(u.get(v), Constant) for v in variables(mu.s_prime)):
        return False
    return substitute(mu.s_prime, u) == substitute(mu.h_prime, u)


def direct_rewrite(S: Iterable[Atom], rule: Rule, mu: PieceUnifier) -> frozenset:
    """u(body) together with u(S minus S')."""
    S = frozenset(S)
    if not is_piece_unifier(S, rule, mu):
        raise ValueError(f"not a piece-unifier of the given set with rule {rule.id}")
    return mu.apply(rule.body) | mu.apply(S - mu.s_prime)


def canonical_cq(q: Iterable[Atom]) -> frozenset:
    q = frozenset(q)
    return substitute(q, canonical_renaming((q,)))


@dataclass
class RewritingSet:
    elements: list
    complete: bool
    depth_reached: int


def rewrite_closure(q: Iterable[Atom], rules: Sequence[Rule], max_depth: int = 8,
                    max_size: int = 1000, answer_vars: Iterable[str] = ()) -> RewritingSet:
    """Breadth-first closure of q under direct rewriting with subsumption pruning.

    A rewriting is dropped when some kept element maps into it; a new
    rewriting evicts the elements it maps into.  Variables named in
    ``answer_vars`` are distinguished: they are frozen during rewriting, so
    they behave like constants.
    """
    if max_depth < 1 or max_size < 1:
        raise ValueError("budgets must be positive")
    q = frozenset(q)
    answer = {v for v in variables(q) if v.name in set(answer_vars)}
    if answer:
        taken = {c.name for c in terms(q) if isinstance(c, Constant)}
        frz = {}
        for v in sort_terms(answer):
            name = f"ans_{v.name.lower()}"
            while name in taken:
                name += "_"
            taken.add(name)
            frz[v] = Constant(name)
        res = rewrite_closure(substitute(q, frz), rules, max_depth, max_size)
        back = {c: v for v, c in frz.items()}
        res.elements = _sorted_cqs(substitute(e, back) for e in res.elements)
        return res
    elements = [canonical_cq(q)]
    frontier = list(elements)
    depth = 0
    while frontier:
        if depth == max_depth:
            return RewritingSet(_sorted_cqs(elements), False, depth)
        depth += 1
        produced = []
        for cq in frontier:
            for rule in rules:
                r = rename_apart(rule, variables(cq))
                for mu in piece_unifiers(cq, r):
                    rw = canonical_cq(direct_rewrite(cq, r, mu))
                    if any(maps_to(e, rw) for e in elements):
                        continue
                    elements = [e for e in elements if not maps_to(rw, e)]
                    elements.append(rw)
                    produced.append(rw)
                    if len(elements) > max_size:
                        return RewritingSet(_sorted_cqs(elements), False, depth)
        frontier = [e for e in produced if e in elements]
    return RewritingSet(_sorted_cqs(elements), True, depth)


def _sorted_cqs(cqs) -> list:
    return sorted(cqs, key=lambda c: (len(c), tuple(atom_key(a) for a in sort_atoms(c))))
