"""Terms, atoms, existential rules and the structural operations on them.

Everything here is an immutable value.  Atom sets are plain ``frozenset``
objects; whenever an order is needed (printing, enumeration) atoms are sorted
with :func:`atom_key`, which never depends on hash order.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Union


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable names must be nonempty")

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("constant names must be nonempty")

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class NullKey:
    """Provenance of a null: the rule, its existential variable, and the
    frontier binding of the trigger that created it."""

    rule_id: str
    exist_var: str
    frontier_binding: tuple
    _hash: int = field(init=False, repr=False, compare=False)
    _sort: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.rule_id, self.exist_var, self.frontier_binding)))
        sort = (self.rule_id, self.exist_var, tuple((v, term_key(t)) for v, t in self.frontier_binding))
        object.__setattr__(self, "_sort", sort)

    def __hash__(self):
        return self._hash

    def __str__(self):
        binding = ",".join(f"{v}={t}" for v, t in self.frontier_binding)
        return f"{self.exist_var}@{self.rule_id}[{binding}]"


@dataclass(frozen=True, slots=True)
class Null:
    key: NullKey
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("null", self.key)))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return f"_:{self.key}"


@dataclass(frozen=True, slots=True)
class FunctionTerm:
    """Skolem term ``f(t1, ..., tk)``.  Ground function terms behave as nulls."""

    symbol: str
    args: tuple
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("fn", self.symbol, self.args)))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return f"{self.symbol}({','.join(map(str, self.args))})"

    @property
    def is_ground(self) -> bool:
        return all(not isinstance(a, Variable) and (not isinstance(a, FunctionTerm) or a.is_ground)
                   for a in self.args)


Term = Union[Variable, Constant, Null, FunctionTerm]
Substitution = Mapping


def term_key(t) -> tuple:
    if isinstance(t, Variable):
        return (0, t.name)
    if isinstance(t, Constant):
        return (1, t.name)
    if isinstance(t, Null):
        return (2, t.key._sort)
    if isinstance(t, FunctionTerm):
        return (3, t.symbol, tuple(term_key(a) for a in t.args))
    raise TypeError(f"not a term: {t!r}")


def is_mappable(t) -> bool:
    """Terms a homomorphism may move: variables, nulls and ground Skolem terms."""
    return isinstance(t, (Variable, Null, FunctionTerm))


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_hash", hash((self.predicate, self.args)))

    def __hash__(self):
        return self._hash

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self):
        return f"{self.predicate}({','.join(map(str, self.args))})"


def atom_key(a: Atom) -> tuple:
    return (a.predicate, len(a.args), tuple(term_key(t) for t in a.args))


def sort_atoms(atoms: Iterable[Atom]) -> list[Atom]:
    return sorted(atoms, key=atom_key)


def sort_terms(ts: Iterable) -> list:
    return sorted(ts, key=term_key)


def atom(predicate: str, *args) -> Atom:
    """Shorthand used by tests and examples: uppercase strings become
    variables, anything else a constant."""
    conv = []
    for a in args:
        if isinstance(a, str):
            conv.append(Variable(a) if a[:1].isupper() else Constant(a))
        else:
            conv.append(a)
    return Atom(predicate, tuple(conv))


def _flatten(t, out: set):
    out.add(t)
    if isinstance(t, FunctionTerm):
        for a in t.args:
            _flatten(a, out)


def terms(atoms: Iterable[Atom]) -> set:
    return {t for a in atoms for t in a.args}


def variables(atoms: Iterable[Atom]) -> set:
    out: set = set()
    for a in atoms:
        for t in a.args:
            if isinstance(t, Variable):
                out.add(t)
            elif isinstance(t, FunctionTerm):
                sub: set = set()
                _flatten(t, sub)
                out.update(x for x in sub if isinstance(x, Variable))
    return out


def constants(atoms: Iterable[Atom]) -> set:
    return {t for a in atoms for t in a.args if isinstance(t, Constant)}


def nulls(atoms: Iterable[Atom]) -> set:
    return {t for a in atoms for t in a.args if isinstance(t, (Null, FunctionTerm))}


def substitute_term(t, subst: Mapping):
    if isinstance(t, FunctionTerm) and t not in subst:
        return FunctionTerm(t.symbol, tuple(substitute_term(a, subst) for a in t.args))
    return subst.get(t, t)


def substitute(atoms: Iterable[Atom], subst: Mapping) -> frozenset:
    return frozenset(Atom(a.predicate, tuple(substitute_term(t, subst) for t in a.args)) for a in atoms)


def is_homomorphism(h: Mapping, src: Iterable[Atom], dst: Iterable[Atom]) -> bool:
    dst = dst if isinstance(dst, (set, frozenset)) else set(dst)
    if any(isinstance(k, Constant) and v != k for k, v in h.items()):
        return False
    return all(a in dst for a in substitute(src, h))


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    """Existential rule ``body -> exists exist_vars. head``.

    ``provenance`` records where a derived rule came from: ``()`` for a source
    rule, ``("split", parent, index)`` or ``("compose", r2, r1, unifier_index)``.
    """

    id: str
    body: frozenset
    head: frozenset
    provenance: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "body", frozenset(self.body))
        object.__setattr__(self, "head", frozenset(self.head))
        if not self.body or not self.head:
            raise ValueError(f"rule {self.id}: body and head must be non-empty")
        for a in itertools.chain(self.body, self.head):
            for t in a.args:
                if not isinstance(t, Variable):
                    raise ValueError(f"rule {self.id}: rules may only contain variables, found {t}")

    @cached_property
    def body_vars(self) -> frozenset:
        return frozenset(variables(self.body))

    @cached_property
    def head_vars(self) -> frozenset:
        return frozenset(variables(self.head))

    @cached_property
    def frontier(self) -> frozenset:
        return self.body_vars & self.head_vars

    @cached_property
    def exist_vars(self) -> frozenset:
        return self.head_vars - self.body_vars

    @cached_property
    def all_vars(self) -> frozenset:
        return self.body_vars | self.head_vars

    @property
    def is_datalog(self) -> bool:
        return len(self.head) == 1 and not self.exist_vars

    @property
    def is_single_piece(self) -> bool:
        return len(decompose_pieces(self.head, self.exist_vars)) == 1

    def __str__(self):
        body = ", ".join(map(str, sort_atoms(self.body)))
        head = ", ".join(map(str, sort_atoms(self.head)))
        return f"{self.id}: {body} -> {head}"


def rename_rule(rule: Rule, mapping: Mapping, new_id: str | None = None) -> Rule:
    return Rule(new_id or rule.id, substitute(rule.body, mapping), substitute(rule.head, mapping),
                rule.provenance)


_SUFFIX = re.compile(r"_\d+$")


def base_name(name: str) -> str:
    return _SUFFIX.sub("", name)


def fresh_name(name: str, taken: set) -> str:
    base = base_name(name)
    if base not in taken:
        return base
    n = 1
    while f"{base}_{n}" in taken:
        n += 1
    return f"{base}_{n}"


def rename_apart(rule: Rule, avoid: Iterable[Variable | str]) -> Rule:
    """Copy of ``rule`` whose variables are disjoint from ``avoid``."""
    avoid_names = {v.name if isinstance(v, Variable) else v for v in avoid}
    clashing = [v for v in sort_terms(rule.all_vars) if v.name in avoid_names]
    if not clashing:
        return rule
    taken = avoid_names | {v.name for v in rule.all_vars}
    mapping = {}
    for v in clashing:
        new = fresh_name(v.name, taken)
        taken.add(new)
        mapping[v] = Variable(new)
    return rename_rule(rule, mapping)


def standardize_apart(rules: Iterable[Rule]) -> list[Rule]:
    """Rename variables so that distinct rules share none."""
    out = []
    seen: set = set()
    for r in rules:
        r = rename_apart(r, seen)
        seen |= {v.name for v in r.all_vars}
        out.append(r)
    return out


# ---------------------------------------------------------------------------
# Freezing and pieces
# ---------------------------------------------------------------------------


def freeze(atoms: Iterable[Atom], prefix: str = "c_") -> tuple[frozenset, dict]:
    """Replace each variable by a fresh constant; returns the instance and the
    variable -> constant bijection."""
    atoms = frozenset(atoms)
    taken = {c.name for c in constants(atoms)}
    mapping = {}
    for v in sort_terms(variables(atoms)):
        name = f"{prefix}{v.name.lower()}"
        candidate, n = name, 1
        while candidate in taken:
            candidate = f"{name}{n}"
            n += 1
        taken.add(candidate)
        mapping[v] = Constant(candidate)
    return substitute(atoms, mapping), mapping


def unfreeze(atoms: Iterable[Atom], mapping: Mapping) -> frozenset:
    return substitute(atoms, {c: v for v, c in mapping.items()})


@dataclass(frozen=True)
class Piece:
    atoms: frozenset
    glue: frozenset

    def __len__(self):
        return len(self.atoms)


def decompose_pieces(atoms: Iterable[Atom], glue: Iterable) -> list[Piece]:
    """Partition ``atoms`` into pieces w.r.t. the glue terms, deterministically ordered."""
    atoms = sort_atoms(set(atoms))
    glue = set(glue)
    parent = list(range(len(atoms)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict = {}
    for i, a in enumerate(atoms):
        for t in a.args:
            if t in glue:
                if t in owner:
                    ri, rj = find(i), find(owner[t])
                    if ri != rj:
                        parent[max(ri, rj)] = min(ri, rj)
                else:
                    owner[t] = i
    groups: dict = {}
    for i in range(len(atoms)):
        groups.setdefault(find(i), []).append(atoms[i])
    pieces = []
    for root in sorted(groups):
        members = frozenset(groups[root])
        pieces.append(Piece(members, frozenset(t for t in terms(members) if t in glue)))
    return pieces


def instance_pieces(instance: Iterable[Atom]) -> list[Piece]:
    instance = frozenset(instance)
    return decompose_pieces(instance, nulls(instance))


def split_single_piece(rule: Rule) -> list[Rule]:
    pieces = decompose_pieces(rule.head, rule.exist_vars)
    if len(pieces) == 1:
        return [rule]
    return [Rule(f"{rule.id}~{i}", rule.body, p.atoms, ("split", rule.id, i))
            for i, p in enumerate(pieces, 1)]


# ---------------------------------------------------------------------------
# Canonical forms (isomorphism up to variable renaming)
# ---------------------------------------------------------------------------


def _mark(t, color, v):
    if t == v:
        return ("self",)
    if isinstance(t, Variable):
        return ("v", color[t])
    if isinstance(t, FunctionTerm):
        return ("f", t.symbol, tuple(_mark(a, color, v) for a in t.args))
    return ("t", term_key(t))


def _refine(parts, var_atoms, color):
    n_classes = len(set(color.values()))
    while True:
        sigs = {v: (color[v], tuple(sorted((pi, a.predicate, tuple(_mark(t, color, v) for t in a.args))
                                         for pi, a in occ)))
                for v, occ in var_atoms.items()}
        ranks = {s: i for i, s in enumerate(sorted(set(sigs.values())))}
        color = {v: ranks[sigs[v]] for v in sigs}
        if len(ranks) == n_classes:
            return color
        n_classes = len(ranks)


def _render_term(t, col):
    if isinstance(t, Variable):
        return (0, col[t])
    if isinstance(t, FunctionTerm):
        return (3, t.symbol, tuple(_render_term(a, col) for a in t.args))
    return term_key(t)


@lru_cache(maxsize=65536)
def _canonical(parts: tuple) -> tuple:
    var_atoms: dict = {}
    for pi, part in enumerate(parts):
        for a in part:
            for v in variables([a]):
                var_atoms.setdefault(v, []).append((pi, a))
    best: list = [None, None]
    autos: list = []  # automorphisms found as pairs of leaves with equal renderings

    def render(col):
        return tuple(tuple(sorted((a.predicate, tuple(_render_term(t, col) for t in a.args)) for a in part))
                     for part in parts)

    def orbit_reps(cell, path):
        # generators fixing the current path pointwise stay within this subtree
        gens = [g for g in autos if all(g[p] == p for p in path)]
        parent = {v: v for v in cell}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for g in gens:
            for v in cell:
                w = g[v]
                if w in parent:
                    parent[find(v)] = find(w)
        return find

    def search(col, path):
        col = _refine(parts, var_atoms, col)
        cells: dict = {}
        for v, c in col.items():
            cells.setdefault(c, []).append(v)
        ties = [c for c in sorted(cells) if len(cells[c]) > 1]
        if not ties:
            form = render(col)
            if best[0] is None or form < best[0]:
                best[0], best[1] = form, col
            elif form == best[0]:
                inv = {c: v for v, c in best[1].items()}
                autos.append({v: inv[c] for v, c in col.items()})
            return
        cell = sorted(cells[ties[0]], key=term_key)
        tried: list = []
        for v in cell:
            if tried:
                find = orbit_reps(cell, path)
                if any(find(u) == find(v) for u in tried):
                    continue
            tried.append(v)
            search({w: 2 * c + (0 if w == v else 1) for w, c in col.items()}, path + [v])

    search({v: 0 for v in var_atoms}, [])
    return best[0], best[1]


def canonical_form(parts: tuple) -> tuple:
    """Isomorphism-invariant form of a tuple of atom sets under variable renaming.

    Variables are relabelled by individualisation-refinement; the result is the
    least rendering over all tie-breaking choices.
    """
    return _canonical(tuple(frozenset(p) for p in parts))[0]


def canonical_renaming(parts: tuple, prefix: str = "V") -> dict:
    """Variable renaming onto ``V0, V1, ...`` realising :func:`canonical_form`."""
    col = _canonical(tuple(frozenset(p) for p in parts))[1]
    return {v: Variable(f"{prefix}{c}") for v, c in col.items()}


def rule_key(rule: Rule) -> tuple:
    return canonical_form((rule.body, rule.head))


def isomorphic_rules(r1: Rule, r2: Rule) -> bool:
    return rule_key(r1) == rule_key(r2)
