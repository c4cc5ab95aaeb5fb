"""Backtracking homomorphism search between atom sets.

Variables, nulls and ground Skolem terms of the source are mappable; every
other term (constants) must map to itself.  Atoms are matched in a
most-constrained-first order, and independent components of the source are
searched separately when injectivity does not couple them.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from typing import Iterable, Iterator, Mapping

from .logic import Atom, atom_key, is_mappable, sort_atoms, term_key

MODES = ("first", "all", "injective-first", "injective-all")


class _Index:
    def __init__(self, dst: Iterable[Atom]):
        self.atoms = frozenset(dst)
        self.by_pred: dict = defaultdict(list)
        self.by_pos: dict = defaultdict(list)
        for a in sort_atoms(self.atoms):
            self.by_pred[(a.predicate, len(a.args))].append(a)
            for i, t in enumerate(a.args):
                self.by_pos[(a.predicate, len(a.args), i, t)].append(a)

    def candidates(self, a: Atom, binding: Mapping) -> list:
        best = None
        sig = (a.predicate, len(a.args))
        for i, t in enumerate(a.args):
            if is_mappable(t):
                t = binding.get(t)
                if t is None:
                    continue
            lst = self.by_pos.get((*sig, i, t), ())
            if best is None or len(lst) < len(best):
                best = lst
                if not best:
                    break
        return self.by_pred.get(sig, []) if best is None else best


def _match(a: Atom, b: Atom, binding: dict, used: set | None, fixed_targets: set) -> list | None:
    """Extend ``binding`` so that a maps onto b; return the new keys or None."""
    added = []
    for s, t in zip(a.args, b.args):
        if is_mappable(s):
            cur = binding.get(s)
            if cur is None:
                if used is not None and (t in used or t in fixed_targets):
                    for k in added:
                        used.discard(binding.pop(k))
                    return None
                binding[s] = t
                added.append(s)
                if used is not None:
                    used.add(t)
            elif cur != t:
                for k in added:
                    v = binding.pop(k)
                    if used is not None:
                        used.discard(v)
                return None
        elif s != t:
            for k in added:
                v = binding.pop(k)
                if used is not None:
                    used.discard(v)
            return None
    return added


def _order(atoms: list[Atom], index: _Index, bound: set) -> list[Atom]:
    """Greedy static order: next atom is the one sharing most already-bound terms."""
    remaining = sort_atoms(atoms)
    bound = set(bound)
    order = []
    while remaining:
        def score(a):
            m = [t for t in a.args if is_mappable(t)]
            n_bound = sum(1 for t in m if t in bound)
            return (-(n_bound + (len(a.args) - len(m))), len(index.by_pred.get((a.predicate, len(a.args)), ())),
                    atom_key(a))
        best = min(remaining, key=score)
        remaining.remove(best)
        order.append(best)
        bound.update(t for t in best.args if is_mappable(t))
    return order


def _search(order, i, index, binding, used, fixed_targets) -> Iterator[dict]:
    if i == len(order):
        yield dict(binding)
        return
    a = order[i]
    for b in index.candidates(a, binding):
        added = _match(a, b, binding, used, fixed_targets)
        if added is None:
            continue
        yield from _search(order, i + 1, index, binding, used, fixed_targets)
        for k in added:
            v = binding.pop(k)
            if used is not None:
                used.discard(v)


def _components(atoms: list[Atom]) -> list[list[Atom]]:
    parent = {a: a for a in atoms}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: dict = {}
    for a in atoms:
        for t in a.args:
            if is_mappable(t):
                if t in owner:
                    ra, rb = find(a), find(owner[t])
                    if ra != rb:
                        parent[ra] = rb
                else:
                    owner[t] = a
    groups: dict = {}
    for a in atoms:
        groups.setdefault(find(a), []).append(a)
    return sorted((sort_atoms(g) for g in groups.values()), key=lambda g: atom_key(g[0]))


def iter_homomorphisms(src: Iterable[Atom], dst: Iterable[Atom], *, injective: bool = False,
                       initial: Mapping | None = None) -> Iterator[dict]:
    """Lazily enumerate homomorphisms from src to dst (each exactly once)."""
    src = frozenset(src)
    index = dst if isinstance(dst, _Index) else _Index(dst)
    binding = dict(initial or {})
    src_fixed = {t for a in src for t in a.args if not is_mappable(t)}
    used = set(binding.values()) if injective else None
    if injective and len(used) != len(binding):
        return
    fixed_targets = src_fixed if injective else set()
    if injective and any(v in fixed_targets for v in binding.values()):
        return

    pending = []
    for a in src:
        if all(not is_mappable(t) or t in binding for t in a.args):
            img = Atom(a.predicate, tuple(binding.get(t, t) for t in a.args))
            if img not in index.atoms:
                return
        else:
            pending.append(a)
    if not pending:
        yield dict(binding)
        return
    if injective:
        order = _order(pending, index, set(binding))
        yield from _search(order, 0, index, binding, used, fixed_targets)
        return
    # Components interact only through the initial binding.
    comps = _components(pending)
    results = []
    for comp in comps:
        order = _order(comp, index, set(binding))
        base = dict(binding)
        results.append(_search(order, 0, index, base, None, fixed_targets))
    if len(comps) == 1:
        yield from results[0]
        return
    # Materialise lazily: first solution of each component first.
    cached = [_LazyList(r) for r in results]
    for combo in _lazy_product(cached):
        out = dict(binding)
        for h in combo:
            out.update(h)
        yield out


def _order_keep(atoms: list[Atom], index: _Index, bound: set, keep: set) -> tuple[list[Atom], int]:
    """Order atoms so the ``keep`` variables are bound as early as possible.

    Returns the order and the length of the prefix that binds all of them.
    """
    remaining = sort_atoms(atoms)
    bound = set(bound)
    order = []
    while remaining and not keep <= bound:
        def score(a):
            fresh_keep = sum(1 for t in a.args if t in keep and t not in bound)
            m = [t for t in a.args if is_mappable(t)]
            n_bound = sum(1 for t in m if t in bound)
            return (fresh_keep == 0, -(n_bound + (len(a.args) - len(m))),
                    len(index.by_pred.get((a.predicate, len(a.args)), ())), atom_key(a))
        best = min(remaining, key=score)
        remaining.remove(best)
        order.append(best)
        bound.update(t for t in best.args if is_mappable(t))
    return order + remaining, len(order)


def iter_projected(src: Iterable[Atom], dst: Iterable[Atom], keep: Iterable,
                   initial: Mapping | None = None) -> Iterator[dict]:
    """One homomorphism per distinct restriction to the ``keep`` terms.

    Only the atoms needed to bind ``keep`` are enumerated; the rest of the
    source is checked for a single extension.
    """
    src = frozenset(src)
    index = dst if isinstance(dst, _Index) else _Index(dst)
    binding = dict(initial or {})
    keep = {k for k in keep if k not in binding}
    pending = []
    for a in src:
        if all(not is_mappable(t) or t in binding for t in a.args):
            if Atom(a.predicate, tuple(binding.get(t, t) for t in a.args)) not in index.atoms:
                return
        else:
            pending.append(a)
    order, n = _order_keep(pending, index, set(binding), keep)
    keys = sorted(keep, key=term_key)
    seen = set()
    for h in _search(order[:n], 0, index, binding, None, set()):
        proj = tuple(h[k] for k in keys)
        if proj in seen:
            continue
        full = next(iter_homomorphisms(order[n:], index, initial=h), None)
        if full is not None:
            seen.add(proj)
            yield full


class _LazyList:
    def __init__(self, it):
        self._it = it
        self._items: list = []
        self._done = False

    def get(self, i):
        while len(self._items) <= i and not self._done:
            try:
                self._items.append(next(self._it))
            except StopIteration:
                self._done = True
        return self._items[i] if i < len(self._items) else None


def _lazy_product(lists: list[_LazyList]) -> Iterator[tuple]:
    if any(l.get(0) is None for l in lists):
        return
    idx = [0] * len(lists)
    while True:
        yield tuple(l.get(i) for l, i in zip(lists, idx))
        k = len(lists) - 1
        while k >= 0:
            idx[k] += 1
            if lists[k].get(idx[k]) is not None:
                break
            idx[k] = 0
            k -= 1
        if k < 0:
            return


def find_homomorphisms(src: Iterable[Atom], dst: Iterable[Atom], mode: str = "all",
                       initial: Mapping | None = None, limit: int | None = None) -> list[dict]:
    """Homomorphisms h with h(src) included in dst, fixing constants.

    ``mode`` is ``"first"``, ``"all"``, ``"injective-first"`` or ``"injective-all"``.
    Injective homomorphisms are injective on all terms of src.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    it = iter_homomorphisms(src, dst, injective=mode.startswith("injective"), initial=initial)
    if mode.endswith("first"):
        limit = 1
    out = list(itertools.islice(it, limit)) if limit is not None else list(it)
    if mode.endswith("all"):
        out.sort(key=lambda h: tuple((term_key(k), term_key(v)) for k, v in sorted(h.items(), key=lambda kv: term_key(kv[0]))))
    return out


def maps_to(src: Iterable[Atom], dst: Iterable[Atom], injective: bool = False,
            initial: Mapping | None = None) -> bool:
    return next(iter_homomorphisms(src, dst, injective=injective, initial=initial), None) is not None


def find_homomorphism(src, dst, injective: bool = False, initial: Mapping | None = None) -> dict | None:
    return next(iter_homomorphisms(src, dst, injective=injective, initial=initial), None)


def hom_equivalent(a: Iterable[Atom], b: Iterable[Atom]) -> bool:
    return maps_to(a, b) and maps_to(b, a)


def make_index(dst: Iterable[Atom]) -> _Index:
    """Pre-built index for repeated searches into the same target set."""
    return _Index(dst)
