"""Breadth-first semi-oblivious chase, derivations and the pieceful monitor."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .homomorphism import iter_projected, make_index
from .verdict import Status, Verdict
from .logic import Atom, Null, NullKey, Rule, atom_key, sort_atoms, sort_terms, substitute, term_key, terms

DEFAULT_MAX_LEVELS = 32
DEFAULT_MAX_ATOMS = 10**6


@dataclass(frozen=True)
class Trigger:
    rule: Rule
    hom: tuple  # sorted (variable, term) pairs over the body variables

    @property
    def mapping(self) -> dict:
        return dict(self.hom)

    def frontier_binding(self) -> tuple:
        m = self.mapping
        return tuple((v.name, m[v]) for v in sorted(self.rule.frontier, key=lambda v: v.name))

    def safe_mapping(self) -> dict:
        """The body homomorphism extended to existential variables with named nulls."""
        m = self.mapping
        binding = self.frontier_binding()
        for z in self.rule.exist_vars:
            m[z] = Null(NullKey(self.rule.id, z.name, binding))
        return m

    def output(self) -> frozenset:
        return substitute(self.rule.head, self.safe_mapping())


def _hom_tuple(h: dict) -> tuple:
    return tuple(sorted(h.items(), key=lambda kv: term_key(kv[0])))


def _hom_order(h: tuple) -> tuple:
    return tuple((term_key(k), term_key(v)) for k, v in h)


def enumerate_triggers(instance: Iterable[Atom], rules: Sequence[Rule], delta: Iterable[Atom] | None = None,
                       index=None) -> list[Trigger]:
    """All triggers for the instance, one per (rule, frontier image).

    With ``delta`` only triggers using at least one atom of ``delta`` are
    returned (semi-naive evaluation).
    """
    index = index or make_index(instance)
    delta_set = None if delta is None else frozenset(delta)
    delta_index = None if delta_set is None else make_index(delta_set)
    out = []
    for rule in rules:
        chosen: dict = {}
        if delta_set is None:
            for h in iter_projected(rule.body, index, rule.frontier):
                _keep(rule, h, chosen)
        else:
            for b in sort_atoms(rule.body):
                for d in delta_index.candidates(b, {}):
                    init = {}
                    ok = True
                    for s, t in zip(b.args, d.args):
                        if init.get(s, t) != t:
                            ok = False
                            break
                        init[s] = t
                    if not ok:
                        continue
                    for h in iter_projected(rule.body, index, rule.frontier, initial=init):
                        _keep(rule, h, chosen)
        for fb in sorted(chosen, key=lambda k: tuple((v, term_key(t)) for v, t in k)):
            out.append(Trigger(rule, chosen[fb]))
    return out


def iter_triggers(instance: Iterable[Atom], rules: Sequence[Rule]):
    """Lazily yield one trigger per (rule, frontier image), in search order.

    Unlike :func:`enumerate_triggers` the representative homomorphism is the
    first one found, which is enough whenever only outputs matter.
    """
    index = make_index(instance)
    for rule in rules:
        for h in iter_projected(rule.body, index, rule.frontier):
            yield Trigger(rule, _hom_tuple(h))


def _keep(rule: Rule, h: dict, chosen: dict):
    fb = tuple((v.name, h[v]) for v in sorted(rule.frontier, key=lambda v: v.name))
    ht = _hom_tuple(h)
    cur = chosen.get(fb)
    if cur is None or _hom_order(ht) < _hom_order(cur):
        chosen[fb] = ht


def chase_step(instance: Iterable[Atom], rules: Sequence[Rule]) -> frozenset:
    """One breadth-first level: the instance plus the outputs of all its triggers."""
    instance = frozenset(instance)
    out = set(instance)
    for trig in enumerate_triggers(instance, rules):
        out |= trig.output()
    return frozenset(out)


@dataclass(frozen=True)
class Step:
    trigger: Trigger
    produced: frozenset  # full safe image of the head (A_j)
    added: frozenset  # atoms not present before this step
    digest: str
    level: int = 0


@dataclass
class Derivation:
    start: frozenset
    steps: list = field(default_factory=list)

    def result(self) -> frozenset:
        out = set(self.start)
        for s in self.steps:
            out |= s.produced
        return frozenset(out)


def _digest(atoms: Iterable[Atom]) -> str:
    h = hashlib.sha256()
    for a in sort_atoms(atoms):
        h.update(repr(atom_key(a)).encode())
    return h.hexdigest()[:16]


def derive(instance: Iterable[Atom], applications: Iterable[tuple[Rule, dict]]) -> Derivation:
    """Build a derivation from explicit (rule, body homomorphism) applications."""
    current = set(instance)
    d = Derivation(frozenset(instance))
    for rule, hom in applications:
        hom = {v: hom[v] for v in rule.body_vars}
        if not substitute(rule.body, hom) <= current:
            raise ValueError(f"rule {rule.id} is not applicable with {hom}")
        trig = Trigger(rule, _hom_tuple(hom))
        produced = trig.output()
        added = produced - current
        current |= produced
        d.steps.append(Step(trig, produced, frozenset(added), _digest(current)))
    return d


@dataclass
class ChaseResult:
    levels: list
    fixpoint_level: int | None
    truncated: bool
    derivation: Derivation | None = None

    @property
    def final(self) -> frozenset:
        return self.levels[-1]


def chase(instance: Iterable[Atom], rules: Sequence[Rule], max_levels: int = DEFAULT_MAX_LEVELS,
          max_atoms: int = DEFAULT_MAX_ATOMS, trace: bool = False) -> ChaseResult:
    """Iterate :func:`chase_step` until a fixpoint or a budget is hit.

    ``fixpoint_level`` is the least k with chase_k = chase_{k+1}.  One probing
    step beyond ``max_levels`` is taken to recognise a fixpoint sitting exactly
    at the budget; its atoms are not kept.
    """
    if max_levels < 0:
        raise ValueError("max_levels must be >= 0")
    current = frozenset(instance)
    levels = [current]
    delta = current
    derivation = Derivation(current) if trace else None
    seen = set(current)
    level = 0
    while True:
        index = make_index(current)
        triggers = enumerate_triggers(current, rules, delta=delta, index=index)
        new = set()
        steps = []
        for trig in triggers:
            produced = trig.output()
            fresh = produced - current - new
            new |= fresh
            if trace:
                steps.append((trig, produced, frozenset(fresh)))
        if not new:
            return ChaseResult(levels, level, False, derivation)
        if level == max_levels or len(current) + len(new) > max_atoms:
            return ChaseResult(levels, None, True, derivation)
        current = current | new
        level += 1
        levels.append(current)
        delta = frozenset(new)
        if trace:
            for trig, produced, fresh in steps:
                seen |= produced
                derivation.steps.append(Step(trig, produced, fresh, _digest(seen), level))


def chase_k(instance: Iterable[Atom], rules: Sequence[Rule], k: int) -> frozenset:
    """chase_k exactly (or the fixpoint if reached earlier)."""
    return chase(instance, rules, max_levels=k).levels[-1]


def monitor_pieceful(derivation: Derivation) -> Verdict:
    """Check that each step maps its frontier into the start instance or into
    the full output of a single earlier step.  ``step`` is 1-based."""
    start_terms = terms(derivation.start)
    earlier: list = []
    for i, step in enumerate(derivation.steps, 1):
        m = step.trigger.mapping
        image = {m[v] for v in step.trigger.rule.frontier}
        if not (image <= start_terms or any(image <= t for t in earlier)):
            return Verdict(Status.FAILS, witness=derivation, step=i,
                           note="frontier image " + ", ".join(map(str, sort_terms(image))))
        earlier.append(terms(step.produced))
    return Verdict(Status.HOLDS, witness=derivation)
