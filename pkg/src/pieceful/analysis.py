"""Stability, pieceful classification, witness instances and chase-size bounds."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .chase import Derivation, Trigger, chase, derive, monitor_pieceful
from .composition import SaturationResult, is_stable, saturate
from .logic import (Atom, Constant, Rule, freeze, instance_pieces, rename_apart, sort_terms, substitute,
                    substitute_term, term_key, variables)
from .unification import PieceUnifier, is_piece_unifier, piece_unifiers
from .verdict import Status, Verdict


@dataclass(frozen=True)
class StabilityViolation:
    r2: Rule
    r1: Rule  # standardized apart from r2
    unifier: PieceUnifier
    reason: str
    depth: int = 0

    @property
    def r1_id(self) -> str:
        return self.r1.id

    @property
    def r2_id(self) -> str:
        return self.r2.id

    def revalidate(self) -> bool:
        return is_piece_unifier(self.r2.body, self.r1, self.unifier) and not is_stable(self.r2, self.r1, self.unifier)

    def __str__(self):
        return f"{self.r2.id} with {self.r1.id} via {self.unifier}: {self.reason}"


def _reason(r2: Rule, r1: Rule, mu: PieceUnifier) -> str:
    hit = [x for x in sort_terms(r2.frontier) if mu.image(x) in r1.exist_vars]
    missing = [x for x in sort_terms(r2.frontier) if x not in variables(mu.s_prime)]
    a = ", ".join(f"{x} -> {mu.image(x)}" for x in hit)
    return f"frontier unified with existential ({a}); frontier not unified: {', '.join(map(str, missing))}"


def _violation(r2, r1, mu, depth=0) -> StabilityViolation:
    return StabilityViolation(r2, r1, mu, _reason(r2, r1, mu), depth)


def check_stability(rules: Sequence[Rule]) -> list[StabilityViolation]:
    """Every piece-unifier of a rule body with a rule that breaks stability."""
    out = []
    for r2 in rules:
        for r1 in rules:
            r1r = rename_apart(r1, r2.all_vars)
            for mu in piece_unifiers(r2.body, r1r):
                if not is_stable(r2, r1r, mu):
                    out.append(_violation(r2, r1r, mu))
    return out


@dataclass(frozen=True)
class ClassReport:
    per_rule: dict
    datalog: bool
    frontier_one: bool
    guarded: bool
    frontier_guarded: bool

    def as_dict(self) -> dict:
        return {"datalog": self.datalog, "frontier_one": self.frontier_one, "guarded": self.guarded,
                "frontier_guarded": self.frontier_guarded,
                "rules": {k: dict(v) for k, v in sorted(self.per_rule.items())}}


def rule_class(r: Rule) -> dict:
    return {
        "datalog": r.is_datalog,
        "frontier_one": len(r.frontier) <= 1,
        "guarded": any(r.body_vars <= variables([a]) for a in r.body),
        "frontier_guarded": any(r.frontier <= variables([a]) for a in r.body),
    }


def syntactic_class(rules: Sequence[Rule]) -> ClassReport:
    per = {r.id: rule_class(r) for r in rules}
    flags = {k: all(p[k] for p in per.values()) for k in ("datalog", "frontier_one", "guarded", "frontier_guarded")}
    return ClassReport(per, **flags)


def _pieceful(rules: Sequence[Rule], max_depth: int, max_rules: int) -> tuple[Verdict, SaturationResult | None]:
    local = check_stability(rules)
    if local:
        return Verdict(Status.FAILS, witness=local[0], step=0, note="stability violated in the rule set"), None
    cls = syntactic_class(rules)
    if cls.datalog or cls.frontier_guarded:
        kind = "datalog" if cls.datalog else "frontier-guarded"
        return Verdict(Status.HOLDS, note=f"syntactic class: {kind}"), None
    sat = saturate(rules, max_depth, max_rules, stop_on_violation=True)
    if sat.violations:
        rec = sat.violations[0]
        v = _violation(rec.r2, rec.r1, rec.unifier, rec.depth)
        return Verdict(Status.FAILS, witness=v, step=rec.depth,
                       note=f"stability violated at saturation depth {rec.depth}"), sat
    if sat.fixpoint:
        return Verdict(Status.HOLDS, note=f"saturation fixpoint at depth {sat.depth_reached}, stable"), sat
    return Verdict(Status.UNKNOWN, budget_used={"depth": sat.depth_reached, "rules": len(sat.rules)},
                   note="saturation budget exhausted without violation"), sat


def pieceful_verdict(rules: Sequence[Rule], max_depth: int = 4, max_rules: int = 200) -> Verdict:
    """Three-valued pieceful test.

    Fails on a stability violation in the rules or among saturated rules
    (``step`` holds the saturation depth), Holds for datalog or
    frontier-guarded sets and for stable saturation fixpoints, Unknown when
    the budget runs out first.
    """
    return _pieceful(rules, max_depth, max_rules)[0]


def violation_derivation(v: StabilityViolation) -> Derivation:
    """Non-pieceful two-step derivation built from a violating unifier.

    The start instance is the frozen rewriting u(B1) + u(B2 minus B2'); R1 is
    applied along u, then R2 along u extended by the new nulls.
    """
    r1, r2, mu = v.r1, v.r2, v.unifier
    start, frz = freeze(mu.apply(r1.body) | mu.apply(r2.body - mu.s_prime))
    h1 = {x: substitute_term(mu.image(x), frz) for x in r1.body_vars}
    nulls = Trigger(r1, tuple(sorted(h1.items(), key=lambda kv: term_key(kv[0])))).safe_mapping()
    h2 = {}
    for x in r2.body_vars:
        img = mu.mapping.get(x)
        if img is None:
            h2[x] = frz[x]
        elif img in r1.exist_vars:
            h2[x] = nulls[img]
        else:
            h2[x] = frz[img]
    return derive(start, [(r1, h1), (r2, h2)])


@dataclass
class Witness:
    instance: frozenset
    null: object
    count: int
    derivation: Derivation
    chase_levels: int
    truncated: bool = False


def witness_instances(rules: Sequence[Rule], n: int, max_depth: int = 4, max_rules: int = 200,
                      max_levels: int = 16) -> Witness:
    """Instance whose chase holds a null occurring in at least n atoms.

    Built from n copies of the start instance of the violation derivation;
    constants bound to the frontier of the first rule are shared by all
    copies, the others are renamed apart.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    verdict = pieceful_verdict(rules, max_depth, max_rules)
    if not verdict.fails:
        raise ValueError(f"the rule set is not known to be non-pieceful (verdict {verdict.status.value})")
    deriv = violation_derivation(verdict.witness)
    check = monitor_pieceful(deriv)
    if not check.fails:
        raise RuntimeError("violation derivation unexpectedly pieceful")
    first = deriv.steps[0].trigger
    shared = {first.mapping[x] for x in first.rule.frontier}
    base = deriv.start
    taken = {c.name for a in base for c in a.args}
    copies = set()
    for i in range(1, n + 1):
        ren = {}
        for c in sort_terms({c for a in base for c in a.args if isinstance(c, Constant) and c not in shared}):
            name, j = f"{c.name}_{i}", 0
            while name in taken:
                j += 1
                name = f"{c.name}_{i}x{j}"
            taken.add(name)
            ren[c] = Constant(name)
        copies |= substitute(base, ren)
    instance = frozenset(copies)
    res = chase(instance, rules, max_levels=max_levels)
    counts: Counter = Counter()
    for a in res.final:
        for t in set(a.args):
            if not isinstance(t, Constant):
                counts[t] += 1
    if not counts:
        raise RuntimeError("the chase of the witness instance produced no null")
    null, count = min(counts.items(), key=lambda kv: (-kv[1], term_key(kv[0])))
    if count < n:
        raise RuntimeError(f"witness null occurs in {count} < {n} atoms")
    return Witness(instance, null, count, deriv, len(res.levels) - 1, res.truncated)


def piece_size_bound(rules: Sequence[Rule], k: int) -> int:
    """P(0) = 1 and P(i+1) = (P(i) * a) ** fr * h * |R|."""
    if k < 0:
        raise ValueError("k must be >= 0")
    a = max((len(x.args) for r in rules for x in r.body | r.head), default=0)
    fr = max((len(r.frontier) for r in rules), default=0)
    h = max((len(r.head) for r in rules), default=0)
    p = 1
    for _ in range(k):
        p = (p * a) ** fr * h * len(rules)
    return p


def max_piece_size(instance) -> int:
    return max((len(p) for p in instance_pieces(instance)), default=0)


@dataclass
class ProbeReport:
    levels: list  # fixpoint level per instance, None when truncated
    bound: int
    consistent: bool
    note: str = "advisory: sampled evidence only, boundedness is not decided"
    budget: dict = field(default_factory=dict)


def boundedness_probe(rules: Sequence[Rule], instances: Sequence[frozenset], k: int,
                      max_levels: int = 32, max_atoms: int = 10**6) -> ProbeReport:
    levels = []
    for inst in instances:
        res = chase(inst, rules, max_levels=max_levels, max_atoms=max_atoms)
        levels.append(None if res.truncated else res.fixpoint_level)
    consistent = all(lv is not None and lv <= k for lv in levels)
    return ProbeReport(levels, k, consistent, budget={"max_levels": max_levels, "max_atoms": max_atoms})
