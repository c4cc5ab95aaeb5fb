"""Compile a rule set into a one-step rule set and check the result."""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Iterable, Sequence

from .analysis import _pieceful
from .chase import DEFAULT_MAX_ATOMS, DEFAULT_MAX_LEVELS, chase, chase_step
from .composition import SaturationResult, saturate
from .homomorphism import find_homomorphism
from .logic import Rule, freeze
from .sampling import random_instance, signature_of
from .verdict import Status, Verdict


@dataclass
class ParallelisationResult:
    status: Status
    rules: list | None
    reason: str
    verdict: Verdict
    saturation: SaturationResult | None = None


def parallelise(rules: Sequence[Rule], max_depth: int = 4, max_rules: int = 200) -> ParallelisationResult:
    """Saturate the rules into a finite one-step candidate, or refuse.

    Refuses with Fails when the set is not pieceful (a parallelisable set must
    be bounded and pieceful), with Unknown when saturation does not close
    within budget.
    """
    verdict, sat = _pieceful(rules, max_depth, max_rules)
    if verdict.fails:
        return ParallelisationResult(Status.FAILS, None,
                                     "not pieceful, hence not parallelisable: " + str(verdict.witness), verdict)
    if sat is None or sat.stopped_on_violation:
        sat = saturate(rules, max_depth, max_rules, stop_on_violation=True)
    if sat.violations:
        rec = sat.violations[0]
        v = Verdict(Status.FAILS, witness=rec, step=rec.depth, note="stability violated during saturation")
        return ParallelisationResult(Status.FAILS, None, f"not pieceful: violation at depth {rec.depth}", v, sat)
    if sat.fixpoint:
        return ParallelisationResult(Status.HOLDS, list(sat.rules),
                                     f"saturation fixpoint at depth {sat.depth_reached}", verdict, sat)
    budget = {"depth": sat.depth_reached, "rules": len(sat.rules)}
    return ParallelisationResult(Status.UNKNOWN, None, "saturation budget exhausted",
                                 Verdict(Status.UNKNOWN, budget_used=budget, note="no saturation fixpoint"), sat)


def project_mapping(rules: Iterable[Rule], source_predicates: Iterable[str]) -> tuple[list[Rule], list[str]]:
    """Keep the rules whose body predicates are all source predicates."""
    source = set(source_predicates)
    if not source:
        raise ValueError("no source predicates declared")
    kept = [r for r in rules if all(a.predicate in source for a in r.body)]
    warnings = [] if kept else ["no rule has a body over source predicates only"]
    return kept, warnings


@dataclass
class InstanceCheck:
    instance: frozenset
    status: Status
    injective: bool | None = None
    homomorphism: bool | None = None
    note: str = ""


@dataclass
class ParallelisationReport:
    checks: list = field(default_factory=list)

    @property
    def conclusion(self) -> Status:
        if any(c.status is Status.FAILS for c in self.checks):
            return Status.FAILS
        if any(c.status is Status.UNKNOWN for c in self.checks):
            return Status.UNKNOWN
        return Status.HOLDS

    @property
    def verified(self) -> bool:
        return self.conclusion is Status.HOLDS


def check_instance(rules: Sequence[Rule], candidate: Sequence[Rule], instance: frozenset,
                   max_levels: int = DEFAULT_MAX_LEVELS, max_atoms: int = DEFAULT_MAX_ATOMS) -> InstanceCheck:
    res = chase(instance, rules, max_levels=max_levels, max_atoms=max_atoms)
    if res.truncated:
        return InstanceCheck(instance, Status.UNKNOWN, note="chase under the source rules truncated")
    full = res.final
    one = chase_step(instance, candidate)
    inj = find_homomorphism(full, one, injective=True) is not None
    back = find_homomorphism(one, full) is not None
    return InstanceCheck(instance, Status.HOLDS if inj and back else Status.FAILS, inj, back)


def verify_parallelisation(rules: Sequence[Rule], candidate: Sequence[Rule], instances: Iterable[frozenset],
                           max_levels: int = DEFAULT_MAX_LEVELS,
                           max_atoms: int = DEFAULT_MAX_ATOMS, jobs: int = 1) -> ParallelisationReport:
    """Per instance: the full chase under ``rules`` maps injectively into one
    step of ``candidate``, and that step maps back into the full chase.

    With ``jobs > 1`` instances are checked in worker processes; the report
    keeps the input order.
    """
    insts = [frozenset(i) for i in instances]
    check = partial(check_instance, list(rules), list(candidate), max_levels=max_levels, max_atoms=max_atoms)
    if jobs > 1 and len(insts) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            checks = list(pool.map(check, insts))
    else:
        checks = [check(i) for i in insts]
    return ParallelisationReport(checks)


def default_instances(rules: Sequence[Rule], candidate: Sequence[Rule] = (), user: Iterable[frozenset] = (),
                      n_random: int = 20, seed: int = 0, source_predicates: Iterable[str] | None = None,
                      max_atoms: int = 6) -> list[frozenset]:
    """Frozen rule bodies, user instances and seeded random instances.

    With source predicates only instances over the source schema are built.
    """
    source = set(source_predicates or ())
    out: list = []
    seen: set = set()

    def add(inst):
        inst = frozenset(inst)
        if inst not in seen:
            seen.add(inst)
            out.append(inst)

    for r in list(rules) + list(candidate):
        if source and not all(a.predicate in source for a in r.body):
            continue
        add(freeze(r.body)[0])
    for inst in user:
        add(inst)
    sig = signature_of(list(rules) + list(candidate))
    if source:
        sig = {p: a for p, a in sig.items() if p in source}
    if sig:
        rng = random.Random(seed)
        for _ in range(n_random):
            add(random_instance(rng, sig, rng.randint(1, max_atoms), n_constants=3))
    return out


def minimise(rules: Sequence[Rule], candidate: Sequence[Rule], instances: Sequence[frozenset],
             **budget) -> list[Rule]:
    """Drop composed rules one at a time, newest first, while verification still passes."""
    kept = list(candidate)
    originals = {r.id for r in rules}
    for r in reversed(list(candidate)):
        if r.id in originals:
            continue
        trial = [x for x in kept if x.id != r.id]
        if verify_parallelisation(rules, trial, instances, **budget).verified:
            kept = trial
    return kept
