"""Seeded random instances, rules and Boolean CQs for property checks."""

from __future__ import annotations

import random
from typing import Mapping, Sequence

from .logic import Atom, Constant, Rule, Variable, split_single_piece

DEFAULT_SIGNATURE = {"A": 1, "B": 1, "p": 2, "r": 2}


def signature_of(rules: Sequence[Rule], instances=()) -> dict:
    sig = {}
    for r in rules:
        for a in r.body | r.head:
            sig[a.predicate] = len(a.args)
    for inst in instances:
        for a in inst:
            sig[a.predicate] = len(a.args)
    return dict(sorted(sig.items()))


def random_instance(rng: random.Random, signature: Mapping[str, int], n_atoms: int, n_constants: int = 4,
                    prefix: str = "k") -> frozenset:
    preds = sorted(signature)
    consts = [Constant(f"{prefix}{i}") for i in range(n_constants)]
    out = set()
    for _ in range(n_atoms):
        p = rng.choice(preds)
        out.add(Atom(p, tuple(rng.choice(consts) for _ in range(signature[p]))))
    return frozenset(out)


def random_rule(rng: random.Random, rule_id: str, signature: Mapping[str, int], max_body: int = 2,
                max_head: int = 2, n_vars: int = 3, exist_prob: float = 0.3,
                head_preds: Sequence[str] | None = None) -> Rule:
    """A random single-piece rule; head variables outside the body are existential."""
    preds = sorted(signature)
    vs = [Variable(f"{rule_id.upper()}{i}") for i in range(n_vars)]
    body = {Atom(p, tuple(rng.choice(vs) for _ in range(signature[p])))
            for p in (rng.choice(preds) for _ in range(rng.randint(1, max_body)))}
    body_vars = sorted({t for a in body for t in a.args}, key=lambda v: v.name)
    exist = [Variable(f"{rule_id.upper()}Z{i}") for i in range(2)]
    hp = sorted(head_preds) if head_preds else preds
    head = set()
    for _ in range(rng.randint(1, max_head)):
        p = rng.choice(hp)
        head.add(Atom(p, tuple(rng.choice(exist) if rng.random() < exist_prob else rng.choice(body_vars)
                               for _ in range(signature[p]))))
    return split_single_piece(Rule(rule_id, body, head))[0]


def random_rule_set(rng: random.Random, n_rules: int, signature: Mapping[str, int] = DEFAULT_SIGNATURE,
                    **kwargs) -> list[Rule]:
    return [random_rule(rng, f"q{i}", signature, **kwargs) for i in range(n_rules)]


def random_frontier_guarded(rng: random.Random, rule_id: str, signature: Mapping[str, int],
                            **kwargs) -> Rule:
    """Rejection-sample a rule with a body atom covering its frontier."""
    while True:
        r = random_rule(rng, rule_id, signature, **kwargs)
        if any(r.frontier <= set(a.args) for a in r.body):
            return r


def random_datalog(rng: random.Random, rule_id: str, signature: Mapping[str, int], max_body: int = 2,
                   n_vars: int = 3) -> Rule:
    return random_rule(rng, rule_id, signature, max_body=max_body, max_head=1, n_vars=n_vars, exist_prob=0.0)


def random_bcq(rng: random.Random, signature: Mapping[str, int], n_atoms: int = 2, n_vars: int = 3,
               constants: Sequence[Constant] = (), const_prob: float = 0.2) -> frozenset:
    preds = sorted(signature)
    vs = [Variable(f"W{i}") for i in range(n_vars)]
    consts = list(constants)
    out = set()
    for _ in range(n_atoms):
        p = rng.choice(preds)
        out.add(Atom(p, tuple(rng.choice(consts) if consts and rng.random() < const_prob else rng.choice(vs)
                              for _ in range(signature[p]))))
    return frozenset(out)
