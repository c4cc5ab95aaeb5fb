import random

import pytest

from pieceful.analysis import (boundedness_probe, check_stability, max_piece_size, piece_size_bound,
                               pieceful_verdict, rule_class, syntactic_class, violation_derivation,
                               witness_instances)
from pieceful.chase import chase, monitor_pieceful
from pieceful.composition import compose_existential
from pieceful.logic import Constant, Null, Rule, atom, instance_pieces, rename_apart
from pieceful.sampling import random_datalog, random_frontier_guarded, random_instance, random_rule_set
from pieceful.unification import piece_unifiers
from pieceful.verdict import Status

TRANS = Rule("T", {atom("p", "X", "Y"), atom("p", "Y", "Z")}, {atom("p", "X", "Z")})
DISC = Rule("D", {atom("p", "X", "Y"), atom("p", "U", "Z")}, {atom("p", "X", "Z")})


def path(n):
    return frozenset(atom("p", f"a{i}", f"a{i + 1}") for i in range(1, n + 1))


def test_prime_has_one_violation(prime):
    (v,) = check_stability(prime)
    assert (v.r2_id, v.r1_id) == ("R2", "R1")
    assert v.revalidate()
    assert "frontier not unified: Y" in v.reason


def test_datalog_sets_are_stable(unfolding):
    assert check_stability(unfolding) == []
    assert check_stability([TRANS, DISC]) == []


def test_three_rules_stable_until_composed(three_rules):
    assert check_stability(three_rules) == []
    r1, r2, r3 = three_rules
    c = compose_existential(r2, r1, piece_unifiers(r2.body, r1)[0])
    bad = check_stability([r3, c])
    assert [(v.r2_id, v.r1_id) for v in bad] == [("R3", "(R2*R1)")]


def test_verdicts(prime, three_rules, unfolding):
    v = pieceful_verdict(prime)
    assert v.status is Status.FAILS and v.step == 0 and v.witness.revalidate()
    v = pieceful_verdict(three_rules)
    assert v.status is Status.FAILS and v.step == 1
    assert v.witness.r2_id == "R3" and v.witness.r1_id == "(R2*R1)"
    assert pieceful_verdict(unfolding).holds


def test_unknown_when_budget_runs_out():
    # transitivity keeps producing longer chains and is not frontier-guarded
    side = Rule("S", {atom("A", "X")}, {atom("q", "X", "Z")})
    v = pieceful_verdict([TRANS, side], max_depth=2)
    assert v.status is Status.UNKNOWN
    assert v.budget_used == {"depth": 2, "rules": 5}


def test_saturation_fixpoint_gives_holds():
    r1 = Rule("R1", {atom("A", "X"), atom("B", "Y")}, {atom("p", "X", "Y", "Z")})
    r2 = Rule("R2", {atom("p", "X", "Y", "Z")}, {atom("C", "Z")})
    assert not syntactic_class([r1, r2]).frontier_guarded
    v = pieceful_verdict([r1, r2])
    assert v.holds and "fixpoint" in v.note


def test_syntactic_class(prime, unfolding):
    assert rule_class(prime[0]) == {"datalog": False, "frontier_one": True, "guarded": True,
                                    "frontier_guarded": True}
    assert not rule_class(prime[1])["frontier_guarded"]
    cls = syntactic_class(unfolding)
    assert cls.datalog and all(p["datalog"] for p in cls.per_rule.values())
    assert sorted(cls.as_dict()["rules"]) == ["R1", "R2", "R3"]


def test_violation_derivation_is_rejected(prime, three_rules):
    for rs in (prime, three_rules):
        v = pieceful_verdict(rs).witness
        d = violation_derivation(v)
        assert len(d.steps) == 2 and monitor_pieceful(d).fails


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_prime_witness(prime, n):
    w = witness_instances(prime, n)
    assert w.count == n + 1 and isinstance(w.null, Null)
    assert len([a for a in w.instance if a.predicate == "B"]) == n
    assert len([a for a in w.instance if a.predicate == "A"]) == 1
    full = chase(w.instance, prime).final
    assert sum(w.null in a.args for a in full) == w.count


def test_three_rules_witness(three_rules):
    w = witness_instances(three_rules, 2)
    full = chase(w.instance, three_rules).final
    assert sum(w.null in a.args for a in full) >= 2
    assert max_piece_size(full) >= 2


def test_witness_rejects_pieceful_sets(unfolding):
    with pytest.raises(ValueError):
        witness_instances(unfolding, 2)
    with pytest.raises(ValueError):
        witness_instances(unfolding, 0)


def test_piece_size_bound(prime):
    assert piece_size_bound(prime, 0) == 1
    assert piece_size_bound(prime, 1) == 8
    assert piece_size_bound(prime, 2) == (8 * 2) ** 2 * 2
    with pytest.raises(ValueError):
        piece_size_bound(prime, -1)


def test_piece_sizes_respect_bound_on_random_sets():
    rng = random.Random(21)
    sig = {"A": 1, "B": 1, "p": 2, "r": 2}
    for i in range(60):
        gen = random_frontier_guarded if i % 2 else random_datalog
        rs = [gen(rng, f"g{j}", sig) for j in range(3)]
        inst = random_instance(rng, sig, 8, 4)
        res = chase(inst, rs, max_levels=3, max_atoms=20000)
        for k, level in enumerate(res.levels):
            assert max(map(len, instance_pieces(level)), default=0) <= piece_size_bound(rs, k)


def test_probe_disconnected_rule_bounded_by_one():
    rng = random.Random(1)
    insts = [random_instance(rng, {"p": 2}, rng.randint(1, 8), 5) for _ in range(20)] + [path(8)]
    rep = boundedness_probe([TRANS, DISC], insts, 1)
    assert rep.consistent and max(rep.levels) <= 1 and "advisory" in rep.note


def test_probe_prime_bounded_by_two(prime):
    rng = random.Random(2)
    insts = [random_instance(rng, {"A": 1, "B": 1, "p": 2, "r": 2}, 6, 4) for _ in range(30)]
    rep = boundedness_probe(prime, insts, 2)
    assert rep.consistent


def test_probe_transitivity_grows():
    rep = boundedness_probe([TRANS], [path(2), path(4), path(8)], 2)
    assert rep.levels == [1, 2, 3]
    assert not rep.consistent


def test_probe_reports_truncation():
    r = Rule("R", {atom("A", "X")}, {atom("p", "X", "Z"), atom("A", "Z")})
    rep = boundedness_probe([r], [frozenset({atom("A", "a")})], 3, max_levels=5)
    assert rep.levels == [None] and not rep.consistent


def test_violations_in_rule_sets_yield_rejected_derivations():
    rng = random.Random(4)
    sig = {"A": 1, "B": 1, "p": 2, "r": 2}
    found = 0
    for _ in range(800):
        rs = random_rule_set(rng, 3, sig, exist_prob=0.5, max_body=3, n_vars=4)
        for v in check_stability(rs):
            assert v.revalidate()
            assert monitor_pieceful(violation_derivation(v)).fails
            found += 1
    assert found > 10


def test_witness_constant_names_do_not_collide():
    r1 = Rule("R1", {atom("A", "X"), atom("C", "W")}, {atom("p", "X", "Z")})
    r2 = Rule("R2", {atom("p", "X1", "Z1"), atom("B", "Y")}, {atom("r", "Z1", "Y")})
    w = witness_instances([r1, rename_apart(r2, r1.all_vars)], 3)
    consts = {t for a in w.instance for t in a.args if isinstance(t, Constant)}
    assert len([a for a in w.instance if a.predicate == "B"]) == 3
    assert w.count >= 3 and len(consts) >= 4
