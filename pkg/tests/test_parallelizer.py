import random

import pytest

from pieceful.analysis import boundedness_probe
from pieceful.chase import chase, chase_step
from pieceful.composition import compose_existential
from pieceful.homomorphism import maps_to
from pieceful.logic import Null, Rule, atom, isomorphic_rules, nulls
from pieceful.parallelizer import (check_instance, default_instances, minimise, parallelise, project_mapping,
                                   verify_parallelisation)
from pieceful.sampling import random_bcq, random_instance
from pieceful.unification import piece_unifiers
from pieceful.verdict import Status

TRANS = Rule("T", {atom("p", "X", "Y"), atom("p", "Y", "Z")}, {atom("p", "X", "Z")})
DISC = Rule("D", {atom("p", "X", "Y"), atom("p", "U", "Z")}, {atom("p", "X", "Z")})


def test_unfolding_parallelisation(unfolding):
    res = parallelise(unfolding)
    assert res.status is Status.HOLDS and len(res.rules) == 6
    insts = default_instances(unfolding, res.rules, n_random=20)
    assert verify_parallelisation(unfolding, res.rules, insts).verified


def test_prime_is_refused(prime):
    res = parallelise(prime)
    assert res.status is Status.FAILS and res.rules is None
    assert "not pieceful" in res.reason


def test_three_rules_refused_after_composition(three_rules):
    res = parallelise(three_rules)
    assert res.status is Status.FAILS and res.verdict.step == 1


def test_unknown_when_saturation_does_not_close():
    side = Rule("S", {atom("A", "X")}, {atom("q", "X", "Z")})
    res = parallelise([TRANS, side], max_depth=2)
    assert res.status is Status.UNKNOWN and res.verdict.budget_used["depth"] == 2


def test_example_mapping_compilation(mapping):
    res = parallelise(mapping.rules)
    assert res.status is Status.HOLDS
    kept, warnings = project_mapping(res.rules, mapping.source_predicates)
    assert warnings == []
    expected = [Rule("m1", {atom("s1", "X", "Y")}, {atom("t1", "X", "Y")}),
                Rule("m2", {atom("s2", "X")}, {atom("t2", "X")}),
                Rule("m3", {atom("s2", "X")}, {atom("t3", "X", "Z")}),
                Rule("m4", {atom("s1", "X", "Y"), atom("s2", "X")}, {atom("t4", "Y")})]
    assert len(kept) == 4
    for e in expected:
        assert sum(isomorphic_rules(e, k) for k in kept) == 1
    report = verify_parallelisation(mapping.rules, kept, [mapping.instance])
    assert report.verified


def test_project_mapping_errors():
    with pytest.raises(ValueError):
        project_mapping([TRANS], [])
    kept, warnings = project_mapping([TRANS], ["s"])
    assert kept == [] and warnings


def test_prime_one_step_divergence(prime):
    r1, r2 = prime
    c = compose_existential(r2, r1, piece_unifiers(r2.body, r1)[0])
    inst = frozenset({atom("A", "a"), atom("B", "b"), atom("B", "c")})
    q = {atom("r", "U", "b"), atom("r", "U", "c")}
    assert maps_to(q, chase(inst, prime).final)
    one = chase_step(inst, prime + [c])
    assert not maps_to(q, one)
    assert len(nulls(one)) == 3
    check = check_instance(prime, prime + [c], inst)
    assert check.status is Status.FAILS and check.injective is False and check.homomorphism is True


def test_bounded_datalog_passes_as_is():
    rng = random.Random(0)
    insts = [random_instance(rng, {"p": 2}, rng.randint(1, 6), 4) for _ in range(20)]
    assert verify_parallelisation([TRANS, DISC], [TRANS, DISC], insts).verified
    assert not verify_parallelisation([TRANS], [TRANS], [frozenset({atom("p", "a", "b"), atom("p", "b", "c"),
                                                                    atom("p", "c", "d")})]).verified


def test_truncated_chase_is_unknown():
    r = Rule("R", {atom("A", "X")}, {atom("p", "X", "Z"), atom("A", "Z")})
    rep = verify_parallelisation([r], [r], [frozenset({atom("A", "a")})], max_levels=4)
    assert rep.conclusion is Status.UNKNOWN and not rep.verified


def test_parallel_jobs_match_serial(unfolding):
    res = parallelise(unfolding)
    insts = default_instances(unfolding, res.rules, n_random=10, seed=3)
    serial = verify_parallelisation(unfolding, res.rules, insts)
    par = verify_parallelisation(unfolding, res.rules, insts, jobs=2)
    assert [(c.instance, c.status) for c in serial.checks] == [(c.instance, c.status) for c in par.checks]


def test_default_instances_over_source_schema(mapping):
    insts = default_instances(mapping.rules, n_random=15, seed=1, source_predicates=mapping.source_predicates)
    assert insts and all(a.predicate in {"s1", "s2"} for i in insts for a in i)
    assert default_instances(mapping.rules, n_random=15, seed=1) == default_instances(mapping.rules, n_random=15,
                                                                                        seed=1)


def test_minimise_drops_only_useless_rules(unfolding):
    res = parallelise(unfolding)
    insts = default_instances(unfolding, res.rules, n_random=20)
    small = minimise(unfolding, res.rules, insts)
    assert {r.id for r in unfolding} <= {r.id for r in small}
    assert verify_parallelisation(unfolding, small, insts).verified


def test_verified_candidates_are_bounded_on_samples(unfolding, mapping):
    for rules in (unfolding, mapping.rules):
        res = parallelise(rules)
        insts = default_instances(rules, res.rules, n_random=20, seed=5)
        assert verify_parallelisation(rules, res.rules, insts).verified
        assert boundedness_probe(rules, insts, res.saturation.depth_reached).consistent


def test_bcq_agreement_one_step(unfolding, mapping):
    rng = random.Random(8)
    for rules in (unfolding, mapping.rules):
        star = parallelise(rules).rules
        sig = {a.predicate: len(a.args) for r in rules for a in r.body | r.head}
        for _ in range(40):
            inst = random_instance(rng, sig, rng.randint(1, 6), 3)
            q = random_bcq(rng, sig, rng.randint(1, 3))
            assert maps_to(q, chase(inst, rules).final) == maps_to(q, chase_step(inst, star))


def test_one_step_nulls_bounded_by_head_size(mapping):
    rng = random.Random(6)
    star = parallelise(mapping.rules).rules
    h = max(len(r.head) for r in star)
    for _ in range(30):
        one = chase_step(random_instance(rng, {"s1": 2, "s2": 1}, 6, 3), star)
        for nu in nulls(one):
            assert isinstance(nu, Null) and sum(nu in a.args for a in one) <= h
