import random

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_chase
from pieceful.analysis import check_stability
from pieceful.chase import chase, chase_k, chase_step, derive, enumerate_triggers, monitor_pieceful
from pieceful.composition import saturate
from pieceful.homomorphism import maps_to
from pieceful.logic import Atom, Constant, Null, NullKey, Rule, Variable, atom, nulls
from pieceful.sampling import random_instance, random_rule_set
from pieceful.unification import rewrite_closure
from pieceful.verdict import Status
from strategies import ground_sets, rules

a, b = Constant("a"), Constant("b")
INTRO = Rule("R", {atom("p", "X", "Y")}, {atom("p", "X", "Z"), atom("A", "Z")})


def test_chase_step_names_null_by_frontier():
    out = chase_step({atom("p", "a", "b")}, [INTRO])
    nu = Null(NullKey("R", "Z", (("X", a),)))
    assert out == {atom("p", "a", "b"), Atom("p", (a, nu)), Atom("A", (nu,))}


def test_second_step_adds_nothing():
    once = chase_step({atom("p", "a", "b")}, [INTRO])
    assert chase_step(once, [INTRO]) == once


def test_empty_rule_set_keeps_instance():
    inst = frozenset({atom("p", "a", "b")})
    assert chase_step(inst, []) == inst
    assert chase(inst, []).fixpoint_level == 0


def test_intro_chase_fixpoint():
    res = chase({atom("p", "a", "b")}, [INTRO])
    assert res.fixpoint_level == 1 and not res.truncated and len(res.final) == 3


def test_prime_chase_fixpoint(prime):
    inst = {atom("A", "a"), atom("B", "b"), atom("B", "c")}
    res = chase(inst, prime)
    assert res.fixpoint_level == 2
    (nu,) = nulls(res.final)
    assert res.final == inst | {Atom("p", (a, nu)), Atom("r", (nu, b)), Atom("r", (nu, Constant("c")))}


def test_infinite_chase_truncates():
    r = Rule("R1", {atom("A", "X")}, {atom("p", "X", "Z"), atom("A", "Z")})
    res = chase({atom("A", "a")}, [r], max_levels=3)
    assert res.truncated and res.fixpoint_level is None
    assert [len(lv) for lv in res.levels] == [1, 3, 5, 7]
    assert [len(nulls(lv)) for lv in res.levels] == [0, 1, 2, 3]


def test_zero_level_budget():
    res = chase({atom("p", "a", "b")}, [INTRO], max_levels=0)
    assert res.truncated and len(res.levels) == 1
    res = chase({atom("A", "a")}, [INTRO], max_levels=0)
    assert res.fixpoint_level == 0


def test_fixpoint_exactly_at_budget():
    res = chase({atom("p", "a", "b")}, [INTRO], max_levels=1)
    assert res.fixpoint_level == 1 and not res.truncated


def test_atom_budget_truncates():
    r = Rule("R1", {atom("A", "X")}, {atom("p", "X", "Z"), atom("A", "Z")})
    res = chase({atom("A", "a")}, [r], max_levels=100, max_atoms=10)
    assert res.truncated and len(res.final) <= 10


def test_prime_triggers_per_level(prime):
    inst = {atom("A", "a"), atom("B", "b1"), atom("B", "b2")}
    t1 = enumerate_triggers(inst, prime)
    assert [t.rule.id for t in t1] == ["R1"]
    level1 = chase_step(inst, prime)
    t2 = [t for t in enumerate_triggers(level1, prime) if t.rule.id == "R2"]
    assert len(t2) == 2
    assert len({t.mapping[v] for t in t2 for v in t.rule.frontier if isinstance(t.mapping[v], Null)}) == 1


def test_datalog_triggers(unfolding):
    trig = enumerate_triggers({atom("A", "a"), atom("C", "a")}, unfolding)
    assert sorted(t.rule.id for t in trig) == ["R1", "R2"]
    assert enumerate_triggers({atom("G", "a")}, unfolding) == []


def test_triggers_deduplicated_by_frontier():
    r = Rule("R", {atom("p", "X", "Y")}, {atom("A", "X")})
    trig = enumerate_triggers({atom("p", "a", "b"), atom("p", "a", "c")}, [r])
    assert len(trig) == 1 and trig[0].mapping[Variable("Y")] == b


def test_monitor_rejects_prime_derivation(prime):
    r1, r2 = prime
    start = {atom("A", "a"), atom("B", "b")}
    (x1,) = r1.frontier
    d1 = derive(start, [(r1, {x1: a})])
    nu = next(iter(nulls(d1.result())))
    hom = {}
    for at in r2.body:
        if at.predicate == "p":
            hom[at.args[0]], hom[at.args[1]] = a, nu
        else:
            hom[at.args[0]] = b
    d = derive(start, [(r1, {x1: a}), (r2, hom)])
    v = monitor_pieceful(d)
    assert v.status is Status.FAILS and v.step == 2


def test_monitor_accepts_datalog(unfolding):
    res = chase({atom("A", "a"), atom("C", "a")}, unfolding, trace=True)
    assert monitor_pieceful(res.derivation).holds


def test_monitor_accepts_frontier_one():
    r1 = Rule("R1", {atom("A", "X")}, {atom("p", "X", "Z")})
    r2 = Rule("R2", {atom("p", "X", "Y")}, {atom("q", "Y", "W")})
    res = chase({atom("A", "a")}, [r1, r2], trace=True)
    assert len(res.derivation.steps) == 2
    assert monitor_pieceful(res.derivation).holds


def test_derive_rejects_inapplicable_rule():
    r = Rule("R", {atom("A", "X")}, {atom("B", "X")})
    try:
        derive({atom("C", "a")}, [(r, {Variable("X"): a})])
    except ValueError:
        return
    raise AssertionError("expected ValueError")


def test_chase_k_matches_levels(prime):
    inst = {atom("A", "a"), atom("B", "b")}
    res = chase(inst, prime)
    assert chase_k(inst, prime, 1) == res.levels[1]
    assert chase_k(inst, prime, 5) == res.final


@settings(max_examples=60, deadline=None)
@given(st.lists(rules(), min_size=1, max_size=2), ground_sets)
def test_chase_matches_naive_oracle(rs, inst):
    rs = [Rule(f"R{i}", r.body, r.head) for i, r in enumerate(rs)]
    res = chase(inst, rs, max_levels=2, max_atoms=400)
    if res.truncated and len(res.levels) < 3:
        return
    oracle = naive_chase(inst, rs, 2)
    assert res.levels[:3] == oracle[:3]


@settings(max_examples=60, deadline=None)
@given(st.lists(rules(), min_size=1, max_size=3), ground_sets)
def test_levels_monotone_and_deterministic(rs, inst):
    rs = [Rule(f"R{i}", r.body, r.head) for i, r in enumerate(rs)]
    r1 = chase(inst, rs, max_levels=3, max_atoms=500)
    r2 = chase(inst, list(reversed(rs)), max_levels=3, max_atoms=500)
    assert r1.levels == r2.levels
    for lo, hi in zip(r1.levels, r1.levels[1:]):
        assert lo < hi


def test_chase_agrees_with_rewriting_on_samples():
    rng = random.Random(7)
    sig = {"A": 1, "B": 1, "p": 2, "r": 2}
    checked = 0
    for _ in range(80):
        rs = random_rule_set(rng, 2, sig)
        q = frozenset({Atom(rng.choice(["p", "r"]), (Variable("W0"), Variable("W1"))),
                       Atom(rng.choice(["A", "B"]), (Variable("W1"),))})
        rw = rewrite_closure(q, rs, max_depth=4, max_size=200)
        if not rw.complete:
            continue
        for _ in range(5):
            inst = random_instance(rng, sig, rng.randint(1, 6), 3)
            res = chase(inst, rs, max_levels=8, max_atoms=2000)
            if res.truncated:
                continue
            assert maps_to(q, res.final) == any(maps_to(e, inst) for e in rw.elements)
            checked += 1
    assert checked > 50


def test_monitor_holds_for_stable_sets_on_traces():
    rng = random.Random(3)
    sig = {"A": 1, "B": 1, "p": 2, "r": 2}
    seen = 0
    for _ in range(150):
        rs = random_rule_set(rng, 2, sig)
        if check_stability(rs):
            continue
        sat = saturate(rs, max_depth=3, max_rules=40)
        if not sat.fixpoint or sat.violations:
            continue
        inst = random_instance(rng, sig, 5, 3)
        res = chase(inst, rs, max_levels=5, max_atoms=500, trace=True)
        assert monitor_pieceful(res.derivation).holds
        seen += 1
    assert seen > 20
