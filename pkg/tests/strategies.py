from hypothesis import strategies as st

from pieceful.logic import Atom, Constant, Rule, Variable, split_single_piece

SIG = {"A": 1, "B": 1, "p": 2, "r": 2}
VARS = [Variable(n) for n in ("X", "Y", "Z", "W")]
CONSTS = [Constant(n) for n in ("a", "b", "c")]


def atoms_over(term_pool, max_size=4, min_size=0):
    atom = st.sampled_from(sorted(SIG)).flatmap(
        lambda p: st.tuples(*[st.sampled_from(term_pool)] * SIG[p]).map(lambda args, p=p: Atom(p, args)))
    return st.frozensets(atom, min_size=min_size, max_size=max_size)


ground_sets = atoms_over(CONSTS, max_size=6)
var_sets = atoms_over(VARS, max_size=4)
mixed_sets = atoms_over(VARS + CONSTS, max_size=4)


@st.composite
def rules(draw, rule_id="R", prefix=""):
    vs = [Variable(prefix + v.name) for v in VARS[:3]]
    zs = [Variable(prefix + "E0"), Variable(prefix + "E1")]
    body = draw(atoms_over(vs, max_size=2, min_size=1))
    bvars = sorted({t for a in body for t in a.args}, key=lambda v: v.name)
    head = draw(atoms_over(bvars + zs, max_size=2, min_size=1))
    return split_single_piece(Rule(rule_id, body, head))[0]
