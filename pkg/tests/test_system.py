import random

import pytest

from ijets import catalog
from ijets.system import (DifferentialSystem, delta_regularity_probe, first_order_reduction,
                          initial_condition_schema, involutivity, load_system, rref,
                          save_system)


def make(eqs, funcs=("u",), indep=("x", "y"), order=2):
    return DifferentialSystem.from_json({
        "context": {"indep": list(indep),
                    "functions": [{"name": f, "args": list(indep)} for f in funcs]},
        "order": order,
        "equations": [{"lhs": a, "rhs": b} for a, b in eqs]})


@pytest.fixture
def laplace():
    return make([("u_yy", "-u_xx")])


def test_laplace_is_involutive(laplace):
    v = involutivity(laplace)
    assert v.indices == (0, 1)
    assert v.characters == (2, 0)
    assert v.weighted_indices == v.next_rank == 2
    assert v.involutive
    assert v.text() == "indices 0 1; characters 2 0; involutive: yes"


def test_delta_singular_chart_is_detected():
    s = make([("u_xy", "0")])
    v = involutivity(s)
    assert not v.symbol_involutive
    assert (v.weighted_indices, v.next_rank) == (1, 2)
    rep = delta_regularity_probe(s, 10, 0)
    assert rep.irregular and rep.maximum == 2


def test_integrability_conditions_are_reported():
    s = make([("u_x", "u"), ("u_y", "x*u")], order=1)
    v = involutivity(s)
    assert v.symbol_involutive
    assert v.integrability_conditions
    assert not v.involutive


def test_dimension_identity(laplace):
    # d_n = t_n - r_n at every computed order
    pro = laplace.prolong_to(5)
    for n in range(2, 6):
        rep = pro.symbol(n)
        assert rep.dim == len(pro.parametric(n)) == n + 1 - rep.rank


def test_rank_independent_of_regular_point():
    sys2, _ = catalog.load("running").system_pair("group", 2)
    ranks = {sys2.symbol(2, point=sys2.point(seed=s)).indices for s in (1, 2, 3)}
    assert ranks == {(7, 6, 3)}


def test_indices_independent_of_within_class_tie_break():
    sys2, _ = catalog.load("ex15").system_pair("nf", 2)
    rep = sys2.symbol(2)
    rng = random.Random(3)
    classes = [sys2.term_order.cls(c) for c in rep.columns]
    for _ in range(3):
        order = []
        for k in sorted(set(classes), reverse=True):
            block = [j for j, c in enumerate(classes) if c == k]
            rng.shuffle(block)
            order += block
        permuted = [[row[j] for j in order] for row in rep.matrix]
        _, pivots = rref(permuted, len(order))
        beta = [0] * sys2.p
        for k in pivots:
            beta[classes[order[k]] - 1] += 1
        assert tuple(beta) == rep.indices


def test_first_order_reduction_preserves_involutivity(laplace):
    fo = first_order_reduction(laplace)
    assert fo.order == 1
    assert fo.q == 3
    assert involutivity(fo).involutive


def test_initial_data_for_laplace(laplace):
    schema = initial_condition_schema(laplace)
    assert schema.text() == "u(0); uDx(x); uDy(x)"
    assert schema.function_counts == {0: 1, 1: 2}


def test_initial_data_need_involutive_system():
    with pytest.raises(ValueError):
        initial_condition_schema(make([("u_xy", "0")]))


def test_save_and_load(tmp_path):
    sys2, _ = catalog.load("running").system_pair("group", 2)
    path = tmp_path / "group.json"
    save_system(sys2, path)
    back = load_system(path)
    assert back.symbol(2).indices == sys2.symbol(2).indices
    assert len(back.equations) == len(sys2.equations)


def test_rref_exact():
    from fractions import Fraction as F
    ech, piv = rref([[F(0), F(2), F(4)], [F(1), F(1), F(1)], [F(1), F(2), F(3)]], 3)
    assert piv == [0, 1]
