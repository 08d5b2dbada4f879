import sympy as sp

from ijets import catalog
from ijets.reduction import (identity_check, reduced_character_check, reduced_involutivity,
                             reducibility_check)


def test_pseudo_group_naming():
    g = catalog.load("running").group
    assert (g.p, g.q) == (2, 1)
    assert g.base_names == ("x", "y")
    assert g.fiber_names == ("u",)
    assert g.group_names == ("X", "Y", "U")
    assert g.reduced_name("X") == "Xb"


def test_reduced_equations_vanish_at_identity():
    for entry_id in ("running", "ex4", "ex5", "n2"):
        red = catalog.load(entry_id).reduced(2)
        assert identity_check(red) == [], entry_id


def test_running_reduced_first_order_relations():
    red = catalog.load("running").reduced(2)
    ctx = red.ctx
    eqs = red.system.equations
    assert sp.simplify(eqs[ctx.parse_name("Yb_y")] - ctx.parse("Xb_x")) == 0
    assert eqs[ctx.parse_name("Xb_y")] == 0


def test_reduced_involutivity_helper():
    e = catalog.load("ex4")
    v, red = reduced_involutivity(e.group, e.regular_point, 2)
    assert not v.involutive and (v.weighted_indices, v.next_rank) == (8, 9)
    assert red.up_to == 3


def test_reduced_characters_match_for_reducible_group():
    e = catalog.load("running")
    assert all(reduced_character_check(e.group, e.reduced(n), n) for n in (2, 3))


def test_reducibility_report_lists_dimensions():
    e = catalog.load("running")
    rep = reducibility_check(e.group, e.reduced(4), range(1, 5))
    assert rep.d == rep.d_reduced == [6, 8, 10, 12]
    assert rep.to_json()["reducible"] is True


def test_redfree_triple():
    verdicts = {}
    for entry_id in ("redfree-pg1", "redfree-pg2", "redfree-pg3"):
        e = catalog.load(entry_id)
        verdicts[entry_id] = reducibility_check(e.group, e.reduced(4), range(1, 5)).reducible
    assert verdicts == {"redfree-pg1": False, "redfree-pg2": False, "redfree-pg3": True}
