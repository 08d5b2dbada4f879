import itertools

from hypothesis import given
from hypothesis import strategies as st

from ijets.multiindex import (ClassTermOrder, IndexedCoordinate, canonical, count_class,
                              count_order, extend, format_exponents, from_exponents, in_cone,
                              index_class, multi_indices, multi_indices_upto, remove,
                              to_exponents, verify_rees)

indices = st.lists(st.integers(1, 4), max_size=6)


@given(indices)
def test_exponent_round_trip(J):
    J = canonical(J)
    assert from_exponents(to_exponents(J, 4)) == J


@given(indices, st.integers(1, 4))
def test_extend_then_remove(J, i):
    J = canonical(J)
    K = extend(J, i)
    assert len(K) == len(J) + 1
    assert remove(K, i) == J


def test_class_is_smallest_entry():
    assert index_class((2, 3, 3)) == 2
    assert index_class(()) == 0
    assert IndexedCoordinate(1, (3, 1, 2)).index == (1, 2, 3)
    assert IndexedCoordinate(1, (3, 1, 2)).cls == 1


def test_enumeration_sizes():
    for p, k in itertools.product(range(1, 5), range(0, 6)):
        assert len(list(multi_indices(p, k))) == count_order(p, 1, k)
    assert len(list(multi_indices_upto(2, 3))) == 1 + 2 + 3 + 4


def test_counts_small_cases():
    assert count_order(2, 1, 2) == 3
    assert [count_class(3, 1, 2, i) for i in (1, 2, 3)] == [3, 2, 1]
    assert count_class(3, 2, 0, 1) == 0


def test_column_order_three_variables():
    # zz, then the class-2 columns yz, yy, then the class-1 columns
    order = ClassTermOrder()
    cols = order.sort(IndexedCoordinate(1, J) for J in multi_indices(3, 2))
    assert [c.index for c in cols] == [(3, 3), (2, 3), (2, 2), (1, 3), (1, 2), (1, 1)]


def test_column_order_respects_permutation():
    order = ClassTermOrder((2, 1))  # y ranked below x
    cols = order.sort(IndexedCoordinate(1, J) for J in multi_indices(2, 2))
    assert [c.index for c in cols] == [(1, 1), (1, 2), (2, 2)]
    assert order.cls(IndexedCoordinate(1, (1, 2))) == 1
    assert order.cls(IndexedCoordinate(1, (1, 1))) == 2


def test_pommaret_cones():
    u_y = IndexedCoordinate(1, (2,))
    u_x = IndexedCoordinate(1, (1,))
    assert in_cone(IndexedCoordinate(1, (1, 2)), u_y)
    assert in_cone(IndexedCoordinate(1, (2, 2)), u_y)
    assert in_cone(IndexedCoordinate(1, (1, 1)), u_x)
    assert not in_cone(IndexedCoordinate(1, (1, 2)), u_x)
    assert not in_cone(IndexedCoordinate(2, (1, 2)), u_y)
    assert in_cone(IndexedCoordinate(1, (1, 2, 2)), IndexedCoordinate(1, ()))


def _at_most_one_y(c):
    return to_exponents(c.index, 2)[1] <= 1


def test_rees_partition():
    gens = [IndexedCoordinate(1, (1, 1, 1)), IndexedCoordinate(1, (1, 1, 2))]
    assert verify_rees(gens, _at_most_one_y, (3, 8), 2).ok


def test_rees_detects_overlap_gap_and_spill():
    gens = [IndexedCoordinate(1, (1, 1, 1)), IndexedCoordinate(1, (1, 1, 2)),
            IndexedCoordinate(1, (1, 1, 1, 1))]
    v = verify_rees(gens, _at_most_one_y, (3, 5), 2)
    assert not v.ok and v.overlapped
    v = verify_rees(gens[:1], _at_most_one_y, (3, 5), 2)
    assert v.uncovered and not v.spilled
    v = verify_rees([IndexedCoordinate(1, (2, 2, 2))], _at_most_one_y, (3, 4), 2)
    assert v.spilled


def test_format_exponents():
    assert format_exponents((1, 2, 2), 3) == "(1,2,0)"
