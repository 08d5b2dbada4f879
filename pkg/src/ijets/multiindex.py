"""Symmetric multi-indices, counting formulas, class-respecting column
orders, Pommaret cones and Rees-decomposition checks.

A multi-index is a sorted tuple of variable numbers in ``1..p``; ``(1, 2, 2)``
stands for the derivative with respect to ``x^1 x^2 x^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb
from typing import Callable, Iterable, Iterator, Sequence

MultiIndex = tuple


def canonical(entries: Iterable[int]) -> MultiIndex:
    return tuple(sorted(entries))


def index_class(J: Sequence[int]) -> int:
    """Smallest entry of ``J``; 0 for the empty multi-index."""
    return min(J) if J else 0


def extend(J: Sequence[int], *i: int) -> MultiIndex:
    return canonical((*J, *i))


def remove(J: Sequence[int], k: int) -> MultiIndex:
    entries = list(J)
    entries.remove(k)
    return tuple(entries)


def to_exponents(J: Sequence[int], p: int) -> tuple[int, ...]:
    e = [0] * p
    for j in J:
        e[j - 1] += 1
    return tuple(e)


def from_exponents(e: Sequence[int]) -> MultiIndex:
    return tuple(i + 1 for i, k in enumerate(e) for _ in range(k))


def multi_indices(p: int, k: int) -> Iterator[MultiIndex]:
    """All multi-indices of order ``k`` over ``p`` variables."""
    return combinations_with_replacement(range(1, p + 1), k)


def multi_indices_upto(p: int, n: int) -> Iterator[MultiIndex]:
    for k in range(n + 1):
        yield from multi_indices(p, k)


def count_order(p: int, q: int, k: int) -> int:
    """Number of jet coordinates of order exactly ``k``."""
    return q * comb(p + k - 1, k)


def count_class(p: int, q: int, k: int, i: int) -> int:
    """Number of order-``k`` jet coordinates whose multi-index has class ``i``."""
    if k == 0:
        return 0
    return q * comb(p + k - i - 1, k - 1)


@dataclass(frozen=True, order=True)
class IndexedCoordinate:
    dep: int
    index: MultiIndex = ()

    def __post_init__(self):
        object.__setattr__(self, "index", canonical(self.index))

    @property
    def order(self) -> int:
        return len(self.index)

    @property
    def cls(self) -> int:
        return index_class(self.index)

    def to_json(self) -> dict:
        return {"dep": self.dep, "index": list(self.index)}

    @classmethod
    def from_json(cls, data: dict) -> "IndexedCoordinate":
        return cls(int(data["dep"]), tuple(data.get("index", ())))


def in_cone(target: IndexedCoordinate, generator: IndexedCoordinate) -> bool:
    """True when ``target`` is the generator with extra entries <= its class."""
    if target.dep != generator.dep:
        return False
    rest = list(target.index)
    for j in generator.index:
        if j not in rest:
            return False
        rest.remove(j)
    k = generator.cls
    if not generator.index:
        k = max(rest, default=0)
    return all(j <= k for j in rest)


@dataclass
class ReesVerdict:
    ok: bool
    uncovered: list = field(default_factory=list)
    overlapped: list = field(default_factory=list)
    spilled: list = field(default_factory=list)


def verify_rees(generators: Sequence[IndexedCoordinate],
                universe: Callable[[IndexedCoordinate], bool],
                order_range: tuple[int, int], p: int,
                deps: Iterable[int] | None = None) -> ReesVerdict:
    """Check that the cones of ``generators`` partition ``universe`` on the
    given order range.

    ``spilled`` lists cone members that fall outside the universe, so an ok
    verdict means exact set equality on the range.
    """
    lo, hi = order_range
    deps = sorted(set(deps) if deps is not None else {g.dep for g in generators})
    verdict = ReesVerdict(ok=True)
    for dep in deps:
        for k in range(lo, hi + 1):
            for J in multi_indices(p, k):
                c = IndexedCoordinate(dep, J)
                hits = sum(in_cone(c, g) for g in generators)
                if universe(c):
                    if hits == 0:
                        verdict.uncovered.append(c)
                    elif hits > 1:
                        verdict.overlapped.append(c)
                elif hits:
                    verdict.spilled.append(c)
    verdict.ok = not (verdict.uncovered or verdict.overlapped or verdict.spilled)
    return verdict


@dataclass(frozen=True)
class ClassTermOrder:
    """Column order for symbol matrices.

    ``variable_permutation[r]`` is the variable ranked ``r + 1``: the default
    identity ranks ``x^1`` lowest.  Among coordinates of one order, higher
    class comes first; inside a class entries are compared in descending
    lexicographic order and then by ascending dependent tag.
    """
    variable_permutation: tuple[int, ...] | None = None

    def rank(self, i: int) -> int:
        if self.variable_permutation is None:
            return i
        return self.variable_permutation.index(i) + 1

    def relabel(self, J: Sequence[int]) -> MultiIndex:
        return canonical(self.rank(j) for j in J)

    def key(self, coord: IndexedCoordinate):
        J = self.relabel(coord.index)
        return (-len(J), -index_class(J), tuple(-j for j in J), coord.dep)

    def sort(self, coords: Iterable[IndexedCoordinate]) -> list[IndexedCoordinate]:
        return sorted(coords, key=self.key)

    def cls(self, coord: IndexedCoordinate) -> int:
        return index_class(self.relabel(coord.index))


def format_exponents(J: Sequence[int], p: int) -> str:
    return "(" + ",".join(str(e) for e in to_exponents(J, p)) + ")"
