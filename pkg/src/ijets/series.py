"""Exact truncated multivariate power series and expression helpers.

Expressions are sympy trees over jet-coordinate symbols.  Evaluation walks
the tree with Python numbers, so the same walker works for exact
``Fraction`` values, for truncated series and for high-precision floats.
"""
from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

import mpmath
import sympy as sp

from .multiindex import from_exponents, to_exponents


class SingularityError(ArithmeticError):
    pass


class InexactRoot(ArithmeticError):
    """A square root of a rational that is not a perfect square."""


def parse_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, sp.Rational):
        return Fraction(int(value.p), int(value.q))
    return Fraction(str(value))


def format_fraction(q: Fraction) -> str:
    return str(Fraction(q))


def exact_sqrt(q: Fraction) -> Fraction:
    q = Fraction(q)
    if q < 0:
        raise SingularityError(f"negative radicand {q}")
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n != q.numerator or d * d != q.denominator:
        raise InexactRoot(str(q))
    return Fraction(n, d)


def _monomials(nvars: int, order: int):
    for total in range(order + 1):
        for e in product(range(total + 1), repeat=nvars):
            if sum(e) == total:
                yield e


class TruncatedSeries:
    """Taylor polynomial in ``nvars`` variables truncated at total degree
    ``order``.  Coefficients are keyed by exponent tuples and may be
    ``Fraction`` or ``mpmath.mpf`` values."""

    __slots__ = ("nvars", "order", "coeffs")

    def __init__(self, nvars: int, order: int, coeffs: Mapping | None = None):
        self.nvars = nvars
        self.order = order
        self.coeffs = {}
        for e, c in (coeffs or {}).items():
            if sum(e) <= order and c != 0:
                self.coeffs[tuple(e)] = c

    @classmethod
    def constant(cls, nvars, order, c):
        return cls(nvars, order, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars, order, i, shift=0):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, order, {(0,) * nvars: shift, tuple(e): 1})

    @classmethod
    def from_jets(cls, nvars, order, jets: Mapping):
        """Series with Taylor coefficients ``jets[J] / J!``; ``J`` are
        multi-indices."""
        coeffs = {}
        for J, v in jets.items():
            if len(J) > order:
                continue
            e = to_exponents(J, nvars)
            coeffs[e] = v / math.prod(math.factorial(k) for k in e)
        return cls(nvars, order, coeffs)

    def jet(self, J) -> Fraction:
        e = to_exponents(J, self.nvars)
        return self.coeffs.get(e, 0) * math.prod(math.factorial(k) for k in e)

    def jets(self) -> dict:
        return {from_exponents(e): self.jet(from_exponents(e)) for e in self.coeffs}

    def const(self):
        return self.coeffs.get((0,) * self.nvars, 0)

    def _check(self, other):
        if (self.nvars, self.order) != (other.nvars, other.order):
            raise ValueError("series shape mismatch")

    def _lift(self, other):
        if isinstance(other, TruncatedSeries):
            self._check(other)
            return other
        return TruncatedSeries.constant(self.nvars, self.order, other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0) + c
        return TruncatedSeries(self.nvars, self.order, out)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.nvars, self.order, {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(self.nvars, self.order,
                                   {e: c * other for e, c in self.coeffs.items()})
        self._check(other)
        out = {}
        N = self.order
        for e1, c1 in self.coeffs.items():
            s1 = sum(e1)
            for e2, c2 in other.coeffs.items():
                if s1 + sum(e2) > N:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return TruncatedSeries(self.nvars, N, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.invert()
        return self * (1 / Fraction(other) if isinstance(other, int) else 1 / other)

    def __rtruediv__(self, other):
        return self.invert() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.invert() ** (-k)
        result = TruncatedSeries.constant(self.nvars, self.order, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def invert(self) -> "TruncatedSeries":
        a0 = self.const()
        if a0 == 0:
            raise SingularityError("series with zero constant term is not invertible")
        inv0 = 1 / Fraction(a0) if isinstance(a0, (int, Fraction)) else 1 / a0
        tail = self - a0
        # 1/(a0 + t) = inv0 * sum_k (-t*inv0)^k
        step = tail * (-inv0)
        result = TruncatedSeries.constant(self.nvars, self.order, 1)
        term = result
        for _ in range(self.order):
            term = term * step
            result = result + term
        return result * inv0

    def sqrt(self) -> "TruncatedSeries":
        a0 = self.const()
        if a0 <= 0:
            raise SingularityError("square root needs a positive constant term")
        r0 = exact_sqrt(a0) if isinstance(a0, (int, Fraction)) else mpmath.sqrt(a0)
        # sqrt(a0 (1 + t)) = r0 * sum binom(1/2, k) t^k
        t = (self - a0) * (1 / Fraction(a0) if isinstance(a0, (int, Fraction)) else 1 / a0)
        result = TruncatedSeries.constant(self.nvars, self.order, 1)
        term = result
        coef = Fraction(1)
        for k in range(1, self.order + 1):
            coef = coef * (Fraction(1, 2) - (k - 1)) / k
            term = term * t
            result = result + term * coef
        return result * r0

    def partial(self, i: int) -> "TruncatedSeries":
        """Derivative in variable ``i`` (0-based); the truncation order is kept
        although the top-degree coefficients are lost."""
        out = {}
        for e, c in self.coeffs.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                out[tuple(f)] = c * e[i]
        return TruncatedSeries(self.nvars, self.order, out)

    def compose(self, args: Sequence["TruncatedSeries"]) -> "TruncatedSeries":
        """Substitute series with zero constant term for the variables."""
        if len(args) != self.nvars:
            raise ValueError("wrong number of arguments")
        for a in args:
            if a.const() != 0:
                raise ValueError("composition needs arguments without constant term")
        ref = args[0]
        powers = [[TruncatedSeries.constant(ref.nvars, ref.order, 1)] for _ in args]
        for a, pw in zip(args, powers):
            for _ in range(self.order):
                pw.append(pw[-1] * a)
        result = TruncatedSeries(ref.nvars, ref.order)
        for e, c in self.coeffs.items():
            term = TruncatedSeries.constant(ref.nvars, ref.order, c)
            for k, pw in zip(e, powers):
                if k:
                    term = term * pw[k]
            result = result + term
        return result

    def evaluate(self, point: Sequence):
        total = 0
        for e, c in self.coeffs.items():
            total += c * math.prod(x ** k for x, k in zip(point, e))
        return total

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            other = TruncatedSeries.constant(self.nvars, self.order, other)
        return (self.nvars, self.order) == (other.nvars, other.order) and \
            self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.nvars, self.order, frozenset(self.coeffs.items())))

    def __repr__(self):
        terms = " + ".join(f"{c}*{e}" for e, c in sorted(self.coeffs.items(), key=lambda t: (sum(t[0]), t[0])))
        return f"TruncatedSeries({self.nvars}, {self.order}, {terms or 0})"

    def to_json(self) -> dict:
        terms = []
        for e in sorted(self.coeffs, key=lambda e: (sum(e), e)):
            terms.append({"index": list(from_exponents(e)),
                          "coeff": format_fraction(self.coeffs[e])})
        return {"vars": self.nvars, "order": self.order, "terms": terms}

    @classmethod
    def from_json(cls, data: dict) -> "TruncatedSeries":
        n = int(data["vars"])
        coeffs = {to_exponents(t["index"], n): parse_fraction(t["coeff"]) for t in data["terms"]}
        return cls(n, int(data["order"]), coeffs)


def revert(maps: Sequence[TruncatedSeries]) -> list[TruncatedSeries]:
    """Compositional inverse of a map without constant terms.

    Uses the fixed-point iteration ``B = L^{-1}(id - N(B))`` where ``L`` is
    the linear part and ``N`` the nonlinear remainder; every pass fixes one
    more order."""
    p = len(maps)
    n = maps[0].nvars
    if n != p:
        raise ValueError("reversion needs a square map")
    N = maps[0].order
    lin = sp.Matrix(p, p, lambda i, j: sp.Rational(0))
    for i, m in enumerate(maps):
        for j in range(p):
            e = tuple(1 if k == j else 0 for k in range(p))
            c = m.coeffs.get(e, 0)
            lin[i, j] = sp.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else c
    if lin.det() == 0:
        raise SingularityError("map has a singular linear part")
    inv = lin.inv()
    inv = [[parse_fraction(inv[i, j]) if isinstance(inv[i, j], sp.Rational) else inv[i, j]
            for j in range(p)] for i in range(p)]
    nonlinear = []
    for m in maps:
        nonlinear.append(TruncatedSeries(n, N, {e: c for e, c in m.coeffs.items() if sum(e) >= 2}))
    ident = [TruncatedSeries.variable(n, N, i) for i in range(p)]
    B = [sum((ident[j] * inv[i][j] for j in range(p)), TruncatedSeries(n, N)) for i in range(p)]
    for _ in range(N):
        comp = [m.compose(B) for m in nonlinear]
        rhs = [ident[j] - comp[j] for j in range(p)]
        B = [sum((rhs[j] * inv[i][j] for j in range(p)), TruncatedSeries(n, N)) for i in range(p)]
    return B


# expression helpers -------------------------------------------------------

class FloatFallback(Warning):
    pass


def evaluate(expr, env: Mapping, *, allow_float: bool = True, memo=None):
    """Evaluate a sympy expression with the symbols bound in ``env``.

    Values may be ``Fraction``, ``mpmath.mpf`` or ``TruncatedSeries``.  A
    square root of a non-square rational raises ``InexactRoot`` unless
    ``allow_float`` is set, in which case the result is a 128-bit mpf."""
    if memo is None:
        memo = {}
    return _walk(sp.sympify(expr), env, allow_float, memo)


def _walk(e, env, allow_float, memo):
    hit = memo.get(e)
    if hit is not None:
        return hit
    if e.is_Symbol:
        if e not in env:
            raise KeyError(f"unbound coordinate {e}")
        val = env[e]
    elif e.is_Integer:
        val = Fraction(int(e))
    elif e.is_Rational:
        val = Fraction(int(e.p), int(e.q))
    elif e.is_Float:
        val = mpmath.mpf(e)
    elif e.is_Add:
        val = 0
        for a in e.args:
            val = val + _walk(a, env, allow_float, memo)
    elif e.is_Mul:
        val = 1
        for a in e.args:
            val = val * _walk(a, env, allow_float, memo)
    elif e.is_Pow:
        base = _walk(e.base, env, allow_float, memo)
        ex = e.exp
        if ex.is_Integer:
            k = int(ex)
            if k < 0:
                base = _reciprocal(base)
                k = -k
            val = base ** k if not isinstance(base, TruncatedSeries) else base ** k
        elif ex.is_Rational and ex.q == 2:
            root = _sqrt(base, allow_float)
            k = int(ex.p)
            if k < 0:
                root = _reciprocal(root)
                k = -k
            val = root ** k
        else:
            raise ValueError(f"unsupported power {e}")
    elif isinstance(e, sp.core.numbers.NumberSymbol) or e.is_number:
        val = mpmath.mpf(sp.N(e, 40))
    else:
        raise ValueError(f"unsupported expression node {e.func}")
    memo[e] = val
    return val


def _reciprocal(v):
    if isinstance(v, TruncatedSeries):
        return v.invert()
    if v == 0:
        raise ZeroDivisionError("division by zero in evaluation")
    if isinstance(v, int):
        return Fraction(1, v)
    return 1 / v


def _sqrt(v, allow_float):
    if isinstance(v, TruncatedSeries):
        try:
            return v.sqrt()
        except InexactRoot:
            if not allow_float:
                raise
            with mpmath.workprec(128):
                return TruncatedSeries(v.nvars, v.order,
                                       {e: mpmath.mpf(c.numerator) / c.denominator
                                        if isinstance(c, Fraction) else c
                                        for e, c in v.coeffs.items()}).sqrt()
    if isinstance(v, (int, Fraction)):
        try:
            return exact_sqrt(Fraction(v))
        except InexactRoot:
            if not allow_float:
                raise
            with mpmath.workprec(128):
                return mpmath.sqrt(mpmath.mpf(v.numerator) / v.denominator)
    if v < 0:
        raise SingularityError("negative radicand")
    return mpmath.sqrt(v)


def is_exact(value) -> bool:
    return isinstance(value, (int, Fraction))


def partial(expr, wrt):
    return sp.diff(expr, wrt)


def random_rational(rng: random.Random, lo: int = -9, hi: int = 9, den: int = 7) -> Fraction:
    while True:
        q = Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den))
        if q != 0:
            return q


def equal_by_sampling(a, b, rng: random.Random | None = None, points: int = 5,
                      fixed: Mapping | None = None,
                      sampler: Callable[[random.Random], Fraction] | None = None) -> bool:
    """Probabilistic identity test: ``a - b`` vanishes at ``points`` random
    rational points.  ``fixed`` pins some symbols."""
    return is_zero(sp.sympify(a) - sp.sympify(b), rng, points, fixed, sampler)


def is_zero(expr, rng: random.Random | None = None, points: int = 5,
            fixed: Mapping | None = None, sampler=None) -> bool:
    expr = sp.sympify(expr)
    if expr == 0:
        return True
    rng = rng or random.Random(0)
    sampler = sampler or random_rational
    syms = sorted(expr.free_symbols, key=lambda s: s.name)
    tried = 0
    attempts = 0
    while tried < points and attempts < 20 * points:
        attempts += 1
        env = {s: sampler(rng) for s in syms}
        if fixed:
            env.update({k: v for k, v in fixed.items()})
        try:
            val = evaluate(expr, env, allow_float=True)
        except (ZeroDivisionError, SingularityError):
            continue
        tried += 1
        if is_exact(val):
            if val != 0:
                return False
        elif abs(val) > mpmath.mpf(10) ** -20:
            return False
    return True


def sympy_rational(q) -> sp.Rational:
    q = Fraction(q)
    return sp.Rational(q.numerator, q.denominator)
