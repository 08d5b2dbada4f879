"""Jet-coordinate registries and total derivative operators.

A :class:`JetContext` knows the independent variables and a list of
functions.  Each function has argument symbols, which may be independent
variables or the order-zero symbol of another function.  That single rule
covers the lifted bundle (``X(x, y, u)`` with ``u = u(x, y)``), chain-rule
differentiation (``Uh(Xb, Yb)``) and plain jets (``u(x, y)``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .multiindex import IndexedCoordinate, canonical, extend, multi_indices_upto
from .series import SingularityError, TruncatedSeries, evaluate

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


@dataclass(frozen=True)
class FunctionSpec:
    """A function of the context.

    ``identity`` describes the value of the function's jets at the identity
    transformation: ``("coordinate", k)`` means the function equals its
    ``k``-th argument, ``("copy", name)`` means its jets equal those of
    function ``name``.
    """
    name: str
    args: tuple[str, ...]
    unknown: bool = True
    labels: tuple[str, ...] | None = None
    identity: tuple | None = None

    @property
    def derivative_labels(self) -> tuple[str, ...]:
        return self.labels if self.labels is not None else self.args


class UnregisteredCoordinate(KeyError):
    pass


class JetContext:
    def __init__(self, indep: Sequence[str], functions: Sequence[FunctionSpec],
                 params: Sequence[str] = ()):
        self.indep_names = tuple(indep)
        self.indep = tuple(sp.Symbol(n) for n in indep)
        self.functions = {f.name: f for f in functions}
        self.params = tuple(sp.Symbol(n) for n in params)
        self.unknown_names = tuple(f.name for f in functions if f.unknown)
        self._dep = {name: k + 1 for k, name in enumerate(self.unknown_names)}
        self._jets: dict = {}
        self._info: dict = {}
        self._dcache: dict = {}
        self._foreign: set = set()
        for f in functions:
            if "_" in f.name:
                raise ValueError(f"function names may not contain '_': {f.name}")
            self.jet(f.name)

    @property
    def p(self) -> int:
        return len(self.indep)

    # registry ---------------------------------------------------------------
    def jet(self, name: str, J: Iterable[int] = ()) -> sp.Symbol:
        J = canonical(J)
        key = (name, J)
        sym = self._jets.get(key)
        if sym is None:
            f = self.functions[name]
            labels = f.derivative_labels
            suffix = "".join(labels[j - 1] for j in J)
            sym = sp.Symbol(f"{name}_{suffix}" if J else name)
            self._jets[key] = sym
            self._info[sym] = key
        return sym

    def info(self, sym) -> tuple[str, tuple] | None:
        key = self._info.get(sym)
        if key is None and sym not in self._foreign and self._register(sym):
            key = self._info[sym]
        return key

    def is_jet(self, sym) -> bool:
        return self.info(sym) is not None

    def is_unknown(self, sym) -> bool:
        key = self.info(sym)
        return key is not None and self.functions[key[0]].unknown

    def order(self, sym) -> int:
        return len(self.info(sym)[1])

    def dep(self, name: str) -> int:
        return self._dep[name]

    def coordinate(self, sym) -> IndexedCoordinate:
        name, J = self.info(sym)
        return IndexedCoordinate(self._dep.get(name, 0), J)

    def symbol_of(self, coord: IndexedCoordinate) -> sp.Symbol:
        return self.jet(self.unknown_names[coord.dep - 1], coord.index)

    def arg_symbols(self, name: str) -> tuple:
        f = self.functions[name]
        out = []
        for a in f.args:
            if a in self.indep_names:
                out.append(self.indep[self.indep_names.index(a)])
            elif a in self.functions:
                out.append(self.jet(a))
            else:
                raise UnregisteredCoordinate(a)
        return tuple(out)

    def unknown_jets(self, expr) -> list:
        return [s for s in sp.sympify(expr).free_symbols if self.is_unknown(s)]

    def jets_of_order(self, name: str, k: int) -> list:
        from .multiindex import multi_indices
        f = self.functions[name]
        return [self.jet(name, J) for J in multi_indices(len(f.args), k)]

    def all_unknown_jets(self, k: int) -> list:
        out = []
        for name in self.unknown_names:
            out.extend(self.jets_of_order(name, k))
        return out

    # parsing ----------------------------------------------------------------
    def parse_name(self, ident: str):
        if ident in self.indep_names:
            return self.indep[self.indep_names.index(ident)]
        for s in self.params:
            if s.name == ident:
                return s
        if ident in self.functions:
            return self.jet(ident)
        if "_" in ident:
            name, suffix = ident.split("_", 1)
            if name in self.functions:
                J = self._tokenize(name, suffix)
                if J is not None:
                    return self.jet(name, J)
        raise UnregisteredCoordinate(ident)

    def _tokenize(self, name: str, suffix: str):
        labels = self.functions[name].derivative_labels
        by_length = sorted(range(len(labels)), key=lambda k: -len(labels[k]))
        J = []
        pos = 0
        while pos < len(suffix):
            for k in by_length:
                if suffix.startswith(labels[k], pos):
                    J.append(k + 1)
                    pos += len(labels[k])
                    break
            else:
                return None
        return J

    def parse(self, text) -> sp.Expr:
        if not isinstance(text, str):
            return sp.sympify(text)
        names = {"sqrt": sp.sqrt, "Rational": sp.Rational}
        for ident in set(_IDENT.findall(text)):
            if ident in names:
                continue
            names[ident] = self.parse_name(ident)
        return sp.sympify(text, locals=names)

    def label(self, sym) -> str:
        return sym.name

    def _register(self, sym) -> bool:
        """Register a jet symbol created by another context with the same
        naming scheme; False for symbols that are not jets here."""
        if not isinstance(sym, sp.Symbol) or sym in self._foreign:
            return False
        try:
            if self.parse_name(sym.name) == sym and sym in self._info:
                return True
        except UnregisteredCoordinate:
            pass
        self._foreign.add(sym)
        return False

    # derivatives ------------------------------------------------------------
    def _dsym(self, sym, i: int):
        key = (sym, i)
        hit = self._dcache.get(key)
        if hit is not None:
            return hit
        if sym in self.indep:
            val = sp.Integer(1 if self.indep.index(sym) == i - 1 else 0)
        elif self.info(sym) is not None:
            name, J = self._info[sym]
            val = sp.Integer(0)
            for k, a in enumerate(self.arg_symbols(name), start=1):
                da = self._dsym(a, i)
                if da != 0:
                    val += self.jet(name, extend(J, k)) * da
        else:
            val = sp.Integer(0)
        self._dcache[key] = val
        return val

    def D(self, expr, i: int) -> sp.Expr:
        """Total derivative in the direction of the ``i``-th independent
        variable (1-based)."""
        expr = sp.sympify(expr)
        total = sp.Integer(0)
        for s in expr.free_symbols:
            ds = self._dsym(s, i)
            if ds != 0:
                total += expr.diff(s) * ds
        return total

    def DJ(self, expr, J: Iterable[int]) -> sp.Expr:
        for i in J:
            expr = self.D(expr, i)
        return expr


def total_derivative(expr, i: int, ctx: JetContext) -> sp.Expr:
    return ctx.D(expr, i)


def _substitute(expr, subs):
    if not subs:
        return expr
    return sp.sympify(expr).xreplace(subs)


def implicit_total_derivative(expr, i: int, ctx: JetContext, inverse_jacobian,
                              subs: Mapping | None = None) -> sp.Expr:
    """``D_{X^i} = sum_j W[j][i] D_{x^j}`` with ``W`` the inverse of the total
    Jacobian ``(D_{x^j} Xb^i)``."""
    total = sp.Integer(0)
    for j in range(ctx.p):
        w = inverse_jacobian[j][i - 1]
        if w != 0:
            total += w * _substitute(ctx.D(expr, j + 1), subs)
    return total


def chain_rule_derivative(expr, i: int, ctx: JetContext) -> sp.Expr:
    """Total derivative when the context's coefficient functions take the
    horizontal unknowns as arguments, i.e. ``D_{x^i} = sum_j Xb^j_i D_{X^j}``."""
    return ctx.D(expr, i)


def inverse_jacobian(ctx: JetContext, horizontal: Sequence[str], subs: Mapping | None = None):
    p = ctx.p
    jac = sp.Matrix(p, p, lambda a, b: _substitute(ctx.D(ctx.jet(horizontal[a]), b + 1), subs))
    if p == 1:
        return [[1 / jac[0, 0]]]
    det = sp.factor(jac.det())
    if det == 0:
        raise SingularityError("singular total Jacobian")
    inv = jac.adjugate() / det
    return [[sp.together(inv[a, b]) for b in range(p)] for a in range(p)]


def prolong_action(ctx: JetContext, horizontal: Sequence[str], vertical: Sequence[str],
                   up_to: int, subs: Mapping | None = None, simplify=sp.together) -> dict:
    """Prolonged action ``Uh^alpha_J = D_X^J Ub^alpha`` expressed through the
    reduced jets, with ``subs`` (principal reduced jet -> expression) applied
    after every differentiation."""
    W = inverse_jacobian(ctx, horizontal, subs)
    out = {}
    for a, name in enumerate(vertical, start=1):
        out[(a, ())] = _substitute(ctx.jet(name), subs)
    for J in multi_indices_upto(ctx.p, up_to):
        if not J:
            continue
        parent, i = J[:-1], J[-1]
        # build in sorted order; J[:-1] is canonical and already present
        for a in range(1, len(vertical) + 1):
            e = implicit_total_derivative(out[(a, parent)], i, ctx, W, subs)
            out[(a, J)] = simplify(_substitute(e, subs))
    return out


@dataclass
class SectionJet:
    """Jet of a section at a base point, ``jets[(alpha, J)]`` with ``alpha``
    1-based."""
    base: tuple
    jets: dict
    order: int

    def series(self, alpha: int = 1) -> TruncatedSeries:
        vals = {J: v for (a, J), v in self.jets.items() if a == alpha}
        return TruncatedSeries.from_jets(len(self.base), self.order, vals)

    @classmethod
    def from_series(cls, base, series: Sequence[TruncatedSeries]) -> "SectionJet":
        jets = {}
        order = series[0].order
        p = len(base)
        for a, s in enumerate(series, start=1):
            for J in multi_indices_upto(p, order):
                jets[(a, J)] = s.jet(J)
        return cls(tuple(base), jets, order)

    def to_json(self) -> dict:
        from .series import format_fraction
        rows = []
        for (a, J), v in sorted(self.jets.items(), key=lambda t: (t[0][0], len(t[0][1]), t[0][1])):
            rows.append({"dep": a, "index": list(J), "value": format_fraction(v)})
        return {"base": [format_fraction(b) for b in self.base], "jets": rows}

    @classmethod
    def from_json(cls, data: dict) -> "SectionJet":
        from .series import parse_fraction
        base = tuple(parse_fraction(b) for b in data["base"])
        jets = {}
        for row in data["jets"]:
            jets[(int(row["dep"]), canonical(row["index"]))] = parse_fraction(row["value"])
        order = max((len(J) for (_, J) in jets), default=0)
        p = len(base)
        q = max((a for a, _ in jets), default=1)
        for a in range(1, q + 1):
            for J in multi_indices_upto(p, order):
                jets.setdefault((a, J), Fraction(0))
        return cls(base, jets, order)

    def env(self, ctx: JetContext, fiber: Sequence[str]) -> dict:
        """Bind the jet symbols of the section functions ``fiber``."""
        out = {}
        for s, b in zip(ctx.indep, self.base):
            out[s] = b
        for (a, J), v in self.jets.items():
            out[ctx.jet(fiber[a - 1], J)] = v
        return out


def evaluate_expr(expr, env: Mapping):
    return evaluate(expr, env)
