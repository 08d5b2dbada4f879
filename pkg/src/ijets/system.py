"""Differential systems in solved form: prolongation, integrability checks,
symbol matrices, indices and Cartan characters, first-order representation
and initial-data schemas."""
from __future__ import annotations

import csv
import io
import json
import random
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import sympy as sp
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .jetcalc import FunctionSpec, JetContext
from .multiindex import (ClassTermOrder, IndexedCoordinate, count_class, count_order,
                         extend, index_class, multi_indices)
from .series import (SingularityError, evaluate, format_fraction, is_zero,
                     parse_fraction, random_rational, sympy_rational)


class UnsolvableEquation(ArithmeticError):
    pass


# points -----------------------------------------------------------------------

def _named_rng(seed: int, name: str) -> random.Random:
    return random.Random(zlib.crc32(f"{seed}:{name}".encode()))


class JetPoint:
    """Rational values for every symbol of a context.

    Overrides win; in ``identity`` mode unknown jets take their identity
    values; independent variables default to 0; everything else gets a
    reproducible random rational derived from the symbol name.
    """

    def __init__(self, ctx: JetContext, overrides: Mapping | None = None, seed: int = 0,
                 identity: bool = False):
        self.ctx = ctx
        self.seed = seed
        self.identity = identity
        self.values: dict = {}
        for k, v in (overrides or {}).items():
            sym = ctx.parse_name(k) if isinstance(k, str) else k
            self.values[sym] = parse_fraction(v)

    def __contains__(self, sym):
        return True

    def __getitem__(self, sym):
        hit = self.values.get(sym)
        if hit is not None:
            return hit
        val = self._default(sym)
        self.values[sym] = val
        return val

    def _default(self, sym):
        ctx = self.ctx
        if sym in ctx.indep:
            return Fraction(0)
        info = ctx.info(sym)
        if info is not None and self.identity:
            ident = identity_value(ctx, sym)
            if ident is not None:
                return evaluate(ident, self)
        return random_rational(_named_rng(self.seed, sym.name))

    def env(self, expr) -> dict:
        return {s: self[s] for s in sp.sympify(expr).free_symbols}

    def value(self, expr):
        return evaluate(expr, self)


def identity_value(ctx: JetContext, sym):
    """Symbolic value of an unknown jet at the identity transformation, or
    ``None`` if the function has no identity rule."""
    info = ctx.info(sym)
    if info is None:
        return None
    name, J = info
    rule = ctx.functions[name].identity
    if rule is None:
        return None
    kind = rule[0]
    if kind == "coordinate":
        k = rule[1]
        if not J:
            return ctx.arg_symbols(name)[k - 1]
        return sp.Integer(1 if J == (k,) else 0)
    if kind == "copy":
        return ctx.jet(rule[1], J)
    raise ValueError(f"unknown identity rule {rule}")


def identity_substitution(ctx: JetContext, symbols: Iterable) -> dict:
    out = {}
    for s in symbols:
        v = identity_value(ctx, s) if ctx.is_unknown(s) else None
        if v is not None:
            out[s] = v
    return out


# solved-form builder ------------------------------------------------------------

def ranking_key(ctx: JetContext, term_order: ClassTermOrder):
    def key(sym):
        return term_order.key(ctx.coordinate(sym))
    return key


def _clean(expr):
    expr = sp.together(sp.sympify(expr))
    num, den = sp.fraction(expr)
    return sp.expand(num)


class CartanSolver:
    """Incrementally turns residuals into equations ``principal = rhs`` with
    every right-hand side in parametric jets only.

    Among the unknown jets of a residual the highest ranked one that enters
    linearly is chosen, skipping jets whose coefficient vanishes at
    ``reference`` (typically the identity) so that the solved form stays
    regular there.
    """

    def __init__(self, ctx: JetContext, term_order: ClassTermOrder | None = None,
                 principal: Mapping | None = None, reference: JetPoint | None = None,
                 max_order: int | None = None, rng_seed: int = 0):
        self.ctx = ctx
        self.term_order = term_order or ClassTermOrder()
        self.P: dict = dict(principal or {})
        self.reference = reference
        self.max_order = max_order
        self.conditions: list = []
        self.new: list = []
        self.rng = random.Random(rng_seed)
        self._key = ranking_key(ctx, self.term_order)

    def reduce(self, expr):
        expr = sp.sympify(expr)
        if self.P and expr.free_symbols & self.P.keys():
            expr = expr.xreplace(self.P)
        return expr

    def _nonzero_at_reference(self, coeff) -> bool:
        if self.reference is None:
            return True
        try:
            return self.reference.value(coeff) != 0
        except (ZeroDivisionError, SingularityError):
            return False

    def add(self, residual) -> sp.Symbol | None:
        r = _clean(self.reduce(residual))
        if r == 0:
            return None
        cands = sorted(self.ctx.unknown_jets(r), key=self._key)
        if self.max_order is not None:
            cands = [c for c in cands if self.ctx.order(c) <= self.max_order]
        linear = []
        for c in cands:
            coeff = r.diff(c)
            if c in coeff.free_symbols:
                continue
            linear.append((c, coeff))
        chosen = None
        for c, coeff in linear:
            if self._nonzero_at_reference(coeff):
                chosen = (c, coeff)
                break
        if chosen is None:
            for c, coeff in linear:
                if not is_zero(coeff, self.rng):
                    chosen = (c, coeff)
                    break
        if chosen is None:
            if is_zero(r, self.rng):
                return None
            self.conditions.append(r)
            return None
        c, coeff = chosen
        rest = sp.expand(r - coeff * c)
        sol = sp.cancel(-rest / coeff)
        self._install(c, sol)
        return c

    def _install(self, c, sol):
        sub = {c: sol}
        for k, v in self.P.items():
            if c in v.free_symbols:
                self.P[k] = sp.cancel(v.xreplace(sub))
        self.conditions = [_clean(e.xreplace(sub)) if c in e.free_symbols else e
                           for e in self.conditions]
        self.conditions = [e for e in self.conditions if e != 0]
        self.P[c] = sol
        self.new.append(c)


def solve_cartan(ctx: JetContext, residuals: Iterable, term_order: ClassTermOrder | None = None,
                 principal: Mapping | None = None, reference: JetPoint | None = None):
    """Solve ``residuals = 0`` into reduced Cartan normal form.  Returns
    ``(principal_map, conditions)``."""
    solver = CartanSolver(ctx, term_order, principal, reference)
    items = list(residuals)
    items.sort(key=lambda e: max((ctx.order(s) for s in ctx.unknown_jets(e)), default=-1))
    for r in items:
        solver.add(r)
    return solver.P, solver.conditions


# systems ------------------------------------------------------------------------

@dataclass
class DifferentialSystem:
    """Equations ``principal jet = rhs`` with parametric right-hand sides.

    ``equations`` maps jet symbols of the context's unknown functions to
    sympy expressions.  ``conditions`` holds residuals that could not be
    solved for any unknown jet (integrability conditions or constraints on
    coefficients).
    """
    ctx: JetContext
    order: int
    equations: dict
    term_order: ClassTermOrder = field(default_factory=ClassTermOrder)
    regular_point: dict = field(default_factory=dict)
    conditions: list = field(default_factory=list)
    kind: str = "system"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.ctx.p

    @property
    def q(self) -> int:
        return len(self.ctx.unknown_names)

    def point(self, seed: int | None = None, identity: bool = False, overrides=None) -> JetPoint:
        ov = dict(self.regular_point)
        ov.update(overrides or {})
        return JetPoint(self.ctx, ov, self.seed if seed is None else seed, identity)

    def principal(self, order: int | None = None) -> list:
        eqs = self.equations
        if order is None:
            return list(eqs)
        return [s for s in eqs if self.ctx.order(s) == order]

    def parametric(self, order: int) -> list:
        return [s for s in self.ctx.all_unknown_jets(order) if s not in self.equations]

    def parametric_upto(self, order: int) -> list:
        out = []
        for k in range(order + 1):
            out.extend(self.parametric(k))
        return out

    def dimension(self, order: int) -> int:
        """Number of parametric jets of order <= ``order`` (``d^(n)``)."""
        return len(self.parametric_upto(order))

    def residual(self, lhs):
        return lhs - self.equations[lhs]

    def residuals(self, max_order: int | None = None):
        for s in self.equations:
            if max_order is None or self.ctx.order(s) <= max_order:
                yield self.residual(s)

    def reduce(self, expr):
        expr = sp.sympify(expr)
        if expr.free_symbols & self.equations.keys():
            expr = expr.xreplace(self.equations)
        return expr

    def with_equations(self, equations, order=None, conditions=None, **kw):
        out = DifferentialSystem(self.ctx, self.order if order is None else order, equations,
                                 self.term_order, dict(self.regular_point),
                                 list(self.conditions if conditions is None else conditions),
                                 self.kind, self.seed, dict(self.meta))
        for k, v in kw.items():
            setattr(out, k, v)
        return out

    def reference(self) -> JetPoint:
        return self.point(identity=True)

    # completion and prolongation ---------------------------------------------
    def complete(self) -> "DifferentialSystem":
        """Add the derivatives of lower-order equations up to the system's
        order."""
        solver = CartanSolver(self.ctx, self.term_order, self.equations, self.reference(),
                              max_order=self.order)
        changed = True
        done = set()
        while changed:
            changed = False
            for s in list(solver.P):
                m = self.ctx.order(s)
                if m >= self.order or s in done:
                    continue
                done.add(s)
                for i in range(1, self.p + 1):
                    if solver.add(self.ctx.D(s - solver.P[s], i)) is not None:
                        changed = True
        return self.with_equations(solver.P, conditions=self.conditions + solver.conditions)

    def prolong(self, multiplicative_only: bool = False) -> "DifferentialSystem":
        """Differentiate the top-order equations once in every direction.

        With ``multiplicative_only`` each equation is differentiated only in
        its Pommaret multiplicative directions (those ``<=`` the class of its
        leading jet); for an involutive system the result is the same."""
        n = self.order
        solver = CartanSolver(self.ctx, self.term_order, self.equations, self.reference())
        top = self.principal(n)
        jobs = []
        for s in top:
            cls = self.term_order.cls(self.ctx.coordinate(s))
            dirs = range(1, self.p + 1)
            if multiplicative_only:
                dirs = [i for i in dirs if self.term_order.rank(i) <= cls]
            for i in dirs:
                jobs.append((s, i))
        jobs.sort(key=lambda t: self.term_order.key(
            IndexedCoordinate(self.ctx.coordinate(t[0]).dep,
                              extend(self.ctx.coordinate(t[0]).index, t[1]))), reverse=True)
        for s, i in jobs:
            solver.add(self.ctx.D(s - self.equations[s], i))
        return self.with_equations(solver.P, order=n + 1,
                                   conditions=self.conditions + solver.conditions)

    def prolong_to(self, order: int) -> "DifferentialSystem":
        sys = self
        while sys.order < order:
            sys = sys.prolong()
        return sys

    # symbols ---------------------------------------------------------------
    def symbol(self, n: int | None = None, point: JetPoint | None = None,
               transform=None) -> "SymbolReport":
        return symbol(self, self.order if n is None else n, point, transform)

    # serialization ---------------------------------------------------------
    def to_json(self) -> dict:
        ctx = self.ctx
        eqs = []
        for s in sorted(self.equations, key=ranking_key(ctx, self.term_order)):
            eqs.append({"lhs": ctx.coordinate(s).to_json(), "rhs": str(self.equations[s])})
        return {
            "kind": self.kind,
            "p": self.p,
            "q": self.q,
            "order": self.order,
            "context": context_to_json(ctx),
            "equations": eqs,
            "conditions": [str(c) for c in self.conditions],
            "regular_point": {k.name if hasattr(k, "name") else str(k): format_fraction(v)
                              for k, v in self.regular_point.items()},
            "variable_permutation": list(self.term_order.variable_permutation or []),
        }

    @classmethod
    def from_json(cls, data: dict, ctx: JetContext | None = None) -> "DifferentialSystem":
        ctx = ctx or context_from_json(data["context"])
        eqs = {}
        for row in data["equations"]:
            lhs = row["lhs"]
            if isinstance(lhs, dict):
                sym = ctx.symbol_of(IndexedCoordinate.from_json(lhs))
            else:
                sym = ctx.parse_name(lhs)
            eqs[sym] = parse_expr(ctx, row["rhs"])
        perm = data.get("variable_permutation") or None
        return cls(ctx, int(data["order"]), eqs,
                   ClassTermOrder(tuple(perm) if perm else None),
                   dict(data.get("regular_point", {})),
                   [parse_expr(ctx, c) for c in data.get("conditions", [])],
                   data.get("kind", "system"))


def parse_expr(ctx: JetContext, rhs):
    """Parse a right-hand side given as a string or as a JSON tree
    ``{"op": "add"|"mul"|"div"|"pow"|"sqrt", "args": [...]}`` with leaves
    ``{"const": "n/d"}``, ``{"coord": {"dep", "index"}}`` or a name string."""
    if isinstance(rhs, (int, float)):
        return sp.sympify(rhs)
    if isinstance(rhs, str):
        return ctx.parse(rhs)
    if "const" in rhs:
        return sympy_rational(parse_fraction(rhs["const"]))
    if "coord" in rhs:
        return ctx.symbol_of(IndexedCoordinate.from_json(rhs["coord"]))
    if "name" in rhs:
        return ctx.parse_name(rhs["name"])
    args = [parse_expr(ctx, a) for a in rhs.get("args", [])]
    op = rhs["op"]
    if op == "add":
        return sp.Add(*args)
    if op == "mul":
        return sp.Mul(*args)
    if op == "div":
        return args[0] / args[1]
    if op == "pow":
        return args[0] ** args[1]
    if op == "sqrt":
        return sp.sqrt(args[0])
    raise ValueError(f"unknown expression node {op}")


def context_to_json(ctx: JetContext) -> dict:
    funcs = []
    for f in ctx.functions.values():
        row = {"name": f.name, "args": list(f.args), "unknown": f.unknown}
        if f.labels is not None:
            row["labels"] = list(f.labels)
        if f.identity is not None:
            row["identity"] = list(f.identity)
        funcs.append(row)
    return {"indep": list(ctx.indep_names), "functions": funcs,
            "params": [s.name for s in ctx.params]}


def context_from_json(data: dict) -> JetContext:
    funcs = []
    for row in data["functions"]:
        funcs.append(FunctionSpec(row["name"], tuple(row["args"]), row.get("unknown", True),
                                  tuple(row["labels"]) if row.get("labels") else None,
                                  tuple(row["identity"]) if row.get("identity") else None))
    return JetContext(data["indep"], funcs, data.get("params", ()))


# symbol --------------------------------------------------------------------------

@dataclass
class SymbolReport:
    order: int
    p: int
    q: int
    columns: list
    matrix: list
    echelon: list
    pivots: list
    indices: tuple
    characters: tuple
    rank: int

    @property
    def t(self) -> tuple:
        return tuple(count_class(self.p, self.q, self.order, k) for k in range(1, self.p + 1))

    @property
    def dim(self) -> int:
        return count_order(self.p, self.q, self.order) - self.rank

    @property
    def weighted_indices(self) -> int:
        return sum(k * b for k, b in enumerate(self.indices, start=1))

    @property
    def weighted_characters(self) -> int:
        return sum(k * a for k, a in enumerate(self.characters, start=1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "t", "beta", "alpha"])
        for k in range(self.p):
            w.writerow([k + 1, self.t[k], self.indices[k], self.characters[k]])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"order": self.order, "indices": list(self.indices),
                "characters": list(self.characters), "rank": self.rank, "dim": self.dim}


def rref(rows: Sequence[Sequence[Fraction]], ncols: int):
    """Exact reduced row echelon form; returns (echelon rows, pivot columns)."""
    if not rows or ncols == 0:
        return [], []
    dm = DomainMatrix([[QQ(int(Fraction(v).numerator), int(Fraction(v).denominator)) for v in r]
                       for r in rows], (len(rows), ncols), QQ)
    E, pivots = dm.rref()
    ech = []
    for r in E.to_Matrix().tolist()[:len(pivots)]:
        ech.append([Fraction(int(sp.Rational(v).p), int(sp.Rational(v).q)) for v in r])
    return ech, list(pivots)


def _top_terms(sys: DifferentialSystem, residual, m: int, point: JetPoint):
    ctx = sys.ctx
    out = []
    for s in residual.free_symbols:
        if ctx.is_unknown(s) and ctx.order(s) == m:
            c = point.value(residual.diff(s))
            if c != 0:
                out.append((ctx.coordinate(s), c))
    return out


def symbol_rows(sys: DifferentialSystem, n: int, point: JetPoint, include_conditions=True):
    """Symbol rows at order ``n`` as lists of ``(coordinate, value)``."""
    ctx = sys.ctx
    residuals = [(ctx.order(s), sys.residual(s)) for s in sys.equations]
    if include_conditions:
        for c in sys.conditions:
            js = ctx.unknown_jets(c)
            if js:
                residuals.append((max(ctx.order(s) for s in js), c))
    rows = []
    for m, res in residuals:
        if m > n:
            continue
        if m < n and _has_composite(ctx, res):
            # known functions of the unknowns contribute through the chain
            # rule, so shift the total derivatives instead of the residual
            for i in range(1, sys.p + 1):
                top = _top_terms(sys, ctx.D(res, i), m + 1, point)
                for K in multi_indices(sys.p, n - m - 1):
                    if K and K[0] < i:
                        continue
                    rows.append([(IndexedCoordinate(c.dep, extend(c.index, *K)), v)
                                 for c, v in top])
            continue
        top = _top_terms(sys, res, m, point)
        if not top:
            continue
        for K in multi_indices(sys.p, n - m):
            rows.append([(IndexedCoordinate(c.dep, extend(c.index, *K)), v) for c, v in top])
    return rows


def _has_composite(ctx, expr) -> bool:
    for s in sp.sympify(expr).free_symbols:
        key = ctx.info(s)
        if key is None or ctx.functions[key[0]].unknown:
            continue
        if any(a not in ctx.indep_names for a in ctx.functions[key[0]].args):
            return True
    return False


def _transform_rows(rows, p: int, B):
    """Rewrite symbol rows under the linear change ``d/dx^j = sum_i B[j][i]
    d/dy^i`` of independent variables."""
    eta = sp.symbols(f"eta1:{p + 1}")
    out = []
    for row in rows:
        by_dep: dict = {}
        for c, v in row:
            mono = sp.Integer(1)
            for j in c.index:
                mono *= sum(sympy_rational(B[j - 1][i]) * eta[i] for i in range(p))
            by_dep[c.dep] = by_dep.get(c.dep, 0) + sympy_rational(v) * mono
        new = []
        for dep, poly in by_dep.items():
            P = sp.Poly(sp.expand(poly), *eta)
            for exps, coeff in P.terms():
                K = tuple(i + 1 for i, e in enumerate(exps) for _ in range(e))
                new.append((IndexedCoordinate(dep, K), parse_fraction(coeff)))
        out.append(new)
    return out


def symbol(sys: DifferentialSystem, n: int, point: JetPoint | None = None,
           transform=None) -> SymbolReport:
    """Symbol matrix at order ``n`` with class-ordered columns.

    Rows are the top-order linear parts of the equations of order ``m <= n``
    multiplied by every order ``n - m`` shift, so for a system of order
    below ``n`` this is the symbol of its prolongation."""
    point = point or sys.point()
    p, q = sys.p, sys.q
    deps = range(1, q + 1)
    columns = sys.term_order.sort(IndexedCoordinate(d, J) for d in deps for J in multi_indices(p, n))
    col = {c: k for k, c in enumerate(columns)}
    raw = symbol_rows(sys, n, point)
    if transform is not None:
        raw = _transform_rows(raw, p, transform)
    matrix = []
    for row in raw:
        dense = [Fraction(0)] * len(columns)
        for c, v in row:
            dense[col[c]] += v
        matrix.append(dense)
    ech, pivots = rref(matrix, len(columns))
    beta = [0] * p
    for k in pivots:
        cls = sys.term_order.cls(columns[k])
        beta[cls - 1] += 1
    t = [count_class(p, q, n, k) for k in range(1, p + 1)]
    alpha = tuple(t[k] - beta[k] for k in range(p))
    return SymbolReport(n, p, q, columns, matrix, ech, pivots, tuple(beta), alpha, len(pivots))


# involutivity ------------------------------------------------------------------

@dataclass
class InvolutivityVerdict:
    order: int
    indices: tuple
    characters: tuple
    weighted_indices: int
    next_rank: int
    symbol_involutive: bool
    integrability_conditions: list
    weighted_characters: int = 0
    next_dim: int = 0

    @property
    def no_integrability(self) -> bool:
        return not self.integrability_conditions

    @property
    def involutive(self) -> bool:
        return self.symbol_involutive and self.no_integrability

    def text(self) -> str:
        return (f"indices {' '.join(map(str, self.indices))}; "
                f"characters {' '.join(map(str, self.characters))}; "
                f"involutive: {'yes' if self.involutive else 'no'}")

    def to_json(self) -> dict:
        return {"order": self.order, "indices": list(self.indices),
                "characters": list(self.characters),
                "weighted_indices": self.weighted_indices, "next_rank": self.next_rank,
                "weighted_characters": self.weighted_characters, "next_dim": self.next_dim,
                "symbol_involutive": self.symbol_involutive,
                "integrability_conditions": [str(c) for c in self.integrability_conditions],
                "involutive": self.involutive}


def project_check(next_sys: DifferentialSystem, sys: DifferentialSystem, seed: int = 0) -> list:
    """Equations of order <= ``sys.order`` implied by ``next_sys`` that do
    not follow from ``sys``."""
    rng = random.Random(seed)
    n = sys.order
    out = []
    candidates = [r for r in next_sys.residuals(n)]
    for c in next_sys.conditions:
        js = next_sys.ctx.unknown_jets(c)
        if all(next_sys.ctx.order(s) <= n for s in js):
            candidates.append(c)
    for r in candidates:
        red = _clean(sys.reduce(r))
        if red != 0 and not is_zero(red, rng):
            out.append(red)
    return out


def involutivity(sys: DifferentialSystem, next_system: DifferentialSystem | None = None,
                 point: JetPoint | None = None) -> InvolutivityVerdict:
    """Symbol test ``sum k beta_n^(k) = r_{n+1}`` plus absence of
    integrability conditions.

    ``next_system`` is the order ``n+1`` system to compare with; by default
    the prolongation.  Reduced systems pass the next reduction instead,
    since it may carry relations that prolongation alone does not see."""
    n = sys.order
    point = point or sys.point()
    rep = symbol(sys, n, point)
    nxt = next_system if next_system is not None else sys.prolong()
    next_rep = symbol(nxt, n + 1, point)
    conds = project_check(nxt, sys, sys.seed)
    return InvolutivityVerdict(n, rep.indices, rep.characters, rep.weighted_indices,
                               next_rep.rank, rep.weighted_indices == next_rep.rank, conds,
                               rep.weighted_characters, next_rep.dim)


@dataclass
class ProbeReport:
    original: int
    maximum: int
    trials: int
    best_transform: list | None

    @property
    def irregular(self) -> bool:
        return self.maximum > self.original

    def to_json(self) -> dict:
        return {"original": self.original, "maximum": self.maximum, "trials": self.trials,
                "irregular": self.irregular,
                "best_transform": None if self.best_transform is None else
                [[format_fraction(v) for v in row] for row in self.best_transform]}


def delta_regularity_probe(sys: DifferentialSystem, trials: int = 10, seed: int = 0,
                           n: int | None = None) -> ProbeReport:
    """Recompute ``sum k beta`` after random rational linear changes of the
    independent variables and flag the chart if some change increases it."""
    n = sys.order if n is None else n
    point = sys.point()
    base = symbol(sys, n, point).weighted_indices
    best, best_B = base, None
    p = sys.p
    if p == 1:
        return ProbeReport(base, base, 0, None)
    rng = random.Random(seed)
    for _ in range(trials):
        while True:
            B = [[Fraction(rng.randint(-3, 3)) for _ in range(p)] for _ in range(p)]
            if sp.Matrix(p, p, lambda a, b: sympy_rational(B[a][b])).det() != 0:
                break
        w = symbol(sys, n, point, transform=B).weighted_indices
        if w > best:
            best, best_B = w, B
    return ProbeReport(base, best, trials, best_B)


# first-order representation -------------------------------------------------------

def _derived_name(name: str, labels, J) -> str:
    if not J:
        return name
    return name + "D" + "".join(labels[j - 1] for j in J)


def first_order_reduction(sys: DifferentialSystem) -> DifferentialSystem:
    """Order-one system over the jets ``u^alpha_J`` with ``|J| < n``.

    An order-``n`` jet ``u_K`` is represented by ``d/dx^c u_{K-c}`` with
    ``c`` the class of ``K``; other representations are tied to it by
    cross-derivative equations."""
    n = sys.order
    ctx = sys.ctx
    if n <= 1:
        return sys
    p = ctx.p
    funcs = []
    renamed = {}
    new_of = {}
    for f in ctx.functions.values():
        if not f.unknown:
            continue
        labels = f.derivative_labels
        for k in range(n):
            for J in multi_indices(len(f.args), k):
                nm = _derived_name(f.name, labels, J)
                new_of[(f.name, J)] = nm
                ident = f.identity if not J else None
                if J and f.identity is not None and f.identity[0] == "coordinate":
                    ident = None
                funcs.append(FunctionSpec(nm, f.args, True, f.labels, ident if not J else None))
    for f in ctx.functions.values():
        if not f.unknown:
            funcs.append(f)
    nctx = JetContext(ctx.indep_names, funcs, [s.name for s in ctx.params])

    def image(sym):
        name, J = ctx.info(sym)
        if len(J) < n:
            return nctx.jet(new_of[(name, J)])
        c = index_class(J)
        rest = list(J)
        rest.remove(c)
        return nctx.jet(new_of[(name, tuple(rest))], (c,))

    seen = set(sys.equations)
    for v in sys.equations.values():
        seen |= sp.sympify(v).free_symbols
    for name in ctx.unknown_names:
        for k in range(n + 1):
            seen.update(ctx.jets_of_order(name, k))
    for s in seen:
        if ctx.is_unknown(s) and ctx.order(s) <= n:
            renamed[s] = image(s)

    def convert(expr):
        return sp.sympify(expr).xreplace(renamed)

    eqs = {}
    for f in ctx.functions.values():
        if not f.unknown:
            continue
        for k in range(n):
            for J in multi_indices(len(f.args), k):
                for i in range(1, p + 1):
                    lhs = nctx.jet(new_of[(f.name, J)], (i,))
                    K = extend(J, i)
                    orig = ctx.jet(f.name, K)
                    if k + 1 < n:
                        eqs[lhs] = nctx.jet(new_of[(f.name, K)])
                    elif orig in sys.equations:
                        eqs[lhs] = convert(sys.equations[orig])
                    else:
                        rep = image(orig)
                        if rep != lhs:
                            eqs[lhs] = rep
    # lower-order equations become order-zero relations
    for s, rhs in sys.equations.items():
        if ctx.order(s) < n:
            eqs[renamed[s]] = convert(rhs)
    solver = CartanSolver(nctx, sys.term_order)
    for lhs, rhs in eqs.items():
        solver.add(lhs - rhs)
    point = {}
    for k, v in sys.regular_point.items():
        sym = ctx.parse_name(k) if isinstance(k, str) else k
        point[renamed.get(sym, sym)] = v
    return DifferentialSystem(nctx, 1, solver.P, sys.term_order, point, solver.conditions,
                              sys.kind + "-first-order", sys.seed, dict(sys.meta))


@dataclass
class InitialDatum:
    function: str
    arguments: tuple
    kind: str  # "function" or "point"

    def text(self) -> str:
        if self.kind == "point":
            return f"{self.function}(0)"
        return f"{self.function}({', '.join(self.arguments)})"


@dataclass
class Schema:
    data: list
    function_counts: dict

    def to_json(self) -> dict:
        return {"data": [{"function": d.function, "arguments": list(d.arguments),
                          "kind": d.kind} for d in self.data],
                "function_counts": {str(k): v for k, v in self.function_counts.items()}}

    def text(self) -> str:
        return "; ".join(d.text() for d in self.data)


def initial_condition_schema(sys: DifferentialSystem, check: bool = True) -> Schema:
    """Formally well-posed initial data for an involutive system.

    Each dependent variable of the first-order representation is prescribed
    on the coordinate plane spanned by ``x^1 .. x^c`` where ``c`` is the
    highest class among its parametric first derivatives; with no parametric
    derivative only its value at the origin is free.  Variables fixed by
    order-zero equations are omitted."""
    fo = first_order_reduction(sys) if sys.order > 1 else sys
    if check:
        verdict = involutivity(fo)
        if not verdict.involutive:
            raise ValueError("initial data require an involutive system")
    ctx = fo.ctx
    data = []
    counts: dict = {}
    names = [fo.term_order.variable_permutation[r] if fo.term_order.variable_permutation
             else r + 1 for r in range(ctx.p)]
    for name in ctx.unknown_names:
        w = ctx.jet(name)
        if w in fo.equations:
            continue
        classes = [fo.term_order.cls(ctx.coordinate(s)) for s in ctx.jets_of_order(name, 1)
                   if s not in fo.equations]
        c = max(classes, default=0)
        args = tuple(ctx.indep_names[names[r] - 1] for r in range(c))
        data.append(InitialDatum(name, args, "function" if c else "point"))
        counts[c] = counts.get(c, 0) + 1
    return Schema(data, counts)


# convenience --------------------------------------------------------------------

def save_system(sys: DifferentialSystem, path) -> None:
    with open(path, "w") as fh:
        json.dump(sys.to_json(), fh, indent=2)


def load_system(path) -> DifferentialSystem:
    with open(path) as fh:
        return DifferentialSystem.from_json(json.load(fh))
