"""Reduction of pseudo-group determining equations to a section.

The reduced jets ``Zb^a_J = D_x^J Z^a`` are computed on the lifted bundle,
with the determining equations substituted after every differentiation.
The parametric pseudo-group jets are then eliminated by triangular
solve-and-substitute; whatever cannot absorb a parameter is a reduced
determining equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .jetcalc import FunctionSpec, JetContext
from .multiindex import multi_indices, multi_indices_upto
from .system import (CartanSolver, DifferentialSystem, JetPoint, _clean, identity_substitution,
                     involutivity, is_zero)


class ManualReductionRequired(ArithmeticError):
    """Implicitization needs more than a linear or isolated-power pivot.

    ``residue`` holds the formulas that could not be processed; a reduced
    system can then be supplied by hand through the JSON format."""

    def __init__(self, message, residue):
        super().__init__(message)
        self.residue = residue


@dataclass
class PseudoGroupSpec:
    """Determining equations of a pseudo-group acting on ``p + q`` space.

    The first ``p`` functions of the context are the horizontal target
    coordinates, the remaining ``q`` the vertical ones; likewise for the
    independent variables."""
    system: DifferentialSystem
    p: int
    section_names: tuple = ()
    reduced_suffix: str = "b"

    @property
    def ctx(self) -> JetContext:
        return self.system.ctx

    @property
    def q(self) -> int:
        return self.system.p - self.p

    @property
    def base_names(self) -> tuple:
        return self.ctx.indep_names[:self.p]

    @property
    def fiber_names(self) -> tuple:
        return self.ctx.indep_names[self.p:]

    @property
    def group_names(self) -> tuple:
        return self.ctx.unknown_names

    @property
    def horizontal(self) -> tuple:
        return self.group_names[:self.p]

    @property
    def vertical(self) -> tuple:
        return self.group_names[self.p:]

    def reduced_name(self, name: str) -> str:
        return name + self.reduced_suffix

    def dimension(self, n: int) -> int:
        return self.system.prolong_to(n).dimension(n)

    def lifted_context(self) -> JetContext:
        base = self.base_names
        funcs = [FunctionSpec(u, base, unknown=False) for u in self.fiber_names]
        for f in self.ctx.functions.values():
            funcs.append(FunctionSpec(f.name, f.args, unknown=False, labels=f.labels))
        return JetContext(base, funcs, [s.name for s in self.ctx.params])

    def reduced_context(self) -> JetContext:
        base = self.base_names
        funcs = []
        for k, name in enumerate(self.horizontal, start=1):
            funcs.append(FunctionSpec(self.reduced_name(name), base, identity=("coordinate", k)))
        for name, u in zip(self.vertical, self.fiber_names):
            funcs.append(FunctionSpec(self.reduced_name(name), base, identity=("copy", u)))
        for u in self.fiber_names:
            funcs.append(FunctionSpec(u, base, unknown=False))
        return JetContext(base, funcs, [s.name for s in self.ctx.params])


@dataclass
class ReducedSystem:
    system: DifferentialSystem
    group: PseudoGroupSpec
    up_to: int
    formulas: dict
    solved: dict
    solved_order: dict
    relations: list
    section: dict = field(default_factory=dict)

    @property
    def ctx(self) -> JetContext:
        return self.system.ctx

    def dimension(self, n: int) -> int:
        return self.system.dimension(n)

    def parametric_upto(self, n: int) -> list:
        return self.system.parametric_upto(n)

    def truncated(self, n: int) -> DifferentialSystem:
        """The reduced system of order ``n`` (equations of order ``<= n``)."""
        eqs = {s: v for s, v in self.system.equations.items() if self.ctx.order(s) <= n}
        conds = [c for c in self.system.conditions
                 if all(self.ctx.order(s) <= n for s in self.ctx.unknown_jets(c))]
        return self.system.with_equations(eqs, order=n, conditions=conds)


def _vertical_count(ctx: JetContext, sym, p: int) -> int:
    return sum(1 for j in ctx.info(sym)[1] if j > p)


def _pick_parameter(expr, params: set, ctx: JetContext, p: int):
    best = None
    for s in expr.free_symbols & params:
        poly_deg = sp.degree(expr, s)
        coeff = sp.expand(expr).coeff(s, poly_deg)
        if coeff.free_symbols & {s}:
            continue
        rest = sp.expand(expr - coeff * s ** poly_deg)
        if rest.free_symbols & {s}:
            continue
        if poly_deg not in (1, 2):
            continue
        key = (-ctx.order(s), _vertical_count(ctx, s, p),
               0 if not (coeff.free_symbols & params) else 1, poly_deg, s.name)
        if best is None or key < best[0]:
            best = (key, s, coeff, rest, poly_deg)
    return best


def reduce(group: PseudoGroupSpec, section: dict | None = None, up_to: int = 2,
           seed: int = 0) -> ReducedSystem:
    """Reduced determining equations through order ``up_to``.

    ``section`` supplies the regular point (values of section jets) used
    for symbol ranks; the elimination itself is symbolic in the section."""
    G = group.system.prolong_to(up_to) if group.system.order < up_to else group.system
    P = G.equations
    gctx = G.ctx
    lifted = group.lifted_context()
    rctx = group.reduced_context()
    p = group.p

    params = set()
    for k in range(up_to + 1):
        params.update(G.parametric(k))

    formulas: dict = {}
    for name in group.group_names:
        top = lifted.jet(name)
        formulas[(name, ())] = sp.sympify(top).xreplace(P)
        for J in multi_indices_upto(p, up_to):
            if not J:
                continue
            parent = formulas[(name, J[:-1])]
            formulas[(name, J)] = sp.expand(lifted.D(parent, J[-1]).xreplace(P))

    solved: dict = {}
    solved_order: dict = {}
    relations = []
    order_of = {}
    for k in range(up_to + 1):
        for name in group.group_names:
            for J in multi_indices(p, k):
                rsym = rctx.jet(group.reduced_name(name), J)
                e = formulas[(name, J)]
                if solved and e.free_symbols & solved.keys():
                    e = e.xreplace(solved)
                e = _clean(sp.together(e - rsym))
                present = e.free_symbols & params
                if not present:
                    if e != 0:
                        relations.append(e)
                        order_of[len(relations) - 1] = k
                    continue
                pick = _pick_parameter(e, params - solved.keys(), gctx, p)
                if pick is None:
                    raise ManualReductionRequired(
                        f"no solvable parameter for reduced jet {rsym}", [e])
                _, s, coeff, rest, deg = pick
                sol = -rest / coeff
                sol = sp.cancel(sol) if deg == 1 else sp.sqrt(sp.cancel(sol))
                sub = {s: sol}
                for key in list(solved):
                    if s in solved[key].free_symbols:
                        solved[key] = sp.cancel(solved[key].xreplace(sub))
                solved[s] = sol
                solved_order[s] = k

    ref = JetPoint(rctx, section or {}, seed, identity=True)
    solver = CartanSolver(rctx, G.term_order, reference=ref)
    relations.sort(key=lambda e: max((rctx.order(s) for s in rctx.unknown_jets(e)), default=-1))
    for r in relations:
        solver.add(r)
    sysr = DifferentialSystem(rctx, up_to, solver.P, G.term_order, dict(section or {}),
                              solver.conditions, "reduced", seed)
    return ReducedSystem(sysr, group, up_to, formulas, solved, solved_order, relations,
                         dict(section or {}))


def identity_check(red: ReducedSystem, seed: int = 0) -> list:
    """Reduced equations that do not vanish at the reduced identity."""
    ctx = red.ctx
    bad = []
    import random
    rng = random.Random(seed)
    for r in list(red.system.residuals()) + list(red.system.conditions):
        sub = identity_substitution(ctx, r.free_symbols)
        val = _clean(sp.sympify(r).xreplace(sub))
        if val != 0 and not is_zero(val, rng):
            bad.append(r)
    return bad


@dataclass
class ReducibilityReport:
    orders: list
    d: list
    d_reduced: list
    order_of_reducibility: int | None

    @property
    def reducible(self) -> bool:
        return self.order_of_reducibility is not None

    def to_json(self) -> dict:
        return {"orders": self.orders, "d": self.d, "d_reduced": self.d_reduced,
                "order_of_reducibility": self.order_of_reducibility,
                "reducible": self.reducible}


def reducibility_check(group: PseudoGroupSpec, red: ReducedSystem, orders) -> ReducibilityReport:
    """Compare ``d^(n)`` with ``d-bar^(n)`` over ``orders``.  The order of
    reducibility is the first order from which they agree through the end
    of the range."""
    orders = list(orders)
    G = group.system.prolong_to(max(orders))
    d = [G.dimension(n) for n in orders]
    db = [red.dimension(n) for n in orders]
    first = None
    for k in range(len(orders) - 1, -1, -1):
        if d[k] != db[k]:
            break
        first = orders[k]
    return ReducibilityReport(orders, d, db, first)


def reduced_character_check(group: PseudoGroupSpec, red: ReducedSystem, n: int) -> bool:
    """Characters of the order-``n`` determining equations in classes
    ``1..p`` equal the reduced characters and vanish in the fiber classes."""
    G = group.system.prolong_to(n)
    G = G.with_equations({s: v for s, v in G.equations.items() if G.ctx.order(s) <= n}, order=n)
    a = G.symbol(n).characters
    ab = red.truncated(n).symbol(n).characters
    p = group.p
    return tuple(a[:p]) == tuple(ab) and all(v == 0 for v in a[p:])


def reduced_involutivity(group: PseudoGroupSpec, section: dict, n: int, seed: int = 0):
    """Involutivity verdict for the order-``n`` reduced system, compared
    against the order ``n + 1`` reduction."""
    red = reduce(group, section, n + 1, seed)
    return involutivity(red.truncated(n), red.truncated(n + 1)), red
