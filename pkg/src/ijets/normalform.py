"""Normal-form determining equations, their linearization at the identity,
vertical and prolonged-annihilator symbols, coordinate cross-sections and
the order-by-order moving-frame solver.

The normal form ``u(x)`` is the source section and the prescribed section
``Uh(X)`` the target; the reduced pseudo-group jets ``Xb`` relate them via
``Ub = Uh(Xb)``.
"""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import numpy as np
import sympy as sp

from .jetcalc import FunctionSpec, JetContext, SectionJet, prolong_action
from .multiindex import (IndexedCoordinate, ReesVerdict, canonical, multi_indices,
                         multi_indices_upto, to_exponents, verify_rees)
from .reduction import PseudoGroupSpec, ReducedSystem, reduce
from .series import (InexactRoot, TruncatedSeries, evaluate,
                     format_fraction, is_exact, is_zero, parse_fraction, revert)
from .system import (CartanSolver, DifferentialSystem, JetPoint, _clean, identity_value,
                     rref, symbol_rows)

PSI_NAMES = ("psi", "gamma", "chi", "omega")
XI_NAMES = ("xi", "eta", "zeta", "theta")


def hat_name(name: str) -> str:
    return name + "h"


# normal-form system -------------------------------------------------------------

def nf_context(group: PseudoGroupSpec) -> JetContext:
    base = group.base_names
    funcs = []
    for k, name in enumerate(group.horizontal, start=1):
        funcs.append(FunctionSpec(group.reduced_name(name), base, identity=("coordinate", k)))
    for name, u in zip(group.vertical, group.fiber_names):
        funcs.append(FunctionSpec(u, base, identity=("copy", hat_name(name))))
    hargs = tuple(group.reduced_name(h) for h in group.horizontal)
    for name in group.vertical:
        funcs.append(FunctionSpec(hat_name(name), hargs, unknown=False, labels=group.horizontal))
    return JetContext(base, funcs, [s.name for s in group.ctx.params])


@dataclass
class NormalFormSystem:
    """Normal-form determining equations over ``{Xb^i_J, u^alpha_J}`` with
    the target jets ``Uh^alpha_J`` as coefficients.  ``chain_rule`` records
    ``Ub^alpha_J -> D^J Uh^alpha`` (chain rule in the horizontal unknowns)."""
    system: DifferentialSystem
    reduced: ReducedSystem
    chain_rule: dict

    @property
    def ctx(self) -> JetContext:
        return self.system.ctx

    @property
    def group(self) -> PseudoGroupSpec:
        return self.reduced.group

    @property
    def order(self) -> int:
        return self.system.order

    def identity_defect(self, seed: int = 0) -> list:
        """Equations that fail at ``Xb = x, u = Uh``."""
        ctx = self.ctx
        rng = random.Random(seed)
        bad = []
        for r in list(self.system.residuals()) + list(self.system.conditions):
            sub = {s: identity_value(ctx, s) for s in r.free_symbols if ctx.is_unknown(s)}
            val = _clean(sp.sympify(r).xreplace(sub))
            if val != 0 and not is_zero(val, rng):
                bad.append(r)
        return bad

    def truncated(self, n: int) -> DifferentialSystem:
        ctx = self.ctx
        eqs = {s: v for s, v in self.system.equations.items() if ctx.order(s) <= n}
        conds = [c for c in self.system.conditions
                 if all(ctx.order(s) <= n for s in ctx.unknown_jets(c))]
        return self.system.with_equations(eqs, order=n, conditions=conds)


def build_nf_system(red: ReducedSystem, up_to: int | None = None) -> NormalFormSystem:
    """Substitute ``Ub^(n) = D^J Uh(Xb)`` into the reduced determining
    equations and re-solve in Cartan normal form, keeping horizontal jets
    principal wherever possible."""
    group = red.group
    n = red.up_to if up_to is None else up_to
    if n > red.up_to:
        raise ValueError(f"reduced system only available through order {red.up_to}")
    rctx = red.ctx
    ctx = nf_context(group)
    chain = {}
    for name in group.vertical:
        rb = group.reduced_name(name)
        cur = {(): ctx.jet(hat_name(name))}
        for J in multi_indices_upto(group.p, n):
            if J:
                cur[J] = sp.expand(ctx.D(cur[J[:-1]], J[-1]))
            chain[rctx.jet(rb, J)] = cur[J]
    rename = {}
    for name in group.horizontal:
        rb = group.reduced_name(name)
        for J in multi_indices_upto(group.p, n):
            rename[rctx.jet(rb, J)] = ctx.jet(rb, J)
    for u in group.fiber_names:
        for J in multi_indices_upto(group.p, n + 1):
            rename[rctx.jet(u, J)] = ctx.jet(u, J)
    sub = {**chain, **rename}
    horizontal_reduced = {group.reduced_name(h) for h in group.horizontal}

    items = []
    src = red.truncated(n)
    for lhs in src.equations:
        name = rctx.info(lhs)[0]
        r = sp.sympify(src.residual(lhs)).xreplace(sub)
        items.append((rctx.order(lhs), 0 if name in horizontal_reduced else 1, r))
    for c in src.conditions:
        js = rctx.unknown_jets(c)
        items.append((max((rctx.order(s) for s in js), default=0), 2,
                      sp.sympify(c).xreplace(sub)))
    items.sort(key=lambda t: (t[0], t[1]))
    ref = JetPoint(ctx, {}, red.system.seed, identity=True)
    solver = CartanSolver(ctx, red.system.term_order, reference=ref)
    for _, _, r in items:
        solver.add(r)
    point = {}
    for k, v in red.system.regular_point.items():
        nm = k if isinstance(k, str) else k.name
        for u, V in zip(group.fiber_names, group.vertical):
            if nm == u or nm.startswith(u + "_"):
                suffix = nm[len(u) + 1:]
                J = rctx._tokenize(u, suffix) if suffix else ()
                point[ctx.jet(hat_name(V), J).name] = v
    sysn = DifferentialSystem(ctx, n, solver.P, red.system.term_order, point,
                              solver.conditions, "normal-form", red.system.seed)
    return NormalFormSystem(sysn, red, chain)


# linearization ------------------------------------------------------------------

def linear_context(group: PseudoGroupSpec) -> JetContext:
    base = group.base_names
    funcs = []
    for k, _ in enumerate(group.vertical):
        funcs.append(FunctionSpec(PSI_NAMES[k], base))
    for k, _ in enumerate(group.horizontal):
        funcs.append(FunctionSpec(XI_NAMES[k], base))
    for u in group.fiber_names:
        funcs.append(FunctionSpec(u, base, unknown=False))
    return JetContext(base, funcs, [s.name for s in group.ctx.params])


@dataclass
class LinearizedSystem:
    """Linear equations in ``psi^alpha_J`` (variations of the normal form)
    and ``xi^i_J`` (variations of the horizontal reduced jets)."""
    ctx: JetContext
    forms: list
    system: DifferentialSystem
    p: int
    q: int

    def psi(self, alpha: int, J=()) -> sp.Symbol:
        return self.ctx.jet(PSI_NAMES[alpha - 1], J)

    def xi(self, i: int, J=()) -> sp.Symbol:
        return self.ctx.jet(XI_NAMES[i - 1], J)

    def is_psi(self, sym) -> bool:
        return self.ctx.info(sym)[0] in PSI_NAMES[:self.q]

    def forms_upto(self, n: int) -> list:
        return [f for f in self.forms
                if all(self.ctx.order(s) <= n for s in self.ctx.unknown_jets(f))]

    def point(self, overrides: Mapping | None = None, seed: int = 0) -> JetPoint:
        return JetPoint(self.ctx, overrides or {}, seed)


def _variation_map(group, nctx, lctx, n):
    delta = {}
    at_identity = {}
    for k, name in enumerate(group.horizontal):
        rb = group.reduced_name(name)
        for J in multi_indices_upto(group.p, n + 1):
            s = nctx.jet(rb, J)
            delta[s] = lctx.jet(XI_NAMES[k], J)
            at_identity[s] = identity_value(nctx, s)
    for k, (name, u) in enumerate(zip(group.vertical, group.fiber_names)):
        for J in multi_indices_upto(group.p, n + 1):
            delta[nctx.jet(u, J)] = lctx.jet(PSI_NAMES[k], J)
            at_identity[nctx.jet(hat_name(name), J)] = lctx.jet(u, J)
    return delta, at_identity


def linearize_expr(expr, nctx: JetContext, delta: Mapping, at_identity: Mapping):
    expr = sp.sympify(expr)
    total = sp.Integer(0)
    for s in expr.free_symbols:
        if nctx.is_unknown(s):
            c = expr.diff(s).xreplace(at_identity)
            total += sp.cancel(c) * delta[s]
    return sp.expand(total)


def linearize_nf(nf: NormalFormSystem) -> LinearizedSystem:
    """Linearization at ``Xb = x``, ``u^(n) = Uh^(n)``, with ``Uh`` renamed
    to ``u`` afterwards."""
    group = nf.group
    lctx = linear_context(group)
    delta, at_id = _variation_map(group, nf.ctx, lctx, nf.order)
    forms = []
    for r in list(nf.system.residuals()) + list(nf.system.conditions):
        f = linearize_expr(r, nf.ctx, delta, at_id)
        if f != 0:
            forms.append(f)
    solver = CartanSolver(lctx, nf.system.term_order)
    for f in sorted(forms, key=lambda e: max(lctx.order(s) for s in lctx.unknown_jets(e))):
        solver.add(f)
    sysl = DifferentialSystem(lctx, nf.order, solver.P, nf.system.term_order, {},
                              solver.conditions, "linearized", nf.system.seed)
    return LinearizedSystem(lctx, forms, sysl, group.p, group.q)


def linearized_reduced_forms(red: ReducedSystem, lin: LinearizedSystem, n: int) -> list:
    """Linearized reduced equations of order ``<= n`` after replacing each
    reduced vertical variation by the prolonged characteristic
    ``D^J(sum u_i xi^i) - sum u_{J,i} xi^i - psi_J``."""
    group = red.group
    rctx = red.ctx
    lctx = lin.ctx
    p = group.p
    delta, at_id = {}, {}
    for k, name in enumerate(group.horizontal):
        rb = group.reduced_name(name)
        for J in multi_indices_upto(p, n):
            s = rctx.jet(rb, J)
            delta[s] = lctx.jet(XI_NAMES[k], J)
            at_id[s] = identity_value(rctx, s)
    for k, (name, u) in enumerate(zip(group.vertical, group.fiber_names)):
        rb = group.reduced_name(name)
        char = sum(lctx.jet(u, (i,)) * lctx.jet(XI_NAMES[i - 1]) for i in range(1, p + 1))
        cur = {(): char}
        for J in multi_indices_upto(p, n):
            if J:
                cur[J] = sp.expand(lctx.D(cur[J[:-1]], J[-1]))
            phi = cur[J] - sum(lctx.jet(u, canonical(J + (i,)))
                               * lctx.jet(XI_NAMES[i - 1]) for i in range(1, p + 1))
            s = rctx.jet(rb, J)
            delta[s] = sp.expand(phi - lctx.jet(PSI_NAMES[k], J))
            at_id[s] = identity_value(rctx, s)
    out = []
    for r in list(red.truncated(n).residuals()) + list(red.truncated(n).conditions):
        r = sp.sympify(r)
        total = sp.Integer(0)
        for s in r.free_symbols:
            if rctx.is_unknown(s):
                total += sp.cancel(r.diff(s).xreplace(at_id)) * delta[s]
        total = sp.expand(total)
        if total != 0:
            out.append(total)
    return out


def same_linear_system(a: Sequence, b: Sequence, lctx: JetContext, seed: int = 0) -> bool:
    """Row-space equality of two lists of linear forms, checked at random
    rational points of the coefficient jets."""
    for trial in range(3):
        pt = JetPoint(lctx, {}, seed + trial)
        ra = _dense(_coefficient_rows(a, lctx, pt))
        rb = _dense(_coefficient_rows(b, lctx, pt))
        cols = sorted({c for r in ra + rb for c in r}, key=lambda s: s.name)
        A = [[r.get(c, 0) for c in cols] for r in ra]
        B = [[r.get(c, 0) for c in cols] for r in rb]
        ka = len(rref(A, len(cols))[1])
        kb = len(rref(B, len(cols))[1])
        kab = len(rref(A + B, len(cols))[1])
        if not (ka == kb == kab):
            return False
    return True


def _dense(rows):
    return [r for r in rows if r]


def _coefficient_rows(forms, lctx: JetContext, point: JetPoint) -> list:
    rows = []
    for f in forms:
        row = {}
        for s in lctx.unknown_jets(f):
            v = point.value(f.diff(s))
            if v != 0:
                row[s] = v
        rows.append(row)
    return rows


# pointwise linear spaces ---------------------------------------------------------

@dataclass
class LinearSpace:
    """Span of linear forms over the listed columns, kept in reduced row
    echelon form."""
    columns: list
    rows: list

    @property
    def rank(self) -> int:
        return len(self.rows)

    def same_as(self, other: "LinearSpace") -> bool:
        cols = list(dict.fromkeys(list(self.columns) + list(other.columns)))
        a = self._embed(cols)
        b = other._embed(cols)
        both = len(rref(a + b, len(cols))[1]) if (a or b) else 0
        return both == self.rank == other.rank

    def contains(self, other: "LinearSpace") -> bool:
        cols = list(dict.fromkeys(list(self.columns) + list(other.columns)))
        a = self._embed(cols)
        b = other._embed(cols)
        both = len(rref(a + b, len(cols))[1]) if (a or b) else 0
        return both == self.rank

    def _embed(self, cols):
        pos = {c: k for k, c in enumerate(self.columns)}
        return [[row[pos[c]] if c in pos else Fraction(0) for c in cols] for row in self.rows]

    def equations(self) -> list:
        out = []
        for row in self.rows:
            terms = [(c, v) for c, v in zip(self.columns, row) if v != 0]
            lead, rest = terms[0], terms[1:]
            rhs = " + ".join(f"{format_fraction(-v)}*{c}" for c, v in rest) or "0"
            out.append(f"{lead[0]} = {rhs}")
        return out

    def leaders(self) -> list:
        out = []
        for row in self.rows:
            for c, v in zip(self.columns, row):
                if v != 0:
                    out.append(c)
                    break
        return out


def _space(matrix, columns) -> LinearSpace:
    ech, _ = rref(matrix, len(columns)) if matrix else ([], [])
    return LinearSpace(list(columns), ech)


def vertical_symbol(lin: LinearizedSystem, n: int, point: JetPoint) -> LinearSpace:
    """``Psi^n``: equations of the order-``n`` symbol that only involve the
    order-``n`` variations ``psi^alpha_J``."""
    rows = symbol_rows(lin.system, n, point)
    q, p = lin.q, lin.p
    xi_cols = [IndexedCoordinate(q + i, J) for i in range(1, p + 1) for J in multi_indices(p, n)]
    psi_cols = lin.system.term_order.sort(IndexedCoordinate(a, J) for a in range(1, q + 1)
                                          for J in multi_indices(p, n))
    cols = xi_cols + psi_cols
    pos = {c: k for k, c in enumerate(cols)}
    dense = []
    for row in rows:
        d = [Fraction(0)] * len(cols)
        for c, v in row:
            d[pos[c]] += v
        dense.append(d)
    ech, piv = rref(dense, len(cols)) if dense else ([], [])
    k0 = len(xi_cols)
    kept = [r[k0:] for r, pc in zip(ech, piv) if pc >= k0]
    names = [lin.ctx.symbol_of(c) for c in psi_cols]
    return LinearSpace(names, kept)


@dataclass
class Annihilator:
    Z: LinearSpace
    Upsilon: LinearSpace


def prolonged_annihilator(lin: LinearizedSystem, n: int, point: JetPoint) -> Annihilator:
    """``Z^(n)``: consequences of the order-``n`` linearized system free of
    ``xi^i_J`` with ``|J| >= 1``; ``Upsilon^n`` is its order-``n`` part."""
    ctx = lin.ctx
    p, q = lin.p, lin.q
    forms = lin.forms_upto(n)
    key = lin.system.term_order
    xi_high = [lin.xi(i, J) for k in range(n, 0, -1) for i in range(1, p + 1)
               for J in multi_indices(p, k)]
    psi_top = [ctx.symbol_of(c) for c in key.sort(IndexedCoordinate(a, J)
                                                  for a in range(1, q + 1)
                                                  for J in multi_indices(p, n))]
    low = [lin.psi(a, J) for k in range(n - 1, -1, -1) for a in range(1, q + 1)
           for J in multi_indices(p, k)]
    low += [lin.xi(i) for i in range(1, p + 1)]
    cols = xi_high + psi_top + low
    pos = {c: k for k, c in enumerate(cols)}
    dense = []
    for row in _coefficient_rows(forms, ctx, point):
        d = [Fraction(0)] * len(cols)
        for s, v in row.items():
            d[pos[s]] = v
        dense.append(d)
    ech, piv = rref(dense, len(cols)) if dense else ([], [])
    k0 = len(xi_high)
    zrows = [r[k0:] for r, pc in zip(ech, piv) if pc >= k0]
    Z = _space(zrows, cols[k0:])
    top = [r[:len(psi_top)] for r in zrows]
    top = [r for r in top if any(v != 0 for v in r)]
    return Annihilator(Z, _space(top, psi_top))


def compatibility_check(lin: LinearizedSystem, orders, point: JetPoint) -> dict:
    """``{k: Psi^k == Upsilon^k}`` over ``orders``."""
    out = {}
    for k in orders:
        psi = vertical_symbol(lin, k, point)
        ups = prolonged_annihilator(lin, k, point).Upsilon
        out[k] = psi.same_as(ups)
    return out


def is_free_at(lin: LinearizedSystem, n: int, point: JetPoint) -> bool:
    """Trivial isotropy: with ``xi = 0`` and ``psi^(n) = 0`` the linearized
    system of order ``n`` forces every ``xi^i_J``, ``1 <= |J| <= n``, to 0."""
    ctx = lin.ctx
    cols = [lin.xi(i, J) for k in range(1, n + 1) for i in range(1, lin.p + 1)
            for J in multi_indices(lin.p, k)]
    pos = {c: k for k, c in enumerate(cols)}
    dense = []
    for row in _coefficient_rows(lin.forms_upto(n), ctx, point):
        d = [Fraction(0)] * len(cols)
        hit = False
        for s, v in row.items():
            if s in pos:
                d[pos[s]] = v
                hit = True
        if hit:
            dense.append(d)
    return len(rref(dense, len(cols))[1]) == len(cols) if dense else not cols


def freeness_order(lin: LinearizedSystem, point: JetPoint, max_order: int | None = None):
    top = lin.system.order if max_order is None else max_order
    for n in range(1, top + 1):
        if is_free_at(lin, n, point):
            return n
    return None


# cross-sections -------------------------------------------------------------------

def _match(pattern, exponents) -> bool:
    for pat, e in zip(pattern, exponents):
        if isinstance(pat, int):
            if e != pat:
                return False
        elif pat == "*":
            continue
        elif pat == "+":
            if e < 1:
                return False
        elif isinstance(pat, str) and pat.endswith("+"):
            if e < int(pat[:-1]):
                return False
        else:
            raise ValueError(f"bad exponent pattern {pat!r}")
    return True


@dataclass
class CrossSection:
    """Coordinate cross-section ``x^i = c^i``, ``u^alpha_J = c^alpha_J``.

    ``normalizations`` lists individual slots; ``families`` gives infinite
    slot sets as exponent patterns per dependent variable (an integer, ``"*"``
    for any exponent, ``"k+"`` for exponents ``>= k``) with a common value.
    Individual slots override families."""
    p: int
    q: int
    base: tuple
    normalizations: dict = field(default_factory=dict)
    families: list = field(default_factory=list)
    generators_hint: list = field(default_factory=list)

    def contains(self, c: IndexedCoordinate) -> bool:
        if c in self.normalizations:
            return True
        e = to_exponents(c.index, self.p)
        return any(dep == c.dep and _match(pat, e) for dep, pat, _ in self.families)

    def value(self, c: IndexedCoordinate) -> Fraction:
        if c in self.normalizations:
            return self.normalizations[c]
        e = to_exponents(c.index, self.p)
        for dep, pat, v in self.families:
            if dep == c.dep and _match(pat, e):
                return v
        raise KeyError(c)

    def slots(self, k: int) -> list:
        return [IndexedCoordinate(a, J) for a in range(1, self.q + 1)
                for J in multi_indices(self.p, k) if self.contains(IndexedCoordinate(a, J))]

    def slots_upto(self, n: int) -> list:
        return [c for k in range(n + 1) for c in self.slots(k)]

    def count(self, n: int) -> int:
        """Normalizations of order ``<= n``, the base point included."""
        return len(self.base) + len(self.slots_upto(n))

    def series(self, alpha: int, order: int) -> TruncatedSeries | None:
        jets = {c.index: self.value(c) for c in self.slots_upto(order) if c.dep == alpha}
        if not jets:
            return None
        return TruncatedSeries.from_jets(self.p, order, jets)

    def generators(self, order: int) -> list:
        if self.generators_hint:
            return list(self.generators_hint)
        return self.slots(order)

    def to_json(self) -> dict:
        return {
            "base": [format_fraction(b) for b in self.base],
            "normalizations": [{"dep": c.dep, "index": list(c.index),
                                "value": format_fraction(v)}
                               for c, v in sorted(self.normalizations.items())],
            "families": [{"dep": d, "pattern": list(pat), "value": format_fraction(v)}
                         for d, pat, v in self.families],
            "generators_hint": [c.to_json() for c in self.generators_hint],
        }

    @classmethod
    def from_json(cls, data: dict, p: int | None = None, q: int | None = None):
        base = data["base"]
        if isinstance(base, dict):
            base = [base[k] for k in sorted(base)]
        base = tuple(parse_fraction(b) for b in base)
        p = p or len(base)
        norms = {}
        for row in data.get("normalizations", []):
            norms[IndexedCoordinate(int(row["dep"]), tuple(row["index"]))] = \
                parse_fraction(row.get("value", 0))
        fams = [(int(f["dep"]), tuple(f["pattern"]), parse_fraction(f.get("value", 0)))
                for f in data.get("families", [])]
        deps = [c.dep for c in norms] + [d for d, _, _ in fams]
        q = q or max(deps, default=1)
        hint = [IndexedCoordinate.from_json(g) for g in data.get("generators_hint", [])]
        return cls(p, q, base, norms, fams, hint)


@dataclass
class WellPosedVerdict:
    ok: bool
    minimal_order: bool
    counts: dict
    rees: ReesVerdict
    generators: list
    singular_orders: list = field(default_factory=list)

    def decomposition(self) -> str:
        return " + ".join(f"C{to_exponents(g.index, self._p)}" for g in self.generators)

    def to_json(self) -> dict:
        return {"ok": self.ok, "minimal_order": self.minimal_order,
                "counts": {str(k): list(v) for k, v in self.counts.items()},
                "rees_ok": self.rees.ok,
                "uncovered": [c.to_json() for c in self.rees.uncovered],
                "overlapped": [c.to_json() for c in self.rees.overlapped],
                "spilled": [c.to_json() for c in self.rees.spilled],
                "generators": [c.to_json() for c in self.generators],
                "singular_orders": self.singular_orders}


def rees_check(cs: CrossSection, n_f: int, span: int = 5):
    gens = cs.generators(n_f + 1)
    verdict = verify_rees(gens, lambda c: cs.contains(c) and c.order > n_f,
                          (n_f + 1, n_f + 1 + span), cs.p, range(1, cs.q + 1))
    return verdict, gens


def wellposed_check(cs: CrossSection, dims: Mapping[int, int], n_f: int, span: int = 5,
                    frame_matrices: Mapping[int, object] | None = None) -> WellPosedVerdict:
    """Minimal order (normalization counts match ``dims[n]`` for ``n >= n_f``
    and, when supplied, every order-``n`` linear frame matrix is
    nonsingular) plus a Rees decomposition of the slots above ``n_f``."""
    counts = {n: (cs.count(n), d) for n, d in sorted(dims.items()) if n >= n_f}
    minimal = all(a == b for a, b in counts.values())
    singular = []
    for k, A in (frame_matrices or {}).items():
        m = sp.Matrix(A)
        if m.rows != m.cols or m.rank() < m.rows:
            singular.append(k)
    rees, gens = rees_check(cs, n_f, span)
    v = WellPosedVerdict(minimal and rees.ok and not singular, minimal and not singular,
                         counts, rees, gens, singular)
    v._p = cs.p
    return v


FLOAT_PRECISION = 128


# frame solver -----------------------------------------------------------------------

class FrameError(ArithmeticError):
    pass


@dataclass
class FrameSolution:
    values: dict
    target: SectionJet
    exact: bool
    matrices: dict = field(default_factory=dict)

    def named(self) -> dict:
        return {s.name: v for s, v in self.values.items()}


@dataclass
class NormalFormSeries:
    """Normal-form Taylor coefficients at the cross-section base point:
    ``kinds[(alpha, J)]`` is ``"phantom"`` on normalized slots and
    ``"invariant"`` elsewhere."""
    base: tuple
    order: int
    values: dict
    kinds: dict

    def invariants(self) -> dict:
        return {k: v for k, v in self.values.items() if self.kinds[k] == "invariant"}

    def series(self, alpha: int = 1) -> TruncatedSeries:
        jets = {J: v for (a, J), v in self.values.items() if a == alpha}
        return TruncatedSeries.from_jets(len(self.base), self.order, jets)

    def lies_in(self, cs: CrossSection) -> bool:
        for (a, J), v in self.values.items():
            c = IndexedCoordinate(a, J)
            if cs.contains(c) and v != cs.value(c):
                return False
        return True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dep", "index", "kind", "value"])
        for (a, J) in sorted(self.values, key=lambda t: (len(t[1]), t[0], t[1])):
            v = self.values[(a, J)]
            w.writerow([a, " ".join(map(str, J)), self.kinds[(a, J)], _fmt(v)])
        return buf.getvalue()

    def to_json(self) -> dict:
        q = max((a for a, _ in self.values), default=0)
        return {"base": [_fmt(b) for b in self.base], "order": self.order,
                "series": [_series_json(self.series(a)) for a in range(1, q + 1)],
                "coefficients": [{"dep": a, "index": list(J), "kind": self.kinds[(a, J)],
                                  "value": _fmt(v)}
                                 for (a, J), v in sorted(self.values.items(),
                                                         key=lambda t: (len(t[0][1]),
                                                                        t[0][0], t[0][1]))]}


def _fmt(v) -> str:
    if is_exact(v):
        return format_fraction(v)
    return mpmath.nstr(v, 20)


def _series_json(s: TruncatedSeries) -> dict:
    try:
        return s.to_json()
    except Exception:
        return {"order": s.order, "terms": [{"exponents": list(e), "coeff": _fmt(c)}
                                            for e, c in sorted(s.coeffs.items())]}


class FrameEngine:
    """Evaluates the prolonged action at given reduced pseudo-group jets by
    power-series composition: ``Uh = Ub o Xb^{-1}`` around the image of the
    base point."""

    def __init__(self, red: ReducedSystem, target: SectionJet, allow_float: bool = False):
        self.red = red
        self.group = red.group
        self.target = target
        self.allow_float = allow_float
        rctx = red.ctx
        env = {}
        for s, b in zip(rctx.indep, target.base):
            env[s] = b
        for (a, J), v in target.jets.items():
            env[rctx.jet(self.group.fiber_names[a - 1], J)] = v
        self.base_env = env

    def evaluate(self, expr, values: Mapping):
        env = dict(self.base_env)
        env.update(values)
        return evaluate(expr, env, allow_float=self.allow_float)

    def reduced_jets(self, values: Mapping, k: int) -> dict:
        red = self.red
        rctx = red.ctx
        P = red.system.equations
        env = dict(self.base_env)
        env.update(values)
        memo: dict = {}
        out = {}
        for name in self.group.group_names:
            rb = self.group.reduced_name(name)
            for J in multi_indices_upto(self.group.p, k):
                s = rctx.jet(rb, J)
                if s in values:
                    out[(name, J)] = values[s]
                elif s in P:
                    out[(name, J)] = evaluate(P[s], env, allow_float=self.allow_float,
                                              memo=memo)
                else:
                    raise FrameError(f"no value for parametric jet {s}")
        return out

    def action(self, values: Mapping, k: int):
        """Transformed base point and transformed jets ``{(alpha, J): v}``
        through order ``k``."""
        p = self.group.p
        jets = self.reduced_jets(values, k)
        ser = {}
        for name in self.group.group_names:
            ser[name] = TruncatedSeries.from_jets(
                p, k, {J: v for (nm, J), v in jets.items() if nm == name})
        base = tuple(ser[h].const() for h in self.group.horizontal)
        if k == 0:
            out = {(a, ()): ser[v].const() for a, v in enumerate(self.group.vertical, start=1)}
            return base, out
        maps = [ser[h] - c for h, c in zip(self.group.horizontal, base)]
        inv = revert(maps)
        out = {}
        for a, v in enumerate(self.group.vertical, start=1):
            t = ser[v].compose(inv)
            for J in multi_indices_upto(p, k):
                out[(a, J)] = t.jet(J)
        return base, out


def _solve_linear(A, b, exact: bool):
    if exact:
        M = sp.Matrix(A)
        if M.det() == 0:
            raise FrameError("singular linear frame matrix")
        sol = [sp.simplify(v) for v in M.LUsolve(sp.Matrix(b))]
        if not all(v.is_Rational for v in sol):
            raise InexactRoot("irrational frame value")
        return [Fraction(int(v.p), int(v.q)) for v in sol]
    M = mpmath.matrix([[_to_mpf(v) for v in r] for r in A])
    try:
        sol = mpmath.lu_solve(M, mpmath.matrix([_to_mpf(v) for v in b]))
    except ZeroDivisionError as exc:
        raise FrameError("singular linear frame matrix") from exc
    return [sol[i] for i in range(len(b))]


def _to_mpf(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpf(v)


def _to_sympy(v):
    return sp.Rational(v.numerator, v.denominator) if is_exact(v) else sp.Float(v, 30)


def solve_frame(red: ReducedSystem, cs: CrossSection, target: SectionJet, up_to: int,
                closed_forms: Mapping[str, str], n_f: int):
    """Moving frame through order ``up_to``.

    Parametric reduced jets of order ``<= n_f`` come from ``closed_forms``
    (expressions in the target jets written with the section names); each
    higher order is a square linear system for the new parametric jets.
    Falls back to float mode when a closed form hits an irrational root."""
    try:
        return _solve_frame(red, cs, target, up_to, closed_forms, n_f, False)
    except InexactRoot:
        with mpmath.workprec(FLOAT_PRECISION):
            return _solve_frame(red, cs, target, up_to, closed_forms, n_f, True)


def _solve_frame(red, cs, target, up_to, closed_forms, n_f, allow_float):
    if red.up_to < up_to:
        red = reduce(red.group, red.section, up_to, red.system.seed)
    rctx = red.ctx
    eng = FrameEngine(red, target, allow_float)
    values = {}
    low = red.system.parametric_upto(n_f)
    for s in low:
        if s.name not in closed_forms:
            raise FrameError(f"no closed form for parametric jet {s}")
        values[s] = eng.evaluate(rctx.parse(closed_forms[s.name]), values)
    exact = all(is_exact(v) for v in values.values())
    eng.allow_float = eng.allow_float or not exact
    _check_phantoms(eng, values, cs, min(n_f, up_to))
    matrices = {}
    for k in range(n_f + 1, up_to + 1):
        new = red.system.parametric(k)
        slots = cs.slots(k)
        if len(new) != len(slots):
            raise FrameError(f"order {k}: {len(new)} new parameters for {len(slots)} "
                             "normalizations")
        if not new:
            continue
        rows = [(c.dep, c.index) for c in slots]
        zero = dict(values)
        zero.update({s: Fraction(0) for s in new})
        _, b = eng.action(zero, k)
        A = [[None] * len(new) for _ in rows]
        for j, s in enumerate(new):
            trial = dict(zero)
            trial[s] = Fraction(1)
            _, col = eng.action(trial, k)
            for i, r in enumerate(rows):
                A[i][j] = col[r] - b[r]
        rhs = [cs.value(c) - b[r] for c, r in zip(slots, rows)]
        exact = exact and all(is_exact(v) for row in A for v in row)
        sol = _solve_linear(A, rhs, exact)
        values.update(dict(zip(new, sol)))
        matrices[k] = A
        _check_phantoms(eng, values, cs, k, only=k)
    base, jets = eng.action(values, up_to)
    kinds = {}
    for (a, J) in jets:
        kinds[(a, J)] = "phantom" if cs.contains(IndexedCoordinate(a, J)) else "invariant"
    nfs = NormalFormSeries(base, up_to, jets, kinds)
    return FrameSolution(values, target, exact, matrices), nfs


def _check_phantoms(eng: FrameEngine, values, cs: CrossSection, k: int, only=None, tol=1e-24):
    base, jets = eng.action(values, k)
    bad = []
    for b, c in zip(base, cs.base):
        if abs(b - c) > (0 if is_exact(b) else tol):
            bad.append(("base", b, c))
    for (a, J), v in jets.items():
        if only is not None and len(J) != only:
            continue
        c = IndexedCoordinate(a, J)
        if cs.contains(c):
            d = v - cs.value(c)
            if (d != 0) if is_exact(d) else abs(d) > tol:
                bad.append((c, v, cs.value(c)))
    if bad:
        raise FrameError(f"normalization residuals do not vanish: {bad[:3]}")


# brute-force oracle ---------------------------------------------------------------

def newton_frame(red: ReducedSystem, cs: CrossSection, target: SectionJet, up_to: int,
                 tol: float = 1e-13, max_iter: int = 60) -> dict:
    """Float frame from damped Newton iteration on all normalization
    equations through ``up_to`` at once, using the symbolic prolonged action
    (implicit total derivatives).  Started at the reduced identity.  Returns
    transformed jets ``{(alpha, J): float}``."""
    if red.up_to < up_to:
        red = reduce(red.group, red.section, up_to, red.system.seed)
    group = red.group
    rctx = red.ctx
    horiz = [group.reduced_name(h) for h in group.horizontal]
    vert = [group.reduced_name(v) for v in group.vertical]
    action = prolong_action(rctx, horiz, vert, up_to, red.system.equations,
                            simplify=lambda e: e)
    num = {s: sp.Float(float(v), 30) for s, v in FrameEngine(red, target).base_env.items()}
    params = red.system.parametric_upto(up_to)
    P = red.system.equations
    base_exprs = [(sp.sympify(rctx.jet(h)).xreplace(P)) for h in horiz]
    eqs = [e - c for e, c in zip(base_exprs, cs.base)]
    keys = []
    for c in cs.slots_upto(up_to):
        eqs.append(action[(c.dep, c.index)] - cs.value(c))
    for key in sorted(action, key=lambda t: (len(t[1]), t)):
        keys.append(key)
    eqs = [e.xreplace(num) for e in eqs]
    outs = [action[k].xreplace(num) for k in keys]
    F = sp.lambdify([params], eqs, "numpy", cse=True)
    G = sp.lambdify([params], outs, "numpy", cse=True)
    x = np.array([float(identity_value(rctx, s).xreplace(num)) if identity_value(rctx, s)
                  is not None else 0.0 for s in params])
    if len(eqs) != len(params):
        raise FrameError(f"{len(eqs)} normalization equations for {len(params)} unknowns")

    def resid(v):
        return np.array(F(v), dtype=float)

    r = resid(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            break
        J = np.empty((len(eqs), len(params)))
        for j in range(len(params)):
            h = 1e-7 * max(1.0, abs(x[j]))
            e = np.zeros(len(params))
            e[j] = h
            J[:, j] = (resid(x + e) - resid(x - e)) / (2 * h)
        step = np.linalg.solve(J, -r)
        lam = 1.0
        norm0 = np.linalg.norm(r)
        while lam > 1e-6:
            cand = x + lam * step
            try:
                rc = resid(cand)
            except (ZeroDivisionError, FloatingPointError):
                rc = None
            if rc is not None and np.all(np.isfinite(rc)) and np.linalg.norm(rc) < norm0:
                break
            lam /= 2
        x, r = cand, rc
    else:
        raise FrameError("Newton iteration did not converge")
    vals = G(x)
    return {k: float(v) for k, v in zip(keys, vals)}, dict(zip(params, x))


# group elements -------------------------------------------------------------------

def apply_group_element(law: Mapping[str, str], functions: Mapping[str, sp.Expr],
                        target: SectionJet, names: Sequence[str], order: int) -> SectionJet:
    """Image of the target section under one pseudo-group element.

    ``law`` maps each target coordinate name to an expression in the
    coordinate names ``names`` (base then fiber) and the arbitrary functions;
    ``functions`` binds every arbitrary function name to a sympy ``Lambda``."""
    p = len(target.base)
    q = len(names) - p
    syms = [sp.Symbol(n) for n in names]
    local = {n: s for n, s in zip(names, syms)}
    local.update({f: sp.Function(f) for f in functions})
    env = {}
    for i in range(p):
        env[syms[i]] = TruncatedSeries.variable(p, order, i, target.base[i])
    for a in range(q):
        env[syms[p + a]] = target.series(a + 1)
    images = []
    for n in names:
        e = sp.sympify(law[n], locals=local)
        for fname, lam in functions.items():
            e = e.replace(sp.Function(fname), lam)
        e = sp.expand(e.doit())
        images.append(evaluate(e, env, allow_float=False))
    horiz = images[:p]
    base = tuple(h.const() for h in horiz)
    inv = revert([h - c for h, c in zip(horiz, base)])
    out = [images[p + a].compose(inv) for a in range(q)]
    return SectionJet.from_series(base, out)


def random_polynomial_lambda(rng: random.Random, var: sp.Symbol, degree: int,
                             center, fixed: Mapping[int, Fraction] | None = None):
    """``Lambda`` of a polynomial in ``var - center`` with small random
    rational Taylor coefficients; ``fixed[k]`` pins the ``k``-th one."""
    t = sp.Symbol("t_")
    poly = sp.Integer(0)
    for k in range(degree + 1):
        if fixed and k in fixed:
            c = fixed[k]
        else:
            c = Fraction(rng.randint(-4, 4), rng.randint(1, 4))
        poly += sp.Rational(c.numerator, c.denominator) * (t - _to_sympy(Fraction(center))) ** k
    return sp.Lambda(t, sp.expand(poly))
