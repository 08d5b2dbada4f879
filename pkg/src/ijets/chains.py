"""Chain ODEs: the rectifying map restricted to the base line of a
cross-section, integrated with fixed-step RK4 and checked against the
normal form.

The chain map sends the line ``y = 0`` of the normal-form side onto a curve
of the target.  Its ODEs come from the normal-form determining equations
along the line, with the cross-section data ``c_j(x) = u_{y^j}(x, 0)``
entering as known functions.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy as sp

from .jetcalc import FunctionSpec, JetContext, SectionJet
from .multiindex import IndexedCoordinate, from_exponents, multi_indices_upto
from .normalform import CrossSection, NormalFormSeries
from .series import TruncatedSeries, evaluate


class ChainDomainError(ArithmeticError):
    """The integration left the domain where the right-hand side is defined.

    ``partial`` holds the trajectory computed before the failing step."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def _target_context(labels: Sequence[str]) -> JetContext:
    return JetContext(list(labels), [FunctionSpec("Uh", tuple(labels), unknown=False)])


@dataclass
class ChainProblem:
    """ODE system for a one-dimensional chain.

    ``rhs`` maps each state name to an expression in the state names, the
    line variable ``x``, target jets ``Uh``, ``Uh_X``, ... evaluated at the
    chain point ``point``, and the line functions ``c0, c1, ...`` (with
    ``c`` and ``d`` as aliases of ``c0`` and ``c1``).  ``initial`` expressions
    may use the same names with the state replaced by the base values
    ``X0, Y0, ...``.  ``law`` and ``functions`` describe the group element the
    chain determines; they are needed only by :func:`revalidate`."""
    entry: str
    target: TruncatedSeries
    target_base: tuple
    cross_section: CrossSection
    state: tuple
    rhs: dict
    point: tuple
    initial: dict
    span: float = 0.5
    step: float = 1e-3
    labels: tuple = ("X", "Y")
    law: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)
    coordinates: tuple = ("x", "y", "u")

    def __post_init__(self):
        self._tctx = _target_context(self.labels)
        self._x = sp.Symbol("x")
        self._state_syms = [sp.Symbol(s) for s in self.state]
        self._base_syms = [sp.Symbol(f"{lab}0") for lab in self.labels]
        self._line_syms = [sp.Symbol(f"c{j}") for j in range(4)]
        self._point = [self._parse(e) for e in self.point]
        self._rhs = [self._parse(self.rhs[s]) for s in self.state]
        jets = set()
        for e in self._rhs + [self._parse(v) for v in self.initial.values()]:
            jets |= {s for s in e.free_symbols if self._tctx.is_jet(s)}
        self._jets = sorted(jets, key=lambda s: (len(self._tctx.info(s)[1]), s.name))
        self._partials = {s: self._partial_series(self._tctx.info(s)[1]) for s in self._jets}
        args = [self._x] + self._state_syms + self._jets + self._line_syms
        self._rhs_fn = sp.lambdify(args, self._rhs, modules="math")
        self._point_fn = sp.lambdify([self._x] + self._state_syms + self._base_syms,
                                     self._point, modules="math")

    def _parse(self, text) -> sp.Expr:
        names = {n: sp.Symbol(n) for n in self.state}
        names.update({s.name: s for s in self._base_syms})
        names.update({"x": self._x, "sqrt": sp.sqrt})
        names.update({s.name: s for s in self._line_syms})
        names["c"], names["d"] = self._line_syms[0], self._line_syms[1]
        e = sp.sympify(text, locals=names)
        subs = {}
        for s in e.free_symbols:
            if s.name.startswith("Uh"):
                subs[s] = self._tctx.parse_name(s.name)
        return e.xreplace(subs)

    def _partial_series(self, J) -> TruncatedSeries:
        s = self.target
        for i in J:
            s = s.partial(i - 1)
        return s

    # target and line data -------------------------------------------------------
    def target_jet(self, J, point) -> float:
        local = [float(a) - float(b) for a, b in zip(point, self.target_base)]
        return float(self._partial_series(J).evaluate(local))

    def line_function(self, j: int, x: float, derivative: int = 0, terms: int = 40) -> float:
        """``d^m/dx^m u_{y^j}(x, 0)`` as fixed by the cross-section; 0 when the
        cross-section does not constrain the slot."""
        total = 0.0
        for k in range(terms):
            v = self._line_slot(j, k + derivative)
            if v is None:
                return math.nan if k == 0 else total
            if v:
                total += float(v) * x ** k / math.factorial(k)
        return total

    def _line_slot(self, j: int, k: int):
        cache = self.__dict__.setdefault("_slot_cache", {})
        if (j, k) not in cache:
            cache[(j, k)] = self._lookup_slot(j, k)
        return cache[(j, k)]

    def _lookup_slot(self, j: int, k: int):
        e = [0] * self.cross_section.p
        e[0], e[1] = k, j
        c = IndexedCoordinate(1, from_exponents(tuple(e)))
        if self.cross_section.contains(c):
            return self.cross_section.value(c)
        return None

    def constrained_lines(self, order: int) -> list:
        """Values ``j`` whose line ``u_{y^j}(x, 0)`` is fixed by the cross-section."""
        return [j for j in range(order + 1)
                if all(self._line_slot(j, k) is not None for k in range(order - j + 1))]

    def _line_values(self, x: float) -> list:
        out = []
        for j in range(len(self._line_syms)):
            v = self.line_function(j, x)
            out.append(0.0 if math.isnan(v) else v)
        return out

    # initial values ---------------------------------------------------------------
    def initial_state(self) -> np.ndarray:
        env = {b: Fraction(v) for b, v in zip(self._base_syms, self.target_base)}
        for s in self._jets:
            J = self._tctx.info(s)[1]
            env[s] = Fraction(self._partial_series(J).const())
        env[self._x] = Fraction(0)
        for j, sym in enumerate(self._line_syms):
            v = self.line_function(j, 0.0)
            env[sym] = Fraction(0) if math.isnan(v) else Fraction(v)
        out = []
        for name in self.state:
            out.append(float(evaluate(self._parse(self.initial[name]), env)))
        return np.array(out)

    def chain_point(self, x: float, state) -> tuple:
        return tuple(self._point_fn(x, *state, *map(float, self.target_base)))


def chain_rhs(prob: ChainProblem, state, x: float = 0.0) -> np.ndarray:
    """Right-hand sides of the first-order chain system at ``(x, state)``."""
    pt = prob.chain_point(x, state)
    jets = []
    local = [a - float(b) for a, b in zip(pt, prob.target_base)]
    for s in prob._jets:
        jets.append(float(prob._partials[s].evaluate(local)))
    try:
        vals = prob._rhs_fn(x, *state, *jets, *prob._line_values(x))
    except (ZeroDivisionError, ValueError) as exc:
        raise ChainDomainError(f"right-hand side undefined at x = {x}: {exc}") from exc
    out = np.array(vals, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ChainDomainError(f"right-hand side not finite at x = {x}")
    return out


@dataclass
class Trajectory:
    names: tuple
    xs: np.ndarray
    states: np.ndarray

    def at(self, x: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.xs - x)))
        return self.states[k]

    def component(self, name: str) -> np.ndarray:
        return self.states[:, self.names.index(name)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", *self.names])
        for x, row in zip(self.xs, self.states):
            w.writerow([repr(float(x)), *(repr(float(v)) for v in row)])
        return buf.getvalue()


def integrate_chain(prob: ChainProblem, step: float | None = None,
                    span: float | None = None) -> Trajectory:
    """Classical fixed-step RK4 from ``x = 0`` to ``span``."""
    h = prob.step if step is None else step
    span = prob.span if span is None else span
    n = max(1, int(round(abs(span) / h)))
    h = span / n
    y = prob.initial_state()
    xs = [0.0]
    states = [y.copy()]
    x = 0.0
    for i in range(n):
        try:
            k1 = chain_rhs(prob, y, x)
            k2 = chain_rhs(prob, y + 0.5 * h * k1, x + 0.5 * h)
            k3 = chain_rhs(prob, y + 0.5 * h * k2, x + 0.5 * h)
            k4 = chain_rhs(prob, y + h * k3, x + h)
        except ChainDomainError as exc:
            exc.partial = Trajectory(prob.state, np.array(xs), np.array(states))
            raise
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        x = (i + 1) * h
        xs.append(x)
        states.append(y.copy())
    return Trajectory(prob.state, np.array(xs), np.array(states))


def empirical_order(prob: ChainProblem, exact, component: str, span: float,
                    step: float) -> float:
    """Richardson estimate ``log2(e(h) / e(h/2))`` of the end-point error."""
    k = prob.state.index(component)
    e1 = abs(integrate_chain(prob, step, span).states[-1][k] - exact)
    e2 = abs(integrate_chain(prob, step / 2, span).states[-1][k] - exact)
    return math.log2(e1 / e2)


# revalidation -----------------------------------------------------------------------

def _local_taylor(prob: ChainProblem, x0: float, state0, order: int) -> list:
    """Taylor series in ``s = x - x0`` of the state components, by Picard
    iteration on series."""
    series = [TruncatedSeries.constant(1, order, float(v)) for v in state0]
    svar = TruncatedSeries.variable(1, order, 0, x0)
    exprs = prob._rhs
    lines = []
    for j in range(len(prob._line_syms)):
        coeffs = {}
        for m in range(order + 1):
            v = prob.line_function(j, x0, m)
            coeffs[(m,)] = 0.0 if math.isnan(v) else v / math.factorial(m)
        lines.append(TruncatedSeries(1, order, coeffs))
    for _ in range(order + 1):
        env = {prob._x: svar}
        env.update(zip(prob._state_syms, series))
        env.update(zip(prob._line_syms, lines))
        pt = [evaluate(e, env) for e in prob._point]
        local = [p - float(b) for p, b in zip(pt, prob.target_base)]
        for s in prob._jets:
            env[s] = prob._partials[s].evaluate(local)
        new = []
        for s0, e in zip(state0, exprs):
            d = evaluate(e, env)
            if not isinstance(d, TruncatedSeries):
                d = TruncatedSeries.constant(1, order, d)
            integ = {(k + 1,): float(c) / (k + 1) for (k,), c in d.coeffs.items()}
            integ[(0,)] = float(s0)
            new.append(TruncatedSeries(1, order, integ))
        series = new
    return series


def _embed(s: TruncatedSeries, nvars: int, order: int) -> TruncatedSeries:
    out = {}
    for (k,), c in s.coeffs.items():
        e = [0] * nvars
        e[0] = k
        out[tuple(e)] = c
    return TruncatedSeries(nvars, order, out)


def _derivative_1d(s: TruncatedSeries, m: int) -> TruncatedSeries:
    for _ in range(m):
        s = s.partial(0)
    return s


def _prepared_law(prob: ChainProblem):
    coords = [sp.Symbol(n) for n in prob.coordinates]
    local = {n: s for n, s in zip(prob.coordinates, coords)}
    funcs = {f: sp.Function(f) for f in prob.functions}
    local.update(funcs)
    images = []
    derivs = {}
    for name in prob.coordinates:
        e = sp.sympify(prob.law[name], locals=local)
        rep = {}
        for d in e.atoms(sp.Derivative):
            f = d.expr.func.__name__
            m = d.derivative_count
            rep[d] = derivs.setdefault((f, m), sp.Symbol(f"{f}__{m}"))
        e = e.xreplace(rep)
        for app in e.atoms(sp.core.function.AppliedUndef):
            f = app.func.__name__
            e = e.xreplace({app: derivs.setdefault((f, 0), sp.Symbol(f"{f}__0"))})
        images.append(e)
    return coords, images, derivs


@dataclass
class ChainReport:
    samples: list
    phantom_deviation: float
    invariant_deviation: float
    section_deviation: float
    details: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max(self.phantom_deviation, self.invariant_deviation)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_deviation < tol

    def to_json(self) -> dict:
        return {"samples": self.samples, "phantom_deviation": self.phantom_deviation,
                "invariant_deviation": self.invariant_deviation,
                "section_deviation": self.section_deviation,
                "max_deviation": self.max_deviation}


def recomposed_section(prob: ChainProblem, x0: float, state0, order: int) -> TruncatedSeries:
    """Normal-form side section around ``(x0, 0)``: the target pulled back by
    the group element whose functions the chain determines near ``x0``."""
    p = prob.cross_section.p
    local_order = order + 3
    states = _local_taylor(prob, x0, state0, local_order)
    env1 = {sp.Symbol(n): s for n, s in zip(prob.state, states)}
    env1.update({sp.Symbol(f"{lab}0"): float(b) for lab, b in zip(prob.labels, prob.target_base)})
    env1[prob._x] = TruncatedSeries.variable(1, local_order, 0, x0)
    coords, images, derivs = _prepared_law(prob)
    env = {}
    for i in range(p):
        env[coords[i]] = TruncatedSeries.variable(p, order, i, x0 if i == 0 else 0.0)
    for (f, m), sym in derivs.items():
        val = evaluate(sp.sympify(prob.functions[f], locals={k.name: k for k in env1}), env1)
        if isinstance(val, TruncatedSeries):
            env[sym] = _embed(_derivative_1d(val, m), p, order)
        else:
            env[sym] = float(val) if m == 0 else 0.0
    u = coords[p]
    horizontal, vertical = images[:p], images[p]
    dU = sp.diff(vertical, u)
    dX = [sp.diff(h, u) for h in horizontal]
    tjets = [prob._partial_series((i + 1,)) for i in range(p)]

    def residual(useries):
        e = dict(env)
        e[u] = useries
        X = [evaluate(h, e) for h in horizontal]
        local = [Xi - float(b) for Xi, b in zip(X, prob.target_base)]
        F = evaluate(vertical, e) - prob.target.evaluate(local)
        c0 = {k: (v.const() if isinstance(v, TruncatedSeries) else v) for k, v in e.items()}
        c0[u] = useries.const()
        lx = [float(x.const()) - float(b) for x, b in zip(X, prob.target_base)]
        slope = float(evaluate(dU, c0)) - sum(
            float(t.evaluate(lx)) * float(evaluate(d, c0)) for t, d in zip(tjets, dX))
        return F, slope

    guess = prob.line_function(0, x0)
    useries = TruncatedSeries.constant(p, order, 0.0 if math.isnan(guess) else guess)
    for _ in range(order + 4):
        F, slope = residual(useries)
        useries = useries - F * (1.0 / slope)
    return useries


def revalidate(prob: ChainProblem, traj: Trajectory, nf: NormalFormSeries,
               samples: int = 6, order: int | None = None) -> ChainReport:
    """Rebuild the normal-form side section along the chain and compare it
    with the cross-section constants and the normal-form invariants.

    Off the base point only the line slots ``u_{x^k y^j}`` fixed by the
    cross-section are compared; at the base point every slot is."""
    order = nf.order if order is None else order
    idx = np.linspace(0, len(traj.xs) - 1, samples).round().astype(int)
    lines = prob.constrained_lines(order)
    phantom = inv = section = 0.0
    details = []
    for k in sorted(set(idx.tolist())):
        x0 = float(traj.xs[k])
        state0 = traj.states[k]
        u = recomposed_section(prob, x0, state0, order)
        worst = 0.0
        for j in lines:
            for m in range(order - j + 1):
                e = [0] * prob.cross_section.p
                e[0], e[1] = m, j
                got = float(u.jet(from_exponents(tuple(e))))
                want = prob.line_function(j, x0, m)
                worst = max(worst, abs(got - want))
        phantom = max(phantom, worst)
        pt = prob.chain_point(x0, state0)
        line_u = prob.line_function(0, x0)
        section = max(section, abs(prob.target_jet((), pt)
                                   - _image_value(prob, x0, state0, line_u)))
        if k == 0:
            for (a, J), v in nf.values.items():
                if len(J) > order:
                    continue
                d = abs(float(u.jet(J)) - float(v))
                if nf.kinds[(a, J)] == "phantom":
                    phantom = max(phantom, d)
                else:
                    inv = max(inv, d)
        details.append({"x": x0, "phantom": worst})
    return ChainReport([d["x"] for d in details], phantom, inv, section, details)


def _image_value(prob: ChainProblem, x0: float, state0, u0: float) -> float:
    """``U`` of the chain's group element at ``(x0, 0, u0)``."""
    states = _local_taylor(prob, x0, state0, 3)
    env1 = {sp.Symbol(n): s for n, s in zip(prob.state, states)}
    env1.update({sp.Symbol(f"{lab}0"): float(b) for lab, b in zip(prob.labels, prob.target_base)})
    env1[prob._x] = TruncatedSeries.variable(1, 3, 0, x0)
    coords, images, derivs = _prepared_law(prob)
    env = {coords[0]: x0}
    for i in range(1, len(coords) - 1):
        env[coords[i]] = 0.0
    env[coords[-1]] = u0
    for (f, m), sym in derivs.items():
        val = evaluate(sp.sympify(prob.functions[f], locals={k.name: k for k in env1}), env1)
        if isinstance(val, TruncatedSeries):
            env[sym] = float(_derivative_1d(val, m).const())
        else:
            env[sym] = float(val) if m == 0 else 0.0
    return float(evaluate(images[-1], env))


def polynomial_target(expr: str, labels: Sequence[str], base: Sequence, order: int) -> TruncatedSeries:
    """Taylor series at ``base`` of a polynomial target ``U(X, Y, ...)``."""
    syms = [sp.Symbol(lab) for lab in labels]
    e = sp.expand(sp.sympify(expr, locals={s.name: s for s in syms}))
    shifted = sp.expand(e.subs({s: s + sp.Rational(Fraction(b).numerator, Fraction(b).denominator)
                                for s, b in zip(syms, base)}, simultaneous=True))
    poly = sp.Poly(shifted, *syms)
    coeffs = {}
    for mon, c in poly.terms():
        coeffs[tuple(mon)] = Fraction(int(sp.Rational(c).p), int(sp.Rational(c).q))
    return TruncatedSeries(len(syms), order, coeffs)


def target_section_jet(series: TruncatedSeries, base: Sequence):
    jets = {(1, J): Fraction(series.jet(J)) for J in multi_indices_upto(series.nvars, series.order)}
    return SectionJet(tuple(Fraction(b) for b in base), jets, series.order)


__all__ = ["ChainProblem", "ChainDomainError", "ChainReport", "Trajectory", "chain_rhs",
           "integrate_chain", "empirical_order", "revalidate", "recomposed_section",
           "polynomial_target", "target_section_jet"]
