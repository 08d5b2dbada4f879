"""Registry of pseudo-group examples with their golden values.

Entries are JSON files in this directory (or in ``$IJETS_CATALOG_DIR``).
Each one stores hand-transcribed determining equations, a regular point,
cross-sections, closed-form low-order frames, a sampler for group elements
and a list of golden checks; :func:`run_all_goldens` recomputes every
golden value through the pipeline and diffs it.
"""
from __future__ import annotations

import json
import os
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping

import sympy as sp

from ..jetcalc import SectionJet
from ..multiindex import multi_indices_upto, to_exponents
from ..normalform import (CrossSection, FrameError, build_nf_system, compatibility_check,
                          freeness_order, linearize_nf, linearized_reduced_forms,
                          newton_frame, prolonged_annihilator, same_linear_system,
                          solve_frame, vertical_symbol, wellposed_check,
                          apply_group_element)
from ..reduction import (PseudoGroupSpec, identity_check, reduce, reduced_character_check,
                         reducibility_check)
from ..series import TruncatedSeries, is_exact, is_zero, parse_fraction
from ..system import (DifferentialSystem, delta_regularity_probe, identity_substitution,
                      involutivity, _clean)

CATALOG_ENV = "IJETS_CATALOG_DIR"


class UnknownEntry(KeyError):
    """No catalog file with the requested id."""


def catalog_dir() -> Path:
    override = os.environ.get(CATALOG_ENV)
    return Path(override) if override else Path(__file__).resolve().parent


def list_entries() -> list[str]:
    return sorted(p.stem for p in catalog_dir().glob("*.json"))


_LOADED: dict = {}


def load(entry_id: str) -> "CatalogEntry":
    key = (str(catalog_dir()), entry_id)
    hit = _LOADED.get(key)
    if hit is not None:
        return hit
    path = catalog_dir() / f"{entry_id}.json"
    if not path.is_file():
        raise UnknownEntry(f"unknown catalog entry {entry_id!r}; known: {', '.join(list_entries())}")
    with open(path) as fh:
        entry = CatalogEntry.from_json(json.load(fh))
    _LOADED[key] = entry
    return entry


# entries --------------------------------------------------------------------------

@dataclass
class Golden:
    kind: str
    quote: str
    params: dict
    expect: object
    note: str = ""
    published: object = None

    @classmethod
    def from_json(cls, data: dict) -> "Golden":
        params = {k: v for k, v in data.items()
                  if k not in ("kind", "quote", "expect", "note", "published")}
        return cls(data["kind"], data["quote"], params, data.get("expect"),
                   data.get("note", ""), data.get("published"))


@dataclass
class CatalogEntry:
    id: str
    title: str
    system: DifferentialSystem
    group: PseudoGroupSpec | None
    regularity: list
    regular_point: dict
    cross_sections: dict
    closed_forms: dict
    n_f: int | None
    n_star: int | None
    law: dict | None
    target: dict | None
    chain: dict | None
    goldens: list
    raw: dict = field(repr=False, default_factory=dict)
    _cache: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_json(cls, data: dict) -> "CatalogEntry":
        system = DifferentialSystem.from_json(data["system"])
        system.regular_point = dict(data["system"].get("regular_point", {}))
        group = None
        if data.get("p") is not None:
            group = PseudoGroupSpec(system, int(data["p"]))
        p = int(data["p"]) if data.get("p") is not None else system.p
        q = system.p - p if group else 0
        sections = {name: CrossSection.from_json(cs, p, q)
                    for name, cs in data.get("cross_sections", {}).items()}
        return cls(data["id"], data.get("title", ""), system, group,
                   list(data.get("regularity", [])), dict(data.get("section_point", {})),
                   sections, dict(data.get("closed_forms", {})), data.get("n_f"),
                   data.get("n_star"), data.get("group_law"), data.get("target"),
                   data.get("chain"), [Golden.from_json(g) for g in data.get("goldens", [])],
                   data)

    # pipeline stages (cached) -------------------------------------------------------
    @property
    def cross_section(self) -> CrossSection | None:
        return self.cross_sections.get("default")

    def prolonged(self, n: int) -> DifferentialSystem:
        key = ("G", n)
        if key not in self._cache:
            G = self.system.prolong_to(n) if n > self.system.order else self.system
            eqs = {s: v for s, v in G.equations.items() if G.ctx.order(s) <= n}
            conds = [c for c in G.conditions
                     if all(G.ctx.order(s) <= n for s in G.ctx.unknown_jets(c))]
            self._cache[key] = G.with_equations(eqs, order=n, conditions=conds)
        return self._cache[key]

    def reduced(self, n: int):
        best = self._cache.get("red")
        if best is None or best.up_to < n:
            best = reduce(self.group, self.regular_point, n, self.system.seed)
            self._cache["red"] = best
        return best

    def normal_form_system(self, n: int):
        best = self._cache.get("nf")
        if best is None or best.order < n:
            best = build_nf_system(self.reduced(n), n)
            self._cache["nf"] = best
        return best

    def linearized(self, n: int):
        best = self._cache.get("lin")
        if best is None or best[0] < n:
            best = (n, linearize_nf(self.normal_form_system(n)))
            self._cache["lin"] = best
        return best[1]

    def system_pair(self, which: str, n: int):
        """The order-``n`` system of the requested kind and the order
        ``n + 1`` system its involutivity is tested against."""
        if which in ("group", "system"):
            return self.prolonged(n), self.prolonged(n + 1)
        if which == "reduced":
            red = self.reduced(n + 1)
            return red.truncated(n), red.truncated(n + 1)
        if which == "nf":
            nf = self.normal_form_system(n + 1)
            return nf.truncated(n), nf.truncated(n + 1)
        raise ValueError(f"unknown system kind {which!r}")

    # regularity ---------------------------------------------------------------
    def is_regular(self, values: Mapping) -> bool:
        """Evaluate the regularity predicates (``expr > 0``, ``expr != 0``)
        on section jet values keyed by name."""
        if self.group is None:
            return True
        ctx = self.reduced(0).ctx
        env = {}
        for k, v in values.items():
            sym = ctx.parse_name(k) if isinstance(k, str) else k
            env[sym] = sp.Rational(*_ratio(v)) if is_exact(v) else sp.Float(v)
        for pred in self.regularity:
            for op in ("!=", ">=", "<=", ">", "<"):
                if op in pred:
                    lhs, rhs = pred.split(op)
                    break
            else:
                raise ValueError(f"bad predicate {pred!r}")
            val = (ctx.parse(lhs) - ctx.parse(rhs)).xreplace(env)
            if val.free_symbols:
                raise ValueError(f"predicate {pred!r} needs {sorted(map(str, val.free_symbols))}")
            ok = {"!=": val != 0, ">": val > 0, "<": val < 0, ">=": val >= 0, "<=": val <= 0}[op]
            if not ok:
                return False
        return True

    # targets ------------------------------------------------------------------
    def target_series(self, order: int, spec: Mapping | None = None) -> TruncatedSeries:
        spec = spec or self.target
        return target_series(spec, order)

    def target_jet(self, order: int, spec: Mapping | None = None) -> SectionJet:
        spec = spec or self.target
        s = target_series(spec, order)
        jets = {(1, J): s.jet(J) for J in multi_indices_upto(s.nvars, order)}
        return SectionJet(tuple(parse_fraction(b) for b in spec["base"]), jets, order)

    def target_values(self, target: SectionJet) -> dict:
        """Target jets keyed by section jet names (``u``, ``u_x``, ...)."""
        ctx = self.reduced(0).ctx
        fiber = self.group.fiber_names
        return {ctx.jet(fiber[a - 1], J).name: v for (a, J), v in target.jets.items()}

    # frames -------------------------------------------------------------------
    def frame(self, target: SectionJet, order: int, closed_forms: Mapping | None = None):
        return solve_frame(self.reduced(order), self.cross_section, target, order,
                           closed_forms or self.closed_forms, self.n_f)

    def chain_problem(self, override: Mapping | None = None, with_law: bool = True):
        """The entry's chain configuration as a :class:`ChainProblem`;
        returns ``(problem, order, closed_form or None)``."""
        from ..chains import ChainProblem
        if not self.chain:
            raise ValueError(f"catalog entry {self.id!r} has no chain configuration")
        cfg = dict(self.chain)
        cfg.update(override or {})
        order = cfg.get("order", 5)
        tspec = prob_target_spec(self, override)
        series = target_series(tspec, order + 1)
        base = tuple(parse_fraction(b) for b in tspec["base"])
        law = {}
        if with_law:
            law = {c: self.law["law"][u] for c, u in
                   zip(self.law["coordinates"], self.system.ctx.unknown_names)}
        prob = ChainProblem(self.id, series, base, self.cross_section, tuple(cfg["state"]),
                            cfg["rhs"], tuple(cfg["point"]), cfg["initial"],
                            cfg.get("span", 0.5), cfg.get("step", 1e-3),
                            tuple(tspec["labels"]), law, cfg.get("functions", {}),
                            tuple(self.law["coordinates"]))
        return prob, order, cfg.get("closed_form")

    # group elements -------------------------------------------------------------
    def sample_group_element(self, rng: random.Random, at: Mapping[str, Fraction],
                             degree: int) -> tuple[dict, dict]:
        """Random element of the pseudo-group: returns the law keyed by
        coordinate name (constants substituted) and the function Lambdas.
        ``at`` gives coordinate values used as expansion centres."""
        law = self.law
        coords = law["coordinates"]
        funcs = {}
        centre_syms = {c: sp.Symbol(c) for c in coords}
        for name, spec in law.get("functions", {}).items():
            if name in funcs:
                continue
            centre = [_to_sympy(sp.sympify(a, locals=centre_syms).xreplace(
                {centre_syms[c]: _to_sympy(at[c]) for c in coords if c in at}))
                for a in spec["args"]]
            if spec.get("pair"):
                f, g = random_harmonic_pair(rng, degree, centre)
                funcs[name], funcs[spec["pair"]] = f, g
            else:
                funcs[name] = random_polynomial(rng, degree, centre,
                                                [tuple(e) for e in spec.get("positive", [])])
        consts = {}
        for name in law.get("constants", []):
            consts[name] = sp.Rational(rng.choice([-1, 1]) * rng.randint(1, 4), rng.randint(1, 3))
        for name in law.get("positive_constants", []):
            consts[name] = sp.Rational(rng.randint(1, 4), rng.randint(1, 3))
        local = {c: sp.Symbol(c) for c in coords}
        local.update({f: sp.Function(f) for f in funcs})
        local.update(consts)
        images = {}
        unknowns = self.system.ctx.unknown_names
        for k, name in enumerate(unknowns):
            images[coords[k]] = str(sp.sympify(law["law"][name], locals=local))
        return images, funcs

    def group_element_jets(self, images: Mapping, funcs: Mapping, point: Mapping, order: int):
        """Jets ``Z^a_J`` of a sampled group element at ``point``."""
        ctx = self.system.ctx
        coords = self.law["coordinates"]
        syms = [sp.Symbol(c) for c in coords]
        local = {c: s for c, s in zip(coords, syms)}
        local.update({f: sp.Function(f) for f in funcs})
        sub = {s: _to_sympy(point[c]) for c, s in zip(coords, syms)}
        out = {}
        for k, name in enumerate(ctx.unknown_names):
            e = sp.sympify(images[coords[k]], locals=local)
            for f, lam in funcs.items():
                e = e.replace(sp.Function(f), lam)
            e = sp.expand(e.doit())
            for J in multi_indices_upto(len(coords), order):
                d = e
                for j in J:
                    d = sp.diff(d, syms[j - 1])
                out[ctx.jet(name, J)] = d.xreplace(sub)
        for s, c in zip(ctx.indep, coords):
            out[s] = sub[sp.Symbol(c)]
        return out


def _ratio(v) -> tuple[int, int]:
    v = Fraction(v)
    return v.numerator, v.denominator


def _to_sympy(v):
    if isinstance(v, Fraction):
        return sp.Rational(v.numerator, v.denominator)
    return sp.sympify(v)


def target_series(spec: Mapping, order: int) -> TruncatedSeries:
    """Taylor series of a polynomial target.

    ``spec`` holds ``labels``, ``base`` and ``polynomial``; with
    ``"local": true`` the polynomial is written in offsets from ``base``."""
    labels = spec["labels"]
    syms = [sp.Symbol(lab) for lab in labels]
    e = sp.expand(sp.sympify(spec["polynomial"], locals={s.name: s for s in syms}))
    if not spec.get("local"):
        base = [_to_sympy(parse_fraction(b)) for b in spec["base"]]
        e = sp.expand(e.xreplace({s: s + b for s, b in zip(syms, base)}))
    coeffs = {}
    for mon, c in sp.Poly(e, *syms).terms():
        if sum(mon) <= order:
            coeffs[tuple(mon)] = Fraction(int(sp.Rational(c).p), int(sp.Rational(c).q))
    return TruncatedSeries(len(syms), order, coeffs)


# random group elements ---------------------------------------------------------

def _coefficient(rng: random.Random, positive: bool = False) -> sp.Rational:
    if positive:
        return sp.Rational(rng.randint(1, 4), rng.randint(1, 3))
    return sp.Rational(rng.randint(-4, 4), rng.randint(1, 4))


def random_polynomial(rng: random.Random, degree: int, centre, positive=()):
    """``Lambda`` of a random polynomial in ``len(centre)`` variables,
    expanded about ``centre``; exponent tuples in ``positive`` get positive
    coefficients (e.g. ``f'(x0) > 0``)."""
    ts = sp.symbols(f"t0:{len(centre)}")
    poly = sp.Integer(0)
    for J in multi_indices_upto(len(centre), degree):
        e = to_exponents(J, len(centre))
        c = _coefficient(rng, e in positive)
        term = c
        for t, c0, k in zip(ts, centre, e):
            term *= (t - c0) ** k
        poly += term
    return sp.Lambda(ts, sp.expand(poly))


def random_harmonic_pair(rng: random.Random, degree: int, centre):
    """Real and imaginary parts of a random complex polynomial in
    ``x + i y``, so that ``f_x = g_y`` and ``f_y = -g_x``."""
    s, t = sp.symbols("t0 t1", real=True)
    z = (s - centre[0]) + sp.I * (t - centre[1])
    poly = sp.Integer(0)
    for k in range(degree + 1):
        poly += (_coefficient(rng) + sp.I * _coefficient(rng)) * z ** k
    re, im = sp.expand(poly).as_real_imag()
    return sp.Lambda((s, t), sp.expand(re)), sp.Lambda((s, t), sp.expand(im))


# golden checks -----------------------------------------------------------------

@dataclass
class GoldenResult:
    entry: str
    kind: str
    ok: bool
    got: object
    expected: object
    quote: str
    note: str = ""
    published: object = None
    seconds: float = 0.0
    error: str = ""

    def to_json(self) -> dict:
        out = {"entry": self.entry, "kind": self.kind, "ok": self.ok, "got": self.got,
               "expected": self.expected, "quote": self.quote,
               "seconds": round(self.seconds, 2)}
        if self.note:
            out["note"] = self.note
        if self.published is not None:
            out["published"] = self.published
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class GoldenReport:
    results: list

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.ok]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"checks": len(self.results), "failures": len(self.failures),
                "results": [r.to_json() for r in self.results]}

    def text(self) -> str:
        lines = []
        for r in self.results:
            mark = "ok  " if r.ok else "FAIL"
            extra = f"  [{r.note}]" if r.note and r.published is not None else ""
            lines.append(f"{mark} {r.entry:18s} {r.kind:22s}{extra}")
            if not r.ok:
                lines.append(f"     expected {r.expected!r}, got {r.got!r} {r.error}")
        lines.append(f"{len(self.results)} checks, {len(self.failures)} failures")
        return "\n".join(lines)


CHECKS: dict[str, Callable] = {}


def check(kind: str):
    def register(fn):
        CHECKS[kind] = fn
        return fn
    return register


def run_goldens(entry: CatalogEntry, kinds: Iterable[str] | None = None,
                seed: int = 0) -> list[GoldenResult]:
    kinds = set(kinds) if kinds else None
    out = []
    for g in entry.goldens:
        if kinds and g.kind not in kinds:
            continue
        t0 = time.perf_counter()
        try:
            got = CHECKS[g.kind](entry, g, seed)
            ok = _matches(got, g.expect)
            err = ""
        except Exception as exc:  # report, never abort the sweep
            got, ok, err = None, False, f"{type(exc).__name__}: {exc}"
        out.append(GoldenResult(entry.id, g.kind, ok, got, g.expect, g.quote, g.note,
                                g.published, time.perf_counter() - t0, err))
    return out


def run_all_goldens(ids: Iterable[str] | None = None, seed: int = 0,
                    kinds: Iterable[str] | None = None) -> GoldenReport:
    results = []
    for entry_id in (ids or list_entries()):
        results.extend(run_goldens(load(entry_id), kinds, seed))
    return GoldenReport(results)


def _matches(got, expect) -> bool:
    if isinstance(expect, dict):
        return isinstance(got, dict) and all(k in got and _matches(got[k], v)
                                             for k, v in expect.items())
    if isinstance(expect, list):
        return isinstance(got, list) and len(got) == len(expect) and \
            all(_matches(a, b) for a, b in zip(got, expect))
    return got == expect


@check("involutivity")
def _check_involutivity(entry, g, seed):
    n = g.params["order"]
    sys_n, nxt = entry.system_pair(g.params.get("system", "group"), n)
    v = involutivity(sys_n, nxt)
    return {"indices": list(v.indices), "characters": list(v.characters),
            "weighted_indices": v.weighted_indices, "next_rank": v.next_rank,
            "next_dim": v.next_dim, "weighted_characters": v.weighted_characters,
            "involutive": v.involutive}


@check("dimensions")
def _check_dimensions(entry, g, seed):
    orders = g.params["orders"]
    which = g.params.get("system", "group")
    top = max(orders)
    if which == "reduced":
        red = entry.reduced(top)
        return [red.dimension(n) for n in orders]
    if which == "nf":
        nf = entry.normal_form_system(top)
        return [nf.system.dimension(n) for n in orders]
    G = entry.prolonged(top)
    return [G.dimension(n) for n in orders]


@check("reducibility")
def _check_reducibility(entry, g, seed):
    orders = g.params["orders"]
    rep = reducibility_check(entry.group, entry.reduced(max(orders)), orders)
    return rep.to_json()


@check("reduced_characters")
def _check_reduced_characters(entry, g, seed):
    orders = g.params["orders"]
    red = entry.reduced(max(orders) + 1)
    return [reduced_character_check(entry.group, red, n) for n in orders]


@check("parametric")
def _check_parametric(entry, g, seed):
    n = g.params["order"]
    which = g.params.get("system", "reduced")
    if which == "reduced":
        syms = entry.reduced(n).parametric_upto(n)
    elif which == "nf":
        syms = entry.normal_form_system(n).system.parametric_upto(n)
    else:
        syms = entry.prolonged(n).parametric_upto(n)
    return sorted(s.name for s in syms)


def _system_for_equations(entry, which, n):
    if which == "reduced":
        return entry.reduced(n).truncated(n)
    if which == "nf":
        return entry.normal_form_system(n).truncated(n)
    if which == "linearized":
        lin = entry.linearized(n)
        sysl = lin.system
        eqs = {s: v for s, v in sysl.equations.items() if sysl.ctx.order(s) <= n}
        return sysl.with_equations(eqs, order=n)
    return entry.prolonged(n)


@check("equations")
def _check_equations(entry, g, seed):
    """Each listed equation follows from the computed system (random
    rational points) and the computed system has as many equations of
    order ``<= n`` as listed, so the two systems coincide."""
    n = g.params["order"]
    sys_n = _system_for_equations(entry, g.params.get("system", "reduced"), n)
    ctx = sys_n.ctx
    rng = random.Random(seed)
    failed = []
    for lhs, rhs in g.params["equations"].items():
        r = _clean(sys_n.reduce(ctx.parse(lhs) - ctx.parse(rhs)))
        if r != 0 and not is_zero(r, rng, points=5):
            failed.append(lhs)
    count = sum(1 for s in sys_n.equations if ctx.order(s) <= n) + \
        sum(1 for c in sys_n.conditions
            if all(ctx.order(s) <= n for s in ctx.unknown_jets(c)))
    return {"implied": not failed, "unmatched": failed, "count": count}


@check("identity")
def _check_identity(entry, g, seed):
    """Determining, reduced and normal-form equations vanish at the identity."""
    ctx = entry.system.ctx
    rng = random.Random(seed)
    bad = []
    G = entry.prolonged(g.params.get("order", entry.system.order))
    for r in list(G.residuals()) + list(G.conditions):
        val = _clean(sp.sympify(r).xreplace(identity_substitution(ctx, r.free_symbols)))
        if val != 0 and not is_zero(val, rng):
            bad.append(str(r))
    out = {"group": not bad}
    if entry.group is not None and g.params.get("reduced", True):
        n = g.params.get("reduced_order", 2)
        out["reduced"] = not identity_check(entry.reduced(n), seed)
        out["nf"] = not entry.normal_form_system(n).identity_defect(seed)
    return out


@check("group_law")
def _check_group_law(entry, g, seed):
    """Sampled group elements satisfy the determining equations at random
    rational points."""
    trials = g.params.get("trials", 3)
    order = g.params.get("order", entry.system.order)
    G = entry.prolonged(order)
    coords = entry.law["coordinates"]
    rng = random.Random(seed + 101)
    worst = []
    for _ in range(trials):
        point = {}
        for c in coords:
            point[c] = Fraction(rng.choice([-1, 1]) * rng.randint(1, 5), rng.randint(1, 4))
        images, funcs = entry.sample_group_element(rng, point, order + 3)
        env = entry.group_element_jets(images, funcs, point, order)
        for r in list(G.residuals()) + list(G.conditions):
            val = sp.simplify(sp.sympify(r).xreplace(env))
            if val != 0:
                worst.append(str(r))
    return {"vanish": not worst, "failed": sorted(set(worst))[:5]}


@check("wellposed")
def _check_wellposed(entry, g, seed):
    span = g.params.get("span", 5)
    cs = entry.cross_sections[g.params.get("cross_section", "default")]
    n_f = entry.n_f
    red = entry.reduced(n_f + span)
    dims = {n: red.dimension(n) for n in range(n_f, n_f + span + 1)}
    v = wellposed_check(cs, dims, n_f, span)
    return {"ok": v.ok, "minimal_order": v.minimal_order, "rees": v.rees.ok,
            "decomposition": v.decomposition()}


@check("probe")
def _check_probe(entry, g, seed):
    n = g.params["order"]
    sys_n, _ = entry.system_pair(g.params.get("system", "reduced"), n)
    rep = delta_regularity_probe(sys_n, g.params.get("trials", 10), seed)
    return {"original": rep.original, "maximum": rep.maximum, "irregular": rep.irregular}


def _linear_point(entry, lin, g):
    overrides = dict(g.params.get("overrides", entry.regular_point))
    ctx = lin.ctx
    out = {ctx.parse_name(k): parse_fraction(v) for k, v in overrides.items()}
    for name in g.params.get("vanish_derivatives_of", []):
        fname, J = ctx.info(ctx.parse_name(name))
        top = g.params.get("max_order", 8)
        for K in multi_indices_upto(ctx.p, top):
            if all(K.count(i) >= J.count(i) for i in set(J)):
                out[ctx.jet(fname, K)] = Fraction(0)
    return lin.point(out)


@check("vertical_symbols")
def _check_vertical_symbols(entry, g, seed):
    orders = g.params["orders"]
    lin = entry.linearized(max(orders))
    pt = _linear_point(entry, lin, g)
    out = {}
    for n in orders:
        psi = vertical_symbol(lin, n, pt)
        ups = prolonged_annihilator(lin, n, pt).Upsilon
        out[str(n)] = {"Psi": sorted(str(s) for s in psi.leaders()),
                       "Upsilon": sorted(str(s) for s in ups.leaders())}
    return out


@check("compatibility")
def _check_compatibility(entry, g, seed):
    orders = g.params["orders"]
    lin = entry.linearized(max(orders))
    pt = _linear_point(entry, lin, g)
    return {str(k): v for k, v in compatibility_check(lin, orders, pt).items()}


@check("freeness")
def _check_freeness(entry, g, seed):
    top = g.params.get("max_order", (entry.n_f or 1) + 1)
    lin = entry.linearized(top)
    return freeness_order(lin, _linear_point(entry, lin, g), top)


@check("linearization")
def _check_linearization(entry, g, seed):
    n = g.params["order"]
    lin = entry.linearized(n)
    return same_linear_system(lin.forms_upto(n), linearized_reduced_forms(entry.reduced(n), lin, n),
                              lin.ctx, seed)


def _value_of(entry, expr: str, values: Mapping):
    """Exact value when rational, float otherwise."""
    ctx = entry.reduced(0).ctx
    env = {ctx.parse_name(k): _to_sympy(v) for k, v in values.items()}
    val = sp.simplify(ctx.parse(expr).xreplace(env))
    if val.is_Rational:
        return Fraction(int(val.p), int(val.q))
    return float(val)


def _same_number(a, b, tol=1e-9) -> bool:
    if is_exact(a) and is_exact(b):
        return Fraction(a) == Fraction(b)
    return abs(float(a) - float(b)) <= tol * max(1.0, abs(float(b)))


def _slot(key: str) -> tuple:
    dep, _, idx = key.partition(";")
    return int(dep), tuple(int(j) for j in idx.split())


@check("frame")
def _check_frame(entry, g, seed):
    """Frame and normal form at the entry's target: frame values against
    formulas in the target jets, invariants against their closed forms,
    phantom slots against the cross-section."""
    n = g.params["order"]
    target = entry.target_jet(n + 1)
    sol, nfs = entry.frame(target, n)
    vals = entry.target_values(target)
    named = sol.named()
    out = {"exact": sol.exact, "lies_in_cross_section": nfs.lies_in(entry.cross_section)}
    for name, expr in g.params.get("frame", {}).items():
        out[f"frame {name}"] = _same_number(named[name], _value_of(entry, expr, vals))
    for name, value in g.params.get("frame_values", {}).items():
        out[f"value {name}"] = _same_number(named[name], parse_fraction(value))
    for key, expr in g.params.get("invariants", {}).items():
        got = nfs.values[_slot(key)]
        out[f"invariant {key}"] = _same_number(got, _value_of(entry, expr, vals))
    return out


@check("closed_form_deviation")
def _check_closed_form_deviation(entry, g, seed):
    """Published closed forms that fail to normalize the target."""
    n = g.params["order"]
    target = entry.target_jet(n + 1)
    forms = dict(entry.closed_forms)
    forms.update(g.params["published_forms"])
    try:
        entry.frame(target, n, forms)
    except FrameError:
        published_ok = False
    else:
        published_ok = True
    try:
        entry.frame(target, n)
        ours_ok = True
    except FrameError:
        ours_ok = False
    return {"published_normalizes": published_ok, "corrected_normalizes": ours_ok}


@check("newton")
def _check_newton(entry, g, seed):
    """Linear-algebra frame against damped Newton on all normalizations."""
    out = {}
    for n in g.params["orders"]:
        target = entry.target_jet(n + 1)
        _, nfs = entry.frame(target, n)
        vals, _ = newton_frame(entry.reduced(n), entry.cross_section, target, n)
        err = max(abs(float(nfs.values[k]) - v) for k, v in vals.items() if k in nfs.values)
        out[str(n)] = err <= g.params.get("tolerance", 1e-9)
    return out


@check("invariance")
def _check_invariance(entry, g, seed):
    """Invariants of group-transformed targets equal those of the target."""
    n = g.params["order"]
    trials = g.params.get("trials", 3)
    budget = g.params.get("seconds", 30.0)
    t0 = time.perf_counter()
    target = entry.target_jet(n + 1)
    _, nfs = entry.frame(target, n)
    ref = nfs.invariants()
    rng = random.Random(seed + 7)
    coords = entry.law["coordinates"]
    p = len(target.base)
    same = []
    for _ in range(trials):
        at = {c: b for c, b in zip(coords[:p], target.base)}
        for a, c in enumerate(coords[p:], start=1):
            at[c] = target.jets[(a, ())]
        images, funcs = entry.sample_group_element(rng, at, n + 3)
        moved = apply_group_element(images, funcs, target, coords, n + 1)
        if not entry.is_regular(entry.target_values(moved)):
            raise ValueError("sampled group element left the regular set")
        _, nfs2 = entry.frame(moved, n)
        same.append(all(_same_number(nfs2.values[k], v) for k, v in ref.items()))
    elapsed = time.perf_counter() - t0
    return {"unchanged": all(same), "trials": trials, "within_budget": elapsed < budget,
            "exact": all(is_exact(v) for v in ref.values())}


@check("chain")
def _check_chain(entry, g, seed):
    from ..chains import empirical_order, integrate_chain, revalidate
    prob, order, closed = entry.chain_problem(g.params.get("chain"), g.params.get("revalidate", False))
    traj = integrate_chain(prob)
    out = {}
    if closed:
        exact = closed_form_value(prob, closed)
        comp = prob.state[0]
        err = abs(traj.component(comp)[-1] - exact)
        out["closed_form"] = err < g.params.get("tolerance", 1e-8)
        out["rk4_order_ok"] = empirical_order(prob, exact, comp, prob.span, 0.05) >= 3.8
    if g.params.get("revalidate"):
        _, nfs = entry.frame(entry.target_jet(order + 1, prob_target_spec(entry, g.params.get("chain"))), order)
        rep = revalidate(prob, traj, nfs)
        out["revalidated"] = rep.ok(g.params.get("tolerance", 1e-6))
    return out


def prob_target_spec(entry, override: Mapping | None = None) -> dict:
    cfg = dict(entry.chain)
    cfg.update(override or {})
    tspec = dict(entry.target)
    tspec.update(cfg.get("target", {}))
    return tspec


def closed_form_value(prob, closed: str, x: float | None = None) -> float:
    """Closed-form chain component at ``x`` (default: end of the span);
    ``X0``, ``Y0``, ... are the target base coordinates."""
    env = {f"{lab}0": float(b) for lab, b in zip(prob.labels, prob.target_base)}
    env["x"] = prob.span if x is None else x
    return float(sp.sympify(closed).subs(env))


@check("symbol")
def _check_symbol(entry, g, seed):
    n = g.params["order"]
    sys_n, _ = entry.system_pair(g.params.get("system", "group"), n)
    rep = sys_n.symbol(n)
    return {"indices": list(rep.indices), "characters": list(rep.characters),
            "weighted_indices": rep.weighted_indices}


__all__ = ["CATALOG_ENV", "CatalogEntry", "Golden", "GoldenReport", "GoldenResult",
           "UnknownEntry", "catalog_dir", "list_entries", "load", "run_all_goldens",
           "run_goldens", "random_polynomial", "random_harmonic_pair", "target_series"]
