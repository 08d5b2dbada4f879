"""Batch command-line front end.

Exit status: 0 on success, 1 when the mathematics says no (a system that is
not involutive, an ill-posed cross-section, failing goldens), 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

from . import catalog
from .jetcalc import SectionJet
from .normalform import CrossSection, FrameError, wellposed_check
from .normalform import _fmt
from .series import SingularityError
from .system import delta_regularity_probe, involutivity

COMMANDS = ("involutivity", "reduce", "normal-form", "frame", "chain", "goldens", "probe-delta")


class InputError(Exception):
    """Bad or missing command input (exit status 2)."""


class MathematicalFailure(Exception):
    """The computation ran but the verdict is negative (exit status 1)."""


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ijets", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--catalog", metavar="ID", help="catalog entry id")
    src.add_argument("--spec", metavar="PATH",
                     help="JSON file: a catalog-style entry or a bare system")
    ap.add_argument("--order", type=int, help="order (truncation order for frames)")
    ap.add_argument("--system", choices=("group", "reduced", "nf"), default=None,
                    help="which system of a catalog entry to analyse")
    ap.add_argument("--target", metavar="PATH",
                    help="target section: polynomial spec or jet listing (JSON)")
    ap.add_argument("--cross-section", metavar="PATH", help="cross-section JSON")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--format", choices=("json", "csv", "text"),
                    help="default: from the --out suffix, else csv for normal-form and "
                         "text otherwise")
    ap.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    ap.add_argument("--growth", metavar="PATH",
                    help="normal-form: also write coefficient growth |u_J|^(1/|J|) as CSV")
    return ap


# inputs ---------------------------------------------------------------------------

def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _entry(args) -> catalog.CatalogEntry:
    if args.catalog:
        try:
            return catalog.load(args.catalog)
        except catalog.UnknownEntry as exc:
            raise InputError(str(exc.args[0])) from exc
    if args.spec:
        data = _read_json(args.spec)
        if "system" not in data:
            if "equations" not in data:
                raise InputError(f"{args.spec} holds neither an entry nor a system")
            data = {"system": data}
        data.setdefault("id", Path(args.spec).stem)
        try:
            return catalog.CatalogEntry.from_json(data)
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"malformed entry {args.spec}: {exc}") from exc
    raise InputError("one of --catalog or --spec is required")


def _need_order(args, default: int | None = None) -> int:
    n = args.order if args.order is not None else default
    if n is None:
        raise InputError("--order is required")
    if n < 0:
        raise InputError("--order must be non-negative")
    return n


def _group(entry):
    if entry.group is None:
        raise InputError(f"entry {entry.id!r} has no pseudo-group (no 'p')")
    return entry.group


def _target(args, entry, order: int) -> SectionJet:
    if args.target:
        data = _read_json(args.target)
        try:
            if "jets" in data:
                jet = SectionJet.from_json(data)
                if jet.order < order + 1:
                    raise InputError(f"target jets stop at order {jet.order}; need {order + 1}")
                return jet
            return entry.target_jet(order + 1, data)
        except (KeyError, ValueError) as exc:
            raise InputError(f"malformed target {args.target}: {exc}") from exc
    if not entry.target:
        raise InputError(f"entry {entry.id!r} has no default target; pass --target")
    return entry.target_jet(order + 1)


def _apply_cross_section(args, entry):
    """Copy of the entry with the default cross-section (and optional closed
    forms) replaced; the cached catalog entry stays untouched."""
    if not args.cross_section:
        return entry
    data = _read_json(args.cross_section)
    group = _group(entry)
    try:
        cs = CrossSection.from_json(data, group.p, group.q)
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed cross-section {args.cross_section}: {exc}") from exc
    return dataclasses.replace(
        entry, cross_sections={**entry.cross_sections, "default": cs},
        closed_forms=dict(data.get("closed_forms", entry.closed_forms)),
        n_f=int(data.get("n_f", entry.n_f)))


# output helpers --------------------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# commands --------------------------------------------------------------------------

def cmd_involutivity(args) -> int:
    entry = _entry(args)
    n = _need_order(args, entry.system.order)
    verdict = involutivity(*entry.system_pair(args.system or "group", n))
    if args.format == "json":
        _emit(args, _dump_json(verdict.to_json()))
    elif args.format == "csv":
        rows = [["class", "index", "character"]]
        rows += [[k, b, a] for k, (b, a) in
                 enumerate(zip(verdict.indices, verdict.characters), start=1)]
        _emit(args, _csv(rows))
    else:
        _emit(args, verdict.text() + "\n")
    return 0 if verdict.involutive else 1


def cmd_probe(args) -> int:
    entry = _entry(args)
    n = _need_order(args, entry.system.order)
    sys_n, _ = entry.system_pair(args.system or "group", n)
    rep = delta_regularity_probe(sys_n, 10, args.seed)
    out = {"original": rep.original, "maximum": rep.maximum, "irregular": rep.irregular}
    if args.format == "json":
        _emit(args, _dump_json(out))
    elif args.format == "csv":
        _emit(args, _csv([list(out), list(out.values())]))
    else:
        _emit(args, f"weighted indices {rep.original} (best found {rep.maximum}); "
                    f"delta-irregular: {'yes' if rep.irregular else 'no'}\n")
    return 0


def cmd_reduce(args) -> int:
    entry = _entry(args)
    _group(entry)
    n = _need_order(args)
    red = entry.reduced(n)
    sys_n = red.truncated(n)
    ctx = sys_n.ctx
    eqs = sorted(((str(s), str(v)) for s, v in sys_n.equations.items() if ctx.order(s) <= n),
                 key=lambda t: (ctx.order(ctx.parse_name(t[0])), t[0]))
    params = sorted((s.name for s in red.parametric_upto(n)),
                    key=lambda name: (ctx.order(ctx.parse_name(name)), name))
    dims = [red.dimension(k) for k in range(n + 1)]
    if args.format == "json":
        _emit(args, _dump_json({"entry": entry.id, "order": n, "dimensions": dims,
                                "parametric": params,
                                "equations": [{"lhs": a, "rhs": b} for a, b in eqs]}))
    elif args.format == "csv":
        _emit(args, _csv([["lhs", "rhs"], *eqs]))
    else:
        lines = [f"{a} = {b}" for a, b in eqs]
        lines.append("parametric: " + " ".join(params))
        lines.append("dimensions: " + " ".join(map(str, dims)))
        _emit(args, "\n".join(lines) + "\n")
    return 0


def _solve(args):
    entry = _entry(args)
    _group(entry)
    entry = _apply_cross_section(args, entry)
    if entry.cross_section is None:
        raise InputError(f"entry {entry.id!r} has no cross-section; pass --cross-section")
    n = _need_order(args)
    target = _target(args, entry, n)
    if not entry.is_regular(entry.target_values(target)):
        raise InputError("target jet is not regular: " + "; ".join(entry.regularity))
    span = 3
    red = entry.reduced(max(n, entry.n_f + span))
    dims = {k: red.dimension(k) for k in range(entry.n_f, entry.n_f + span + 1)}
    verdict = wellposed_check(entry.cross_section, dims, entry.n_f, span)
    if not verdict.ok:
        raise MathematicalFailure("cross-section is not well-posed: "
                                  + json.dumps(verdict.to_json(), default=str))
    try:
        sol, nfs = entry.frame(target, n)
    except FrameError as exc:
        raise MathematicalFailure(str(exc)) from exc
    return entry, n, sol, nfs


def growth_rows(nfs, top: int = 8) -> list:
    """Coefficient growth ``max_J |u^a_J|^(1/|J|)`` per order, computed from
    Taylor coefficients ``u_J / J!``."""
    rows = [["dep", "order", "max_abs_coefficient", "root"]]
    q = max(a for a, _ in nfs.values)
    for a in range(1, q + 1):
        s = nfs.series(a)
        for k in range(1, min(top, nfs.order) + 1):
            mags = [abs(float(c)) for e, c in s.coeffs.items() if sum(e) == k]
            m = max(mags, default=0.0)
            rows.append([a, k, repr(m), repr(m ** (1.0 / k)) if m else "0.0"])
    return rows


def cmd_normal_form(args) -> int:
    entry, n, sol, nfs = _solve(args)
    if args.format == "json":
        _emit(args, _dump_json(nfs.to_json()))
    elif args.format == "text":
        lines = [f"{a}; {' '.join(map(str, J)) or '-'}  {nfs.kinds[(a, J)]:9s} {_fmt(v)}"
                 for (a, J), v in sorted(nfs.values.items(),
                                         key=lambda t: (len(t[0][1]), t[0][0], t[0][1]))]
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, nfs.to_csv())
    if args.growth:
        Path(args.growth).write_text(_csv(growth_rows(nfs)))
    return 0


def cmd_frame(args) -> int:
    entry, n, sol, nfs = _solve(args)
    named = sol.named()
    ctx = entry.reduced(0).ctx
    keys = sorted(named, key=lambda k: (ctx.order(ctx.parse_name(k)), k))
    if args.format == "json":
        _emit(args, _dump_json({"entry": entry.id, "order": n, "exact": sol.exact,
                                "frame": {k: _fmt(named[k]) for k in keys}}))
    elif args.format == "csv":
        _emit(args, _csv([["jet", "value"], *[[k, _fmt(named[k])] for k in keys]]))
    else:
        _emit(args, "\n".join(f"{k} = {_fmt(named[k])}" for k in keys) + "\n")
    return 0


def cmd_chain(args) -> int:
    from .chains import ChainDomainError, integrate_chain, revalidate
    entry = _entry(args)
    override = {}
    if args.target:
        override["target"] = _read_json(args.target)
    if args.order is not None:
        override["order"] = _need_order(args)
    try:
        prob, order, closed = entry.chain_problem(override)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        traj = integrate_chain(prob)
    except ChainDomainError as exc:
        raise MathematicalFailure(str(exc)) from exc
    report = {"entry": entry.id, "steps": len(traj.xs) - 1, "span": prob.span,
              "final": {name: repr(float(v)) for name, v in zip(traj.names, traj.states[-1])}}
    ok = True
    if closed:
        exact = catalog.closed_form_value(prob, closed)
        err = abs(float(traj.component(prob.state[0])[-1]) - exact)
        report["closed_form_error"] = repr(err)
    if prob.functions and entry.cross_section is not None:
        tspec = catalog.prob_target_spec(entry, override)
        _, nfs = entry.frame(entry.target_jet(order + 1, tspec), order)
        rep = revalidate(prob, traj, nfs)
        report["revalidation"] = rep.to_json()
        ok = rep.ok(1e-6)
    if args.format == "csv":
        _emit(args, traj.to_csv())
    elif args.format == "json":
        _emit(args, _dump_json(report))
    else:
        lines = [f"{k}: {v}" for k, v in report.items() if k != "revalidation"]
        if "revalidation" in report:
            lines.append(f"revalidated: {'yes' if ok else 'no'}")
        _emit(args, "\n".join(lines) + "\n")
    return 0 if ok else 1


def cmd_goldens(args) -> int:
    ids = [args.catalog] if args.catalog else None
    if ids:
        _entry(args)
    report = catalog.run_all_goldens(ids, args.seed)
    if args.format == "json":
        _emit(args, _dump_json(report.to_json()))
    elif args.format == "csv":
        rows = [["entry", "kind", "ok", "quote"]]
        rows += [[r.entry, r.kind, "yes" if r.ok else "no", r.quote] for r in report.results]
        _emit(args, _csv(rows))
    else:
        _emit(args, report.text() + "\n")
    return 0 if report.ok else 1


HANDLERS = {"involutivity": cmd_involutivity, "reduce": cmd_reduce,
            "normal-form": cmd_normal_form, "frame": cmd_frame, "chain": cmd_chain,
            "goldens": cmd_goldens, "probe-delta": cmd_probe}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.format is None:
        suffix = Path(args.out).suffix.lstrip(".") if args.out else ""
        if suffix in ("json", "csv"):
            args.format = suffix
        else:
            args.format = "csv" if args.command == "normal-form" else "text"
    try:
        return HANDLERS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MathematicalFailure as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    except SingularityError as exc:
        print(f"failed: singular point: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
