"""Command-line interface: ``lwfs <command> ...``.

Exit codes: 0 success, 1 domain error (the error class name is printed), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Any, Optional, Sequence

from . import library
from .compiler import compile_circuit, dump
from .epistemic import (
    CERTAIN,
    AssumptionSet,
    KnowledgeBase,
    QuantumModel,
    Statement,
    _pairs,
    _stripped,
    chain,
    check_setting_independence,
    check_single_outcome,
    conclusion,
    derive_statement,
    paradox_scan,
    render_scan,
    render_statement,
    trace,
    violation_label,
)
from .errors import ChainError, LWFSError, ValidationFailed
from .formats import (
    format_fraction,
    format_value,
    match_fraction,
    parse_assignment_text,
    parse_document,
    parse_settings_text,
    parse_statements,
)
from .predict import SettingPrior, as_assignment, prediction_with_prior, setting_conditioned
from .scenario import LWFSpec, expand_settings, format_assignment, format_settings

DEFAULT_TOLERANCE = 1e-9


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output

class Out:
    """Collects a report as ordered fields; renders as text or JSON."""

    def __init__(self, as_json: bool):
        self.as_json = as_json
        self.data: dict[str, Any] = {}
        self.text: list[str] = []

    def field(self, key: str, value: Any, text: Optional[str] = None) -> None:
        self.data[key] = value
        self.text.append(f"{key}: {value if text is None else text}")

    def line(self, s: str = "") -> None:
        self.text.append(s)

    def emit(self, stream) -> None:
        if self.as_json:
            stream.write(json.dumps(self.data, indent=2, ensure_ascii=False) + "\n")
        else:
            stream.write("\n".join(self.text).rstrip("\n") + "\n")


def _value_fields(out: Out, value: float, tol: float) -> None:
    out.field("value", float(value), format_value(value))
    frac = format_fraction(match_fraction(value, tol))
    if frac is not None:
        out.field("fraction", frac)
    else:
        out.data["fraction"] = None


# ---------------------------------------------------------------- inputs

def load_scenario(source: str) -> tuple[LWFSpec, Optional[library.CanonicalScenario], tuple]:
    """A library name or a path to a JSON scenario document."""
    if source in library.LIBRARY and not os.path.exists(source):
        canon = library.load(source)
        return canon.spec, canon, ()
    text = _read(source)
    doc = parse_document(text)
    return doc.spec, None, doc.queries


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _assignment_arg(text: Optional[str], flag: str) -> dict[str, str]:
    if text is None:
        return {}
    try:
        return parse_assignment_text(text)
    except ValueError as e:
        raise UsageError(f"{flag}: {e}") from None


def _settings_arg(spec: LWFSpec, text: str) -> tuple[int, ...]:
    try:
        values = parse_settings_text(text)
    except ValueError as e:
        raise UsageError(f"--settings: {e}") from None
    return expand_settings(spec, values)


def parse_prior(spec: LWFSpec, text: str) -> SettingPrior:
    """``{"p_one": {name: P(x=1)}}`` or ``{"weights": [{"settings": [...], "p": w}, ...]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"--prior: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict) or set(doc) - {"format_version", "p_one", "weights"}:
        raise UsageError("--prior: expected an object with p_one or weights")
    if "p_one" in doc:
        return SettingPrior.independent(spec, {str(k): float(v) for k, v in doc["p_one"].items()})
    if "weights" in doc:
        return SettingPrior(tuple((expand_settings(spec, w["settings"]), float(w["p"])) for w in doc["weights"]))
    raise UsageError("--prior: expected p_one or weights")


def _model(source: str):
    if source == "collider":
        return library.ColliderModel()
    spec, canon, _ = load_scenario(source)
    circ = canon.circuit if canon is not None else compile_circuit(spec)
    return QuantumModel(circ)


def _query_text(spec: LWFSpec, target, given) -> str:
    t = format_assignment(spec, as_assignment(spec, target))
    if given:
        return f"P({t} | {format_assignment(spec, as_assignment(spec, given))})"
    return f"P({t})"


# ---------------------------------------------------------------- commands

def cmd_validate(args, out: Out) -> int:
    text = _read(args.file)
    try:
        spec = parse_document(text).spec
    except ValidationFailed as e:
        out.field("valid", False, "no")
        out.data["violations"] = [{"code": v.code, "detail": v.detail} for v in e.report.violations]
        for v in e.report.violations:
            out.line(f"  {v.code}: {v.detail}")
        out.field("error", e.code)
        return 1
    out.field("scenario", spec.name)
    out.field("valid", True, "yes")
    out.field("agents", spec.n_agents)
    out.field("dimension", spec.full_layout.total_dim)
    out.data["violations"] = []
    return 0


def cmd_compile(args, out: Out) -> int:
    spec, canon, _ = load_scenario(args.file)
    circ = canon.circuit if canon is not None else compile_circuit(spec)
    if args.dump:
        listing = dump(circ)
        out.data["dump"] = listing.splitlines()
        out.text.extend(listing.rstrip("\n").splitlines())
        return 0
    out.field("scenario", spec.name)
    out.field("layout", " ".join(f"{r.label}:{r.dim}" for r in circ.layout.registers))
    out.field("dimension", circ.layout.total_dim)
    out.field("stages", len(circ.stages))
    out.field("free", [s.name for s in circ.stages if not s.pinned], " ".join(s.name for s in circ.stages if not s.pinned) or "none")
    out.field("pure", circ.is_pure, "yes" if circ.is_pure else "no")
    return 0


def cmd_predict(args, out: Out) -> int:
    spec, canon, _ = load_scenario(args.file)
    circ = canon.circuit if canon is not None else compile_circuit(spec)
    target = _assignment_arg(args.target, "--target")
    given = _assignment_arg(args.given, "--given")
    if not target:
        raise UsageError("--target: at least one outcome is required")
    if (args.settings is None) == (args.prior is None):
        raise UsageError("--settings/--prior: give exactly one")
    out.field("scenario", spec.name)
    out.field("query", {"target": target, "given": given}, _query_text(spec, target, given))
    if args.settings is not None:
        x = _settings_arg(spec, args.settings)
        value = setting_conditioned(circ, target, given, x)
        out.field("settings", list(x), format_settings(spec, x))
    else:
        prior = parse_prior(spec, _read(args.prior))
        value = prediction_with_prior(circ, target, given, prior)
        support = [(x, w) for x, w in prior.weights if w > 0]
        out.field("prior", [{"settings": list(x), "p": w} for x, w in support],
                  " ".join(f"{format_settings(spec, x)}:{w:g}" for x, w in support))
    _value_fields(out, value, args.tolerance)
    notes = []
    if canon is not None and args.settings is not None and not given:
        t = tuple(sorted(as_assignment(spec, target)))
        for r in canon.results:
            e = r.entry
            if e.check != "reference" or e.givens:
                continue
            if tuple(sorted(as_assignment(spec, dict(e.targets)))) == t and expand_settings(spec, e.settings) == x:
                if abs(float(e.value) - value) > args.tolerance:
                    notes.append(f"printed reference value {e.value} differs from the computed value")
    if notes:
        out.field("notes", notes, "; ".join(notes))
    return 0


def cmd_independence(args, out: Out) -> int:
    model = _model(args.file)
    target = _assignment_arg(args.target, "--target")
    given = _assignment_arg(args.given, "--given")
    if not target:
        raise UsageError("--target: at least one outcome is required")
    res = check_setting_independence(model, target, given)
    out.field("scenario", model.name)
    if isinstance(model, QuantumModel):
        out.field("query", {"target": target, "given": given}, _query_text(model.spec, target, given))
    rows = []
    out.line("values:")
    for x, v in res.values:
        shown = "null event" if v is None else format_value(v)
        rows.append({"settings": list(x), "value": v})
        out.line(f"  x={model.format_settings(x)}  {shown}")
    out.data["values"] = rows
    out.field("independent", res.independent, "yes" if res.independent else "no")
    if res.witness is not None:
        a, b = res.witness
        out.field("witness", [list(a), list(b)], f"x={model.format_settings(a)} vs x={model.format_settings(b)}")
    return 0


def cmd_reason(args, out: Out) -> int:
    model = _model(args.file)
    docs = parse_statements(_read(args.statements))
    out.field("scenario", model.name)
    out.field("assume-I", bool(args.assume_I), "yes" if args.assume_I else "no")
    statements: list[Statement] = []
    listed = []
    out.line("statements:")
    for k, d in enumerate(docs, start=1):
        x = expand_settings(model.spec, d.settings) if isinstance(model, QuantumModel) else tuple(d.settings)
        s = derive_statement(model, d.target, d.given, x)
        if s is None:
            p = model.conditional(tuple(sorted(_pairs(model, d.target))), tuple(sorted(_pairs(model, d.given))), x)
            out.line(f"  {k}. not logical: P = {format_value(p)} x={model.format_settings(x)}")
            listed.append({"index": k, "logical": False, "value": p, "settings": list(x)})
            continue
        if args.assume_I:
            verified = check_setting_independence(model, s.targets, s.givens).independent
            s = _stripped(s, "verified" if verified else "assumed")
        statements.append(s)
        out.line(f"  {k}. {render_statement(model, s)}")
        listed.append({"index": k, "logical": True, "statement": render_statement(model, s)})
    out.data["statements"] = listed

    certain = [s for s in statements if s.polarity == CERTAIN]
    result = None
    chain_error = None
    if len(certain) >= 2:
        result = certain[0]
        try:
            for s in certain[1:]:
                result = chain(result, s)
        except ChainError as e:
            chain_error = e
            result = None
    if chain_error is not None:
        out.field("chain", {"error": chain_error.code, "message": str(chain_error)},
                  f"{chain_error.code}: {chain_error}")
    elif result is not None:
        out.field("chain", render_statement(model, result))
        out.line("trace:")
        lines = trace(model, result)
        out.data["trace"] = lines
        out.text.extend("  " + ln for ln in lines)

    kb = KnowledgeBase(0, frozenset(statements + ([result] if result is not None else [])))
    vs = check_single_outcome(kb)
    out.data["violations"] = [{"label": violation_label(model, v), "conclusion": conclusion(model, v)} for v in vs]
    if vs:
        out.line(f"violations: {len(vs)}")
        for v in vs:
            out.line(f"  {violation_label(model, v)}  ({conclusion(model, v)})")
    else:
        out.line("violations: none")
    return 0


def cmd_paradox_scan(args, out: Out) -> int:
    if args.max_chain < 1:
        raise UsageError("--max-chain: must be at least 1")
    model = _model(args.file)
    report = paradox_scan(model, AssumptionSet(I=bool(args.assume_I)), max_chain=args.max_chain)
    out.text.extend(render_scan(report).rstrip("\n").splitlines())
    out.data.update({
        "scenario": model.name,
        "assumptions": report.assumptions.label(),
        "max_chain": report.max_chain,
        "statements": len(report.statements),
        "chained": len(report.derived),
        "violations": [],
    })
    for v in report.violations:
        reasoner = v.witnesses[1].owner if v.owner == 0 else v.owner
        lines: list[str] = []
        for w in v.witnesses:
            for ln in trace(model, w, reasoner):
                if ln not in lines:
                    lines.append(ln)
        out.data["violations"].append({
            "label": violation_label(model, v),
            "trace": lines,
            "conclusion": conclusion(model, v),
        })
    return 0


def cmd_library(args, out: Out) -> int:
    if args.action == "list":
        rows = []
        for name in sorted(library.LIBRARY):
            c = library.load(name)
            rows.append({"name": name, "title": c.title, "agents": c.spec.n_agents, "entries": len(c.expected)})
            out.line(f"{name:<11} {c.spec.n_agents} agents  {len(c.expected):>2} entries  {c.title}")
        out.data["scenarios"] = rows
        return 0
    if args.name is None:
        raise UsageError(f"library {args.action}: a scenario name is required")
    c = library.load(args.name)
    if args.action == "show":
        spec = c.spec
        out.field("scenario", c.name)
        out.field("title", c.title)
        out.field("systems", " ".join(f"{r.label}:{r.dim}" for r in spec.systems.registers))
        agents = []
        out.line("agents:")
        for a in spec.agents:
            mode = "pinned1" if a.pinned else "free"
            basis = a.basis_preset or "matrix"
            ch = "" if a.channel is None else f" channel on {','.join(a.channel.support)}"
            out.line(f"  {a.index}. {a.name} measures {','.join(a.measures)} in {basis} -> {a.memory} [{mode}] "
                     f"outcomes {'/'.join(a.outcomes)}{ch}")
            agents.append({"name": a.name, "measures": list(a.measures), "basis": basis, "memory": a.memory,
                           "setting": mode, "outcomes": list(a.outcomes)})
        out.data["agents"] = agents
        anns = [format_assignment(spec, as_assignment(spec, dict(ev))) for ev in spec.announcements]
        out.field("announcements", anns, ", ".join(anns) or "none")
        _entries(c, out, args.tolerance)
        return 0
    # check
    ok = _entries(c, out, args.tolerance)
    out.field("status", "ok" if ok else "failed")
    return 0 if ok else 1


def _entries(c: library.CanonicalScenario, out: Out, tol: float) -> bool:
    rows = []
    ok = True
    out.line("entries:")
    for r in c.results:
        e = r.entry
        desc = library.describe_entry(c.spec, e)
        match = abs(r.computed - float(e.value)) <= tol
        if e.check == "exact":
            status = "ok" if match else "FAIL"
            ok &= match
        else:
            status = "agrees" if match else "differs"
        frac = format_fraction(match_fraction(r.computed, tol))
        shown = frac if frac is not None else format_value(r.computed)
        out.line(f"  {desc:<34} expected {str(e.value):<5} computed {shown:<6} [{e.check}] {status}")
        rows.append({"entry": desc, "check": e.check, "expected": str(e.value),
                     "computed": r.computed, "fraction": frac, "status": status})
    out.data["entries"] = rows
    disc = [row for row in rows if row["status"] == "differs"]
    if disc:
        out.line("discrepancies (printed reference vs computed):")
        for row in disc:
            out.line(f"  {row['entry']}: printed {row['expected']}, computed {row['fraction'] or format_value(row['computed'])}")
    out.data["discrepancies"] = [{"entry": r["entry"], "printed": r["expected"], "computed": r["computed"]} for r in disc]
    return ok


def cmd_hardy(args, out: Out) -> int:
    table = library.hardy_map(library.fr_entanglement())
    out.field("scenario", "fr_ent")
    out.line("P(a',b' | x1,x2):")
    cells = {}
    for (x1, x2), p in sorted(table.cells.items()):
        key = f"{x1},{x2}"
        cells[key] = {f"{a}{b}": float(p[a, b]) for a in (0, 1) for b in (0, 1)}
        vals = "  ".join(f"{a}{b}={_frac_or_dec(float(p[a, b]), args.tolerance)}" for a in (0, 1) for b in (0, 1))
        out.line(f"  x=({x1},{x2})  {vals}")
    out.data["cells"] = cells
    zeros = []
    for ctx, (a, b) in library.HARDY_ZEROS:
        v = table.p(*ctx, a, b)
        zeros.append({"settings": list(ctx), "outcome": [a, b], "value": v, "zero": abs(v) <= 1e-12})
    out.data["zeros"] = zeros
    out.line("zero conditions: " + ", ".join(
        f"P({z['outcome'][0]}{z['outcome'][1]}|{z['settings'][0]},{z['settings'][1]})={'0' if z['zero'] else format_value(z['value'])}"
        for z in zeros))
    ctx, (a, b) = library.HARDY_SUCCESS
    success = table.p(*ctx, a, b)
    out.field("success", success, f"P(11|0,0) = {_frac_or_dec(success, args.tolerance)}")
    res = library.logical_contextuality(table)
    out.field("contextual", res.contextual, "yes" if res.contextual else "no")
    out.field("consistent_assignments", [list(g) for g in res.consistent_assignments],
              " ".join("".join(map(str, g)) for g in res.consistent_assignments) or "none")
    return 0


def _frac_or_dec(v: float, tol: float) -> str:
    f = format_fraction(match_fraction(v, tol))
    return f if f is not None else format_value(v)


def cmd_collider(args, out: Out) -> int:
    for flag, v in (("--x1", args.x1), ("--x2", args.x2)):
        if v not in (0, 1):
            raise UsageError(f"{flag}: must be 0 or 1")
    table = library.classical_collider(args.x1, args.x2)
    out.field("settings", [args.x1, args.x2], f"({args.x1},{args.x2})")
    out.line("P(a,b,u,w):")
    rows = []
    for (a, b, u, w), p in table.items():
        out.line(f"  a={a} b={b} u={u} w={w}  {p}")
        rows.append({"a": a, "b": b, "u": u, "w": w, "p": str(p)})
    out.data["joint"] = rows
    pa = sum((p for k, p in table.items() if k[0] == 1), Fraction(0))
    pb = sum((p for k, p in table.items() if k[1] == 1), Fraction(0))
    out.field("P(a=1)", str(pa))
    out.field("P(b=1)", str(pb))
    return 0


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"usage error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    common.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                        help="fraction matching and comparison tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="accepted for property suites; the commands are deterministic")

    p = _Parser(prog="lwfs", description="Wigner's-friend scenarios as augmented circuits.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=func)
        return sp

    sp = add("validate", cmd_validate, "check a scenario document")
    sp.add_argument("file")
    sp = add("compile", cmd_compile, "compile to the augmented circuit")
    sp.add_argument("file")
    sp.add_argument("--dump", action="store_true", help="list every stage with operator checksums")
    sp = add("predict", cmd_predict, "setting-conditioned or prior-averaged prediction")
    sp.add_argument("file", help="scenario document or library name")
    sp.add_argument("--target", required=True, help="e.g. b=1 or a=0,b=1")
    sp.add_argument("--given", help="e.g. u=ok,w=ok")
    sp.add_argument("--settings", help="free-agent settings (or the full vector), e.g. 0,1")
    sp.add_argument("--prior", help="JSON prior file")
    sp = add("independence", cmd_independence, "compare a prediction across admissible settings")
    sp.add_argument("file")
    sp.add_argument("--target", required=True)
    sp.add_argument("--given")
    sp = add("reason", cmd_reason, "evaluate, strip and chain statements from a file")
    sp.add_argument("file")
    sp.add_argument("--statements", required=True)
    sp.add_argument("--assume-I", dest="assume_I", action="store_true")
    sp = add("paradox-scan", cmd_paradox_scan, "derive every logical statement and look for contradictions")
    sp.add_argument("file", help="scenario document, library name, or 'collider'")
    sp.add_argument("--assume-I", dest="assume_I", action="store_true")
    sp.add_argument("--max-chain", type=int, default=4)
    sp = add("library", cmd_library, "built-in scenarios")
    sp.add_argument("action", choices=("list", "show", "check"))
    sp.add_argument("name", nargs="?")
    add("hardy", cmd_hardy, "relabel the entanglement scenario into a Hardy table")
    sp = add("collider", cmd_collider, "classical collider joint table")
    sp.add_argument("--x1", type=int, required=True)
    sp.add_argument("--x2", type=int, required=True)
    return p


def run_command(argv: Sequence[str], stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return int(e.code or 0)
    args.json = getattr(args, "json", False)
    args.tolerance = getattr(args, "tolerance", DEFAULT_TOLERANCE)
    args.seed = getattr(args, "seed", None)
    out = Out(args.json)
    try:
        code = args.func(args, out)
    except UsageError as e:
        stderr.write(f"usage error: {e}\n")
        return 2
    except LWFSError as e:
        if args.json:
            stdout.write(json.dumps({"error": e.code, "message": str(e)}, ensure_ascii=False) + "\n")
        else:
            stderr.write(f"{e.code}: {e}\n")
        return 1
    out.emit(stdout)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
