"""Setting-labelled logical statements and the Q/U/C/D/S/I rule engine.

Knowledge is extensional: an agent knows a statement iff it is in that
agent's knowledge base. Statements carry their setting vector unless they
were explicitly stripped.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence, Union

from .compiler import AugmentedCircuit
from .errors import (
    BudgetExceeded,
    ConditioningOnNullEvent,
    GivensNotEntailed,
    IndependenceNotVerified,
    NotChainable,
    SettingMismatch,
)
from .predict import as_assignment, setting_conditioned, warm
from .scenario import format_settings
from .tensor import EPS

Pairs = frozenset  # frozenset[tuple[int, int]]

CERTAIN, IMPOSSIBLE = 1, 0
EXTERNAL = 0  # owner index of the external observer


# ---------------------------------------------------------------- models

@dataclass(frozen=True)
class Variable:
    index: int
    name: str
    outcomes: tuple[str, ...]


class PredictionModel(Protocol):
    name: str
    variables: tuple[Variable, ...]
    announcements: tuple[tuple[tuple[int, int], ...], ...]

    def admissible_settings(self, involved: frozenset[int], unitary: bool = True) -> list[tuple[int, ...]]: ...

    def conditional(self, targets, givens, x): ...

    def format_settings(self, x) -> str: ...


class QuantumModel:
    """Adapter exposing an augmented circuit to the reasoning engine."""

    def __init__(self, circ: AugmentedCircuit):
        self.circ = circ
        spec = circ.spec
        self.spec = spec
        self.name = spec.name
        self.variables = tuple(Variable(a.index, a.name, a.outcomes) for a in spec.agents)
        self.announcements = tuple(as_assignment(spec, dict(ev)) for ev in spec.announcements)

    def admissible_settings(self, involved, unitary=True):
        choices = []
        for a in self.spec.agents:
            if a.pinned or a.index in involved or not unitary:
                choices.append((1,))
            else:
                choices.append((0, 1))
        return [tuple(x) for x in itertools.product(*choices)]

    def conditional(self, targets, givens, x):
        return setting_conditioned(self.circ, targets, givens, x)

    def format_settings(self, x):
        return format_settings(self.spec, x)

    def prepare(self, unitary=True):
        warm(self.circ, self.admissible_settings(frozenset(), unitary))


def as_model(obj) -> PredictionModel:
    if isinstance(obj, AugmentedCircuit):
        return QuantumModel(obj)
    return obj


# ---------------------------------------------------------------- statements

@dataclass(frozen=True)
class Statement:
    """Logical statement: P(targets | givens, settings) = 1 (S1) or 0 (S0).

    ``settings`` is None once stripped; ``strip`` then records how
    ("verified" or "assumed"). Provenance fields do not take part in equality.
    """

    kind: str
    polarity: Optional[int]
    givens: Pairs
    targets: Pairs
    settings: Optional[tuple[int, ...]]
    strip: Optional[str] = None
    rule: str = field(default="Q", compare=False)
    sources: tuple = field(default=(), compare=False)
    origin: Optional[tuple[int, ...]] = field(default=None, compare=False)
    owner: int = field(default=EXTERNAL, compare=False)
    steps: tuple = field(default=(), compare=False)
    value: Optional[float] = field(default=None, compare=False)

    @property
    def stripped(self) -> bool:
        return self.settings is None

    @property
    def settings_key(self):
        return "stripped" if self.settings is None else self.settings

    @property
    def depth(self) -> int:
        return len(self.steps) if self.steps else 1

    def sort_key(self):
        return (sorted(self.givens), sorted(self.targets), -(self.polarity or 0),
                (1,) if self.settings is None else (0,) + self.settings, self.strip or "")


def observational(outcomes: Iterable[tuple[int, int]], owner: int = EXTERNAL) -> Statement:
    return Statement("observational", None, frozenset(), frozenset(outcomes), None, rule="obs", owner=owner)


def derive_statement(model, targets, givens, x) -> Optional[Statement]:
    """Rule Q: S1 if the prediction is 1 within eps, S0 if 0 within eps, else None."""
    model = as_model(model)
    t, g = _pairs(model, targets), _pairs(model, givens)
    p = model.conditional(tuple(sorted(t)), tuple(sorted(g)), tuple(x))
    if abs(p - 1) <= EPS:
        pol = CERTAIN
    elif abs(p) <= EPS:
        pol = IMPOSSIBLE
    else:
        return None
    owner = min((i for i, _ in g), default=EXTERNAL)
    return Statement("logical", pol, frozenset(g), frozenset(t), tuple(x), owner=owner,
                     steps=(frozenset(t),), value=float(p), origin=tuple(x))


def _pairs(model, obj) -> frozenset:
    if isinstance(obj, frozenset):
        return obj
    if isinstance(model, QuantumModel):
        return frozenset(as_assignment(model.spec, obj))
    if isinstance(obj, dict):
        names = {v.name: v for v in model.variables}
        out = []
        for k, val in obj.items():
            if isinstance(k, str):
                var = names[k]
                out.append((var.index, var.outcomes.index(str(val)) if str(val) in var.outcomes else int(val)))
            else:
                out.append((int(k), int(val)))
        return frozenset(out)
    return frozenset((int(i), int(v)) for i, v in obj)


@dataclass(frozen=True)
class KnowledgeBase:
    owner: int
    statements: frozenset = frozenset()

    def __contains__(self, s) -> bool:
        return s in self.statements

    def sorted(self) -> list[Statement]:
        return sorted(self.statements, key=Statement.sort_key)


def inherit(kb_i: KnowledgeBase, kb_j: KnowledgeBase) -> KnowledgeBase:
    """Rule C: agent i learns everything agent j knows."""
    return KnowledgeBase(kb_i.owner, kb_i.statements | kb_j.statements)


def _merge_strip(a: Optional[str], b: Optional[str]) -> Optional[str]:
    if a is None and b is None:
        return None
    return "assumed" if "assumed" in (a, b) else "verified"


def chain(s1: Statement, s2: Statement) -> Statement:
    """Rule D: from G => T1 and G2 => T2 with G2 inside G u T1, conclude G => T1 u T2."""
    for s in (s1, s2):
        if s.kind != "logical" or s.polarity != CERTAIN:
            raise NotChainable("chain needs two logical statements of polarity S1")
    if s1.settings != s2.settings:
        raise SettingMismatch(f"settings {s1.settings_key} and {s2.settings_key} differ")
    known = s1.givens | s1.targets
    if not s2.givens <= known:
        raise GivensNotEntailed("the second statement's givens are not entailed by the first")
    added = s2.targets - known
    targets = s1.targets | (s2.targets - s1.givens)
    return Statement(
        "logical", CERTAIN, s1.givens, frozenset(targets), s1.settings,
        strip=_merge_strip(s1.strip, s2.strip), rule="D", sources=(s1, s2),
        owner=s1.owner, steps=(s1.steps or (s1.targets,)) + ((added,) if added else ()),
    )


# ---------------------------------------------------------------- independence

@dataclass(frozen=True)
class IndependenceResult:
    independent: bool
    witness: Optional[tuple[tuple[int, ...], tuple[int, ...]]]
    values: tuple[tuple[tuple[int, ...], Optional[float]], ...]


def check_setting_independence(model, targets, givens, unitary: bool = True) -> IndependenceResult:
    """Compare the prediction across every admissible setting vector.

    A null conditioning event counts as its own value (None).
    """
    model = as_model(model)
    t, g = _pairs(model, targets), _pairs(model, givens)
    involved = frozenset(i for i, _ in t) | frozenset(i for i, _ in g)
    values = []
    for x in model.admissible_settings(involved, unitary):
        try:
            v = model.conditional(tuple(sorted(t)), tuple(sorted(g)), x)
        except ConditioningOnNullEvent:
            v = None
        values.append((x, v))
    x0, v0 = values[0]
    for x, v in values[1:]:
        same = (v is None and v0 is None) or (
            v is not None and v0 is not None and abs(v - v0) <= EPS)
        if not same:
            return IndependenceResult(False, (x0, x), tuple(values))
    return IndependenceResult(True, None, tuple(values))


def strip_settings(s: Statement, mode: str, model=None) -> Statement:
    """Drop the setting label. ``verified`` requires an independence check to pass."""
    if mode not in ("verified", "assume-I", "assumed"):
        raise ValueError(f"unknown strip mode {mode!r}")
    if s.stripped:
        return s
    if mode == "verified":
        if model is None:
            raise IndependenceNotVerified("verified stripping needs a model to check against")
        res = check_setting_independence(model, s.targets, s.givens)
        if not res.independent:
            raise IndependenceNotVerified(
                f"prediction differs between settings {res.witness[0]} and {res.witness[1]}")
        tag = "verified"
    else:
        tag = "assumed"
    return _stripped(s, tag)


def _stripped(s: Statement, tag: str) -> Statement:
    return Statement(s.kind, s.polarity, s.givens, s.targets, None, strip=tag, rule="strip",
                     sources=(s,), origin=s.settings, owner=s.owner, steps=s.steps, value=s.value)


# ---------------------------------------------------------------- single outcome

@dataclass(frozen=True)
class SViolation:
    owner: int
    givens: Pairs
    settings_key: object
    agent: int
    values: tuple[int, ...]
    witnesses: tuple[Statement, Statement]
    kind: str = "conflict"  # "conflict" or "impossible"

    @property
    def contradicts_givens(self) -> bool:
        return any(i == self.agent for i, _ in self.givens)


def check_single_outcome(kbs: Union[KnowledgeBase, Sequence[KnowledgeBase]]) -> list[SViolation]:
    """Rule S: no two certain, different outcomes under identical givens and settings."""
    if isinstance(kbs, KnowledgeBase):
        kbs = [kbs]
    found: dict = {}
    for kb in kbs:
        groups: dict = {}
        for s in kb.sorted():
            if s.kind != "logical":
                continue
            groups.setdefault((s.givens, s.settings_key), []).append(s)
        for (givens, skey), group in sorted(groups.items(), key=lambda kv: _group_key(kv[0])):
            facts: dict[int, dict[int, Statement]] = {}
            if givens:
                given = Statement("given", None, frozenset(), givens, None, rule="given")
                for i, v in sorted(givens):
                    facts.setdefault(i, {})[v] = given
            ordered = sorted(group, key=lambda s: (s.depth, s.sort_key()))
            for s in ordered:
                if s.polarity != CERTAIN:
                    continue
                for i, v in sorted(s.targets):
                    facts.setdefault(i, {}).setdefault(v, s)
            for i, vals in sorted(facts.items()):
                if len(vals) > 1:
                    vs = tuple(sorted(vals))
                    key = (kb.owner, givens, skey, i, vs)
                    if key not in found:
                        w = sorted((vals[vs[0]], vals[vs[-1]]), key=lambda t: t.rule != "given")
                        found[key] = SViolation(kb.owner, givens, skey, i, vs, tuple(w))
            for s in ordered:
                if s.polarity != IMPOSSIBLE:
                    continue
                if all(v in facts.get(i, {}) for i, v in s.targets):
                    i, v = sorted(s.targets)[0]
                    key = (kb.owner, givens, skey, i, (v,), "impossible")
                    if key not in found:
                        found[key] = SViolation(kb.owner, givens, skey, i, (v,),
                                                (facts[i][v], s), kind="impossible")
    return sorted(found.values(), key=_violation_key)


def _group_key(k):
    givens, skey = k
    return (sorted(givens), (1,) if skey == "stripped" else (0,) + tuple(skey))


def _violation_key(v: SViolation):
    return (0 if v.contradicts_givens else 1, -len(v.givens), -v.agent, sorted(v.givens),
            (1,) if v.settings_key == "stripped" else (0,) + tuple(v.settings_key), v.values, v.kind)


# ---------------------------------------------------------------- scan

@dataclass(frozen=True)
class AssumptionSet:
    Q: bool = True
    U: bool = True
    C: bool = True
    D: bool = True
    S: bool = True
    I: bool = False

    def label(self) -> str:
        return " ".join(n if getattr(self, n) else "¬" + n for n in "QUCDSI")


@dataclass(frozen=True)
class ScanReport:
    model: object
    assumptions: AssumptionSet
    max_chain: int
    statements: tuple[Statement, ...]
    derived: tuple[Statement, ...]
    violations: tuple[SViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


DEFAULT_BUDGET = 200_000


def enumerate_statements(model, unitary: bool = True, budget: int = DEFAULT_BUDGET) -> list[Statement]:
    """Rule Q over single-outcome targets and single-outcome or announced givens."""
    model = as_model(model)
    singles = [((var.index, v),) for var in model.variables for v in range(len(var.outcomes))]
    givens_list = [()] + singles
    for ev in model.announcements:
        ev = tuple(sorted(ev))
        if ev not in givens_list:
            givens_list.append(ev)
    out = []
    for g in givens_list:
        g_agents = {i for i, _ in g}
        for t in singles:
            if t[0][0] in g_agents:
                continue
            involved = frozenset(g_agents | {t[0][0]})
            for x in model.admissible_settings(involved, unitary):
                try:
                    s = derive_statement(model, frozenset(t), frozenset(g), x)
                except ConditioningOnNullEvent:
                    continue
                if s is not None:
                    out.append(s)
                    if len(out) > budget:
                        raise BudgetExceeded(f"more than {budget} statements")
    return out


def close_under_chain(statements: Iterable[Statement], max_chain: int,
                      budget: int = DEFAULT_BUDGET) -> list[Statement]:
    """All chains of at most ``max_chain`` S1 statements (left-linear; chain is associative)."""
    base = sorted({s for s in statements if s.polarity == CERTAIN}, key=Statement.sort_key)
    by_label: dict = {}
    for b in base:
        by_label.setdefault(b.settings_key, []).append(b)
    seen = set(base)
    derived: list[Statement] = []
    frontier = base
    for _ in range(max_chain - 1):
        nxt = []
        for s in frontier:
            known = s.givens | s.targets
            for b in by_label.get(s.settings_key, ()):
                if not b.givens <= known or b.targets <= known:
                    continue
                c = chain(s, b)
                if c in seen:
                    continue
                seen.add(c)
                derived.append(c)
                nxt.append(c)
                if len(seen) > budget:
                    raise BudgetExceeded(f"more than {budget} chained statements")
        if not nxt:
            break
        frontier = nxt
    return derived


def paradox_scan(model, assumptions: AssumptionSet = AssumptionSet(), max_chain: int = 4,
                 budget: int = DEFAULT_BUDGET, verified_strip: bool = False) -> ScanReport:
    """Enumerate (Q), strip (I), inherit (C), chain (D) and check single outcomes (S)."""
    if max_chain < 1:
        raise ValueError("max_chain must be at least 1")
    model = as_model(model)
    if hasattr(model, "prepare"):
        model.prepare(assumptions.U)
    base = enumerate_statements(model, assumptions.U, budget) if assumptions.Q else []

    if assumptions.I or verified_strip:
        cache: dict = {}
        stripped = []
        for s in base:
            key = (s.targets, s.givens)
            if key not in cache:
                cache[key] = check_setting_independence(model, s.targets, s.givens, assumptions.U).independent
            if cache[key]:
                stripped.append(_stripped(s, "verified"))
            elif assumptions.I:
                stripped.append(_stripped(s, "assumed"))
            else:
                stripped.append(s)
        base = _dedupe(stripped)

    owners = sorted({s.owner for s in base})
    kbs = {o: KnowledgeBase(o, frozenset(s for s in base if s.owner == o)) for o in owners}
    if assumptions.C and kbs:
        merged = KnowledgeBase(EXTERNAL, frozenset())
        for o in owners:
            merged = inherit(merged, kbs[o])
        kbs = {EXTERNAL: merged}

    derived: list[Statement] = []
    if assumptions.D:
        for o in sorted(kbs):
            extra = close_under_chain(kbs[o].statements, max_chain, budget)
            derived.extend(extra)
            kbs[o] = KnowledgeBase(o, kbs[o].statements | frozenset(extra))

    violations = check_single_outcome([kbs[o] for o in sorted(kbs)]) if assumptions.S else []
    return ScanReport(model, assumptions, max_chain, tuple(sorted(base, key=Statement.sort_key)),
                      tuple(derived), tuple(violations))


def _dedupe(statements: list[Statement]) -> list[Statement]:
    seen, out = set(), []
    for s in statements:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


# ---------------------------------------------------------------- rendering

def _fmt_pairs(model, pairs) -> str:
    items = sorted(pairs)
    if not items:
        return "∅"
    labels = [(model.variables[i - 1].name, model.variables[i - 1].outcomes[v]) for i, v in items]
    if len(labels) > 1 and len({lb for _, lb in labels}) == 1:
        return "=".join(n for n, _ in labels) + "=" + labels[0][1]
    return ",".join(f"{n}={lb}" for n, lb in labels)


def settings_text(model, s: Statement) -> str:
    if s.stripped:
        return f"[I {s.strip}]"
    return f"x={model.format_settings(s.settings)}"


def render_statement(model, s: Statement) -> str:
    model = as_model(model)
    if s.kind == "observational":
        return f"observed {_fmt_pairs(model, s.targets)}"
    steps = [st for st in (s.steps or (s.targets,)) if st]
    if s.polarity == IMPOSSIBLE:
        body = f"{_fmt_pairs(model, s.givens)} ⇒ ¬({_fmt_pairs(model, s.targets)})"
    else:
        body = " ⇒ ".join([_fmt_pairs(model, s.givens)] + [_fmt_pairs(model, st) for st in steps])
    pol = "S¹" if s.polarity == CERTAIN else "S⁰"
    return f"{body}  {pol} {settings_text(model, s)}"


def _owner_name(model, o: int) -> str:
    return "observer" if o == EXTERNAL else model.variables[o - 1].name


def trace(model, s: Statement, reasoner: Optional[int] = None) -> list[str]:
    """Derivation lines, sources first, one statement per line."""
    model = as_model(model)
    lines: list[str] = []

    def walk(t: Statement):
        if t.rule == "D":
            walk(t.sources[0])
            walk(t.sources[1])
        elif t.rule == "strip":
            walk(t.sources[0])
        if t.rule == "given":
            lines.append(f"[given] {_fmt_pairs(model, t.targets)}")
            return
        line = f"[{t.rule}] {render_statement(model, t)}"
        if t.rule == "Q":
            line += f"  (by {_owner_name(model, t.owner)})"
        if t.rule == "strip" and t.origin is not None:
            line += f"  from x={model.format_settings(t.origin)}"
        if line not in lines:
            lines.append(line)
        if t.rule == "Q" and reasoner is not None and t.owner != reasoner:
            c = f"[C] {_owner_name(model, reasoner)} inherits {render_statement(model, t)} from {_owner_name(model, t.owner)}"
            if c not in lines:
                lines.append(c)

    walk(s)
    return lines


def violation_label(model, v: SViolation) -> str:
    model = as_model(model)
    var = model.variables[v.agent - 1]
    if v.kind == "impossible":
        lab = var.outcomes[v.values[0]]
        return f"{var.name}={lab} ∧ ¬({var.name}={lab})"
    return " ∧ ".join(f"{var.name}={var.outcomes[x]}" for x in v.values)


def conclusion(model, v: SViolation) -> str:
    """The chained statement that clashes, shown as givens => conflicting outcome."""
    model = as_model(model)
    s = v.witnesses[1]
    target = frozenset(p for p in s.targets if p[0] == v.agent) or s.targets
    tag = settings_text(model, s)
    return f"{_fmt_pairs(model, s.givens)} ⇒ {_fmt_pairs(model, target)} {tag}"


def render_scan(report: ScanReport) -> str:
    model = report.model
    n1 = sum(1 for s in report.statements if s.polarity == CERTAIN)
    n0 = len(report.statements) - n1
    lines = [
        f"paradox-scan {model.name}",
        f"assumptions: {report.assumptions.label()}  max-chain {report.max_chain}",
        f"logical statements: {len(report.statements)} (S¹ {n1}, S⁰ {n0})",
        f"chained statements: {len(report.derived)}",
    ]
    if not report.violations:
        lines.append("no violations")
        return "\n".join(lines) + "\n"
    lines.append(f"violations: {len(report.violations)}")
    for k, v in enumerate(report.violations, start=1):
        lines.append("")
        lines.append(f"violation {k}: {violation_label(model, v)}")
        reasoner = v.witnesses[1].owner if v.owner == EXTERNAL else v.owner
        seen: list[str] = []
        for w in v.witnesses:
            for ln in trace(model, w, reasoner):
                if ln not in seen:
                    seen.append(ln)
        lines.extend("  " + ln for ln in seen)
        lines.append(f"  conclusion: {conclusion(model, v)}")
        lines.append(f"  [S] {violation_label(model, v)}")
    return "\n".join(lines) + "\n"
