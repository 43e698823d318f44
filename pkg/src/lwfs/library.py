"""Built-in scenarios with expected values, the Hardy relabelling, and the classical collider."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .compiler import AugmentedCircuit, compile_circuit
from .epistemic import Variable
from .errors import ConditioningOnNullEvent, LibraryIntegrityError, UnknownScenario, WrongScenario
from .predict import distribution, event_probability, setting_conditioned
from .scenario import (
    AgentSpec,
    Channel,
    LWFSpec,
    computational_basis,
    expand_settings,
    format_settings,
    hadamard_basis,
    preset_basis,
)
from .tensor import EPS, RegisterLayout, StateVector


# ---------------------------------------------------------------- canonical scenarios

@dataclass(frozen=True)
class ExpectedEntry:
    """One tabulated value. ``check`` is ``exact`` (must reproduce within
    1e-9) or ``reference`` (a printed value kept for the discrepancy report)."""

    targets: tuple[tuple[str, str], ...]
    givens: tuple[tuple[str, str], ...]
    settings: tuple[int, ...]
    value: Fraction
    check: str = "exact"
    note: str = ""


@dataclass(frozen=True)
class EntryResult:
    entry: ExpectedEntry
    computed: float

    @property
    def matches(self) -> bool:
        return abs(self.computed - float(self.entry.value)) <= EPS


@dataclass(frozen=True, eq=False)
class CanonicalScenario:
    name: str
    title: str
    spec: LWFSpec
    expected: tuple[ExpectedEntry, ...]
    circuit: AugmentedCircuit = field(repr=False, default=None)
    results: tuple[EntryResult, ...] = ()

    @property
    def discrepancies(self) -> tuple[EntryResult, ...]:
        return tuple(r for r in self.results if r.entry.check == "reference" and not r.matches)


def evaluate_entry(circ: AugmentedCircuit, e: ExpectedEntry) -> float:
    x = expand_settings(circ.spec, e.settings)
    if e.givens:
        return setting_conditioned(circ, dict(e.targets), dict(e.givens), x)
    return event_probability(circ, dict(e.targets), x)


def _finish(name: str, title: str, spec: LWFSpec, expected: list[ExpectedEntry]) -> CanonicalScenario:
    circ = compile_circuit(spec)
    results = []
    for e in expected:
        r = EntryResult(e, evaluate_entry(circ, e))
        if e.check == "exact" and not r.matches:
            raise LibraryIntegrityError(
                f"{name}: {describe_entry(spec, e)} expected {e.value}, computed {r.computed!r}")
        results.append(r)
    return CanonicalScenario(name, title, spec, tuple(expected), circ, tuple(results))


def describe_entry(spec: LWFSpec, e: ExpectedEntry) -> str:
    t = _fmt(e.targets)
    g = _fmt(e.givens)
    body = f"P({t} | {g})" if e.givens else f"P({t})"
    return f"{body} x={format_settings(spec, expand_settings(spec, e.settings))}"


def _fmt(pairs) -> str:
    pairs = list(pairs)
    if len(pairs) > 1 and len({v for _, v in pairs}) == 1:
        return "=".join(k for k, _ in pairs) + "=" + pairs[0][1]
    return ",".join(f"{k}={v}" for k, v in pairs)


def E(targets: dict, settings, value, givens: Optional[dict] = None, check="exact", note="") -> ExpectedEntry:
    return ExpectedEntry(tuple(targets.items()), tuple((givens or {}).items()), tuple(settings),
                         Fraction(value), check, note)


F = Fraction
OKOK = {"u": "ok", "w": "ok"}


def _ok_fail(index, name, measures, memory):
    basis, labels = preset_basis("ok_fail", 4)
    return AgentSpec(index, name, measures, basis, memory, pinned=True, outcomes=labels, basis_preset="ok_fail")


def fr_entanglement_spec() -> LWFSpec:
    systems = RegisterLayout.of(("R", 2), ("S", 2))
    psi = StateVector(systems, np.array([1, 0, 1, 1]) / np.sqrt(3))
    agents = (
        AgentSpec(1, "a", ("R",), computational_basis(2), "A", basis_preset="computational"),
        AgentSpec(2, "b", ("S",), computational_basis(2), "B", basis_preset="computational"),
        _ok_fail(3, "u", ("R", "A"), "U"),
        _ok_fail(4, "w", ("S", "B"), "W"),
    )
    return LWFSpec(systems, agents, psi, announcements=(OKOK,), name="fr_ent")


@lru_cache(maxsize=None)
def fr_entanglement() -> CanonicalScenario:
    ex = [
        E(OKOK, (0, 0), F(1, 12)),
        E({"b": "0"}, (0, 1), 0, OKOK),
        E({"b": "1"}, (0, 1), 1, OKOK),
        E({"a": "0"}, (1, 0), 1, OKOK),
        E({"a": "1"}, (1, 0), 0, OKOK),
        E({"a": "0", "b": "0"}, (1, 1), F(1, 3), OKOK),
        E({"a": "0", "b": "1"}, (1, 1), 0, OKOK),
        E({"a": "1", "b": "0"}, (1, 1), F(1, 3), OKOK),
        E({"a": "1", "b": "1"}, (1, 1), F(1, 3), OKOK),
        E({"a": "0"}, (1, 1), F(1, 3), OKOK),
        E({"a": "1"}, (1, 1), F(2, 3), OKOK),
        E({"b": "0"}, (1, 1), F(2, 3), OKOK),
        E({"b": "1"}, (1, 1), F(1, 3), OKOK),
        E({"a": "0"}, (1, 0), 1, {"w": "ok"}, note="post-selection on w only"),
        E({"a": "1"}, (1, 0), 0, {"w": "ok"}, note="post-selection on w only"),
        E({"b": "0"}, (0, 1), 0, {"u": "ok"}, note="post-selection on u only"),
        E({"b": "1"}, (0, 1), 1, {"u": "ok"}, note="post-selection on u only"),
        E({"a": "1"}, (1, 1), 1, {"b": "1"}),
        E({"w": "fail"}, (1, 0), 1, {"a": "1"}),
        E(OKOK, (0, 1), F(1, 12), check="reference", note="post-selection success"),
        E(OKOK, (1, 0), F(1, 12), check="reference", note="post-selection success"),
        E(OKOK, (1, 1), F(5, 6), check="reference", note="post-selection success"),
    ]
    return _finish("fr_ent", "Frauchiger-Renner, entanglement version", fr_entanglement_spec(), ex)


def controlled_hadamard() -> np.ndarray:
    """|0><0| x 1 + |1><1| x H on (control, target)."""
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    return np.kron(p0, np.eye(2)) + np.kron(p1, hadamard_basis(2))


def fr_prepare_measure_spec() -> LWFSpec:
    systems = RegisterLayout.of(("R", 2), ("S", 2))
    psi = StateVector(systems, np.array([np.sqrt(1 / 3), 0, np.sqrt(2 / 3), 0]))
    agents = (
        AgentSpec(1, "r", ("R",), computational_basis(2), "Lbar",
                  channel=Channel.unitary(("R", "S"), controlled_hadamard()),
                  outcomes=("heads", "tails"), basis_preset="computational"),
        AgentSpec(2, "z", ("S",), computational_basis(2), "L",
                  outcomes=("-1/2", "+1/2"), basis_preset="computational"),
        _ok_fail(3, "wbar", ("R", "Lbar"), "Wbar"),
        _ok_fail(4, "w", ("S", "L"), "W"),
    )
    return LWFSpec(systems, agents, psi, announcements=({"wbar": "ok", "w": "ok"},), name="fr_pm")


@lru_cache(maxsize=None)
def fr_prepare_measure() -> CanonicalScenario:
    okok = {"wbar": "ok", "w": "ok"}
    ex = [
        E({"w": "fail"}, (1, 0), 1, {"r": "tails"}),
        E({"w": "fail"}, (1, 1), F(1, 2), {"r": "tails"}),
        E({"r": "tails"}, (1, 1), 1, {"z": "+1/2"}),
        E({"w": "fail"}, (0, 1), F(1, 2), {"z": "+1/2"}),
        E({"w": "fail"}, (1, 1), F(1, 2), {"z": "+1/2"}),
        E({"z": "+1/2"}, (0, 1), 1, {"wbar": "ok"}),
        E({"z": "+1/2"}, (1, 1), F(1, 3), {"wbar": "ok"}),
        E(okok, (0, 0), F(1, 12)),
        E(okok, (1, 1), F(5, 6), check="reference", note="post-selection success"),
        E(okok, (0, 1), F(1, 2), check="reference", note="post-selection success"),
        E(okok, (1, 0), F(1, 2), check="reference", note="post-selection success"),
    ]
    return _finish("fr_pm", "Frauchiger-Renner, prepare-and-measure version", fr_prepare_measure_spec(), ex)


def wigner_original_spec() -> LWFSpec:
    systems = RegisterLayout.of(("S", 2))
    psi = StateVector(systems, np.array([1, 1]) / np.sqrt(2))
    basis, labels = preset_basis("bell", 4)
    agents = (
        AgentSpec(1, "f", ("S",), computational_basis(2), "M", basis_preset="computational"),
        AgentSpec(2, "w", ("S", "M"), basis, "W", pinned=True, outcomes=labels, basis_preset="bell"),
    )
    return LWFSpec(systems, agents, psi, name="wigner")


@lru_cache(maxsize=None)
def wigner_original() -> CanonicalScenario:
    ex = [
        E({"w": "phi+"}, (0,), 1),
        E({"w": "psi+"}, (0,), 0),
        E({"w": "phi-"}, (0,), 0),
        E({"w": "phi+"}, (1,), F(1, 2)),
        E({"w": "phi-"}, (1,), F(1, 2)),
    ]
    return _finish("wigner", "Wigner's friend, original", wigner_original_spec(), ex)


def bell_local_spec() -> LWFSpec:
    systems = RegisterLayout.of(("P", 2), ("Q", 2))
    psi = StateVector(systems, np.array([1, 0, 0, 1]) / np.sqrt(2))
    agents = (
        AgentSpec(1, "a", ("P",), computational_basis(2), "A", basis_preset="computational"),
        AgentSpec(2, "b", ("Q",), hadamard_basis(2), "B", outcomes=("+", "-"), basis_preset="hadamard"),
        AgentSpec(3, "c", ("Q",), computational_basis(2), "C", basis_preset="computational"),
    )
    return LWFSpec(systems, agents, psi, name="bell_local")


@lru_cache(maxsize=None)
def bell_local() -> CanonicalScenario:
    ex = [
        E({"a": "0"}, (1, 1, 1), F(1, 2)),
        E({"b": "+"}, (1, 1, 1), F(1, 2), {"a": "0"}),
        E({"c": "0"}, (1, 1, 1), F(1, 2), {"a": "0", "b": "+"}),
        E({"c": "0"}, (0, 0, 1), F(1, 2), {}),
    ]
    return _finish("bell_local", "Bell pair, memories never reused", bell_local_spec(), ex)


LIBRARY = {
    "fr_ent": fr_entanglement,
    "fr_pm": fr_prepare_measure,
    "wigner": wigner_original,
    "bell_local": bell_local,
}


def load(name: str) -> CanonicalScenario:
    try:
        return LIBRARY[name]()
    except KeyError:
        raise UnknownScenario(f"no library scenario {name!r}; known: {', '.join(sorted(LIBRARY))}") from None


# ---------------------------------------------------------------- Hardy

HARDY_ZEROS = (((0, 1), (1, 0)), ((1, 1), (0, 1)), ((1, 0), (1, 1)))
HARDY_SUCCESS = ((0, 0), (1, 1))


@dataclass(frozen=True, eq=False)
class HardyTable:
    """P(a', b' | x1, x2) as 2x2 arrays keyed by (x1, x2)."""

    cells: dict

    def p(self, x1, x2, a, b) -> float:
        return float(self.cells[(x1, x2)][a, b])


def hardy_map(fr: CanonicalScenario) -> HardyTable:
    """Relabel FR outcomes: a' = [u=ok] when x1=0, a' = a when x1=1; b' likewise."""
    if fr.name != "fr_ent":
        raise WrongScenario(f"hardy_map needs the entanglement scenario, got {fr.name}")
    circ = fr.circuit
    spec = circ.spec
    ok_u = spec.agent("u").outcome_index("ok")
    ok_w = spec.agent("w").outcome_index("ok")
    cells = {}
    for x1, x2 in itertools.product((0, 1), repeat=2):
        x = expand_settings(spec, (x1, x2))
        measured = [i for i in range(1, 5) if x[i - 1]]
        table = distribution(circ, x)
        p = np.zeros((2, 2))
        for idx, prob in np.ndenumerate(table):
            vals = dict(zip(measured, idx))
            a = vals[1] if x1 else int(vals[3] == ok_u)
            b = vals[2] if x2 else int(vals[4] == ok_w)
            p[a, b] += prob
        p.setflags(write=False)
        cells[(x1, x2)] = p
    return HardyTable(cells)


@dataclass(frozen=True)
class ContextualityResult:
    contextual: bool
    consistent_assignments: tuple[tuple[int, int, int, int], ...]
    unextendable: tuple[tuple[tuple[int, int], tuple[int, int]], ...]


def logical_contextuality(table: HardyTable, tol: float = 1e-12) -> ContextualityResult:
    """Support-level test: is every possible event extended by a global assignment
    (a'_0, a'_1, b'_0, b'_1) whose every restriction is possible?"""
    possible = {(ctx, (a, b)) for ctx, p in table.cells.items()
                for a in (0, 1) for b in (0, 1) if p[a, b] > tol}
    consistent = []
    for g in itertools.product((0, 1), repeat=4):
        if all((ctx, (g[ctx[0]], g[2 + ctx[1]])) in possible for ctx in table.cells):
            consistent.append(g)
    covered = {(ctx, (g[ctx[0]], g[2 + ctx[1]])) for g in consistent for ctx in table.cells}
    missing = tuple(sorted(possible - covered))
    return ContextualityResult(bool(missing), tuple(consistent), missing)


# ---------------------------------------------------------------- classical collider

def classical_collider(x1: int, x2: int) -> dict[tuple[int, int, int, int], Fraction]:
    """Exact P(a, b, u, w | x1, x2) with a = l^x1, b = l^x2, u = a.kU, w = b.kW."""
    if x1 not in (0, 1) or x2 not in (0, 1):
        raise ValueError("settings must be bits")
    out: dict = {}
    for lam, ku, kw in itertools.product((0, 1), repeat=3):
        a, b = lam ^ x1, lam ^ x2
        key = (a, b, a & ku, b & kw)
        out[key] = out.get(key, Fraction(0)) + Fraction(1, 8)
    return dict(sorted(out.items()))


def collider_probability(x1, x2, event: dict[int, int], given: Optional[dict[int, int]] = None) -> Fraction:
    """P(event | given, x1, x2); variables are positions 0..3 of (a, b, u, w)."""
    table = classical_collider(x1, x2)
    given = given or {}

    def mass(cond):
        return sum((p for k, p in table.items() if all(k[i] == v for i, v in cond.items())), Fraction(0))

    den = mass(given)
    if den == 0:
        raise ConditioningOnNullEvent("conditioning event has probability 0")
    both = dict(given)
    for i, v in event.items():
        if both.get(i, v) != v:
            return Fraction(0)
        both[i] = v
    return mass(both) / den


class ColliderModel:
    """The collider as a prediction model: variables a, b, u, w; settings (x1, x2)."""

    name = "collider"
    variables = tuple(Variable(i + 1, n, ("0", "1")) for i, n in enumerate("abuw"))
    announcements = (((3, 1), (4, 1)),)

    def admissible_settings(self, involved, unitary=True):
        return [(0, 0), (0, 1), (1, 0), (1, 1)]

    def conditional(self, targets, givens, x):
        return collider_probability(x[0], x[1], {i - 1: v for i, v in targets},
                                    {i - 1: v for i, v in givens})

    def format_settings(self, x):
        return "(" + ",".join(str(v) for v in x) + ")"
