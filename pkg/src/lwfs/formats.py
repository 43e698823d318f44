"""JSON scenario documents, query strings and fraction formatting."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import prod
from typing import Any, Optional

import numpy as np

from .errors import LWFSError, ScenarioSyntaxError, SchemaError, ValidationFailed
from .scenario import BASIS_PRESETS, AgentSpec, Channel, LWFSpec, preset_basis, validate
from .tensor import DensityOperator, RegisterLayout, StateVector

FORMAT_VERSION = 1
INITIAL_PRESETS = ("zero", "uniform")

_TOP = {"format_version", "name", "systems", "initial_state", "agents", "announcements", "queries"}
_AGENT = {"name", "measures", "basis", "memory", "setting", "channel", "outcomes"}
_QUERY = {"target", "given", "settings"}


@dataclass(frozen=True)
class SavedQuery:
    target: dict[str, str]
    given: dict[str, str]
    settings: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ScenarioDocument:
    spec: LWFSpec
    queries: tuple[SavedQuery, ...] = ()


# ---------------------------------------------------------------- parsing helpers

def _load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioSyntaxError(e.msg, e.lineno, e.colno) from None


def _expect(obj, kind, path):
    if not isinstance(obj, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(path, f"expected {name}, got {type(obj).__name__}")
    return obj


def _fields(obj: dict, allowed: set, required: set, path: str) -> None:
    _expect(obj, dict, path)
    for k in sorted(obj):
        if k not in allowed:
            raise SchemaError(f"{path}.{k}", "unknown field")
    for k in sorted(required):
        if k not in obj:
            raise SchemaError(f"{path}.{k}", "missing field")


def _number(v, path) -> complex:
    if isinstance(v, bool):
        raise SchemaError(path, "expected a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v):
        return complex(v[0], v[1])
    raise SchemaError(path, "expected a number or [re, im]")


def _vector(v, path) -> np.ndarray:
    _expect(v, list, path)
    return np.array([_number(c, f"{path}[{k}]") for k, c in enumerate(v)], dtype=complex)


def _matrix(m, path) -> np.ndarray:
    _expect(m, list, path)
    if not m:
        raise SchemaError(path, "empty matrix")
    rows = [_vector(r, f"{path}[{k}]") for k, r in enumerate(m)]
    if len({len(r) for r in rows}) != 1:
        raise SchemaError(path, "rows of unequal length")
    return np.array(rows)


def _str_list(v, path) -> tuple[str, ...]:
    _expect(v, list, path)
    return tuple(_expect(s, str, f"{path}[{k}]") for k, s in enumerate(v))


def _assignment_obj(v, path) -> dict[str, str]:
    if isinstance(v, str):
        try:
            return parse_assignment_text(v)
        except ValueError as e:
            raise SchemaError(path, str(e)) from None
    _expect(v, dict, path)
    return {str(k): str(val) for k, val in v.items()}


# ---------------------------------------------------------------- documents

def parse_document(text: str) -> ScenarioDocument:
    """Parse JSON text into a validated scenario plus any saved queries."""
    doc = _load_json(text)
    _fields(doc, _TOP, {"format_version", "systems", "initial_state", "agents"}, "$")
    if doc["format_version"] != FORMAT_VERSION:
        raise SchemaError("$.format_version", f"unsupported version {doc['format_version']!r}")
    name = _expect(doc.get("name", "scenario"), str, "$.name")

    systems = []
    for k, s in enumerate(_expect(doc["systems"], list, "$.systems")):
        p = f"$.systems[{k}]"
        _fields(s, {"label", "dim"}, {"label", "dim"}, p)
        label = _expect(s["label"], str, f"{p}.label")
        dim = _expect(s["dim"], int, f"{p}.dim")
        if dim < 1:
            raise SchemaError(f"{p}.dim", "dimension must be positive")
        systems.append((label, dim))
    if len({lb for lb, _ in systems}) != len(systems):
        raise SchemaError("$.systems", "duplicate system label")
    layout = RegisterLayout.of(*systems)
    initial, preset = _initial(doc["initial_state"], layout)

    dims = dict(systems)
    agents = []
    for k, a in enumerate(_expect(doc["agents"], list, "$.agents")):
        agent = _agent(a, k + 1, dims, f"$.agents[{k}]")
        dims.setdefault(agent.memory, agent.dim)
        agents.append(agent)

    anns = []
    for k, ev in enumerate(_expect(doc.get("announcements", []), list, "$.announcements")):
        anns.append(_assignment_obj(ev, f"$.announcements[{k}]"))

    spec = LWFSpec(layout, tuple(agents), initial, announcements=tuple(anns), name=name,
                   initial_preset=preset)
    report = validate(spec)
    if not report.ok:
        raise ValidationFailed(report)

    queries = []
    for k, q in enumerate(_expect(doc.get("queries", []), list, "$.queries")):
        p = f"$.queries[{k}]"
        _fields(q, _QUERY, {"target", "settings"}, p)
        settings = tuple(_expect(v, int, f"{p}.settings[{j}]")
                         for j, v in enumerate(_expect(q["settings"], list, f"{p}.settings")))
        queries.append(SavedQuery(_assignment_obj(q["target"], f"{p}.target"),
                                  _assignment_obj(q.get("given", {}), f"{p}.given"), settings))
    return ScenarioDocument(spec, tuple(queries))


def parse_scenario(text: str) -> LWFSpec:
    return parse_document(text).spec


def _initial(obj, layout: RegisterLayout):
    p = "$.initial_state"
    _fields(obj, {"amplitudes", "preset", "density"}, set(), p)
    if len(obj) != 1:
        raise SchemaError(p, "give exactly one of amplitudes, preset, density")
    d = layout.total_dim
    try:
        if "preset" in obj:
            name = _expect(obj["preset"], str, f"{p}.preset")
            if name == "zero":
                amps = np.zeros(d, dtype=complex)
                amps[0] = 1
            elif name == "uniform":
                amps = np.full(d, 1 / np.sqrt(d), dtype=complex)
            else:
                raise SchemaError(f"{p}.preset", f"unknown preset {name!r}; known: {', '.join(INITIAL_PRESETS)}")
            return StateVector(layout, amps), name
        if "amplitudes" in obj:
            amps = _vector(obj["amplitudes"], f"{p}.amplitudes")
            if amps.shape[0] != d:
                raise SchemaError(f"{p}.amplitudes", f"expected {d} amplitudes, got {amps.shape[0]}")
            return StateVector(layout, amps), None
        rho = _matrix(obj["density"], f"{p}.density")
        if rho.shape != (d, d):
            raise SchemaError(f"{p}.density", f"expected a {d}x{d} matrix, got {rho.shape[0]}x{rho.shape[1]}")
        return DensityOperator(layout, rho), None
    except SchemaError:
        raise
    except LWFSError as e:
        raise SchemaError(p, str(e)) from None


def _agent(a, index: int, dims: dict, p: str) -> AgentSpec:
    _fields(a, _AGENT, {"name", "measures", "basis", "memory"}, p)
    name = _expect(a["name"], str, f"{p}.name")
    measures = _str_list(a["measures"], f"{p}.measures")
    for j, lb in enumerate(measures):
        if lb not in dims:
            raise SchemaError(f"{p}.measures[{j}]", f"unknown label {lb!r}")
    d = prod(dims[lb] for lb in measures)

    basis_obj = a["basis"]
    preset = None
    if isinstance(basis_obj, str):
        if basis_obj not in BASIS_PRESETS:
            raise SchemaError(f"{p}.basis", f"unknown preset {basis_obj!r}; known: {', '.join(BASIS_PRESETS)}")
        try:
            basis, labels = preset_basis(basis_obj, d)
        except LWFSError as e:
            raise SchemaError(f"{p}.basis", str(e)) from None
        preset = basis_obj
    else:
        basis = _matrix(basis_obj, f"{p}.basis")
        labels = ()
        if basis.shape != (d, d):
            raise SchemaError(f"{p}.basis", f"measured subset has dimension {d}, basis is {basis.shape[0]}x{basis.shape[1]}")

    mem = a["memory"]
    if isinstance(mem, dict):
        _fields(mem, {"label", "dim"}, {"label"}, f"{p}.memory")
        mem_label = _expect(mem["label"], str, f"{p}.memory.label")
        if "dim" in mem and _expect(mem["dim"], int, f"{p}.memory.dim") != d:
            raise SchemaError(f"{p}.memory.dim", f"memory dimension {mem['dim']} differs from measured dimension {d}")
    else:
        mem_label = _expect(mem, str, f"{p}.memory")

    setting = a.get("setting", "free")
    if setting not in ("free", "pinned1"):
        raise SchemaError(f"{p}.setting", "expected 'free' or 'pinned1'")

    outcomes = a.get("outcomes")
    if outcomes is not None:
        outcomes = _str_list(outcomes, f"{p}.outcomes")
        if len(outcomes) != d or len(set(outcomes)) != d:
            raise SchemaError(f"{p}.outcomes", f"need {d} distinct labels")
    else:
        outcomes = labels

    channel = None
    if a.get("channel") is not None:
        ch = a["channel"]
        cp = f"{p}.channel"
        _fields(ch, {"support", "kraus"}, {"support", "kraus"}, cp)
        support = _str_list(ch["support"], f"{cp}.support")
        kraus = tuple(_matrix(k, f"{cp}.kraus[{j}]")
                      for j, k in enumerate(_expect(ch["kraus"], list, f"{cp}.kraus")))
        if not kraus:
            raise SchemaError(f"{cp}.kraus", "at least one Kraus operator required")
        channel = Channel(support, kraus)

    return AgentSpec(index, name, measures, basis, mem_label, channel=channel,
                     pinned=setting == "pinned1", outcomes=outcomes, basis_preset=preset)


# ---------------------------------------------------------------- serialization

def _num(z: complex) -> list[float]:
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def _mat(m: np.ndarray) -> list:
    return [[_num(z) for z in row] for row in np.asarray(m)]


def _default_labels(a: AgentSpec) -> tuple[str, ...]:
    if a.basis_preset is not None:
        return preset_basis(a.basis_preset, a.dim)[1]
    return tuple(str(k) for k in range(a.dim))


def to_document(spec: LWFSpec, queries: tuple[SavedQuery, ...] = ()) -> dict:
    doc: dict = {"format_version": FORMAT_VERSION, "name": spec.name}
    doc["systems"] = [{"label": r.label, "dim": r.dim} for r in spec.systems.registers]
    st = spec.initial_state
    if spec.initial_preset is not None:
        doc["initial_state"] = {"preset": spec.initial_preset}
    elif isinstance(st, StateVector):
        doc["initial_state"] = {"amplitudes": [_num(z) for z in st.amplitudes]}
    else:
        doc["initial_state"] = {"density": _mat(st.matrix)}
    agents = []
    for a in spec.agents:
        preset_ok = a.basis_preset is not None and np.array_equal(
            a.basis, preset_basis(a.basis_preset, a.dim)[0])
        ad: dict = {
            "name": a.name,
            "measures": list(a.measures),
            "basis": a.basis_preset if preset_ok else _mat(a.basis),
            "memory": a.memory,
            "setting": "pinned1" if a.pinned else "free",
        }
        if a.outcomes != (_default_labels(a) if preset_ok else tuple(str(k) for k in range(a.dim))):
            ad["outcomes"] = list(a.outcomes)
        if a.channel is not None:
            ad["channel"] = {"support": list(a.channel.support), "kraus": [_mat(k) for k in a.channel.kraus]}
        agents.append(ad)
    doc["agents"] = agents
    doc["announcements"] = [dict(ev) for ev in spec.announcements]
    if queries:
        doc["queries"] = [{"target": dict(q.target), "given": dict(q.given), "settings": list(q.settings)}
                          for q in queries]
    return doc


def serialize(spec: LWFSpec, queries: tuple[SavedQuery, ...] = ()) -> str:
    """Canonical JSON text; ``parse_document(serialize(s))`` rebuilds ``s``."""
    return json.dumps(to_document(spec, queries), indent=2, ensure_ascii=False) + "\n"


def canonical(text: str) -> str:
    doc = parse_document(text)
    return serialize(doc.spec, doc.queries)


# ---------------------------------------------------------------- queries

def parse_assignment_text(text: str) -> dict[str, str]:
    """``"u=ok,w=ok"`` or ``"u=w=ok"`` to ``{"u": "ok", "w": "ok"}``."""
    out: dict[str, str] = {}
    text = text.strip()
    if not text:
        return out
    for part in text.split(","):
        pieces = [s.strip() for s in part.split("=")]
        if len(pieces) < 2 or not all(pieces):
            raise ValueError(f"malformed assignment {part!r}; expected name=value")
        *names, value = pieces
        for n in names:
            if out.get(n, value) != value:
                raise ValueError(f"conflicting values for {n}")
            out[n] = value
    return out


def parse_settings_text(text: str) -> tuple[int, ...]:
    vals = [s.strip() for s in text.strip().strip("()").split(",") if s.strip()]
    if not all(v in ("0", "1") for v in vals):
        raise ValueError(f"settings must be comma-separated bits, got {text!r}")
    return tuple(int(v) for v in vals)


def match_fraction(value: float, tolerance: float = 1e-9, max_den: int = 64) -> Optional[Fraction]:
    """The small fraction p/q (q <= max_den) within ``tolerance`` of ``value``, if any."""
    f = Fraction(value).limit_denominator(max_den)
    return f if abs(float(f) - value) <= tolerance else None


def format_fraction(f: Optional[Fraction]) -> Optional[str]:
    return None if f is None else f"{f.numerator}/{f.denominator}"


def format_value(value: float) -> str:
    return f"{value:.12f}"


# ---------------------------------------------------------------- statement files

@dataclass(frozen=True)
class StatementDocument:
    target: dict[str, str]
    given: dict[str, str]
    settings: tuple[int, ...]


def parse_statements(text: str) -> tuple[StatementDocument, ...]:
    """``{"format_version": 1, "statements": [{"given", "target", "settings"}, ...]}``."""
    doc = _load_json(text)
    _fields(doc, {"format_version", "statements"}, {"format_version", "statements"}, "$")
    if doc["format_version"] != FORMAT_VERSION:
        raise SchemaError("$.format_version", f"unsupported version {doc['format_version']!r}")
    out = []
    for k, s in enumerate(_expect(doc["statements"], list, "$.statements")):
        p = f"$.statements[{k}]"
        _fields(s, _QUERY, {"target", "settings"}, p)
        target = _assignment_obj(s["target"], f"{p}.target")
        given = _assignment_obj(s.get("given", {}), f"{p}.given")
        settings = s["settings"]
        settings = parse_settings_text(settings) if isinstance(settings, str) else tuple(
            _expect(v, int, f"{p}.settings[{j}]") for j, v in enumerate(_expect(settings, list, f"{p}.settings")))
        out.append(StatementDocument(target, given, settings))
    return tuple(out)
