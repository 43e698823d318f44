"""Declarative scenarios: systems, agents, bases, memories, channels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    BasisNotOrthonormal,
    DimensionMismatch,
    InvalidAgentIndex,
    LWFSError,
    PinnedSettingViolated,
    UnknownOutcome,
)
from .tensor import (
    EPS,
    DensityOperator,
    LinearOperator,
    Register,
    RegisterLayout,
    StateVector,
    controlled_copy_unitary,
    embed,
    kraus_completeness_error,
)

SQ2 = 1 / np.sqrt(2)


# ---------------------------------------------------------------- presets

def computational_basis(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def hadamard_basis(d: int = 2) -> np.ndarray:
    """|+>, |-> for qubits; the Fourier basis for larger ``d``."""
    w = np.exp(2j * np.pi / d)
    return np.array([[w ** (j * k) for k in range(d)] for j in range(d)], dtype=complex) / np.sqrt(d)


def bell_basis() -> np.ndarray:
    """Columns phi+, phi-, psi+, psi- over two qubits."""
    return np.array([
        [SQ2, SQ2, 0, 0],
        [0, 0, SQ2, SQ2],
        [0, 0, SQ2, -SQ2],
        [SQ2, -SQ2, 0, 0],
    ], dtype=complex)


def ok_fail_basis() -> np.ndarray:
    """Columns ok=(|00>-|11>)/sqrt2, fail=(|00>+|11>)/sqrt2, |01>, |10>."""
    return np.array([
        [SQ2, SQ2, 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
        [-SQ2, SQ2, 0, 0],
    ], dtype=complex)


def preset_basis(name: str, d: int) -> tuple[np.ndarray, tuple[str, ...]]:
    """Named basis with its default outcome labels."""
    if name == "computational":
        return computational_basis(d), tuple(str(k) for k in range(d))
    if name == "hadamard":
        labels = ("+", "-") if d == 2 else tuple(f"f{k}" for k in range(d))
        return hadamard_basis(d), labels
    if name == "bell":
        if d != 4:
            raise DimensionMismatch(f"bell basis needs dimension 4, got {d}")
        return bell_basis(), ("phi+", "phi-", "psi+", "psi-")
    if name == "ok_fail":
        if d != 4:
            raise DimensionMismatch(f"ok_fail basis needs dimension 4, got {d}")
        return ok_fail_basis(), ("ok", "fail", "aux01", "aux10")
    raise LWFSError(f"unknown basis preset {name!r}")


BASIS_PRESETS = ("computational", "hadamard", "bell", "ok_fail")


# ---------------------------------------------------------------- types

@dataclass(frozen=True, eq=False)
class Channel:
    """Kraus operators over ``support`` (any labels of the full layout)."""

    support: tuple[str, ...]
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        ks = []
        for k in self.kraus:
            a = np.asarray(k, dtype=complex)
            a.setflags(write=False)
            ks.append(a)
        object.__setattr__(self, "kraus", tuple(ks))

    @classmethod
    def unitary(cls, support: Sequence[str], matrix: np.ndarray) -> "Channel":
        return cls(tuple(support), (np.asarray(matrix, dtype=complex),))


@dataclass(frozen=True, eq=False)
class AgentSpec:
    """One measuring agent. ``index`` is 1-based and gives the temporal order."""

    index: int
    name: str
    measures: tuple[str, ...]
    basis: np.ndarray
    memory: str
    channel: Optional[Channel] = None
    pinned: bool = False
    outcomes: tuple[str, ...] = ()
    basis_preset: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(self.measures))
        b = np.asarray(self.basis, dtype=complex)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        if not self.outcomes:
            object.__setattr__(self, "outcomes", tuple(str(k) for k in range(b.shape[0])))
        else:
            object.__setattr__(self, "outcomes", tuple(str(o) for o in self.outcomes))

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    def outcome_index(self, value: Union[str, int]) -> int:
        """Resolve an outcome label (or integer index) to its index."""
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            if 0 <= int(value) < self.dim:
                return int(value)
            raise UnknownOutcome(f"agent {self.name} has no outcome {value}")
        s = str(value)
        if s in self.outcomes:
            return self.outcomes.index(s)
        if s.isdigit() and int(s) < self.dim:
            return int(s)
        raise UnknownOutcome(f"agent {self.name} has no outcome {s!r} (labels: {', '.join(self.outcomes)})")


@dataclass(frozen=True, eq=False)
class LWFSpec:
    systems: RegisterLayout
    agents: tuple[AgentSpec, ...]
    initial_state: Union[StateVector, DensityOperator]
    announcements: tuple[tuple[tuple[str, str], ...], ...] = ()
    name: str = "scenario"
    initial_preset: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(
            self, "announcements",
            tuple(tuple((str(k), str(v)) for k, v in dict(ev).items()) for ev in self.announcements),
        )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def agent(self, key: Union[int, str]) -> AgentSpec:
        """Agent by 1-based index or by name."""
        if isinstance(key, str):
            for a in self.agents:
                if a.name == key:
                    return a
            raise InvalidAgentIndex(f"no agent named {key!r}")
        if not 1 <= key <= len(self.agents):
            raise InvalidAgentIndex(f"agent index {key} outside 1..{len(self.agents)}")
        return self.agents[key - 1]

    def register_dims(self) -> dict[str, int]:
        """Dimensions of systems and of every memory derivable so far."""
        dims = dict(zip(self.systems.labels, self.systems.dims))
        for a in self.agents:
            if a.memory not in dims:
                dims[a.memory] = a.dim
        return dims

    @property
    def memory_layout(self) -> RegisterLayout:
        return RegisterLayout(tuple(Register(a.memory, a.dim) for a in self.agents))

    @property
    def full_layout(self) -> RegisterLayout:
        return self.systems.concat(self.memory_layout)

    @property
    def free_agents(self) -> tuple[int, ...]:
        return tuple(a.index for a in self.agents if not a.pinned)


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    code: str
    detail: str
    agent: Optional[int] = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def validate(spec: LWFSpec) -> ValidationReport:
    """List every violated scenario invariant; an empty report means well-formed."""
    out: list[Violation] = []
    sys_dims = dict(zip(spec.systems.labels, spec.systems.dims))
    memories = {a.memory: a.index for a in spec.agents}
    names = [a.name for a in spec.agents]
    if len(set(names)) != len(names):
        out.append(Violation("duplicate agent name", f"names {names}"))
    if len(set(memories)) != len(spec.agents):
        out.append(Violation("duplicate memory label", "memory labels must be unique"))
    dims = dict(sys_dims)

    for pos, a in enumerate(spec.agents, start=1):
        if a.index != pos:
            out.append(Violation("agent order", f"agent {a.name} has index {a.index}, expected {pos}", a.index))
        if a.memory in sys_dims:
            out.append(Violation("memory label clash", f"memory {a.memory} is also a system label", a.index))
        if a.memory in a.measures:
            out.append(Violation("M_i ∈ 𝚂_i", f"agent {a.name} measures its own memory {a.memory}", a.index))
        if not a.measures:
            out.append(Violation("empty measured subset", f"agent {a.name} measures nothing", a.index))
        if len(set(a.measures)) != len(a.measures):
            out.append(Violation("repeated label", f"agent {a.name} lists a label twice", a.index))
        measured_dim = 1
        for lb in a.measures:
            if lb == a.memory:
                measured_dim *= a.dim
                continue
            if lb in sys_dims:
                measured_dim *= sys_dims[lb]
            elif lb in memories:
                j = memories[lb]
                if j >= a.index:
                    out.append(Violation("future memory reference",
                                         f"agent {a.name} measures memory {lb} of agent {j}", a.index))
                measured_dim *= spec.agents[j - 1].dim
            else:
                out.append(Violation("unknown label", f"agent {a.name} measures unknown {lb}", a.index))
        b = a.basis
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            out.append(Violation("basis shape", f"agent {a.name} basis has shape {b.shape}", a.index))
        else:
            if b.shape[0] != measured_dim:
                out.append(Violation("memory dimension",
                                     f"agent {a.name}: basis dimension {b.shape[0]} != measured dimension {measured_dim}",
                                     a.index))
            if np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0])), initial=0.0) > EPS:
                out.append(Violation("basis not orthonormal", f"agent {a.name}", a.index))
        if len(a.outcomes) != a.dim or len(set(a.outcomes)) != len(a.outcomes):
            out.append(Violation("outcome labels", f"agent {a.name} needs {a.dim} distinct labels", a.index))
        dims[a.memory] = a.dim
        if a.channel is not None:
            out.extend(_check_channel(a, dims, sys_dims, memories))
    for ev in spec.announcements:
        for name, value in ev:
            try:
                spec.agent(name).outcome_index(value)
            except LWFSError as e:
                out.append(Violation("announcement", str(e)))
    st = spec.initial_state
    if st.layout.registers != spec.systems.registers:
        out.append(Violation("initial state layout", "initial state must be over the systems only"))
    else:
        norm = st.norm2 if isinstance(st, StateVector) else st.trace
        if abs(norm - 1.0) > EPS:
            out.append(Violation("initial state norm", f"norm {norm!r} != 1"))
    return ValidationReport(tuple(out))


def _check_channel(a: AgentSpec, dims, sys_dims, memories) -> list[Violation]:
    out = []
    ch = a.channel
    if not ch.support or len(set(ch.support)) != len(ch.support):
        return [Violation("channel support", f"agent {a.name} channel support {ch.support}", a.index)]
    d = 1
    for lb in ch.support:
        if lb in sys_dims:
            d *= sys_dims[lb]
        elif lb in memories:
            j = memories[lb]
            if j > a.index:
                out.append(Violation("future memory reference",
                                     f"agent {a.name} channel acts on memory {lb} of agent {j}", a.index))
            d *= dims.get(lb, 0) or 0
        else:
            out.append(Violation("unknown label", f"agent {a.name} channel acts on unknown {lb}", a.index))
    if out:
        return out
    if not ch.kraus or any(k.shape != (d, d) for k in ch.kraus):
        return [Violation("channel dimension", f"agent {a.name} Kraus operators must be {d}x{d}", a.index)]
    if kraus_completeness_error(list(ch.kraus)) > EPS:
        out.append(Violation("KrausIncomplete", f"agent {a.name} channel is not trace preserving", a.index))
    return out


# ---------------------------------------------------------------- operators

def _check_index(spec: LWFSpec, i: int) -> AgentSpec:
    if not isinstance(i, (int, np.integer)) or not 1 <= i <= spec.n_agents:
        raise InvalidAgentIndex(f"agent index {i} outside 1..{spec.n_agents}")
    return spec.agents[i - 1]


def local_copy_unitary(spec: LWFSpec, i: int) -> LinearOperator:
    """Copy unitary of agent ``i`` on its measured registers plus memory."""
    a = _check_index(spec, i)
    layout = spec.full_layout
    controls = [layout.registers[layout.index(lb)] for lb in a.measures]
    return controlled_copy_unitary(a.basis, controls, Register(a.memory, a.dim))


def measurement_unitary(spec: LWFSpec, i: int) -> LinearOperator:
    """Copy unitary of agent ``i`` embedded in systems plus all memories."""
    return embed(local_copy_unitary(spec, i), spec.full_layout)


def projector_family(spec: LWFSpec, i: int, x: int) -> list[tuple[Optional[int], LinearOperator]]:
    """[(None, identity)] for x=0; [(a, |aa><aa|)] over measured registers and memory for x=1."""
    a = _check_index(spec, i)
    if x not in (0, 1):
        raise PinnedSettingViolated(f"setting must be 0 or 1, got {x!r}")
    if a.pinned and x != 1:
        raise PinnedSettingViolated(f"agent {a.name} is pinned to setting 1")
    layout = spec.full_layout
    support = layout.sub(a.measures + (a.memory,))
    d = a.dim
    if x == 0:
        return [(None, LinearOperator(support, np.eye(d * d), is_projector=True))]
    fam = []
    for k in range(d):
        mem = np.zeros(d, dtype=complex)
        mem[k] = 1.0
        v = np.kron(a.basis[:, k], mem)
        fam.append((k, LinearOperator(support, np.outer(v, v.conj()), is_projector=True)))
    return fam


def parse_assignment(spec: LWFSpec, mapping: Mapping[str, Union[str, int]]) -> tuple[tuple[int, int], ...]:
    """Map ``{agent name: outcome label}`` to sorted ``((index, outcome), ...)``."""
    pairs = {}
    for name, value in mapping.items():
        a = spec.agent(name)
        pairs[a.index] = a.outcome_index(value)
    return tuple(sorted(pairs.items()))


def format_assignment(spec: LWFSpec, pairs) -> str:
    """``u=w=ok`` when every value shares one label, else ``a=0,b=1``."""
    items = sorted(pairs)
    if not items:
        return "∅"
    labels = [(spec.agents[i - 1].name, spec.agents[i - 1].outcomes[v]) for i, v in items]
    if len(labels) > 1 and len({lb for _, lb in labels}) == 1:
        return "=".join(n for n, _ in labels) + "=" + labels[0][1]
    return ",".join(f"{n}={lb}" for n, lb in labels)


def check_settings(spec: LWFSpec, x: Sequence[int]) -> tuple[int, ...]:
    """Validate a full setting vector (length N, entries 0/1, pins respected)."""
    x = tuple(int(v) for v in x)
    if len(x) != spec.n_agents:
        raise DimensionMismatch(f"setting vector of length {len(x)} for {spec.n_agents} agents")
    for a, v in zip(spec.agents, x):
        if v not in (0, 1):
            raise PinnedSettingViolated(f"setting for {a.name} must be 0 or 1")
        if a.pinned and v != 1:
            raise PinnedSettingViolated(f"agent {a.name} is pinned to setting 1")
    return x


def expand_settings(spec: LWFSpec, values: Sequence[int]) -> tuple[int, ...]:
    """Accept either a full vector or one value per free agent (pinned filled with 1)."""
    values = [int(v) for v in values]
    if len(values) == spec.n_agents:
        return check_settings(spec, values)
    free = spec.free_agents
    if len(values) != len(free):
        raise DimensionMismatch(
            f"expected {len(free)} free settings or {spec.n_agents} full settings, got {len(values)}"
        )
    full = [1] * spec.n_agents
    for i, v in zip(free, values):
        full[i - 1] = v
    return check_settings(spec, full)


def format_settings(spec: LWFSpec, x: Sequence[int]) -> str:
    """Free-agent components, e.g. ``(0,1)``; the full vector if nobody is free."""
    free = spec.free_agents
    shown = [x[i - 1] for i in free] if free else list(x)
    return "(" + ",".join(str(v) for v in shown) + ")"

