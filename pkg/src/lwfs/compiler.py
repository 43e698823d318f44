"""Compile a scenario into its augmented circuit, or into the memory-free standard circuit."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import MemoryReuseDetected, ValidationFailed
from .scenario import LWFSpec, local_copy_unitary, projector_family, validate
from .tensor import DensityOperator, LinearOperator, RegisterLayout, StateVector, embed


@dataclass(frozen=True, eq=False)
class Stage:
    """One agent: copy unitary, both projector families, then the post-channel."""

    index: int
    name: str
    measures: tuple[str, ...]
    memory: str
    pinned: bool
    outcomes: tuple[str, ...]
    copy: LinearOperator
    families: dict
    channel: Optional[tuple[LinearOperator, ...]]
    # flat-layout plumbing for the evaluator
    axes: tuple[int, ...] = ()
    channel_axes: tuple[int, ...] = ()

    def family(self, x: int):
        return self.families[x]


@dataclass(frozen=True, eq=False)
class AugmentedCircuit:
    spec: LWFSpec
    layout: RegisterLayout
    stages: tuple[Stage, ...]
    initial_state: Union[StateVector, DensityOperator]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_agents(self) -> int:
        return len(self.stages)

    @property
    def is_pure(self) -> bool:
        """True when evolution can stay on state vectors."""
        return isinstance(self.initial_state, StateVector) and all(
            s.channel is None or len(s.channel) == 1 for s in self.stages
        )


def _full_initial(spec: LWFSpec, layout: RegisterLayout):
    zero = np.zeros(spec.memory_layout.total_dim, dtype=complex)
    zero[0] = 1.0
    st = spec.initial_state
    if isinstance(st, StateVector):
        return StateVector(layout, np.kron(st.amplitudes, zero))
    return DensityOperator(layout, np.kron(st.matrix, np.outer(zero, zero)))


def compile_circuit(spec: LWFSpec) -> AugmentedCircuit:
    """Augmented circuit of ``spec``; raises ValidationFailed on an invalid spec."""
    report = validate(spec)
    if not report.ok:
        raise ValidationFailed(report)
    layout = spec.full_layout
    stages = []
    for a in spec.agents:
        fams = {1: tuple(projector_family(spec, a.index, 1))}
        if not a.pinned:
            fams[0] = tuple(projector_family(spec, a.index, 0))
        channel = None
        ch_axes: tuple[int, ...] = ()
        if a.channel is not None:
            sub = layout.sub(a.channel.support)
            channel = tuple(LinearOperator(sub, k) for k in a.channel.kraus)
            ch_axes = tuple(layout.index(lb) for lb in a.channel.support)
        stages.append(Stage(
            index=a.index, name=a.name, measures=a.measures, memory=a.memory,
            pinned=a.pinned, outcomes=a.outcomes, copy=local_copy_unitary(spec, a.index),
            families=fams, channel=channel,
            axes=tuple(layout.index(lb) for lb in a.measures + (a.memory,)),
            channel_axes=ch_axes,
        ))
    return AugmentedCircuit(spec, layout, tuple(stages), _full_initial(spec, layout))


# short alias; ``compile_circuit`` stays the primary name so the builtin is not shadowed at import sites
compile = compile_circuit


def memory_touched(spec: LWFSpec, i: int) -> bool:
    """True iff a later agent measures memory ``M_i`` or its channel acts on it."""
    mem = spec.agent(i).memory
    for b in spec.agents[i:]:
        if mem in b.measures:
            return True
        if b.channel is not None and mem in b.channel.support:
            return True
    return False


@dataclass(frozen=True, eq=False)
class ReducedStage:
    """Bare measurement of ``measures`` followed by the post-channel, as an instrument.

    ``instrument[a]`` holds Kraus operators on ``support`` for outcome ``a``.
    """

    index: int
    name: str
    measures: tuple[str, ...]
    support: RegisterLayout
    projectors: tuple[LinearOperator, ...]
    instrument: tuple[tuple[np.ndarray, ...], ...]


@dataclass(frozen=True, eq=False)
class ReducedCircuit:
    layout: RegisterLayout
    stages: tuple[ReducedStage, ...]
    initial_state: Union[StateVector, DensityOperator]
    spec: Optional[LWFSpec] = None


def standard_reduction(spec: LWFSpec) -> ReducedCircuit:
    """Memory-free circuit; only legal when no memory is touched after it is written."""
    report = validate(spec)
    if not report.ok:
        raise ValidationFailed(report)
    touched = [a.index for a in spec.agents if memory_touched(spec, a.index)]
    if touched:
        raise MemoryReuseDetected(touched)
    systems = spec.systems
    full = spec.full_layout
    stages = []
    for a in spec.agents:
        extra = []
        if a.channel is not None:
            extra = [lb for lb in a.channel.support if lb != a.memory and lb not in a.measures]
        support = systems.sub(list(a.measures) + extra)
        local = full.sub(support.labels + (a.memory,))
        d, dt = a.dim, support.total_dim
        rest = dt // d
        projs, inst = [], []
        for k in range(a.dim):
            pk = np.kron(np.outer(a.basis[:, k], a.basis[:, k].conj()), np.eye(rest))
            projs.append(LinearOperator(support, pk, is_projector=True))
            if a.channel is None:
                inst.append((pk,))
                continue
            ops = []
            for kr in a.channel.kraus:
                big = embed(LinearOperator(full.sub(a.channel.support), kr), local).matrix
                big = big.reshape(dt, d, dt, d)
                for m in range(d):
                    ops.append(big[:, m, :, k] @ pk)
            inst.append(tuple(ops))
        stages.append(ReducedStage(a.index, a.name, a.measures, support, tuple(projs), tuple(inst)))
    return ReducedCircuit(systems, tuple(stages), spec.initial_state, spec)


# ---------------------------------------------------------------- dump

def checksum(matrix: np.ndarray) -> str:
    """Short stable digest of a complex matrix (rounded to 12 decimals)."""
    m = np.asarray(matrix, dtype=complex)
    r = np.round(m.real, 12) + 0.0
    i = np.round(m.imag, 12) + 0.0
    h = hashlib.sha256()
    h.update(repr(m.shape).encode())
    h.update(np.ascontiguousarray(r).tobytes())
    h.update(np.ascontiguousarray(i).tobytes())
    return h.hexdigest()[:16]


def dump(circ: AugmentedCircuit) -> str:
    """Deterministic stage listing with operator checksums."""
    lines = [f"circuit {circ.spec.name}"]
    regs = " ".join(f"{r.label}:{r.dim}" for r in circ.layout.registers)
    lines.append(f"layout {regs} (dim {circ.layout.total_dim})")
    init = circ.initial_state
    mat = init.amplitudes.reshape(-1, 1) if isinstance(init, StateVector) else init.matrix
    lines.append(f"initial {'vector' if isinstance(init, StateVector) else 'density'} sha={checksum(mat)}")
    for s in circ.stages:
        mode = "pinned1" if s.pinned else "free"
        lines.append(f"stage {s.index} {s.name} [{mode}] measures {','.join(s.measures)} -> memory {s.memory}")
        lines.append(f"  copy    on {','.join(s.copy.labels)} sha={checksum(s.copy.matrix)}")
        for x in sorted(s.families):
            for a, op in s.families[x]:
                label = "⊥" if a is None else s.outcomes[a]
                lines.append(f"  x={x} {label:<6} sha={checksum(op.matrix)}")
        if s.channel is None:
            lines.append("  channel none")
        else:
            lines.append(f"  channel on {','.join(s.channel[0].labels)} kraus={len(s.channel)}")
            for k, op in enumerate(s.channel):
                lines.append(f"    K{k} sha={checksum(op.matrix)}")
    return "\n".join(lines) + "\n"
