"""Dense complex linear algebra over ordered multi-register Hilbert spaces.

Amplitudes are indexed big-endian in register declaration order: the first
register is the most significant digit of the flat index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    BasisNotOrthonormal,
    DimensionMismatch,
    KrausIncomplete,
    NotAProjector,
    NotUnitary,
    NumericalIntegrityError,
    SizeGuardExceeded,
    UnknownLabel,
)

EPS = 1e-9
SIZE_GUARD = 2**20


class Register(NamedTuple):
    label: str
    dim: int


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered registers. ``classical`` labels may have dimension 1."""

    registers: tuple[Register, ...] = ()
    classical: frozenset[str] = frozenset()
    size_guard: int = field(default=SIZE_GUARD, compare=False)

    def __post_init__(self):
        regs = tuple(Register(str(r[0]), int(r[1])) for r in self.registers)
        object.__setattr__(self, "registers", regs)
        labels = [r.label for r in regs]
        if len(set(labels)) != len(labels):
            raise DimensionMismatch(f"duplicate register labels in {labels}")
        for r in regs:
            floor = 1 if r.label in self.classical else 2
            if r.dim < floor:
                raise DimensionMismatch(f"register {r.label} has dimension {r.dim} < {floor}")
        if self.total_dim > self.size_guard:
            raise SizeGuardExceeded(f"total dimension {self.total_dim} exceeds {self.size_guard}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple(Register(label, dim) for label, dim in pairs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def __len__(self) -> int:
        return len(self.registers)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"unknown register label {label!r}") from None

    def dim(self, label: str) -> int:
        return self.registers[self.index(label)].dim

    def sub(self, labels: Iterable[str]) -> "RegisterLayout":
        """Sub-layout in the order given by ``labels``."""
        labels = list(labels)
        return RegisterLayout(
            tuple(self.registers[self.index(lb)] for lb in labels),
            self.classical & frozenset(labels),
        )

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers, self.classical | other.classical)


def _as_layout(layout: Union[RegisterLayout, Sequence[tuple[str, int]]]) -> RegisterLayout:
    if isinstance(layout, RegisterLayout):
        return layout
    return RegisterLayout(tuple(Register(lb, d) for lb, d in layout))


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.total_dim:
            raise DimensionMismatch(
                f"{amps.shape[0]} amplitudes for layout of dimension {self.layout.total_dim}"
            )
        if self.normalized and abs(np.vdot(amps, amps).real - 1.0) > EPS:
            raise DimensionMismatch("state flagged normalized has squared norm != 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()),
                               normalized=self.normalized)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    layout: RegisterLayout
    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise DimensionMismatch(f"density matrix shape {mat.shape} for dimension {n}")
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > EPS:
            raise DimensionMismatch("density matrix is not Hermitian")
        if self.normalized:
            if abs(np.trace(mat).real - 1.0) > EPS:
                raise DimensionMismatch("density matrix flagged normalized has trace != 1")
            if n and np.linalg.eigvalsh(mat).min() < -EPS:
                raise DimensionMismatch("density matrix has a negative eigenvalue")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Operator on the registers of ``support``; identity elsewhere when embedded."""

    support: RegisterLayout
    matrix: np.ndarray
    is_projector: bool = False
    is_unitary: bool = False

    def __post_init__(self):
        support = _as_layout(self.support)
        object.__setattr__(self, "support", support)
        mat = np.asarray(self.matrix, dtype=complex)
        n = support.total_dim
        if mat.shape != (n, n):
            raise DimensionMismatch(f"operator shape {mat.shape} over support of dimension {n}")
        if self.is_projector:
            if (np.max(np.abs(mat @ mat - mat), initial=0.0) > EPS
                    or np.max(np.abs(mat - mat.conj().T), initial=0.0) > EPS):
                raise NotAProjector("operator flagged as projector is not idempotent and Hermitian")
        if self.is_unitary and np.max(np.abs(mat.conj().T @ mat - np.eye(n)), initial=0.0) > EPS:
            raise NotUnitary("operator flagged as unitary fails U^dagger U = 1")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.support.labels


State = Union[StateVector, DensityOperator]


def clamp_probability(p: float) -> float:
    """Clamp values within ``EPS`` of [0, 1]; anything further out is an error."""
    if p < 0.0:
        if p < -EPS:
            raise NumericalIntegrityError(f"probability {p!r} below -eps")
        return 0.0
    if p > 1.0:
        if p > 1.0 + EPS:
            raise NumericalIntegrityError(f"probability {p!r} above 1 + eps")
        return 1.0
    return p


def apply_local(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int],
                sub_dims: Sequence[int]) -> np.ndarray:
    """Contract ``matrix`` (over ``sub_dims``) into ``tensor`` along ``axes``.

    ``tensor`` has one axis per register (possibly more, e.g. the column
    axes of a density tensor); the returned tensor keeps the axis order.
    """
    k = len(axes)
    op = matrix.reshape(tuple(sub_dims) * 2)
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _axes_for(op: LinearOperator, layout: RegisterLayout) -> list[int]:
    axes = []
    for reg in op.support.registers:
        i = layout.index(reg.label)
        if layout.registers[i].dim != reg.dim:
            raise DimensionMismatch(
                f"register {reg.label} has dimension {reg.dim} in operator, "
                f"{layout.registers[i].dim} in layout"
            )
        axes.append(i)
    return axes


def embed(op: LinearOperator, layout: RegisterLayout) -> LinearOperator:
    """Full-space operator acting as ``op`` on its support and identity elsewhere."""
    axes = _axes_for(op, layout)
    n = layout.total_dim
    ident = np.eye(n, dtype=complex).reshape(layout.dims * 2)
    full = apply_local(ident, op.matrix, axes, op.support.dims).reshape(n, n)
    return LinearOperator(layout, full, is_projector=op.is_projector, is_unitary=op.is_unitary)


def _apply_matrix(mat: np.ndarray, axes: list[int], sub_dims: tuple[int, ...], state: State) -> np.ndarray:
    dims = state.layout.dims
    if isinstance(state, StateVector):
        t = state.amplitudes.reshape(dims)
        return apply_local(t, mat, axes, sub_dims).reshape(-1)
    m = len(dims)
    t = state.matrix.reshape(dims * 2)
    t = apply_local(t, mat, axes, sub_dims)
    t = apply_local(t, mat.conj(), [m + a for a in axes], sub_dims)
    n = state.layout.total_dim
    return t.reshape(n, n)


def kraus_completeness_error(kraus: Sequence[np.ndarray]) -> float:
    """max |sum K^dagger K - 1| for a Kraus list."""
    n = kraus[0].shape[0]
    total = sum(k.conj().T @ k for k in kraus)
    return float(np.max(np.abs(total - np.eye(n))))


def apply(op: Union[LinearOperator, Sequence[LinearOperator]], state: State,
          trace_preserving: bool = True) -> State:
    """Apply an operator, or a channel given as a list of Kraus operators.

    A single operator acts as A|psi> or A rho A^dagger. A Kraus list acts
    as sum_k K rho K^dagger and always returns a density operator unless it
    has exactly one element.
    """
    if isinstance(op, LinearOperator):
        axes = _axes_for(op, state.layout)
        out = _apply_matrix(op.matrix, axes, op.support.dims, state)
        keeps_norm = state.normalized and op.is_unitary
        if isinstance(state, StateVector):
            return StateVector(state.layout, out, normalized=keeps_norm)
        return DensityOperator(state.layout, out, normalized=keeps_norm)

    kraus = list(op)
    if not kraus:
        raise KrausIncomplete("empty Kraus list")
    support = kraus[0].support
    for k in kraus:
        if k.support.registers != support.registers:
            raise DimensionMismatch("Kraus operators must share one support")
    if trace_preserving and kraus_completeness_error([k.matrix for k in kraus]) > EPS:
        raise KrausIncomplete("sum of K^dagger K differs from the identity")
    if len(kraus) == 1:
        out = apply(kraus[0], state)
        normalized = state.normalized and trace_preserving
        if isinstance(out, StateVector):
            return StateVector(out.layout, out.amplitudes, normalized=normalized)
        return DensityOperator(out.layout, out.matrix, normalized=normalized)
    rho = state.to_density() if isinstance(state, StateVector) else state
    axes = _axes_for(kraus[0], rho.layout)
    total = sum(_apply_matrix(k.matrix, axes, support.dims, rho) for k in kraus)
    return DensityOperator(rho.layout, total, normalized=rho.normalized and trace_preserving)


def born_probability(state: State, projector: LinearOperator) -> float:
    """<psi|P|psi> or tr[P rho], clamped to [0, 1]."""
    if not projector.is_projector:
        raise NotAProjector("born_probability needs an operator flagged as projector")
    axes = _axes_for(projector, state.layout)
    out = _apply_matrix_left(projector.matrix, axes, projector.support.dims, state)
    if isinstance(state, StateVector):
        p = float(np.vdot(state.amplitudes, out).real)
    else:
        p = float(np.trace(out).real)
    return clamp_probability(p)


def _apply_matrix_left(mat, axes, sub_dims, state):
    dims = state.layout.dims
    if isinstance(state, StateVector):
        return apply_local(state.amplitudes.reshape(dims), mat, axes, sub_dims).reshape(-1)
    n = state.layout.total_dim
    t = apply_local(state.matrix.reshape(dims * 2), mat, axes, sub_dims)
    return t.reshape(n, n)


def check_basis(basis: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Return ``basis`` as a complex array after checking its columns are orthonormal."""
    b = np.asarray(basis, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise BasisNotOrthonormal(f"basis must be a square matrix, got shape {b.shape}")
    if dim is not None and b.shape[0] != dim:
        raise DimensionMismatch(f"basis of dimension {b.shape[0]} for a register of dimension {dim}")
    if np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0])), initial=0.0) > EPS:
        raise BasisNotOrthonormal("basis columns are not orthonormal")
    return b


def shift_matrix(d: int, k: int = 1) -> np.ndarray:
    """|m> -> |m + k mod d>."""
    x = np.zeros((d, d), dtype=complex)
    for m in range(d):
        x[(m + k) % d, m] = 1.0
    return x


def controlled_copy_unitary(basis: np.ndarray, control: Union[Register, Sequence[Register]],
                            target: Register) -> LinearOperator:
    """|b_a>|m> -> |b_a>|m + a mod d>, with b_a the columns of ``basis``.

    ``control`` is one register or a sequence of registers spanning the
    measured subspace (in the listed order).
    """
    controls = [control] if isinstance(control, Register) else [Register(*c) for c in control]
    d = int(np.prod([c.dim for c in controls]))
    target = Register(*target)
    b = check_basis(basis, d)
    if target.dim != d:
        raise DimensionMismatch(f"target dimension {target.dim} != control dimension {d}")
    u = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        proj = np.outer(b[:, a], b[:, a].conj())
        u += np.kron(proj, shift_matrix(d, a))
    return LinearOperator(RegisterLayout(tuple(controls) + (target,)), u, is_unitary=True)


def partial_trace(rho: State, keep: Iterable[str]) -> DensityOperator:
    """Reduced state on ``keep`` (kept in layout order)."""
    if isinstance(rho, StateVector):
        rho = rho.to_density()
    keep = set(keep)
    layout = rho.layout
    for lb in keep:
        layout.index(lb)
    dims = layout.dims
    m = len(dims)
    t = rho.matrix.reshape(dims * 2)
    row = list(range(m))
    col = [m + i if layout.labels[i] in keep else i for i in range(m)]
    kept = [i for i in range(m) if layout.labels[i] in keep]
    out_idx = kept + [m + i for i in kept]
    t = np.einsum(t, row + col, out_idx)
    new_layout = layout.sub([layout.labels[i] for i in kept])
    n = new_layout.total_dim
    return DensityOperator(new_layout, t.reshape(n, n), normalized=rho.normalized)


def projector_onto(vector: np.ndarray, support: RegisterLayout) -> LinearOperator:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return LinearOperator(support, np.outer(v, v.conj()), is_projector=True)


def product_state(layout: RegisterLayout, *vectors: np.ndarray, normalized: bool = True) -> StateVector:
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, np.asarray(v, dtype=complex))
    return StateVector(layout, out, normalized=normalized)


def basis_state(layout: RegisterLayout, digits: Sequence[int]) -> StateVector:
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[np.ravel_multi_index(tuple(digits), layout.dims)] = 1.0
    return StateVector(layout, amps)
