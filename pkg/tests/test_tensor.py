import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lwfs.errors import (
    BasisNotOrthonormal,
    DimensionMismatch,
    KrausIncomplete,
    NotAProjector,
    NotUnitary,
    NumericalIntegrityError,
    SizeGuardExceeded,
    UnknownLabel,
)
from lwfs.tensor import (
    EPS,
    DensityOperator,
    LinearOperator,
    Register,
    RegisterLayout,
    StateVector,
    apply,
    basis_state,
    born_probability,
    clamp_probability,
    controlled_copy_unitary,
    embed,
    partial_trace,
    product_state,
    projector_onto,
)
from oracles import copy_unitary, dense_embed
from strategies import haar_unitary, random_pure

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_clamp_inside_and_at_edges():
    assert clamp_probability(0.3) == 0.3
    assert clamp_probability(-EPS / 2) == 0.0
    assert clamp_probability(1 + EPS / 2) == 1.0


@pytest.mark.parametrize("p", [-1e-6, 1 + 1e-6, -0.5, 2.0])
def test_clamp_rejects_far_values(p):
    with pytest.raises(NumericalIntegrityError):
        clamp_probability(p)


def test_layout_basics():
    lay = RegisterLayout.of(("A", 2), ("B", 3))
    assert lay.labels == ("A", "B")
    assert lay.total_dim == 6
    assert lay.index("B") == 1
    assert lay.sub(["B", "A"]).dims == (3, 2)
    with pytest.raises(UnknownLabel):
        lay.index("Z")


def test_layout_rejects_duplicates_and_tiny_dims():
    with pytest.raises(DimensionMismatch):
        RegisterLayout.of(("A", 2), ("A", 2))
    with pytest.raises(DimensionMismatch):
        RegisterLayout.of(("A", 1))
    assert RegisterLayout((Register("c", 1),), classical=frozenset({"c"})).total_dim == 1


def test_size_guard():
    with pytest.raises(SizeGuardExceeded):
        RegisterLayout.of(*[(f"q{k}", 2) for k in range(21)])


def test_state_validation():
    lay = RegisterLayout.of(("A", 2))
    with pytest.raises(DimensionMismatch):
        StateVector(lay, [1, 0, 0])
    with pytest.raises(DimensionMismatch):
        StateVector(lay, [1, 1])
    assert StateVector(lay, [1, 1], normalized=False).norm2 == pytest.approx(2)
    with pytest.raises(DimensionMismatch):
        DensityOperator(lay, [[1, 1], [0, 0]])
    with pytest.raises(DimensionMismatch):
        DensityOperator(lay, [[1.5, 0], [0, -0.5]])


def test_operator_flags_are_checked():
    lay = RegisterLayout.of(("A", 2))
    with pytest.raises(NotAProjector):
        LinearOperator(lay, H, is_projector=True)
    with pytest.raises(NotUnitary):
        LinearOperator(lay, np.diag([1, 0]), is_unitary=True)
    with pytest.raises(DimensionMismatch):
        LinearOperator(lay, np.eye(3))


def test_arrays_are_read_only():
    s = basis_state(RegisterLayout.of(("A", 2)), [0])
    with pytest.raises(ValueError):
        s.amplitudes[0] = 2


def test_embed_matches_dense_kron_and_permutation():
    rng = np.random.default_rng(3)
    lay = RegisterLayout.of(("A", 2), ("B", 3), ("C", 2))
    u = haar_unitary(rng, 4)
    op = LinearOperator(lay.sub(["C", "A"]), u, is_unitary=True)
    expected = dense_embed(u, ["C", "A"], list(lay.labels), dict(zip(lay.labels, lay.dims)))
    assert np.allclose(embed(op, lay).matrix, expected, atol=1e-12)


def test_apply_vector_and_density_agree():
    rng = np.random.default_rng(4)
    lay = RegisterLayout.of(("A", 3), ("B", 2))
    psi = StateVector(lay, random_pure(rng, 6))
    op = LinearOperator(lay.sub(["B"]), haar_unitary(rng, 2), is_unitary=True)
    out_v = apply(op, psi)
    out_d = apply(op, psi.to_density())
    assert np.allclose(np.outer(out_v.amplitudes, out_v.amplitudes.conj()), out_d.matrix, atol=1e-12)
    assert out_v.normalized


def test_kraus_channel_and_completeness():
    lay = RegisterLayout.of(("A", 2))
    plus = StateVector(lay, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    sub = lay.sub(["A"])
    dephase = [LinearOperator(sub, np.diag([1, 0])), LinearOperator(sub, np.diag([0, 1]))]
    rho = apply(dephase, plus)
    assert np.allclose(rho.matrix, np.eye(2) / 2)
    with pytest.raises(KrausIncomplete):
        apply([LinearOperator(sub, np.diag([1, 0]))], plus)
    with pytest.raises(KrausIncomplete):
        apply([], plus)


def test_born_probability_requires_projector_flag():
    lay = RegisterLayout.of(("A", 2))
    psi = product_state(lay, np.array([np.sqrt(0.3), np.sqrt(0.7)]))
    p1 = projector_onto([0, 1], lay)
    assert born_probability(psi, p1) == pytest.approx(0.7)
    with pytest.raises(NotAProjector):
        born_probability(psi, LinearOperator(lay, np.diag([0, 1])))


def test_copy_unitary_matches_oracle_construction():
    rng = np.random.default_rng(5)
    for d in (2, 3, 4):
        b = haar_unitary(rng, d)
        u = controlled_copy_unitary(b, Register("S", d), Register("M", d))
        assert np.allclose(u.matrix, copy_unitary(b), atol=1e-12)


def test_copy_unitary_writes_outcome_into_memory():
    lay = RegisterLayout.of(("S", 2), ("M", 2))
    u = controlled_copy_unitary(H, Register("S", 2), Register("M", 2))
    minus = np.array([1, -1]) / np.sqrt(2)
    out = apply(u, product_state(lay, minus, np.array([1, 0])))
    assert np.allclose(out.amplitudes, np.kron(minus, [0, 1]))


def test_copy_unitary_rejects_bad_inputs():
    with pytest.raises(BasisNotOrthonormal):
        controlled_copy_unitary(np.ones((2, 2)), Register("S", 2), Register("M", 2))
    with pytest.raises(DimensionMismatch):
        controlled_copy_unitary(np.eye(2), Register("S", 2), Register("M", 3))


def test_partial_trace_of_bell_pair():
    lay = RegisterLayout.of(("A", 2), ("B", 2))
    bell = StateVector(lay, np.array([1, 0, 0, 1]) / np.sqrt(2))
    red = partial_trace(bell, ["B"])
    assert red.layout.labels == ("B",)
    assert np.allclose(red.matrix, np.eye(2) / 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]), st.sampled_from([2, 3]))
def test_unitaries_preserve_norm_and_partial_trace_is_consistent(seed, da, db):
    rng = np.random.default_rng(seed)
    lay = RegisterLayout.of(("A", da), ("B", db))
    psi = StateVector(lay, random_pure(rng, da * db))
    u = LinearOperator(lay.sub(["A"]), haar_unitary(rng, da), is_unitary=True)
    out = apply(u, psi)
    assert abs(out.norm2 - 1) < 1e-12
    # a unitary on A leaves the reduced state of B untouched
    assert np.allclose(partial_trace(out, ["B"]).matrix, partial_trace(psi, ["B"]).matrix, atol=1e-12)
    rho = psi.to_density().matrix.reshape(da, db, da, db)
    assert np.allclose(partial_trace(psi, ["A"]).matrix, np.einsum("ibjb->ij", rho), atol=1e-12)
