import itertools

import numpy as np
import pytest

from lwfs.compiler import checksum, compile_circuit, dump, memory_touched, standard_reduction
from lwfs.errors import MemoryReuseDetected, ValidationFailed
from lwfs.library import bell_local_spec, fr_entanglement_spec, fr_prepare_measure_spec, wigner_original_spec
from lwfs.predict import distribution, reduced_marginal
from lwfs.scenario import AgentSpec, LWFSpec, computational_basis
from lwfs.tensor import RegisterLayout, StateVector


def test_fr_circuit_shape():
    circ = compile_circuit(fr_entanglement_spec())
    assert circ.layout.labels == ("R", "S", "A", "B", "U", "W")
    assert circ.layout.total_dim == 4 * 2 * 2 * 4 * 4
    assert [s.name for s in circ.stages] == ["a", "b", "u", "w"]
    assert set(circ.stages[0].families) == {0, 1}
    assert set(circ.stages[2].families) == {1}
    assert circ.is_pure


def test_initial_state_has_memories_in_zero():
    circ = compile_circuit(fr_entanglement_spec())
    amps = circ.initial_state.amplitudes.reshape(circ.layout.dims)
    assert np.allclose(amps[:, :, 1:, :, :, :], 0)
    assert np.allclose(amps[:, :, 0, 0, 0, 0].reshape(-1), np.array([1, 0, 1, 1]) / np.sqrt(3))


def test_invalid_spec_is_refused():
    lay = RegisterLayout.of(("S", 2))
    spec = LWFSpec(lay, (AgentSpec(1, "f", ("M",), computational_basis(2), "M"),), StateVector(lay, [1, 0]))
    with pytest.raises(ValidationFailed) as e:
        compile_circuit(spec)
    assert "M_i ∈ 𝚂_i" in e.value.report.codes()


def test_memory_touched():
    spec = fr_entanglement_spec()
    assert [memory_touched(spec, i) for i in (1, 2, 3, 4)] == [True, True, False, False]
    pm = fr_prepare_measure_spec()
    assert memory_touched(pm, 1) and memory_touched(pm, 2)


def test_standard_reduction_refuses_reused_memories():
    with pytest.raises(MemoryReuseDetected) as e:
        standard_reduction(fr_entanglement_spec())
    assert e.value.indices == (1, 2)
    with pytest.raises(MemoryReuseDetected):
        standard_reduction(wigner_original_spec())


def test_standard_reduction_matches_augmented_on_bell_pair():
    spec = bell_local_spec()
    circ = compile_circuit(spec)
    rc = standard_reduction(spec)
    for x in itertools.product((0, 1), repeat=3):
        assert np.allclose(reduced_marginal(rc, x), distribution(circ, x), atol=1e-12)


def test_dump_is_deterministic_and_lists_every_stage():
    text = dump(compile_circuit(fr_prepare_measure_spec()))
    again = dump(compile_circuit(fr_prepare_measure_spec()))
    assert text == again
    assert text.count("\nstage ") == 4
    assert "channel on R,S kraus=1" in text


def test_checksum_ignores_negative_zero():
    assert checksum(np.array([[0.0]])) == checksum(np.array([[-0.0]]))
    assert checksum(np.eye(2)) != checksum(np.eye(3))
