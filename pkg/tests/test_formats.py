import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lwfs.compiler import compile_circuit
from lwfs.errors import ScenarioSyntaxError, SchemaError, ValidationFailed
from lwfs.formats import (
    SavedQuery,
    canonical,
    format_fraction,
    format_value,
    match_fraction,
    parse_assignment_text,
    parse_document,
    parse_scenario,
    parse_settings_text,
    parse_statements,
    serialize,
)
from lwfs.library import bell_local_spec, fr_entanglement_spec, fr_prepare_measure_spec, wigner_original_spec
from lwfs.predict import distribution

MINIMAL = {
    "format_version": 1,
    "systems": [{"label": "S", "dim": 2}],
    "initial_state": {"amplitudes": [[0.6, 0], [0.8, 0]]},
    "agents": [{"name": "f", "measures": ["S"], "basis": "computational", "memory": "M"}],
}


def doc(**changes):
    d = json.loads(json.dumps(MINIMAL))
    for k, v in changes.items():
        d[k] = v
    return json.dumps(d)


@pytest.mark.parametrize("make", [fr_entanglement_spec, fr_prepare_measure_spec, wigner_original_spec,
                                  bell_local_spec])
def test_library_specs_round_trip(make):
    spec = make()
    text = serialize(spec)
    back = parse_scenario(text)
    assert serialize(back) == text
    assert canonical(text) == text
    for x in [(1,) * len(spec.agents), tuple(a.pinned or 0 for a in spec.agents)]:
        assert np.allclose(distribution(compile_circuit(back), x), distribution(compile_circuit(spec), x), atol=1e-12)


def test_minimal_document_and_plain_numbers():
    spec = parse_scenario(doc(initial_state={"amplitudes": [0.6, 0.8]}))
    assert spec.agents[0].outcomes == ("0", "1")
    assert np.allclose(spec.initial_state.amplitudes, [0.6, 0.8])


def test_initial_presets():
    spec = parse_scenario(doc(initial_state={"preset": "uniform"}))
    assert np.allclose(spec.initial_state.amplitudes, [2 ** -0.5] * 2)
    with pytest.raises(SchemaError) as e:
        parse_scenario(doc(initial_state={"preset": "ghz"}))
    assert e.value.path == "$.initial_state.preset"


def test_queries_are_kept():
    d = parse_document(doc(queries=[{"target": {"f": "1"}, "settings": [1]}]))
    assert d.queries == (SavedQuery({"f": "1"}, {}, (1,)),)
    assert '"queries"' in serialize(d.spec, d.queries)


def test_syntax_error_has_position():
    with pytest.raises(ScenarioSyntaxError) as e:
        parse_scenario('{\n  "format_version": 1,\n  "systems": [,]\n}')
    assert (e.value.line, e.value.col) == (3, 15)
    assert e.value.code == "SyntaxError"


@pytest.mark.parametrize("mutation,path", [
    ({"colour": "red"}, "$.colour"),
    ({"format_version": 2}, "$.format_version"),
    ({"systems": [{"label": "S"}]}, "$.systems[0].dim"),
    ({"initial_state": {"amplitudes": [1, 0, 0]}}, "$.initial_state.amplitudes"),
    ({"agents": [{"name": "f", "measures": ["T"], "basis": "computational", "memory": "M"}]},
     "$.agents[0].measures[0]"),
    ({"agents": [{"name": "f", "measures": ["S"], "basis": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "memory": "M"}]},
     "$.agents[0].basis"),
    ({"agents": [{"name": "f", "measures": ["S"], "basis": "bell", "memory": "M"}]}, "$.agents[0].basis"),
    ({"agents": [{"name": "f", "measures": ["S"], "basis": "computational", "memory": {"label": "M", "dim": 3}}]},
     "$.agents[0].memory.dim"),
    ({"agents": [{"name": "f", "measures": ["S"], "basis": "computational", "memory": "M", "setting": "x"}]},
     "$.agents[0].setting"),
    ({"agents": [{"name": "f", "measures": ["S"], "basis": "computational", "memory": "M",
                  "outcomes": ["up"]}]}, "$.agents[0].outcomes"),
    ({"agents": [{"name": "f", "measures": ["S"], "basis": "computational", "memory": "M",
                  "channel": {"support": ["S"], "kraus": []}}]}, "$.agents[0].channel.kraus"),
])
def test_schema_errors_carry_paths(mutation, path):
    with pytest.raises(SchemaError) as e:
        parse_scenario(doc(**mutation))
    assert e.value.path == path


def test_semantic_problems_raise_validation_failed():
    bad = [{"name": "f", "measures": ["S"], "basis": [[1, 1], [0, 1]], "memory": "M"}]
    with pytest.raises(ValidationFailed) as e:
        parse_scenario(doc(agents=bad))
    assert "basis not orthonormal" in e.value.report.codes()


def test_memory_as_object_with_matching_dim():
    agents = [{"name": "f", "measures": ["S"], "basis": "hadamard", "memory": {"label": "M", "dim": 2}}]
    assert parse_scenario(doc(agents=agents)).agents[0].memory == "M"


def test_assignment_and_settings_text():
    assert parse_assignment_text("u=w=ok") == {"u": "ok", "w": "ok"}
    assert parse_assignment_text("a=0, b=1") == {"a": "0", "b": "1"}
    assert parse_assignment_text("") == {}
    for bad in ("a", "a=", "a=0,a=1"):
        with pytest.raises(ValueError):
            parse_assignment_text(bad)
    assert parse_settings_text("(0,1)") == (0, 1)
    assert parse_settings_text("1,1,0") == (1, 1, 0)
    with pytest.raises(ValueError):
        parse_settings_text("0,2")


def test_statement_files():
    text = json.dumps({"format_version": 1, "statements": [
        {"given": {"u": "ok", "w": "ok"}, "target": {"b": "1"}, "settings": "(0,1)"},
        {"target": {"a": "1"}, "given": {"b": "1"}, "settings": [1, 1]},
    ]})
    st1, st2 = parse_statements(text)
    assert st1.settings == (0, 1) and st2.given == {"b": "1"}
    with pytest.raises(SchemaError):
        parse_statements(json.dumps({"format_version": 1, "statements": [{"target": {}}]}))


def test_fraction_display():
    assert format_fraction(match_fraction(1 / 12)) == "1/12"
    assert format_fraction(match_fraction(1.0)) == "1/1"
    assert format_fraction(match_fraction(0.0)) == "0/1"
    assert match_fraction(0.1234567) is None
    assert format_fraction(None) is None
    assert format_value(1 / 3) == "0.333333333333"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 64).flatmap(lambda q: st.tuples(st.integers(0, max(q, 1)), st.just(max(q, 1)))),
       st.floats(-5e-10, 5e-10))
def test_match_fraction_recovers_small_fractions(pq, noise):
    p, q = pq
    assert match_fraction(p / q + noise) == Fraction(p, q)
