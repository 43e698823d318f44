import itertools

import pytest

from lwfs.epistemic import (
    CERTAIN,
    IMPOSSIBLE,
    AssumptionSet,
    KnowledgeBase,
    QuantumModel,
    chain,
    check_setting_independence,
    check_single_outcome,
    conclusion,
    derive_statement,
    enumerate_statements,
    inherit,
    paradox_scan,
    render_scan,
    render_statement,
    strip_settings,
    violation_label,
)
from lwfs.errors import (
    BudgetExceeded,
    GivensNotEntailed,
    IndependenceNotVerified,
    NotChainable,
    SettingMismatch,
)
from lwfs.library import ColliderModel, bell_local, fr_entanglement, fr_prepare_measure, wigner_original

OKOK = {"u": "ok", "w": "ok"}


@pytest.fixture(scope="module")
def fr():
    return QuantumModel(fr_entanglement().circuit)


@pytest.fixture(scope="module")
def fr_chain(fr):
    s1 = derive_statement(fr, {"b": 1}, OKOK, (0, 1, 1, 1))
    s2 = derive_statement(fr, {"a": 1}, {"b": 1}, (1, 1, 1, 1))
    s3 = derive_statement(fr, {"w": "fail"}, {"a": 1}, (1, 0, 1, 1))
    return s1, s2, s3


def test_derive_statement_polarity(fr, fr_chain):
    assert all(s.polarity == CERTAIN for s in fr_chain)
    s0 = derive_statement(fr, {"b": 0}, OKOK, (0, 1, 1, 1))
    assert s0.polarity == IMPOSSIBLE
    assert derive_statement(fr, {"a": 0}, OKOK, (1, 1, 1, 1)) is None
    assert render_statement(fr, fr_chain[0]) == "u=w=ok ⇒ b=1  S¹ x=(0,1)"


@pytest.mark.parametrize("i,j", list(itertools.permutations(range(3), 2)))
def test_fr_statements_do_not_chain(fr_chain, i, j):
    with pytest.raises((SettingMismatch, GivensNotEntailed)):
        chain(fr_chain[i], fr_chain[j])
    # same givens-compatible order with different labels is specifically a setting mismatch
    if (i, j) in ((0, 1), (1, 2)):
        with pytest.raises(SettingMismatch):
            chain(fr_chain[i], fr_chain[j])


def test_chain_is_idempotent(fr_chain):
    s = fr_chain[0]
    assert chain(s, s) == s


def test_chain_requires_certain_statements(fr):
    s0 = derive_statement(fr, {"b": 0}, OKOK, (0, 1, 1, 1))
    s1 = derive_statement(fr, {"b": 1}, OKOK, (0, 1, 1, 1))
    with pytest.raises(NotChainable):
        chain(s0, s1)


def test_chain_needs_entailed_givens(fr):
    s1 = derive_statement(fr, {"b": 1}, OKOK, (0, 1, 1, 1))
    s2 = derive_statement(fr, {"u": "fail"}, {"b": 0}, (0, 1, 1, 1))
    with pytest.raises(GivensNotEntailed):
        chain(s1, s2)


def test_stripped_statements_chain_into_contradiction(fr, fr_chain):
    stripped = [strip_settings(s, "assume-I") for s in fr_chain]
    out = chain(chain(stripped[0], stripped[1]), stripped[2])
    assert out.stripped and out.strip == "assumed"
    assert render_statement(fr, out) == "u=w=ok ⇒ b=1 ⇒ a=1 ⇒ w=fail  S¹ [I assumed]"


def test_verified_strip(fr, fr_chain):
    with pytest.raises(IndependenceNotVerified):
        strip_settings(fr_chain[0], "verified", fr)
    bl = QuantumModel(bell_local().circuit)
    s = derive_statement(bl, {"b": "+"}, {"a": 0}, (1, 1, 1))
    if s is None:
        s = derive_statement(bl, {"a": 0}, {}, (1, 0, 0))
    assert s is None or strip_settings(s, "verified", bl).strip == "verified"
    with pytest.raises(ValueError):
        strip_settings(fr_chain[0], "sometimes")


def test_independence_witnesses(fr):
    res = check_setting_independence(fr, {"a": 0}, OKOK)
    assert not res.independent
    assert res.witness == ((1, 0, 1, 1), (1, 1, 1, 1))
    wig = QuantumModel(wigner_original().circuit)
    assert not check_setting_independence(wig, {"w": "phi+"}, {}).independent


def test_untouched_scenario_is_independent():
    m = QuantumModel(bell_local().circuit)
    spec = m.spec
    for a in spec.agents:
        for v in range(a.dim):
            assert check_setting_independence(m, {a.name: v}, {}).independent
            for g in spec.agents:
                if g.index == a.index:
                    continue
                for gv in range(g.dim):
                    assert check_setting_independence(m, {a.name: v}, {g.name: gv}).independent


def test_single_outcome_check_on_handmade_kb(fr, fr_chain):
    s = fr_chain[0]
    other = derive_statement(fr, {"a": 0}, OKOK, (1, 0, 1, 1))
    kb = KnowledgeBase(0, frozenset({s, other}))
    assert check_single_outcome(kb) == []
    a = strip_settings(derive_statement(fr, {"a": 0}, OKOK, (1, 0, 1, 1)), "assume-I")
    b = strip_settings(chain(fr_chain[0], fr_chain[0]), "assume-I")
    merged = inherit(KnowledgeBase(3, frozenset({a})), KnowledgeBase(4, frozenset({b})))
    assert merged.owner == 3 and len(merged.statements) == 2


@pytest.mark.parametrize("factory", [fr_entanglement, fr_prepare_measure])
def test_no_violation_without_independence(factory):
    report = paradox_scan(QuantumModel(factory().circuit), AssumptionSet())
    assert report.ok
    assert "no violations" in render_scan(report)


@pytest.mark.parametrize("factory,okok,fail", [
    (fr_entanglement, "u=w=ok", "w=fail"),
    (fr_prepare_measure, "wbar=w=ok", "w=fail"),
])
def test_assuming_independence_reproduces_the_paradox(factory, okok, fail):
    m = QuantumModel(factory().circuit)
    report = paradox_scan(m, AssumptionSet(I=True))
    first = report.violations[0]
    assert violation_label(m, first) == "w=ok ∧ w=fail"
    assert conclusion(m, first) == f"{okok} ⇒ {fail} [I assumed]"
    final = first.witnesses[1]
    leaves = []

    def walk(s):
        if s.rule == "D":
            walk(s.sources[0])
            walk(s.sources[1])
        elif s.rule == "strip":
            leaves.append(s.origin)
    walk(final)
    free = [tuple(x[:2]) for x in leaves]
    assert free == [(0, 1), (1, 1), (1, 0)]


def test_verified_strip_alone_never_contradicts(fr):
    assert paradox_scan(fr, AssumptionSet(), verified_strip=True).ok


def test_collider_paradox():
    m = ColliderModel()
    assert paradox_scan(m, AssumptionSet()).ok
    report = paradox_scan(m, AssumptionSet(I=True))
    labels = {(violation_label(m, v), tuple(sorted(v.givens))) for v in report.violations}
    assert ("b=0 ∧ b=1", ((3, 1),)) in labels


def test_budget_is_enforced(fr):
    with pytest.raises(BudgetExceeded):
        enumerate_statements(fr, budget=5)


def test_max_chain_must_be_positive(fr):
    with pytest.raises(ValueError):
        paradox_scan(fr, max_chain=0)


def test_without_chaining_no_contradiction_is_derived(fr):
    report = paradox_scan(fr, AssumptionSet(I=True, D=False))
    labels = [violation_label(fr, v) for v in report.violations]
    assert "w=ok ∧ w=fail" not in labels
