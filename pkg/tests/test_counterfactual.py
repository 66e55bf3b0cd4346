import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from respikit.counterfactual import (
    NEGATIVE,
    POSITIVE,
    CounterfactualResult,
    Edit,
    IndividualDescription,
    TabularPredictor,
    describe,
    edit_distance,
    explain_all,
    global_explanation,
    nearest_counterfactual,
)
from respikit.kb import UnknownNameError, build_tbox, load_ontology
from respikit.kb.model import tbox_from_edges

D = IndividualDescription.of
SYM = "hasUserInstance/hasSymptom"
TB = load_ontology().tbox


# --- worked examples ---------------------------------------------------------------


def test_identical_descriptions_cost_nothing():
    a = D("u1", ["FemaleUser", f"{SYM}:Headache"], POSITIVE)
    assert edit_distance(a, a.with_prediction(NEGATIVE), TB) == (0.0, ())


def test_gender_swap_is_single_replace():
    a = D("u1", ["FemaleUser", f"{SYM}:Headache"], POSITIVE)
    b = D("u2", ["MaleUser", f"{SYM}:Headache"], NEGATIVE)
    cost, edits = edit_distance(a, b, TB)
    assert [(e.kind, e.source, e.target) for e in edits] == [("replace", "FemaleUser", "MaleUser")]
    assert cost == pytest.approx(2 / (2 * TB.depth()))
    assert cost < 2


def test_gender_and_symptom_swap():
    a = D("u1", ["FemaleUser", f"{SYM}:Headache"], POSITIVE)
    b = D("u2", ["MaleUser", f"{SYM}:Cough"], NEGATIVE)
    cost, edits = edit_distance(a, b, TB)
    assert sorted((e.kind, e.source, e.target) for e in edits) == [("replace", "FemaleUser", "MaleUser"), ("replace", "Headache", "Cough")]
    assert cost == pytest.approx(sum(e.cost for e in edits))
    assert cost < 4


def test_context_keeps_roles_apart():
    a = D("u1", [f"{SYM}:Headache"], POSITIVE)
    b = D("u2", ["hasPreexistingCondition:Asthma"], NEGATIVE)
    _, edits = edit_distance(a, b, TB)
    assert sorted(e.kind for e in edits) == ["add", "remove"]


def test_unrelated_concepts_not_replaced():
    a = D("u1", ["FemaleUser"], POSITIVE)
    b = D("u2", ["Headache"], NEGATIVE)
    cost, edits = edit_distance(a, b, TB)
    assert cost == 2.0 and sorted(e.kind for e in edits) == ["add", "remove"]


def test_unknown_concept_errors():
    with pytest.raises(UnknownNameError):
        edit_distance(D("u1", ["Martian"], POSITIVE), D("u2", [], NEGATIVE), TB)


def test_edit_validation():
    with pytest.raises(ValueError):
        Edit("swap", "A", "B", 1.0)
    with pytest.raises(ValueError):
        Edit("add", None, "B", 0.0)
    with pytest.raises(ValueError):
        D("u1", [], "maybe")


# --- nearest -------------------------------------------------------------------------


def test_nearest_picks_gender_twin():
    x = D("u1", ["FemaleUser", "UserAged18to29", f"{SYM}:Headache"], POSITIVE)
    pool = [
        D("n1", ["MaleUser", "UserAged70to79", f"{SYM}:Fatigue"], NEGATIVE),
        D("n2", ["MaleUser", "UserAged18to29", f"{SYM}:Headache"], NEGATIVE),
        D("n3", ["FemaleUser"], NEGATIVE),
    ]
    r = nearest_counterfactual(x, pool, TB)
    assert r.target == "n2" and len(r.edits) == 1 and r.edits[0].kind == "replace"


def test_pool_of_one_and_errors():
    x = D("u1", ["FemaleUser"], POSITIVE)
    far = D("z", ["MaleUser", "UserAged80Plus", f"{SYM}:Fever", f"{SYM}:Fatigue"], NEGATIVE)
    assert nearest_counterfactual(x, [far], TB).target == "z"
    with pytest.raises(ValueError):
        nearest_counterfactual(x, [], TB)
    with pytest.raises(ValueError):
        nearest_counterfactual(x, [D("p", [], POSITIVE)], TB)


def test_tie_break_by_individual_id():
    x = D("u1", ["FemaleUser"], POSITIVE)
    pool = [D("n9", ["MaleUser"], NEGATIVE), D("n2", ["MaleUser"], NEGATIVE), D("n5", ["MaleUser"], NEGATIVE)]
    for perm in itertools.permutations(pool):
        assert nearest_counterfactual(x, list(perm), TB).target == "n2"


# --- brute-force oracle on small random hierarchies -----------------------------------


@st.composite
def small_world(draw):
    n = draw(st.integers(2, 8))
    edges = []
    for i in range(n):
        parents = draw(st.sets(st.integers(0, i - 1), max_size=2)) if i else set()
        edges.append((f"K{i}", [f"K{p}" for p in parents]))
    tb = tbox_from_edges(edges)
    names = [f"K{i}" for i in range(n)]
    tagged = st.tuples(st.sampled_from(["", "r"]), st.sampled_from(names))
    x = D("x", draw(st.sets(tagged, max_size=6)), POSITIVE)
    pool = [D(f"p{j:02d}", draw(st.sets(tagged, max_size=6)), NEGATIVE) for j in range(draw(st.integers(1, 20)))]
    return tb, edges, x, pool


def oracle_tools(edges):
    names = [c for c, _ in edges]
    idx = {c: i for i, c in enumerate(names)}
    n = len(names)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    anc = {c: {c} for c in names}
    for c, ps in edges:
        for p in ps:
            dist[idx[c], idx[p]] = dist[idx[p], idx[c]] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    for c, _ in edges:  # parents precede children, so one pass suffices
        for p in dict(edges)[c]:
            anc[c] |= anc[p]

    def depth(c):
        ps = dict(edges)[c]
        return 0 if not ps else 1 + max(depth(p) for p in ps)

    scale = 2 * max(max(depth(c) for c in names), 1)

    def replace(a, b):
        if a[0] != b[0] or not (anc[a[1]] & anc[b[1]]):
            return None
        return dist[idx[a[1]], idx[b[1]]] / scale

    return replace


def brute_cost(x, y, replace):
    src = sorted((c.context, c.concept) for c in x.concepts - y.concepts)
    dst = sorted((c.context, c.concept) for c in y.concepts - x.concepts)
    best = np.inf

    def go(i, used, acc):
        nonlocal best
        if acc >= best:
            return
        if i == len(src):
            best = min(best, acc + (len(dst) - len(used)))
            return
        go(i + 1, used, acc + 1)
        for j, t in enumerate(dst):
            if j not in used:
                r = replace(src[i], t)
                if r is not None:
                    go(i + 1, used | {j}, acc + r)

    go(0, frozenset(), 0.0)
    return best


@settings(max_examples=80, deadline=None)
@given(small_world())
def test_matches_exhaustive_minimum(world):
    tb, edges, x, pool = world
    replace = oracle_tools(edges)
    costs = [brute_cost(x, p, replace) for p in pool]
    r = nearest_counterfactual(x, pool, tb)
    assert r.cost == pytest.approx(min(costs), abs=1e-9)
    assert r.target == min(p.individual for p, c in zip(pool, costs) if abs(c - min(costs)) <= 1e-12)
    for p, c in zip(pool[:5], costs):
        assert edit_distance(x, p, tb)[0] == pytest.approx(c, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(small_world())
def test_distance_symmetric(world):
    tb, _, x, pool = world
    y = pool[0]
    ab, _ = edit_distance(x, y, tb)
    ba, _ = edit_distance(y.with_prediction(POSITIVE), x.with_prediction(NEGATIVE), tb)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert edit_distance(x, x.with_prediction(NEGATIVE), tb)[0] == 0


@settings(max_examples=40, deadline=None)
@given(small_world())
def test_applying_edits_reaches_target(world):
    tb, _, x, pool = world
    y = pool[0]
    _, edits = edit_distance(x, y, tb)
    held = {(c.context, c.concept) for c in x.concepts}
    for e in edits:
        if e.source:
            held.remove((e.context, e.source))
        if e.target:
            held.add((e.context, e.target))
    assert held == {(c.context, c.concept) for c in y.concepts}


# --- global ------------------------------------------------------------------------------


def result(src, *keys):
    return CounterfactualResult(src, "t", tuple(Edit(k, s, t, 1.0) for k, s, t in keys), float(len(keys)))


def test_gender_dominates_global_table():
    g = "replace", "FemaleUser", "MaleUser"
    results = [result(f"u{i}", g, ("add", None, ("Fever", "Fatigue", "Headache")[i % 3])) if i < 7 else result(f"u{i}", ("remove", "Smoker", None)) for i in range(10)]
    table = global_explanation(results)
    assert table.rows[0][:4] == ("replace", "FemaleUser", "MaleUser", 7)
    assert table.n_results == 10


def test_single_and_disjoint_results():
    one = global_explanation([result("a", ("add", None, "Fever"))])
    assert [r[3] for r in one.rows] == [1]
    two = global_explanation([result("a", ("add", None, "Fever")), result("b", ("remove", "Smoker", None))])
    assert sorted(r[3] for r in two.rows) == [1, 1]
    with pytest.raises(ValueError):
        global_explanation([])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.sampled_from([("add", None, "A"), ("remove", "B", None), ("replace", "C", "D")]), max_size=4), min_size=1, max_size=8))
def test_global_counts_conserve_edits(edit_lists):
    results = [result(f"u{i}", *keys) for i, keys in enumerate(edit_lists)]
    table = global_explanation(results)
    assert table.total_edits == sum(len(k) for k in edit_lists) == sum(r[3] for r in table.rows)
    counts = [r[3] for r in table.rows]
    assert counts == sorted(counts, reverse=True)


# --- descriptions and end to end --------------------------------------------------------


def test_describe_tags_context_and_hides_label(tmp_path):
    from helpers import SUB_A, USER_A, write_profile

    from respikit.kb import assert_dataset, instance_name, user_name

    write_profile(tmp_path)
    kb = assert_dataset(tmp_path)
    text = {str(c) for c in describe(kb, user_name(USER_A), POSITIVE).concepts}
    assert "FemaleUser" in text
    assert "hasUserInstance/hasSymptom:Headache" in text
    assert "hasUserInstance:Smoker" in text
    assert not any("PositivePCR" in t or "DeclaredCovidPositive" in t for t in text)
    assert instance_name(SUB_A)  # individual names stay stable
    with pytest.raises(UnknownNameError):
        describe(kb, "nobody", POSITIVE)


def test_explain_all_with_tabular_predictor():
    tb, _ = build_tbox()
    people = [
        D("a", ["FemaleUser", f"{SYM}:Headache"], NEGATIVE),
        D("b", ["MaleUser", f"{SYM}:Headache"], NEGATIVE),
        D("c", ["MaleUser"], NEGATIVE),
    ]
    predict = TabularPredictor(tb, {"FemaleUser": 1.0})
    labelled = [p.with_prediction(predict(p)) for p in people]
    results, table = explain_all(labelled, tb)
    assert [r.source for r in results] == ["a"]
    assert results[0].target == "b"
    assert table.rows[0][:3] == ("replace", "FemaleUser", "MaleUser")
    assert explain_all([p.with_prediction(NEGATIVE) for p in people], tb) == ([], None)
