import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import cohen_kappa_score
from statsmodels.stats.inter_rater import aggregate_raters, fleiss_kappa as sm_fleiss

from taxoqual.evidence import (
    AgreementError,
    ClassificationRecord,
    EvidenceWarning,
    RecordsError,
    cohen_kappa,
    count_misclassified,
    count_unclassified,
    count_unused_constructs,
    detect_ambiguous,
    fleiss_kappa,
    intra_rater,
    load_records,
)

HEADER = "object_id,rater_id,session,dimension,node_code,gold_code\n"


def rec(obj, rater, codes=(), session="s1", gold=None, dim="d1"):
    return ClassificationRecord(obj, rater, session, tuple((dim, c) for c in codes), gold)


def labelled(pairs, dim="d1"):
    """pairs: {rater: [(object, code, session), ...]}"""
    return [rec(o, r, (c,), s, dim=dim) for r, rows in pairs.items() for o, c, s in rows]


def kappa_fixture():
    """100 objects, 70 agreements, both raters 50/50 over labels x and y."""
    a = ["x"] * 50 + ["y"] * 50
    b = ["x"] * 35 + ["y"] * 15 + ["x"] * 15 + ["y"] * 35
    return a, b


def fixture_records(session_b="s1", rater_b="b"):
    a, b = kappa_fixture()
    return labelled({
        "a": [(f"o{i}", c, "s1") for i, c in enumerate(a)],
        rater_b: [(f"o{i}", c, session_b) for i, c in enumerate(b)],
    })


# loading ----------------------------------------------------------------------

def test_load_groups_rows(six_leaf):
    text = HEADER + "x1,r1,s1,d1,A,A\nx1,r1,s1,d1,B,\nx2,r1,s1,,,C\n"
    recs = load_records(text, six_leaf)
    by = {r.object_id: r for r in recs}
    assert by["x1"].assignments == (("d1", "A"), ("d1", "B"))
    assert by["x1"].gold_code == "A"
    assert by["x2"].assignments == () and by["x2"].gold_code == "C"


def test_unknown_code_lists_row(six_leaf):
    text = HEADER + "x1,r1,s1,d1,A,\nx2,r1,s1,d1,NOPE,\n"
    with pytest.raises(RecordsError) as exc:
        load_records(text, six_leaf)
    assert exc.value.rows == [(3, "unknown node code 'NOPE' (object 'x2')")]


def test_wrong_dimension(six_leaf):
    with pytest.raises(RecordsError, match="not in dimension"):
        load_records(HEADER + "x1,r1,s1,d9,A,\n", six_leaf)


@pytest.mark.parametrize("text", [
    "object,rater\n",
    HEADER + "x1,r1,s1,d1,A\n",
    HEADER + ",r1,s1,d1,A,\n",
    HEADER + "x1,r1,s1,,A,\n",
    HEADER + "x1,r1,s1,d1,A,A\nx1,r1,s1,d1,B,B\n",
])
def test_malformed_records(text):
    with pytest.raises(RecordsError):
        load_records(text)


# counts -----------------------------------------------------------------------

def test_unclassified():
    assert count_unclassified([]) == 0
    recs = [rec("o1", "r", ("A",)), rec("o2", "r"), rec("o3", "r", ("B",)), rec("o3", "q")]
    assert count_unclassified(recs) == 1
    assert count_unclassified([rec("o1", "r", ("A",))]) == 0


def test_misclassified():
    recs = [rec("o1", "r", ("A",), gold="A"), rec("o2", "r", ("B",), gold="A"), rec("o3", "r", ("C",), gold="C"),
            rec("o4", "r", ("D", "E"), gold="E"), rec("o5", "r", (), gold="F")]
    assert count_misclassified(recs) == 2
    assert count_misclassified([r for r in recs if r.gold_code in r.codes()]) == 0


def test_misclassified_without_gold():
    recs = [rec("o1", "r", ("A",)), rec("o2", "r", ("B",))]
    with pytest.warns(EvidenceWarning):
        assert count_misclassified(recs) == 0
    with pytest.raises(RecordsError):
        count_misclassified(recs, strict=True)


def test_unused_six_leaf(six_leaf):
    n_cat, n_char, listing = count_unused_constructs(six_leaf, [rec("o1", "r", ("A",))])
    assert (n_cat, n_char) == (2, 5)
    assert listing == {"categories": ["I2", "I3"], "characteristics": ["B", "C", "D", "E", "F"]}


def test_unused_all_and_none(six_leaf):
    assert count_unused_constructs(six_leaf, [])[:2] == (3, 6)
    everything = [rec(f"o{c}", "r", (c,)) for c in "ABCDEF"]
    assert count_unused_constructs(six_leaf, everything)[:2] == (0, 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("ABCDEFI"), max_size=8), st.sampled_from("ABCDEF"))
def test_unused_monotone(codes, extra):
    from conftest import SIX_LEAF_EDGES
    from taxoqual.model import build_forest

    t = build_forest(SIX_LEAF_EDGES)
    base = [rec(f"o{i}", "r", (c if c != "I" else "I1",)) for i, c in enumerate(codes)]
    before = count_unused_constructs(t, base)[:2]
    after = count_unused_constructs(t, base + [rec("new", "r", (extra,))])[:2]
    assert after[0] <= before[0] and after[1] <= before[1]


def test_ambiguity_rules():
    assert detect_ambiguous([rec("x", "r1", ("p",)), rec("x", "r1", ("q",), dim="d2")]) == []
    found = detect_ambiguous([rec("x", "r1", ("p", "q"))])
    assert [(a.object_id, a.dimension, a.codes) for a in found] == [("x", "d1", ("p", "q"))]
    assert detect_ambiguous([rec("x", "r1", ("p",)), rec("x", "r2", ("q",))]) == []


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("xyz"), st.sampled_from("ab"), st.sampled_from(["d1", "d2"]),
                          st.lists(st.sampled_from("pqr"), min_size=0, max_size=3, unique=True)), max_size=10))
def test_ambiguity_iff_multiple(entries):
    recs = {}
    for obj, rater, dim, codes in entries:
        key = (obj, rater)
        prev = recs.get(key, ())
        recs[key] = tuple(dict.fromkeys(prev + tuple((dim, c) for c in codes)))
    records = [ClassificationRecord(o, r, "s", a) for (o, r), a in recs.items()]
    expect = any(
        len({c for d, c in rr.assignments if d == dim}) > 1 for rr in records for dim in ("d1", "d2")
    )
    assert bool(detect_ambiguous(records)) == expect


# agreement ----------------------------------------------------------------------

def test_cohen_identical():
    recs = labelled({"a": [("o1", "x", "s1"), ("o2", "y", "s1")], "b": [("o1", "x", "s1"), ("o2", "y", "s1")]})
    res = cohen_kappa(recs, "a", "b", "d1")
    assert res.value == 1.0 and res.observed_agreement == 1.0


def test_cohen_fixture():
    res = cohen_kappa(fixture_records(), "a", "b", "d1")
    assert res.observed_agreement == pytest.approx(0.7, abs=1e-12)
    assert res.expected_agreement == pytest.approx(0.5, abs=1e-12)
    assert res.value == pytest.approx(0.4, abs=1e-9)
    a, b = kappa_fixture()
    assert res.value == pytest.approx(cohen_kappa_score(a, b), abs=1e-12)


def test_cohen_chance_level():
    a = ["x", "x", "y", "y"]
    b = ["x", "y", "x", "y"]
    recs = labelled({"a": [(f"o{i}", c, "s") for i, c in enumerate(a)], "b": [(f"o{i}", c, "s") for i, c in enumerate(b)]})
    assert cohen_kappa(recs, "a", "b", "d1").value == 0.0


def test_cohen_errors():
    recs = labelled({"a": [("o1", "x", "s")], "b": [("o2", "x", "s")]})
    with pytest.raises(AgreementError, match="object sets differ"):
        cohen_kappa(recs, "a", "b", "d1")
    recs = [rec("o1", "a", ("x", "y")), rec("o1", "b", ("x",))]
    with pytest.raises(AgreementError, match="several codes"):
        cohen_kappa(recs, "a", "b", "d1")


def test_fleiss_fixture_matches_cohen_and_statsmodels():
    res = fleiss_kappa(fixture_records(), "d1")
    assert res.value == pytest.approx(0.4, abs=1e-9)
    a, b = kappa_fixture()
    table, _ = aggregate_raters(np.array([a, b]).T)
    assert res.value == pytest.approx(sm_fleiss(table), abs=1e-12)


def test_fleiss_unanimous_and_degenerate():
    recs = labelled({r: [("o1", "x", "s"), ("o2", "y", "s")] for r in "abc"})
    assert fleiss_kappa(recs, "d1").value == 1.0
    single = labelled({r: [("o1", "x", "s"), ("o2", "x", "s")] for r in "abc"})
    with pytest.warns(EvidenceWarning):
        res = fleiss_kappa(single, "d1")
    assert res.value == 1.0 and res.degenerate


def test_fleiss_unequal_raters():
    recs = labelled({"a": [("o1", "x", "s"), ("o2", "x", "s")], "b": [("o1", "x", "s")]})
    with pytest.raises(AgreementError, match="unequal"):
        fleiss_kappa(recs, "d1")


def test_intra_rater():
    recs = [r for r in fixture_records() if r.rater_id == "a"]
    again = [ClassificationRecord(r.object_id, "a", "s2", r.assignments) for r in recs]
    assert intra_rater(recs + again, "a", "s1", "s2", "d1").value == 1.0
    a, b = kappa_fixture()
    two = labelled({"a": [(f"o{i}", c, "s1") for i, c in enumerate(a)] + [(f"o{i}", c, "s2") for i, c in enumerate(b)]})
    assert intra_rater(two, "a", "s1", "s2", "d1").value == pytest.approx(0.4, abs=1e-9)
    disjoint = labelled({"a": [("o1", "x", "s1"), ("o2", "x", "s2")]})
    with pytest.raises(AgreementError):
        intra_rater(disjoint, "a", "s1", "s2", "d1")


def _random_pair(seed, n_labels=3):
    rng = random.Random(seed)
    n = rng.randint(2, 40)
    labels = "xyzw"[:n_labels]
    a = [rng.choice(labels) for _ in range(n)]
    b = [c if rng.random() < 0.5 else rng.choice(labels) for c in a]
    return a, b


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_kappa_properties(seed, k):
    a, b = _random_pair(seed, k)
    recs = labelled({"a": [(f"o{i}", c, "s") for i, c in enumerate(a)], "b": [(f"o{i}", c, "s") for i, c in enumerate(b)]})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EvidenceWarning)
        ab = cohen_kappa(recs, "a", "b", "d1")
        ba = cohen_kappa(recs, "b", "a", "d1")
    assert ab.value == pytest.approx(ba.value, abs=1e-12)
    assert (ab.value == pytest.approx(1.0, abs=1e-12)) == (ab.observed_agreement == 1.0)
    if ab.expected_agreement >= 0:
        assert ab.value <= ab.observed_agreement + 1e-12
    assert -1.0 <= ab.value <= 1.0
    if not ab.degenerate:
        assert ab.value == pytest.approx(cohen_kappa_score(a, b), abs=1e-12)
