import json

import pytest
from hypothesis import given, strategies as st

from orsgg.graph import SceneGraph, Triplet
from orsgg.sterility import DEFAULT_POLICY, SterilityPolicy, detect_breach, is_breach_triplet

from conftest import graphs, triplets


def test_examples():
    assert is_breach_triplet(Triplet("nurse", "circulator", "touching"))
    assert is_breach_triplet(Triplet("anaesthetist", "instrument_table", "holding"))
    assert not is_breach_triplet(Triplet("nurse", "circulator", "close_to"))
    assert not is_breach_triplet(Triplet("head_surgeon", "patient", "touching"))
    assert not is_breach_triplet(Triplet("circulator", "monitor", "touching"))
    g = SceneGraph(0, (Triplet("head_surgeon", "saw", "holding"), Triplet("student", "drape", "touching")))
    assert detect_breach(g) == (True, [Triplet("student", "drape", "touching")])
    assert detect_breach(SceneGraph()) == (False, [])


@given(graphs(), st.lists(triplets(), max_size=4))
def test_monotone_in_triplets(g, extra):
    bigger = SceneGraph(g.timepoint_id, tuple(dict.fromkeys(g.triplets + tuple(extra))))
    if detect_breach(g)[0]:
        assert detect_breach(bigger)[0]


@given(graphs())
def test_order_invariant(g):
    rev = SceneGraph(g.timepoint_id, tuple(reversed(g.triplets)))
    assert detect_breach(g)[0] == detect_breach(rev)[0]
    assert set(detect_breach(g)[1]) == set(detect_breach(rev)[1])


@given(graphs())
def test_breach_iff_offending_triplet(g):
    flag, bad = detect_breach(g)
    assert flag == any(is_breach_triplet(t) for t in g.triplets) == bool(bad)


def test_policy_round_trip_and_validation(tmp_path):
    p = tmp_path / "policy.json"
    p.write_text(json.dumps(DEFAULT_POLICY.to_json()))
    assert SterilityPolicy.load(p) == DEFAULT_POLICY
    with pytest.raises(ValueError):
        SterilityPolicy.from_json({"sterile": ["nurse"], "non_sterile": ["nurse"]})
    with pytest.raises(ValueError):
        SterilityPolicy.from_json({"sterile": ["wizard"], "non_sterile": []})
    with pytest.raises(ValueError):
        SterilityPolicy.from_json({"version": 99, "sterile": [], "non_sterile": []})
    narrow = SterilityPolicy(frozenset({"nurse"}), frozenset({"circulator"}), frozenset({"holding"}))
    assert not is_breach_triplet(Triplet("nurse", "circulator", "touching"), narrow)
    assert is_breach_triplet(Triplet("circulator", "nurse", "holding"), narrow)
