import pytest
from hypothesis import given, settings, strategies as st

from orsgg.graph import (
    MAX_TRIPLETS,
    SceneGraph,
    Triplet,
    jaccard,
    parse_triplets,
    read_graphs_jsonl,
    serialize_triplets,
    validate_graph,
    write_graphs_jsonl,
)
from orsgg.vocab import DEFAULT_VOCAB, ENTITIES, PREDICATES, VocabSpec, load_vocab

from conftest import graphs, triplets


def g(*ts, tid=0):
    return SceneGraph(tid, tuple(Triplet(*t) for t in ts))


def test_vocab_sizes_and_packaged_copy():
    assert len(ENTITIES) == 21 and len(PREDICATES) == 16
    assert load_vocab() == DEFAULT_VOCAB
    assert VocabSpec.from_json(DEFAULT_VOCAB.to_json()) == DEFAULT_VOCAB


def test_vocab_version_mismatch_rejected():
    data = DEFAULT_VOCAB.to_json()
    data["version"] = 99
    with pytest.raises(ValueError):
        VocabSpec.from_json(data)


def test_validate_examples():
    assert validate_graph(g(("head_surgeon", "patient", "drilling"))) == []
    assert any("self-loop" in p for p in validate_graph(g(("patient", "patient", "close_to"))))
    assert any("unknown entity" in p for p in validate_graph(g(("surgeonX", "patient", "drilling"))))


def test_validate_duplicates_and_size():
    t = ("head_surgeon", "patient", "drilling")
    assert any("duplicate" in p for p in validate_graph(SceneGraph(0, (Triplet(*t), Triplet(*t)))))
    many = [Triplet(s, o, "close_to") for s in ENTITIES for o in ENTITIES if s != o][: MAX_TRIPLETS + 1]
    assert any("too many" in p for p in validate_graph(SceneGraph(0, tuple(many))))


def test_serialize_examples():
    assert serialize_triplets(g(("head_surgeon", "drill", "holding"))) == "head_surgeon,drill,holding;"
    assert serialize_triplets(g(("patient", "operating_table", "lying_on"))) == "patient,operating_table,lying_on;"
    assert serialize_triplets(g()) == ""


def test_serialize_rejects_invalid():
    with pytest.raises(ValueError, match="self-loop"):
        serialize_triplets(g(("patient", "patient", "close_to")))


def test_parse_examples():
    graph, rej = parse_triplets("patient,operating_table,lying_on;")
    assert graph == g(("patient", "operating_table", "lying_on")) and rej == []
    graph, rej = parse_triplets("patient,operating_table,lying_on; garbage; patient,operating_table,lying_on;")
    assert len(graph) == 1 and rej == ["garbage"]
    assert parse_triplets("") == (g(), [])


def test_parse_rejects_self_loop_and_oov():
    graph, rej = parse_triplets("patient,patient,close_to; nurse,patient,flying;")
    assert len(graph) == 0 and len(rej) == 2


def test_jaccard_examples():
    a, b, c = (Triplet("nurse", "patient", p) for p in ("touching", "holding", "close_to"))
    assert jaccard(SceneGraph(0, (a, b)), SceneGraph(0, (a, b))) == 1.0
    assert jaccard(SceneGraph(0, (a, b)), SceneGraph(0, (b, c))) == pytest.approx(1 / 3)
    assert jaccard(SceneGraph(0, (a,)), SceneGraph(0, (c,))) == 0.0
    assert jaccard(SceneGraph(), SceneGraph()) == 1.0


@given(graphs())
def test_round_trip(graph):
    parsed, rej = parse_triplets(serialize_triplets(graph), timepoint_id=graph.timepoint_id)
    assert parsed == graph and rej == []
    assert parsed.triplets == graph.triplets  # order preserved too


@given(st.binary(max_size=200))
def test_parser_total_on_bytes(data):
    graph, rej = parse_triplets(data)
    assert validate_graph(graph) == []


@given(st.text(alphabet=",; abcdefghijklmnopqrstuvwxyz_", max_size=120))
def test_parser_output_always_valid(text):
    graph, _ = parse_triplets(text)
    assert validate_graph(graph) == []


@given(graphs(), graphs())
def test_jaccard_symmetric_and_bounded(a, b):
    j = jaccard(a, b)
    assert j == jaccard(b, a) and 0.0 <= j <= 1.0


def test_equality_is_set_semantics():
    a, b = Triplet("nurse", "patient", "touching"), Triplet("nurse", "drape", "holding")
    assert SceneGraph(3, (a, b)) == SceneGraph(3, (b, a))
    assert SceneGraph(3, (a, b)) != SceneGraph(4, (a, b))
    assert hash(SceneGraph(3, (a, b))) == hash(SceneGraph(3, (b, a)))


def test_jsonl_round_trip(tmp_path):
    gs = [g(("nurse", "patient", "touching"), tid=1), g(tid=2)]
    write_graphs_jsonl(gs, tmp_path / "g.jsonl")
    assert read_graphs_jsonl(tmp_path / "g.jsonl") == gs
