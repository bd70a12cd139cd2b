import pytest
from hypothesis import given, strategies as st

from orsgg.graph import SceneGraph, Triplet, serialize_triplets
from orsgg.textify import serialize_robot_log, serialize_tracker, serialize_transcript
from orsgg.tokenizer import Tokenizer

from conftest import graphs


def test_transcript():
    assert serialize_transcript([]) == "speech: none"
    assert serialize_transcript(None) == "speech: none"
    lines = [(float(i), f"s{i}") for i in range(7)]
    assert serialize_transcript(lines) == "speech: s2 . s3 . s4 . s5 . s6 ."
    tied = [(1.0, "b"), (0.5, "a"), (1.0, "c")]
    assert serialize_transcript(tied) == "speech: a . b . c ."


def test_robot_log():
    assert serialize_robot_log({"phase": "robot_calibration", "action": "calibrate_array"}) == (
        "robot: phase=robot_calibration action=calibrate_array"
    )
    assert serialize_robot_log({"phase": "robot_calibration"}) == "robot: phase=robot_calibration action=none"
    rec = {"phase": "closure", "action": "standby"}
    assert serialize_robot_log(rec) == serialize_robot_log(dict(rec))


def test_tracker():
    assert serialize_tracker([]) == "tracker: none"
    one = [{"tool": "saw", "translation": [0, 0, 0], "rotation": [1, 0, 0, 0]}]
    assert serialize_tracker(one) == "tracker: saw t=(0.0,0.0,0.0) q=(1.0000,0.0000,0.0000,0.0000)"
    two = [{"tool": "saw", "translation": [1, 2, 3], "rotation": [1, 0, 0, 0]},
           {"tool": "drill", "translation": [4, 5, 6], "rotation": [0, 1, 0, 0]}]
    text = serialize_tracker(two)
    assert text.index("drill") < text.index("saw")
    with pytest.raises(ValueError):
        serialize_tracker([{"tool": "saw", "translation": [0, 0, 0], "rotation": [1, 1, 0, 0]}])


@given(graphs())
def test_tokenizer_round_trips_triplets(g):
    tok = Tokenizer()
    text = serialize_triplets(g)
    ids = tok.encode_target(text)
    assert ids[-1] == tok.end_id and tok.unk_id not in ids
    assert tok.decode(ids) == text


def test_tokenizer_covers_prompt_text(tiny_corpus):
    from orsgg.model import build_prompt

    tok = Tokenizer()
    for s in tiny_corpus[1][:40]:
        assert tok.unk_id not in tok.encode(build_prompt(s.modalities))


def test_decode_stops_at_end():
    tok = Tokenizer()
    ids = tok.encode("nurse,patient,touching;") + [tok.end_id] + tok.encode("garbage")
    assert tok.decode(ids) == "nurse,patient,touching;"
