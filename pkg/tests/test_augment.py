import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orsgg.augment import (
    AugmentConfig,
    CorpusIndex,
    augment,
    drop_modalities,
    drop_one,
    find_similar,
    mix_modalities,
)
from orsgg.graph import SceneGraph, Triplet, jaccard
from orsgg.sample import DROPPABLE, MODALITIES, bundles_equal, samples_equal, _value_equal


@pytest.fixture(scope="module")
def corpus(tiny_corpus):
    return tiny_corpus[1]


def test_drop_prob_zero_is_identity(corpus):
    cfg = AugmentConfig(drop_prob=0.0, mix_prob=0.0)
    rng = np.random.default_rng(0)
    for s in corpus[:8]:
        out, rec = augment(s, CorpusIndex(corpus), cfg, rng)
        assert out is s and rec.dropped == [] and rec.swapped == []


def test_drop_prob_one_keeps_only_room(corpus):
    cfg = AugmentConfig(drop_prob=1.0, mix_prob=0.0)
    rng = np.random.default_rng(0)
    for s in corpus[:8]:
        out, _ = drop_modalities(s, cfg, rng)
        assert out.modalities.present() == ("room_images",)
        assert out.labels() == s.labels()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_drop_never_touches_room_or_labels(corpus, seed, p):
    s = corpus[seed % len(corpus)]
    out, dropped = drop_modalities(s, AugmentConfig(drop_prob=p), np.random.default_rng(seed))
    assert out.modalities.room_images is s.modalities.room_images
    assert out.labels() == s.labels()
    assert set(out.modalities.present()) == set(s.modalities.present()) - dropped


def test_drop_stream_consumes_one_draw_per_tag(corpus):
    cfg = AugmentConfig(drop_prob=0.5)
    sparse = replace(corpus[0], modalities=corpus[0].modalities.without(*DROPPABLE))
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    drop_modalities(corpus[0], cfg, r1)
    drop_modalities(sparse, cfg, r2)
    assert r1.random() == r2.random()


def test_single_swap_is_byte_exact(corpus):
    a, b = corpus[0], corpus[5]
    out, used = mix_modalities(a, b, AugmentConfig(), np.random.default_rng(0), tags=["audio"])
    assert used == ["audio"]
    assert out.modalities.audio is b.modalities.audio
    assert out.modalities.audio.tobytes() == b.modalities.audio.tobytes()
    assert bundles_equal(out.modalities.without("audio"), a.modalities.without("audio"))
    assert out.labels() == a.labels() and out.timepoint_id == a.timepoint_id


def test_swap_skips_tags_the_donor_lacks(corpus):
    a = corpus[0]
    donor = replace(corpus[3], modalities=corpus[3].modalities.without("audio"))
    out, used = mix_modalities(a, donor, AugmentConfig(), np.random.default_rng(0), tags=["audio", "tracker"])
    assert used == ["tracker"] and out.modalities.audio is a.modalities.audio


def test_self_swap_is_identity(corpus):
    a = corpus[2]
    out, _ = mix_modalities(a, a, AugmentConfig(), np.random.default_rng(0))
    assert samples_equal(out, a)


def test_donor_examples():
    from orsgg.sample import ModalityBundle, TimepointSample

    t = [Triplet("nurse", "patient", p) for p in ("touching", "holding", "preparing", "cleaning")]
    mk = lambda i, ts: TimepointSample(i, ModalityBundle(), SceneGraph(i, tuple(ts)), "idle")
    target = mk(0, t[:2])
    pool = [target, mk(1, t[:2]), mk(2, t[:1]), mk(3, t[2:]), mk(4, [])]
    index = CorpusIndex(pool)
    assert list(index.candidates(target, 0.5)) == [1, 2]  # J = 1.0 and 0.5
    assert list(index.candidates(target, 0.6)) == [1]
    assert list(index.candidates(target, 1.0)) == [1]
    empty = mk(9, [])
    assert list(CorpusIndex([empty, mk(10, [])]).candidates(empty, 1.0)) == [1]  # J(empty, empty) = 1
    alone = CorpusIndex([target])
    assert find_similar(target, alone, AugmentConfig(), np.random.default_rng(0)) is None


def test_audit_donors_meet_threshold(corpus):
    cfg = AugmentConfig(drop_prob=0.3, mix_prob=1.0, jaccard_threshold=0.5)
    index = CorpusIndex(corpus)
    rng = np.random.default_rng(1)
    by_id = {s.timepoint_id: s for s in corpus}
    swaps = 0
    for s in corpus:
        out, rec = augment(s, index, cfg, rng)
        json.loads(rec.to_json_line())
        assert out.labels() == s.labels()
        for sw in rec.swapped:
            swaps += 1
            donor = by_id[sw["donor_id"]]
            assert sw["donor_id"] != s.timepoint_id
            assert sw["jaccard"] == jaccard(s.gt_graph, donor.gt_graph) >= cfg.jaccard_threshold
            if sw["tag"] not in rec.dropped:
                assert _value_equal(getattr(out.modalities, sw["tag"]), getattr(donor.modalities, sw["tag"]))
    assert swaps > 0


def test_augment_deterministic(corpus):
    cfg = AugmentConfig(drop_prob=0.5, mix_prob=0.5)
    index = CorpusIndex(corpus)
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(7)
        runs.append([augment(s, index, cfg, rng) for s in corpus])
    for (a, ra), (b, rb) in zip(*runs):
        assert samples_equal(a, b) and ra.to_json_line() == rb.to_json_line()


def test_drop_one(corpus):
    rng = np.random.default_rng(0)
    s = corpus[0]
    out = drop_one(s, rng)
    assert len(out.modalities.present()) == len(s.modalities.present()) - 1
    assert out.modalities.room_images is s.modalities.room_images
    bare = replace(s, modalities=s.modalities.without(*DROPPABLE))
    assert drop_one(bare, rng) is bare


def test_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(drop_prob=1.5).validate()
    with pytest.raises(ValueError):
        AugmentConfig(droppable=("room_images",)).validate()
    with pytest.raises(ValueError):
        AugmentConfig(swappable=("smell",)).validate()
    AugmentConfig().validate()
    assert set(MODALITIES) - set(DROPPABLE) == {"room_images"}
