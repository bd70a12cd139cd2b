import math
from dataclasses import replace

import pytest
import torch

from orsgg.graph import SceneGraph, validate_graph
from orsgg.model import ModelConfig, SceneGraphModel, build_prompt
from orsgg.sample import ModalityBundle


def params(m):
    return {n: p.detach().clone() for n, p in m.named_parameters()}


def test_init_deterministic(tiny_model_config):
    a, b = SceneGraphModel(tiny_model_config), SceneGraphModel(tiny_model_config)
    pa, pb = params(a), params(b)
    assert all(torch.equal(pa[n], pb[n]) for n in pa)
    c = SceneGraphModel(replace(tiny_model_config, seed=1))
    assert not torch.equal(pa["head.weight"], params(c)["head.weight"])
    assert all(torch.count_nonzero(p) == 0 for n, p in pa.items() if n.endswith("bias") and "ln" not in n and "norm" not in n)


def test_invalid_config():
    with pytest.raises(ValueError, match="divisible"):
        SceneGraphModel(ModelConfig(d_model=8, n_heads=3))
    with pytest.raises(ValueError):
        ModelConfig(d_model=0).validate()
    assert ModelConfig.from_json(ModelConfig().to_json()) == ModelConfig()


def test_uniform_logits_loss_is_log_vocab(tiny_model_config):
    m = SceneGraphModel(tiny_model_config)
    with torch.no_grad():
        m.head.weight.zero_()
        m.head.bias.zero_()
    _, loss = m.forward([], [m.tokenizer.start_id], [m.tokenizer.end_id])
    assert loss.item() == pytest.approx(math.log(len(m.tokenizer)), rel=1e-6)


def test_causality(tiny_corpus, tiny_model_config):
    m = SceneGraphModel(replace(tiny_model_config, dtype="float64")).eval()
    s = tiny_corpus[1][3]
    pieces = m.encode_bundles([s.modalities])
    prompt = m.prompt_ids(s.modalities)
    tgt = m.target_ids(s.gt_graph)
    la, _ = m.forward_batch(pieces, [prompt], [tgt])
    tgt2 = list(tgt)
    tgt2[-2] = m.tokenizer.index["nurse"]  # last input token
    lb, _ = m.forward_batch(pieces, [prompt], [tgt2])
    assert torch.allclose(la[0, :-1], lb[0, :-1], atol=0, rtol=0)
    assert not torch.allclose(la[0, -1], lb[0, -1])


def test_left_padding_matches_single(tiny_corpus, tiny_model_config):
    m = SceneGraphModel(replace(tiny_model_config, dtype="float64")).eval()
    ss = tiny_corpus[1][:3]
    pieces = m.encode_bundles([s.modalities for s in ss])
    prompts = [m.prompt_ids(s.modalities) for s in ss]
    targets = [m.target_ids(s.gt_graph) for s in ss]
    _, joint = m.forward_batch(pieces, prompts, targets)
    tot = 0.0
    n = 0
    for i in range(3):
        _, l = m.forward_batch([pieces[i]], [prompts[i]], [targets[i]])
        tot += l.item() * len(targets[i])
        n += len(targets[i])
    assert joint.item() == pytest.approx(tot / n, rel=1e-9)


def test_text_only_forward(tiny_corpus, tiny_model_config):
    m = SceneGraphModel(tiny_model_config)
    s = tiny_corpus[1][0]
    empty = ModalityBundle()
    _, loss = m.forward([], m.prompt_ids(empty), m.target_ids(s.gt_graph))
    assert torch.isfinite(loss)
    assert build_prompt(empty) == "triplets: <s>"


def test_overlength_raises(tiny_corpus, tiny_model_config):
    m = SceneGraphModel(replace(tiny_model_config, max_seq_len=20))
    s = tiny_corpus[1][0]
    with pytest.raises(ValueError, match="max_seq_len"):
        m.forward([], m.prompt_ids(s.modalities), m.target_ids(s.gt_graph))


def test_generation_total_and_cache_consistent(tiny_corpus, tiny_model_config):
    m = SceneGraphModel(replace(tiny_model_config, dtype="float64")).eval()
    ss = tiny_corpus[1][:4]
    pieces = m.encode_bundles([s.modalities for s in ss])
    prompts = [m.prompt_ids(s.modalities) for s in ss]
    ids = m.generate_ids(pieces, prompts, 30)
    for i, s in enumerate(ss):
        g, _ = m.decode_graph(ids[i], s.timepoint_id)
        assert validate_graph(g) == []
        # Recompute greedily without the cache: same tokens.
        seq = []
        for _ in range(len(ids[i])):
            logits, _ = m.forward_batch([pieces[i]], [prompts[i] + seq], [[]])
            seq.append(int(logits[0, -1].argmax()))
        assert seq == ids[i]
    assert m.generate_ids(pieces, prompts, 0) == [[], [], [], []]
