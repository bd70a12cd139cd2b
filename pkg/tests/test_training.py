from dataclasses import replace

import numpy as np
import pytest
import torch

from orsgg.augment import AugmentConfig
from orsgg.encoders import EncoderConfig
from orsgg.model import ModelConfig, SceneGraphModel
from orsgg.synth.dataset import DatasetConfig, generate_corpus
from orsgg.synth.scenario import SynthConfig
from orsgg.training import (
    TrainingDiverged,
    TrainSchedule,
    generate,
    grad_check,
    init_model,
    load_checkpoint,
    restrict,
    save_checkpoint,
    train,
)

SCHED = TrainSchedule(steps=6, batch_size=4, lr=1e-3)


def flat(state):
    return torch.cat([p.detach().reshape(-1) for p in state.model.parameters()])


def test_lr_zero_keeps_parameters(tiny_corpus, tiny_model_config):
    st = init_model(tiny_model_config)
    before = flat(st)
    train(st, tiny_corpus[1], AugmentConfig.none(), replace(SCHED, lr=0.0, steps=3))
    assert torch.equal(before, flat(st))


def test_identical_seeds_identical_curves(tiny_corpus, tiny_model_config):
    runs = []
    for _ in range(2):
        st = init_model(tiny_model_config)
        train(st, tiny_corpus[1], AugmentConfig(), SCHED)
        runs.append((st.losses, flat(st)))
    assert runs[0][0] == runs[1][0] and torch.equal(runs[0][1], runs[1][1])
    assert st.step == SCHED.steps


def test_empty_dataset_rejected(tiny_model_config):
    with pytest.raises(ValueError):
        train(init_model(tiny_model_config), [], AugmentConfig(), SCHED)


def test_checkpoint_round_trip_and_resume(tmp_path, tiny_corpus, tiny_model_config):
    samples = tiny_corpus[1]
    straight = init_model(tiny_model_config)
    train(straight, samples, AugmentConfig(), SCHED)

    # Train 3 steps, checkpoint, reload, finish: same result as training straight through.
    st = init_model(tiny_model_config)
    first = replace(SCHED)
    _train_until(st, samples, first, 3)
    path = save_checkpoint(st, tmp_path / "ck.bin")
    back, header = load_checkpoint(path)
    assert back.step == 3 and header["step"] == 3
    assert torch.equal(flat(back), flat(st))
    train(back, samples, AugmentConfig(), SCHED)
    assert back.step == SCHED.steps
    assert torch.allclose(flat(back), flat(straight), atol=1e-6)
    save_checkpoint(back, tmp_path / "a.bin")
    save_checkpoint(back, tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def _train_until(state, samples, schedule, stop):
    class Stop(Exception):
        pass

    def hook(step, loss):
        if step + 1 >= stop:
            raise Stop

    try:
        train(state, samples, AugmentConfig(), schedule, on_step=hook)
    except Stop:
        pass


def test_divergence_aborts_with_dump(tmp_path, tiny_corpus, tiny_model_config):
    st = init_model(tiny_model_config)
    with torch.no_grad():
        st.model.head.bias.fill_(float("nan"))
    with pytest.raises(TrainingDiverged):
        train(st, tiny_corpus[1], AugmentConfig(), SCHED, checkpoint_path=tmp_path / "ck.bin")
    assert (tmp_path / "ck.bin.diverged").exists()


def test_memory_stage_runs(tiny_corpus, tiny_model_config):
    st = init_model(tiny_model_config)
    train(st, tiny_corpus[1], AugmentConfig(), replace(SCHED, steps=2, memory_steps=2))
    assert st.step == 4
    preds = generate(st.model, tiny_corpus[1][:30], use_memory=True, max_len=12)
    assert len(preds) == 30


def test_generate_untrained_and_zero_length(tiny_corpus, tiny_model_config):
    st = init_model(tiny_model_config)
    ss = tiny_corpus[1][:5]
    preds = generate(st.model, ss, max_len=20)
    assert [p.timepoint_id for p in preds] == [s.timepoint_id for s in ss]
    assert all(len(p) == 0 for p in generate(st.model, ss, max_len=0))


def test_restrict_keeps_room_images(tiny_corpus):
    s = restrict(tiny_corpus[1][0], ["audio"])
    assert set(s.modalities.present()) == {"room_images", "audio"}
    assert s.gt_graph == tiny_corpus[1][0].gt_graph


@pytest.fixture(scope="module")
def gc_setup():
    cfg = DatasetConfig(n_scenarios=1, synth=SynthConfig(total_timepoints=24, height=32, width=32, n_points=32, skew=0.0))
    _, samples = generate_corpus(cfg)
    enc = EncoderConfig(image_size=32, patch=8, d_enc=16, heads=2, n_image_tokens=4, pc_hidden=16,
                        audio_bands=8, audio_channels=8, mask_channels=4)
    model = SceneGraphModel(ModelConfig(d_model=16, n_layers=1, n_heads=2, d_ff=32, encoder=enc, dtype="float64"))
    return model, max(samples, key=lambda s: len(s.gt_graph))


def test_grad_check_all_groups(gc_setup):
    model, sample = gc_setup
    worst, per = grad_check(model, [sample], eps=1e-5, entries_per_tensor=3)
    assert worst < 1e-4
    n_params = sum(1 for _ in model.parameters())
    assert len(per) == n_params  # every encoder and decoder tensor got gradient
    assert grad_check(model, [sample], eps=1e-5, entries_per_tensor=3) == (worst, per)


def test_zero_loss_sample_zero_gradient(gc_setup):
    model, sample = gc_setup
    model.zero_grad()
    pieces = model.encode_bundles([sample.modalities])
    _, loss = model.forward_batch(pieces, [model.prompt_ids(sample.modalities)], [[]])
    loss.backward()
    assert loss.item() == 0.0
    assert all(p.grad is None or torch.count_nonzero(p.grad) == 0 for p in model.parameters())


def test_grad_check_needs_float64(tiny_corpus, tiny_model_config):
    with pytest.raises(ValueError):
        grad_check(SceneGraphModel(tiny_model_config), tiny_corpus[1][:1])
