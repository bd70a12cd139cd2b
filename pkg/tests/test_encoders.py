import numpy as np
import pytest
import torch

from orsgg.encoders import (
    EncoderConfig,
    ModalityEncoders,
    encode_audio,
    encode_images,
    encode_masks,
    encode_pointcloud,
    project_tokens,
)
from orsgg.nn import init_weights
from orsgg.synth import world

CFG = EncoderConfig(image_size=32, patch=8, d_enc=16, heads=2, n_image_tokens=4, pc_hidden=16,
                    audio_bands=8, audio_channels=8, mask_channels=4, sample_rate=4000)


@pytest.fixture
def enc():
    torch.manual_seed(0)
    m = ModalityEncoders(CFG, 16)
    init_weights(m, torch.Generator().manual_seed(0))
    with torch.no_grad():
        for p in (m.images.pos, m.images.view, m.images.queries):
            p.normal_(0.0, 0.02)
    return m.eval()


def test_fixed_image_token_count(enc):
    rng = np.random.default_rng(0)
    for n in (1, 5):
        imgs = rng.random((n, 32, 32, 3)).astype(np.float32)
        assert encode_images(imgs, enc).shape == (4, 16)
    with pytest.raises(ValueError):
        encode_images(np.zeros((0, 32, 32, 3), np.float32), enc)


def test_zero_images_deterministic(enc):
    z = np.zeros((2, 32, 32, 3), np.float32)
    assert torch.equal(encode_images(z, enc), encode_images(z, enc))


def test_pooler_permutation_invariant_without_positions():
    cfg = EncoderConfig(**{**CFG.__dict__, "image_pos": False})
    torch.manual_seed(1)
    m = ModalityEncoders(cfg, 16).double().eval()
    patches = torch.randn(1, 10, 16, dtype=torch.float64)
    perm = torch.randperm(10)
    a = m.images.pool_patches(patches)
    b = m.images.pool_patches(patches[:, perm])
    assert torch.allclose(a, b, atol=1e-12)


def test_pointcloud_symmetric(enc):
    rng = np.random.default_rng(0)
    pc = rng.normal(size=(50, 6)).astype(np.float32)
    a = encode_pointcloud(pc, enc)
    assert torch.allclose(a, encode_pointcloud(pc[rng.permutation(50)], enc), atol=1e-6)
    assert torch.allclose(a, encode_pointcloud(np.concatenate([pc, pc]), enc), atol=1e-6)
    assert torch.isfinite(encode_pointcloud(pc[:1], enc)).all()
    with pytest.raises(ValueError):
        encode_pointcloud(np.zeros((0, 6), np.float32), enc)


def test_audio_scale_invariant_and_silence(enc):
    rng = np.random.default_rng(0)
    x = rng.normal(size=4000).astype(np.float32)
    assert torch.equal(encode_audio(x, enc), encode_audio(2 * x, enc))
    silence = np.zeros(4000, np.float32)
    assert torch.equal(encode_audio(silence, enc), encode_audio(silence, enc))
    assert torch.isfinite(encode_audio(silence, enc)).all()
    with pytest.raises(ValueError):
        encode_audio(np.zeros(100, np.float32), enc)


def test_masks(enc):
    masks = np.zeros((3, 32, 32), np.float32)
    assert encode_masks(masks, enc).shape == (3, 16)
    assert encode_masks([], enc).shape == (0, 16)
    full, empty = encode_masks(np.stack([np.ones((32, 32)), np.zeros((32, 32))]).astype(np.float32), enc)
    assert not torch.allclose(full, empty)
    with pytest.raises(ValueError):
        encode_masks(np.zeros((17, 32, 32), np.float32), enc)


def test_projection_examples(enc):
    lin = enc.project.maps["audio"]
    with torch.no_grad():
        lin.weight.copy_(torch.eye(16))
        lin.bias.zero_()
    x = torch.randn(3, 16)
    assert torch.equal(project_tokens("audio", x, enc), x)
    with torch.no_grad():
        lin.weight.zero_()
    assert torch.equal(project_tokens("audio", x, enc), torch.zeros(3, 16))
    with pytest.raises(KeyError):
        project_tokens("smell", x, enc)
