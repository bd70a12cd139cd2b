"""Modality encoders: images, point clouds, audio, and segmentation masks.

Each encoder maps one modality of one sample to a fixed number of token
embeddings; ``project_tokens`` then maps those into the decoder width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .nn import Block

TOKEN_MODALITIES = ("images", "pointcloud", "audio", "masks")


@dataclass(frozen=True)
class EncoderConfig:
    image_size: int = 64
    patch: int = 8
    d_enc: int = 64
    heads: int = 4
    image_layers: int = 1
    pool_layers: int = 1
    n_image_tokens: int = 16
    max_views: int = 8
    image_pos: bool = True
    pc_hidden: int = 64
    sample_rate: int = 4000
    n_fft: int = 256
    hop: int = 128
    audio_bands: int = 32
    audio_channels: int = 32
    audio_normalize: bool = True
    mask_channels: int = 16
    max_masks: int = 16

    @property
    def n_patches(self) -> int:
        return (self.image_size // self.patch) ** 2


def patchify(images: torch.Tensor, patch: int) -> torch.Tensor:
    """[V, H, W, 3] -> [V, n_patches, patch*patch*3] in row-major patch order."""
    v, h, w, c = images.shape
    x = images.reshape(v, h // patch, patch, w // patch, patch, c)
    x = x.permute(0, 1, 3, 2, 4, 5)
    return x.reshape(v, (h // patch) * (w // patch), patch * patch * c)


class ImageEncoder(nn.Module):
    """Per-image self-attention over patches, then a pooler over all views.

    The pooler prepends ``n_image_tokens`` learned query slots to the
    concatenated patch embeddings and keeps only its first outputs, so the
    token count does not depend on how many images arrive.
    """

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_enc
        self.embed = nn.Linear(cfg.patch * cfg.patch * 3, d)
        self.pos = nn.Parameter(torch.zeros(cfg.n_patches, d))
        self.view = nn.Parameter(torch.zeros(cfg.max_views, d))
        self.layers = nn.ModuleList(Block(d, cfg.heads, 2 * d) for _ in range(cfg.image_layers))
        self.queries = nn.Parameter(torch.zeros(cfg.n_image_tokens, d))
        self.pool = nn.ModuleList(Block(d, cfg.heads, 2 * d) for _ in range(cfg.pool_layers))
        self.ln = nn.LayerNorm(d)

    def encode_patches(self, images: torch.Tensor) -> torch.Tensor:
        x = self.embed(patchify(images, self.cfg.patch))
        if self.cfg.image_pos:
            x = x + self.pos
        for blk in self.layers:
            x, _ = blk(x)
        return x

    def pool_patches(self, patches: torch.Tensor, valid: torch.Tensor | None = None) -> torch.Tensor:
        """patches: [B, L, d]; valid: bool [B, L]. Returns [B, N, d]."""
        b = patches.shape[0]
        n = self.cfg.n_image_tokens
        x = torch.cat([self.queries.expand(b, n, -1), patches], dim=1)
        allowed = None
        if valid is not None:
            keys = torch.cat([torch.ones(b, n, dtype=torch.bool, device=valid.device), valid], dim=1)
            allowed = keys[:, None, None, :]
        for blk in self.pool:
            x, _ = blk(x, allowed)
        return self.ln(x[:, :n])

    def forward(self, batch: list[torch.Tensor]) -> torch.Tensor:
        """batch: list of [V_i, H, W, 3] tensors -> [B, N, d_enc]."""
        counts = [int(x.shape[0]) for x in batch]
        if min(counts) < 1:
            raise ValueError("image encoder needs at least one image per sample")
        if max(counts) > self.cfg.max_views:
            raise ValueError(f"at most {self.cfg.max_views} images per sample")
        feats = self.encode_patches(torch.cat(batch, dim=0))
        np_ = feats.shape[1]
        d = feats.shape[2]
        if self.cfg.image_pos:
            view_ids = torch.cat([torch.arange(c) for c in counts])
            feats = feats + self.view[view_ids][:, None, :]
        longest = max(counts) * np_
        out = feats.new_zeros(len(batch), longest, d)
        valid = torch.zeros(len(batch), longest, dtype=torch.bool)
        start = 0
        for i, c in enumerate(counts):
            out[i, : c * np_] = feats[start : start + c].reshape(c * np_, d)
            valid[i, : c * np_] = True
            start += c
        return self.pool_patches(out, valid if min(counts) != max(counts) else None)


class PointCloudEncoder(nn.Module):
    """Shared per-point network, max pooling over points, linear head."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        h = cfg.pc_hidden
        self.point = nn.Sequential(nn.Linear(6, h), nn.GELU(), nn.Linear(h, h), nn.GELU())
        self.head = nn.Linear(h, cfg.d_enc)

    def forward(self, batch: list[torch.Tensor]) -> torch.Tensor:
        """batch: list of [P_i, 6] -> [B, 1, d_enc]."""
        if any(x.shape[0] < 1 for x in batch):
            raise ValueError("empty point cloud")
        if len({x.shape[0] for x in batch}) == 1:
            pooled = self.point(torch.stack(batch)).amax(dim=1)
        else:
            pooled = torch.stack([self.point(x).amax(dim=0) for x in batch])
        return self.head(pooled)[:, None, :]


class AudioEncoder(nn.Module):
    """Per-clip RMS normalisation, log band energies, 1-D convs, mean pool."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        n_bins = cfg.n_fft // 2 + 1
        edges = np.linspace(0, n_bins, cfg.audio_bands + 1).round().astype(int)
        bands = np.zeros((n_bins, cfg.audio_bands))
        for j in range(cfg.audio_bands):
            bands[edges[j] : max(edges[j + 1], edges[j] + 1), j] = 1.0
        bands /= bands.sum(axis=0, keepdims=True)
        self.register_buffer("bands", torch.tensor(bands, dtype=torch.float32), persistent=False)
        self.register_buffer("window", torch.hann_window(cfg.n_fft, periodic=True), persistent=False)
        c = cfg.audio_channels
        self.conv1 = nn.Conv1d(cfg.audio_bands, c, 3, padding=1)
        self.conv2 = nn.Conv1d(c, c, 3, padding=1, stride=2)
        self.head = nn.Linear(c, cfg.d_enc)

    def features(self, wave: torch.Tensor) -> torch.Tensor:
        """[B, S] -> [B, bands, frames] log band energies."""
        if self.cfg.audio_normalize:
            rms = wave.pow(2).mean(dim=1, keepdim=True).sqrt().clamp_min(1e-8)
            wave = wave / rms
        frames = wave.unfold(1, self.cfg.n_fft, self.cfg.hop) * self.window.to(wave.dtype)
        spec = torch.fft.rfft(frames, dim=-1)
        power = spec.real.pow(2) + spec.imag.pow(2)
        energy = power @ self.bands.to(wave.dtype)
        return torch.log(energy + 1e-6).transpose(1, 2)

    def forward(self, batch: list[torch.Tensor]) -> torch.Tensor:
        """batch: list of [S] waveforms -> [B, 1, d_enc]."""
        for x in batch:
            if x.shape != (self.cfg.sample_rate,):
                raise ValueError(f"audio must hold exactly {self.cfg.sample_rate} samples, got {tuple(x.shape)}")
        f = self.features(torch.stack(batch))
        h = F.gelu(self.conv1(f))
        h = F.gelu(self.conv2(h))
        return self.head(h.mean(dim=2))[:, None, :]


class MaskEncoder(nn.Module):
    """Small CNN over one binary mask (plus mask-gated coordinate channels)."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.mask_channels
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(3, c, 3, stride=2, padding=1),
                nn.Conv2d(c, c, 3, stride=2, padding=1),
                nn.Conv2d(c, c, 3, stride=2, padding=1),
            ]
        )
        self.head = nn.Linear(c, cfg.d_enc)

    def forward(self, masks: torch.Tensor) -> torch.Tensor:
        """masks: [K, H, W] in {0, 1} -> [K, d_enc]."""
        k, h, w = masks.shape
        if (h, w) != (self.cfg.image_size, self.cfg.image_size):
            raise ValueError(f"mask shape {(h, w)} does not match image size {self.cfg.image_size}")
        if k == 0:
            return masks.new_zeros(0, self.cfg.d_enc)
        yy = torch.linspace(-1.0, 1.0, h, dtype=masks.dtype)[:, None].expand(h, w)
        xx = torch.linspace(-1.0, 1.0, w, dtype=masks.dtype)[None, :].expand(h, w)
        x = torch.stack([masks, masks * xx, masks * yy], dim=1)
        for conv in self.convs:
            x = F.gelu(conv(x))
        return self.head(x.mean(dim=(2, 3)))


class Projections(nn.Module):
    """One affine map per token-producing modality into the decoder width."""

    def __init__(self, d_in: int, d_model: int):
        super().__init__()
        self.maps = nn.ModuleDict({m: nn.Linear(d_in, d_model) for m in TOKEN_MODALITIES})

    def forward(self, modality: str, tokens: torch.Tensor) -> torch.Tensor:
        if modality not in self.maps:
            raise KeyError(f"no projection for modality {modality!r}")
        return self.maps[modality](tokens)


class ModalityEncoders(nn.Module):
    def __init__(self, cfg: EncoderConfig, d_model: int):
        super().__init__()
        self.cfg = cfg
        self.images = ImageEncoder(cfg)
        self.pointcloud = PointCloudEncoder(cfg)
        self.audio = AudioEncoder(cfg)
        self.masks = MaskEncoder(cfg)
        self.project = Projections(cfg.d_enc, d_model)


# ------------------------------------------------------------------ functional API


def _as_tensor(x, dtype=torch.float32) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x), dtype=dtype)


def encode_images(images, enc: ModalityEncoders) -> torch.Tensor:
    if len(images) == 0:
        raise ValueError("encode_images needs at least one image; drop the modality instead")
    dtype = next(enc.parameters()).dtype
    batch = torch.stack([_as_tensor(im, dtype) for im in images])
    return enc.images([batch])[0]


def encode_pointcloud(pc, enc: ModalityEncoders) -> torch.Tensor:
    dtype = next(enc.parameters()).dtype
    x = _as_tensor(pc, dtype)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != 6:
        raise ValueError(f"point cloud must be P x 6 with P >= 1, got {tuple(x.shape)}")
    return enc.pointcloud([x])[0]


def encode_audio(wave, enc: ModalityEncoders) -> torch.Tensor:
    dtype = next(enc.parameters()).dtype
    return enc.audio([_as_tensor(wave, dtype)])[0]


def encode_masks(masks, enc: ModalityEncoders) -> torch.Tensor:
    dtype = next(enc.parameters()).dtype
    if len(masks) > enc.cfg.max_masks:
        raise ValueError(f"at most {enc.cfg.max_masks} masks")
    if len(masks) == 0:
        return torch.zeros(0, enc.cfg.d_enc, dtype=dtype)
    x = torch.stack([_as_tensor(m, dtype) for m in masks])
    return enc.masks(x)


def project_tokens(modality: str, tokens: torch.Tensor, enc: ModalityEncoders) -> torch.Tensor:
    return enc.project(modality, tokens)
