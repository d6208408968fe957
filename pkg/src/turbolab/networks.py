"""Trainable components: plain CNN encoders and densely connected CNN decoders.

All convolutions are 1-D, length preserving, and circularly padded, so every
network is exactly shift equivariant and can be applied to longer sequences
than it was trained on. Tensors are channels-first: (batch, channels, length).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import __version__


@dataclass(frozen=True)
class ConvStackConfig:
    """Plain conv stack: ``layers`` hidden conv+ReLU layers plus a linear
    conv output layer, all kernel ``kernel`` with circular padding."""

    layers: int
    feature_maps: int
    kernel: int
    in_channels: int = 1
    out_channels: int = 1
    padding_mode: str = "circular"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("need at least one hidden layer")
        if self.kernel % 2 != 1:
            raise ValueError("kernel size must be odd to preserve length")
        if self.padding_mode != "circular":
            raise ValueError(f"unsupported padding mode {self.padding_mode!r}")
        if min(self.feature_maps, self.in_channels, self.out_channels) < 1:
            raise ValueError("channel counts must be positive")


@dataclass(frozen=True)
class DccnnConfig:
    """Densely connected conv net: per block (F0, F, K) where F0 is the
    number of maps entering the block (and produced by its transition layer)
    and F is the growth per densely connected layer."""

    blocks: tuple = ((16, 12, 5), (16, 16, 5), (16, 12, 5))
    layers_per_block: int = 3

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(b) for b in self.blocks))
        if self.layers_per_block < 1 or not self.blocks:
            raise ValueError("need at least one block with one layer")
        for f0, f, k in self.blocks:
            if min(f0, f) < 1 or k % 2 != 1:
                raise ValueError(f"invalid block config {(f0, f, k)}")


def _circ_conv(in_ch, out_ch, kernel):
    return nn.Conv1d(in_ch, out_ch, kernel, padding=kernel // 2, padding_mode="circular")


class ConvEncoder(nn.Module):
    """Length-preserving conv stack; hidden layers ReLU, final layer linear."""

    def __init__(self, config: ConvStackConfig):
        super().__init__()
        self.config = config
        layers = []
        in_ch = config.in_channels
        for _ in range(config.layers):
            layers += [_circ_conv(in_ch, config.feature_maps, config.kernel), nn.ReLU()]
            in_ch = config.feature_maps
        layers.append(_circ_conv(in_ch, config.out_channels, config.kernel))
        self.stack = nn.Sequential(*layers)

    def forward(self, x):
        return self.stack(x)


class DenseLayer(nn.Module):
    """Batch norm, ReLU, conv; output is concatenated onto the running input."""

    def __init__(self, in_ch, growth, kernel):
        super().__init__()
        self.norm = nn.BatchNorm1d(in_ch)
        self.conv = _circ_conv(in_ch, growth, kernel)

    def forward(self, x):
        return self.conv(torch.relu(self.norm(x)))


class DenseBlock(nn.Module):
    def __init__(self, f0, growth, kernel, layers):
        super().__init__()
        self.layers = nn.ModuleList(
            DenseLayer(f0 + j * growth, growth, kernel) for j in range(layers)
        )
        self.out_channels = f0 + layers * growth

    def forward(self, x):
        for layer in self.layers:
            x = torch.cat([x, layer(x)], dim=1)
        return x


class DccnnDecoder(nn.Module):
    """Densely connected decoder.

    A stem conv maps the input channels to the first block's F0 maps; each
    dense block grows channels by F per layer and is followed by a 1x1
    transition conv that resets the width to the next block's F0; a final
    linear 1x1 conv produces the output channels.
    """

    def __init__(self, config: DccnnConfig, in_channels: int, out_channels: int):
        super().__init__()
        if min(in_channels, out_channels) < 1:
            raise ValueError("channel counts must be positive")
        self.config = config
        self.in_channels = in_channels
        self.out_channels = out_channels

        f0_first = config.blocks[0][0]
        self.stem = _circ_conv(in_channels, f0_first, config.blocks[0][2])
        blocks, transitions = [], []
        for idx, (f0, growth, kernel) in enumerate(config.blocks):
            block = DenseBlock(f0, growth, kernel, config.layers_per_block)
            next_f0 = config.blocks[idx + 1][0] if idx + 1 < len(config.blocks) else f0
            blocks.append(block)
            transitions.append(nn.Conv1d(block.out_channels, next_f0, 1))
        self.blocks = nn.ModuleList(blocks)
        self.transitions = nn.ModuleList(transitions)
        self.head = nn.Conv1d(config.blocks[-1][0], out_channels, 1)

    def forward(self, x):
        x = self.stem(x)
        for block, transition in zip(self.blocks, self.transitions):
            x = transition(block(x))
        return self.head(x)


def build_encoder(config: ConvStackConfig) -> ConvEncoder:
    return ConvEncoder(config)


def build_dccnn_decoder(config: DccnnConfig, in_channels: int, out_channels: int) -> DccnnDecoder:
    return DccnnDecoder(config, in_channels, out_channels)


class _SignSTE(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return torch.where(x >= 0, 1.0, -1.0).to(x.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        (x,) = ctx.saved_tensors
        return grad_output * (x.abs() <= 1.0).to(grad_output.dtype)


def ste_binarize(x: torch.Tensor) -> torch.Tensor:
    """Sign in the forward pass; straight-through gradient, identity within
    |x| <= 1 and zero outside. Baseline quantizer only."""
    return _SignSTE.apply(x)


@dataclass
class ModelParameters:
    """Named real arrays of one network plus self-describing metadata.

    ``meta`` must contain an ``arch`` entry sufficient to rebuild the module
    (see :func:`module_from_meta`). Serialization is lossless: an .npz with
    the arrays next to a .json sidecar.
    """

    arrays: dict
    meta: dict = field(default_factory=dict)

    @property
    def total_count(self) -> int:
        return sum(a.size for a in self.arrays.values() if np.issubdtype(a.dtype, np.floating))

    @classmethod
    def from_module(cls, module: nn.Module, meta: dict | None = None) -> "ModelParameters":
        arrays = {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}
        meta = dict(meta or {})
        if "arch" not in meta and isinstance(module, (ConvEncoder, DccnnDecoder)):
            meta["arch"] = describe_arch(module)
        return cls(arrays=arrays, meta=meta)

    def load_into(self, module: nn.Module) -> nn.Module:
        state = {k: torch.from_numpy(np.asarray(v)) for k, v in self.arrays.items()}
        module.load_state_dict(state)
        return module

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.arrays):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.arrays[name]).tobytes())
        return h.hexdigest()[:16]

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path.with_suffix(".npz"), **self.arrays)
        sidecar = dict(self.meta)
        sidecar["version"] = f"turbolab-{__version__}+w{self.content_hash()}"
        sidecar["total_count"] = self.total_count
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
        return path.with_suffix(".npz")

    @classmethod
    def load(cls, path) -> "ModelParameters":
        path = Path(path)
        with np.load(path.with_suffix(".npz")) as data:
            arrays = {k: data[k].copy() for k in data.files}
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(arrays=arrays, meta=meta)


def parameter_count(params) -> int:
    """Exact element count of the real-valued arrays of a model."""
    if isinstance(params, nn.Module):
        params = ModelParameters.from_module(params)
    return params.total_count


def describe_arch(module: nn.Module) -> dict:
    if isinstance(module, ConvEncoder):
        return {"kind": "conv_encoder", "config": dataclasses.asdict(module.config)}
    if isinstance(module, DccnnDecoder):
        return {
            "kind": "dccnn_decoder",
            "config": dataclasses.asdict(module.config),
            "in_channels": module.in_channels,
            "out_channels": module.out_channels,
        }
    raise ValueError(f"cannot describe architecture of {type(module).__name__}")


def module_from_meta(meta: dict) -> nn.Module:
    arch = meta["arch"]
    if arch["kind"] == "conv_encoder":
        return ConvEncoder(ConvStackConfig(**arch["config"]))
    if arch["kind"] == "dccnn_decoder":
        cfg = dict(arch["config"])
        cfg["blocks"] = tuple(tuple(b) for b in cfg["blocks"])
        return DccnnDecoder(DccnnConfig(**cfg), arch["in_channels"], arch["out_channels"])
    raise ValueError(f"unknown architecture kind {arch['kind']!r}")


def save_checkpoint(module: nn.Module, path, meta: dict | None = None) -> Path:
    return ModelParameters.from_module(module, meta).save(path)


def load_checkpoint(path) -> nn.Module:
    params = ModelParameters.load(path)
    return params.load_into(module_from_meta(params.meta))
