"""Serial turbo autoencoder: transmitter chain, iterative decoder, length
retargeting and bundle persistence.

Wiring (natural bit domain left of the interleaver, interleaved domain
right of it):

    u -> outer encoder -> c (binarized at inference) -> pi -> inner encoder
      -> power normalization -> AWGN channel -> y
    y -> [inner decoder -> extrinsic -> pi^-1 -> outer decoder -> extrinsic
      -> pi] x N_it -> hard decisions on the outer decoder's data LLRs

Both decoders exchange extrinsic LLRs (total minus received a-priori); the
first inner pass uses zero a-priori.

The outer encoder maps k positions to 2 output channels that are interleaved
positionally into the n = 2k codeword, c[2i] = ch0[i], c[2i+1] = ch1[i]. The
outer decoder mirrors this: it runs on the length-n a-priori sequence and
emits two channels, channel 1 carrying the refined coded-bit LLRs and
channel 0 carrying the data LLRs read at even positions (the position where
bit u[i] enters the codeword). Keeping this alignment positional preserves
shift equivariance, which is what allows retargeting trained weights to
longer blocks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .interleaving import Permutation, apply, apply_inverse, qpp_permutation
from .networks import (
    ConvEncoder,
    ConvStackConfig,
    DccnnConfig,
    DccnnDecoder,
    ModelParameters,
    build_dccnn_decoder,
    build_encoder,
    load_checkpoint,
    save_checkpoint,
)
from .signals import binarize, bpsk_map, clip, extrinsic, hard_decision, power_normalize

ENCODE_MODES = ("training_real", "training_clipped", "inference_binary")


def positional_flatten(x: torch.Tensor) -> torch.Tensor:
    """(batch, channels, length) -> (batch, length*channels), channels fastest."""
    return x.permute(0, 2, 1).reshape(x.shape[0], -1)


def outer_codeword(encoder: ConvEncoder, u_pm: torch.Tensor, mode: str, clip_threshold=None) -> torch.Tensor:
    """Outer-encoder output in natural order, power normalized, then clipped
    or binarized according to the mode. Input and output are +/-1-style
    (batch, length) tensors."""
    if mode not in ENCODE_MODES:
        raise ValueError(f"unknown encode mode {mode!r}")
    if (clip_threshold is not None) != (mode == "training_clipped"):
        raise ValueError("clip_threshold must be given exactly for mode 'training_clipped'")
    c = power_normalize(positional_flatten(encoder(u_pm.to(torch.float32).unsqueeze(1))))
    if mode == "training_clipped":
        return clip(c, clip_threshold)
    if mode == "inference_binary":
        return binarize(c)
    return c


def inner_transmit(encoder: ConvEncoder, c_pm: torch.Tensor) -> torch.Tensor:
    """Inner-encoder output (rate 1), power normalized per block."""
    return power_normalize(positional_flatten(encoder(c_pm.to(torch.float32).unsqueeze(1))))


def inner_soft_pass(decoder: DccnnDecoder, y: torch.Tensor, la: torch.Tensor) -> torch.Tensor:
    """Total LLRs of the inner decoder given observation and a-priori LLRs."""
    inp = torch.stack([y.to(torch.float32), la.to(torch.float32)], dim=1)
    return decoder(inp)[:, 0, :]


def outer_soft_pass(decoder: DccnnDecoder, la: torch.Tensor):
    """(data LLRs, refined coded LLRs) of the outer decoder given a-priori LLRs."""
    out = decoder(la.to(torch.float32).unsqueeze(1))
    return out[:, 0, 0::2], out[:, 1, :]


@dataclass
class SerialTurboAE:
    """Trained component networks plus the interleaver wiring them together."""

    k: int
    n: int
    n_iters: int
    interleaver: Permutation
    outer_enc: ConvEncoder
    inner_enc: ConvEncoder
    outer_dec: DccnnDecoder
    inner_dec: DccnnDecoder

    def __post_init__(self):
        if self.n != 2 * self.k:
            raise ValueError(f"rate-1/2 system requires n = 2k, got k={self.k}, n={self.n}")
        if self.interleaver.size != self.n:
            raise ValueError(
                f"interleaver size {self.interleaver.size} does not match n={self.n}"
            )

    def modules(self):
        return [self.outer_enc, self.inner_enc, self.outer_dec, self.inner_dec]

    def eval(self) -> "SerialTurboAE":
        for m in self.modules():
            m.eval()
        return self


@dataclass
class ExchangeRecord:
    """A-priori/extrinsic LLRs seen by one component in one half-iteration."""

    iteration: int
    role: str
    apriori: torch.Tensor
    extrinsic: torch.Tensor


@dataclass
class DecodeResult:
    u_hat: torch.Tensor
    llr_u: torch.Tensor
    iterations_run: int
    per_iteration_llrs: list | None = None
    exchanges: list = field(default_factory=list)


def new_system(
    k: int,
    encoder_cfg: ConvStackConfig | None = None,
    decoder_cfg: DccnnConfig | None = None,
    n_iters: int = 6,
    seed: int = 0,
) -> SerialTurboAE:
    """Freshly initialized system with an LTE interleaver of size n = 2k."""
    torch.manual_seed(seed)
    n = 2 * k
    enc_cfg = encoder_cfg or ConvStackConfig(layers=5, feature_maps=100, kernel=5)
    dec_cfg = decoder_cfg or DccnnConfig()
    return SerialTurboAE(
        k=k,
        n=n,
        n_iters=n_iters,
        interleaver=qpp_permutation(n),
        outer_enc=build_encoder(
            ConvStackConfig(
                layers=enc_cfg.layers,
                feature_maps=enc_cfg.feature_maps,
                kernel=enc_cfg.kernel,
                in_channels=1,
                out_channels=2,
            )
        ),
        inner_enc=build_encoder(
            ConvStackConfig(
                layers=enc_cfg.layers,
                feature_maps=enc_cfg.feature_maps,
                kernel=enc_cfg.kernel,
                in_channels=1,
                out_channels=1,
            )
        ),
        outer_dec=build_dccnn_decoder(dec_cfg, in_channels=1, out_channels=2),
        inner_dec=build_dccnn_decoder(dec_cfg, in_channels=2, out_channels=1),
    )


def encode(system: SerialTurboAE, u, mode: str = "inference_binary", clip_threshold=None) -> torch.Tensor:
    """Map message bits to the length-n unit-power transmit block.

    ``u`` is a (k,) or (batch, k) array of bits. In ``inference_binary`` mode
    the outer-encoder output is binarized before interleaving; the inner
    output is always power normalized.
    """
    u = torch.as_tensor(u)
    squeeze = u.ndim == 1
    if squeeze:
        u = u.unsqueeze(0)
    if u.shape[-1] != system.k:
        raise ValueError(f"message length {u.shape[-1]} != k={system.k}")
    c = outer_codeword(system.outer_enc, bpsk_map(u), mode, clip_threshold)
    x = inner_transmit(system.inner_enc, apply(system.interleaver, c))
    return x[0] if squeeze else x


def iterative_decode(system: SerialTurboAE, y, n_iters: int | None = None, record: bool = False) -> DecodeResult:
    """Run the extrinsic-exchanging turbo loop and return hard decisions.

    ``y`` is a (n,) or (batch, n) observation. The inner decoder works on
    interleaved positions, the outer decoder on natural positions; the loop
    runs ``n_iters`` full iterations (inner then outer).
    """
    n_iters = system.n_iters if n_iters is None else n_iters
    if n_iters < 1:
        raise ValueError(f"n_iters must be >= 1, got {n_iters}")
    y = torch.as_tensor(y).to(torch.float32)
    squeeze = y.ndim == 1
    if squeeze:
        y = y.unsqueeze(0)
    if y.shape[-1] != system.n:
        raise ValueError(f"observation length {y.shape[-1]} != n={system.n}")

    la_int = torch.zeros_like(y)
    per_iter = []
    exchanges = []
    llr_u = None
    for it in range(n_iters):
        lt_int = inner_soft_pass(system.inner_dec, y, la_int)
        le_int = extrinsic(lt_int, la_int)
        if record:
            exchanges.append(ExchangeRecord(it, "inner", la_int.clone(), le_int.clone()))
        la_nat = apply_inverse(system.interleaver, le_int)
        llr_u, lt_c = outer_soft_pass(system.outer_dec, la_nat)
        le_nat = extrinsic(lt_c, la_nat)
        if record:
            exchanges.append(ExchangeRecord(it, "outer", la_nat.clone(), le_nat.clone()))
        la_int = apply(system.interleaver, le_nat)
        per_iter.append(llr_u.clone())

    u_hat = hard_decision(llr_u)
    if squeeze:
        u_hat, llr_u = u_hat[0], llr_u[0]
        per_iter = [p[0] for p in per_iter]
    return DecodeResult(
        u_hat=u_hat,
        llr_u=llr_u,
        iterations_run=n_iters,
        per_iteration_llrs=per_iter,
        exchanges=exchanges,
    )


def retarget_length(system: SerialTurboAE, new_k: int) -> SerialTurboAE:
    """Apply the trained convolution weights to a longer block length.

    No weights are changed or retrained; only the interleaver is swapped for
    the LTE permutation of size 2*new_k (which must be a supported size).
    """
    return SerialTurboAE(
        k=new_k,
        n=2 * new_k,
        n_iters=system.n_iters,
        interleaver=qpp_permutation(2 * new_k),
        outer_enc=system.outer_enc,
        inner_enc=system.inner_enc,
        outer_dec=system.outer_dec,
        inner_dec=system.inner_dec,
    )


_COMPONENT_FILES = ("outer_enc", "inner_enc", "outer_dec", "inner_dec")


def save_bundle(system: SerialTurboAE, directory, extra_meta: dict | None = None) -> Path:
    """Persist the four checkpoints plus a manifest into a bundle directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name in _COMPONENT_FILES:
        params = ModelParameters.from_module(getattr(system, name))
        params.save(directory / name)
        hashes[name] = params.content_hash()
    manifest = {
        "k": system.k,
        "n": system.n,
        "n_iters": system.n_iters,
        "interleaver": {"kind": "lte_qpp", "size": system.n},
        "checkpoints": {name: f"{name}.npz" for name in _COMPONENT_FILES},
        "checkpoint_hashes": hashes,
        "version": f"turbolab-{__version__}",
    }
    if extra_meta:
        manifest["meta"] = extra_meta
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return directory


def bundle_hash(directory) -> str:
    """Stable hash over the manifest's checkpoint hashes."""
    manifest = json.loads((Path(directory) / "manifest.json").read_text())
    blob = json.dumps(manifest["checkpoint_hashes"], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_bundle(directory) -> SerialTurboAE:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    modules = {name: load_checkpoint(directory / name) for name in _COMPONENT_FILES}
    system = SerialTurboAE(
        k=manifest["k"],
        n=manifest["n"],
        n_iters=manifest["n_iters"],
        interleaver=qpp_permutation(manifest["interleaver"]["size"]),
        **modules,
    )
    return system.eval()


def resolve_bundle(bundle: str, model_dir=None) -> Path:
    """Resolve a bundle path or ID against the model directory root."""
    import os

    path = Path(bundle)
    if path.is_dir():
        return path
    root = Path(model_dir or os.environ.get("TURBOLAB_MODEL_DIR", "models"))
    candidate = root / bundle
    if candidate.is_dir():
        return candidate
    raise FileNotFoundError(f"no model bundle {bundle!r} (looked in {root})")
