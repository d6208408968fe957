"""Bit/symbol/LLR primitives for antipodal signaling over an AWGN channel.

Conventions used throughout the package:

* bits are 0/1, symbols are mapped as 0 -> -1 and 1 -> +1,
* LLRs are natural-log odds with L > 0 meaning bit 1 is more likely,
* every LLR is clamped to [-LLR_MAX, +LLR_MAX].

All functions are pure; randomness always enters through an explicit
``numpy.random.Generator`` so independent workers can use independent
streams.
"""

from __future__ import annotations

import math

import numpy as np
import torch

# Clamp for LLR magnitudes (nats). log2(1 + exp(-30)) < 1e-9, so mutual
# information estimates are unaffected while exp() can never overflow.
LLR_MAX = 30.0


def _as_tensor(x, dtype=None) -> torch.Tensor:
    t = torch.as_tensor(x)
    if dtype is not None:
        t = t.to(dtype)
    elif not t.is_floating_point():
        t = t.to(torch.get_default_dtype())
    return t


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation per real dimension for unit-energy symbols.

    Uses sigma^2 = 1 / (2 * rate * 10^(Eb/N0 / 10)).
    """
    if rate <= 0.0 or rate > 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    return 1.0 / math.sqrt(2.0 * rate * 10.0 ** (ebn0_db / 10.0))


def awgn(x, sigma: float, rng: np.random.Generator) -> torch.Tensor:
    """Add white Gaussian noise of standard deviation ``sigma`` to ``x``."""
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    x = _as_tensor(x)
    if sigma == 0.0:
        return x.clone()
    noise = torch.from_numpy(rng.standard_normal(tuple(x.shape))).to(x.dtype)
    return x + sigma * noise


def bpsk_map(bits) -> torch.Tensor:
    """Map bits {0,1} to antipodal symbols {-1,+1} via 2b - 1."""
    bits = _as_tensor(bits)
    return 2.0 * bits - 1.0


def bpsk_demap(y, sigma: float) -> torch.Tensor:
    """LLRs of antipodal symbols observed in noise of known variance.

    L = 2*y / sigma^2, clamped to +/- LLR_MAX.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    y = _as_tensor(y)
    return torch.clamp(2.0 * y / (sigma * sigma), -LLR_MAX, LLR_MAX)


def power_normalize(x) -> torch.Tensor:
    """Normalize each block to zero empirical mean and unit empirical power.

    The normalization acts on the last axis (one block per row) and uses the
    population standard deviation, so mean(out) = 0 and mean(out^2) = 1
    exactly per block. Differentiable.
    """
    x = _as_tensor(x)
    if x.shape[-1] < 2:
        raise ValueError("power normalization needs block length >= 2")
    mean = x.mean(dim=-1, keepdim=True)
    centered = x - mean
    power = centered.pow(2).mean(dim=-1, keepdim=True)
    if bool((power < 1e-24).any()):
        raise ValueError("constant block cannot be power-normalized")
    return centered / torch.sqrt(power)


def clip(x, threshold: float) -> torch.Tensor:
    """Clamp symbols to [-threshold, +threshold].

    The gradient is passed through unsaturated entries and is zero on
    saturated ones (plain clamp subgradient).
    """
    if threshold <= 0.0:
        raise ValueError(f"clip threshold must be > 0, got {threshold}")
    return torch.clamp(_as_tensor(x), -threshold, threshold)


def binarize(x) -> torch.Tensor:
    """Elementwise sign with the tie-break sign(0) = +1."""
    x = _as_tensor(x)
    return torch.where(x >= 0, 1.0, -1.0).to(x.dtype)


def extrinsic(total, apriori) -> torch.Tensor:
    """Extrinsic LLRs: total minus a-priori, clamped to +/- LLR_MAX."""
    total = _as_tensor(total)
    apriori = _as_tensor(apriori)
    if total.shape != apriori.shape:
        raise ValueError(
            f"length mismatch: total {tuple(total.shape)} vs apriori {tuple(apriori.shape)}"
        )
    return torch.clamp(total - apriori, -LLR_MAX, LLR_MAX)


def bce_loss(llr, bits) -> torch.Tensor:
    """Mean binary cross-entropy (nats) of sigmoid(llr) against target bits.

    Equals mean(softplus(-(2b - 1) * L)); ln(2) at L = 0. Differentiable in
    ``llr``.
    """
    llr = _as_tensor(llr)
    bits = _as_tensor(bits, dtype=llr.dtype)
    if llr.shape != bits.shape:
        raise ValueError(
            f"length mismatch: llr {tuple(llr.shape)} vs bits {tuple(bits.shape)}"
        )
    return torch.nn.functional.binary_cross_entropy_with_logits(llr, bits)


def hard_decision(llr) -> torch.Tensor:
    """Hard bit decisions from LLRs; L >= 0 decides bit 1 (matches binarize)."""
    return (_as_tensor(llr) >= 0).to(torch.int64)
