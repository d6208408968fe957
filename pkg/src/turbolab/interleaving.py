"""Deterministic permutations for coded-bit positions.

Provides the standardized LTE QPP interleavers (quadratic permutation
polynomials, pi(i) = (f1*i + f2*i^2) mod K) loaded from an embedded
parameter table, plus seeded random interleavers for ablations.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import torch

_QPP_TABLE_RESOURCE = "lte_qpp_parameters.txt"


@dataclass(frozen=True)
class Permutation:
    """Bijection pi on {0, ..., K-1}, applied as out[i] = v[pi(i)]."""

    table: np.ndarray
    inverse_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if sorted(table.tolist()) != list(range(table.size)):
            raise ValueError("permutation table is not a bijection on its range")
        inverse = np.empty_like(table)
        inverse[table] = np.arange(table.size)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "inverse_table", inverse)

    @property
    def size(self) -> int:
        return int(self.table.size)

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.table, other.table)


@functools.lru_cache(maxsize=1)
def lte_qpp_parameters() -> dict[int, tuple[int, int]]:
    """(f1, f2) per supported block size K, from the embedded table."""
    text = resources.files("turbolab.data").joinpath(_QPP_TABLE_RESOURCE).read_text()
    params = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, f1, f2 = (int(v) for v in line.split())
        params[k] = (f1, f2)
    return params


def supported_sizes() -> list[int]:
    return sorted(lte_qpp_parameters())


def qpp_permutation(size: int) -> Permutation:
    """Standardized LTE QPP permutation for a supported block size."""
    params = lte_qpp_parameters()
    if size not in params:
        nearest = sorted(params, key=lambda k: abs(k - size))[:4]
        raise ValueError(
            f"no QPP parameters for K={size}; nearest supported sizes: {sorted(nearest)}"
        )
    f1, f2 = params[size]
    i = np.arange(size, dtype=np.int64)
    return Permutation(table=(f1 * i + f2 * i * i) % size)


def random_permutation(size: int, seed) -> Permutation:
    """Uniformly random permutation, reproducible for a fixed seed."""
    if size < 2:
        raise ValueError(f"permutation size must be >= 2, got {size}")
    rng = np.random.default_rng(seed)
    return Permutation(table=rng.permutation(size))


def _check_len(perm: Permutation, v):
    if v.shape[-1] != perm.size:
        raise ValueError(f"vector length {v.shape[-1]} != permutation size {perm.size}")


def apply(perm: Permutation, v):
    """Permute the last axis: out[..., i] = v[..., pi(i)]."""
    if isinstance(v, torch.Tensor):
        _check_len(perm, v)
        return v[..., torch.from_numpy(perm.table)]
    v = np.asarray(v)
    _check_len(perm, v)
    return v[..., perm.table]


def apply_inverse(perm: Permutation, v):
    """Inverse of :func:`apply`; apply_inverse(apply(v)) == v elementwise."""
    if isinstance(v, torch.Tensor):
        _check_len(perm, v)
        return v[..., torch.from_numpy(perm.inverse_table)]
    v = np.asarray(v)
    _check_len(perm, v)
    return v[..., perm.inverse_table]
