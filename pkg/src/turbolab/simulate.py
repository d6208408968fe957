"""Monte-Carlo BER/BLER evaluation with adaptive stopping.

Blocks are simulated in fixed-size batches whose random streams are keyed by
(seed, SNR index, batch index), and batch results are consumed in batch
order, so results are byte-identical no matter how many workers run the
batches.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .exit_analysis import _frozen_eval
from .system import SerialTurboAE, encode, iterative_decode
from .signals import ebn0_to_sigma


@dataclass(frozen=True)
class SimConfig:
    ebn0_db: tuple
    n_iters: int = 6
    min_block_errors: int = 100
    max_blocks: int = 1_000_000
    seed: int = 0
    workers: int = 1
    batch_blocks: int = 500
    mode: str = "inference_binary"

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(v) for v in self.ebn0_db))
        if self.min_block_errors < 1:
            raise ValueError("min_block_errors must be >= 1")
        if self.max_blocks < 1 or self.batch_blocks < 1 or self.workers < 1:
            raise ValueError("max_blocks, batch_blocks and workers must be >= 1")


@dataclass
class SimPoint:
    ebn0_db: float
    blocks_run: int
    bit_errors: int
    block_errors: int
    ber: float
    bler: float
    ci95: float


def _batch_size(config: SimConfig, batch_idx: int) -> int:
    return min(config.batch_blocks, config.max_blocks - batch_idx * config.batch_blocks)


def _run_batch(system: SerialTurboAE, sigma: float, config: SimConfig, snr_idx: int, batch_idx: int):
    size = _batch_size(config, batch_idx)
    rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(snr_idx, batch_idx))
    )
    u = torch.from_numpy(rng.integers(0, 2, size=(size, system.k)))
    with torch.no_grad():
        x = encode(system, u, mode=config.mode)
        noise = torch.from_numpy(rng.standard_normal(tuple(x.shape))).to(torch.float32)
        result = iterative_decode(system, x + sigma * noise, n_iters=config.n_iters)
    errs = result.u_hat != u
    return size, int(errs.sum()), int((errs.sum(dim=-1) > 0).sum())


def _simulate_point(system: SerialTurboAE, config: SimConfig, snr_idx: int, pool) -> SimPoint:
    ebn0 = config.ebn0_db[snr_idx]
    sigma = ebn0_to_sigma(ebn0, system.k / system.n)
    blocks = bit_errors = block_errors = 0

    def done_enough():
        return block_errors >= config.min_block_errors or blocks >= config.max_blocks

    if pool is None:
        batch_idx = 0
        while not done_enough():
            size, be, ble = _run_batch(system, sigma, config, snr_idx, batch_idx)
            blocks += size
            bit_errors += be
            block_errors += ble
            batch_idx += 1
    else:
        # Keep a rolling window of in-flight batches; consume strictly in
        # batch order so the stopping decision matches the serial run, and
        # discard any extra batches computed past the stopping point.
        window = config.workers * 2
        futures = {}
        next_submit = next_consume = 0
        while not done_enough():
            while len(futures) < window:
                futures[next_submit] = pool.submit(
                    _run_batch, system, sigma, config, snr_idx, next_submit
                )
                next_submit += 1
            size, be, ble = futures.pop(next_consume).result()
            next_consume += 1
            blocks += size
            bit_errors += be
            block_errors += ble
        for future in futures.values():
            future.cancel()

    bler = block_errors / blocks
    return SimPoint(
        ebn0_db=ebn0,
        blocks_run=blocks,
        bit_errors=bit_errors,
        block_errors=block_errors,
        ber=bit_errors / (blocks * system.k),
        bler=bler,
        ci95=1.96 * math.sqrt(max(bler * (1.0 - bler), 0.0) / blocks),
    )


def monte_carlo(system: SerialTurboAE, config: SimConfig) -> list:
    """Simulate every configured SNR point until the target block-error
    count (or the block cap) is reached; deterministic for a fixed seed."""
    points = []
    with _frozen_eval(system.modules()):
        if config.workers == 1:
            for snr_idx in range(len(config.ebn0_db)):
                points.append(_simulate_point(system, config, snr_idx, None))
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                for snr_idx in range(len(config.ebn0_db)):
                    points.append(_simulate_point(system, config, snr_idx, pool))
    return sorted(points, key=lambda p: p.ebn0_db)


CSV_HEADER = "ebn0_db,ber,bler,blocks,bit_errors,block_errors,ci95"


def emit_results(points: list, path, manifest: dict | None = None) -> Path:
    """Write sorted results as CSV plus a JSON run manifest next to it."""
    if not points:
        raise ValueError("no simulation points to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for p in sorted(points, key=lambda p: p.ebn0_db):
        lines.append(
            f"{p.ebn0_db!r},{p.ber!r},{p.bler!r},{p.blocks_run},"
            f"{p.bit_errors},{p.block_errors},{p.ci95!r}"
        )
    path.write_text("\n".join(lines) + "\n")
    manifest = dict(manifest or {})
    manifest.setdefault("version", f"turbolab-{__version__}")
    path.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def parse_results(path) -> list:
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != CSV_HEADER:
        raise ValueError(f"unrecognized results header in {path}")
    points = []
    for row in rows[1:]:
        ebn0, ber, bler, blocks, bit_errors, block_errors, ci95 = row.split(",")
        points.append(
            SimPoint(
                ebn0_db=float(ebn0),
                blocks_run=int(blocks),
                bit_errors=int(bit_errors),
                block_errors=int(block_errors),
                ber=float(ber),
                bler=float(bler),
                ci95=float(ci95),
            )
        )
    return points


def config_manifest(config: SimConfig, bundle_hash: str | None = None) -> dict:
    manifest = {"config": asdict(config), "version": f"turbolab-{__version__}"}
    if bundle_hash is not None:
        manifest["checkpoints_hash"] = bundle_hash
    return manifest
