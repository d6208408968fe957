"""Training recipes for the serial turbo autoencoder components.

Three entry points:

* :func:`train_outer_tgp` -- outer autoencoder over its virtual channel
  (encode, power normalize, clip/binarize per phase, AWGN, BPSK demap,
  decode), loss = BCE(data LLRs, u) + BCE(coded LLRs, coded bits). Phase 1
  trains a real-valued output; a quantization phase then applies either the
  gradual clipping schedule or the straight-through-estimator baseline.
* :func:`train_inner_tgp` -- inner autoencoder with artificial Gaussian
  a-priori LLRs. Phase 1 trains at high prior information and stops when the
  slope of the measured EXIT characteristic starts increasing; phase 2 forces
  a fraction alpha of each batch to zero prior information.
* :func:`train_unfolded` -- end-to-end baseline with the decoder iterations
  unrolled into one deep network.

All recipes alternate t_tx encoder-update steps (decoder frozen) with t_rx
decoder-update steps (encoder frozen) inside every epoch. Bits, channel
noise and priors are drawn from separate seeded streams, so changing e.g.
alpha never changes the noise realizations.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .exit_analysis import (
    ExitCurve,
    InnerSiso,
    OuterSiso,
    exit_slope,
    measure_exit_curve,
    mu_of_ia,
    _frozen_eval,
)
from .interleaving import qpp_permutation
from .networks import (
    ConvStackConfig,
    DccnnConfig,
    build_dccnn_decoder,
    build_encoder,
    ste_binarize,
)
from .signals import (
    bce_loss,
    bpsk_demap,
    bpsk_map,
    clip,
    ebn0_to_sigma,
    hard_decision,
    power_normalize,
)
from .system import (
    SerialTurboAE,
    encode,
    inner_soft_pass,
    inner_transmit,
    iterative_decode,
    outer_codeword,
    outer_soft_pass,
    positional_flatten,
)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


def clip_schedule(epoch: int) -> float:
    """Clipping threshold, decreased from 1.5 to 1.0 in 0.1 steps every 10
    epochs (counted from the start of the quantization phase)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return max(1.0, 1.5 - 0.1 * (epoch // 10))


@dataclass(frozen=True)
class TrainPhase:
    epochs: int
    batch_size: int = 500
    lr_start: float = 1e-4
    lr_end: float = 1e-6
    enc_snr_db: tuple = (4.0, 4.0)
    dec_snr_db: tuple = (0.5, 4.0)
    enc_ia: tuple = (0.8, 1.0)
    dec_ia: tuple = (0.6, 0.9)
    alpha: float = 0.0
    quantizer: str = "none"  # none | clip | ste
    slope_stop: bool = False  # stop this phase once the EXIT slope starts rising
    clip_epoch_offset: int = 0  # continue the clipping schedule mid-way
    t_tx: int = 100
    t_rx: int = 500

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.quantizer not in ("none", "clip", "ste"):
            raise ValueError(f"unknown quantizer {self.quantizer!r}")
        if not 500 <= self.batch_size <= 2000:
            warnings.warn(
                f"batch size {self.batch_size} outside the reference range [500, 2000]",
                stacklevel=2,
            )


@dataclass(frozen=True)
class TrainRecipe:
    """Full schedule description for one training run."""

    k: int
    phases: tuple
    encoder: ConvStackConfig = ConvStackConfig(layers=5, feature_maps=100, kernel=5)
    decoder: DccnnConfig = DccnnConfig()
    seed: int = 0
    rate: float = 0.5
    n_iters: int = 6
    validate_snr_db: float = 2.0
    validate_blocks: int = 0  # 0 disables per-epoch validation
    exit_snr_db: float = 2.0
    slope_window: tuple = (0.3, 0.9)
    slope_blocks: int = 200
    slope_every: int = 2
    slope_rise_tol: float = 0.02
    target_ber: float | None = None  # early stop once validation BER falls below

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))

    @property
    def n(self) -> int:
        return 2 * self.k

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainRecipe":
        raw = json.loads(text)
        raw["phases"] = tuple(TrainPhase(**p) for p in raw["phases"])
        raw["encoder"] = ConvStackConfig(**raw["encoder"])
        dec = raw["decoder"]
        dec["blocks"] = tuple(tuple(b) for b in dec["blocks"])
        raw["decoder"] = DccnnConfig(**dec)
        for key in ("slope_window",):
            raw[key] = tuple(raw[key])
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "TrainRecipe":
        return cls.from_json(Path(path).read_text())

    def save(self, path):
        Path(path).write_text(self.to_json())

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass
class TrainLog:
    """Append-only per-epoch records, serializable as JSON lines."""

    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, **record):
        self.records.append(record)

    def column(self, name):
        return [r.get(name) for r in self.records]

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write(json.dumps({"meta": self.meta}) + "\n")
            for record in self.records:
                fh.write(json.dumps(record) + "\n")

    @classmethod
    def load(cls, path) -> "TrainLog":
        lines = Path(path).read_text().splitlines()
        log = cls(meta=json.loads(lines[0])["meta"])
        log.records = [json.loads(line) for line in lines[1:]]
        return log


@dataclass
class ComponentAE:
    """One trained encoder/decoder pair (outer or inner role)."""

    kind: str
    encoder: torch.nn.Module
    decoder: torch.nn.Module
    k: int
    n: int
    rate: float = 0.5

    def as_siso(self):
        if self.kind == "outer":
            return OuterSiso(self.encoder, self.decoder, self.k)
        return InnerSiso(self.encoder, self.decoder, self.n, self.rate)

    def modules(self):
        return [self.encoder, self.decoder]


@dataclass
class ValidationResult:
    bit_errors: int
    block_errors: int
    blocks: int
    bits_per_block: int

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.blocks * self.bits_per_block)

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks

    @property
    def ber_ci95(self) -> float:
        p = self.ber
        return 1.96 * math.sqrt(max(p * (1 - p), 0.0) / (self.blocks * self.bits_per_block))

    @property
    def bler_ci95(self) -> float:
        p = self.bler
        return 1.96 * math.sqrt(max(p * (1 - p), 0.0) / self.blocks)


def _build_outer(recipe: TrainRecipe) -> ComponentAE:
    enc = build_encoder(replace(recipe.encoder, in_channels=1, out_channels=2))
    dec = build_dccnn_decoder(recipe.decoder, in_channels=1, out_channels=2)
    return ComponentAE("outer", enc, dec, recipe.k, recipe.n, recipe.rate)


def _build_inner(recipe: TrainRecipe) -> ComponentAE:
    enc = build_encoder(replace(recipe.encoder, in_channels=1, out_channels=1))
    dec = build_dccnn_decoder(recipe.decoder, in_channels=2, out_channels=1)
    return ComponentAE("inner", enc, dec, recipe.k, recipe.n, recipe.rate)


def _phase_lr(phase: TrainPhase, epoch: int) -> float:
    """Piecewise-constant decay over thirds of the phase budget."""
    if phase.epochs <= 1:
        return phase.lr_start
    third = epoch * 3 // max(phase.epochs, 1)
    mid = math.sqrt(phase.lr_start * phase.lr_end)
    return (phase.lr_start, mid, phase.lr_end)[min(third, 2)]


def _set_lr(optimizer, lr):
    for group in optimizer.param_groups:
        group["lr"] = lr


def _sample_snr(bounds, rng) -> float:
    lo, hi = bounds
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def _prior_rows(c_bits: torch.Tensor, ia_rows: np.ndarray, rng: np.random.Generator) -> torch.Tensor:
    """A-priori LLRs with a per-row information level. Always consumes one
    normal draw per element so stream alignment is independent of the levels."""
    mu = np.array([mu_of_ia(float(v)) for v in ia_rows])
    z = rng.standard_normal(tuple(c_bits.shape))
    mean = (2.0 * c_bits.numpy() - 1.0) * mu[:, None]
    return torch.from_numpy(mean + np.sqrt(2.0 * mu)[:, None] * z).to(torch.float32)


def _check_finite(loss, log):
    if not torch.isfinite(loss):
        raise TrainingDiverged("training loss diverged (NaN/Inf)", log)


def _outer_train_codeword(encoder, u_pm, quantizer, threshold):
    if quantizer == "none":
        return outer_codeword(encoder, u_pm, "training_real")
    if quantizer == "clip":
        return outer_codeword(encoder, u_pm, "training_clipped", threshold)
    if quantizer == "ste":
        out = encoder(u_pm.to(torch.float32).unsqueeze(1))
        return ste_binarize(power_normalize(positional_flatten(out)))
    raise ValueError(f"unknown quantizer {quantizer!r}")


def train_outer_tgp(recipe: TrainRecipe, init: ComponentAE | None = None, progress=None):
    """Train the outer autoencoder end-to-end over its virtual channel.

    ``init`` continues from a copy of an already trained component (used to
    fork quantization phases off a shared real-valued run). Returns the
    trained component and the per-epoch log. Raises
    :class:`TrainingDiverged` (carrying the log) on NaN losses.
    """
    import copy

    torch.manual_seed(recipe.seed)
    ae = copy.deepcopy(init) if init is not None else _build_outer(recipe)
    root = np.random.default_rng(recipe.seed)
    bits_rng, noise_rng, val_rng = (np.random.default_rng(s) for s in root.spawn(3))
    opt_enc = torch.optim.Adam(ae.encoder.parameters(), lr=1e-4)
    opt_dec = torch.optim.Adam(ae.decoder.parameters(), lr=1e-4)
    log = TrainLog(meta={"kind": "outer_tgp", "recipe_hash": recipe.hash()})

    global_epoch = 0
    for phase in recipe.phases:
        for epoch in range(phase.epochs):
            t0 = time.perf_counter()
            threshold = (
                clip_schedule(epoch + phase.clip_epoch_offset)
                if phase.quantizer == "clip"
                else None
            )
            lr = _phase_lr(phase, epoch)
            _set_lr(opt_enc, lr)
            _set_lr(opt_dec, lr)
            sums = {"loss_u": 0.0, "loss_c": 0.0}
            steps = 0
            for segment, n_steps, optimizer in (
                ("tx", phase.t_tx, opt_enc),
                ("rx", phase.t_rx, opt_dec),
            ):
                trained = ae.encoder if segment == "tx" else ae.decoder
                frozen = ae.decoder if segment == "tx" else ae.encoder
                for p in frozen.parameters():
                    p.requires_grad_(False)
                for p in trained.parameters():
                    p.requires_grad_(True)
                snr_bounds = phase.enc_snr_db if segment == "tx" else phase.dec_snr_db
                for _ in range(n_steps):
                    u = torch.from_numpy(
                        bits_rng.integers(0, 2, size=(phase.batch_size, recipe.k))
                    )
                    sigma = ebn0_to_sigma(_sample_snr(snr_bounds, noise_rng), recipe.rate)
                    c = _outer_train_codeword(ae.encoder, bpsk_map(u), phase.quantizer, threshold)
                    noise = torch.from_numpy(
                        noise_rng.standard_normal(tuple(c.shape))
                    ).to(torch.float32)
                    la = bpsk_demap(c + sigma * noise, sigma)
                    lt_u, lt_c = outer_soft_pass(ae.decoder, la)
                    c_bits = (c.detach() >= 0).to(torch.float32)
                    loss_u = bce_loss(lt_u, u)
                    loss_c = bce_loss(lt_c, c_bits)
                    loss = loss_u + loss_c
                    _check_finite(loss, log)
                    optimizer.zero_grad(set_to_none=True)
                    loss.backward()
                    optimizer.step()
                    sums["loss_u"] += loss_u.item()
                    sums["loss_c"] += loss_c.item()
                    steps += 1
            for p in ae.encoder.parameters():
                p.requires_grad_(True)
            for p in ae.decoder.parameters():
                p.requires_grad_(True)
            record = {
                "epoch": global_epoch,
                "phase_quantizer": phase.quantizer,
                "loss_u": sums["loss_u"] / steps,
                "loss_c": sums["loss_c"] / steps,
                "loss": (sums["loss_u"] + sums["loss_c"]) / steps,
                "clip_threshold": threshold,
                "lr": lr,
                "wall_clock": time.perf_counter() - t0,
            }
            if recipe.validate_blocks:
                mode = "training_real" if phase.quantizer == "none" else "inference_binary"
                res = validate(
                    ae,
                    recipe.validate_snr_db,
                    recipe.validate_blocks,
                    rng=np.random.default_rng(val_rng.spawn(1)[0]),
                    mode=mode,
                )
                record["val_ber"], record["val_bler"] = res.ber, res.bler
                record["val_mode"] = mode
            log.add(**record)
            if progress:
                progress(record)
            global_epoch += 1
    return ae, log


def saturation_fraction(
    encoder, k: int, blocks: int = 10000, rng=None, level: float = 0.99, batch: int = 500
) -> float:
    """Fraction of normalized outer-encoder outputs with magnitude above
    ``level`` (the antipodal-convergence statistic of the clipping recipe)."""
    rng = np.random.default_rng(0) if rng is None else rng
    hits = total = 0
    with _frozen_eval([encoder]), torch.no_grad():
        done = 0
        while done < blocks:
            b = min(batch, blocks - done)
            u = torch.from_numpy(rng.integers(0, 2, size=(b, k)))
            c = outer_codeword(encoder, bpsk_map(u), "training_real")
            hits += int((c.abs() > level).sum())
            total += c.numel()
            done += b
    return hits / total


def train_inner_tgp(
    recipe: TrainRecipe,
    outer_curve: ExitCurve | None = None,
    outer_ae: ComponentAE | None = None,
    init: ComponentAE | None = None,
    progress=None,
):
    """Two-step Gaussian-prior training of the inner autoencoder.

    Phase 1 (first recipe phase) trains at high prior information and stops
    early once the slope of the measured EXIT characteristic has risen for
    two consecutive measurements by more than the configured tolerance; a
    warning is emitted if that never happens within the phase budget. Phase 2
    (second phase) forces a fraction alpha of every batch to zero prior
    information. Priors are generated on the component's own input bits.

    When ``outer_ae`` is given, each epoch is validated by full iterative
    decoding of the assembled system; with ``recipe.target_ber`` set,
    training stops once validation BER reaches the target. ``init`` continues
    from a copy of an already trained component (used to fork the alpha
    phase off a shared phase-1 run).
    """
    import copy

    torch.manual_seed(recipe.seed)
    ae = copy.deepcopy(init) if init is not None else _build_inner(recipe)
    root = np.random.default_rng(recipe.seed)
    bits_rng, noise_rng, prior_rng, val_rng, slope_rng = (
        np.random.default_rng(s) for s in root.spawn(5)
    )
    opt_enc = torch.optim.Adam(ae.encoder.parameters(), lr=1e-4)
    opt_dec = torch.optim.Adam(ae.decoder.parameters(), lr=1e-4)
    log = TrainLog(meta={"kind": "inner_tgp", "recipe_hash": recipe.hash()})
    val_system = _assemble(outer_ae, ae, recipe.n_iters) if outer_ae is not None else None

    slope_grid = np.round(
        np.arange(recipe.slope_window[0], recipe.slope_window[1] + 1e-9, 0.05), 10
    )
    slopes = []
    global_epoch = 0

    def slope_rising():
        return (
            len(slopes) >= 3
            and slopes[-1] > slopes[-2] > slopes[-3]
            and slopes[-1] - slopes[-3] > recipe.slope_rise_tol
        )

    for phase_idx, phase in enumerate(recipe.phases):
        watch_slope = phase.slope_stop
        stopped = False
        for epoch in range(phase.epochs):
            t0 = time.perf_counter()
            lr = _phase_lr(phase, epoch)
            _set_lr(opt_enc, lr)
            _set_lr(opt_dec, lr)
            loss_sum, steps = 0.0, 0
            n_zero = int(round(phase.alpha * phase.batch_size))
            for segment, n_steps, optimizer in (
                ("tx", phase.t_tx, opt_enc),
                ("rx", phase.t_rx, opt_dec),
            ):
                trained = ae.encoder if segment == "tx" else ae.decoder
                frozen = ae.decoder if segment == "tx" else ae.encoder
                for p in frozen.parameters():
                    p.requires_grad_(False)
                for p in trained.parameters():
                    p.requires_grad_(True)
                snr_bounds = phase.enc_snr_db if segment == "tx" else phase.dec_snr_db
                ia_bounds = phase.enc_ia if segment == "tx" else phase.dec_ia
                for _ in range(n_steps):
                    c = torch.from_numpy(
                        bits_rng.integers(0, 2, size=(phase.batch_size, recipe.n))
                    )
                    sigma = ebn0_to_sigma(_sample_snr(snr_bounds, noise_rng), recipe.rate)
                    x = inner_transmit(ae.encoder, bpsk_map(c))
                    noise = torch.from_numpy(
                        noise_rng.standard_normal(tuple(x.shape))
                    ).to(torch.float32)
                    y = x + sigma * noise
                    ia_rows = prior_rng.uniform(
                        ia_bounds[0], min(ia_bounds[1], 0.999), size=phase.batch_size
                    )
                    ia_rows[:n_zero] = 0.0
                    la = _prior_rows(c, ia_rows, prior_rng)
                    lt = inner_soft_pass(ae.decoder, y, la)
                    loss = bce_loss(lt, c.to(torch.float32))
                    _check_finite(loss, log)
                    optimizer.zero_grad(set_to_none=True)
                    loss.backward()
                    optimizer.step()
                    loss_sum += loss.item()
                    steps += 1
            for p in ae.encoder.parameters():
                p.requires_grad_(True)
            for p in ae.decoder.parameters():
                p.requires_grad_(True)
            wall = time.perf_counter() - t0
            record = {
                "epoch": global_epoch,
                "phase": phase_idx,
                "alpha": phase.alpha,
                "loss": loss_sum / steps,
                "lr": lr,
                "wall_clock": wall,
            }
            if watch_slope and (epoch + 1) % recipe.slope_every == 0:
                curve = measure_exit_curve(
                    ae.as_siso(),
                    recipe.exit_snr_db,
                    ia_grid=slope_grid,
                    blocks=recipe.slope_blocks,
                    rng=np.random.default_rng(slope_rng.spawn(1)[0]),
                )
                slopes.append(exit_slope(curve, recipe.slope_window))
                record["exit_slope"] = slopes[-1]
                if outer_curve is not None:
                    from .exit_analysis import find_intersection

                    record["intersection_mi"] = find_intersection(curve, outer_curve)[0]
            if val_system is not None and recipe.validate_blocks:
                res = validate(
                    val_system,
                    recipe.validate_snr_db,
                    recipe.validate_blocks,
                    rng=np.random.default_rng(val_rng.spawn(1)[0]),
                )
                record["val_ber"], record["val_bler"] = res.ber, res.bler
            log.add(**record)
            if progress:
                progress(record)
            global_epoch += 1
            if recipe.target_ber is not None and record.get("val_ber", 1.0) <= recipe.target_ber:
                return ae, log
            if watch_slope and slope_rising():
                stopped = True
                break
        if watch_slope and not stopped and phase.epochs > 0:
            warnings.warn(
                "EXIT slope never started rising within the phase budget; "
                "proceeding to the next phase",
                stacklevel=2,
            )
    return ae, log


def _assemble(outer: ComponentAE, inner: ComponentAE, n_iters: int) -> SerialTurboAE:
    if outer.n != inner.n:
        raise ValueError("outer and inner components disagree on block length")
    return SerialTurboAE(
        k=outer.k,
        n=outer.n,
        n_iters=n_iters,
        interleaver=qpp_permutation(outer.n),
        outer_enc=outer.encoder,
        inner_enc=inner.encoder,
        outer_dec=outer.decoder,
        inner_dec=inner.decoder,
    )


def assemble_system(outer: ComponentAE, inner: ComponentAE, n_iters: int = 6) -> SerialTurboAE:
    """Concatenate separately trained components into the full system."""
    return _assemble(outer, inner, n_iters)


def train_unfolded(recipe: TrainRecipe, n_iters: int = 6, progress=None):
    """End-to-end baseline: the full system with the decoder unrolled.

    The loss is the BCE of the final data LLRs after ``n_iters`` unrolled
    decoding iterations; gradients flow through every stage. Encoder and
    decoder updates alternate with the t_tx/t_rx schedule. The encoders run
    real-valued (no quantization phase).
    """
    if n_iters < 1:
        raise ValueError(f"n_iters must be >= 1, got {n_iters}")
    torch.manual_seed(recipe.seed)
    outer = _build_outer(recipe)
    inner = _build_inner(recipe)
    system = _assemble(outer, inner, n_iters)
    root = np.random.default_rng(recipe.seed)
    bits_rng, noise_rng, val_rng = (np.random.default_rng(s) for s in root.spawn(3))
    enc_params = list(outer.encoder.parameters()) + list(inner.encoder.parameters())
    dec_params = list(outer.decoder.parameters()) + list(inner.decoder.parameters())
    opt_enc = torch.optim.Adam(enc_params, lr=1e-4)
    opt_dec = torch.optim.Adam(dec_params, lr=1e-4)
    log = TrainLog(meta={"kind": "unfolded", "recipe_hash": recipe.hash(), "n_iters": n_iters})

    for phase in recipe.phases:
        for epoch in range(phase.epochs):
            t0 = time.perf_counter()
            lr = _phase_lr(phase, epoch)
            _set_lr(opt_enc, lr)
            _set_lr(opt_dec, lr)
            loss_sum, steps = 0.0, 0
            for segment, n_steps, optimizer, trained, frozen in (
                ("tx", phase.t_tx, opt_enc, enc_params, dec_params),
                ("rx", phase.t_rx, opt_dec, dec_params, enc_params),
            ):
                for p in frozen:
                    p.requires_grad_(False)
                for p in trained:
                    p.requires_grad_(True)
                snr_bounds = phase.enc_snr_db if segment == "tx" else phase.dec_snr_db
                for _ in range(n_steps):
                    u = torch.from_numpy(
                        bits_rng.integers(0, 2, size=(phase.batch_size, recipe.k))
                    )
                    sigma = ebn0_to_sigma(_sample_snr(snr_bounds, noise_rng), recipe.rate)
                    x = encode(system, u, mode="training_real")
                    noise = torch.from_numpy(
                        noise_rng.standard_normal(tuple(x.shape))
                    ).to(torch.float32)
                    result = iterative_decode(system, x + sigma * noise, n_iters=n_iters)
                    loss = bce_loss(result.llr_u, u)
                    _check_finite(loss, log)
                    optimizer.zero_grad(set_to_none=True)
                    loss.backward()
                    optimizer.step()
                    loss_sum += loss.item()
                    steps += 1
            for p in enc_params + dec_params:
                p.requires_grad_(True)
            wall = time.perf_counter() - t0
            record = {
                "epoch": epoch,
                "loss": loss_sum / steps,
                "lr": lr,
                "wall_clock": wall,
            }
            if recipe.validate_blocks:
                res = validate(
                    system,
                    recipe.validate_snr_db,
                    recipe.validate_blocks,
                    rng=np.random.default_rng(val_rng.spawn(1)[0]),
                    mode="training_real",
                )
                record["val_ber"], record["val_bler"] = res.ber, res.bler
            log.add(**record)
            if progress:
                progress(record)
            if recipe.target_ber is not None and record.get("val_ber", 1.0) <= recipe.target_ber:
                return system, log
    return system, log


def validate(
    model,
    snr_db: float,
    blocks: int,
    rng=None,
    n_iters: int | None = None,
    mode: str = "inference_binary",
    clip_threshold=None,
    batch: int = 500,
) -> ValidationResult:
    """Monte-Carlo BER/BLER of a full system or of the standalone outer
    autoencoder over its virtual channel."""
    if blocks < 1:
        raise ValueError("need at least one block")
    rng = np.random.default_rng(0) if rng is None else rng
    if isinstance(model, SerialTurboAE):
        return _validate_system(model, snr_db, blocks, rng, n_iters, mode, clip_threshold, batch)
    if isinstance(model, ComponentAE) and model.kind == "outer":
        return _validate_outer(model, snr_db, blocks, rng, mode, clip_threshold, batch)
    raise ValueError("validate expects a SerialTurboAE or an outer ComponentAE")


def _count_errors(u_hat, u):
    bit_errors = int((u_hat != u).sum())
    block_errors = int(((u_hat != u).sum(dim=-1) > 0).sum())
    return bit_errors, block_errors


def _validate_system(system, snr_db, blocks, rng, n_iters, mode, clip_threshold, batch):
    sigma = ebn0_to_sigma(snr_db, system.k / system.n)
    bit_errors = block_errors = done = 0
    with _frozen_eval(system.modules()), torch.no_grad():
        while done < blocks:
            b = min(batch, blocks - done)
            u = torch.from_numpy(rng.integers(0, 2, size=(b, system.k)))
            x = encode(system, u, mode=mode, clip_threshold=clip_threshold)
            noise = torch.from_numpy(rng.standard_normal(tuple(x.shape))).to(torch.float32)
            result = iterative_decode(system, x + sigma * noise, n_iters=n_iters)
            be, ble = _count_errors(result.u_hat, u)
            bit_errors += be
            block_errors += ble
            done += b
    return ValidationResult(bit_errors, block_errors, blocks, system.k)


def _validate_outer(ae, snr_db, blocks, rng, mode, clip_threshold, batch):
    sigma = ebn0_to_sigma(snr_db, ae.rate)
    bit_errors = block_errors = done = 0
    with _frozen_eval(ae.modules()), torch.no_grad():
        while done < blocks:
            b = min(batch, blocks - done)
            u = torch.from_numpy(rng.integers(0, 2, size=(b, ae.k)))
            c = outer_codeword(ae.encoder, bpsk_map(u), mode, clip_threshold)
            noise = torch.from_numpy(rng.standard_normal(tuple(c.shape))).to(torch.float32)
            la = bpsk_demap(c + sigma * noise, sigma)
            lt_u, _ = outer_soft_pass(ae.decoder, la)
            be, ble = _count_errors(hard_decision(lt_u), u)
            bit_errors += be
            block_errors += ble
            done += b
    return ValidationResult(bit_errors, block_errors, blocks, ae.k)
