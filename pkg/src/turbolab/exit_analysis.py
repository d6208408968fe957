"""Gaussian a-priori LLR generation, mutual-information estimation and EXIT
chart machinery for soft-in/soft-out components.

A-priori LLRs for bits u at information level ia are drawn from
N((2u-1)*mu(ia), 2*mu(ia)); the mean function mu uses the standard
three-constant fit (H1=0.3073, H2=0.8935, H3=1.1064). Mutual information
between LLRs and bits is approximated by the empirical mean
1 - E[log2(1 + exp(-(2u-1)*L))], clamped to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .signals import awgn, bpsk_map, ebn0_to_sigma, extrinsic

_H1 = 0.3073
_H2 = 0.8935
_H3 = 1.1064

# Default measurement grid {0.0, 0.05, ..., 0.95}.
DEFAULT_IA_GRID = np.round(np.arange(0.0, 1.0, 0.05), 10)


def mu_of_ia(ia: float) -> float:
    """Mean of the a-priori LLR distribution at information level ia."""
    if not 0.0 <= ia < 1.0:
        raise ValueError(f"ia must lie in [0, 1), got {ia}")
    if ia == 0.0:
        return 0.0
    return 0.5 * (-(1.0 / _H1) * math.log2(1.0 - ia ** (1.0 / _H3))) ** (1.0 / _H2)


def sample_prior_llrs(u, ia: float, rng: np.random.Generator) -> torch.Tensor:
    """Artificial a-priori LLRs for bits ``u`` at information level ``ia``."""
    mu = mu_of_ia(ia)
    u = torch.as_tensor(u)
    mean = (2.0 * u.to(torch.float64) - 1.0) * mu
    if mu == 0.0:
        return torch.zeros_like(mean)
    noise = torch.from_numpy(rng.standard_normal(tuple(u.shape)))
    return mean + math.sqrt(2.0 * mu) * noise


def estimate_mi(llrs, u) -> float:
    """Mutual information (bits) between LLRs and the true bits."""
    llrs = torch.as_tensor(llrs).to(torch.float64).reshape(-1)
    u = torch.as_tensor(u).to(torch.float64).reshape(-1)
    if llrs.shape != u.shape or llrs.numel() < 1:
        raise ValueError("llrs and bits must have equal nonzero length")
    loss = torch.nn.functional.softplus(-(2.0 * u - 1.0) * llrs).mean().item()
    return min(1.0, max(0.0, 1.0 - loss / math.log(2.0)))


def _mi_per_row(llrs: torch.Tensor, u: torch.Tensor) -> np.ndarray:
    """Row-wise MI estimate for (batch, n) tensors; used for per-block charts."""
    llrs = llrs.to(torch.float64)
    u = u.to(torch.float64)
    loss = torch.nn.functional.softplus(-(2.0 * u - 1.0) * llrs).mean(dim=-1)
    return np.clip(1.0 - loss.numpy() / math.log(2.0), 0.0, 1.0)


@dataclass
class ExitCurve:
    """Sampled (I_A, I_E) characteristic of one component at a fixed SNR."""

    ia_grid: np.ndarray
    ie_values: np.ndarray
    snr_db: float
    component_id: str

    def __post_init__(self):
        self.ia_grid = np.asarray(self.ia_grid, dtype=np.float64)
        self.ie_values = np.asarray(self.ie_values, dtype=np.float64)
        if self.ia_grid.shape != self.ie_values.shape or self.ia_grid.ndim != 1:
            raise ValueError("ia grid and ie values must be equal-length vectors")
        if np.any(np.diff(self.ia_grid) <= 0):
            raise ValueError("ia grid must be sorted ascending")
        if np.any((self.ie_values < 0) | (self.ie_values > 1)):
            raise ValueError("ie values must lie in [0, 1]")

    def interp(self, ia) -> float:
        """Piecewise-linear interpolation; held constant beyond the grid."""
        return float(np.interp(ia, self.ia_grid, self.ie_values))


@dataclass
class Trajectory:
    """Ping-pong decoding trajectory; points alternate inner/outer roles."""

    points: list
    converged: bool
    block_length: int | None = None

    @property
    def final_mi(self) -> float:
        return self.points[-1][1]


class SisoComponent:
    """Adapter exposing one soft-in/soft-out pass of a component.

    ``sample_batch`` draws fresh reference bits (and, for components that see
    the channel, the matching observation); ``soft_pass`` maps (observation,
    a-priori LLRs) to extrinsic LLRs for those bits.
    """

    component_id = "siso"
    uses_channel = False
    rate = 0.5  # Eb/N0 -> sigma conversion of the surrounding system
    block_len: int

    def sample_batch(self, batch: int, sigma, rng):
        raise NotImplementedError

    def soft_pass(self, y, la) -> torch.Tensor:
        raise NotImplementedError

    def eval_modules(self):
        """Modules whose normalization statistics must be frozen while measuring."""
        return []


class RepetitionSiso(SisoComponent):
    """Analytic oracle: rate-1/2 repetition code c = (u, u).

    The exact extrinsic LLR of one copy is the a-priori LLR of its twin, so
    the EXIT characteristic is the identity.
    """

    component_id = "repetition"

    def __init__(self, k: int):
        self.k = k
        self.block_len = 2 * k

    def sample_batch(self, batch, sigma, rng):
        u = torch.from_numpy(rng.integers(0, 2, size=(batch, self.k)))
        return torch.cat([u, u], dim=-1), None

    def soft_pass(self, y, la):
        return torch.cat([la[..., self.k:], la[..., : self.k]], dim=-1)


class ZeroSiso(SisoComponent):
    """Degenerate component that outputs zero extrinsic information."""

    component_id = "zero"

    def __init__(self, n: int):
        self.block_len = n

    def sample_batch(self, batch, sigma, rng):
        return torch.from_numpy(rng.integers(0, 2, size=(batch, self.block_len))), None

    def soft_pass(self, y, la):
        return torch.zeros_like(la)


class InnerSiso(SisoComponent):
    """Trained inner autoencoder: channel observation plus priors in,
    extrinsic LLRs on its (uniform random) input bits out."""

    component_id = "inner"
    uses_channel = True

    def __init__(self, encoder, decoder, block_len: int, rate: float = 0.5):
        from . import system

        self._sys = system
        self.encoder = encoder
        self.decoder = decoder
        self.block_len = block_len
        self.rate = rate

    def sample_batch(self, batch, sigma, rng):
        c = torch.from_numpy(rng.integers(0, 2, size=(batch, self.block_len)))
        x = self._sys.inner_transmit(self.encoder, bpsk_map(c))
        return c, awgn(x, sigma, rng)

    def soft_pass(self, y, la):
        total = self._sys.inner_soft_pass(self.decoder, y, la.to(y.dtype))
        return extrinsic(total, la)

    def eval_modules(self):
        return [self.encoder, self.decoder]


class OuterSiso(SisoComponent):
    """Trained outer autoencoder: priors on its own binarized codewords in,
    refined extrinsic LLRs out. Sees no channel observation."""

    component_id = "outer"

    def __init__(self, encoder, decoder, k: int):
        from . import system

        self._sys = system
        self.encoder = encoder
        self.decoder = decoder
        self.k = k
        self.block_len = 2 * k

    def sample_batch(self, batch, sigma, rng):
        u = torch.from_numpy(rng.integers(0, 2, size=(batch, self.k)))
        c_pm = self._sys.outer_codeword(self.encoder, bpsk_map(u), "inference_binary")
        return ((c_pm + 1.0) / 2.0).to(torch.int64), None

    def soft_pass(self, y, la):
        _, total_c = self._sys.outer_soft_pass(self.decoder, la.to(torch.float32))
        return extrinsic(total_c, la)

    def eval_modules(self):
        return [self.encoder, self.decoder]


class _frozen_eval:
    """Temporarily switch modules to eval mode (frozen norm statistics)."""

    def __init__(self, modules):
        self.modules = list(modules)
        self.was_training = []

    def __enter__(self):
        self.was_training = [m.training for m in self.modules]
        for m in self.modules:
            m.eval()

    def __exit__(self, *exc):
        for m, training in zip(self.modules, self.was_training):
            m.train(training)


def measure_exit_curve(
    component: SisoComponent,
    snr_db: float,
    ia_grid=None,
    blocks: int = 200,
    rng: np.random.Generator | None = None,
    batch_size: int = 100,
) -> ExitCurve:
    """Measure the (I_A, I_E) characteristic of a component at one SNR.

    For every grid point, fresh codewords are drawn, priors are sampled at
    that information level, one component pass produces extrinsic LLRs, and
    their mutual information against the true bits is recorded.
    """
    ia_grid = DEFAULT_IA_GRID if ia_grid is None else np.asarray(ia_grid, dtype=np.float64)
    rng = np.random.default_rng(0) if rng is None else rng
    sigma = ebn0_to_sigma(snr_db, component.rate) if component.uses_channel else None
    ie = np.empty_like(ia_grid)
    with _frozen_eval(component.eval_modules()), torch.no_grad():
        for idx, ia in enumerate(ia_grid):
            point_rng = np.random.default_rng(rng.spawn(1)[0])
            le_all, c_all = [], []
            remaining = blocks
            while remaining > 0:
                batch = min(batch_size, remaining)
                c, y = component.sample_batch(batch, sigma, point_rng)
                if c.shape[-1] != component.block_len:
                    raise ValueError(
                        f"adapter produced block length {c.shape[-1]}, expected {component.block_len}"
                    )
                la = sample_prior_llrs(c, float(ia), point_rng)
                le = component.soft_pass(y, la)
                if le.shape != la.shape:
                    raise ValueError("adapter extrinsic output length mismatch")
                le_all.append(le.detach().to(torch.float64))
                c_all.append(c)
                remaining -= batch
            ie[idx] = estimate_mi(torch.cat(le_all), torch.cat(c_all))
    return ExitCurve(ia_grid=ia_grid, ie_values=ie, snr_db=snr_db, component_id=component.component_id)


def simulate_trajectory(
    inner: ExitCurve,
    outer: ExitCurve,
    max_iters: int = 64,
    progress_tol: float = 1e-4,
    converged_tol: float = 1e-3,
) -> Trajectory:
    """Ping-pong between two curves starting from zero inner a-priori MI."""
    points = []
    x = 0.0
    for _ in range(max_iters):
        ie_inner = inner.interp(x)
        points.append((x, ie_inner))
        ie_outer = outer.interp(ie_inner)
        points.append((ie_inner, ie_outer))
        progress = ie_outer - x
        x = ie_outer
        if progress < progress_tol:
            break
    return Trajectory(points=points, converged=points[-1][1] > 1.0 - converged_tol)


def find_intersection(inner: ExitCurve, outer: ExitCurve, resolution: int = 2001):
    """Smallest inner a-priori MI where iteration can no longer progress.

    Returns (1, 1) when the decoding tunnel is open on all of [0, 1).
    """
    for x in np.linspace(0.0, 1.0, resolution)[:-1]:
        y = inner.interp(x)
        if outer.interp(y) <= x + 1e-12:
            return float(x), float(y)
    return 1.0, 1.0


def exit_slope(curve: ExitCurve, window: tuple) -> float:
    """Least-squares slope of the curve restricted to an I_A window."""
    lo, hi = window
    mask = (curve.ia_grid >= lo) & (curve.ia_grid <= hi)
    if mask.sum() < 2:
        raise ValueError(f"window {window} contains fewer than 2 grid points")
    coeffs = np.polyfit(curve.ia_grid[mask], curve.ie_values[mask], 1)
    return float(coeffs[0])


def scattered_exit(system, snr_db: float, blocks: int, rng=None, n_iters=None, batch_size: int = 100):
    """Per-block (I_A, I_E) points from real iterative decoding.

    Each decoded block contributes one point per half-iteration of each
    component: the empirical MI of the a-priori LLRs it received and of the
    extrinsic LLRs it produced, both against the true bits in that
    component's domain.
    """
    from . import system as system_mod
    from .interleaving import apply as perm_apply

    rng = np.random.default_rng(0) if rng is None else rng
    sigma = ebn0_to_sigma(snr_db, system.k / system.n)
    n_iters = system.n_iters if n_iters is None else n_iters
    points = []
    with _frozen_eval(system.modules()), torch.no_grad():
        done = 0
        while done < blocks:
            batch = min(batch_size, blocks - done)
            u = torch.from_numpy(rng.integers(0, 2, size=(batch, system.k)))
            c_pm = system_mod.outer_codeword(system.outer_enc, bpsk_map(u), "inference_binary")
            c = ((c_pm + 1.0) / 2.0).to(torch.int64)
            c_int = perm_apply(system.interleaver, c)
            x = system_mod.inner_transmit(system.inner_enc, perm_apply(system.interleaver, c_pm))
            y = awgn(x, sigma, rng)
            result = system_mod.iterative_decode(system, y, n_iters=n_iters, record=True)
            for rec in result.exchanges:
                ref = c_int if rec.role == "inner" else c
                ia_rows = _mi_per_row(rec.apriori, ref)
                ie_rows = _mi_per_row(rec.extrinsic, ref)
                for b in range(batch):
                    points.append(
                        ScatterPoint(
                            block=done + b,
                            iteration=rec.iteration,
                            role=rec.role,
                            ia=float(ia_rows[b]),
                            ie=float(ie_rows[b]),
                        )
                    )
            done += batch
    points.sort(key=lambda p: (p.block, p.iteration, 0 if p.role == "inner" else 1))
    return points


@dataclass(frozen=True)
class ScatterPoint:
    block: int
    iteration: int
    role: str
    ia: float
    ie: float

    def __iter__(self):
        # behaves as an (ia, ie) pair for plotting convenience
        return iter((self.ia, self.ie))


def curve_to_csv(curve: ExitCurve, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["ia,ie,snr_db,component_id"]
    for ia, ie in zip(curve.ia_grid, curve.ie_values):
        lines.append(f"{float(ia)!r},{float(ie)!r},{float(curve.snr_db)!r},{curve.component_id}")
    path.write_text("\n".join(lines) + "\n")
    return path


def curve_from_csv(path) -> ExitCurve:
    rows = Path(path).read_text().strip().splitlines()
    header = rows[0].split(",")
    if header[:4] != ["ia", "ie", "snr_db", "component_id"]:
        raise ValueError(f"unrecognized curve CSV header in {path}")
    ia, ie, snr, cid = [], [], None, None
    for row in rows[1:]:
        f_ia, f_ie, f_snr, f_cid = row.split(",")
        ia.append(float(f_ia))
        ie.append(float(f_ie))
        snr, cid = float(f_snr), f_cid
    return ExitCurve(ia_grid=np.array(ia), ie_values=np.array(ie), snr_db=snr, component_id=cid)


def trajectory_to_csv(traj: Trajectory, path, snr_db: float = float("nan")) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["ia,ie,snr_db,component_id"]
    for idx, (ia, ie) in enumerate(traj.points):
        role = "inner" if idx % 2 == 0 else "outer"
        lines.append(f"{float(ia)!r},{float(ie)!r},{float(snr_db)!r},{role}")
    path.write_text("\n".join(lines) + "\n")
    return path
