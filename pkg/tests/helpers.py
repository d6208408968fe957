"""Independent oracles used across the test suite.

These deliberately avoid the library's own estimators: mutual information is
computed from conditional histograms and gradients from central finite
differences, so library results are checked against a second route.
"""

import math

import numpy as np
import torch


def q_function(x: float) -> float:
    """Gaussian tail probability Q(x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def histogram_mi(llrs, bits, n_bins=200, lo=-40.0, hi=40.0) -> float:
    """MI between LLRs and bits from conditional histograms.

    I = 0.5 * sum_b integral p(l|b) log2(2 p(l|b) / (p(l|0) + p(l|1))) dl,
    evaluated on a common binning.
    """
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    bits = np.asarray(bits).ravel()
    edges = np.linspace(lo, hi, n_bins + 1)
    p0, _ = np.histogram(llrs[bits == 0], bins=edges, density=True)
    p1, _ = np.histogram(llrs[bits == 1], bins=edges, density=True)
    width = edges[1] - edges[0]
    total = 0.0
    for cond in (p0, p1):
        mask = cond > 0
        ratio = 2.0 * cond[mask] / (p0[mask] + p1[mask])
        total += 0.5 * width * np.sum(cond[mask] * np.log2(ratio))
    return float(total)


def finite_diff_grads(loss_fn, params, eps=1e-5):
    """Central finite differences of a scalar loss w.r.t. a parameter list."""
    grads = []
    for p in params:
        g = torch.zeros_like(p)
        flat = p.data.view(-1)
        gflat = g.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            up = loss_fn().item()
            flat[i] = orig - eps
            down = loss_fn().item()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def relative_grad_error(analytic, numeric) -> float:
    """||a - n|| / max(||a||, ||n||) over concatenated gradients."""
    a = torch.cat([g.reshape(-1) for g in analytic])
    n = torch.cat([g.reshape(-1) for g in numeric])
    denom = max(a.norm().item(), n.norm().item(), 1e-30)
    return (a - n).norm().item() / denom
