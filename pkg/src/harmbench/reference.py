"""Classical full-reference quality metrics on paired volumes.

All four metrics are computed after background removal: the pair is
jointly min-max normalized by the minimum and maximum intensity found
on the union of the two foregrounds, errors are averaged over that same
union, and the structural similarity map is evaluated only at fully
interior windows whose center voxel is foreground.

The structural similarity uses a cubic uniform window (population
moments, every voxel in the window weighted equally). Absolute SSIM
numbers from tools using Gaussian-weighted 2-D windows will differ.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .distribution import ForegroundPolicy, foreground_mask
from .errors import DegenerateRange, DimsMismatch, EmptyForeground
from .volume import VoxelGrid

PSNR_PERFECT = math.inf  # sentinel for a zero-error pair; aggregation skips it


@dataclass(frozen=True)
class SsimParams:
    """Window size and stabilization constants for structural similarity."""

    window: int = 7
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ValueError("k1, k2 and dynamic_range must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclass(frozen=True)
class PairedMetricRow:
    ssim: float
    psnr_db: float
    mae: float
    mse: float


def _ssim_mean(
    x: np.ndarray, y: np.ndarray, valid: np.ndarray, params: SsimParams
) -> float:
    w = params.window
    ux = uniform_filter(x, size=w)
    uy = uniform_filter(y, size=w)
    uxx = uniform_filter(x * x, size=w)
    uyy = uniform_filter(y * y, size=w)
    uxy = uniform_filter(x * y, size=w)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    cov = uxy - ux * uy
    c1, c2 = params.c1, params.c2
    ssim_map = ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / (
        (ux * ux + uy * uy + c1) * (vx + vy + c2)
    )
    return float(np.mean(ssim_map[valid]))


def paired_metrics(
    pred: VoxelGrid,
    gt: VoxelGrid,
    policy: ForegroundPolicy = ForegroundPolicy(),
    params: SsimParams = SsimParams(),
) -> PairedMetricRow:
    """MAE, MSE, PSNR and SSIM of a prediction against its ground truth.

    A bit-identical pair returns (ssim=1, psnr=+inf sentinel, mae=0,
    mse=0). The union foreground is used rather than the intersection so
    tissue hallucinated over background is counted, not hidden.
    """
    if pred.dims != gt.dims or pred.channel_count != gt.channel_count:
        raise DimsMismatch(
            f"pred {pred.dims}x{pred.channel_count} != gt {gt.dims}x{gt.channel_count}"
        )
    if pred.channel_count != 1:
        raise ValueError("paired metrics are single-channel; select a channel first")

    fg = foreground_mask(pred, policy) | foreground_mask(gt, policy)
    if not fg.any():
        raise EmptyForeground("neither image has foreground under this policy")

    lo = min(float(pred.values[fg].min()), float(gt.values[fg].min()))
    hi = max(float(pred.values[fg].max()), float(gt.values[fg].max()))
    if not hi > lo:
        raise DegenerateRange("joint foreground min equals max; cannot normalize")

    scale = hi - lo
    a = (pred.values - lo) / scale
    b = (gt.values - lo) / scale

    diff = a[fg] - b[fg]
    mae = float(np.mean(np.abs(diff)))
    mse = float(np.mean(diff * diff))
    L = params.dynamic_range
    psnr_db = PSNR_PERFECT if mse == 0.0 else 10.0 * math.log10(L * L / mse)

    w = params.window
    nx, ny, nz = pred.dims
    if min(nx, ny, nz) < w:
        raise ValueError(f"SSIM window {w} exceeds volume extent {pred.dims}")
    r = w // 2
    interior = np.zeros(pred.dims, dtype=bool)
    interior[r : nx - r, r : ny - r, r : nz - r] = True
    valid = interior & fg.reshape(pred.dims, order="F")
    if not valid.any():
        raise EmptyForeground("no full window has a foreground center")
    ssim = _ssim_mean(
        a.reshape(pred.dims, order="F"), b.reshape(pred.dims, order="F"), valid, params
    )

    return PairedMetricRow(ssim=ssim, psnr_db=psnr_db, mae=mae, mse=mse)
