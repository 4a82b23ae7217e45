"""Exact 1-D Wasserstein distance and the normalized harmonization pair.

The order-1 distance between two weighted empirical distributions is
the integral of the absolute difference of their quantile functions.
Both quantile functions are step functions, so merging the two
cumulative-weight breakpoint sequences gives segments on which the
integrand is constant and the integral is a finite sum. That makes the
distance exact up to float rounding, symmetric by construction, and
zero exactly when the two weighted multisets coincide.

The normalized pair divides the prediction's distance to the input and
to the target by the input-to-target distance, which anchors the scale:
a prediction equal to the input scores (0, 1), one equal to the target
scores (1, 0), and moving past the target pushes the first coordinate
above 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distribution import EmpiricalDistribution
from .errors import DegenerateNormalizer

DEFAULT_VERDICT_TOL = 0.05
NORMALIZER_EPS_FACTOR = 1e-9  # times the joint input/target intensity range


def wasserstein_1d(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Order-1 Wasserstein distance between two empirical distributions."""
    qa = np.cumsum(a.weights)
    qb = np.cumsum(b.weights)
    q = np.sort(np.concatenate([qa, qb]))
    lo = np.concatenate(([0.0], q[:-1]))
    widths = q - lo
    mid = 0.5 * (lo + q)
    ia = np.minimum(np.searchsorted(qa, mid, side="left"), a.n - 1)
    ib = np.minimum(np.searchsorted(qb, mid, side="left"), b.n - 1)
    return float(np.sum(widths * np.abs(a.values[ia] - b.values[ib])))


@dataclass(frozen=True)
class WdPair:
    """Raw and normalized distances for one (input, target, prediction)."""

    wd_ip: float
    wd_tp: float
    wd_it: float
    nwd_ip: float
    nwd_tp: float


class Verdict(str, Enum):
    NO_HARMONIZATION = "NoHarmonization"
    PERFECT = "Perfect"
    PARTIAL = "Partial"
    OVER_CORRECTED = "OverCorrected"


@dataclass(frozen=True)
class HarmonizationVerdict:
    kind: Verdict
    tolerance: float


def nwd(
    input_dist: EmpiricalDistribution,
    target_dist: EmpiricalDistribution,
    pred_dist: EmpiricalDistribution,
) -> WdPair:
    """Normalized Wasserstein pair for one harmonization triplet.

    Raises :class:`DegenerateNormalizer` when input and target are not
    distinguishable enough to anchor the normalization.
    """
    wd_it = wasserstein_1d(input_dist, target_dist)
    joint_range = max(input_dist.support_max, target_dist.support_max) - min(
        input_dist.support_min, target_dist.support_min
    )
    if wd_it <= NORMALIZER_EPS_FACTOR * joint_range:
        raise DegenerateNormalizer(
            f"input/target distance {wd_it!r} is below {NORMALIZER_EPS_FACTOR!r} "
            "of the joint intensity range; the protocols are indistinguishable"
        )
    wd_ip = wasserstein_1d(input_dist, pred_dist)
    wd_tp = wasserstein_1d(target_dist, pred_dist)
    return WdPair(
        wd_ip=wd_ip,
        wd_tp=wd_tp,
        wd_it=wd_it,
        nwd_ip=wd_ip / wd_it,
        nwd_tp=wd_tp / wd_it,
    )


def classify(pair: WdPair, tol: float = DEFAULT_VERDICT_TOL) -> HarmonizationVerdict:
    """Band classification of a normalized pair.

    Bands around the two landmark points (0, 1) and (1, 0) have
    half-width ``tol``; anything beyond 1 + tol on the input axis is
    over-correction, everything else is partial harmonization. The
    bands are disjoint for any tol < 0.5.
    """
    if not 0.0 < tol < 0.5:
        raise ValueError(f"tol must be in (0, 0.5), got {tol!r}")
    if pair.nwd_ip <= tol and abs(pair.nwd_tp - 1.0) <= tol:
        kind = Verdict.NO_HARMONIZATION
    elif abs(pair.nwd_ip - 1.0) <= tol and pair.nwd_tp <= tol:
        kind = Verdict.PERFECT
    elif pair.nwd_ip > 1.0 + tol:
        kind = Verdict.OVER_CORRECTED
    else:
        kind = Verdict.PARTIAL
    return HarmonizationVerdict(kind=kind, tolerance=tol)
