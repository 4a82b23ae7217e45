"""Anatomy preservation from pre/post-harmonization segmentations.

The score for one structure is one minus the relative absolute change
of its physical volume between the input and the predicted image's
segmentation. A perfectly preserved structure scores 1; a structure
whose volume more than doubles goes negative. Scores are never clamped:
negative values are the diagnostic signal for severe hallucination.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoCommonStructures, ZeroInputVolume
from .volume import LabelVolume, VoxelGrid, default_legend


@dataclass(frozen=True)
class StructureVolume:
    label: int
    name: str
    volume_mm3: float


@dataclass(frozen=True, eq=False)
class ApReport:
    """Per-structure preservation scores and their mean."""

    per_structure: dict[str, float]
    mean_ap: float

    def __eq__(self, other) -> bool:
        if not isinstance(other, ApReport):
            return NotImplemented
        return self.per_structure == other.per_structure and self.mean_ap == other.mean_ap


def as_label_volume(grid: VoxelGrid, legend: dict[int, str] | None = None) -> LabelVolume:
    """Reinterpret an integer-valued grid as a segmentation.

    Without a legend every distinct nonzero label becomes ``label-<k>``.
    """
    if grid.channel_count != 1:
        raise ValueError("label volumes are single-channel")
    rounded = np.rint(grid.values)
    if not np.array_equal(rounded, grid.values) or (rounded < 0).any():
        raise ValueError("segmentation voxels must be nonnegative integers")
    labels = rounded.astype(np.int64)
    if legend is None:
        legend = default_legend(labels)
    else:
        present = {int(v) for v in np.unique(labels) if v != 0}
        named = set(legend)
        unnamed = sorted(present - named)
        if unnamed:
            raise ValueError(f"labels {unnamed} present in volume but absent from legend")
        legend = {k: v for k, v in legend.items() if k in present}
    return LabelVolume(grid.dims, grid.spacing, labels, legend)


def structure_volumes(seg: LabelVolume) -> list[StructureVolume]:
    """Physical volume of every legend structure, including empty ones."""
    if seg.legend:
        counts = np.bincount(seg.labels, minlength=max(seg.legend) + 1)
    else:
        counts = np.bincount(seg.labels)
    voxel = seg.voxel_volume_mm3
    return [
        StructureVolume(label=label, name=name, volume_mm3=float(counts[label]) * voxel)
        for label, name in sorted(seg.legend.items())
    ]


def anatomy_preservation(
    seg_input: LabelVolume, seg_pred: LabelVolume, *, weighted: bool = False
) -> ApReport:
    """Volume-preservation score over the structures both segmentations share.

    The mean is unweighted by default; ``weighted`` switches to weighting
    by input volume, which is never the default reporting convention.
    Differing grid dims are legal (volumes are physical) but usually a
    pipeline error, hence the warning.
    """
    if seg_input.dims != seg_pred.dims:
        warnings.warn(
            f"segmentation dims differ ({seg_input.dims} vs {seg_pred.dims}); "
            "volumes are still comparable but check the pipeline",
            stacklevel=2,
        )
    shared = sorted(set(seg_input.legend) & set(seg_pred.legend))
    if not shared:
        raise NoCommonStructures("segmentations share no nonzero label")

    vol_in = {s.label: s.volume_mm3 for s in structure_volumes(seg_input)}
    vol_pr = {s.label: s.volume_mm3 for s in structure_volumes(seg_pred)}

    per_structure: dict[str, float] = {}
    input_volumes: list[float] = []
    for label in shared:
        vi = vol_in[label]
        if vi <= 0.0:
            raise ZeroInputVolume(
                f"structure {seg_input.legend[label]!r} has zero input volume"
            )
        per_structure[seg_input.legend[label]] = 1.0 - abs(vol_pr[label] - vi) / vi
        input_volumes.append(vi)

    scores = list(per_structure.values())
    if weighted:
        total = sum(input_volumes)
        mean_ap = sum(s * v for s, v in zip(scores, input_volumes)) / total
    else:
        mean_ap = sum(scores) / len(scores)
    return ApReport(per_structure=per_structure, mean_ap=mean_ap)
