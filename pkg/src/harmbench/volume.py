"""In-memory volume types shared by every metric.

A :class:`VoxelGrid` is an immutable 3-D scalar intensity volume with
physical voxel spacing; a :class:`LabelVolume` is its integer-labeled
segmentation counterpart. Values live in flat arrays in x-fastest order
(index ``i + nx*(j + ny*(k + nz*c))``), widened to float64 / int64 so all
downstream math has one numeric contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteVoxel

Dims = tuple[int, int, int]
Spacing = tuple[float, float, float]


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """3-D scalar intensity volume with voxel spacing in millimeters.

    ``values`` is flat, x-fastest, one ``nx*ny*nz`` block per channel.
    Instances are immutable and safe to share across threads.
    """

    dims: Dims
    spacing: Spacing
    values: np.ndarray
    channel_count: int = 1

    def __post_init__(self):
        nx, ny, nz = (int(d) for d in self.dims)
        if min(nx, ny, nz) < 1:
            raise ValueError(f"dims must be positive, got {self.dims!r}")
        if int(self.channel_count) < 1:
            raise ValueError(f"channel_count must be >= 1, got {self.channel_count!r}")
        spacing = tuple(float(s) for s in self.spacing)
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing!r}")
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        expected = nx * ny * nz * int(self.channel_count)
        if values.size != expected:
            raise ValueError(
                f"values length {values.size} != nx*ny*nz*channels = {expected}"
            )
        if not np.isfinite(values).all():
            raise NonFiniteVoxel("voxel values must all be finite")
        object.__setattr__(self, "dims", (nx, ny, nz))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", _frozen_array(values))
        object.__setattr__(self, "channel_count", int(self.channel_count))

    @property
    def voxels_per_channel(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def channel(self, c: int) -> "VoxelGrid":
        """Single-channel view of channel ``c``."""
        if not 0 <= c < self.channel_count:
            raise ValueError(
                f"channel {c} out of range for {self.channel_count}-channel grid"
            )
        n = self.voxels_per_channel
        return VoxelGrid(self.dims, self.spacing, self.values[c * n : (c + 1) * n])

    def as_array(self, channel: int = 0) -> np.ndarray:
        """Channel data as a read-only (nx, ny, nz) array."""
        n = self.voxels_per_channel
        block = self.values[channel * n : (channel + 1) * n]
        return block.reshape(self.dims, order="F")

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.channel_count == other.channel_count
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Integer-labeled segmentation grid; label 0 is background.

    ``legend`` maps every nonzero label that appears in ``labels`` to a
    structure name.
    """

    dims: Dims
    spacing: Spacing
    labels: np.ndarray
    legend: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        nx, ny, nz = (int(d) for d in self.dims)
        if min(nx, ny, nz) < 1:
            raise ValueError(f"dims must be positive, got {self.dims!r}")
        spacing = tuple(float(s) for s in self.spacing)
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing!r}")
        labels = np.asarray(self.labels).reshape(-1)
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
        labels = labels.astype(np.int64, copy=False)
        if labels.size != nx * ny * nz:
            raise ValueError(f"labels length {labels.size} != nx*ny*nz = {nx * ny * nz}")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        legend = {int(k): str(v) for k, v in dict(self.legend).items()}
        present = [int(v) for v in np.unique(labels) if v != 0]
        missing = [v for v in present if v not in legend]
        if missing:
            raise ValueError(f"labels {missing} present in volume but absent from legend")
        object.__setattr__(self, "dims", (nx, ny, nz))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "labels", _frozen_array(labels))
        object.__setattr__(self, "legend", legend)

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def as_array(self) -> np.ndarray:
        return self.labels.reshape(self.dims, order="F")

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.legend == other.legend
            and np.array_equal(self.labels, other.labels)
        )


def default_legend(labels: np.ndarray) -> dict[int, str]:
    """``label-<k>`` name for every distinct nonzero label."""
    return {int(v): f"label-{int(v)}" for v in np.unique(labels) if v != 0}
