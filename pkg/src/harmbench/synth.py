"""Deterministic two-site phantoms and a histogram-matching baseline.

The phantom is a handful of non-overlapping noisy spheres on a zero
background, pushed through a monotone per-site intensity map
(gain * v**gamma + bias). Randomness comes from the counter-based
Philox bit generator keyed by the spec seed, so a fixed seed gives
byte-identical volumes run after run.

The bundled harmonizer is quantile matching: source foreground
intensities are remapped through the piecewise-linear composition of
the source CDF with the reference inverse CDF. It is monotone and never
touches background voxels, so it provably preserves anatomy, which is
exactly what makes it useful as a known-good fixture rather than a
model under test.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distribution import ForegroundPolicy, foreground_mask
from .errors import EmptyForeground, OverlappingStructures
from .nifti import write_volume
from .volume import LabelVolume, VoxelGrid

INTENSITY_FLOOR = 1e-3  # keeps foreground strictly positive through the site map


@dataclass(frozen=True)
class Sphere:
    """One noisy spherical structure: label, voxel-space geometry, N(mean, std)."""

    label: int
    center: tuple[float, float, float]
    radius: float
    mean: float
    std: float


@dataclass(frozen=True)
class SiteTransform:
    """Monotone intensity map v -> gain * v**gamma + bias applied to foreground."""

    gain: float = 1.0
    bias: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.gain <= 0 or self.gamma <= 0:
            raise ValueError("gain and gamma must be positive")

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.gain * np.power(v, self.gamma) + self.bias


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    seed: int
    structures: tuple[Sphere, ...]
    site_transform: SiteTransform = SiteTransform()
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "structures", tuple(self.structures))
        if not self.structures:
            raise ValueError("phantom needs at least one structure")
        for s in self.structures:
            if s.radius <= 0:
                raise ValueError(f"sphere radius must be positive, got {s.radius}")
            if s.label <= 0:
                raise ValueError("sphere labels must be positive")
            for c, d in zip(s.center, self.dims):
                if c - s.radius < 0 or c + s.radius > d - 1:
                    raise ValueError(f"sphere at {s.center} r={s.radius} leaves {self.dims}")


def _sphere_mask(dims: tuple[int, int, int], sphere: Sphere) -> np.ndarray:
    nx, ny, nz = dims
    x = np.arange(nx, dtype=np.float64)[:, None, None]
    y = np.arange(ny, dtype=np.float64)[None, :, None]
    z = np.arange(nz, dtype=np.float64)[None, None, :]
    cx, cy, cz = sphere.center
    d2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
    return (d2 <= sphere.radius ** 2).ravel(order="F")


def generate_phantom(spec: PhantomSpec) -> tuple[VoxelGrid, LabelVolume]:
    """Render a phantom: (intensity grid, matching label volume).

    Structures are drawn in listed order from one Philox stream, so the
    raw anatomy depends only on (seed, dims, structures); two specs that
    differ only in site_transform share identical underlying draws.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    n = spec.dims[0] * spec.dims[1] * spec.dims[2]
    values = np.zeros(n)
    labels = np.zeros(n, dtype=np.int64)
    for s in spec.structures:
        mask = _sphere_mask(spec.dims, s)
        if (labels[mask] != 0).any():
            raise OverlappingStructures(f"sphere {s.label} overlaps an earlier structure")
        draws = rng.normal(s.mean, s.std, size=int(mask.sum()))
        # clamp before the power map so noninteger gamma stays defined
        draws = np.maximum(draws, INTENSITY_FLOOR)
        values[mask] = np.maximum(spec.site_transform.apply(draws), INTENSITY_FLOOR)
        labels[mask] = s.label
    grid = VoxelGrid(spec.dims, spec.spacing, values)
    legend = {s.label: f"label-{s.label}" for s in spec.structures}
    seg = LabelVolume(spec.dims, spec.spacing, labels, legend)
    return grid, seg


def histogram_match(
    source: VoxelGrid,
    reference: VoxelGrid,
    policy: ForegroundPolicy = ForegroundPolicy(),
) -> VoxelGrid:
    """Remap source foreground intensities onto the reference distribution.

    The map sends each source intensity to the reference quantile of its
    own source quantile (piecewise-linear between observed reference
    values), so it is monotone: intensity rank order survives. Background
    voxels pass through untouched.
    """
    src_fg = foreground_mask(source, policy)
    ref_fg = foreground_mask(reference, policy)
    if not src_fg.any() or not ref_fg.any():
        raise EmptyForeground("histogram matching needs foreground on both sides")

    src = source.values[src_fg]
    ref = reference.values[ref_fg]
    s_values, s_inverse, s_counts = np.unique(src, return_inverse=True, return_counts=True)
    r_values, r_counts = np.unique(ref, return_counts=True)
    s_quantiles = np.cumsum(s_counts) / src.size
    r_quantiles = np.cumsum(r_counts) / ref.size
    mapped_unique = np.interp(s_quantiles, r_quantiles, r_values)

    out = source.values.copy()
    out[src_fg] = mapped_unique[s_inverse]
    return VoxelGrid(source.dims, source.spacing, out, channel_count=source.channel_count)


# --------------------------------------------------------------- dataset


def _site_transform(site: int) -> SiteTransform:
    if site == 0:
        return SiteTransform()
    return SiteTransform(gain=1.0 + 0.6 * site, bias=12.0 * site, gamma=1.0 + 0.08 * site)


def _site_name(site: int) -> str:
    return chr(ord("A") + site)


def _structures(dims: tuple[int, int, int], radius_scale: float = 1.0) -> tuple[Sphere, ...]:
    nx, ny, nz = dims
    # two tissue-like blobs, scaled to the grid, never overlapping
    return (
        Sphere(1, (0.36 * nx, 0.5 * ny, 0.5 * nz), 0.16 * min(dims) * radius_scale, 60.0, 6.0),
        Sphere(2, (0.70 * nx, 0.5 * ny, 0.5 * nz), 0.11 * min(dims) * radius_scale, 100.0, 8.0),
    )


def write_synthetic_dataset(
    out_dir: str | Path,
    *,
    sites: int = 2,
    n: int = 10,
    seed: int = 42,
    size: int = 64,
) -> Path:
    """Write a ready-to-evaluate phantom dataset and return the manifest path.

    Each triplet k flows from site s to site s+1 (round robin): the input
    and its ground truth share one anatomy rendered under the two site
    maps, the target is an independent anatomy under the output site map,
    and the prediction is the input quantile-matched to the target. One
    shared label volume serves as both segmentations because the matcher
    never moves a voxel across the foreground boundary.
    """
    if sites < 2:
        raise ValueError("need at least 2 sites")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dims = (size, size, size)
    structures = _structures(dims)
    # the target is a different "subject": slightly larger structures, so
    # its foreground count differs and matching actually interpolates
    target_structures = _structures(dims, radius_scale=1.06)
    policy = ForegroundPolicy()

    def anatomy_seed(k: int, role: int) -> int:
        return seed * 1_000_003 + 2 * k + role

    _, seg = generate_phantom(PhantomSpec(dims, anatomy_seed(0, 0), structures))
    seg_path = out_dir / "seg.nii.gz"
    write_volume(VoxelGrid(dims, seg.spacing, seg.labels.astype(np.float64)), seg_path)

    rows = []
    for k in range(n):
        site_in = k % sites
        site_out = (site_in + 1) % sites
        t_in, t_out = _site_transform(site_in), _site_transform(site_out)

        grid_in, _ = generate_phantom(
            PhantomSpec(dims, anatomy_seed(k, 0), structures, site_transform=t_in)
        )
        grid_gt, _ = generate_phantom(
            PhantomSpec(dims, anatomy_seed(k, 0), structures, site_transform=t_out)
        )
        grid_tg, _ = generate_phantom(
            PhantomSpec(dims, anatomy_seed(k, 1), target_structures, site_transform=t_out)
        )
        grid_pr = histogram_match(grid_in, grid_tg, policy)

        names = {
            "input_path": f"input_{k:03d}.nii.gz",
            "target_path": f"target_{k:03d}.nii.gz",
            "pred_path": f"pred_{k:03d}.nii.gz",
            "gt_path": f"gt_{k:03d}.nii.gz",
        }
        write_volume(grid_in, out_dir / names["input_path"])
        write_volume(grid_tg, out_dir / names["target_path"])
        write_volume(grid_pr, out_dir / names["pred_path"])
        write_volume(grid_gt, out_dir / names["gt_path"])
        rows.append(
            {
                "id": f"triplet-{k:03d}",
                **names,
                "seg_input_path": seg_path.name,
                "seg_pred_path": seg_path.name,
                "site_in": _site_name(site_in),
                "site_out": _site_name(site_out),
                "channel": "",
            }
        )

    manifest = out_dir / "manifest.csv"
    fieldnames = [
        "id", "input_path", "target_path", "pred_path", "gt_path",
        "seg_input_path", "seg_pred_path", "site_in", "site_out", "channel",
    ]
    with open(manifest, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return manifest
