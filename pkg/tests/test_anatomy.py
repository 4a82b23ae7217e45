"""Structure volumetry and the anatomy preservation score."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmbench.anatomy import (
    anatomy_preservation,
    as_label_volume,
    structure_volumes,
)
from harmbench.errors import NoCommonStructures, ZeroInputVolume
from harmbench.volume import LabelVolume, VoxelGrid

from oracles import label_counts_direct


def _seg(labels, dims=None, spacing=(1, 1, 1), legend=None):
    labels = np.asarray(labels, dtype=np.int64)
    if dims is None:
        dims = (labels.size, 1, 1)
    if legend is None:
        legend = {int(v): f"label-{int(v)}" for v in np.unique(labels) if v != 0}
    return LabelVolume(dims, spacing, labels, legend)


def _cube_seg(n_labeled, total=1000, label=1, spacing=(1, 1, 1)):
    labels = np.zeros(total, dtype=np.int64)
    labels[:n_labeled] = label
    return _seg(labels, (10, 10, 10), spacing)


def test_counting_with_unit_spacing():
    seg = _seg([1, 1, 1, 1, 0, 0, 0, 0], (2, 2, 2))
    (vol,) = structure_volumes(seg)
    assert vol.volume_mm3 == 4.0
    assert vol.name == "label-1"


def test_counting_with_half_millimeter_spacing():
    seg = _seg([1, 1, 1, 1, 0, 0, 0, 0], (2, 2, 2), spacing=(0.5, 0.5, 0.5))
    (vol,) = structure_volumes(seg)
    assert vol.volume_mm3 == pytest.approx(0.5, abs=1e-15)


def test_volumes_match_per_label_scan_oracle():
    rng = np.random.default_rng(13)
    labels = rng.integers(0, 5, size=16 ** 3)
    seg = _seg(labels, (16, 16, 16), spacing=(0.7, 0.8, 0.9))
    counts = label_counts_direct(labels)
    voxel = 0.7 * 0.8 * 0.9
    for sv in structure_volumes(seg):
        assert sv.volume_mm3 == pytest.approx(counts.get(sv.label, 0) * voxel, rel=1e-12)


def test_legend_labels_with_zero_voxels_still_reported():
    seg = LabelVolume((2, 1, 1), (1, 1, 1), np.array([1, 0]), {1: "GM", 2: "WM"})
    vols = {s.name: s.volume_mm3 for s in structure_volumes(seg)}
    assert vols == {"GM": 1.0, "WM": 0.0}


def test_identity_preservation_is_exactly_one():
    rng = np.random.default_rng(17)
    labels = rng.integers(0, 4, size=12 ** 3)
    seg = _seg(labels, (12, 12, 12))
    report = anatomy_preservation(seg, seg)
    assert all(v == 1.0 for v in report.per_structure.values())
    assert report.mean_ap == 1.0


def test_ten_percent_shrink_scores_point_nine():
    report = anatomy_preservation(_cube_seg(1000, 1000), _cube_seg(900, 1000))
    assert report.per_structure["label-1"] == pytest.approx(0.9, abs=1e-12)


def test_mean_is_unweighted_average():
    # GM 0.95 (1000 -> 950), WM 0.99 (100 -> 99): unweighted mean 0.97
    labels_i = np.zeros(2000, dtype=np.int64)
    labels_i[:1000] = 1
    labels_i[1000:1100] = 2
    labels_p = np.zeros(2000, dtype=np.int64)
    labels_p[:950] = 1
    labels_p[1000:1099] = 2
    legend = {1: "GM", 2: "WM"}
    seg_i = LabelVolume((2000, 1, 1), (1, 1, 1), labels_i, legend)
    seg_p = LabelVolume((2000, 1, 1), (1, 1, 1), labels_p, legend)
    report = anatomy_preservation(seg_i, seg_p)
    assert report.per_structure["GM"] == pytest.approx(0.95, abs=1e-12)
    assert report.per_structure["WM"] == pytest.approx(0.99, abs=1e-12)
    assert report.mean_ap == pytest.approx(0.97, abs=1e-12)
    weighted = anatomy_preservation(seg_i, seg_p, weighted=True)
    assert weighted.mean_ap == pytest.approx((0.95 * 1000 + 0.99 * 100) / 1100, abs=1e-12)


def test_volume_doubling_goes_negative_unclamped():
    report = anatomy_preservation(_cube_seg(100), _cube_seg(250))
    assert report.per_structure["label-1"] == pytest.approx(-0.5, abs=1e-12)


def test_growth_and_shrink_bounded_above_by_one():
    rng = np.random.default_rng(23)
    for _ in range(25):
        a = int(rng.integers(1, 500))
        b = int(rng.integers(0, 500))
        report = anatomy_preservation(_cube_seg(a), _cube_seg(b))
        assert report.per_structure["label-1"] <= 1.0
        if b > 2 * a:
            assert report.per_structure["label-1"] < 0.0


def test_zero_input_volume_raises():
    seg_i = LabelVolume((4, 1, 1), (1, 1, 1), np.array([0, 0, 0, 1]), {1: "a", 2: "b"})
    seg_p = LabelVolume((4, 1, 1), (1, 1, 1), np.array([2, 0, 0, 1]), {1: "a", 2: "b"})
    with pytest.raises(ZeroInputVolume):
        anatomy_preservation(seg_i, seg_p)


def test_no_common_structures_raises():
    with pytest.raises(NoCommonStructures):
        anatomy_preservation(_cube_seg(10, label=1), _cube_seg(10, label=2))


def test_dims_mismatch_warns_but_compares_physical_volumes():
    seg_i = _seg([1] * 8, (2, 2, 2))
    seg_p = _seg([1] * 8 + [0] * 19, (3, 3, 3))
    with pytest.warns(UserWarning, match="dims differ"):
        report = anatomy_preservation(seg_i, seg_p)
    assert report.mean_ap == 1.0


@given(st.permutations([1, 2, 3]))
@settings(max_examples=30)
def test_relabeling_permutation_invariance(perm):
    rng = np.random.default_rng(29)
    labels = rng.integers(0, 4, size=10 ** 3)
    mapping = {0: 0, 1: perm[0], 2: perm[1], 3: perm[2]}
    relabeled = np.vectorize(mapping.get)(labels)
    legend = {1: "a", 2: "b", 3: "c"}
    relabeled_legend = {mapping[k]: v for k, v in legend.items()}
    seg_a = LabelVolume((10, 10, 10), (1, 1, 1), labels, legend)
    seg_b = LabelVolume((10, 10, 10), (1, 1, 1), relabeled, relabeled_legend)
    report_a = anatomy_preservation(seg_a, seg_a)
    report_b = anatomy_preservation(seg_b, seg_b)
    assert report_a.per_structure == report_b.per_structure


@given(st.floats(0.1, 10.0, allow_nan=False))
@settings(max_examples=50)
def test_common_spacing_factor_cancels(factor):
    rng = np.random.default_rng(31)
    labels_i = rng.integers(0, 3, size=8 ** 3)
    labels_p = rng.integers(0, 3, size=8 ** 3)
    base = (1.0, 1.2, 0.8)
    scaled = tuple(s * factor for s in base)
    legend = {1: "a", 2: "b"}
    r1 = anatomy_preservation(
        LabelVolume((8, 8, 8), base, labels_i, legend),
        LabelVolume((8, 8, 8), base, labels_p, legend),
    )
    r2 = anatomy_preservation(
        LabelVolume((8, 8, 8), scaled, labels_i, legend),
        LabelVolume((8, 8, 8), scaled, labels_p, legend),
    )
    for name in r1.per_structure:
        assert r1.per_structure[name] == pytest.approx(r2.per_structure[name], abs=1e-12)


def test_as_label_volume_conversion():
    grid = VoxelGrid((2, 2, 1), (1, 1, 1), [0.0, 1.0, 2.0, 1.0])
    seg = as_label_volume(grid)
    assert seg.legend == {1: "label-1", 2: "label-2"}
    seg_named = as_label_volume(grid, {1: "GM", 2: "WM"})
    assert seg_named.legend == {1: "GM", 2: "WM"}
    with pytest.raises(ValueError):
        as_label_volume(VoxelGrid((1, 1, 1), (1, 1, 1), [0.5]))
    with pytest.raises(ValueError):
        as_label_volume(grid, {1: "GM"})  # label 2 unnamed
