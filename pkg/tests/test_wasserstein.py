"""Exact 1-D transport distance, the normalized pair, and verdicts."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmbench.distribution import EmpiricalDistribution, coarsen_jointly
from harmbench.errors import DegenerateNormalizer
from harmbench.wasserstein import Verdict, WdPair, classify, nwd, wasserstein_1d

from oracles import wd_cdf_integral, wd_matching


def _u(samples):
    return EmpiricalDistribution.from_samples(samples)


def test_identical_distributions_have_zero_distance():
    assert wasserstein_1d(_u([1, 2, 3]), _u([1, 2, 3])) == 0.0


def test_point_mass_translation():
    assert wasserstein_1d(_u([0.0]), _u([5.0])) == 5.0


def test_small_fixture_matches_brute_force_matching():
    a, b = [0, 0, 4], [1, 3, 5]
    want = wd_matching(a, b)  # enumerates all 3! pairings -> 5/3
    assert want == pytest.approx(5 / 3, abs=1e-12)
    assert wasserstein_1d(_u(a), _u(b)) == pytest.approx(want, abs=1e-9)


def test_weighted_vs_expanded_multiset():
    # (1,1,3) uniform == values (1,3) with weights (2/3, 1/3)
    compact = EmpiricalDistribution([1.0, 3.0], [2 / 3, 1 / 3])
    expanded = _u([1, 1, 3])
    other = _u([0, 2, 4])
    assert wasserstein_1d(compact, other) == pytest.approx(
        wasserstein_1d(expanded, other), abs=1e-12
    )


def test_unequal_sizes_match_cdf_integration():
    rng = np.random.default_rng(21)
    for _ in range(50):
        a = rng.integers(0, 10, size=rng.integers(1, 9))
        b = rng.integers(0, 10, size=rng.integers(1, 9))
        da, db = _u(a), _u(b)
        want = wd_cdf_integral(da.values, da.weights, db.values, db.weights)
        assert wasserstein_1d(da, db) == pytest.approx(want, abs=1e-9)


@st.composite
def _dist(draw, max_size=40, lo=-100.0, hi=100.0):
    samples = draw(
        st.lists(
            st.floats(lo, hi, allow_nan=False, allow_infinity=False),
            min_size=1,
            max_size=max_size,
        )
    )
    return _u(samples)


@given(_dist(), _dist())
@settings(max_examples=200, deadline=None)
def test_symmetry_exact(a, b):
    assert wasserstein_1d(a, b) == wasserstein_1d(b, a)


@given(_dist(), _dist())
@settings(max_examples=200, deadline=None)
def test_nonnegative_and_zero_on_self(a, b):
    assert wasserstein_1d(a, b) >= 0.0
    assert wasserstein_1d(a, a) == 0.0


@given(_dist(), _dist(), _dist())
@settings(max_examples=150, deadline=None)
def test_triangle_inequality(a, b, c):
    assert wasserstein_1d(a, c) <= wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-9


@given(_dist(max_size=20), _dist(max_size=20), st.floats(-50, 50, allow_nan=False))
@settings(max_examples=150, deadline=None)
def test_translating_both_changes_nothing(a, b, c):
    shifted_a = EmpiricalDistribution(a.values + c, a.weights)
    shifted_b = EmpiricalDistribution(b.values + c, b.weights)
    assert wasserstein_1d(shifted_a, shifted_b) == pytest.approx(
        wasserstein_1d(a, b), abs=1e-9
    )


@given(st.floats(-20, 20, allow_nan=False), st.floats(0.0, 30, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_translating_one_point_mass_moves_distance_by_shift(x, c):
    base = wasserstein_1d(_u([x]), _u([x]))
    assert base == 0.0
    assert wasserstein_1d(_u([x + c]), _u([x])) == pytest.approx(abs(c), abs=1e-12)
    # a shift that does not cross the other mass changes the gap by exactly c
    far = x + 100.0
    assert wasserstein_1d(_u([x + c]), _u([far])) == pytest.approx(
        (far - x) - c, abs=1e-9
    )


# --------------------------------------------------------------- normalized


def test_no_harmonization_identity():
    i, t = _u([0, 1, 2]), _u([10, 11, 12])
    pair = nwd(i, t, i)
    assert (pair.nwd_ip, pair.nwd_tp) == (0.0, 1.0)
    assert classify(pair).kind is Verdict.NO_HARMONIZATION


def test_perfect_harmonization_identity():
    i, t = _u([0, 1, 2]), _u([10, 11, 12])
    pair = nwd(i, t, t)
    assert (pair.nwd_ip, pair.nwd_tp) == (1.0, 0.0)
    assert classify(pair).kind is Verdict.PERFECT


def test_point_mass_over_correction():
    pair = nwd(_u([0.0]), _u([10.0]), _u([12.0]))
    assert pair.wd_ip == 12.0 and pair.wd_tp == 2.0 and pair.wd_it == 10.0
    assert pair.nwd_ip == pytest.approx(1.2, abs=1e-12)
    assert pair.nwd_tp == pytest.approx(0.2, abs=1e-12)
    assert classify(pair, 0.05).kind is Verdict.OVER_CORRECTED


def test_partial_band_matches_published_style_values():
    pair = WdPair(wd_ip=0.906, wd_tp=0.087, wd_it=1.0, nwd_ip=0.906, nwd_tp=0.087)
    assert classify(pair, 0.05).kind is Verdict.PARTIAL


def test_degenerate_normalizer_raises():
    i = _u([0, 1, 2])
    with pytest.raises(DegenerateNormalizer):
        nwd(i, _u([0, 1, 2]), _u([5, 6, 7]))
    # all three identical point masses: zero range, still degenerate
    with pytest.raises(DegenerateNormalizer):
        nwd(_u([3.0]), _u([3.0]), _u([3.0]))


def test_nwd_fields_are_consistent():
    rng = np.random.default_rng(2)
    i, t, p = (_u(rng.uniform(0, 10, 30)) for _ in range(3))
    pair = nwd(i, t, p)
    assert pair.nwd_ip == pytest.approx(pair.wd_ip / pair.wd_it, abs=1e-12)
    assert pair.nwd_tp == pytest.approx(pair.wd_tp / pair.wd_it, abs=1e-12)
    assert pair.wd_it > 0


@given(
    st.integers(0, 2 ** 32 - 1),
    st.floats(0.01, 100.0, allow_nan=False, allow_infinity=False),
)
@settings(max_examples=100, deadline=None)
def test_scale_invariance_of_normalized_pair(seed, scale):
    rng = np.random.default_rng(seed)
    i = _u(rng.uniform(0, 5, 25))
    t = _u(rng.uniform(6, 12, 25))
    p = _u(rng.uniform(0, 12, 25))
    base = nwd(i, t, p)
    scaled = nwd(
        EmpiricalDistribution(i.values * scale, i.weights),
        EmpiricalDistribution(t.values * scale, t.weights),
        EmpiricalDistribution(p.values * scale, p.weights),
    )
    assert scaled.nwd_ip == pytest.approx(base.nwd_ip, abs=1e-9)
    assert scaled.nwd_tp == pytest.approx(base.nwd_tp, abs=1e-9)


def test_verdict_tolerance_validation():
    pair = WdPair(1, 1, 1, 1.0, 1.0)
    with pytest.raises(ValueError):
        classify(pair, 0.0)
    with pytest.raises(ValueError):
        classify(pair, 0.5)


@pytest.mark.parametrize(
    "nwd_ip,nwd_tp,kind",
    [
        (0.04, 0.96, Verdict.NO_HARMONIZATION),
        (0.96, 0.04, Verdict.PERFECT),
        (1.051, 0.3, Verdict.OVER_CORRECTED),
        (0.5, 0.5, Verdict.PARTIAL),
        (1.04, 0.5, Verdict.PARTIAL),
    ],
)
def test_verdict_band_edges(nwd_ip, nwd_tp, kind):
    pair = WdPair(nwd_ip, nwd_tp, 1.0, nwd_ip, nwd_tp)
    assert classify(pair, 0.05).kind is kind


def test_binned_agreement_on_gaussian_mixture():
    rng = np.random.default_rng(31)
    a = _u(np.concatenate([rng.normal(2, 0.5, 5000), rng.normal(6, 1.0, 5000)]))
    b = _u(np.concatenate([rng.normal(3, 0.7, 5000), rng.normal(8, 0.8, 5000)]))
    exact = wasserstein_1d(a, b)
    ba, bb = coarsen_jointly((a, b), bins=4096, exact_cap=1, mode="binned")
    assert wasserstein_1d(ba, bb) == pytest.approx(exact, rel=0.01)
