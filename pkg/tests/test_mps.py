import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_of, random_tt
from skqaoa import mps
from skqaoa.mps import TensorTrain, TruncationPolicy

shapes = st.tuples(st.integers(1, 4), st.integers(2, 4), st.integers(0, 10_000))


def _bonds(rng, p, chi=3):
    return [int(rng.integers(1, chi + 1)) for _ in range(p - 1)]


@given(shapes)
@settings(max_examples=40, deadline=None)
def test_to_dense_matches_einsum(shape):
    p, d, seed = shape
    rng = np.random.default_rng(seed)
    tt = random_tt(rng, p, d, _bonds(rng, p))
    assert np.allclose(mps.to_dense(tt), dense_of(tt), atol=1e-12)


@given(shapes)
@settings(max_examples=40, deadline=None)
def test_overlap_matches_dense(shape):
    p, d, seed = shape
    rng = np.random.default_rng(seed)
    a = random_tt(rng, p, d, _bonds(rng, p))
    b = random_tt(rng, p, d, _bonds(rng, p))
    assert mps.overlap(a, b) == pytest.approx(np.vdot(dense_of(a), dense_of(b)), rel=1e-10)


@given(shapes, st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
@settings(max_examples=40, deadline=None)
def test_add_matches_dense(shape, ca, cb):
    p, d, seed = shape
    rng = np.random.default_rng(seed)
    a = random_tt(rng, p, d, _bonds(rng, p))
    b = random_tt(rng, p, d, _bonds(rng, p))
    out = mps.add(a, ca, b, cb)
    assert np.allclose(dense_of(out), ca * dense_of(a) + cb * dense_of(b), atol=1e-10)


@given(shapes, st.integers(0, 3))
@settings(max_examples=40, deadline=None)
def test_apply_local_matches_dense(shape, site):
    p, d, seed = shape
    site = site % p
    rng = np.random.default_rng(seed)
    tt = random_tt(rng, p, d, _bonds(rng, p))
    op = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    full = np.array([[1.0 + 0j]])
    for i in range(p):
        full = np.kron(full, op if i == site else np.eye(d))
    assert np.allclose(dense_of(mps.apply_local(tt, site, op)), full @ dense_of(tt), atol=1e-10)


@given(shapes)
@settings(max_examples=40, deadline=None)
def test_lossless_compress_is_exact(shape):
    p, d, seed = shape
    rng = np.random.default_rng(seed)
    tt = random_tt(rng, p, d, _bonds(rng, p, 4))
    out, report = mps.compress(tt, TruncationPolicy(0.0))
    assert np.allclose(dense_of(out), dense_of(tt), atol=1e-10 * np.linalg.norm(dense_of(tt)))
    assert report.discarded_weight < 1e-20 * max(1, mps.overlap(tt, tt).real)


@given(shapes, st.sampled_from([1e-1, 1e-2, 1e-3]), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_compress_error_within_discarded_weight(shape, cutoff, cap):
    p, d, seed = shape
    rng = np.random.default_rng(seed)
    tt = random_tt(rng, p, d, _bonds(rng, p, 4))
    out, report = mps.compress(tt, TruncationPolicy(cutoff, max_bond=cap))
    err = np.linalg.norm(dense_of(out) - dense_of(tt))
    assert err <= np.sqrt(report.discarded_weight) * (1 + 1e-8) + 1e-10
    assert out.max_bond <= cap


def test_compress_respects_cutoff_and_reports_cap():
    rng = np.random.default_rng(3)
    tt = random_tt(rng, 4, 3, [3, 6, 3])
    _, rep = mps.compress(tt, TruncationPolicy(0.0, max_bond=2))
    assert rep.cap_active
    _, rep = mps.compress(tt, TruncationPolicy(0.0))
    assert not rep.cap_active


def test_compress_zero_state_keeps_one():
    z = TensorTrain((np.zeros((1, 2, 2)), np.zeros((2, 2, 1))))
    out, rep = mps.compress(z, TruncationPolicy(1e-3))
    assert out.bond_dims == [1]
    assert mps.norm(out) == 0


def test_absolute_cutoff():
    rng = np.random.default_rng(4)
    tt = mps.scale(random_tt(rng, 3, 3, [3, 3]), 1e-6)
    out, _ = mps.compress(tt, TruncationPolicy(1e-3, absolute=True))
    # every singular value is below the absolute threshold; one is kept per bond
    assert out.bond_dims == [1, 1]


def test_canonical_form():
    rng = np.random.default_rng(5)
    tt = mps.canonicalize_left(random_tt(rng, 4, 3, [2, 4, 2]))
    for A in tt.sites[:-1]:
        assert mps.is_left_isometry(A)


def test_from_dense_roundtrip():
    rng = np.random.default_rng(6)
    v = rng.normal(size=27) + 1j * rng.normal(size=27)
    assert np.allclose(mps.to_dense(mps.from_dense(v, 3, 3)), v)
    with pytest.raises(ValueError):
        mps.from_dense(v, 2, 3)


def test_product_state_validation():
    with pytest.raises(ValueError, match="normalised"):
        mps.product_state([np.array([1.0, 1.0])])
    tt = mps.product_state([np.array([1, 0]), np.array([0, 1])])
    assert np.allclose(mps.to_dense(tt), [0, 1, 0, 0])


def test_shape_errors():
    a = random_tt(np.random.default_rng(0), 2, 3, [2])
    b = random_tt(np.random.default_rng(0), 3, 3, [2, 2])
    with pytest.raises(ValueError):
        mps.overlap(a, b)
    with pytest.raises(ValueError):
        mps.apply_local(a, 0, np.eye(2))
    with pytest.raises(IndexError):
        mps.apply_local(a, 5, np.eye(3))
    with pytest.raises(ValueError):
        TensorTrain((np.zeros((2, 3, 1)),))
    with pytest.raises(ValueError):
        TruncationPolicy(1.5)


def test_bond_profile_csv(tmp_path):
    path = tmp_path / "b.csv"
    mps.write_bond_profile(path, [("layer1", [1, 2]), ("layer2", [2, 4])])
    rows = list(csv.DictReader(open(path)))
    assert rows[-1] == {"label": "layer2", "bond": "1", "dim": "4"}
