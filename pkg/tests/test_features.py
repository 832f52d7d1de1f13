"""Feature extraction: least squares, pair features, CSV round trip."""

import numpy as np
import pytest

from framepick import features, pcabasis


def test_solve_lsq_matches_normal_equations():
    rng = np.random.default_rng(2)
    for _ in range(30):
        a = rng.standard_normal((50, 12))
        c = rng.standard_normal(50)
        w = features.solve_lsq(a, c)
        resid = a.T @ (a @ w - c)
        assert np.linalg.norm(resid) <= 1e-8 * max(np.linalg.norm(a.T @ c), 1.0)


def test_lsq_cost_is_minimal_under_perturbation():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((50, 12))
    c = rng.standard_normal(50)
    w = features.solve_lsq(a, c)
    base = features.lsq_cost(a, c, w)
    for _ in range(50):
        delta = rng.standard_normal(12) * rng.choice([1e-4, 1e-2, 1.0])
        assert features.lsq_cost(a, c, w + delta) >= base - 1e-12


def test_solve_lsq_shape_checks():
    with pytest.raises(ValueError):
        features.solve_lsq(np.zeros((5, 12)), np.zeros(5))
    with pytest.raises(ValueError):
        features.solve_lsq(np.zeros((50, 12)), np.zeros(49))


def test_identical_frames_zero_weights(basis_small, seq_small):
    frames, _ = seq_small
    fv = features.extract_features(frames[0], frames[0], basis_small, pair_ids=(0, 0))
    assert np.array_equal(fv.w, np.zeros(basis_small.n_components))
    assert fv.residual_rms == 0.0
    assert fv.pair_ids == (0, 0)


def test_extract_matches_manual_lsq(basis_small, seq_small):
    frames, _ = seq_small
    from framepick import dptrack

    fv = features.extract_features(frames[0], frames[1], basis_small, p=5)
    sd = dptrack.sparse_track(frames[0].samples, frames[1].samples, p=5)
    dm = pcabasis.sample_basis(basis_small, sd.coords)
    c = sd.c.astype(np.float64)
    w = features.solve_lsq(dm.a, c)
    assert np.array_equal(fv.w, w)
    assert fv.residual_rms == pytest.approx(np.sqrt(np.mean((dm.a @ w - c) ** 2)), rel=1e-12)


def test_centered_basis_subtracts_mean(seq_small, psf_small):
    from framepick import dptrack, rfsim
    from conftest import GRID_SMALL, L_SMALL, M_SMALL

    frames, _ = seq_small
    fields = rfsim.make_training_fields(21, 60, M_SMALL, L_SMALL, psf=psf_small)
    cb = pcabasis.fit_pca(fields, 12, grid=GRID_SMALL, center=True)
    fv = features.extract_features(frames[0], frames[1], cb, p=5)
    sd = dptrack.sparse_track(frames[0].samples, frames[1].samples, p=5)
    dm = pcabasis.sample_basis(cb, sd.coords)
    w = features.solve_lsq(dm.a, sd.c.astype(np.float64) - dm.mean_values)
    assert np.array_equal(fv.w, w)


def test_frame_dims_must_match_basis(basis_small):
    small = np.zeros((96, 48))
    with pytest.raises(ValueError):
        features.extract_features(small, small, basis_small)


def test_batch_equals_serial(basis_small, seq_small):
    frames, _ = seq_small
    pairs = [(0, 1), (1, 0), (2, 5), (3, 3)]
    batch = features.extract_features_batch(frames, pairs, basis_small, p=5)
    for fv, (i, j) in zip(batch, pairs):
        single = features.extract_features(frames[i], frames[j], basis_small, p=5, pair_ids=(i, j))
        assert np.array_equal(fv.w, single.w)
        assert fv.residual_rms == single.residual_rms
        assert fv.pair_ids == (i, j)


def test_feature_matrix_stacks_weights(basis_small, seq_small):
    frames, _ = seq_small
    rows = features.extract_features_batch(frames, [(0, 1), (1, 2)], basis_small)
    mat = features.feature_matrix(rows)
    assert mat.shape == (2, basis_small.n_components)
    assert np.array_equal(mat[0], rows[0].w)


def test_csv_round_trip_exact(tmp_path, basis_small, seq_small):
    frames, _ = seq_small
    rows = features.extract_features_batch(frames, [(0, 1), (2, 4), (5, 3)], basis_small)
    path = tmp_path / "f.csv"
    features.write_features_csv(path, rows)
    back = features.read_features_csv(path)
    assert len(back) == len(rows)
    for a, b in zip(rows, back):
        assert a.pair_ids == b.pair_ids
        assert np.array_equal(a.w, b.w)
        assert a.residual_rms == b.residual_rms
