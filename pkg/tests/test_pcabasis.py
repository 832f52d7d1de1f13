"""PCA basis: block averaging, SVD properties, sampling, serialization."""

import numpy as np
import pytest

from framepick import pcabasis


def test_downsample_exact_block_means():
    field = np.arange(24, dtype=np.float64).reshape(6, 4)
    out = pcabasis.downsample(field, (3, 2))
    expect = np.array([[field[0:2, 0:2].mean(), field[0:2, 2:4].mean()],
                       [field[2:4, 0:2].mean(), field[2:4, 2:4].mean()],
                       [field[4:6, 0:2].mean(), field[4:6, 2:4].mean()]])
    assert np.array_equal(out, expect)


def test_downsample_uneven_blocks():
    field = np.arange(7, dtype=np.float64)[:, None] * np.ones((1, 5))
    out = pcabasis.downsample(field, (3, 2))
    # row edges 0,2,4,7 / col edges 0,2,5
    assert out.shape == (3, 2)
    assert out[0, 0] == field[0:2].mean()
    assert out[2, 1] == field[4:7].mean()


def test_downsample_rejects_bad_grid():
    with pytest.raises(ValueError):
        pcabasis.downsample(np.zeros((4, 4)), (5, 2))
    with pytest.raises(ValueError):
        pcabasis.downsample(np.zeros(16), (4, 4))


def test_fit_pca_three_point_toy():
    fields = [np.array([[1.0, 0.0]]), np.array([[2.0, 0.0]]), np.array([[3.0, 0.0]])]
    basis = pcabasis.fit_pca(fields, 1, grid=(1, 2))
    assert np.allclose(basis.mean_field, [2.0, 0.0])
    assert np.allclose(basis.components[:, 0], [1.0, 0.0])
    assert np.allclose(basis.explained_variance_ratio, [1.0])


def test_fit_pca_two_mode_family():
    rng = np.random.default_rng(17)
    g = (8, 6)
    f1 = np.outer(np.linspace(-1, 1, g[0]), np.ones(g[1]))
    f2 = np.outer(np.ones(g[0]), np.linspace(-1, 1, g[1]))
    fields = [rng.normal() * f1 + rng.normal() * f2 for _ in range(40)]
    basis = pcabasis.fit_pca(fields, 2, grid=g)
    assert basis.explained_variance_ratio.sum() >= 1.0 - 1e-12
    # components span {f1, f2}
    for f in (f1, f2):
        v = f.ravel(order="F")
        proj = basis.components @ (basis.components.T @ v)
        assert np.linalg.norm(proj - v) <= 1e-9 * np.linalg.norm(v)


def test_fit_pca_properties(basis_small):
    basis = basis_small
    gram = basis.components.T @ basis.components
    assert np.abs(gram - np.eye(basis.n_components)).max() <= 1e-6
    evr = basis.explained_variance_ratio
    assert np.all(np.diff(evr) <= 1e-15)
    assert 0.0 <= evr.sum() <= 1.0 + 1e-9
    # sign convention: the largest-magnitude entry of each component is positive
    for k in range(basis.n_components):
        col = basis.components[:, k]
        assert col[np.argmax(np.abs(col))] > 0


def test_fit_pca_needs_enough_fields():
    fields = [np.zeros((4, 4)) for _ in range(3)]
    with pytest.raises(ValueError):
        pcabasis.fit_pca(fields, 3, grid=(4, 4))


def test_center_flag_does_not_change_components():
    rng = np.random.default_rng(23)
    fields = [rng.standard_normal((8, 6)) + 5.0 for _ in range(30)]
    b0 = pcabasis.fit_pca(fields, 4, grid=(8, 6), center=False)
    b1 = pcabasis.fit_pca(fields, 4, grid=(8, 6), center=True)
    assert np.array_equal(b0.components, b1.components)
    assert np.array_equal(b0.mean_field, b1.mean_field)
    assert b0.center is False and b1.center is True


def test_n_for_variance():
    evr = np.array([0.6, 0.3, 0.08, 0.02])
    assert pcabasis.n_for_variance(evr, 0.5) == 1
    assert pcabasis.n_for_variance(evr, 0.9) == 2
    assert pcabasis.n_for_variance(evr, 0.95) == 3


def test_sample_basis_at_block_centers(basis_small):
    # fine rows 3k+1 and every fine column sit exactly on block centers for
    # a 192x48 frame with a 64x48 grid, so bilinear sampling is a lookup
    rows = 3 * np.arange(8) + 1
    cols = np.arange(0, 48, 7)
    coords = np.array([(r, c) for r in rows for c in cols], dtype=np.float64)
    dm = pcabasis.sample_basis(basis_small, coords)
    for n, (r, c) in enumerate(coords):
        gr, gc = int(r) // 3, int(c)
        assert dm.a[n] == pytest.approx(basis_small.components.reshape(64, 48, -1, order="F")[gr, gc], abs=1e-12)


def test_sample_basis_validates_coords(basis_small):
    with pytest.raises(ValueError):
        pcabasis.sample_basis(basis_small, np.array([[-1.0, 0.0]]))
    with pytest.raises(ValueError):
        pcabasis.sample_basis(basis_small, np.array([[0.0, 48.0]]))


def test_design_matrix_needs_rows(basis_small):
    coords = np.zeros((basis_small.n_components - 1, 2))
    with pytest.raises(ValueError):
        pcabasis.sample_basis(basis_small, coords)


def test_save_load_round_trip(tmp_path, basis_small):
    path = tmp_path / "b.pcb"
    pcabasis.save_basis(path, basis_small)
    back = pcabasis.load_basis(path)
    assert np.array_equal(back.components, basis_small.components)
    assert np.array_equal(back.mean_field, basis_small.mean_field)
    assert np.array_equal(back.explained_variance_ratio, basis_small.explained_variance_ratio)
    assert back.grid == basis_small.grid
    assert back.frame_dims == basis_small.frame_dims
    assert back.center == basis_small.center


def test_load_rejects_invalid_basis(tmp_path, basis_small):
    bad = pcabasis.PcaBasis(
        grid=basis_small.grid,
        mean_field=basis_small.mean_field,
        components=np.ones_like(basis_small.components),
        explained_variance_ratio=basis_small.explained_variance_ratio,
        frame_dims=basis_small.frame_dims,
        center=False,
    )
    path = tmp_path / "bad.pcb"
    pcabasis.save_basis(path, bad)
    with pytest.raises(ValueError):
        pcabasis.load_basis(path)


def test_reconstruct_inverts_projection(basis_small):
    rng = np.random.default_rng(29)
    w = rng.standard_normal(basis_small.n_components)
    field = basis_small.reconstruct(w)
    w_back = basis_small.components.T @ (field.ravel(order="F") - (basis_small.mean_field if basis_small.center else 0.0))
    assert np.allclose(w_back, w, atol=1e-10)
