"""PCA basis over dense displacement fields, learned on a coarse grid.

Dense (m, l) fields are block-averaged onto a coarse grid, flattened
column-major, and decomposed with an SVD. The basis is bilinearly resampled
at fine-grid coordinates to build the design matrix for sparse weight
estimation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

DEFAULT_GRID = (64, 48)
ORTHONORMAL_TOL = 1e-6


def _block_edges(size: int, blocks: int) -> np.ndarray:
    return (size * np.arange(blocks + 1)) // blocks


def downsample(field: np.ndarray, grid: tuple[int, int] = DEFAULT_GRID) -> np.ndarray:
    """Block-average an (m, l) field onto a (g_r, g_c) grid.

    Blocks follow integer edges floor(size*k/blocks), so they differ in size
    by at most one row/column when the shape does not divide evenly.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError("field must be 2-D")
    g_r, g_c = grid
    m, l = field.shape
    if g_r < 1 or g_c < 1 or m < g_r or l < g_c:
        raise ValueError(f"grid {grid} does not fit field shape {field.shape}")
    re = _block_edges(m, g_r)
    ce = _block_edges(l, g_c)
    row_sum = np.add.reduceat(field, re[:-1], axis=0)
    cell_sum = np.add.reduceat(row_sum, ce[:-1], axis=1)
    counts = np.outer(np.diff(re), np.diff(ce))
    return cell_sum / counts


@dataclass
class PcaBasis:
    """Orthonormal displacement basis on a coarse grid.

    components is (g_r*g_c, N) with orthonormal columns, each flattened
    column-major from its (g_r, g_c) grid and signed so its largest-magnitude
    entry is positive. ``center`` records whether the mean term participates
    in weight estimation (the mean_field itself is always stored).
    """

    grid: tuple[int, int]
    mean_field: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    frame_dims: tuple[int, int]
    center: bool = False

    def __post_init__(self):
        g = self.grid[0] * self.grid[1]
        if self.components.ndim != 2 or self.components.shape[0] != g:
            raise ValueError(f"components must be (g_r*g_c, N), got {self.components.shape}")
        if self.mean_field.shape != (g,):
            raise ValueError("mean_field must be (g_r*g_c,)")
        if self.explained_variance_ratio.shape != (self.components.shape[1],):
            raise ValueError("explained_variance_ratio must have one entry per component")
        if self.grid[0] > self.frame_dims[0] or self.grid[1] > self.frame_dims[1]:
            raise ValueError(f"grid {self.grid} exceeds frame_dims {self.frame_dims}")

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def component_grid(self, k: int) -> np.ndarray:
        return self.components[:, k].reshape(self.grid, order="F")

    def reconstruct(self, w: np.ndarray) -> np.ndarray:
        """Coarse (g_r, g_c) field for weights w, mean added when centered."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.n_components,):
            raise ValueError(f"w must have shape ({self.n_components},)")
        vec = self.components @ w
        if self.center:
            vec = vec + self.mean_field
        return vec.reshape(self.grid, order="F")

    def validate(self) -> None:
        """Raise if any structural invariant is violated."""
        if not (np.all(np.isfinite(self.components)) and np.all(np.isfinite(self.mean_field))):
            raise ValueError("basis contains non-finite values")
        gram = self.components.T @ self.components
        err = np.max(np.abs(gram - np.eye(self.n_components)))
        if err > ORTHONORMAL_TOL:
            raise ValueError(f"components not orthonormal: max deviation {err:.3g}")
        evr = self.explained_variance_ratio
        if np.any(evr < 0) or np.any(evr > 1) or np.any(np.diff(evr) > 1e-12):
            raise ValueError("explained_variance_ratio must be in [0,1] and non-increasing")
        if evr.sum() > 1.0 + 1e-9:
            raise ValueError("explained_variance_ratio sums to more than 1")


def fit_pca(fields, n_components: int = 12, grid: tuple[int, int] = DEFAULT_GRID, center: bool = False) -> PcaBasis:
    """Fit a PcaBasis to an iterable of equally shaped (m, l) fields.

    Fields are downsampled to ``grid`` and flattened column-major. The
    components are the top eigenvectors of the sample covariance, via SVD of
    the mean-centered data matrix; explained_variance_ratio divides by the
    covariance trace (all eigenvalues). ``center`` only tags how the basis is
    to be applied downstream.
    """
    coarse = []
    shape = None
    for f in fields:
        f = np.asarray(f, dtype=np.float64)
        if shape is None:
            shape = f.shape
        elif f.shape != shape:
            raise ValueError(f"fields differ in shape: {shape} vs {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError(f"field {len(coarse)} contains non-finite values")
        coarse.append(downsample(f, grid).ravel(order="F"))
    if shape is None:
        raise ValueError("no fields given")
    x = np.array(coarse)
    n = x.shape[0]
    if n < n_components + 1:
        raise ValueError(f"need at least n_components+1={n_components + 1} fields, got {n}")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    evr = s**2 / np.sum(s**2)
    if n_components > vt.shape[0]:
        raise ValueError(f"n_components={n_components} exceeds data rank bound {vt.shape[0]}")
    components = vt[:n_components].T.copy()
    for k in range(n_components):
        peak = np.argmax(np.abs(components[:, k]))
        if components[peak, k] < 0:
            components[:, k] = -components[:, k]
    return PcaBasis(tuple(grid), mean, components, evr[:n_components].copy(), tuple(shape), center)


def n_for_variance(explained_variance_ratio: np.ndarray, threshold: float = 0.95) -> int:
    """Smallest N whose leading components reach the variance threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    cum = np.cumsum(np.asarray(explained_variance_ratio, dtype=np.float64))
    hits = np.nonzero(cum >= threshold - 1e-12)[0]
    if hits.size == 0:
        raise ValueError(f"components explain only {cum[-1]:.4f} < {threshold} of the variance")
    return int(hits[0]) + 1


@dataclass(frozen=True)
class DesignMatrix:
    """Basis components sampled at K frame coordinates (rows ordered as coords).

    mean_values carries the mean_field sampled at the same coordinates.
    """

    a: np.ndarray
    coords: np.ndarray
    mean_values: np.ndarray

    def __post_init__(self):
        if self.a.ndim != 2 or self.a.shape[0] < self.a.shape[1]:
            raise ValueError(f"design matrix must be overdetermined, got {self.a.shape}")
        if self.coords.shape != (self.a.shape[0], 2) or self.mean_values.shape != (self.a.shape[0],):
            raise ValueError("coords/mean_values do not match design matrix rows")


def _axis_positions(fine: np.ndarray, size: int, blocks: int):
    """Affine fine-to-grid coordinate map, clamped; returns (lower index, fraction)."""
    pos = (fine + 0.5) * (blocks / size) - 0.5
    pos = np.clip(pos, 0.0, blocks - 1.0)
    i0 = np.minimum(pos.astype(np.int64), blocks - 2) if blocks > 1 else np.zeros(fine.shape, dtype=np.int64)
    frac = pos - i0
    return i0, frac


def sample_basis(basis: PcaBasis, coords) -> DesignMatrix:
    """Bilinearly sample every component (and the mean) at frame coordinates.

    coords is (K, 2) of (sample_index, line_index) in frame space; frame
    coordinates map affinely onto grid coordinates (pixel-center convention).
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"coords must be (K, 2), got {coords.shape}")
    m, l = basis.frame_dims
    if np.any(coords[:, 0] < 0) or np.any(coords[:, 0] > m - 1) or np.any(coords[:, 1] < 0) or np.any(coords[:, 1] > l - 1):
        raise ValueError(f"coordinates outside frame dims {basis.frame_dims}")
    g_r, g_c = basis.grid
    r0, rf = _axis_positions(coords[:, 0], m, g_r)
    c0, cf = _axis_positions(coords[:, 1], l, g_c)
    r1 = np.minimum(r0 + 1, g_r - 1)
    c1 = np.minimum(c0 + 1, g_c - 1)

    def interp(vec: np.ndarray) -> np.ndarray:
        grid2d = vec.reshape(g_r, g_c, order="F")
        top = grid2d[r0, c0] * (1 - cf) + grid2d[r0, c1] * cf
        bot = grid2d[r1, c0] * (1 - cf) + grid2d[r1, c1] * cf
        return top * (1 - rf) + bot * rf

    a = np.empty((coords.shape[0], basis.n_components))
    for k in range(basis.n_components):
        a[:, k] = interp(basis.components[:, k])
    return DesignMatrix(a, coords, interp(basis.mean_field))


# ---------------------------------------------------------------------------
# File format

_PCB_MAGIC = b"PCB1"


def save_basis(path, basis: PcaBasis) -> None:
    """Write a basis file: PCB1 header, then mean field, components, and
    variance ratios, all little-endian f64."""
    g_r, g_c = basis.grid
    m, l = basis.frame_dims
    with open(path, "wb") as fh:
        fh.write(_PCB_MAGIC)
        fh.write(struct.pack("<IIIII", g_r, g_c, basis.n_components, m, l))
        fh.write(struct.pack("<B", 1 if basis.center else 0))
        fh.write(basis.mean_field.astype("<f8").tobytes())
        fh.write(basis.components.T.astype("<f8").tobytes())
        fh.write(basis.explained_variance_ratio.astype("<f8").tobytes())


def load_basis(path) -> PcaBasis:
    """Read a basis file and check its invariants; inverse of save_basis."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _PCB_MAGIC:
            raise ValueError(f"bad magic in {path}: expected {_PCB_MAGIC!r}, got {magic!r}")
        head = fh.read(20)
        if len(head) != 20:
            raise ValueError(f"truncated header (grid/N/frame dims) in {path}")
        g_r, g_c, n, m, l = struct.unpack("<IIIII", head)
        flag = fh.read(1)
        if len(flag) != 1:
            raise ValueError(f"truncated center flag in {path}")
        g = g_r * g_c
        raw = fh.read(8 * g)
        if len(raw) != 8 * g:
            raise ValueError(f"truncated mean_field in {path}")
        mean = np.frombuffer(raw, dtype="<f8").copy()
        raw = fh.read(8 * n * g)
        if len(raw) != 8 * n * g:
            raise ValueError(f"truncated components in {path}")
        comps = np.frombuffer(raw, dtype="<f8").reshape(n, g).T.copy()
        raw = fh.read(8 * n)
        if len(raw) != 8 * n:
            raise ValueError(f"truncated explained_variance_ratio in {path}")
        evr = np.frombuffer(raw, dtype="<f8").copy()
    basis = PcaBasis((g_r, g_c), mean, comps, evr, (m, l), bool(flag[0]))
    basis.validate()
    return basis
