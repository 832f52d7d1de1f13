"""Per-pair feature extraction: sparse DP tracking reduced to basis weights.

For a frame pair, p lines are tracked, their integer displacements are
stacked into a measurement vector c, and the weight vector w solving
min ||A w - c||_2 over the resampled PCA basis is the feature vector,
carried together with the RMS of the fit residual.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dptrack import DpParams, sparse_track
from .pcabasis import PcaBasis, sample_basis


@dataclass(frozen=True)
class FeatureVector:
    w: np.ndarray
    residual_rms: float
    pair_ids: tuple[int, int]

    def __post_init__(self):
        if self.w.ndim != 1 or not np.all(np.isfinite(self.w)):
            raise ValueError("w must be a finite 1-D vector")
        if not self.residual_rms >= 0.0:
            raise ValueError("residual_rms must be >= 0")


def solve_lsq(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Least-squares minimizer of ||A w - c||_2 via orthogonal factorization.

    Solved with the SVD (minimum-norm solution when A is rank-deficient);
    requires at least as many measurements as unknowns.
    """
    a = np.asarray(a, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if a.ndim != 2 or c.ndim != 1 or a.shape[0] != c.shape[0]:
        raise ValueError(f"incompatible shapes: A {a.shape}, c {c.shape}")
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"underdetermined system: {a.shape[0]} measurements for {a.shape[1]} weights")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
        raise ValueError("non-finite values in least-squares input")
    w, _, _, _ = np.linalg.lstsq(a, c, rcond=None)
    return w


def lsq_cost(a: np.ndarray, c: np.ndarray, w: np.ndarray) -> float:
    """Squared-error objective ||A w - c||^2 (for optimality probes)."""
    return float(np.sum((np.asarray(a) @ np.asarray(w) - np.asarray(c)) ** 2))


def extract_features(
    frame1,
    frame2,
    basis: PcaBasis,
    p: int = 5,
    dp_params: DpParams | None = None,
    pair_ids: tuple[int, int] = (0, 1),
) -> FeatureVector:
    """Weight feature vector for one frame pair.

    Tracked displacements are ordered line-major, matching the design-matrix
    rows. When the basis is centered, the sampled mean field is subtracted
    from the measurements before solving.
    """
    shape = np.asarray(getattr(frame1, "samples", frame1)).shape
    if tuple(shape) != tuple(basis.frame_dims):
        raise ValueError(f"frame dims {shape} do not match basis frame_dims {basis.frame_dims}")
    sd = sparse_track(frame1, frame2, p=p, params=dp_params)
    dm = sample_basis(basis, sd.coords)
    c = sd.c.astype(np.float64)
    if basis.center:
        c = c - dm.mean_values
    w = solve_lsq(dm.a, c)
    r = dm.a @ w - c
    return FeatureVector(w, float(np.sqrt(np.mean(r**2))), (int(pair_ids[0]), int(pair_ids[1])))


def extract_features_batch(
    sequence,
    pairs,
    basis: PcaBasis,
    p: int = 5,
    dp_params: DpParams | None = None,
) -> list[FeatureVector]:
    """extract_features over (i, j) index pairs into ``sequence``, in order."""
    out = []
    n = len(sequence)
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"frame pair ({i}, {j}) out of range for {n} frames")
        out.append(extract_features(sequence[i], sequence[j], basis, p=p, dp_params=dp_params, pair_ids=(i, j)))
    return out


def feature_matrix(rows: list[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an (n, N) float64 matrix."""
    if not rows:
        raise ValueError("no feature rows")
    return np.array([r.w for r in rows], dtype=np.float64)


def _header(n_weights: int) -> list[str]:
    return ["i", "j"] + [f"w_{k + 1}" for k in range(n_weights)] + ["residual_rms"]


def write_features_csv(path, rows: list[FeatureVector]) -> None:
    """Write one CSV row per pair: indices, weights, residual RMS."""
    if not rows:
        raise ValueError("no feature rows")
    n_w = rows[0].w.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_header(n_w))
        for r in rows:
            if r.w.shape[0] != n_w:
                raise ValueError("feature rows differ in weight count")
            w.writerow([r.pair_ids[0], r.pair_ids[1]] + [repr(float(v)) for v in r.w] + [repr(r.residual_rms)])


def read_features_csv(path) -> list[FeatureVector]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or len(header) < 4:
            raise ValueError(f"bad features CSV header in {path}")
        n_w = len(header) - 3
        if header != _header(n_w):
            raise ValueError(f"bad features CSV header in {path}")
        out = []
        for row in r:
            if len(row) != n_w + 3:
                raise ValueError(f"bad features CSV row length in {path}")
            out.append(
                FeatureVector(
                    w=np.array([float(v) for v in row[2 : 2 + n_w]]),
                    residual_rms=float(row[-1]),
                    pair_ids=(int(row[0]), int(row[1])),
                )
            )
    return out
