"""Integer axial displacement tracking between RF lines via dynamic programming.

The estimator minimizes, over displacement maps d[0..m-1] with each
d[i] in [-d_max, d_max],

    sum_i (line1[i] - line2[clamp(i + d[i])])^2  +  lambda * sum_i |d[i] - d[i-1]|

and returns a global optimum. The inner minimization over the previous
displacement is an L1 distance transform, so each line costs O(m * d_max)
instead of O(m * d_max^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LAMBDA_SCALE = 0.2


@dataclass(frozen=True)
class DpParams:
    """Search half-range (samples) and smoothness weight.

    lambda_smooth None means data-scaled: LAMBDA_SCALE * mean(line1^2),
    computed per line.
    """

    d_max: int = 40
    lambda_smooth: float | None = None

    def __post_init__(self):
        if self.d_max < 1:
            raise ValueError(f"d_max must be >= 1, got {self.d_max}")
        if self.lambda_smooth is not None and not self.lambda_smooth >= 0.0:
            raise ValueError(f"lambda_smooth must be >= 0, got {self.lambda_smooth}")


@dataclass(frozen=True)
class SparseDisplacement:
    """Integer displacements of p tracked lines, flattened line-major.

    c has K = m*p entries; coords[k] = (sample_index, line_index) in frame
    space, ordered line-major then by sample.
    """

    c: np.ndarray
    coords: np.ndarray
    p: int
    line_indices: np.ndarray

    def __post_init__(self):
        if self.c.shape != (self.coords.shape[0],) or self.coords.shape[1] != 2:
            raise ValueError("c and coords must be parallel, coords (K, 2)")
        if self.line_indices.shape != (self.p,):
            raise ValueError("line_indices must have p entries")

    @property
    def k(self) -> int:
        return self.c.shape[0]

    def per_line(self) -> np.ndarray:
        """Displacements reshaped to (p, m)."""
        return self.c.reshape(self.p, -1)


def select_lines(l: int, p: int) -> np.ndarray:
    """Indices of p interior-equidistant lines: floor(l*(j+1)/(p+1))."""
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if not 1 <= p <= l:
        raise ValueError(f"p must be in [1, {l}], got {p}")
    idx = np.array([(l * (j + 1)) // (p + 1) for j in range(p)], dtype=np.int64)
    if np.any(np.diff(idx) < 1):
        raise ValueError(f"cannot place {p} strictly increasing lines on {l}")
    return idx


@njit(cache=True)
def _dp_batch_kernel(lines1, lines2, d_max, lams):
    n, m = lines1.shape
    d_count = 2 * d_max + 1
    paths = np.zeros((n, m), dtype=np.int32)
    costs = np.zeros(n)
    cur = np.empty(d_count)
    tmp = np.empty(d_count)
    par = np.empty((m, d_count), dtype=np.int32)
    for row in range(n):
        lam = lams[row]
        a = lines1[row]
        b = lines2[row]
        for k in range(d_count):
            j = k - d_max
            if j < 0:
                j = 0
            elif j > m - 1:
                j = m - 1
            diff = a[0] - b[j]
            cur[k] = diff * diff
        for i in range(1, m):
            for k in range(d_count):
                tmp[k] = cur[k]
                par[i, k] = k
            # two-pass L1 distance transform; ties keep the nearer parent
            for k in range(1, d_count):
                if tmp[k - 1] + lam < tmp[k]:
                    tmp[k] = tmp[k - 1] + lam
                    par[i, k] = par[i, k - 1]
            for k in range(d_count - 2, -1, -1):
                if tmp[k + 1] + lam < tmp[k]:
                    tmp[k] = tmp[k + 1] + lam
                    par[i, k] = par[i, k + 1]
            for k in range(d_count):
                j = i + k - d_max
                if j < 0:
                    j = 0
                elif j > m - 1:
                    j = m - 1
                diff = a[i] - b[j]
                cur[k] = tmp[k] + diff * diff
        # final tie rule: smaller |d|, then smaller d
        best = 0
        bd = abs(0 - d_max)
        for k in range(1, d_count):
            kd = abs(k - d_max)
            if cur[k] < cur[best] or (cur[k] == cur[best] and (kd < bd or (kd == bd and k - d_max < best - d_max))):
                best = k
                bd = kd
        costs[row] = cur[best]
        k = best
        for i in range(m - 1, 0, -1):
            paths[row, i] = k - d_max
            k = par[i, k]
        paths[row, 0] = k - d_max
    return paths, costs


def _check_lines(lines1: np.ndarray, lines2: np.ndarray, d_max: int) -> None:
    if lines1.shape != lines2.shape:
        raise ValueError(f"line arrays must have equal shape, got {lines1.shape} vs {lines2.shape}")
    m = lines1.shape[-1]
    if m < 2:
        raise ValueError(f"lines must have at least 2 samples, got {m}")
    if m <= 2 * d_max:
        raise ValueError(f"need m > 2*d_max, got m={m} with d_max={d_max}")
    if not (np.all(np.isfinite(lines1)) and np.all(np.isfinite(lines2))):
        raise ValueError("lines contain non-finite samples")


def _resolve_lams(lines1: np.ndarray, params: DpParams) -> np.ndarray:
    if params.lambda_smooth is None:
        return LAMBDA_SCALE * np.mean(lines1**2, axis=1)
    return np.full(lines1.shape[0], float(params.lambda_smooth))


def dp_displacement_batch(lines1, lines2, params: DpParams | None = None):
    """dp_displacement over row-aligned (p, m) line stacks.

    Returns (disp (p, m) int32, cost (p,) float64), each row a global
    optimum of the DP objective.
    """
    params = params or DpParams()
    lines1 = np.ascontiguousarray(lines1, dtype=np.float64)
    lines2 = np.ascontiguousarray(lines2, dtype=np.float64)
    if lines1.ndim != 2:
        raise ValueError("expected 2-D (p, m) line arrays")
    _check_lines(lines1, lines2, params.d_max)
    return _dp_batch_kernel(lines1, lines2, params.d_max, _resolve_lams(lines1, params))


def dp_displacement(line1, line2, params: DpParams | None = None) -> np.ndarray:
    """Globally optimal integer displacement path for one line pair.

    Minimizes the squared-difference data cost plus lambda times the total
    displacement variation; out-of-range reads of line2 clamp to its edges.
    Cost ties at the final column resolve toward smaller |d|, then toward
    the more negative d.
    """
    line1 = np.asarray(line1, dtype=np.float64)
    line2 = np.asarray(line2, dtype=np.float64)
    if line1.ndim != 1:
        raise ValueError("expected 1-D lines")
    disp, _ = dp_displacement_batch(line1[None, :], line2[None, :], params)
    return disp[0]


def dp_cost(line1, line2, disp, lam: float) -> float:
    """Objective value of a given displacement map (for verification)."""
    line1 = np.asarray(line1, dtype=np.float64)
    line2 = np.asarray(line2, dtype=np.float64)
    disp = np.asarray(disp)
    idx = np.clip(np.arange(line1.shape[0]) + disp, 0, line1.shape[0] - 1)
    data = float(np.sum((line1 - line2[idx]) ** 2))
    return data + float(lam * np.sum(np.abs(np.diff(disp))))


def sparse_track(frame1, frame2, p: int = 5, params: DpParams | None = None) -> SparseDisplacement:
    """Track p equidistant lines between two frames.

    Accepts (m, l) arrays or objects with a ``samples`` attribute; returns
    the K = m*p displacements with their frame coordinates, line-major.
    """
    f1 = np.asarray(getattr(frame1, "samples", frame1), dtype=np.float64)
    f2 = np.asarray(getattr(frame2, "samples", frame2), dtype=np.float64)
    if f1.ndim != 2 or f1.shape != f2.shape:
        raise ValueError(f"frames must be equal-shape 2-D arrays, got {f1.shape} vs {f2.shape}")
    m, l = f1.shape
    lines = select_lines(l, p)
    disp, _ = dp_displacement_batch(f1[:, lines].T, f2[:, lines].T, params)
    coords = np.column_stack(
        [np.tile(np.arange(m, dtype=np.int64), p), np.repeat(lines, m)]
    )
    return SparseDisplacement(disp.ravel(), coords, p, lines)
