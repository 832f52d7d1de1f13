"""Dense displacement, least-squares strain, and SNR/CNR quality metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .dptrack import DpParams, dp_displacement_batch
from .rfsim import DEFAULT_LATERAL_PITCH_MM, Inclusion, PsfParams, default_inclusion

DEFAULT_STRAIN_WINDOW = 41


def dense_displacement(frame1, frame2, params: DpParams | None = None, median: bool = True) -> np.ndarray:
    """Integer displacement field (m, l) from DP tracking of every line.

    A 3x3 median filter suppresses isolated per-line jumps; pass
    median=False for the raw per-line DP output.
    """
    f1 = np.asarray(getattr(frame1, "samples", frame1), dtype=np.float64)
    f2 = np.asarray(getattr(frame2, "samples", frame2), dtype=np.float64)
    if f1.ndim != 2 or f1.shape != f2.shape:
        raise ValueError(f"frames must be equal-shape 2-D arrays, got {f1.shape} vs {f2.shape}")
    disp, _ = dp_displacement_batch(np.ascontiguousarray(f1.T), np.ascontiguousarray(f2.T), params)
    field = disp.T
    if median:
        field = median_filter(field, size=3, mode="nearest")
    return field


@dataclass(frozen=True)
class StrainImage:
    """Axial strain (m - window + 1, l), from an odd differentiation window."""

    strain: np.ndarray
    window: int

    def __post_init__(self):
        if self.strain.ndim != 2 or not np.all(np.isfinite(self.strain)):
            raise ValueError("strain must be a finite 2-D array")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")


def lsq_strain(disp, window: int = DEFAULT_STRAIN_WINDOW) -> StrainImage:
    """Axial strain as the least-squares slope of displacement per window.

    disp is (m, l) displacement in samples; each output row is the slope of
    the window of ``window`` consecutive samples starting there (units:
    samples per sample, i.e. dimensionless strain).
    """
    disp = np.asarray(disp, dtype=np.float64)
    if disp.ndim != 2:
        raise ValueError("disp must be 2-D")
    m = disp.shape[0]
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if window > m // 4:
        raise ValueError(f"window {window} too large for {m} samples (must be <= m/4)")
    k = np.arange(window) - (window - 1) / 2.0
    s2 = np.sum(k**2)
    out = np.zeros((m - window + 1, disp.shape[1]))
    for i in range(window):
        out += k[i] * disp[i : m - window + 1 + i]
    return StrainImage(out / s2, window)


def _strain_array(strain) -> np.ndarray:
    return np.asarray(getattr(strain, "strain", strain), dtype=np.float64)


def _window_patch(img: np.ndarray, win) -> np.ndarray:
    r0, r1, c0, c1 = (int(v) for v in win)
    if not (0 <= r0 < r1 <= img.shape[0] and 0 <= c0 < c1 <= img.shape[1]):
        raise ValueError(f"window {win} outside image {img.shape}")
    if (r1 - r0) * (c1 - c0) < 2:
        raise ValueError(f"window {win} has fewer than 2 pixels")
    return img[r0:r1, c0:c1]


def snr(strain, background_window) -> float:
    """mean/std of the strain over the background window, unbiased std."""
    img = _strain_array(strain)
    patch = _window_patch(img, background_window)
    sd = patch.std(ddof=1)
    if sd == 0.0:
        raise ValueError(f"zero strain variance in background window {tuple(background_window)}")
    return float(patch.mean() / sd)


def cnr(strain, target_window, background_window) -> float:
    """sqrt(2 * (mean_b - mean_t)^2 / (var_b + var_t)), unbiased variances."""
    img = _strain_array(strain)
    t = _window_patch(img, target_window)
    b = _window_patch(img, background_window)
    den = b.var(ddof=1) + t.var(ddof=1)
    if den == 0.0:
        raise ValueError("zero strain variance in both quality windows")
    return float(np.sqrt(2.0 * (b.mean() - t.mean()) ** 2 / den))


@dataclass(frozen=True)
class QualityReport:
    snr: float
    cnr: float
    target_window: tuple[int, int, int, int]
    background_window: tuple[int, int, int, int]
    target_mean: float
    target_std: float
    background_mean: float
    background_std: float


def _windows_disjoint(a, b) -> bool:
    return a[1] <= b[0] or b[1] <= a[0] or a[3] <= b[2] or b[3] <= a[2]


def quality_report(strain, target_window, background_window) -> QualityReport:
    """SNR/CNR plus the window statistics they are built from."""
    if not _windows_disjoint(target_window, background_window):
        raise ValueError(f"quality windows overlap: {target_window} vs {background_window}")
    img = _strain_array(strain)
    t = _window_patch(img, target_window)
    b = _window_patch(img, background_window)
    return QualityReport(
        snr=snr(img, background_window),
        cnr=cnr(img, target_window, background_window),
        target_window=tuple(int(v) for v in target_window),
        background_window=tuple(int(v) for v in background_window),
        target_mean=float(t.mean()),
        target_std=float(t.std(ddof=1)),
        background_mean=float(b.mean()),
        background_std=float(b.std(ddof=1)),
    )


def inclusion_windows(
    m: int,
    l: int,
    strain_window: int,
    psf: PsfParams | None,
    center_mm: tuple[float, float],
    radius_ax_mm: float,
    radius_lat_mm: float,
) -> tuple[tuple[int, int, int, int], tuple[int, int, int, int]]:
    """(target, background) rectangles in strain-image coordinates.

    Each rectangle is (row0, row1, col0, col1), half-open. The target sits
    at the inclusion center, sized to 75% of the inscribed square of the
    (possibly compressed) inclusion ellipse; the background is the same-size
    same-depth window on the lateral side farther from the inclusion.
    """
    psf = psf or PsfParams()
    dz = psf.axial_step_mm
    pitch = DEFAULT_LATERAL_PITCH_MM
    if radius_ax_mm <= 0.0 or radius_lat_mm <= 0.0:
        raise ValueError("inclusion radii must be positive")
    half_r = max(2, int(round(0.75 * radius_ax_mm / np.sqrt(2.0) / dz)))
    half_c = max(2, int(round(0.75 * radius_lat_mm / np.sqrt(2.0) / pitch)))
    m_s = m - strain_window + 1
    off = (strain_window - 1) // 2
    if 2 * half_r > m_s or 4 * half_c > l:
        raise ValueError(f"strain image ({m_s}, {l}) too small for quality windows")

    tc_r = min(max(int(round(center_mm[0] / dz)) - off, half_r), m_s - half_r)
    tc_c = min(max(int(round(center_mm[1] / pitch)), half_c), l - half_c)
    edge = max(half_c, int(round(0.16 * l)))
    bg_c = edge if tc_c >= l // 2 else l - edge
    target = (tc_r - half_r, tc_r + half_r, tc_c - half_c, tc_c + half_c)
    background = (tc_r - half_r, tc_r + half_r, bg_c - half_c, bg_c + half_c)
    if background[2] < 0 or background[3] > l:
        raise ValueError(f"background window {background} does not fit strain image ({m_s}, {l})")
    if not _windows_disjoint(target, background):
        raise ValueError("target and background windows overlap; image too small")
    return target, background


def default_windows(
    m: int,
    l: int,
    strain_window: int = DEFAULT_STRAIN_WINDOW,
    psf: PsfParams | None = None,
    inclusion: Inclusion | None = None,
) -> tuple[tuple[int, int, int, int], tuple[int, int, int, int]]:
    """inclusion_windows for a static (undeformed) inclusion geometry."""
    psf = psf or PsfParams()
    inclusion = inclusion or default_inclusion(m, l, psf)
    return inclusion_windows(
        m, l, strain_window, psf, inclusion.center_mm, inclusion.radius_mm, inclusion.radius_mm
    )


_METRICS_COLUMNS = ["pair_i", "pair_j", "method", "snr", "cnr"]


def write_metrics_csv(path, rows) -> None:
    """Write evaluation rows: (pair_i, pair_j, method, snr, cnr)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_METRICS_COLUMNS)
        for i, j, method, s, c in rows:
            w.writerow([i, j, method, repr(float(s)), repr(float(c))])


def read_metrics_csv(path) -> list[tuple[int, int, str, float, float]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != _METRICS_COLUMNS:
            raise ValueError(f"bad metrics CSV header in {path}")
        return [(int(row[0]), int(row[1]), row[2], float(row[3]), float(row[4])) for row in r]
