"""Synthetic RF frame simulation: scatterer phantoms, parameterized deformation,
and separable-PSF rendering, with known ground-truth displacement and labels."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

SOUND_SPEED_M_S = 1540.0
DEFAULT_LATERAL_PITCH_MM = 0.1
DEFAULT_SLICE_HALF_MM = 2.5
PSF_SUPPORT_SIGMAS = 4.0

# Labeling rule for pair quality: a pair is usable for strain imaging iff the
# cumulative deformation between its frames stays within all of these bounds.
GOOD_STRAIN_MIN = 0.005
GOOD_STRAIN_MAX = 0.035
GOOD_RHO_MAX = 0.15
GOOD_LATERAL_MAX_MM = 1.0
GOOD_ROTATION_MAX_DEG = 1.0

_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class PsfParams:
    """Separable point-spread-function parameters of the simulated transducer."""

    center_frequency_hz: float = 8.5e6
    sampling_frequency_hz: float = 40e6
    fractional_bandwidth: float = 0.6
    lateral_beamwidth_mm: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.center_frequency_hz < self.sampling_frequency_hz / 2.0:
            raise ValueError(
                "center_frequency_hz must lie in (0, sampling_frequency_hz/2), got "
                f"{self.center_frequency_hz:g} at fs={self.sampling_frequency_hz:g}"
            )
        if not 0.0 < self.fractional_bandwidth <= 1.0:
            raise ValueError(f"fractional_bandwidth must be in (0, 1], got {self.fractional_bandwidth}")
        if self.lateral_beamwidth_mm <= 0.0:
            raise ValueError("lateral_beamwidth_mm must be positive")

    @property
    def axial_step_mm(self) -> float:
        """Axial distance between consecutive RF samples (pulse-echo)."""
        return 1e3 * SOUND_SPEED_M_S / (2.0 * self.sampling_frequency_hz)


@dataclass(frozen=True)
class Inclusion:
    center_mm: tuple[float, float]  # (axial, lateral)
    radius_mm: float
    stiffness_ratio: float

    def __post_init__(self):
        if self.radius_mm <= 0.0:
            raise ValueError("inclusion radius_mm must be positive")
        if self.stiffness_ratio <= 0.0:
            raise ValueError("inclusion stiffness_ratio must be positive")


@dataclass
class ScattererPhantom:
    """Point-scatterer phantom with a single circular stiff inclusion.

    ``scatterers`` is an (n, 4) array with columns (axial_mm, lateral_mm,
    elevational_mm, amplitude).
    """

    scatterers: np.ndarray
    inclusion: Inclusion
    extent_mm: tuple[float, float]  # (axial, lateral)
    slice_half_mm: float = DEFAULT_SLICE_HALF_MM

    def __post_init__(self):
        self.scatterers = np.asarray(self.scatterers, dtype=np.float64)
        if self.scatterers.ndim != 2 or self.scatterers.shape[1] != 4:
            raise ValueError("scatterers must be an (n, 4) array")

    @property
    def count(self) -> int:
        return self.scatterers.shape[0]

    def inside_inclusion(self, axial_mm: np.ndarray, lateral_mm: np.ndarray) -> np.ndarray:
        cz, cx = self.inclusion.center_mm
        r2 = self.inclusion.radius_mm**2
        return (axial_mm - cz) ** 2 + (lateral_mm - cx) ** 2 <= r2


@dataclass(frozen=True)
class DeformationParams:
    """One inter-frame deformation step (compression positive axial_strain)."""

    axial_strain: float = 0.0
    lateral_shift_mm: float = 0.0
    axial_shift_mm: float = 0.0
    elevational_shift_mm: float = 0.0
    rotation_deg: float = 0.0
    decorrelation_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.decorrelation_fraction <= 1.0:
            raise ValueError(f"decorrelation_fraction must be in [0, 1], got {self.decorrelation_fraction}")
        if abs(self.axial_strain) >= 0.1:
            raise ValueError(f"|axial_strain| must be < 0.1, got {self.axial_strain}")


@dataclass
class RfFrame:
    """A single m-by-l RF echo frame (rows: axial samples, columns: lines)."""

    samples: np.ndarray
    psf: PsfParams

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        m, l = self.samples.shape
        if m < 64 or l < 16:
            raise ValueError(f"frame must be at least 64x16, got {m}x{l}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("frame contains non-finite samples")

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def l(self) -> int:
        return self.samples.shape[1]


def make_phantom(
    seed,
    extent_mm: tuple[float, float],
    inclusion: Inclusion,
    density_per_mm2: float = 12.0,
    slice_half_mm: float = DEFAULT_SLICE_HALF_MM,
) -> ScattererPhantom:
    """Draw a uniformly random scatterer field with a circular inclusion.

    Parameters
    ----------
    seed : int or numpy.random.SeedSequence
        Fully determines the phantom.
    extent_mm : (axial, lateral)
        Physical size of the phantom.
    inclusion : Inclusion
        Must fit entirely inside the extent.
    density_per_mm2 : float
        Scatterer density; at least 10/mm^2 for fully developed speckle.

    Returns
    -------
    ScattererPhantom
    """
    ext_ax, ext_lat = float(extent_mm[0]), float(extent_mm[1])
    if density_per_mm2 < 10.0:
        raise ValueError(f"density_per_mm2 must be >= 10 for fully developed speckle, got {density_per_mm2}")
    cz, cx = inclusion.center_mm
    r = inclusion.radius_mm
    if cz - r < 0.0 or cz + r > ext_ax or cx - r < 0.0 or cx + r > ext_lat:
        raise ValueError(
            f"inclusion (center=({cz:g},{cx:g}) mm, r={r:g} mm) does not fit inside "
            f"extent {ext_ax:g}x{ext_lat:g} mm"
        )
    n = math.ceil(density_per_mm2 * ext_ax * ext_lat)
    rng = np.random.default_rng(seed)
    axial = rng.uniform(0.0, ext_ax, n)
    lateral = rng.uniform(0.0, ext_lat, n)
    elev = rng.uniform(-slice_half_mm, slice_half_mm, n)
    amp = rng.standard_normal(n)
    scat = np.column_stack([axial, lateral, elev, amp])
    return ScattererPhantom(scat, inclusion, (ext_ax, ext_lat), slice_half_mm)


def _step_affines(params: DeformationParams, center_mm: tuple[float, float], stiffness_ratio: float):
    """Homogeneous 3x3 maps of one step, for the background and inclusion regions.

    Order of operations: in-plane rotation about the image center, then axial
    scaling z -> z*(1 - eps_local) + axial_shift, then lateral shift.
    """
    theta = math.radians(params.rotation_deg)
    c, s = math.cos(theta), math.sin(theta)
    cz, cx = center_mm
    rot = np.array(
        [
            [c, -s, cz - c * cz + s * cx],
            [s, c, cx - s * cz - c * cx],
            [0.0, 0.0, 1.0],
        ]
    )
    maps = []
    for eps in (params.axial_strain, params.axial_strain / stiffness_ratio):
        sc = np.array(
            [
                [1.0 - eps, 0.0, params.axial_shift_mm],
                [0.0, 1.0, params.lateral_shift_mm],
                [0.0, 0.0, 1.0],
            ]
        )
        maps.append(sc @ rot)
    return maps[0], maps[1]


def deform(phantom: ScattererPhantom, params: DeformationParams, seed=0) -> ScattererPhantom:
    """Apply one deformation step and re-randomize the decorrelated fraction.

    Scatterers inside the inclusion deform with the reduced local strain
    axial_strain / stiffness_ratio. Exactly ceil(rho * count) scatterers are
    replaced by fresh draws (out-of-plane decorrelation model).
    """
    scat = phantom.scatterers.copy()
    z, x = scat[:, 0], scat[:, 1]
    inside = phantom.inside_inclusion(z, x)
    center = (phantom.extent_mm[0] / 2.0, phantom.extent_mm[1] / 2.0)
    m_bg, m_in = _step_affines(params, center, phantom.inclusion.stiffness_ratio)

    pts = np.column_stack([z, x, np.ones_like(z)])
    new_bg = pts @ m_bg.T
    new_in = pts @ m_in.T
    scat[:, 0] = np.where(inside, new_in[:, 0], new_bg[:, 0])
    scat[:, 1] = np.where(inside, new_in[:, 1], new_bg[:, 1])
    scat[:, 2] += params.elevational_shift_mm

    n = scat.shape[0]
    k = math.ceil(params.decorrelation_fraction * n)
    if k > 0:
        rng = np.random.default_rng(seed)
        idx = rng.choice(n, size=k, replace=False)
        scat[idx, 0] = rng.uniform(0.0, phantom.extent_mm[0], k)
        scat[idx, 1] = rng.uniform(0.0, phantom.extent_mm[1], k)
        scat[idx, 2] = rng.uniform(-phantom.slice_half_mm, phantom.slice_half_mm, k)
        scat[idx, 3] = rng.standard_normal(k)

    icz, icx = phantom.inclusion.center_mm
    new_center = m_in @ np.array([icz, icx, 1.0])
    inclusion = replace(phantom.inclusion, center_mm=(float(new_center[0]), float(new_center[1])))
    return ScattererPhantom(scat, inclusion, phantom.extent_mm, phantom.slice_half_mm)


@njit(cache=True)
def _render_kernel(z, x, amp, m, l, dz, pitch, sigma_z, sigma_x, f_sp, out):
    half_z = 4.0 * sigma_z
    half_x = 4.0 * sigma_x
    two_pi = 2.0 * math.pi
    for s in range(z.shape[0]):
        zs, xs, a = z[s], x[s], amp[s]
        i0 = int(math.ceil((zs - half_z) / dz))
        i1 = int(math.floor((zs + half_z) / dz))
        j0 = int(math.ceil((xs - half_x) / pitch - 0.5))
        j1 = int(math.floor((xs + half_x) / pitch - 0.5))
        if i0 < 0:
            i0 = 0
        if i1 > m - 1:
            i1 = m - 1
        if j0 < 0:
            j0 = 0
        if j1 > l - 1:
            j1 = l - 1
        for i in range(i0, i1 + 1):
            d = i * dz - zs
            ax = a * math.cos(two_pi * f_sp * d) * math.exp(-d * d / (2.0 * sigma_z * sigma_z))
            for j in range(j0, j1 + 1):
                e = (j + 0.5) * pitch - xs
                out[i, j] += ax * math.exp(-e * e / (2.0 * sigma_x * sigma_x))


def render_rf(phantom: ScattererPhantom, psf: PsfParams, m: int, l: int) -> RfFrame:
    """Render an m-by-l RF frame as the superposition of per-scatterer PSFs.

    The PSF is separable: axially a Gaussian-windowed cosine at the center
    frequency (round-trip spatial frequency 2*fc/c), laterally a Gaussian
    whose FWHM is the beamwidth. Scatterers outside the imaged region simply
    do not contribute. Deterministic for a fixed phantom.
    """
    if m < 64 or l < 16:
        raise ValueError(f"frame dims must be at least 64x16, got {m}x{l}")
    dz = psf.axial_step_mm
    pitch = phantom.extent_mm[1] / l
    sigma_f = psf.fractional_bandwidth * psf.center_frequency_hz / _FWHM
    sigma_t = 1.0 / (2.0 * math.pi * sigma_f)
    sigma_z = 1e3 * SOUND_SPEED_M_S * sigma_t / 2.0
    sigma_x = psf.lateral_beamwidth_mm / _FWHM
    f_sp = 2.0 * psf.center_frequency_hz / (1e3 * SOUND_SPEED_M_S)  # cycles/mm
    if 2.0 * PSF_SUPPORT_SIGMAS * sigma_z > m * dz or 2.0 * PSF_SUPPORT_SIGMAS * sigma_x > l * pitch:
        raise ValueError(
            f"PSF support ({2 * PSF_SUPPORT_SIGMAS * sigma_z:.2f} x "
            f"{2 * PSF_SUPPORT_SIGMAS * sigma_x:.2f} mm) exceeds image extent"
        )
    out = np.zeros((m, l))
    scat = phantom.scatterers
    if scat.shape[0] > 0:
        _render_kernel(
            np.ascontiguousarray(scat[:, 0]),
            np.ascontiguousarray(scat[:, 1]),
            np.ascontiguousarray(scat[:, 3]),
            m,
            l,
            dz,
            pitch,
            sigma_z,
            sigma_x,
            f_sp,
            out,
        )
    return RfFrame(out, psf)


@dataclass(frozen=True)
class PairTruth:
    frame_i: int
    frame_j: int
    label: int  # 1 = good, 0 = bad
    axial_strain: float  # cumulative, signed
    rho: float  # cumulative decorrelated fraction
    lateral_shift_mm: float
    rotation_deg: float


def _label(eps: float, rho: float, lat: float, rot: float) -> int:
    ok = (
        GOOD_STRAIN_MIN <= abs(eps) <= GOOD_STRAIN_MAX
        and rho <= GOOD_RHO_MAX
        and abs(lat) <= GOOD_LATERAL_MAX_MM
        and abs(rot) <= GOOD_ROTATION_MAX_DEG
    )
    return 1 if ok else 0


@dataclass
class SequenceGroundTruth:
    """Exact deformation bookkeeping for a simulated frame sequence.

    Carries per-pair labels/cumulative parameters for every ordered pair
    within the pairing window, and can reconstruct the true dense axial
    displacement field of any pair analytically.
    """

    n_frames: int
    m: int
    l: int
    dz_mm: float
    pitch_mm: float
    inclusion0: Inclusion
    steps: list[DeformationParams]
    pairs: list[PairTruth]
    bg_maps: np.ndarray = field(repr=False)  # (n_frames, 3, 3) cumulative from frame 0
    in_maps: np.ndarray = field(repr=False)

    def pair(self, i: int, j: int) -> PairTruth:
        for p in self.pairs:
            if p.frame_i == i and p.frame_j == j:
                return p
        raise KeyError(f"pair ({i}, {j}) not in ground truth")

    def displacement_field(self, i: int, j: int) -> np.ndarray:
        """True axial displacement from frame i to frame j, in sample units.

        Region membership is decided by pulling frame-i coordinates back to
        frame 0 with the background map and testing the original inclusion.
        """
        if not (0 <= i < self.n_frames and 0 <= j < self.n_frames):
            raise ValueError(f"frame index out of range: ({i}, {j})")
        zi = np.arange(self.m) * self.dz_mm
        xj = (np.arange(self.l) + 0.5) * self.pitch_mm
        zz, xx = np.meshgrid(zi, xj, indexing="ij")
        pts = np.stack([zz.ravel(), xx.ravel(), np.ones(zz.size)], axis=1)

        m_bg = self.bg_maps[j] @ np.linalg.inv(self.bg_maps[i])
        m_in = self.in_maps[j] @ np.linalg.inv(self.in_maps[i])
        p0 = pts @ np.linalg.inv(self.bg_maps[i]).T
        cz, cx = self.inclusion0.center_mm
        inside = (p0[:, 0] - cz) ** 2 + (p0[:, 1] - cx) ** 2 <= self.inclusion0.radius_mm**2

        u_bg = pts @ m_bg.T
        u_in = pts @ m_in.T
        u = np.where(inside, u_in[:, 0], u_bg[:, 0]) - pts[:, 0]
        return (u / self.dz_mm).reshape(self.m, self.l)


def _cumulative_pair(steps: list[DeformationParams], i: int, j: int) -> tuple[float, float, float, float]:
    """Cumulative (strain, rho, lateral, rotation) from frame i to frame j."""
    lo, hi = min(i, j), max(i, j)
    keep = 1.0
    survive = 1.0
    lat = 0.0
    rot = 0.0
    for k in range(lo, hi):
        keep *= 1.0 - steps[k].axial_strain
        survive *= 1.0 - steps[k].decorrelation_fraction
        lat += steps[k].lateral_shift_mm
        rot += steps[k].rotation_deg
    rho = 1.0 - survive
    if j >= i:
        return 1.0 - keep, rho, lat, rot
    # reversed pair: inverse composition
    return 1.0 - 1.0 / keep, rho, -lat, -rot


def simulate_sequence(
    seed,
    n_frames: int,
    motion_script: list[DeformationParams],
    m: int = 512,
    l: int = 128,
    psf: PsfParams | None = None,
    density_per_mm2: float = 12.0,
    inclusion: Inclusion | None = None,
    pair_window: int = 16,
) -> tuple[list[RfFrame], SequenceGroundTruth]:
    """Simulate a deforming-phantom RF sequence with exact ground truth.

    Frame k+1 is rendered from the cumulative deformation of frame k's
    phantom. Ground-truth labels cover every ordered pair (i, j), i != j,
    with |i - j| <= pair_window/2.

    Returns
    -------
    (frames, truth) : (list of RfFrame, SequenceGroundTruth)
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    if len(motion_script) != n_frames - 1:
        raise ValueError(f"motion script must have n_frames-1={n_frames - 1} steps, got {len(motion_script)}")
    psf = psf or PsfParams()
    dz = psf.axial_step_mm
    pitch = DEFAULT_LATERAL_PITCH_MM
    extent = (m * dz, l * pitch)
    if inclusion is None:
        inclusion = default_inclusion(m, l, psf)

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_frames)
    phantom = make_phantom(children[0], extent, inclusion, density_per_mm2)
    inclusion0 = phantom.inclusion
    center = (extent[0] / 2.0, extent[1] / 2.0)

    frames = [render_rf(phantom, psf, m, l)]
    eye = np.eye(3)
    bg_maps = [eye]
    in_maps = [eye]
    for k, params in enumerate(motion_script):
        m_bg, m_in = _step_affines(params, center, inclusion0.stiffness_ratio)
        bg_maps.append(m_bg @ bg_maps[-1])
        in_maps.append(m_in @ in_maps[-1])
        phantom = deform(phantom, params, seed=children[k + 1])
        frames.append(render_rf(phantom, psf, m, l))

    half = pair_window // 2
    pairs = []
    for i in range(n_frames):
        for j in range(max(0, i - half), min(n_frames, i + half + 1)):
            if j == i:
                continue
            eps, rho, lat, rot = _cumulative_pair(motion_script, i, j)
            pairs.append(PairTruth(i, j, _label(eps, rho, lat, rot), eps, rho, lat, rot))

    truth = SequenceGroundTruth(
        n_frames=n_frames,
        m=m,
        l=l,
        dz_mm=dz,
        pitch_mm=pitch,
        inclusion0=inclusion0,
        steps=list(motion_script),
        pairs=pairs,
        bg_maps=np.array(bg_maps),
        in_maps=np.array(in_maps),
    )
    return frames, truth


def default_inclusion(m: int, l: int, psf: PsfParams | None = None) -> Inclusion:
    """Centered stiff inclusion sized relative to the imaged extent."""
    psf = psf or PsfParams()
    extent = (m * psf.axial_step_mm, l * DEFAULT_LATERAL_PITCH_MM)
    radius = 0.22 * min(extent)
    return Inclusion((extent[0] / 2.0, extent[1] / 2.0), radius, 3.0)


def make_motion_script(seed, n_steps: int, preset: str = "steady") -> list[DeformationParams]:
    """Build a deterministic per-step deformation script.

    Presets: "steady" is uniform good compression; "events" is steady with
    intermittent decorrelation/lateral/rotation events; "mixed" draws each
    step from a spread of categories (for classifier training corpora).
    """
    rng = np.random.default_rng(seed)
    steps = []

    def steady(lo=0.009, hi=0.015):
        return DeformationParams(
            axial_strain=rng.uniform(lo, hi),
            lateral_shift_mm=rng.uniform(-0.05, 0.05),
            axial_shift_mm=rng.uniform(-0.02, 0.02),
            rotation_deg=rng.uniform(-0.03, 0.03),
        )

    def event(kinds=("decorr", "decorr", "decorr", "lateral", "rotation")):
        kind = rng.choice(list(kinds))
        eps = rng.uniform(0.001, 0.004)
        if kind == "decorr":
            return DeformationParams(axial_strain=eps, decorrelation_fraction=rng.uniform(0.35, 0.6))
        if kind == "lateral":
            return DeformationParams(axial_strain=eps, lateral_shift_mm=rng.choice([-1, 1]) * rng.uniform(1.4, 2.6))
        return DeformationParams(axial_strain=eps, rotation_deg=rng.choice([-1, 1]) * rng.uniform(1.4, 2.6))

    if preset == "steady":
        steps = [steady() for _ in range(n_steps)]
    elif preset == "events":
        # compression steps sit near the top of the usable strain band, so
        # any two consecutive steps compose out of band; out-of-plane
        # (scatterer replacement) events arrive at a fixed fraction of steps
        n_ev = min(max(1, round(0.45 * n_steps)), n_steps)
        where = set(rng.choice(n_steps, size=n_ev, replace=False).tolist())
        for k in range(n_steps):
            steps.append(event(("decorr",)) if k in where else steady(0.028, 0.032))
    elif preset == "mixed":
        for _ in range(n_steps):
            cat = rng.choice(["good", "tiny", "large", "decorr", "lateral", "rotation"], p=[0.40, 0.16, 0.12, 0.12, 0.10, 0.10])
            if cat == "good":
                steps.append(steady())
            elif cat == "tiny":
                steps.append(DeformationParams(axial_strain=rng.uniform(0.0, 0.002)))
            elif cat == "large":
                steps.append(DeformationParams(axial_strain=rng.uniform(0.045, 0.07)))
            else:
                steps.append(event())
    else:
        raise ValueError(f"unknown motion preset: {preset!r}")
    return steps


def _affine_displacement(
    m_bg: np.ndarray,
    m_in: np.ndarray,
    inclusion: Inclusion,
    m: int,
    l: int,
    dz_mm: float,
    pitch_mm: float,
) -> np.ndarray:
    """Axial displacement (sample units) of the two-region affine map, on
    the fine grid, with membership tested in the map's source coordinates."""
    zi = np.arange(m) * dz_mm
    xj = (np.arange(l) + 0.5) * pitch_mm
    zz, xx = np.meshgrid(zi, xj, indexing="ij")
    pts = np.stack([zz.ravel(), xx.ravel(), np.ones(zz.size)], axis=1)
    cz, cx = inclusion.center_mm
    inside = (pts[:, 0] - cz) ** 2 + (pts[:, 1] - cx) ** 2 <= inclusion.radius_mm**2
    u_bg = pts @ m_bg.T
    u_in = pts @ m_in.T
    u = np.where(inside, u_in[:, 0], u_bg[:, 0]) - pts[:, 0]
    return (u / dz_mm).reshape(m, l)


def _random_step(rng) -> DeformationParams:
    """One family member: all six deformation parameters drawn at once."""
    return DeformationParams(
        axial_strain=rng.uniform(-0.035, 0.035),
        lateral_shift_mm=rng.uniform(-2.0, 2.0),
        axial_shift_mm=rng.uniform(-0.5, 0.5),
        elevational_shift_mm=rng.uniform(-1.0, 1.0),
        rotation_deg=rng.uniform(-2.0, 2.0),
        decorrelation_fraction=rng.uniform(0.0, 0.3),
    )


def make_training_fields(
    seed,
    n_fields: int,
    m: int,
    l: int,
    noise_level: float = 0.01,
    psf: PsfParams | None = None,
    inclusion: Inclusion | None = None,
) -> list[np.ndarray]:
    """Ground-truth displacement fields of a 12-parameter deformation family.

    Each field is the exact cumulative axial displacement of two composed
    deformation steps (two full parameter sets) of the default phantom
    geometry, in sample units, plus additive Gaussian noise with standard
    deviation noise_level times the clean corpus RMS.
    """
    if n_fields < 1:
        raise ValueError("n_fields must be >= 1")
    psf = psf or PsfParams()
    dz = psf.axial_step_mm
    pitch = DEFAULT_LATERAL_PITCH_MM
    inclusion = inclusion or default_inclusion(m, l, psf)
    center = (m * dz / 2.0, l * pitch / 2.0)
    rng = np.random.default_rng(seed)
    fields = np.empty((n_fields, m, l))
    for k in range(n_fields):
        b1, i1 = _step_affines(_random_step(rng), center, inclusion.stiffness_ratio)
        b2, i2 = _step_affines(_random_step(rng), center, inclusion.stiffness_ratio)
        fields[k] = _affine_displacement(b2 @ b1, i2 @ i1, inclusion, m, l, dz, pitch)
    rms = float(np.sqrt(np.mean(fields**2)))
    fields += rng.standard_normal(fields.shape) * (noise_level * rms)
    return list(fields)


# ---------------------------------------------------------------------------
# File formats

_RFB_MAGIC = b"RFB1"


def write_rfb(path, frames, sampling_frequency_hz: float, center_frequency_hz: float) -> None:
    """Write an RF sequence file: RFB1 header + hardware rates + f32 frames.

    Frames are stored line by line (column-major order of each m-by-l frame).
    """
    arr = np.asarray([f.samples if isinstance(f, RfFrame) else f for f in frames], dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("frames must be a sequence of 2-D arrays")
    n, m, l = arr.shape
    with open(path, "wb") as fh:
        fh.write(_RFB_MAGIC)
        fh.write(struct.pack("<III", m, l, n))
        fh.write(struct.pack("<dd", sampling_frequency_hz, center_frequency_hz))
        for k in range(n):
            fh.write(arr[k].astype("<f4").tobytes(order="F"))


def read_rfb(path) -> tuple[np.ndarray, float, float]:
    """Read an RF sequence file; returns (frames (n, m, l) float64, fs, fc)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _RFB_MAGIC:
            raise ValueError(f"bad magic in {path}: expected {_RFB_MAGIC!r}, got {magic!r}")
        head = fh.read(12)
        if len(head) != 12:
            raise ValueError(f"truncated header (m, l, n_frames) in {path}")
        m, l, n = struct.unpack("<III", head)
        rates = fh.read(16)
        if len(rates) != 16:
            raise ValueError(f"truncated header (sampling/center frequency) in {path}")
        fs, fc = struct.unpack("<dd", rates)
        count = m * l * n
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise ValueError(f"truncated frame data in {path}: expected {count} f32 samples")
        flat = np.frombuffer(raw, dtype="<f4")
    frames = flat.reshape(n, l, m).transpose(0, 2, 1).astype(np.float64)
    return frames, fs, fc


_TRUTH_COLUMNS = ["frame_i", "frame_j", "label", "axial_strain", "rho", "lateral_shift_mm"]


def write_truth_csv(path, truth: SequenceGroundTruth) -> None:
    """Write the ground-truth sidecar CSV (one row per labeled ordered pair)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_TRUTH_COLUMNS)
        for p in truth.pairs:
            w.writerow([p.frame_i, p.frame_j, p.label, repr(p.axial_strain), repr(p.rho), repr(p.lateral_shift_mm)])


def read_truth_csv(path) -> list[PairTruth]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != _TRUTH_COLUMNS:
            raise ValueError(f"bad truth CSV header in {path}: {header}")
        out = []
        for row in r:
            out.append(
                PairTruth(
                    frame_i=int(row[0]),
                    frame_j=int(row[1]),
                    label=int(row[2]),
                    axial_strain=float(row[3]),
                    rho=float(row[4]),
                    lateral_shift_mm=float(row[5]),
                    rotation_deg=0.0,
                )
            )
    return out
