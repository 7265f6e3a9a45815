"""Raw HRIRs to normalized dB magnitude fields, on arbitrary sampling grids.

The frequency grid is fixed at the 92 bins k = 1..92 of a 256-point FFT at
the 44.1 kHz reference rate (172.27 Hz .. 15 848 Hz). Material at any native
sample rate is evaluated on that same grid by taking the discrete-time
Fourier transform of each HRIR at the grid frequencies, which coincides with
the 256-point FFT for 44.1 kHz material up to 256 taps.

Magnitudes are normalized so the quadrature-weighted mean-square energy on
the equator ring equals one, then converted to dB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import (
    Direction,
    Ear,
    MagnitudeField,
    Stage,
    SubjectEar,
    canonicalize_azimuth,
    relabel,
)

REFERENCE_RATE_HZ = 44100.0
FFT_SIZE = 256
DEFAULT_K = 92
EQUATOR_TOL_DEG = 2.5
DB_FLOOR_RATIO = 1e-6
WRAP_BAND_DEG = 30.0


@dataclass(frozen=True)
class FrequencyGrid:
    bins_hz: np.ndarray
    k_indices: np.ndarray
    reference_rate_hz: float = REFERENCE_RATE_HZ
    fft_size: int = FFT_SIZE

    @property
    def n_bins(self) -> int:
        return int(self.bins_hz.size)


def make_frequency_grid(n_bins: int = DEFAULT_K) -> FrequencyGrid:
    """Bins k = 1..n_bins of the reference-rate FFT grid."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    k = np.arange(1, n_bins + 1, dtype=np.int64)
    bins = k * (REFERENCE_RATE_HZ / FFT_SIZE)
    return FrequencyGrid(bins_hz=bins, k_indices=k)


def hrir_to_magnitude(ear: SubjectEar, grid: FrequencyGrid) -> np.ndarray:
    """(L, K) linear magnitudes: |DTFT of each HRIR at the grid frequencies|.

    Uses the ear's native sample rate, so heterogeneous datasets land on one
    shared grid without resampling.
    """
    if ear.stage is not Stage.RAW or ear.hrirs is None:
        raise ValueError("hrir_to_magnitude expects a raw-stage subject-ear")
    fs = ear.sample_rate_hz
    if grid.bins_hz[-1] >= fs / 2.0:
        raise ValueError(
            f"grid extends to {grid.bins_hz[-1]:.1f} Hz, at or above the Nyquist "
            f"frequency {fs / 2.0:.1f} Hz of {ear.subject_id!r}"
        )
    taps = ear.hrirs.astype(np.float64)
    n = np.arange(taps.shape[1], dtype=np.float64)
    # (T, K) complex exponentials; (L, T) @ (T, K) evaluates all DTFT sums
    kernel = np.exp(-2j * np.pi * np.outer(n, grid.bins_hz) / fs)
    return np.abs(taps @ kernel)


def mirror_right_ear(ear: SubjectEar) -> SubjectEar:
    """Reflect a right ear across the median plane: azimuth -> 360 - azimuth.

    The result is treated as a left ear by the model ("mirrored" flag set);
    applying the mirror twice restores the original azimuths.
    """
    if ear.ear is not Ear.RIGHT:
        raise ValueError(f"mirror_right_ear on a {ear.ear.name.lower()} ear")
    dirs = [
        Direction(
            canonicalize_azimuth(360.0 - d.azimuth_deg), d.elevation_deg, d.distance_m
        )
        for d in ear.directions
    ]
    return relabel(ear, directions=dirs, mirrored=not ear.mirrored)


def canonicalize_ear(ear: SubjectEar) -> SubjectEar:
    """Canonical azimuths; right ears mirrored so all ears share one model."""
    if ear.ear is Ear.RIGHT and not ear.mirrored:
        ear = mirror_right_ear(ear)
    dirs = [d.canonical() for d in ear.directions]
    return relabel(ear, directions=dirs)


def extend_azimuth_wrap(field: MagnitudeField) -> MagnitudeField:
    """Training view with rows duplicated across the frontal seam.

    Rows with azimuth in (0, 30) reappear at theta+360 and rows in (330, 360)
    at theta-360, so the network sees a continuous neighborhood around 0/360.
    Duplicates are flagged in wrap_mask; evaluation strips them.
    """
    az = field.azimuths()
    lo = (az > 0.0) & (az < WRAP_BAND_DEG)
    hi = (az > 360.0 - WRAP_BAND_DEG) & (az < 360.0)
    dirs = list(field.directions)
    rows = [field.values_db]
    for idx, shift in ((np.nonzero(lo)[0], 360.0), (np.nonzero(hi)[0], -360.0)):
        for i in idx:
            d = field.directions[i]
            dirs.append(Direction(d.azimuth_deg + shift, d.elevation_deg, d.distance_m))
        if idx.size:
            rows.append(field.values_db[idx])
    mask = np.zeros(len(dirs), dtype=bool)
    mask[field.n_locations :] = True
    return MagnitudeField(
        dirs,
        np.concatenate(rows, axis=0),
        field.freq_grid_hz,
        wrap_mask=mask,
        subject_id=field.subject_id,
        dataset_name=field.dataset_name,
    )


@dataclass(frozen=True)
class EquatorRing:
    """Indices of the ring used for normalization plus its azimuth quadrature.

    delta_theta_deg are circular Voronoi gaps: half-distance to each azimuthal
    neighbor, summed; they are positive and sum to 360.
    """

    ring_indices: np.ndarray
    azimuths_deg: np.ndarray
    delta_theta_deg: np.ndarray


def circular_gaps(azimuths_deg: np.ndarray) -> np.ndarray:
    """Voronoi cell widths of sorted azimuths on the circle, in degrees."""
    az = np.asarray(azimuths_deg, dtype=np.float64)
    n = az.size
    nxt = np.roll(az, -1)
    step = np.remainder(nxt - az, 360.0)
    step[step == 0.0] = 360.0 if n == 1 else 0.0
    # cell of point i spans half the arc to each neighbor
    return 0.5 * (step + np.roll(step, 1))


def find_equator_ring(
    directions: list[Direction], tol_deg: float = EQUATOR_TOL_DEG
) -> EquatorRing:
    """Points with |elevation| <= tol, or the nearest-|elevation| ring if none."""
    if not directions:
        raise ValueError("empty direction list")
    el = np.array([d.elevation_deg for d in directions])
    az = np.array([canonicalize_azimuth(d.azimuth_deg) for d in directions])
    sel = np.nonzero(np.abs(el) <= tol_deg)[0]
    if sel.size == 0:
        best = np.min(np.abs(el))
        sel = np.nonzero(np.abs(np.abs(el) - best) <= 1e-9)[0]
    if sel.size < 3:
        raise ValueError(
            f"equator ring has only {sel.size} point(s); need at least 3"
        )
    order = np.argsort(az[sel], kind="stable")
    idx = sel[order]
    ring_az = az[idx]
    return EquatorRing(
        ring_indices=idx, azimuths_deg=ring_az, delta_theta_deg=circular_gaps(ring_az)
    )


def equator_energy(values_linear: np.ndarray, ring: EquatorRing) -> float:
    """Quadrature-weighted mean-square magnitude over the equator ring."""
    K = values_linear.shape[1]
    sq = values_linear[ring.ring_indices] ** 2
    return float(np.sum(sq.sum(axis=1) * ring.delta_theta_deg) / (360.0 * K))


def normalize_equator(values_linear: np.ndarray, ring: EquatorRing) -> np.ndarray:
    """Scale linear magnitudes so the equator mean-square energy equals one."""
    energy = equator_energy(values_linear, ring)
    if energy <= 0.0:
        raise ValueError("zero equator energy; cannot normalize")
    return values_linear / np.sqrt(energy)


def to_db(values_linear: np.ndarray, floor_ratio: float = DB_FLOOR_RATIO) -> np.ndarray:
    """20*log10 with a relative floor so exact zeros stay finite."""
    values_linear = np.asarray(values_linear, dtype=np.float64)
    floor = floor_ratio * float(np.max(values_linear))
    if floor <= 0.0:
        raise ValueError("all-zero magnitude matrix cannot be converted to dB")
    return 20.0 * np.log10(np.maximum(values_linear, floor))


def process_subject_ear(
    ear: SubjectEar,
    grid: FrequencyGrid | None = None,
    equator_tol_deg: float = EQUATOR_TOL_DEG,
    shared_scale: float | None = None,
) -> MagnitudeField:
    """Full pipeline for one subject-ear: canonicalize, DTFT, normalize, dB.

    ``shared_scale`` overrides the per-ear equator normalizer (used by the
    per-database normalization mode).
    """
    grid = grid or make_frequency_grid()
    ear = canonicalize_ear(ear)
    mags = hrir_to_magnitude(ear, grid)
    if shared_scale is None:
        ring = find_equator_ring(ear.directions, equator_tol_deg)
        mags = normalize_equator(mags, ring)
    else:
        mags = mags / shared_scale
    return MagnitudeField(
        directions=ear.directions,
        values_db=to_db(mags),
        freq_grid_hz=grid.bins_hz,
        subject_id=ear.subject_id,
        dataset_name=ear.dataset_name,
    )


def database_equator_scale(
    ears: list[SubjectEar],
    grid: FrequencyGrid | None = None,
    equator_tol_deg: float = EQUATOR_TOL_DEG,
) -> float:
    """One shared normalizer for a whole database: sqrt of the mean of the
    per-ear equator energies."""
    grid = grid or make_frequency_grid()
    energies = []
    for ear in ears:
        ear = canonicalize_ear(ear)
        mags = hrir_to_magnitude(ear, grid)
        ring = find_equator_ring(ear.directions, equator_tol_deg)
        energies.append(equator_energy(mags, ring))
    return float(np.sqrt(np.mean(energies)))
