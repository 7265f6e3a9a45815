"""Synthetic measurement grids, magnitude fields, and HRIR archives.

These generators stand in for measured datasets in tests and demos: smooth
low-order directional patterns give learnable targets, ring grids exercise
the bilinear baseline and checkerboard splits, and impulse-built archives
exercise the full file-to-training pipeline.
"""

from __future__ import annotations

import numpy as np

from .archive import DatasetArchive, Direction, Ear, SubjectEar
from .preprocess import FrequencyGrid, make_frequency_grid


def ring_directions(
    elevations_deg, n_azimuths: int, offset_deg_per_ring: float = 0.0
) -> list[Direction]:
    """Rings of evenly spaced azimuths at the given elevations; alternate
    rings can be rotated to avoid aligned meridians."""
    if n_azimuths < 1:
        raise ValueError("need at least one azimuth per ring")
    out = []
    for r, el in enumerate(elevations_deg):
        start = r * offset_deg_per_ring
        for j in range(n_azimuths):
            az = (start + 360.0 * j / n_azimuths) % 360.0
            out.append(Direction(float(az), float(el)))
    return out


def grid_with_poles(elevations_deg, n_azimuths: int) -> list[Direction]:
    """Ring grid plus both poles, giving VBAP a hull that covers the sphere."""
    dirs = ring_directions(elevations_deg, n_azimuths)
    dirs.append(Direction(0.0, 90.0))
    dirs.append(Direction(0.0, -90.0))
    return dirs


def fibonacci_directions(n: int) -> list[Direction]:
    """Quasi-uniform spherical coverage (golden-angle spiral)."""
    if n < 1:
        raise ValueError("need at least one direction")
    i = np.arange(n, dtype=np.float64)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    az = np.remainder(360.0 * i / golden, 360.0)
    el = np.rad2deg(np.arcsin(np.clip(2.0 * (i + 0.5) / n - 1.0, -1.0, 1.0)))
    return [Direction(float(a), float(e)) for a, e in zip(az, el)]


def sph_monomials(azimuth_deg, elevation_deg, order: int = 3) -> np.ndarray:
    """(L, M) design matrix of unit-vector monomials up to total degree
    ``order``; restricted to the sphere these span the smooth low-order
    directional patterns."""
    from .baselines import direction_to_unit_vector

    vecs = direction_to_unit_vector(azimuth_deg, elevation_deg)
    x, y, z = vecs[..., 0], vecs[..., 1], vecs[..., 2]
    cols = []
    for dx in range(order + 1):
        for dy in range(order + 1 - dx):
            for dz in range(order + 1 - dx - dy):
                cols.append((x ** dx) * (y ** dy) * (z ** dz))
    return np.stack(cols, axis=-1)


def smooth_pattern_db(
    azimuth_deg,
    elevation_deg,
    n_bins: int,
    seed: int = 0,
    order: int = 3,
    amplitude_db: float = 6.0,
) -> np.ndarray:
    """(L, K) dB magnitudes, smooth in both direction and frequency.

    Directional shape is a random low-order pattern; each coefficient drifts
    across frequency as a single slow sinusoid, so neighboring bins stay
    strongly correlated.
    """
    basis = sph_monomials(azimuth_deg, elevation_deg, order)  # (L, M)
    m = basis.shape[-1]
    rng = np.random.default_rng(seed)
    amp = rng.normal(0.0, 1.0, size=m) / (1.0 + np.arange(m))
    rate = rng.uniform(0.5, 2.0, size=m)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=m)
    k = np.arange(n_bins, dtype=np.float64) / max(n_bins - 1, 1)
    coeff = amp[:, None] * np.cos(2.0 * np.pi * rate[:, None] * k[None, :] + phase[:, None])
    values = basis @ coeff  # (L, K)
    peak = np.max(np.abs(values))
    if peak > 0.0:
        values = values * (amplitude_db / peak)
    return values


def make_field(
    directions: list[Direction],
    n_bins: int = 92,
    seed: int = 0,
    subject_id: str = "synthetic",
    dataset_name: str = "synthetic",
    order: int = 3,
    amplitude_db: float = 6.0,
    grid: FrequencyGrid | None = None,
):
    """MagnitudeField with a smooth synthetic pattern on the standard grid."""
    from .archive import MagnitudeField, directions_to_array

    grid = grid if grid is not None else make_frequency_grid(n_bins)
    arr = directions_to_array(directions)
    values = smooth_pattern_db(
        arr[:, 0], arr[:, 1], grid.n_bins, seed=seed, order=order,
        amplitude_db=amplitude_db,
    )
    return MagnitudeField(
        directions=list(directions),
        values_db=values,
        freq_grid_hz=grid.bins_hz,
        subject_id=subject_id,
        dataset_name=dataset_name,
    )


def impulse_hrirs(
    directions: list[Direction],
    n_taps: int,
    seed: int = 0,
    sample_rate_hz: float = 44100.0,
) -> np.ndarray:
    """(L, n_taps) float32 impulse responses with direction-dependent gain,
    delay, and a single reflection; smooth across the sphere by construction."""
    if n_taps < 8:
        raise ValueError("need at least 8 taps")
    from .archive import directions_to_array
    from .baselines import direction_to_unit_vector

    arr = directions_to_array(directions)
    vecs = direction_to_unit_vector(arr[:, 0], arr[:, 1])
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    cosine = vecs @ axis  # [-1, 1], smooth over the sphere
    gain = 0.6 + 0.35 * cosine
    delay = np.round(2.0 + 2.0 * (1.0 - cosine)).astype(int)  # 2..4 samples
    echo_gain = 0.25 * (1.0 + cosine) / 2.0
    out = np.zeros((len(directions), n_taps), dtype=np.float32)
    rows = np.arange(len(directions))
    out[rows, delay] = gain.astype(np.float32)
    out[rows, delay + 3] = echo_gain.astype(np.float32)
    return out


def make_archive(
    dataset_name: str,
    n_subjects: int,
    directions: list[Direction],
    sample_rate_hz: float = 44100.0,
    n_taps: int = 64,
    seed: int = 0,
) -> DatasetArchive:
    """Archive with left and right HRIRs for each synthetic subject."""
    ears = []
    for s in range(n_subjects):
        for ear in (Ear.LEFT, Ear.RIGHT):
            taps = impulse_hrirs(
                directions, n_taps,
                seed=seed * 1000003 + s * 2 + ear.value,
                sample_rate_hz=sample_rate_hz,
            )
            ears.append(
                SubjectEar(
                    subject_id=f"{dataset_name}_{s:03d}",
                    dataset_name=dataset_name,
                    ear=ear,
                    sample_rate_hz=sample_rate_hz,
                    directions=list(directions),
                    hrirs=taps,
                )
            )
    return DatasetArchive(dataset_name, sample_rate_hz, ears)
