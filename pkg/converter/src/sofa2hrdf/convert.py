"""SOFA to HRDF conversion.

One SOFA file holds one subject measured at both ears; conversion emits one
archive ear per (subject, ear) with receiver 0 tagged left and receiver 1
tagged right. A directory of SOFA files (one per subject, the usual dataset
layout) converts to a single archive, files taken in sorted name order so
output bytes never depend on filesystem enumeration.

Position handling:
  - spherical positions pass through with the azimuth canonicalized to
    [0, 360) by positive remainder; angles declared in radians are converted
    to degrees first;
  - cartesian positions (x, y, z in metres) map to azimuth atan2(y, x)
    wrapped to [0, 360), elevation asin(z / ||v||), distance ||v||;
  - every emitted position is (azimuth deg, elevation deg, distance m).

Samples are stored as f32: bit-exactly when the source is f32, otherwise
rounded to nearest. Multiple measurement distances are passed through
unchanged; policy on them belongs to consumers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hrdf import EAR_LEFT, EAR_RIGHT, EarEntry, HrdfArchive, write_hrdf
from .sofa import SofaError, SofaSource, read_sofa


def spherical_from_cartesian(xyz: np.ndarray) -> np.ndarray:
    """(M, 3) metres to (azimuth deg in [0, 360), elevation deg, distance m)."""
    xyz = np.asarray(xyz, dtype=np.float64)
    dist = np.linalg.norm(xyz, axis=1)
    if (dist == 0.0).any():
        raise SofaError("cartesian source position at the origin has no direction")
    az = np.remainder(np.rad2deg(np.arctan2(xyz[:, 1], xyz[:, 0])), 360.0)
    el = np.rad2deg(np.arcsin(np.clip(xyz[:, 2] / dist, -1.0, 1.0)))
    return np.column_stack([az, el, dist])


def positions_to_directions(src: SofaSource) -> np.ndarray:
    """Declared SOFA positions to canonical (azimuth, elevation, distance)."""
    if src.position_type == "cartesian":
        return spherical_from_cartesian(src.positions)
    pos = src.positions
    if src.angle_units == "radian":
        pos = np.column_stack([np.rad2deg(pos[:, 0]), np.rad2deg(pos[:, 1]),
                               pos[:, 2]])
    az = np.remainder(pos[:, 0], 360.0)
    az[az == 360.0] = 0.0  # remainder of tiny negatives rounds up to 360.0
    return np.column_stack([az, pos[:, 1], pos[:, 2]])


def hrirs_as_f32(ir: np.ndarray) -> np.ndarray:
    """Source samples as f32: identity for f32 input, round-to-nearest else."""
    if ir.dtype == np.float32:
        return ir
    return np.asarray(ir, dtype=np.float64).astype(np.float32)


def ears_from_sofa(src: SofaSource) -> list[EarEntry]:
    """The subject's left then right ear as archive entries."""
    directions = positions_to_directions(src)
    samples = hrirs_as_f32(src.ir)
    return [
        EarEntry(src.subject_id, ear, directions, samples[:, receiver, :])
        for receiver, ear in ((0, EAR_LEFT), (1, EAR_RIGHT))
    ]


@dataclass
class ConversionSummary:
    """What a conversion run produced, one line per fact when printed."""

    dataset_name: str
    out_path: str
    n_files: int
    n_subjects: int
    n_ears: int
    locations_per_ear: list[int]   # sorted distinct per-ear location counts
    taps_per_ear: list[int]        # sorted distinct per-ear tap counts
    sample_rate_hz: float
    n_bytes: int

    def lines(self) -> list[str]:
        locs = "/".join(str(n) for n in self.locations_per_ear)
        taps = "/".join(str(n) for n in self.taps_per_ear)
        return [
            f"dataset {self.dataset_name!r}: {self.n_subjects} subjects, "
            f"{self.n_ears} ears from {self.n_files} SOFA file(s)",
            f"locations per ear: {locs}; taps per ear: {taps}; "
            f"{self.sample_rate_hz:g} Hz",
            f"wrote {self.n_bytes} bytes to {self.out_path}",
        ]


def sofa_paths_for(in_path) -> list[str]:
    """The SOFA files a conversion input names: itself, or a directory's
    *.sofa members in sorted name order."""
    p = Path(in_path)
    if p.is_dir():
        found = sorted(str(q) for q in p.iterdir() if q.suffix == ".sofa")
        if not found:
            raise SofaError(f"no .sofa files in directory {in_path}")
        return found
    if not p.exists():
        raise FileNotFoundError(f"no such file: {in_path}")
    return [str(p)]


def convert(in_path, out_path, dataset_name: str) -> ConversionSummary:
    """Convert one SOFA file, or a directory of them, into one HRDF archive."""
    if not dataset_name:
        raise ValueError("dataset name must be nonempty")
    paths = sofa_paths_for(in_path)
    ears: list[EarEntry] = []
    sample_rate = None
    for path in paths:
        src = read_sofa(path)
        if sample_rate is None:
            sample_rate = src.sample_rate_hz
        elif src.sample_rate_hz != sample_rate:
            raise SofaError(
                f"{path} sampled at {src.sample_rate_hz:g} Hz, but the archive "
                f"rate is {sample_rate:g} Hz"
            )
        ears.extend(ears_from_sofa(src))
    archive = HrdfArchive(dataset_name, sample_rate, ears)
    n_bytes = write_hrdf(archive, out_path)
    return ConversionSummary(
        dataset_name=dataset_name,
        out_path=str(out_path),
        n_files=len(paths),
        n_subjects=len(archive.subject_ids()),
        n_ears=len(ears),
        locations_per_ear=sorted({e.n_locations for e in ears}),
        taps_per_ear=sorted({e.n_taps for e in ears}),
        sample_rate_hz=sample_rate,
        n_bytes=n_bytes,
    )
