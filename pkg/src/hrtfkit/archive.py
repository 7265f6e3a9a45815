"""Canonical data model for measured HRTF datasets and the HRDF archive codec.

HRDF is a little-endian binary container holding raw HRIRs for every
(subject, ear) pair of one dataset:

    magic "HRDF" | version u32 = 1
    name_len u16 | dataset name (UTF-8)
    sample_rate f64 | n_ears u32
    per ear:
        id_len u16 | subject id (UTF-8)
        ear u8 (0 = left, 1 = right)
        n_loc u32 | n_taps u32
        n_loc x (azimuth f64, elevation f64, distance f64)
        n_loc x n_taps HRIR samples, f32, row-major

The codec is bit-exact: load(save(a)) reproduces every float sample and
every metadata field. All parse failures report the byte offset at which
they were detected.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

MAGIC = b"HRDF"
VERSION = 1


class ArchiveError(Exception):
    """Malformed or inconsistent HRDF content. Carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class Ear(Enum):
    LEFT = 0
    RIGHT = 1


class Stage(Enum):
    RAW = "raw"
    PROCESSED = "processed"


def canonicalize_azimuth(theta_deg: float) -> float:
    """Positive remainder of the azimuth modulo 360, in [0, 360)."""
    if not np.isfinite(theta_deg):
        raise ValueError(f"azimuth must be finite, got {theta_deg}")
    out = float(np.remainder(theta_deg, 360.0))
    # remainder(-1e-16, 360) == 360.0 exactly; fold the boundary back
    return 0.0 if out == 360.0 else out


@dataclass(frozen=True)
class Direction:
    """Sound-source direction in degrees; distance is informational only."""

    azimuth_deg: float
    elevation_deg: float
    distance_m: float = 1.0

    def canonical(self) -> "Direction":
        return Direction(
            canonicalize_azimuth(self.azimuth_deg), self.elevation_deg, self.distance_m
        )

    def key(self) -> tuple[float, float]:
        """Identity on the sphere after azimuth canonicalization."""
        return (canonicalize_azimuth(self.azimuth_deg), self.elevation_deg)


def directions_to_array(directions: list[Direction]) -> np.ndarray:
    """(L, 3) float64 array of (azimuth, elevation, distance)."""
    return np.array(
        [(d.azimuth_deg, d.elevation_deg, d.distance_m) for d in directions],
        dtype=np.float64,
    ).reshape(len(directions), 3)


@dataclass
class SubjectEar:
    """One ear of one subject: directions plus raw HRIRs or processed magnitudes."""

    subject_id: str
    dataset_name: str
    ear: Ear
    sample_rate_hz: float
    directions: list[Direction]
    hrirs: np.ndarray | None = None        # (L, T) float32, RAW stage
    magnitudes: np.ndarray | None = None   # (L, K), PROCESSED stage
    stage: Stage = Stage.RAW
    mirrored: bool = False

    def __post_init__(self):
        L = len(self.directions)
        if L < 1:
            raise ArchiveError(f"subject-ear {self.subject_id!r} has no locations")
        data = self.hrirs if self.stage is Stage.RAW else self.magnitudes
        if data is None or data.ndim != 2 or data.shape[0] != L:
            raise ArchiveError(
                f"subject-ear {self.subject_id!r}: data rows do not match "
                f"{L} directions"
            )
        seen: dict[tuple[float, float], int] = {}
        for i, d in enumerate(self.directions):
            if not (-90.0 <= d.elevation_deg <= 90.0):
                raise ArchiveError(
                    f"subject-ear {self.subject_id!r}: elevation {d.elevation_deg} "
                    f"out of [-90, 90] at row {i}"
                )
            k = d.key()
            if k in seen:
                raise ArchiveError(
                    f"subject-ear {self.subject_id!r}: rows {seen[k]} and {i} share "
                    f"direction {k} after canonicalization"
                )
            seen[k] = i
        dists = {d.distance_m for d in self.directions}
        if len(dists) > 1:
            warnings.warn(
                f"subject-ear {self.subject_id!r} has {len(dists)} distinct source "
                "distances; modeling treats all of them as far-field",
                stacklevel=2,
            )

    @property
    def n_locations(self) -> int:
        return len(self.directions)

    def identity(self) -> tuple[str, str, Ear]:
        return (self.dataset_name, self.subject_id, self.ear)


@dataclass
class DatasetArchive:
    """All subject-ears of one dataset, sharing a sample rate."""

    dataset_name: str
    sample_rate_hz: float
    subject_ears: list[SubjectEar]

    def __post_init__(self):
        if not self.subject_ears:
            raise ArchiveError(f"archive {self.dataset_name!r} has no subject-ears")
        for se in self.subject_ears:
            if se.sample_rate_hz != self.sample_rate_hz:
                raise ArchiveError(
                    f"subject-ear {se.subject_id!r} sample rate "
                    f"{se.sample_rate_hz} != archive rate {self.sample_rate_hz}"
                )


@dataclass
class MagnitudeField:
    """Directions plus an (L, K) dB-scale magnitude matrix on a frequency grid.

    ``wrap_mask`` marks rows added by the azimuth wrap-extension; evaluation
    keeps only rows where it is False.
    """

    directions: list[Direction]
    values_db: np.ndarray
    freq_grid_hz: np.ndarray
    wrap_mask: np.ndarray | None = None
    subject_id: str = ""
    dataset_name: str = ""

    def __post_init__(self):
        L = len(self.directions)
        self.values_db = np.asarray(self.values_db)
        self.freq_grid_hz = np.asarray(self.freq_grid_hz, dtype=np.float64)
        if self.values_db.shape != (L, self.freq_grid_hz.size):
            raise ValueError(
                f"values_db shape {self.values_db.shape} does not match "
                f"{L} directions x {self.freq_grid_hz.size} bins"
            )
        if np.any(np.diff(self.freq_grid_hz) <= 0):
            raise ValueError("frequency grid must be strictly increasing")

    @property
    def n_locations(self) -> int:
        return len(self.directions)

    @property
    def n_bins(self) -> int:
        return int(self.freq_grid_hz.size)

    def azimuths(self) -> np.ndarray:
        return np.array([d.azimuth_deg for d in self.directions], dtype=np.float64)

    def elevations(self) -> np.ndarray:
        return np.array([d.elevation_deg for d in self.directions], dtype=np.float64)

    def without_wrap_rows(self) -> "MagnitudeField":
        if self.wrap_mask is None:
            return self
        keep = ~self.wrap_mask
        return MagnitudeField(
            [d for d, k in zip(self.directions, keep) if k],
            self.values_db[keep],
            self.freq_grid_hz,
            wrap_mask=None,
            subject_id=self.subject_id,
            dataset_name=self.dataset_name,
        )


# --- binary codec -----------------------------------------------------------

_HEADER = struct.Struct("<4sI")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_F64 = struct.Struct("<d")
_EAR_REC = struct.Struct("<BII")


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise ArchiveError(
                f"truncated payload while reading {what}: need {n} bytes, "
                f"have {len(self.buf) - self.pos}",
                self.pos,
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self, what: str) -> int:
        return _U16.unpack(self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def f64(self, what: str) -> float:
        return _F64.unpack(self.take(8, what))[0]

    def utf8(self, what: str) -> str:
        n = self.u16(f"{what} length")
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ArchiveError(f"invalid UTF-8 in {what}: {exc}", self.pos - n) from exc


def load_archive(path) -> DatasetArchive:
    """Parse an HRDF file into a DatasetArchive. Raises ArchiveError with a
    byte offset on any malformed content."""
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise ArchiveError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    version = r.u32("version")
    if version != VERSION:
        raise ArchiveError(f"unsupported version {version}", 4)
    name = r.utf8("dataset name")
    rate = r.f64("sample rate")
    n_ears = r.u32("ear count")
    ears: list[SubjectEar] = []
    for i in range(n_ears):
        subject_id = r.utf8(f"subject id of ear {i}")
        where = r.pos
        ear_code, n_loc, n_taps = _EAR_REC.unpack(r.take(_EAR_REC.size, f"ear {i} header"))
        if ear_code not in (0, 1):
            raise ArchiveError(f"invalid ear code {ear_code}", where)
        dir_raw = r.take(24 * n_loc, f"directions of ear {i}")
        dirs_arr = np.frombuffer(dir_raw, dtype="<f8").reshape(n_loc, 3)
        samp_raw = r.take(4 * n_loc * n_taps, f"samples of ear {i}")
        hrirs = (
            np.frombuffer(samp_raw, dtype="<f4").reshape(n_loc, n_taps).copy()
        )
        directions = [Direction(*row) for row in dirs_arr.tolist()]
        try:
            ears.append(
                SubjectEar(
                    subject_id=subject_id,
                    dataset_name=name,
                    ear=Ear(ear_code),
                    sample_rate_hz=rate,
                    directions=directions,
                    hrirs=hrirs,
                )
            )
        except ArchiveError as exc:
            raise ArchiveError(f"ear {i}: {exc}", where) from exc
    if r.pos != len(buf):
        raise ArchiveError(f"{len(buf) - r.pos} trailing bytes after payload", r.pos)
    return DatasetArchive(dataset_name=name, sample_rate_hz=rate, subject_ears=ears)


def save_archive(archive: DatasetArchive, path) -> None:
    """Serialize a raw-stage archive so that load_archive reproduces it exactly."""
    parts: list[bytes] = [_HEADER.pack(MAGIC, VERSION)]
    name_b = archive.dataset_name.encode("utf-8")
    parts.append(_U16.pack(len(name_b)) + name_b)
    parts.append(_F64.pack(archive.sample_rate_hz))
    parts.append(_U32.pack(len(archive.subject_ears)))
    for se in archive.subject_ears:
        if se.stage is not Stage.RAW or se.hrirs is None:
            raise ArchiveError(
                f"subject-ear {se.subject_id!r} is not raw-stage; archives hold HRIRs"
            )
        id_b = se.subject_id.encode("utf-8")
        parts.append(_U16.pack(len(id_b)) + id_b)
        n_loc, n_taps = se.hrirs.shape
        parts.append(_EAR_REC.pack(se.ear.value, n_loc, n_taps))
        parts.append(
            np.ascontiguousarray(directions_to_array(se.directions), dtype="<f8").tobytes()
        )
        parts.append(np.ascontiguousarray(se.hrirs, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def merge_archives(archives: list[DatasetArchive]) -> list[SubjectEar]:
    """Concatenate subject-ears across archives; dataset names are retained.

    Raises ArchiveError on a duplicate (dataset, subject, ear) triple.
    """
    seen: set[tuple[str, str, Ear]] = set()
    out: list[SubjectEar] = []
    for archive in archives:
        for se in archive.subject_ears:
            ident = se.identity()
            if ident in seen:
                raise ArchiveError(
                    f"duplicate subject-ear {ident[0]}/{ident[1]}/{ident[2].name}"
                )
            seen.add(ident)
            out.append(se)
    return out


def relabel(se: SubjectEar, **changes) -> SubjectEar:
    """dataclasses.replace that skips __post_init__ re-validation warnings."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return replace(se, **changes)
