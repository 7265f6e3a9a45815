"""HRDF archive writer and reader.

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

This byte layout is the entire contract with downstream consumers; the
converter shares no code with them. Writing is deterministic (the same
archive value always produces the same bytes) and round-trips bit-exactly:
``read_hrdf(write_hrdf(a))`` reproduces every f32 sample and every metadata
field. Parse failures report the byte offset at which they were detected.

Invariants enforced on construction:
  - every ear flag is 0 or 1, every subject id is nonempty;
  - positions are (L, 3) float64 and finite, azimuths in [0, 360),
    elevations in [-90, 90], distances positive;
  - HRIR blocks are (L, n_taps) float32 and finite, with L matching the
    position count;
  - the archive holds at least one ear and a positive sample rate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"HRDF"
VERSION = 1

EAR_LEFT = 0
EAR_RIGHT = 1


class HrdfError(Exception):
    """Malformed or inconsistent HRDF content. Carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass
class EarEntry:
    """All measurements of one (subject, ear): positions plus raw HRIRs."""

    subject_id: str
    ear: int
    positions: np.ndarray  # (L, 3) f64: azimuth deg, elevation deg, distance m
    hrirs: np.ndarray      # (L, n_taps) f32

    def __post_init__(self):
        if not self.subject_id:
            raise HrdfError("empty subject id")
        if self.ear not in (EAR_LEFT, EAR_RIGHT):
            raise HrdfError(f"ear flag must be 0 or 1, got {self.ear}")
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.hrirs = np.ascontiguousarray(self.hrirs, dtype=np.float32)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise HrdfError(f"positions must be (L, 3), got {self.positions.shape}")
        if self.hrirs.ndim != 2:
            raise HrdfError(f"hrirs must be (L, n_taps), got {self.hrirs.shape}")
        if self.hrirs.shape[0] != self.positions.shape[0]:
            raise HrdfError(
                f"{self.hrirs.shape[0]} HRIRs for {self.positions.shape[0]} positions"
            )
        if self.positions.shape[0] == 0:
            raise HrdfError(f"subject {self.subject_id!r} has no measurements")
        if not np.isfinite(self.positions).all():
            raise HrdfError(f"non-finite position for subject {self.subject_id!r}")
        if not np.isfinite(self.hrirs).all():
            raise HrdfError(f"non-finite HRIR sample for subject {self.subject_id!r}")
        az, el, dist = self.positions.T
        if ((az < 0.0) | (az >= 360.0)).any():
            raise HrdfError("azimuths must lie in [0, 360)")
        if ((el < -90.0) | (el > 90.0)).any():
            raise HrdfError("elevations must lie in [-90, 90]")
        if (dist <= 0.0).any():
            raise HrdfError("distances must be positive")

    @property
    def n_locations(self) -> int:
        return self.positions.shape[0]

    @property
    def n_taps(self) -> int:
        return self.hrirs.shape[1]


@dataclass
class HrdfArchive:
    """One dataset's ears, sharing a dataset name and sample rate."""

    dataset_name: str
    sample_rate_hz: float
    ears: list[EarEntry] = field(default_factory=list)

    def __post_init__(self):
        if not self.dataset_name:
            raise HrdfError("empty dataset name")
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0.0):
            raise HrdfError(f"bad sample rate {self.sample_rate_hz}")
        if not self.ears:
            raise HrdfError(f"archive {self.dataset_name!r} has no ears")

    def subject_ids(self) -> list[str]:
        """Distinct subject ids in first-appearance order."""
        seen: dict[str, None] = {}
        for e in self.ears:
            seen.setdefault(e.subject_id)
        return list(seen)


def write_hrdf(archive: HrdfArchive, path) -> int:
    """Serialize ``archive`` to ``path``; returns the byte count written."""
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    name = archive.dataset_name.encode("utf-8")
    if len(name) > 0xFFFF:
        raise HrdfError("dataset name too long")
    chunks.append(struct.pack("<H", len(name)))
    chunks.append(name)
    chunks.append(struct.pack("<dI", float(archive.sample_rate_hz),
                              len(archive.ears)))
    for e in archive.ears:
        sid = e.subject_id.encode("utf-8")
        if len(sid) > 0xFFFF:
            raise HrdfError("subject id too long")
        chunks.append(struct.pack("<H", len(sid)))
        chunks.append(sid)
        chunks.append(struct.pack("<BII", e.ear, e.n_locations, e.n_taps))
        chunks.append(e.positions.astype("<f8", copy=False).tobytes())
        chunks.append(e.hrirs.astype("<f4", copy=False).tobytes())
    blob = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


class _Reader:
    """Sequential cursor over the archive bytes with offset-tagged errors."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise HrdfError(f"truncated while reading {what}", self.pos)
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_hrdf(path) -> HrdfArchive:
    """Parse an HRDF file, enforcing every structural invariant."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if r.take(4, "magic") != MAGIC:
        raise HrdfError("bad magic, not an HRDF file", 0)
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise HrdfError(f"unsupported version {version}", 4)
    (name_len,) = r.unpack("<H", "name length")
    name = r.take(name_len, "dataset name").decode("utf-8")
    sample_rate, n_ears = r.unpack("<dI", "sample rate and ear count")
    ears = []
    for i in range(n_ears):
        (id_len,) = r.unpack("<H", f"ear {i} id length")
        sid = r.take(id_len, f"ear {i} subject id").decode("utf-8")
        ear, n_loc, n_taps = r.unpack("<BII", f"ear {i} header")
        pos_bytes = r.take(n_loc * 24, f"ear {i} positions")
        positions = np.frombuffer(pos_bytes, dtype="<f8").reshape(n_loc, 3)
        hrir_bytes = r.take(n_loc * n_taps * 4, f"ear {i} samples")
        hrirs = np.frombuffer(hrir_bytes, dtype="<f4").reshape(n_loc, n_taps)
        ears.append(EarEntry(sid, ear, positions.copy(), hrirs.copy()))
    if r.pos != len(blob):
        raise HrdfError(f"{len(blob) - r.pos} trailing bytes", r.pos)
    return HrdfArchive(name, sample_rate, ears)
