"""Minimal reader for SOFA (HDF5) HRIR measurement files.

SOFA stores one subject's measurements as HDF5 datasets. This reader pulls
exactly what conversion needs and nothing else:

    Data.IR            (M, R, N) impulse responses
    Data.SamplingRate  scalar or per-measurement vector, hertz
    SourcePosition     (M, 3) with attributes Type and Units

plus the root attributes used for bookkeeping (convention name, subject id).
Files are opened read-only; no SOFA writing is supported.

Invariants enforced on load:
  - the three datasets above exist (missing ones are reported by name);
  - the declared convention, when present, is an HRIR convention and the
    data type, when present, is FIR;
  - receiver count is exactly 2 (ear 0 left, ear 1 right);
  - Data.IR has one measurement row per SourcePosition row;
  - a vector sampling rate is constant.

Units handling: angles default to degrees; a declared "radian" unit is
honored. Position type must declare itself spherical or cartesian.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import h5py
import numpy as np


class SofaError(Exception):
    """Missing mandatory SOFA content or an unsupported convention."""


REQUIRED_DATASETS = ("Data.IR", "Data.SamplingRate", "SourcePosition")


@dataclass
class SofaSource:
    """Everything conversion needs from one SOFA file."""

    path: str
    subject_id: str
    position_type: str        # "spherical" | "cartesian"
    angle_units: str          # "degree" | "radian" (spherical only)
    positions: np.ndarray     # (M, 3) f64, as declared
    ir: np.ndarray            # (M, 2, N), source dtype preserved
    sample_rate_hz: float

    @property
    def n_measurements(self) -> int:
        return self.positions.shape[0]

    @property
    def n_taps(self) -> int:
        return self.ir.shape[2]


def _attr_str(node, name: str) -> str | None:
    """HDF5 attribute as text; attributes may be bytes, str, or 0-d arrays."""
    if name not in node.attrs:
        return None
    value = node.attrs[name]
    if isinstance(value, np.ndarray):
        value = value.reshape(-1)[0]
    if isinstance(value, bytes):
        return value.decode("utf-8", errors="replace")
    return str(value)


def _subject_id(f: h5py.File, path: str) -> str:
    for attr in ("ListenerShortName", "SubjectID"):
        got = _attr_str(f, attr)
        if got and got.strip():
            return got.strip()
    return Path(path).stem


def read_sofa(path) -> SofaSource:
    """Load and validate one SOFA HRIR file."""
    path = str(path)
    with h5py.File(path, "r") as f:
        convention = _attr_str(f, "SOFAConventions")
        if convention is not None and "HRIR" not in convention:
            raise SofaError(f"unsupported convention {convention!r}")
        data_type = _attr_str(f, "DataType")
        if data_type is not None and data_type.strip().upper() != "FIR":
            raise SofaError(f"unsupported data type {data_type!r}")

        missing = [name for name in REQUIRED_DATASETS if name not in f]
        if missing:
            raise SofaError(f"missing mandatory SOFA variables: {', '.join(missing)}")

        ir = np.asarray(f["Data.IR"])
        if ir.ndim != 3:
            raise SofaError(f"Data.IR must be (M, R, N), got shape {ir.shape}")
        if ir.shape[1] != 2:
            raise SofaError(f"expected 2 receivers (ears), got {ir.shape[1]}")

        positions = np.asarray(f["SourcePosition"], dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise SofaError(
                f"SourcePosition must be (M, 3), got shape {positions.shape}"
            )
        if positions.shape[0] != ir.shape[0]:
            raise SofaError(
                f"{ir.shape[0]} IR measurements for {positions.shape[0]} positions"
            )
        if not np.isfinite(positions).all():
            raise SofaError("non-finite source position")

        pos_type = _attr_str(f["SourcePosition"], "Type")
        if pos_type is None:
            raise SofaError("SourcePosition has no Type attribute")
        pos_type = pos_type.strip().lower()
        if "spher" in pos_type:
            pos_type = "spherical"
        elif "cart" in pos_type:
            pos_type = "cartesian"
        else:
            raise SofaError(f"unsupported position type {pos_type!r}")

        units = _attr_str(f["SourcePosition"], "Units")
        first_unit = (units or "degree").split(",")[0].strip().lower()
        angle_units = "radian" if first_unit.startswith("rad") else "degree"

        rate = np.asarray(f["Data.SamplingRate"], dtype=np.float64).reshape(-1)
        if rate.size == 0:
            raise SofaError("empty Data.SamplingRate")
        if np.unique(rate).size != 1:
            raise SofaError("Data.SamplingRate varies across measurements")
        sample_rate = float(rate[0])
        if not (np.isfinite(sample_rate) and sample_rate > 0.0):
            raise SofaError(f"bad sample rate {sample_rate}")

        return SofaSource(
            path=path,
            subject_id=_subject_id(f, path),
            position_type=pos_type,
            angle_units=angle_units,
            positions=positions,
            ir=ir,
            sample_rate_hz=sample_rate,
        )
