"""Shared fixture helpers: minimal SOFA files built directly with h5py.

The product never writes SOFA, so the tests own a tiny writer covering just
the layout the reader consumes: Data.IR, Data.SamplingRate, SourcePosition
with Type/Units attributes, and the root bookkeeping attributes. Keyword
None drops the corresponding dataset or attribute to exercise error paths.
"""

import h5py
import numpy as np
import pytest


def write_sofa(
    path,
    positions,
    ir,
    sample_rate=44100.0,
    position_type="spherical",
    units="degree, degree, metre",
    subject_id="subj",
    convention="SimpleFreeFieldHRIR",
    data_type="FIR",
    rate_vector=False,
    bytes_attrs=False,
):
    def attr(value):
        return np.bytes_(value) if bytes_attrs else value

    with h5py.File(path, "w") as f:
        if convention is not None:
            f.attrs["SOFAConventions"] = attr(convention)
        if data_type is not None:
            f.attrs["DataType"] = attr(data_type)
        if subject_id is not None:
            f.attrs["ListenerShortName"] = attr(subject_id)
        if positions is not None:
            sp = f.create_dataset(
                "SourcePosition", data=np.asarray(positions, dtype=np.float64)
            )
            if position_type is not None:
                sp.attrs["Type"] = attr(position_type)
            if units is not None:
                sp.attrs["Units"] = attr(units)
        if ir is not None:
            f.create_dataset("Data.IR", data=np.asarray(ir))
        if sample_rate is not None:
            rate = (np.full(len(ir), float(sample_rate))
                    if rate_vector else np.array([float(sample_rate)]))
            f.create_dataset("Data.SamplingRate", data=rate)
    return str(path)


def spherical_positions(n, seed=0, elevation_lo=-30.0, elevation_hi=90.0):
    """Random but valid (azimuth, elevation, distance) rows."""
    rng = np.random.default_rng(seed)
    az = rng.uniform(0.0, 360.0, size=n)
    el = rng.uniform(elevation_lo, elevation_hi, size=n)
    dist = np.full(n, 1.5)
    return np.column_stack([az, el, dist])


def f32_impulses(n_loc, n_taps, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n_loc, 2, n_taps)).astype(np.float32)


@pytest.fixture
def sofa_file(tmp_path):
    """One valid spherical-degrees SOFA file with f32 samples."""
    positions = spherical_positions(12, seed=1)
    ir = f32_impulses(12, 16, seed=2)
    path = write_sofa(tmp_path / "one.sofa", positions, ir, subject_id="s01")
    return path, positions, ir
