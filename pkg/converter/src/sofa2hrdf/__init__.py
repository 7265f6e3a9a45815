"""One-shot converter from SOFA (HDF5) HRIR files to HRDF archives."""

from .convert import ConversionSummary, convert
from .hrdf import EarEntry, HrdfArchive, HrdfError, read_hrdf, write_hrdf
from .sofa import SofaError, SofaSource, read_sofa
from .validate import (
    Expectation,
    ValidationReport,
    load_expectations,
    validate,
    validate_archive,
)

__all__ = [
    "ConversionSummary",
    "convert",
    "EarEntry",
    "HrdfArchive",
    "HrdfError",
    "read_hrdf",
    "write_hrdf",
    "SofaError",
    "SofaSource",
    "read_sofa",
    "Expectation",
    "ValidationReport",
    "load_expectations",
    "validate",
    "validate_archive",
]
