"""Archive validation against published dataset statistics.

Each public HRTF database has well-known statistics: subject count, nominal
per-ear location count, and elevation coverage. A converted archive is
checked against the entry matching its dataset name (case-insensitive) in an
expectations table; the package ships one covering the ten public databases,
and ``--expect`` may point at any JSON file of the same shape:

    {"RIEC": {"subjects": 105, "locations": 865,
              "elevation_range": [-30.0, 90.0]}, ...}

Mismatches are reported, never fatal: real datasets legitimately drift from
their nominal statistics (a subject may not have the complete set of
locations measured), so the report is a checklist for a human, not a gate.
Checks, in order:

  - subject count: distinct subject ids versus the expected count;
  - location count: the most common per-ear location count versus the
    expected count, plus a tally of ears deviating from that mode;
  - elevation containment: no measured elevation may leave the expected
    range (tolerance ELEVATION_TOL_DEG), which catches angles that were
    misread under the wrong convention or unit;
  - elevation coverage: each end of the measured range must come within
    COVERAGE_TOL_DEG of the expected end, which catches ranges collapsed by
    a radians-as-degrees mixup.

Only an unreadable archive or an unknown dataset name raises.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .hrdf import HrdfArchive, read_hrdf

ELEVATION_TOL_DEG = 1.0e-6
COVERAGE_TOL_DEG = 15.0


@dataclass
class Expectation:
    """Published statistics for one dataset."""

    subjects: int
    locations: int
    elevation_lo: float
    elevation_hi: float

    def __post_init__(self):
        if self.subjects < 1 or self.locations < 1:
            raise ValueError("expected counts must be positive")
        if not -90.0 <= self.elevation_lo <= self.elevation_hi <= 90.0:
            raise ValueError(
                f"bad elevation range [{self.elevation_lo}, {self.elevation_hi}]"
            )


def load_expectations(path=None) -> dict[str, Expectation]:
    """Expectations table from ``path``, or the shipped one if None."""
    if path is None:
        text = resources.files(__package__).joinpath("expectations.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = json.loads(text)
    out = {}
    for name, entry in raw.items():
        lo, hi = entry["elevation_range"]
        out[name] = Expectation(int(entry["subjects"]), int(entry["locations"]),
                                float(lo), float(hi))
    return out


@dataclass
class ValidationReport:
    """Measured archive statistics plus every expectation mismatch."""

    dataset_name: str
    n_subjects: int
    n_ears: int
    modal_locations: int
    elevation_min: float
    elevation_max: float
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def lines(self) -> list[str]:
        out = [
            f"dataset {self.dataset_name!r}: {self.n_subjects} subjects, "
            f"{self.n_ears} ears, {self.modal_locations} locations per ear, "
            f"elevations [{self.elevation_min:g}, {self.elevation_max:g}]",
        ]
        if self.ok:
            out.append("all expectations met")
        else:
            out.extend(f"mismatch: {m}" for m in self.mismatches)
        return out


def expectation_for(archive: HrdfArchive,
                    expectations: dict[str, Expectation]) -> Expectation:
    """The table entry for the archive's dataset name, case-insensitive."""
    by_folded = {name.casefold(): e for name, e in expectations.items()}
    try:
        return by_folded[archive.dataset_name.casefold()]
    except KeyError:
        known = ", ".join(sorted(expectations))
        raise ValueError(
            f"no expectation entry for dataset {archive.dataset_name!r} "
            f"(known: {known})"
        ) from None


def validate_archive(archive: HrdfArchive,
                     expected: Expectation) -> ValidationReport:
    """Compare one archive's statistics against its expectation entry."""
    n_subjects = len(archive.subject_ids())
    loc_counts = Counter(e.n_locations for e in archive.ears)
    modal_locations = max(loc_counts.items(), key=lambda kv: (kv[1], kv[0]))[0]
    el_min = min(float(e.positions[:, 1].min()) for e in archive.ears)
    el_max = max(float(e.positions[:, 1].max()) for e in archive.ears)

    mismatches = []
    if n_subjects != expected.subjects:
        mismatches.append(
            f"{n_subjects} subjects, expected {expected.subjects}"
        )
    if modal_locations != expected.locations:
        mismatches.append(
            f"{modal_locations} locations per ear (modal), "
            f"expected {expected.locations}"
        )
    n_off_mode = sum(n for count, n in loc_counts.items()
                     if count != modal_locations)
    if n_off_mode:
        mismatches.append(
            f"{n_off_mode} of {len(archive.ears)} ears deviate from the modal "
            f"location count {modal_locations}"
        )
    lo, hi = expected.elevation_lo, expected.elevation_hi
    if el_min < lo - ELEVATION_TOL_DEG or el_max > hi + ELEVATION_TOL_DEG:
        mismatches.append(
            f"elevations [{el_min:g}, {el_max:g}] leave the expected "
            f"range [{lo:g}, {hi:g}]"
        )
    if abs(el_min - lo) > COVERAGE_TOL_DEG or abs(el_max - hi) > COVERAGE_TOL_DEG:
        mismatches.append(
            f"elevation coverage [{el_min:g}, {el_max:g}] is far from the "
            f"expected [{lo:g}, {hi:g}]"
        )
    return ValidationReport(
        dataset_name=archive.dataset_name,
        n_subjects=n_subjects,
        n_ears=len(archive.ears),
        modal_locations=modal_locations,
        elevation_min=el_min,
        elevation_max=el_max,
        mismatches=mismatches,
    )


def validate(hrdf_path, expectations_path=None) -> ValidationReport:
    """Read an archive and validate it against its expectations entry."""
    archive = read_hrdf(hrdf_path)
    expectations = load_expectations(expectations_path)
    return validate_archive(archive, expectation_for(archive, expectations))
