"""Cross-package check: archives written here load in the modeling toolkit.

The byte format is the only contract between the two packages, so one test
confirms a freshly converted archive round-trips through the consumer's
reader with identical samples and positions. Skipped when the toolkit is
not installed.
"""

import numpy as np
import pytest
from conftest import f32_impulses, spherical_positions, write_sofa

from sofa2hrdf.convert import convert

hrtfkit_archive = pytest.importorskip("hrtfkit.archive")


class TestConsumerReads:
    def test_converted_archive_loads_downstream(self, tmp_path):
        """The modeling toolkit reads a converted archive back verbatim."""
        positions = spherical_positions(9, seed=5)
        ir = f32_impulses(9, 12, seed=6)
        sofa = write_sofa(tmp_path / "s.sofa", positions, ir,
                          sample_rate=48000.0, subject_id="x1")
        out = tmp_path / "s.hrdf"
        convert(sofa, out, "demo")

        archive = hrtfkit_archive.load_archive(out)
        assert archive.dataset_name == "demo"
        assert archive.sample_rate_hz == 48000.0
        assert [se.ear.value for se in archive.subject_ears] == [0, 1]
        assert all(se.subject_id == "x1" for se in archive.subject_ears)
        for receiver, se in enumerate(archive.subject_ears):
            assert np.array_equal(se.hrirs, ir[:, receiver, :])
            got = np.array([[d.azimuth_deg, d.elevation_deg, d.distance_m]
                            for d in se.directions])
            np.testing.assert_allclose(got, positions, atol=1e-12)
