"""Preprocessing pipeline: fixed-grid DTFT magnitudes, right-ear mirroring,
azimuth wrap extension, circular quadrature, and equator normalization.

Each numeric behavior is checked against a brute-force oracle written from
the definitions (naive DTFT sums, explicit neighbor-gap quadrature, the
energy integral spelled out as loops) rather than against the implementation.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrtfkit.archive import Direction, Ear, MagnitudeField, SubjectEar
from hrtfkit.preprocess import (
    EQUATOR_TOL_DEG,
    FFT_SIZE,
    REFERENCE_RATE_HZ,
    canonicalize_ear,
    circular_gaps,
    database_equator_scale,
    equator_energy,
    extend_azimuth_wrap,
    find_equator_ring,
    hrir_to_magnitude,
    make_frequency_grid,
    mirror_right_ear,
    normalize_equator,
    process_subject_ear,
    to_db,
)
from hrtfkit.synthetic import grid_with_poles, make_archive


# --- oracles ---------------------------------------------------------------


def dtft_magnitude_oracle(taps: np.ndarray, freqs_hz, fs: float) -> np.ndarray:
    """Naive per-sample DTFT sums, |sum_n h[n] exp(-2pi i f n / fs)|."""
    taps = np.asarray(taps, dtype=np.float64)
    out = np.zeros((taps.shape[0], len(freqs_hz)))
    for l in range(taps.shape[0]):
        for k, f in enumerate(freqs_hz):
            acc = 0.0 + 0.0j
            for n in range(taps.shape[1]):
                acc += taps[l, n] * np.exp(-2j * np.pi * f * n / fs)
            out[l, k] = abs(acc)
    return out


def circular_gap_oracle(azimuths_sorted) -> np.ndarray:
    """Half the distance to each circular neighbor, summed per point."""
    az = list(azimuths_sorted)
    n = len(az)
    gaps = []
    for i in range(n):
        fwd = (az[(i + 1) % n] - az[i]) % 360.0
        back = (az[i] - az[(i - 1) % n]) % 360.0
        gaps.append(0.5 * (fwd + back))
    return np.asarray(gaps)


def equator_scale_oracle(values_linear, ring_azimuths, ring_rows) -> float:
    """sqrt of (1/360K) sum_l sum_k H^2 dtheta, gaps from the oracle above."""
    gaps = circular_gap_oracle(ring_azimuths)
    K = values_linear.shape[1]
    total = 0.0
    for j, row in enumerate(ring_rows):
        for k in range(K):
            total += values_linear[row, k] ** 2 * gaps[j]
    return float(np.sqrt(total / (360.0 * K)))


def ring_field(az_list, values_fn, n_bins=5):
    """Directions on the equator plus one off-equator row, linear values."""
    dirs = [Direction(a, 0.0) for a in az_list] + [Direction(0.0, 45.0)]
    vals = np.array([[values_fn(d, k) for k in range(n_bins)] for d in dirs])
    return dirs, vals


# --- frequency grid and DTFT ------------------------------------------------


class TestFrequencyGrid:
    def test_reference_grid_endpoints(self):
        """92 bins at k=1..92 of a 256-point grid at 44.1 kHz: 172.265625 Hz
        spacing, topping out at 15848.4375 Hz."""
        g = make_frequency_grid(92)
        assert g.n_bins == 92
        assert g.bins_hz[0] == 172.265625
        assert g.bins_hz[-1] == 15848.4375
        np.testing.assert_allclose(np.diff(g.bins_hz), 44100.0 / 256.0)
        np.testing.assert_array_equal(g.k_indices, np.arange(1, 93))
        assert g.reference_rate_hz == REFERENCE_RATE_HZ
        assert g.fft_size == FFT_SIZE

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            make_frequency_grid(0)


class TestDtftMagnitude:
    def make_ear(self, taps, fs=44100.0):
        dirs = [Direction(10.0 * i, 0.0) for i in range(taps.shape[0])]
        return SubjectEar("s", "d", Ear.LEFT, fs, dirs,
                          hrirs=taps.astype(np.float32))

    def test_matches_naive_sum(self):
        rng = np.random.default_rng(7)
        taps = rng.normal(size=(4, 24)).astype(np.float32)
        grid = make_frequency_grid(8)
        got = hrir_to_magnitude(self.make_ear(taps), grid)
        want = dtft_magnitude_oracle(taps, grid.bins_hz, 44100.0)
        np.testing.assert_allclose(got, want, rtol=1.0e-12, atol=1.0e-12)

    def test_matches_zero_padded_fft(self):
        """Grid bins are FFT bins of the zero-padded reference transform, so
        np.fft.rfft gives a second independent route to the same numbers."""
        rng = np.random.default_rng(8)
        taps = rng.normal(size=(3, 40)).astype(np.float32)
        grid = make_frequency_grid(92)
        got = hrir_to_magnitude(self.make_ear(taps), grid)
        spec = np.abs(np.fft.rfft(taps.astype(np.float64), n=256, axis=1))
        np.testing.assert_allclose(got, spec[:, 1:93], rtol=1.0e-10, atol=1.0e-12)

    def test_delay_at_native_rate(self):
        """The same physical filter sampled at two rates lands on identical
        magnitudes: a 1/44100 s echo delay is 1 tap at 44.1 kHz, 2 at 88.2."""
        grid = make_frequency_grid(16)
        h44 = np.zeros((1, 8), dtype=np.float32)
        h44[0, 0], h44[0, 1] = 1.0, 0.5
        h88 = np.zeros((1, 16), dtype=np.float32)
        h88[0, 0], h88[0, 2] = 1.0, 0.5
        m44 = hrir_to_magnitude(self.make_ear(h44, 44100.0), grid)
        m88 = hrir_to_magnitude(self.make_ear(h88, 88200.0), grid)
        np.testing.assert_allclose(m44, m88, rtol=1.0e-12)

    def test_nyquist_guard(self):
        taps = np.ones((1, 4), dtype=np.float32)
        with pytest.raises(ValueError, match="Nyquist"):
            hrir_to_magnitude(self.make_ear(taps, fs=8000.0),
                              make_frequency_grid(92))


# --- mirroring ---------------------------------------------------------------


class TestMirroring:
    def make_right(self):
        dirs = [Direction(a, e) for a, e in
                [(0.0, 0.0), (30.0, 10.0), (200.0, -20.0), (350.0, 0.0)]]
        taps = np.arange(16, dtype=np.float32).reshape(4, 4)
        return SubjectEar("r", "d", Ear.RIGHT, 44100.0, dirs, hrirs=taps)

    def test_azimuth_reflection(self):
        got = mirror_right_ear(self.make_right())
        np.testing.assert_allclose(
            [d.azimuth_deg for d in got.directions], [0.0, 330.0, 160.0, 10.0]
        )
        np.testing.assert_allclose(
            [d.elevation_deg for d in got.directions], [0.0, 10.0, -20.0, 0.0]
        )
        np.testing.assert_array_equal(got.hrirs, self.make_right().hrirs)
        assert got.mirrored

    def test_involution(self):
        twice = mirror_right_ear(mirror_right_ear(self.make_right()))
        np.testing.assert_allclose(
            [d.azimuth_deg for d in twice.directions],
            [d.azimuth_deg for d in self.make_right().directions],
        )
        assert not twice.mirrored

    def test_left_ear_rejected(self):
        left = SubjectEar("l", "d", Ear.LEFT, 44100.0, [Direction(0, 0)],
                          hrirs=np.ones((1, 4), dtype=np.float32))
        with pytest.raises(ValueError):
            mirror_right_ear(left)

    def test_canonicalize_mirrors_right_only(self):
        right = canonicalize_ear(self.make_right())
        assert right.mirrored
        left = SubjectEar("l", "d", Ear.LEFT, 44100.0, [Direction(-30.0, 0)],
                          hrirs=np.ones((1, 4), dtype=np.float32))
        got = canonicalize_ear(left)
        assert got.directions[0].azimuth_deg == 330.0
        assert not got.mirrored


# --- wrap extension -----------------------------------------------------------


class TestWrapExtension:
    def make_field(self):
        az = [0.0, 10.0, 50.0, 340.0, 355.0]
        dirs = [Direction(a, 0.0) for a in az]
        vals = np.arange(5.0 * 3).reshape(5, 3)
        return MagnitudeField(dirs, vals, np.array([100.0, 200.0, 300.0]))

    def test_bands_and_flags(self):
        """Only the open bands (0,30) and (330,360) are duplicated; copies
        carry the shifted azimuth and identical values."""
        out = extend_azimuth_wrap(self.make_field())
        assert out.n_locations == 8
        added_az = [d.azimuth_deg for d in out.directions[5:]]
        assert added_az == [370.0, -20.0, -5.0]
        np.testing.assert_array_equal(out.values_db[5], out.values_db[1])
        np.testing.assert_array_equal(out.values_db[6], out.values_db[3])
        np.testing.assert_array_equal(out.values_db[7], out.values_db[4])
        np.testing.assert_array_equal(out.wrap_mask,
                                      [False] * 5 + [True] * 3)

    def test_strip_restores_original(self):
        src = self.make_field()
        back = extend_azimuth_wrap(src).without_wrap_rows()
        assert back.n_locations == src.n_locations
        np.testing.assert_array_equal(back.values_db, src.values_db)
        assert [d.azimuth_deg for d in back.directions] == [
            d.azimuth_deg for d in src.directions
        ]

    def test_boundaries_excluded(self):
        dirs = [Direction(a, 0.0) for a in (0.0, 30.0, 330.0)]
        f = MagnitudeField(dirs, np.zeros((3, 2)), np.array([1.0, 2.0]))
        assert extend_azimuth_wrap(f).n_locations == 3


# --- circular quadrature and normalization ---------------------------------------


class TestCircularGaps:
    def test_reference_example(self):
        """Azimuths {0, 10, 180} get Voronoi-style gaps {95, 90, 175}."""
        np.testing.assert_allclose(
            circular_gaps(np.array([0.0, 10.0, 180.0])), [95.0, 90.0, 175.0]
        )

    def test_uniform_ring(self):
        az = np.arange(0.0, 360.0, 45.0)
        np.testing.assert_allclose(circular_gaps(az), np.full(8, 45.0))

    @settings(max_examples=50, deadline=None)
    @given(st.sets(st.integers(0, 3599), min_size=3, max_size=24))
    def test_gaps_match_oracle_and_tile_circle(self, tenths):
        az = np.array(sorted(t / 10.0 for t in tenths))
        got = circular_gaps(az)
        np.testing.assert_allclose(got, circular_gap_oracle(az), atol=1.0e-9)
        assert abs(got.sum() - 360.0) < 1.0e-9


class TestEquatorNormalization:
    def test_scale_matches_oracle(self):
        """The normalizer is exactly the root mean-square equator energy with
        circular quadrature weights, computed here by explicit loops."""
        az = [0.0, 30.0, 90.0, 200.0, 300.0]
        dirs, vals = ring_field(az, lambda d, k: 1.0 + 0.1 * d.azimuth_deg + k)
        ring = find_equator_ring(dirs)
        scale = equator_scale_oracle(vals, az, list(range(len(az))))
        np.testing.assert_allclose(
            normalize_equator(vals, ring), vals / scale, rtol=1.0e-12
        )

    def test_unit_energy_after_normalization(self):
        for az in (np.arange(0.0, 360.0, 30.0),
                   np.array([0.0, 5.0, 20.0, 90.0, 180.0, 313.0])):
            dirs, vals = ring_field(list(az), lambda d, k: 2.0 + np.sin(d.azimuth_deg) + 0.3 * k)
            ring = find_equator_ring(dirs)
            out = normalize_equator(vals, ring)
            assert abs(equator_energy(out, ring) - 1.0) < 1.0e-12

    def test_scale_invariance(self):
        dirs, vals = ring_field([0.0, 80.0, 170.0, 265.0], lambda d, k: 1.0 + k)
        ring = find_equator_ring(dirs)
        np.testing.assert_allclose(
            normalize_equator(7.25 * vals, ring),
            normalize_equator(vals, ring),
            rtol=1.0e-12, atol=1.0e-12,
        )

    def test_zero_energy_rejected(self):
        dirs, vals = ring_field([0.0, 120.0, 240.0], lambda d, k: 0.0)
        vals[-1, :] = 1.0  # off-equator row alone carries energy
        ring = find_equator_ring(dirs)
        with pytest.raises(ValueError, match="zero equator energy"):
            normalize_equator(vals, ring)


class TestEquatorRing:
    def test_prefers_points_within_tolerance(self):
        dirs = [Direction(a, 1.5) for a in (0.0, 90.0, 180.0, 270.0)]
        dirs += [Direction(a, 40.0) for a in (0.0, 120.0, 240.0)]
        ring = find_equator_ring(dirs, EQUATOR_TOL_DEG)
        assert set(ring.ring_indices) == {0, 1, 2, 3}

    def test_falls_back_to_nearest_ring(self):
        dirs = [Direction(a, -8.0) for a in (0.0, 90.0, 180.0, 270.0)]
        dirs += [Direction(a, 30.0) for a in (0.0, 120.0, 240.0)]
        ring = find_equator_ring(dirs)
        assert set(ring.ring_indices) == {0, 1, 2, 3}

    def test_too_few_points(self):
        dirs = [Direction(0.0, 0.0), Direction(180.0, 0.0)]
        with pytest.raises(ValueError, match="at least 3"):
            find_equator_ring(dirs)


class TestToDb:
    def test_relative_floor(self):
        vals = np.array([[1.0, 1.0e-12, 0.0]])
        out = to_db(vals)
        np.testing.assert_allclose(out[0, 0], 0.0, atol=1.0e-12)
        np.testing.assert_allclose(out[0, 1], -120.0)
        np.testing.assert_allclose(out[0, 2], -120.0)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            to_db(np.zeros((2, 2)))


# --- full pipeline ----------------------------------------------------------------


class TestProcessSubjectEar:
    def test_unit_equator_energy_per_ear(self):
        arc = make_archive("p", 1, grid_with_poles([-30.0, 0.0, 30.0], 8),
                           n_taps=32, seed=5)
        grid = make_frequency_grid(12)
        for se in arc.subject_ears:
            fld = process_subject_ear(se, grid)
            lin = np.power(10.0, fld.values_db / 20.0)
            ring = find_equator_ring(fld.directions)
            assert abs(equator_energy(lin, ring) - 1.0) < 1.0e-9
            assert all(0.0 <= d.azimuth_deg < 360.0 for d in fld.directions)

    def test_right_ear_is_mirrored(self):
        dirs = [Direction(30.0, 0.0), Direction(100.0, 0.0), Direction(250.0, 0.0)]
        taps = np.eye(3, 8, dtype=np.float32)
        right = SubjectEar("r", "d", Ear.RIGHT, 44100.0, dirs, hrirs=taps)
        fld = process_subject_ear(right, make_frequency_grid(4))
        assert sorted(d.azimuth_deg for d in fld.directions) == [110.0, 260.0, 330.0]

    def test_database_scale_normalizes_in_the_mean(self):
        """Shared-scale mode fixes the database mean energy at one while
        individual ears keep their relative levels."""
        arc = make_archive("q", 2, grid_with_poles([0.0], 10), n_taps=24, seed=9)
        grid = make_frequency_grid(6)
        scale = database_equator_scale(arc.subject_ears, grid)
        energies = []
        for se in arc.subject_ears:
            fld = process_subject_ear(se, grid, shared_scale=scale)
            lin = np.power(10.0, fld.values_db / 20.0)
            energies.append(equator_energy(lin, find_equator_ring(fld.directions)))
        assert abs(np.mean(energies) - 1.0) < 1.0e-9
        assert np.std(energies) > 1.0e-6
