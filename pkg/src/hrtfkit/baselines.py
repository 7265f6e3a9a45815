"""Classical spherical interpolation baselines on measured magnitudes.

Both methods combine linear-domain magnitudes of nearby measurement points.
VBAP triangulates the measurement sphere with a convex hull and solves a
3x3 system per target for nonnegative panning gains; bilinear requires the
grid to decompose into elevation rings and blends the four bounding nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

GAIN_TOL = 1.0e-9


def direction_to_unit_vector(azimuth_deg, elevation_deg) -> np.ndarray:
    """(..., 3) unit vectors; azimuth rotates counterclockwise from +x in the
    horizontal plane, elevation is the angle above it."""
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=np.float64))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=np.float64))
    return np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1
    )


@dataclass
class SphericalTriangulation:
    """Convex-hull triangulation of measurement directions.

    simplices index into the original direction list; inverses[f] maps a
    target unit vector to the gains of face f's three vertices.
    """

    unit_vectors: np.ndarray  # (L, 3)
    simplices: np.ndarray     # (F, 3) int
    inverses: np.ndarray      # (F, 3, 3)


def build_triangulation(azimuth_deg, elevation_deg) -> SphericalTriangulation:
    vecs = direction_to_unit_vector(azimuth_deg, elevation_deg)
    if vecs.ndim != 2 or vecs.shape[0] < 4:
        raise ValueError("triangulation needs at least 4 directions")
    try:
        hull = ConvexHull(vecs)
    except QhullError as exc:
        raise ValueError(f"directions do not span 3-D space: {exc}") from exc
    simplices = np.asarray(hull.simplices, dtype=np.intp)
    # Vertex matrices with rows v1, v2, v3; a face through the origin is
    # degenerate and unusable for panning.
    mats = vecs[simplices]
    dets = np.linalg.det(mats)
    keep = np.abs(dets) > 1.0e-12
    if not np.any(keep):
        raise ValueError("all triangulation faces are degenerate")
    simplices = simplices[keep]
    inverses = np.linalg.inv(mats[keep])
    return SphericalTriangulation(vecs, simplices, inverses)


@dataclass
class VbapResult:
    values: np.ndarray        # (T, K) linear magnitudes
    gains: np.ndarray         # (T, 3)
    vertex_indices: np.ndarray  # (T, 3) int, into the source directions
    out_of_hull: np.ndarray   # (T,) bool


def vbap_interpolate(
    azimuth_deg, elevation_deg, values_linear, target_az_deg, target_el_deg
) -> VbapResult:
    """Panning-gain interpolation of linear magnitudes at target directions.

    For each target the face whose gains maximize the minimum gain wins; a
    best minimum gain below -1e-9 means the target is outside the covered
    region and is flagged, with negative gains clamped to zero. Gains are
    normalized to sum to one before combining.
    """
    values = np.asarray(values_linear, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("values must be (L, K)")
    tri = build_triangulation(azimuth_deg, elevation_deg)
    if values.shape[0] != tri.unit_vectors.shape[0]:
        raise ValueError("values row count != number of directions")
    targets = direction_to_unit_vector(target_az_deg, target_el_deg)
    targets = np.atleast_2d(targets)
    # gains[t, f, :] solves mats[f].T? No: g = p @ inv(M) with rows as vertices
    # solves g @ M = p, i.e. sum_i g_i v_i = p.
    gains_all = np.einsum("tj,fji->tfi", targets, tri.inverses)
    min_gain = gains_all.min(axis=2)
    best = np.argmax(min_gain, axis=1)
    t_idx = np.arange(targets.shape[0])
    gains = gains_all[t_idx, best]
    out_of_hull = min_gain[t_idx, best] < -GAIN_TOL
    gains = np.maximum(gains, 0.0)
    sums = gains.sum(axis=1)
    if np.any(sums <= 0.0):
        raise ValueError("degenerate panning gains (zero sum)")
    gains = gains / sums[:, None]
    vertex_indices = tri.simplices[best]
    out = np.einsum("ti,tik->tk", gains, values[vertex_indices])
    return VbapResult(out, gains, vertex_indices, out_of_hull)


# --- bilinear on elevation rings ------------------------------------------------


@dataclass
class ElevationRing:
    elevation_deg: float
    azimuths_deg: np.ndarray  # sorted ascending in [0, 360)
    indices: np.ndarray       # into the source directions, same order


def group_rings(azimuth_deg, elevation_deg, tol_deg: float = 1.0e-6) -> list[ElevationRing]:
    """Split directions into constant-elevation rings (within tol)."""
    az = np.asarray(azimuth_deg, dtype=np.float64)
    el = np.asarray(elevation_deg, dtype=np.float64)
    order = np.argsort(el, kind="stable")
    rings: list[ElevationRing] = []
    start = 0
    while start < len(order):
        stop = start
        base = el[order[start]]
        while stop < len(order) and el[order[stop]] - base <= tol_deg:
            stop += 1
        idx = order[start:stop]
        ring_az = az[idx]
        sub = np.argsort(ring_az, kind="stable")
        rings.append(
            ElevationRing(
                elevation_deg=float(np.mean(el[idx])),
                azimuths_deg=ring_az[sub],
                indices=idx[sub],
            )
        )
        start = stop
    return rings


def check_ring_structure(rings: list[ElevationRing], n_locations: int) -> None:
    """A grid counts as ring-structured when it has few rings relative to its
    size; scattered grids explode into near-singleton rings and are rejected."""
    limit = max(32, n_locations // 3)
    if len(rings) > limit:
        raise ValueError(
            f"grid is not ring-structured: {len(rings)} elevation rings for "
            f"{n_locations} locations (limit {limit})"
        )


def _ring_azimuth_blend(ring: ElevationRing, theta: float):
    """Bounding nodes and blend weight for one azimuth on one ring, wrapping
    across 360. Returns (index_lo, index_hi, c_theta)."""
    azs = ring.azimuths_deg
    if len(azs) == 1:
        return ring.indices[0], ring.indices[0], 0.0
    pos = int(np.searchsorted(azs, theta, side="right"))
    hi = pos % len(azs)
    lo = pos - 1 if pos > 0 else len(azs) - 1
    gap = float(np.remainder(azs[hi] - azs[lo], 360.0))
    if gap == 0.0:
        return ring.indices[lo], ring.indices[hi], 0.0
    c = float(np.remainder(theta - azs[lo], 360.0)) / gap
    return ring.indices[lo], ring.indices[hi], c


@dataclass
class BilinearResult:
    values: np.ndarray   # (T, K) linear magnitudes
    clamped: np.ndarray  # (T,) bool, elevation outside the ring span


def bilinear_interpolate(
    azimuth_deg, elevation_deg, values_linear, target_az_deg, target_el_deg
) -> BilinearResult:
    """Ring-grid interpolation: blend the bounding azimuth nodes on the two
    bounding elevation rings, then blend across elevation.

    Targets above the top or below the bottom ring clamp to that ring and
    are flagged. Raises ValueError when the grid is not ring-structured.
    """
    values = np.asarray(values_linear, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("values must be (L, K)")
    az = np.asarray(azimuth_deg, dtype=np.float64)
    el = np.asarray(elevation_deg, dtype=np.float64)
    if values.shape[0] != az.shape[0]:
        raise ValueError("values row count != number of directions")
    rings = group_rings(az, el)
    check_ring_structure(rings, az.shape[0])
    ring_els = np.array([r.elevation_deg for r in rings])
    t_az = np.atleast_1d(np.asarray(target_az_deg, dtype=np.float64))
    t_el = np.atleast_1d(np.asarray(target_el_deg, dtype=np.float64))
    out = np.empty((t_az.shape[0], values.shape[1]), dtype=np.float64)
    clamped = np.zeros(t_az.shape[0], dtype=bool)
    for t in range(t_az.shape[0]):
        phi = t_el[t]
        pos = int(np.searchsorted(ring_els, phi, side="right"))
        if pos == 0:
            r_lo = r_hi = 0
            clamped[t] = phi < ring_els[0] - 1.0e-12
        elif pos == len(rings):
            r_lo = r_hi = len(rings) - 1
            clamped[t] = phi > ring_els[-1] + 1.0e-12
        else:
            r_lo, r_hi = pos - 1, pos
        if r_lo == r_hi or ring_els[r_hi] == ring_els[r_lo]:
            c_phi = 0.0
            r_hi = r_lo
        else:
            c_phi = (phi - ring_els[r_lo]) / (ring_els[r_hi] - ring_els[r_lo])
        i_ll, i_lr, c_lo = _ring_azimuth_blend(rings[r_lo], t_az[t])
        i_hl, i_hr, c_hi = _ring_azimuth_blend(rings[r_hi], t_az[t])
        low = (1.0 - c_lo) * values[i_ll] + c_lo * values[i_lr]
        high = (1.0 - c_hi) * values[i_hl] + c_hi * values[i_hr]
        out[t] = (1.0 - c_phi) * low + c_phi * high
    return BilinearResult(out, clamped)
