"""Log-spectral distortion metrics and the three evaluation protocols:
sparse-to-dense interpolation, conditional generation from random subsets,
and latent-space morphing between two ears.

All magnitude comparisons reduce to the same RMS dB error; experiments pool
squared errors over locations and ears before taking the root, so curves
and overall numbers stay mutually consistent.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .archive import MagnitudeField
from .baselines import bilinear_interpolate, group_rings, vbap_interpolate
from .preprocess import extend_azimuth_wrap
from .siren import SirenNetwork, predict
from .training import TrainConfig, fit, infer_latent_for_field

METHODS = ("field", "vbap", "bilinear")
SETTINGS = ("ours_r", "ours_t", "ours_e")


def db_to_linear(values_db: np.ndarray) -> np.ndarray:
    return np.power(10.0, np.asarray(values_db, dtype=np.float64) / 20.0)


def linear_to_db(values_linear: np.ndarray) -> np.ndarray:
    values_linear = np.asarray(values_linear, dtype=np.float64)
    if np.any(values_linear <= 0.0):
        raise ValueError("nonpositive linear magnitude")
    return 20.0 * np.log10(values_linear)


# --- LSD -----------------------------------------------------------------------


@dataclass
class LsdReport:
    """RMS dB error with per-frequency and per-location marginals."""

    overall_db: float
    per_frequency_db: np.ndarray  # (K,)
    per_location_db: np.ndarray   # (L,)
    n_locations: int
    n_bins: int

    def __post_init__(self):
        if not (
            np.isfinite(self.overall_db)
            and np.all(np.isfinite(self.per_frequency_db))
            and np.all(np.isfinite(self.per_location_db))
        ):
            raise ValueError("non-finite distortion")
        if self.overall_db < 0.0 or np.any(self.per_frequency_db < 0.0) or np.any(
            self.per_location_db < 0.0
        ):
            raise ValueError("negative distortion")


def lsd(truth, pred, domain: str = "db") -> LsdReport:
    """Root-mean-square dB error between two magnitude sets.

    ``truth`` may be a MagnitudeField (dB values) or an array; dB inputs are
    differenced directly, linear inputs go through 20*log10 of the ratio.
    """
    if isinstance(truth, MagnitudeField):
        truth = truth.values_db
        domain = "db"
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape or truth.ndim != 2:
        raise ValueError(f"shape mismatch {truth.shape} vs {pred.shape}")
    if domain == "db":
        diff = truth - pred
    elif domain == "linear":
        if np.any(truth <= 0.0) or np.any(pred <= 0.0):
            raise ValueError("nonpositive linear magnitude")
        diff = 20.0 * np.log10(truth / pred)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    sq = np.square(diff)
    return LsdReport(
        overall_db=float(np.sqrt(np.mean(sq))),
        per_frequency_db=np.sqrt(np.mean(sq, axis=0)),
        per_location_db=np.sqrt(np.mean(sq, axis=1)),
        n_locations=truth.shape[0],
        n_bins=truth.shape[1],
    )


# --- splits --------------------------------------------------------------------


@dataclass
class SplitSpec:
    """Observed/desired partition request, resolved by make_split.

    strategy: "checkerboard" | "random_fraction" | "azimuth_decimation".
    ``seed`` feeds numpy's generator and may be an int or a sequence.
    """

    strategy: str
    fraction: float = 0.5
    seed: object = 0
    every_n: int = 2
    observed: np.ndarray | None = None
    desired: np.ndarray | None = None

    @property
    def resolved(self) -> bool:
        return self.observed is not None


def make_split(directions, spec: SplitSpec) -> SplitSpec:
    """Assign every direction a role. Deterministic given the spec.

    Checkerboard alternates roles along azimuth order within each elevation
    ring and offsets the phase on alternate rings; random_fraction marks
    ceil(fraction * L) directions observed; azimuth_decimation keeps every
    n-th direction of each ring.
    """
    from .archive import directions_to_array

    arr = directions_to_array(list(directions))
    n = arr.shape[0]
    if n < 2:
        raise ValueError("need at least 2 directions to split")
    az, el = arr[:, 0], arr[:, 1]
    if spec.strategy == "checkerboard":
        observed_mask = np.zeros(n, dtype=bool)
        for r, ring in enumerate(group_rings(az, el)):
            for j, idx in enumerate(ring.indices):
                observed_mask[idx] = (j + r) % 2 == 0
        observed = np.flatnonzero(observed_mask)
    elif spec.strategy == "random_fraction":
        if not 0.0 < spec.fraction <= 1.0:
            raise ValueError(f"fraction {spec.fraction} outside (0, 1]")
        n_obs = int(np.ceil(spec.fraction * n))
        perm = np.random.default_rng(spec.seed).permutation(n)
        observed = np.sort(perm[:n_obs])
    elif spec.strategy == "azimuth_decimation":
        if spec.every_n < 1:
            raise ValueError("every_n must be >= 1")
        keep = []
        for ring in group_rings(az, el):
            keep.extend(ring.indices[:: spec.every_n])
        observed = np.sort(np.asarray(keep, dtype=np.intp))
    else:
        raise ValueError(f"unknown split strategy {spec.strategy!r}")
    if observed.size == 0:
        raise ValueError("split leaves no observed directions")
    desired = np.setdiff1d(np.arange(n), observed)
    return replace(spec, observed=observed, desired=desired)


def field_subset(field: MagnitudeField, indices) -> MagnitudeField:
    indices = np.asarray(indices, dtype=np.intp)
    if indices.size == 0:
        raise ValueError("empty subset")
    return MagnitudeField(
        directions=[field.directions[i] for i in indices],
        values_db=field.values_db[indices],
        freq_grid_hz=field.freq_grid_hz,
        wrap_mask=None if field.wrap_mask is None else field.wrap_mask[indices],
        subject_id=field.subject_id,
        dataset_name=field.dataset_name,
    )


# --- interpolation experiment ----------------------------------------------------


class _Pool:
    """Pools squared dB errors across ears for per-frequency RMS curves."""

    def __init__(self, n_bins: int):
        self.sq_sum = np.zeros(n_bins)
        self.rows = 0

    def add(self, truth_db: np.ndarray, pred_db: np.ndarray) -> None:
        d = np.square(
            np.asarray(truth_db, dtype=np.float64) - np.asarray(pred_db, np.float64)
        )
        self.sq_sum += d.sum(axis=0)
        self.rows += d.shape[0]

    def per_frequency(self) -> np.ndarray:
        return np.sqrt(self.sq_sum / self.rows)

    def overall(self) -> float:
        return float(np.sqrt(self.sq_sum.sum() / (self.rows * self.sq_sum.size)))


def model_predictor(net: SirenNetwork, latent_steps: int = 1):
    """Closure mapping (field, observed, desired) to dB predictions for both
    subsets, inferring the ear's latent from the wrap-extended observed rows."""

    def predictor(field, obs_idx, des_idx):
        wrapped = extend_azimuth_wrap(field_subset(field, obs_idx))
        z = infer_latent_for_field(net, wrapped, steps=latent_steps)
        az = field.azimuths()
        el = field.elevations()
        recon = np.asarray(predict(net, az[obs_idx], el[obs_idx], z), dtype=np.float64)
        interp = np.asarray(predict(net, az[des_idx], el[des_idx], z), dtype=np.float64)
        return recon, interp

    return predictor


def baseline_predictions(method: str, field: MagnitudeField, obs_idx, des_idx):
    """Interpolate the observed rows' linear magnitudes onto both subsets."""
    az = field.azimuths()
    el = field.elevations()
    lin = db_to_linear(field.values_db)
    if method == "vbap":
        run = lambda a, e: vbap_interpolate(
            az[obs_idx], el[obs_idx], lin[obs_idx], a, e
        ).values
    elif method == "bilinear":
        run = lambda a, e: bilinear_interpolate(
            az[obs_idx], el[obs_idx], lin[obs_idx], a, e
        ).values
    else:
        raise ValueError(f"unknown baseline {method!r}")
    recon = linear_to_db(run(az[obs_idx], el[obs_idx]))
    interp = linear_to_db(run(az[des_idx], el[des_idx]))
    return recon, interp


def assemble_training_fields(
    setting: str, target_fields, other_fields, splits
) -> list[MagnitudeField]:
    """Training corpus per protocol setting.

    ours_r: observed subsets of the target ears only; ours_t: those plus all
    other ears in full; ours_e: the other ears only (target fully held out).
    Every training field is azimuth-wrap extended.
    """
    observed_parts = [
        extend_azimuth_wrap(field_subset(f, s.observed))
        for f, s in zip(target_fields, splits)
    ]
    others = [extend_azimuth_wrap(f) for f in other_fields]
    if setting == "ours_r":
        return observed_parts
    if setting == "ours_t":
        return observed_parts + others
    if setting == "ours_e":
        if not others:
            raise ValueError("ours_e needs other datasets to train on")
        return others
    raise ValueError(f"unknown setting {setting!r}")


@dataclass
class InterpolationResult:
    setting: str
    freq_hz: np.ndarray
    curves: dict          # name -> (K,) per-frequency LSD
    overall: dict         # name -> float
    net: SirenNetwork | None


def run_interpolation_experiment(
    setting: str,
    target_fields: list[MagnitudeField],
    other_fields: list[MagnitudeField],
    split_spec: SplitSpec,
    cfg: TrainConfig,
    net: SirenNetwork | None = None,
    predictor=None,
    methods=METHODS,
) -> InterpolationResult:
    """Reconstruction and interpolation error curves for one protocol setting.

    Trains a model on the setting's corpus unless ``net`` (reuse) or
    ``predictor`` (bypass, e.g. an oracle) is given, then evaluates every
    target ear on its observed rows (reconstruction) and held-out rows
    (interpolation), alongside the classical baselines on the same splits.
    """
    setting = setting.lower().replace("-", "_")
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}")
    if not target_fields:
        raise ValueError("no target ears")
    if split_spec.resolved:
        splits = [split_spec] * len(target_fields)
    else:
        splits = [make_split(f.directions, split_spec) for f in target_fields]
    for s in splits:
        if s.desired.size == 0:
            raise ValueError("split leaves nothing to interpolate")
    if "field" in methods and predictor is None:
        if net is None:
            train_fields = assemble_training_fields(
                setting, target_fields, other_fields, splits
            )
            net = fit(train_fields, cfg).net
        elif net.output_dim != target_fields[0].n_bins:
            raise ValueError(
                f"network outputs {net.output_dim} bins but target ears "
                f"carry {target_fields[0].n_bins}"
            )
        predictor = model_predictor(net, latent_steps=cfg.latent_steps)
    k = target_fields[0].n_bins
    pools = {}
    for name in methods:
        pools[name + "_reconstruction"] = _Pool(k)
        pools[name + "_interpolation"] = _Pool(k)
    for field, split in zip(target_fields, splits):
        truth = field.values_db
        obs, des = split.observed, split.desired
        if "field" in methods:
            recon, interp = predictor(field, obs, des)
            pools["field_reconstruction"].add(truth[obs], recon)
            pools["field_interpolation"].add(truth[des], interp)
        for m in methods:
            if m == "field":
                continue
            recon, interp = baseline_predictions(m, field, obs, des)
            pools[m + "_reconstruction"].add(truth[obs], recon)
            pools[m + "_interpolation"].add(truth[des], interp)
    return InterpolationResult(
        setting=setting,
        freq_hz=np.asarray(target_fields[0].freq_grid_hz, dtype=np.float64),
        curves={name: p.per_frequency() for name, p in pools.items()},
        overall={name: p.overall() for name, p in pools.items()},
        net=net,
    )


# --- conditional generation ------------------------------------------------------


@dataclass
class CondGenRow:
    method: str
    fraction: float
    mean_db: float     # nan when every trial failed
    std_db: float
    n_trials: int
    n_failed: int


def run_conditional_generation(
    net: SirenNetwork,
    target_fields: list[MagnitudeField],
    fractions,
    seeds,
    latent_steps: int = 1,
    methods=METHODS,
) -> list[CondGenRow]:
    """Overall LSD as a function of the observed fraction of each target ear.

    The model (trained without these ears) infers each latent from the random
    observed subset and predicts the remainder; baselines interpolate from the
    identical subset. Trials pair every ear with every seed; baseline trials
    that cannot run (too few points, no ring structure) count as failed while
    the model is still scored.
    """
    fractions = [float(p) for p in fractions]
    if any(p <= 0.0 or p > 1.0 for p in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    if any(p >= 0.25 for p in fractions):
        warnings.warn("observed fractions of 25% or more exceed the sparse regime")
    for f in target_fields:
        if f.n_bins != net.output_dim:
            raise ValueError(
                f"network outputs {net.output_dim} bins but target ear "
                f"{f.subject_id!r} carries {f.n_bins}"
            )
    predictor = model_predictor(net, latent_steps=latent_steps)
    rows: list[CondGenRow] = []
    for p in fractions:
        samples = {m: [] for m in methods}
        failed = {m: 0 for m in methods}
        for ear_i, field in enumerate(target_fields):
            for seed in seeds:
                split = make_split(
                    field.directions,
                    SplitSpec("random_fraction", fraction=p, seed=[int(seed), ear_i]),
                )
                if split.desired.size == 0:
                    raise ValueError("fraction leaves nothing to predict")
                truth_des = field.values_db[split.desired]
                for m in methods:
                    try:
                        if m == "field":
                            _, interp = predictor(field, split.observed, split.desired)
                        else:
                            _, interp = baseline_predictions(
                                m, field, split.observed, split.desired
                            )
                        samples[m].append(lsd(truth_des, interp).overall_db)
                    except ValueError:
                        if m == "field":
                            raise
                        failed[m] += 1
        n_trials = len(target_fields) * len(seeds)
        for m in methods:
            got = np.asarray(samples[m], dtype=np.float64)
            rows.append(
                CondGenRow(
                    method=m,
                    fraction=p,
                    mean_db=float(np.mean(got)) if got.size else float("nan"),
                    std_db=float(np.std(got)) if got.size else float("nan"),
                    n_trials=n_trials,
                    n_failed=failed[m],
                )
            )
    return rows


# --- latent morphing and midsagittal export ---------------------------------------


def midsagittal_directions(step_deg: float = 1.0):
    """Polar sweep through the vertical plane: azimuth 0 rising from -90 to
    90 elevation, then azimuth 180 falling back to -90; one angle axis."""
    if step_deg <= 0.0:
        raise ValueError("step must be positive")
    polar = np.arange(-90.0, 270.0 + 0.5 * step_deg, step_deg)
    front = polar <= 90.0
    az = np.where(front, 0.0, 180.0)
    el = np.where(front, polar, 180.0 - polar)
    return polar, az, el


def latent_morph(
    net: SirenNetwork,
    field_a: MagnitudeField,
    field_b: MagnitudeField,
    ts,
    grid=None,
    latent_steps: int = 1,
) -> list[MagnitudeField]:
    """Fields rendered at z_t = (1 - t) z_a + t z_b on a rendering grid.

    Latents come from each ear's full data; t=0 and t=1 reproduce the pure
    reconstructions of the endpoints bit for bit.
    """
    z_a = infer_latent_for_field(net, field_a, steps=latent_steps)
    z_b = infer_latent_for_field(net, field_b, steps=latent_steps)
    if grid is None:
        polar, az, el = midsagittal_directions()
    else:
        az, el = grid
        az = np.asarray(az, dtype=np.float64)
        el = np.asarray(el, dtype=np.float64)
    from .archive import Direction

    dirs = [Direction(float(a), float(e)) for a, e in zip(az, el)]
    out = []
    for t in ts:
        t = float(t)
        z_t = (1.0 - t) * z_a + t * z_b
        values = np.asarray(predict(net, az, el, z_t), dtype=np.float64)
        out.append(
            MagnitudeField(
                directions=dirs,
                values_db=values,
                freq_grid_hz=np.asarray(field_a.freq_grid_hz, dtype=np.float64),
                subject_id=f"morph_t_{t:g}",
                dataset_name=field_a.dataset_name,
            )
        )
    return out


def export_midsagittal(source, freq_hz=None, z=None, net=None, step_deg: float = 1.0):
    """(polar_angle_deg, magnitudes_db) along the midsagittal path.

    ``source`` is either a SirenNetwork (requires ``z``) or a MagnitudeField,
    whose rows at azimuth 0/180 are picked out and ordered by polar angle.
    """
    if isinstance(source, SirenNetwork):
        if z is None:
            raise ValueError("network export needs a latent code")
        polar, az, el = midsagittal_directions(step_deg)
        mags = np.asarray(predict(source, az, el, z), dtype=np.float64)
        return polar, mags
    field: MagnitudeField = source
    az = field.azimuths()
    el = field.elevations()
    polar_list = []
    rows = []
    for i in range(field.n_locations):
        if abs(az[i]) < 1.0e-9:
            polar_list.append(el[i])
            rows.append(i)
        elif abs(az[i] - 180.0) < 1.0e-9:
            polar_list.append(180.0 - el[i])
            rows.append(i)
    if not rows:
        raise ValueError("field has no midsagittal rows")
    polar = np.asarray(polar_list, dtype=np.float64)
    order = np.argsort(polar, kind="stable")
    return polar[order], field.values_db[np.asarray(rows)[order]]


# --- CSV emission ----------------------------------------------------------------


def write_curves_csv(path, freq_hz, curves: dict) -> None:
    """K rows; columns: freq_hz then one per curve (insertion order)."""
    names = list(curves)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz"] + names)
        for i, f in enumerate(freq_hz):
            w.writerow([repr(float(f))] + [repr(float(curves[n][i])) for n in names])


def write_condgen_csv(path, rows: list[CondGenRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "fraction", "mean_lsd_db", "std_lsd_db",
                    "n_trials", "n_failed"])
        for r in rows:
            w.writerow([r.method, repr(r.fraction), repr(r.mean_db), repr(r.std_db),
                        r.n_trials, r.n_failed])


def write_midsagittal_csv(path, polar_deg, mags_db, freq_hz) -> None:
    """n_points rows; columns: polar angle then one per frequency bin."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["polar_angle_deg"] + [f"f_{f:.6f}_hz" for f in freq_hz])
        for i in range(len(polar_deg)):
            w.writerow([repr(float(polar_deg[i]))]
                       + [repr(float(v)) for v in mags_db[i]])
