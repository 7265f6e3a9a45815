"""Shared-weight training with per-ear latents inferred from the origin.

Each optimization step re-infers every ear's latent code as a single unit
gradient-descent step of the reconstruction loss starting at z = 0, then
updates the network weights with Adam on the same loss. In exact mode the
weight gradient is the total derivative through that latent step; detached
mode treats the inferred latent as a constant.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .archive import MagnitudeField
from .siren import (
    SirenNetwork,
    grad_params_through_latent_step,
    latent_step_from_origin,
    normalize_directions,
    siren_init,
)

DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 18
    latent_dim: int = 32
    hidden_dim: int = 2048
    n_hidden: int = 2
    n_bins: int = 92
    lr0: float = 3.0e-4
    lr_decay_coeff: float = 0.01
    omega0: float = 30.0
    grad_mode: str = "exact"
    latent_steps: int = 1
    seed: int = 0
    precision: str = "f32"
    threads: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1.0e-8

    def __post_init__(self):
        if self.precision not in DTYPES:
            raise ValueError(f"precision must be one of {sorted(DTYPES)}")
        if self.grad_mode not in ("exact", "detached"):
            raise ValueError("grad_mode must be 'exact' or 'detached'")
        if self.epochs < 0 or self.batch_size < 1 or self.latent_steps < 0:
            raise ValueError("epochs/batch_size/latent_steps out of range")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def dtype(self):
        return DTYPES[self.precision]

    def network_dims(self) -> list[int]:
        return [2 + self.latent_dim] + [self.hidden_dim] * self.n_hidden + [self.n_bins]


def lr_schedule(lr0: float, decay_coeff: float, epoch_i: int) -> float:
    """Inverse-decay rate for epoch i (0-based): lr0 / (1 + decay_coeff * i)."""
    return lr0 / (1.0 + decay_coeff * epoch_i)


def masked_mse(pred: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over unmasked locations (all frequency bins)."""
    n_true = int(np.count_nonzero(mask))
    if n_true == 0:
        raise ValueError("zero unmasked cells")
    diff = (pred - targets) * mask.astype(pred.dtype)[:, None]
    return float(np.sum(np.square(diff)) / (n_true * pred.shape[1]))


@dataclass
class EarRecord:
    """One subject-ear's training arrays in network coordinates."""

    identity: tuple
    coords: np.ndarray   # (L, 2) normalized
    targets: np.ndarray  # (L, K) dB
    mask: np.ndarray     # (L,) bool; False rows are padding/ignored

    @property
    def n_locations(self) -> int:
        return self.coords.shape[0]


def ear_record_from_field(fld: MagnitudeField, dtype=np.float32) -> EarRecord:
    coords = normalize_directions(fld.azimuths(), fld.elevations()).astype(dtype)
    return EarRecord(
        identity=(fld.dataset_name, fld.subject_id),
        coords=coords,
        targets=np.asarray(fld.values_db, dtype=dtype),
        mask=np.ones(fld.n_locations, dtype=bool),
    )


@dataclass
class TrainingBatch:
    """Ears padded to a common location count; mask marks the real rows."""

    coords: np.ndarray   # (B, Lmax, 2)
    targets: np.ndarray  # (B, Lmax, K)
    mask: np.ndarray     # (B, Lmax)
    ear_indices: list[int]

    @property
    def n_ears(self) -> int:
        return len(self.ear_indices)


def make_batch(records: list[EarRecord], indices, dtype) -> TrainingBatch:
    chosen = [records[i] for i in indices]
    l_max = max(r.n_locations for r in chosen)
    k = chosen[0].targets.shape[1]
    coords = np.zeros((len(chosen), l_max, 2), dtype=dtype)
    targets = np.zeros((len(chosen), l_max, k), dtype=dtype)
    mask = np.zeros((len(chosen), l_max), dtype=bool)
    for j, rec in enumerate(chosen):
        n = rec.n_locations
        coords[j, :n] = rec.coords
        targets[j, :n] = rec.targets
        mask[j, :n] = rec.mask
    return TrainingBatch(coords, targets, mask, [int(i) for i in indices])


def infer_latent(
    net: SirenNetwork, coords, targets, mask=None, steps: int = 1
) -> np.ndarray:
    """Latent for one ear: ``steps`` unit gradient steps from z = 0 with the
    network held fixed. steps=0 returns the origin itself."""
    coords = np.asarray(coords, dtype=net.dtype)
    targets = np.asarray(targets, dtype=net.dtype)
    if mask is None:
        mask = np.ones(targets.shape[0], dtype=bool)
    z = latent_step_from_origin(
        net.layers, coords, targets, mask, net.omega0, net.latent_dim,
        steps, create_graph=False,
    )
    return np.asarray(z.value, dtype=net.dtype)


def infer_latent_for_field(net: SirenNetwork, fld: MagnitudeField,
                           steps: int = 1) -> np.ndarray:
    rec = ear_record_from_field(fld, dtype=net.dtype)
    return infer_latent(net, rec.coords, rec.targets, rec.mask, steps)


# --- Adam ---------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_network(cls, net: SirenNetwork) -> "AdamState":
        zeros = lambda a: np.zeros_like(a)
        return cls(
            m=[(zeros(W), zeros(b)) for W, b in net.layers],
            v=[(zeros(W), zeros(b)) for W, b in net.layers],
        )


def adam_step(
    net: SirenNetwork,
    grads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1.0e-8,
) -> None:
    """One bias-corrected Adam update applied in place to the network."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for i, (W, b) in enumerate(net.layers):
        for j, (p, g) in enumerate(((W, grads[i][0]), (b, grads[i][1]))):
            m = state.m[i][j]
            v = state.v[i][j]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * np.square(g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# --- epoch loop ---------------------------------------------------------------


def _batch_gradients(net: SirenNetwork, batch: TrainingBatch, cfg: TrainConfig):
    """Mean over batch ears of each ear's total parameter gradient."""

    def one_ear(j: int):
        return grad_params_through_latent_step(
            net, batch.coords[j], batch.targets[j], batch.mask[j],
            steps=cfg.latent_steps, mode=cfg.grad_mode,
        )

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one_ear, range(batch.n_ears)))
    else:
        results = [one_ear(j) for j in range(batch.n_ears)]

    # Fixed-order reduction keeps results identical for any thread count.
    acc = [(np.zeros_like(W), np.zeros_like(b)) for W, b in net.layers]
    loss_sum = 0.0
    for grads, loss, _z in results:
        for (acc_w, acc_b), (g_w, g_b) in zip(acc, grads):
            acc_w += g_w
            acc_b += g_b
        loss_sum += loss
    inv = 1.0 / batch.n_ears
    for gW, gb in acc:
        gW *= inv
        gb *= inv
    return acc, loss_sum / batch.n_ears


def epoch_order(seed: int, epoch_i: int, n: int) -> np.ndarray:
    """Deterministic per-epoch shuffle keyed by (seed, epoch index)."""
    return np.random.default_rng([seed, epoch_i]).permutation(n)


def train_epoch(
    net: SirenNetwork,
    records: list[EarRecord],
    epoch_i: int,
    cfg: TrainConfig,
    state: AdamState,
) -> float:
    """One pass over all ears in shuffled batches; returns the mean batch loss."""
    order = epoch_order(cfg.seed, epoch_i, len(records))
    lr = lr_schedule(cfg.lr0, cfg.lr_decay_coeff, epoch_i)
    losses = []
    for start in range(0, len(order), cfg.batch_size):
        batch = make_batch(records, order[start : start + cfg.batch_size], cfg.dtype)
        grads, loss = _batch_gradients(net, batch, cfg)
        adam_step(net, grads, state, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        losses.append(loss)
    return float(np.mean(losses))


@dataclass
class FitResult:
    net: SirenNetwork
    history: list = field(default_factory=list)  # dicts: epoch, lr, loss, seconds


def fit(
    fields: list[MagnitudeField],
    cfg: TrainConfig,
    net: SirenNetwork | None = None,
    log_path=None,
    callback=None,
) -> FitResult:
    """Train a network on processed magnitude fields.

    A fresh network is initialized from cfg.seed unless one is passed in.
    ``callback(epoch_i, loss, net)`` runs after every epoch when given.
    """
    if not fields:
        raise ValueError("no training data")
    records = [ear_record_from_field(f, dtype=cfg.dtype) for f in fields]
    k = records[0].targets.shape[1]
    if any(r.targets.shape[1] != k for r in records):
        raise ValueError("ears disagree on frequency bin count")
    if k != cfg.n_bins:
        raise ValueError(f"data has {k} bins but config expects {cfg.n_bins}")
    if net is None:
        net = siren_init(
            cfg.network_dims(), cfg.latent_dim, cfg.omega0, cfg.seed, cfg.dtype
        )
    elif net.dtype != cfg.dtype:
        net = net.astype(cfg.dtype)
    state = AdamState.for_network(net)
    result = FitResult(net=net)
    writer = None
    fh = None
    if log_path is not None:
        fh = open(log_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "mean_loss", "wall_seconds"])
    t0 = time.perf_counter()
    try:
        for epoch_i in range(cfg.epochs):
            loss = train_epoch(net, records, epoch_i, cfg, state)
            row = {
                "epoch": epoch_i,
                "lr": lr_schedule(cfg.lr0, cfg.lr_decay_coeff, epoch_i),
                "mean_loss": loss,
                "wall_seconds": time.perf_counter() - t0,
            }
            result.history.append(row)
            if writer is not None:
                writer.writerow(
                    [row["epoch"], row["lr"], row["mean_loss"], row["wall_seconds"]]
                )
                fh.flush()
            if callback is not None:
                callback(epoch_i, loss, net)
    finally:
        if fh is not None:
            fh.close()
    return result
