"""Sine-activated MLP over (azimuth, elevation, latent) producing K magnitudes.

Every layer but the last applies sin(omega0 * (W h + b)); the last is affine.
The latent code is concatenated to the two normalized angle coordinates at
the input layer only, so one set of weights hosts all subject-ears.

Loss gradients live here too: parameters, latent, and the total derivative
of the weight-update loss through the one-step latent inference from the
origin (exact mode differentiates through that gradient step; detached mode
treats the inferred latent as constant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

MODEL_MAGIC = b"HFNF"
MODEL_VERSION = 1
DEFAULT_OMEGA0 = 30.0


@dataclass
class SirenNetwork:
    """Weights/biases of the sine MLP. layers[i] = (W_i, b_i), forward order."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    latent_dim: int
    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        prev = None
        for i, (W, b) in enumerate(self.layers):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {W.shape} / bias {b.shape} mismatch")
            if 0 in W.shape:
                raise ValueError(f"layer {i}: zero-sized layer {W.shape}")
            if prev is not None and W.shape[1] != prev:
                raise ValueError(
                    f"layer {i}: input dim {W.shape[1]} != previous output {prev}"
                )
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
            prev = W.shape[0]
        if self.input_dim != 2 + self.latent_dim:
            raise ValueError(
                f"input dim {self.input_dim} != 2 + latent dim {self.latent_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [W.shape[0] for W, _ in self.layers]

    @property
    def dtype(self):
        return self.layers[0][0].dtype

    def astype(self, dtype) -> "SirenNetwork":
        return SirenNetwork(
            [(W.astype(dtype), b.astype(dtype)) for W, b in self.layers],
            self.latent_dim,
            self.omega0,
        )

    def copy(self) -> "SirenNetwork":
        return SirenNetwork(
            [(W.copy(), b.copy()) for W, b in self.layers], self.latent_dim, self.omega0
        )


def siren_init(
    dims: list[int],
    latent_dim: int,
    omega0: float = DEFAULT_OMEGA0,
    seed: int = 0,
    dtype=np.float64,
) -> SirenNetwork:
    """Seeded initialization: first layer U(-1/n, 1/n), deeper layers
    U(-sqrt(6/n)/omega0, sqrt(6/n)/omega0), biases U(-1/sqrt(n), 1/sqrt(n))."""
    if any(d <= 0 for d in dims):
        raise ValueError(f"zero-sized layer in dims {dims}")
    if dims[0] != 2 + latent_dim:
        raise ValueError(f"dims[0]={dims[0]} must equal 2 + latent_dim={latent_dim}")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        bound = 1.0 / n_in if i == 0 else np.sqrt(6.0 / n_in) / omega0
        W = rng.uniform(-bound, bound, size=(n_out, n_in))
        b = rng.uniform(-1.0, 1.0, size=n_out) / np.sqrt(n_in)
        layers.append((W.astype(dtype), b.astype(dtype)))
    return SirenNetwork(layers, latent_dim, omega0)


def normalize_directions(azimuth_deg, elevation_deg) -> np.ndarray:
    """Map degrees to network coordinates: theta->(theta-180)/180, phi->phi/90.

    The wrap-extended azimuth range (-30, 390) lands in (-1.167, 1.167).
    """
    az = np.asarray(azimuth_deg, dtype=np.float64)
    el = np.asarray(elevation_deg, dtype=np.float64)
    return np.stack([(az - 180.0) / 180.0, el / 90.0], axis=-1)


def forward(layers, coords, z, omega0: float):
    """(L, K) outputs for normalized coords (L, 2) and one latent z (D,).

    ``layers`` entries and ``z`` may be autodiff Tensors or plain arrays;
    inference and gradient computation share this exact code path.
    """
    n_layers = len(layers)
    W0, b0 = layers[0]
    pre = coords @ ad.transpose(ad.narrow(W0, 0, 2))
    zdim = z.shape[0] if hasattr(z, "shape") else len(z)
    if zdim:
        z_row = ad.reshape(z, (1, zdim))
        pre = pre + z_row @ ad.transpose(ad.narrow(W0, 2, zdim))
    pre = pre + b0
    if n_layers == 1:
        return pre
    h = ad.sin(pre * omega0)
    for i in range(1, n_layers - 1):
        W, b = layers[i]
        h = ad.sin((h @ ad.transpose(W) + b) * omega0)
    Wn, bn = layers[-1]
    return h @ ad.transpose(Wn) + bn


def predict(net: SirenNetwork, azimuth_deg, elevation_deg, z) -> np.ndarray:
    """Inference convenience: degrees in, (L, K) dB magnitudes out."""
    coords = normalize_directions(azimuth_deg, elevation_deg).astype(net.dtype)
    if coords.ndim == 1:
        coords = coords[None, :]
    if not np.all(np.isfinite(coords)):
        raise ValueError("non-finite input coordinates")
    z = np.asarray(z, dtype=net.dtype)
    if z.shape != (net.latent_dim,):
        raise ValueError(f"latent shape {z.shape} != ({net.latent_dim},)")
    return forward(net.layers, coords, z, net.omega0)


# --- loss and gradients -------------------------------------------------------


def _as_param_tensors(net: SirenNetwork) -> list[tuple[Tensor, Tensor]]:
    return [
        (Tensor(W, requires_grad=True), Tensor(b, requires_grad=True))
        for W, b in net.layers
    ]


def masked_mse_graph(pred, targets: np.ndarray, mask: np.ndarray):
    """Masked MSE as a graph node: mean of squared error over unmasked cells.

    mask is a per-location boolean vector; padded rows contribute nothing to
    either the value or the gradient.
    """
    n_true = int(np.count_nonzero(mask))
    if n_true == 0:
        raise ValueError("zero unmasked cells")
    K = targets.shape[1]
    maskf = mask.astype(targets.dtype)[:, None]
    diff = (pred - targets) * maskf
    return ad.tsum(ad.square(diff)) * (1.0 / (n_true * K))


def _ear_loss(params, coords, targets, mask, z, omega0):
    return masked_mse_graph(forward(params, coords, z, omega0), targets, mask)


def _prepare(net: SirenNetwork, coords, targets, mask):
    coords = np.asarray(coords, dtype=net.dtype)
    targets = np.asarray(targets, dtype=net.dtype)
    if mask is None:
        mask = np.ones(targets.shape[0], dtype=bool)
    if coords.shape[0] != targets.shape[0] or mask.shape[0] != targets.shape[0]:
        raise ValueError("coords/targets/mask row counts disagree")
    if targets.shape[1] != net.output_dim:
        raise ValueError(
            f"target bins {targets.shape[1]} != network output {net.output_dim}"
        )
    return coords, targets, mask


def grad_params(net: SirenNetwork, coords, targets, mask, z):
    """Reverse-mode gradient of the masked MSE w.r.t. every weight and bias."""
    coords, targets, mask = _prepare(net, coords, targets, mask)
    params = _as_param_tensors(net)
    z_t = Tensor(np.asarray(z, dtype=net.dtype))
    loss = _ear_loss(params, coords, targets, mask, z_t, net.omega0)
    flat = [t for pair in params for t in pair]
    gs = ad.grad(loss, flat)
    return (
        [(gs[2 * i].value, gs[2 * i + 1].value) for i in range(len(params))],
        float(loss.value),
    )


def grad_latent(net: SirenNetwork, coords, targets, mask, z):
    """Gradient of the masked MSE w.r.t. the latent code only."""
    coords, targets, mask = _prepare(net, coords, targets, mask)
    z_t = Tensor(np.asarray(z, dtype=net.dtype), requires_grad=True)
    loss = _ear_loss(net.layers, coords, targets, mask, z_t, net.omega0)
    (gz,) = ad.grad(loss, [z_t])
    return gz.value, float(loss.value)


def latent_step_from_origin(params, coords, targets, mask, omega0, latent_dim,
                            steps: int, create_graph: bool):
    """z after ``steps`` unit gradient-descent steps of the loss from z = 0.

    With create_graph=True the returned Tensor stays connected to the
    parameters, so a later parameter gradient includes the dz/dW term.
    """
    dtype = targets.dtype
    z = Tensor(np.zeros(latent_dim, dtype=dtype), requires_grad=True)
    for _ in range(steps):
        loss = _ear_loss(params, coords, targets, mask, z, omega0)
        (gz,) = ad.grad(loss, [z], create_graph=create_graph)
        z = z - gz
    return z


def grad_params_through_latent_step(
    net: SirenNetwork, coords, targets, mask, steps: int = 1, mode: str = "exact"
):
    """Total derivative of the weight-update loss, latent inferred from origin.

    mode="exact" keeps the latent step on the tape (includes the mixed
    second-derivative term); mode="detached" treats the inferred latent as a
    constant. Returns (per-layer gradients, loss value, inferred latent).
    """
    if mode not in ("exact", "detached"):
        raise ValueError(f"unsupported gradient mode {mode!r}")
    coords, targets, mask = _prepare(net, coords, targets, mask)
    params = _as_param_tensors(net)
    z = latent_step_from_origin(
        params, coords, targets, mask, net.omega0, net.latent_dim,
        steps, create_graph=(mode == "exact"),
    )
    if mode == "detached":
        z = z.detach()
    loss = _ear_loss(params, coords, targets, mask, z, net.omega0)
    flat = [t for pair in params for t in pair]
    gs = ad.grad(loss, flat)
    grads = [(gs[2 * i].value, gs[2 * i + 1].value) for i in range(len(params))]
    return grads, float(loss.value), z.value.copy()


# --- serialization ------------------------------------------------------------


def save_model(net: SirenNetwork, path) -> None:
    """Little-endian binary: magic, version, dims, omega0, then f64 params."""
    import struct

    dims = net.dims
    hidden = dims[1:-1]
    if hidden and any(h != hidden[0] for h in hidden):
        raise ValueError("serializer requires uniform hidden widths")
    hidden_dim = hidden[0] if hidden else 0
    head = struct.pack(
        "<4sIIIIIId",
        MODEL_MAGIC,
        MODEL_VERSION,
        net.input_dim,
        hidden_dim,
        len(hidden),
        net.output_dim,
        net.latent_dim,
        net.omega0,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        for W, b in net.layers:
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> SirenNetwork:
    import struct

    head_fmt = "<4sIIIIIId"
    head_size = struct.calcsize(head_fmt)
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < head_size:
        raise ValueError("model file truncated in header")
    magic, version, inp, hidden, n_hidden, out, d, omega0 = struct.unpack(
        head_fmt, buf[:head_size]
    )
    if magic != MODEL_MAGIC:
        raise ValueError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    dims = [inp] + [hidden] * n_hidden + [out]
    pos = head_size
    layers = []
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        need = 8 * (n_out * n_in + n_out)
        if pos + need > len(buf):
            raise ValueError(f"model file truncated in layer {i}")
        W = np.frombuffer(buf, dtype="<f8", count=n_out * n_in, offset=pos).reshape(
            n_out, n_in
        )
        pos += 8 * n_out * n_in
        b = np.frombuffer(buf, dtype="<f8", count=n_out, offset=pos)
        pos += 8 * n_out
        layers.append((W.copy(), b.copy()))
    if pos != len(buf):
        raise ValueError(f"{len(buf) - pos} trailing bytes in model file")
    return SirenNetwork(layers, latent_dim=d, omega0=omega0)
