"""IQNet: a ~3K-parameter residual prefilter with pixel attention.

Layer stack (luma in [0, 1], channels-last activations)::

    f = relu(conv5x5(x))          1 -> C
    g = f * sigmoid(conv1x1(f))   pixel attention, C -> C
    h = relu(conv3x3(g))          C -> C
    y = clamp(x + conv3x3(h), 0, 1)   C -> 1

All convolutions use edge-replicated "same" padding. Training is plain
reverse-mode differentiation written out by hand plus Adam.
"""

import hashlib
import io
import json
import logging
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import ConfigError, ModelFormatError
from .image import to_uint8

log = logging.getLogger(__name__)

FORMAT_NAME = "iqnet"
FORMAT_VERSION = 1
PARAM_NAMES = ("w1", "b1", "wpa", "bpa", "w2", "b2", "w3", "b3")


def architecture(channels=16):
    """``(name, in_channels, out_channels, kernel)`` for each layer."""
    c = channels
    return [("conv1", 1, c, 5), ("pa", c, c, 1), ("conv2", c, c, 3), ("conv3", c, 1, 3)]


def parameter_count(channels=16):
    return sum(cin * cout * k * k + cout for _, cin, cout, k in architecture(channels))


def macs_per_pixel(channels=16):
    return sum(cin * cout * k * k for _, cin, cout, k in architecture(channels))


def param_shapes(channels=16):
    c = channels
    return {
        "w1": (c, 1, 5, 5), "b1": (c,),
        "wpa": (c, c), "bpa": (c,),
        "w2": (c, c, 3, 3), "b2": (c,),
        "w3": (1, c, 3, 3), "b3": (1,),
    }


@dataclass(eq=False)
class IqnetModel:
    """Weights in (Cout, Cin, kh, kw) order; ``wpa`` is (Cout, Cin)."""

    params: dict
    channels: int = 16
    config_hash: str = ""

    def __post_init__(self):
        shapes = param_shapes(self.channels)
        if set(self.params) != set(PARAM_NAMES):
            raise ModelFormatError(f"expected parameters {PARAM_NAMES}, got {sorted(self.params)}")
        for name, shape in shapes.items():
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ModelFormatError(f"{name} has shape {arr.shape}, expected {shape}")
            self.params[name] = arr

    @property
    def num_parameters(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return IqnetModel({k: v.copy() for k, v in self.params.items()}, self.channels, self.config_hash)

    @classmethod
    def zeros(cls, channels=16):
        return cls({k: np.zeros(s) for k, s in param_shapes(channels).items()}, channels)

    @classmethod
    def initialize(cls, channels=16, seed=0):
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in param_shapes(channels).items():
            wshape = param_shapes(channels)["w" + name[1:]]
            fan_in = int(np.prod(wshape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, shape)
        return cls(params, channels)


def _wt(w):
    """(Cout, Cin, k, k) -> (k, k, Cin, Cout) as the kernels expect."""
    return np.ascontiguousarray(w.transpose(2, 3, 1, 0))


def _forward(model, x):
    """Forward pass on (N, H, W, 1); returns output and the tape for backward."""
    p = model.params
    z1 = kernels.conv_forward(x, _wt(p["w1"]), p["b1"])
    f = np.maximum(z1, 0.0)
    a = expit(f @ p["wpa"].T + p["bpa"])
    g = f * a
    z2 = kernels.conv_forward(g, _wt(p["w2"]), p["b2"])
    h = np.maximum(z2, 0.0)
    r = kernels.conv_forward(h, _wt(p["w3"]), p["b3"])
    z = x + r
    y = np.clip(z, 0.0, 1.0)
    return y, (x, z1, f, a, g, z2, h, z)


def pixel_attention(features, wpa, bpa):
    """``features * sigmoid(features @ wpa.T + bpa)`` over the channel axis."""
    features = np.asarray(features, dtype=np.float64)
    return features * expit(features @ np.asarray(wpa).T + np.asarray(bpa))


def _batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None, :, :, None], 2
    if x.ndim == 3:
        return x[:, :, :, None], 3
    raise ValueError(f"expected (H, W) or (N, H, W) input, got {x.shape}")


def forward(model, x):
    """Run the network on a luma plane (H, W) or a stack (N, H, W) in [0, 1]."""
    xb, nd = _batch(x)
    if xb.shape[1] < 8 or xb.shape[2] < 8:
        raise ValueError("input must be at least 8x8")
    y, _ = _forward(model, xb)
    y = y[..., 0]
    return y[0] if nd == 2 else y


def loss_and_gradients(model, inputs, targets, loss="mse"):
    """Mean loss over all pixels of the batch and its gradient per parameter.

    ``inputs``/``targets`` are (N, H, W) or (H, W) arrays in [0, 1]. The clamp
    passes gradient where ``0 <= x + r <= 1`` and blocks it elsewhere.
    """
    xb, _ = _batch(inputs)
    tb, _ = _batch(targets)
    if xb.shape != tb.shape:
        raise ValueError("inputs and targets differ in shape")
    p = model.params
    y, (x, z1, f, a, g, z2, h, z) = _forward(model, xb)
    diff = y - tb
    count = diff.size
    if loss == "mse":
        value = float(np.mean(diff * diff))
        dy = 2.0 * diff / count
    elif loss == "l1":
        value = float(np.mean(np.abs(diff)))
        dy = np.sign(diff) / count
    else:
        raise ConfigError(f"unknown loss {loss!r}")

    dr = dy * ((z >= 0.0) & (z <= 1.0))
    dh, dw3, db3 = kernels.conv_backward(h, _wt(p["w3"]), dr, True)
    dz2 = dh * (z2 > 0.0)
    dg, dw2, db2 = kernels.conv_backward(g, _wt(p["w2"]), dz2, True)
    ds = dg * f * a * (1.0 - a)
    c = f.shape[-1]
    ds2 = ds.reshape(-1, c)
    dwpa = ds2.T @ f.reshape(-1, c)
    dbpa = ds2.sum(axis=0)
    df = dg * a + ds @ p["wpa"]
    dz1 = df * (z1 > 0.0)
    _, dw1, db1 = kernels.conv_backward(x, _wt(p["w1"]), dz1, False)

    back = lambda dwt: np.ascontiguousarray(dwt.transpose(3, 2, 0, 1))
    grads = {
        "w1": back(dw1), "b1": db1,
        "wpa": dwpa, "bpa": dbpa,
        "w2": back(dw2), "b2": db2,
        "w3": back(dw3), "b3": db3,
    }
    return value, grads


# -- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    patch: int = 64
    epochs: int = 2500
    steps_per_epoch: int = 1
    lr0: float = 1e-3
    lr_halve_every: int = 250
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "mse"
    channels: int = 16
    log_every: int = 100

    def __post_init__(self):
        positive = ("batch_size", "patch", "epochs", "steps_per_epoch", "lr0", "lr_halve_every",
                    "eps", "channels")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.loss not in ("mse", "l1"):
            raise ConfigError(f"unknown loss {self.loss!r}")

    @property
    def total_steps(self):
        return self.epochs * self.steps_per_epoch

    def learning_rate(self, step):
        epoch = step // self.steps_per_epoch
        return self.lr0 * 0.5 ** (epoch // self.lr_halve_every)

    def digest(self):
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


@dataclass
class TrainResult:
    model: IqnetModel
    losses: list = field(default_factory=list)


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in PARAM_NAMES:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _as_pairs(dataset, patch):
    pairs = []
    for inp, tgt in dataset:
        inp = getattr(inp, "y", inp)
        tgt = getattr(tgt, "y", tgt)
        inp, tgt = np.asarray(inp), np.asarray(tgt)
        if inp.shape != tgt.shape:
            raise ConfigError(f"input/target shapes differ: {inp.shape} vs {tgt.shape}")
        if inp.shape[0] < patch or inp.shape[1] < patch:
            raise ConfigError(f"image {inp.shape} smaller than the {patch}x{patch} training patch")
        scale = 255.0 if inp.dtype == np.uint8 else 1.0
        pairs.append((inp.astype(np.float64) / scale, tgt.astype(np.float64) / scale))
    if not pairs:
        raise ConfigError("empty dataset")
    return pairs


def train(dataset, cfg=TrainConfig(), model=None, callback=None):
    """Fit IQNet to ``(original, training)`` pairs.

    Each step draws ``batch_size`` random (image, origin) pairs from a seeded
    generator, crops aligned patches and applies one Adam update. Images may
    be :class:`PlanarImage` (luma used) or arrays; uint8 data is scaled to
    [0, 1]. Identical seeds give bit-identical weights.
    """
    pairs = _as_pairs(dataset, cfg.patch)
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = IqnetModel.initialize(cfg.channels, seed=cfg.seed)
    else:
        model = model.copy()
    model.config_hash = cfg.digest()
    opt = Adam(model.params, cfg.beta1, cfg.beta2, cfg.eps)
    ps = cfg.patch
    losses = []
    xb = np.empty((cfg.batch_size, ps, ps))
    tb = np.empty((cfg.batch_size, ps, ps))
    for step in range(cfg.total_steps):
        idx = rng.integers(0, len(pairs), cfg.batch_size)
        for j, i in enumerate(idx):
            inp, tgt = pairs[i]
            oy = rng.integers(0, inp.shape[0] - ps + 1)
            ox = rng.integers(0, inp.shape[1] - ps + 1)
            xb[j] = inp[oy : oy + ps, ox : ox + ps]
            tb[j] = tgt[oy : oy + ps, ox : ox + ps]
        value, grads = loss_and_gradients(model, xb, tb, cfg.loss)
        losses.append(value)
        opt.step(model.params, grads, cfg.learning_rate(step))
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d loss %.6g lr %.3g", step, value, cfg.learning_rate(step))
        if callback is not None:
            callback(step, value, model)
    return TrainResult(model, losses)


# -- application -------------------------------------------------------------


def apply_model(model, img):
    """Filter the luma plane of ``img`` with ``model``; chroma is copied.

    The whole plane goes through the network at once, so there are no tile
    seams. Output luma is rounded half away from zero to 8 bits.
    """
    x = img.y.astype(np.float64) / 255.0
    y = forward(model, x)
    return img.with_luma(to_uint8(y * 255.0))


# -- serialization -----------------------------------------------------------


def save_model(model, path):
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "channels": model.channels,
        "config_hash": model.config_hash,
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
    }
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), np.uint8),
             **{k: model.params[k] for k in PARAM_NAMES})
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_model(path):
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            arrays = {k: np.array(data[k]) for k in PARAM_NAMES}
    except (OSError, ValueError, KeyError, zipfile.BadZipFile, EOFError) as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    if meta.get("format") != FORMAT_NAME or meta.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format {meta.get('format')} v{meta.get('version')}")
    model = IqnetModel(arrays, int(meta["channels"]), meta.get("config_hash", ""))
    return model
