"""Feature-fusion convolutional autoencoder: build, train, extract features.

The encoder runs two parallel convolutions with different receptive fields
over the input, concatenates them into a low-level block, derives a
higher-level block from that, and fuses both by concatenation into the code
layer. The decoder mirrors the twin-branch structure and reconstructs the
input bands with a linear output layer. Spatial size is never reduced.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .cube import HyperCube, normalize_bands
from .nn import (
    AdamState,
    ConvLayer,
    conv_forward_cached,
    adam_step,
    concat_channels,
    conv_backward,
    conv_forward,
    init_weights,
    mse_loss,
)
from .storage import atomic_write_text, load_layers, save_layers

__all__ = [
    "FfcaeConfig",
    "FfcaeModel",
    "build_model",
    "encode",
    "decode",
    "train",
    "extract_dfm",
    "save_model",
    "load_model",
    "write_loss_history",
]

_LAYER_NAMES = ("enc_a", "enc_b", "enc_hi", "dec_a", "dec_b", "dec_out")


@dataclass(frozen=True)
class FfcaeConfig:
    """Hyperparameters of the feature-fusion autoencoder.

    n1/n2 are the twin encoder kernel sizes, n3 the higher-level kernel;
    f1/f2/f3 the matching filter counts. The code layer is the fusion of
    all three blocks, so it carries f1 + f2 + f3 channels.
    """

    n1: int = 3
    n2: int = 5
    n3: int = 3
    f1: int = 8
    f2: int = 8
    f3: int = 16
    epochs: int = 50
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n1", "n2", "n3"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and positive, got {k}")
        for name in ("f1", "f2", "f3"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")

    @property
    def code_channels(self) -> int:
        return self.f1 + self.f2 + self.f3


@dataclass
class FfcaeModel:
    """Trained (or freshly initialized) autoencoder parameters."""

    config: FfcaeConfig
    bands: int
    enc_a: ConvLayer
    enc_b: ConvLayer
    enc_hi: ConvLayer
    dec_a: ConvLayer
    dec_b: ConvLayer
    dec_out: ConvLayer

    def layers(self) -> dict[str, ConvLayer]:
        return {name: getattr(self, name) for name in _LAYER_NAMES}

    def parameter_arrays(self) -> list[np.ndarray]:
        """Weights and biases in declaration order, aliased for updates."""
        out: list[np.ndarray] = []
        for layer in self.layers().values():
            out.append(layer.weights)
            out.append(layer.biases)
        return out


def build_model(config: FfcaeConfig, bands: int) -> FfcaeModel:
    """Seeded construction of all six layers for a given input band count."""
    if bands < 1:
        raise ValueError("bands must be >= 1")
    c = config
    low = c.f1 + c.f2
    code = c.code_channels
    seeds = [int(s) for s in np.random.SeedSequence(c.seed).generate_state(6)]
    return FfcaeModel(
        config=c,
        bands=bands,
        enc_a=init_weights(c.n1, bands, c.f1, seeds[0]),
        enc_b=init_weights(c.n2, bands, c.f2, seeds[1]),
        enc_hi=init_weights(c.n3, low, c.f3, seeds[2]),
        dec_a=init_weights(c.n1, code, c.f1, seeds[3]),
        dec_b=init_weights(c.n2, code, c.f2, seeds[4]),
        dec_out=init_weights(c.n3, low, bands, seeds[5], activation="linear"),
    )


def encode(model: FfcaeModel, image: np.ndarray) -> np.ndarray:
    """Code-layer features: twin low-level blocks fused with the higher level.

    Returns an (H, W, f1+f2+f3) tensor of non-negative activations.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != model.bands:
        raise ValueError(
            f"encode expects (H, W, {model.bands}), got {image.shape}"
        )
    low = concat_channels(
        conv_forward(model.enc_a, image), conv_forward(model.enc_b, image)
    )
    hi = conv_forward(model.enc_hi, low)
    return concat_channels(low, hi)


def decode(model: FfcaeModel, code: np.ndarray) -> np.ndarray:
    """Reconstruct the (H, W, bands) image from code-layer features."""
    code = np.asarray(code, dtype=np.float64)
    if code.ndim != 3 or code.shape[2] != model.config.code_channels:
        raise ValueError(
            f"decode expects (H, W, {model.config.code_channels}), got {code.shape}"
        )
    fused = concat_channels(
        conv_forward(model.dec_a, code), conv_forward(model.dec_b, code)
    )
    return conv_forward(model.dec_out, fused)


def _forward(model: FfcaeModel, x: np.ndarray):
    """Full forward pass keeping every intermediate needed for backprop."""
    a1, cache_a = conv_forward_cached(model.enc_a, x)
    b1, cache_b = conv_forward_cached(model.enc_b, x)
    low = concat_channels(a1, b1)
    hi, cache_hi = conv_forward_cached(model.enc_hi, low)
    code = concat_channels(low, hi)
    d1, cache_da = conv_forward_cached(model.dec_a, code)
    d2, cache_db = conv_forward_cached(model.dec_b, code)
    fused = concat_channels(d1, d2)
    recon, cache_out = conv_forward_cached(model.dec_out, fused)
    return {
        "x": x,
        "low": low,
        "code": code,
        "fused": fused,
        "recon": recon,
        "caches": {
            "enc_a": cache_a,
            "enc_b": cache_b,
            "enc_hi": cache_hi,
            "dec_a": cache_da,
            "dec_b": cache_db,
            "dec_out": cache_out,
        },
    }


def reconstruction_loss_and_grads(
    model: FfcaeModel, x: np.ndarray
) -> tuple[float, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """MSE reconstruction loss and exact parameter gradients for one image.

    The skip connection makes the low-level block feed both the higher
    level and the code layer, so its gradient is the sum of both paths.
    """
    x = np.asarray(x, dtype=np.float64)
    state = _forward(model, x)
    loss, g_recon = mse_loss(state["recon"], x)
    caches = state["caches"]
    f1, f2 = model.config.f1, model.config.f2

    g_fused, gw_out, gb_out = conv_backward(
        model.dec_out, state["fused"], g_recon, caches["dec_out"]
    )
    g_code_a, gw_da, gb_da = conv_backward(
        model.dec_a, state["code"], g_fused[:, :, :f1], caches["dec_a"]
    )
    g_code_b, gw_db, gb_db = conv_backward(
        model.dec_b, state["code"], g_fused[:, :, f1:], caches["dec_b"]
    )
    g_code = g_code_a + g_code_b

    g_low_skip = g_code[:, :, : f1 + f2]
    g_hi = g_code[:, :, f1 + f2 :]
    g_low_deep, gw_hi, gb_hi = conv_backward(
        model.enc_hi, state["low"], g_hi, caches["enc_hi"]
    )
    g_low = g_low_skip + g_low_deep

    _, gw_a, gb_a = conv_backward(model.enc_a, x, g_low[:, :, :f1], caches["enc_a"])
    _, gw_b, gb_b = conv_backward(model.enc_b, x, g_low[:, :, f1:], caches["enc_b"])

    grads = {
        "enc_a": (gw_a, gb_a),
        "enc_b": (gw_b, gb_b),
        "enc_hi": (gw_hi, gb_hi),
        "dec_a": (gw_da, gb_da),
        "dec_b": (gw_db, gb_db),
        "dec_out": (gw_out, gb_out),
    }
    return loss, grads


def _as_tensor(image: HyperCube | np.ndarray) -> np.ndarray:
    data = image.data if isinstance(image, HyperCube) else image
    return np.asarray(data, dtype=np.float64)


def train(
    image1: HyperCube | np.ndarray,
    image2: HyperCube | np.ndarray,
    config: FfcaeConfig,
) -> tuple[FfcaeModel, np.ndarray]:
    """Train one network to reconstruct both images of the pair.

    Each epoch applies one full-image forward/backward/Adam update on image
    1 and then one on image 2. Inputs must already be normalized to [0, 1].
    Returns the model and an (epochs, 2) array of per-epoch losses, one
    column per image. Fully deterministic for a fixed config seed.
    """
    x1 = _as_tensor(image1)
    x2 = _as_tensor(image2)
    if x1.shape != x2.shape:
        raise ValueError(f"image shapes differ: {x1.shape} vs {x2.shape}")
    for name, x in (("image1", x1), ("image2", x2)):
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError(f"{name} is not normalized to [0, 1]")

    model = build_model(config, bands=x1.shape[2])
    params = model.parameter_arrays()
    opt = AdamState(
        shapes=[p.shape for p in params], learning_rate=config.learning_rate
    )

    history = np.zeros((config.epochs, 2), dtype=np.float64)
    for epoch in range(config.epochs):
        for slot, x in enumerate((x1, x2)):
            loss, grads = reconstruction_loss_and_grads(model, x)
            flat = [g for name in _LAYER_NAMES for g in grads[name]]
            adam_step(opt, params, flat)
            history[epoch, slot] = loss
    return model, history


def extract_dfm(
    model: FfcaeModel, image1: HyperCube, image2: HyperCube
) -> tuple[np.ndarray, np.ndarray]:
    """Deep feature maps of both images: normalize each, then encode."""
    for name, img in (("image1", image1), ("image2", image2)):
        if img.bands != model.bands:
            raise ValueError(
                f"{name} has {img.bands} bands, model was trained on {model.bands}"
            )
    dfm1 = encode(model, normalize_bands(image1).data)
    dfm2 = encode(model, normalize_bands(image2).data)
    return dfm1, dfm2


def save_model(model: FfcaeModel, path, extra_meta: dict | None = None) -> None:
    """Write the checkpoint; config and band count ride in the meta block."""
    meta = {"config": asdict(model.config), "bands": model.bands}
    if extra_meta:
        meta.update(extra_meta)
    save_layers(model.layers(), path, meta=meta)


def load_model(path) -> tuple[FfcaeModel, dict]:
    """Load a checkpoint into a model plus whatever metadata it carried."""
    layers, meta = load_layers(path)
    missing = [name for name in _LAYER_NAMES if name not in layers]
    if missing:
        raise ValueError(f"{path}: checkpoint lacks layers {missing}")
    if "config" not in meta or "bands" not in meta:
        raise ValueError(f"{path}: checkpoint metadata lacks config/bands")
    config = FfcaeConfig(**meta["config"])
    model = FfcaeModel(config=config, bands=int(meta["bands"]), **layers)
    if model.enc_a.in_channels != model.bands:
        raise ValueError(f"{path}: band count disagrees with encoder topology")
    return model, meta


def write_loss_history(history: np.ndarray, path) -> None:
    """Per-epoch reconstruction losses as CSV (epoch, loss_image1, loss_image2)."""
    lines = ["epoch,loss_image1,loss_image2"]
    for i, (l1, l2) in enumerate(np.asarray(history), start=1):
        lines.append(f"{i},{l1:.12e},{l2:.12e}")
    atomic_write_text(path, "\n".join(lines) + "\n")
