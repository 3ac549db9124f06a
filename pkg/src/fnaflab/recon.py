"""Small trainable encoder-decoder reconstruction model.

The reference model is a 3-level conv encoder-decoder (channels 8/16/32,
3x3 kernels) with skip connections and a global input-to-output residual,
so a zero-initialized output layer makes the model an exact passthrough.
Parameters live in one flat vector; gradients come from hand-written
reverse-mode passes and training is plain SGD with a fixed step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import grids, nn
from .errors import ConfigError, DivergenceError, NumericError, ParseError
from .seeding import derive_rng

CKPT_FORMAT = "CKPT v1"


@dataclass(frozen=True)
class Architecture:
    channels: tuple[int, int, int] = (8, 16, 32)
    in_channels: int = 1


@dataclass(frozen=True)
class LossSpec:
    kind: str = "l1"  # "l1" or "ssim"
    reduction: str = "mean"

    def __post_init__(self):
        if self.kind not in ("l1", "ssim"):
            raise ConfigError(f"unknown loss kind {self.kind!r}")
        if self.reduction != "mean":
            raise ConfigError(f"unsupported reduction {self.reduction!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 4
    learning_rate: float = 0.05
    seed: int = 0
    loss: LossSpec = field(default_factory=LossSpec)

    def __post_init__(self):
        if self.learning_rate <= 0 and self.epochs > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


class ReconModel:
    """Encoder-decoder over single-channel images with a residual base."""

    def __init__(self, arch: Architecture = Architecture(), seed: int = 0,
                 dtype=np.float32):
        c0, c1, c2 = arch.channels
        cin = arch.in_channels
        self.arch = arch
        self.seed = seed
        layer_shapes = {
            "enc0": ((c0, cin, 3, 3), (c0,)),
            "enc1": ((c1, c0, 3, 3), (c1,)),
            "bott": ((c2, c1, 3, 3), (c2,)),
            "dec1": ((c1, c2 + c1, 3, 3), (c1,)),
            "dec0": ((c0, c1 + c0, 3, 3), (c0,)),
            "out": ((cin, c0, 3, 3), (cin,)),
        }
        self.params = nn.ParamVector(layer_shapes, dtype=dtype)
        self.params.he_init(derive_rng(seed, "recon-init"), skip=("out",))

    @property
    def dtype(self):
        return self.params.dtype

    @property
    def n_params(self) -> int:
        return self.params.size

    def _conv(self, name: str, x: np.ndarray):
        out, xp = nn.conv3x3_forward(x, self.params.weight(name), self.params.bias(name))
        return nn.check_finite(name, out), xp

    def forward(self, batch: np.ndarray, want_cache: bool = False):
        """Forward pass over a (n, h, w) batch; returns (n, h, w) output."""
        xb = np.ascontiguousarray(batch, dtype=self.dtype)
        if xb.ndim != 3:
            raise ConfigError(f"expected (n, h, w) batch, got shape {xb.shape}")
        n, h, w = xb.shape
        ph, pw = (-h) % 4, (-w) % 4
        x0 = np.zeros((n, 1, h + ph, w + pw), dtype=self.dtype)
        x0[:, 0, :h, :w] = xb

        e0_pre, e0_xp = self._conv("enc0", x0)
        e0, e0_mask = nn.relu_forward(e0_pre)
        p0 = nn.avgpool2_forward(e0)
        e1_pre, e1_xp = self._conv("enc1", p0)
        e1, e1_mask = nn.relu_forward(e1_pre)
        p1 = nn.avgpool2_forward(e1)
        bt_pre, bt_xp = self._conv("bott", p1)
        bt, bt_mask = nn.relu_forward(bt_pre)
        u1 = nn.upsample2_forward(bt)
        c1 = np.concatenate([u1, e1], axis=1)
        d1_pre, d1_xp = self._conv("dec1", c1)
        d1, d1_mask = nn.relu_forward(d1_pre)
        u0 = nn.upsample2_forward(d1)
        c0 = np.concatenate([u0, e0], axis=1)
        d0_pre, d0_xp = self._conv("dec0", c0)
        d0, d0_mask = nn.relu_forward(d0_pre)
        r, out_xp = self._conv("out", d0)

        recon = xb + r[:, 0, :h, :w]
        if not want_cache:
            return recon
        cache = {
            "shape": (n, h, w, ph, pw),
            "e0_xp": e0_xp, "e0_mask": e0_mask,
            "e1_xp": e1_xp, "e1_mask": e1_mask,
            "bt_xp": bt_xp, "bt_mask": bt_mask,
            "d1_xp": d1_xp, "d1_mask": d1_mask,
            "d0_xp": d0_xp, "d0_mask": d0_mask,
            "out_xp": out_xp,
        }
        return recon, cache

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        """Backprop a (n, h, w) output gradient to a flat parameter gradient."""
        n, h, w, ph, pw = cache["shape"]
        grad = self.params.new_grad()
        arch = self.arch
        c0ch, c1ch, _ = arch.channels

        dr = np.zeros((n, 1, h + ph, w + pw), dtype=self.dtype)
        dr[:, 0, :h, :w] = np.asarray(dout, dtype=self.dtype)

        def conv_back(name, d, xp):
            dx, dw, db = nn.conv3x3_backward(d, xp, self.params.weight(name))
            self.params.weight(name, grad)[...] = dw
            self.params.bias(name, grad)[...] = db
            return dx

        dd0 = conv_back("out", dr, cache["out_xp"])
        dd0 = nn.relu_backward(dd0, cache["d0_mask"])
        dc0 = conv_back("dec0", dd0, cache["d0_xp"])
        du0, de0_skip = dc0[:, :c1ch], dc0[:, c1ch:]
        dd1 = nn.upsample2_backward(du0)
        dd1 = nn.relu_backward(dd1, cache["d1_mask"])
        dc1 = conv_back("dec1", dd1, cache["d1_xp"])
        du1, de1_skip = dc1[:, : arch.channels[2]], dc1[:, arch.channels[2] :]
        dbt = nn.upsample2_backward(du1)
        dbt = nn.relu_backward(dbt, cache["bt_mask"])
        dp1 = conv_back("bott", dbt, cache["bt_xp"])
        de1 = nn.avgpool2_backward(dp1) + de1_skip
        de1 = nn.relu_backward(de1, cache["e1_mask"])
        dp0 = conv_back("enc1", de1, cache["e1_xp"])
        de0 = nn.avgpool2_backward(dp0) + de0_skip
        de0 = nn.relu_backward(de0, cache["e0_mask"])
        conv_back("enc0", de0, cache["e0_xp"])
        return grad

    def reconstruct(self, image) -> np.ndarray:
        """Reconstruct a single 2-D image; output in float64."""
        img = grids.as_image(image)
        out = self.forward(img[None])
        return out[0].astype(np.float64)

    def reconstruct_batch(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(np.asarray(batch))

    def clone_params(self) -> np.ndarray:
        return self.params.data.copy()

    def set_params(self, data: np.ndarray) -> None:
        self.params.data[...] = data


def reconstruct(model, image) -> np.ndarray:
    """Module-level convenience wrapper around ``model.reconstruct``."""
    return model.reconstruct(image)


def loss_and_output_grad(recon_batch: np.ndarray, target_batch: np.ndarray,
                         spec: LossSpec) -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to the reconstruction."""
    r = np.asarray(recon_batch, dtype=np.float64)
    t = np.asarray(target_batch, dtype=np.float64)
    if r.shape != t.shape:
        raise ConfigError(f"batch shape mismatch: {r.shape} vs {t.shape}")
    if spec.kind == "l1":
        diff = r - t
        value = float(np.mean(np.abs(diff)))
        dout = np.sign(diff) / diff.size  # subgradient at 0 is 0
        return value, dout
    # SSIM loss: 1 - mean per-sample SSIM.
    n = r.shape[0]
    total = 0.0
    dout = np.zeros_like(r)
    for i in range(n):
        value_i, grad_i = grids.ssim_and_grad(r[i], t[i])
        total += value_i
        dout[i] = -grad_i / n
    return 1.0 - total / n, dout


def loss_and_grad(model: ReconModel, batch: Sequence[tuple[np.ndarray, np.ndarray]],
                  loss: LossSpec) -> tuple[float, np.ndarray]:
    """Batch loss and flat parameter gradient by reverse-mode differentiation."""
    if len(batch) == 0:
        raise ConfigError("batch must be nonempty")
    xb = np.stack([np.asarray(x, dtype=np.float64) for x, _ in batch])
    yb = np.stack([np.asarray(y, dtype=np.float64) for _, y in batch])
    recon_b, cache = model.forward(xb, want_cache=True)
    value, dout = loss_and_output_grad(recon_b.astype(np.float64), yb, loss)
    if not np.isfinite(value):
        raise NumericError(f"non-finite {loss.kind} loss")
    grad = model.backward(dout, cache)
    return value, grad


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_val_loss: float


def validation_loss(model: ReconModel, pairs, loss: LossSpec,
                    batch_size: int = 8) -> float:
    """Mean reconstruction loss over (input, target) pairs."""
    total = 0.0
    count = 0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        xb = np.stack([np.asarray(x, dtype=np.float64) for x, _ in chunk])
        yb = np.stack([np.asarray(y, dtype=np.float64) for _, y in chunk])
        recon_b = model.forward(xb).astype(np.float64)
        value, _ = loss_and_output_grad(recon_b, yb, loss)
        total += value * len(chunk)
        count += len(chunk)
    return total / count


def train_standard(model: ReconModel, train_pairs, val_pairs,
                   cfg: TrainConfig) -> TrainResult:
    """SGD training; keeps the checkpoint with the best validation loss.

    ``train_pairs``/``val_pairs`` are sequences of (input, target) images.
    The model is left holding the best-validation parameters.
    """
    if len(train_pairs) == 0 or len(val_pairs) == 0:
        raise ConfigError("train and validation sets must be nonempty")
    history: list[dict] = []
    best = (np.inf, -1, model.clone_params())
    initial_loss = None
    for epoch in range(cfg.epochs):
        rng = derive_rng(cfg.seed, "shuffle", epoch)
        order = rng.permutation(len(train_pairs))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_pairs[i] for i in order[start : start + cfg.batch_size]]
            value, grad = loss_and_grad(model, batch, cfg.loss)
            if initial_loss is None:
                initial_loss = max(value, 1e-12)
            if value > 1e3 * initial_loss:
                raise DivergenceError(
                    f"train loss {value:.3g} exceeds 1000x the initial loss"
                )
            model.params.data -= np.asarray(cfg.learning_rate, dtype=model.dtype) * grad
            epoch_losses.append(value)
        val_loss = validation_loss(model, val_pairs, cfg.loss)
        history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_losses)),
                "val_recon_loss": val_loss,
            }
        )
        if val_loss < best[0]:
            best = (val_loss, epoch, model.clone_params())
    if best[1] >= 0:
        model.set_params(best[2])
    return TrainResult(history=history, best_epoch=best[1], best_val_loss=best[0])


def save_checkpoint(stem, model: ReconModel, epoch: int = -1,
                    val_loss: float = float("nan"), mode: str = "standard") -> Path:
    """CKPT v1: JSON header + raw little-endian float32 parameter payload."""
    stem = Path(stem)
    header = {
        "format": CKPT_FORMAT,
        "model": "recon",
        "architecture": {
            "channels": list(model.arch.channels),
            "in_channels": model.arch.in_channels,
        },
        "seed": model.seed,
        "epoch": epoch,
        "val_loss": None if np.isnan(val_loss) else float(val_loss),
        "mode": mode,
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".json").write_text(json.dumps(header, sort_keys=True) + "\n")
    payload = np.ascontiguousarray(model.params.data, dtype="<f4")
    stem.with_suffix(".bin").write_bytes(payload.tobytes())
    return stem.with_suffix(".json")


def load_checkpoint(stem, dtype=np.float32) -> tuple[ReconModel, dict]:
    """Rebuild a model from a CKPT v1 pair; returns (model, header)."""
    stem = Path(stem)
    if stem.suffix == ".json":
        stem = stem.with_suffix("")
    try:
        header = json.loads(stem.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read checkpoint header {stem}.json: {exc}") from exc
    if header.get("format") != CKPT_FORMAT or header.get("model") != "recon":
        raise ParseError(f"{stem}.json is not a {CKPT_FORMAT} recon checkpoint")
    arch = Architecture(
        channels=tuple(header["architecture"]["channels"]),
        in_channels=int(header["architecture"]["in_channels"]),
    )
    model = ReconModel(arch, seed=int(header["seed"]), dtype=dtype)
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f4")
    if raw.size != model.n_params:
        raise ParseError(
            f"checkpoint payload has {raw.size} parameters, expected {model.n_params}"
        )
    model.set_params(raw.astype(model.dtype))
    return model, header
