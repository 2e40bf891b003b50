"""The radiance field: positional encoding, density MLP, and the single-layer
color + visibility decoder.

The density network maps an encoded 3D point to a raw density (softplus'd to
sigma >= 0) and a latent vector. The decoder is a single dense layer taking
(latent, encoded direction) to four outputs: sigmoid RGB and a sigmoid
visibility estimate for that direction. Querying a second direction reuses
the latent, so secondary-view visibility costs one extra decoder pass only.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["FieldConfig", "PositionalEncoding", "NeuralField", "save_checkpoint", "load_checkpoint"]


@dataclass(frozen=True)
class PositionalEncoding:
    """Sin/cos frequency encoding of 3-vectors."""

    frequencies: int
    include_input: bool = True

    @property
    def output_dim(self) -> int:
        per_axis = 2 * self.frequencies + (1 if self.include_input else 0)
        return 3 * per_axis

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Encode (..., 3) -> (..., output_dim). Not differentiated: sample
        positions and view directions are constants of each training step."""
        if self.frequencies == 0:
            return x.copy() if self.include_input else np.zeros(x.shape[:-1] + (0,))
        scales = (2.0 ** np.arange(self.frequencies)) * np.pi
        scaled = (x[..., None, :] * scales[:, None]).reshape(x.shape[:-1] + (-1,))
        parts = [x] if self.include_input else []
        parts += [np.sin(scaled), np.cos(scaled)]
        return np.concatenate(parts, axis=-1)


@dataclass(frozen=True)
class FieldConfig:
    width: int = 128
    depth: int = 4
    pos_frequencies: int = 10
    dir_frequencies: int = 4
    include_input: bool = True
    init_seed: int = 0

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class NeuralField:
    """Density MLP plus one-layer radiance/visibility decoder.

    Query counters (in points) are maintained for cost accounting and reset
    via :meth:`reset_query_counts`.
    """

    def __init__(self, config: FieldConfig):
        self.config = config
        self.pos_encoding = PositionalEncoding(config.pos_frequencies, config.include_input)
        self.dir_encoding = PositionalEncoding(config.dir_frequencies, config.include_input)
        self.params: dict[str, Tensor] = {}
        self.f1_queries = 0
        self.f2_queries = 0
        self._init_params()

    def _init_params(self) -> None:
        rng = np.random.default_rng(self.config.init_seed)
        W = self.config.width
        dims = [self.pos_encoding.output_dim] + [W] * self.config.depth
        for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.params[f"f1.layer{i}.weight"] = Tensor(_glorot(rng, n_in, n_out), True)
            self.params[f"f1.layer{i}.bias"] = Tensor(np.zeros(n_out), True)
        self.params["f1.head.weight"] = Tensor(_glorot(rng, W, 1 + W), True)
        head_bias = np.zeros(1 + W)
        head_bias[0] = -1.0  # start with low but nonzero density everywhere
        self.params["f1.head.bias"] = Tensor(head_bias, True)
        f2_in = W + self.dir_encoding.output_dim
        self.params["f2.weight"] = Tensor(_glorot(rng, f2_in, 4), True)
        self.params["f2.bias"] = Tensor(np.zeros(4), True)

    @property
    def param_list(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    @property
    def param_names(self) -> list[str]:
        return sorted(self.params)

    def reset_query_counts(self) -> None:
        self.f1_queries = 0
        self.f2_queries = 0

    def query_density(self, points: np.ndarray) -> tuple[Tensor, Tensor]:
        """(B, 3) points -> (sigma (B,), latent (B, W))."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("query_density got non-finite points")
        self.f1_queries += len(points)
        h = Tensor(self.pos_encoding.encode(points))
        for i in range(self.config.depth):
            h = ad.relu(
                ad.linear(h, self.params[f"f1.layer{i}.weight"], self.params[f"f1.layer{i}.bias"])
            )
        out = ad.linear(h, self.params["f1.head.weight"], self.params["f1.head.bias"])
        sigma = ad.softplus(ad.reshape(out[:, 0:1], (-1,)))
        latent = out[:, 1:]
        return sigma, latent

    def query_radiance(self, latent: Tensor, view_dirs: np.ndarray) -> tuple[Tensor, Tensor]:
        """Latent batch (B, W) + unit direction(s) -> (rgb (B, 3), visibility (B,)).

        `view_dirs` is a single unit 3-vector shared by the batch or one unit
        vector per latent row.
        """
        dirs = np.asarray(view_dirs, dtype=np.float64)
        norms = np.linalg.norm(dirs, axis=-1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("view directions must be unit vectors")
        B = latent.shape[0]
        if dirs.ndim == 1:
            dirs = np.broadcast_to(dirs, (B, 3))
        elif dirs.shape != (B, 3):
            raise ValueError(f"expected direction shape (3,) or ({B}, 3), got {dirs.shape}")
        self.f2_queries += B
        enc = Tensor(self.dir_encoding.encode(dirs))
        x = ad.concat([latent, enc], axis=1)
        out = ad.linear(x, self.params["f2.weight"], self.params["f2.bias"])
        rgb = ad.sigmoid(out[:, 0:3])
        visibility = ad.sigmoid(ad.reshape(out[:, 3:4], (-1,)))
        return rgb, visibility


# --- checkpoint container --------------------------------------------------

_MAGIC = b"VNCK"


def save_checkpoint(path: Path, field: NeuralField, iteration: int) -> None:
    """Flat binary container: magic, JSON header, raw float64 tensors.

    Written atomically (temp file + rename).
    """
    names = field.param_names
    header = {
        "names": names,
        "shapes": [list(field.params[n].shape) for n in names],
        "dtype": "float64",
        "iteration": iteration,
        "config_hash": field.config.config_hash(),
        "config": asdict(field.config),
    }
    blob = json.dumps(header).encode()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(field.params[n].data).tobytes())
    tmp.rename(path)


class CheckpointError(ValueError):
    """Unreadable or incompatible checkpoint."""


def load_checkpoint(path: Path) -> tuple[NeuralField, int]:
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        (length,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(length))
        config = FieldConfig(**header["config"])
        if config.config_hash() != header["config_hash"]:
            raise CheckpointError(
                f"config hash mismatch: header says {header['config_hash']}, "
                f"recomputed {config.config_hash()}"
            )
        field = NeuralField(config)
        for name, shape in zip(header["names"], header["shapes"]):
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n_items), dtype=np.float64).reshape(shape)
            field.params[name] = Tensor(data.copy(), requires_grad=True)
    return field, header["iteration"]
