"""Training loop: ray batching, rendering, loss assembly, Adam, logging,
and checkpointing, plus full-frame test-view rendering.

Each iteration renders a pixel batch from one primary view, picks one other
training view as the secondary, and applies the photometric, sparse-depth,
visibility-prior (gated), and visibility-consistency losses. All randomness
flows through a single seeded generator, so equal seeds give byte-identical
loss logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor
from .dataset import SceneData, save_png, save_depth_png
from .field import FieldConfig, NeuralField, save_checkpoint
from .geometry import Camera, rays_through_pixels
from .losses import (
    LossWeights,
    loss_mse,
    loss_sparse_depth,
    loss_vip,
    loss_vis_consistency,
    total_loss,
)
from .plane_sweep import VisibilityPriorMap
from .render import composite, pixel_visibility_efficient, stratified_sample

__all__ = ["TrainConfig", "TrainResult", "train", "render_view", "render_test_views"]

LOG_COLUMNS = ["iteration", "l_mse", "l_sd", "l_vip", "l_v", "total", "lr"]


@dataclass(frozen=True)
class TrainConfig:
    """Desk-scale training configuration; mirrors the CLI JSON field names."""

    total_iterations: int = 2000
    rays_per_batch: int = 512
    n_samples: int = 64
    sd_rays_per_batch: int = 32
    lambda_mse: float = 1.0
    lambda_sparse_depth: float = 0.1
    lambda_vip: float = 0.001
    lambda_vis_consistency: float = 0.1
    vip_start_fraction: float = 0.4
    lr_base: float = 5e-4
    lr_final: float = 5e-6
    checkpoint_interval: int = 1000
    seed: int = 0
    width: int = 128
    depth: int = 4
    pos_frequencies: int = 10
    dir_frequencies: int = 4
    dense_depth_supervision: bool = False
    dense_depth_weight: float = 0.1

    def __post_init__(self):
        if self.total_iterations <= 0:
            raise ValueError("total_iterations must be positive")
        if not (0.0 <= self.vip_start_fraction <= 1.0):
            raise ValueError("vip_start_fraction must be in [0, 1]")

    @property
    def vip_start_iteration(self) -> int:
        return int(round(self.vip_start_fraction * self.total_iterations))

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            mse=self.lambda_mse,
            sparse_depth=self.lambda_sparse_depth,
            vip=self.lambda_vip,
            vis_consistency=self.lambda_vis_consistency,
            vip_start_iteration=self.vip_start_iteration,
        )

    def field_config(self) -> FieldConfig:
        return FieldConfig(
            width=self.width,
            depth=self.depth,
            pos_frequencies=self.pos_frequencies,
            dir_frequencies=self.dir_frequencies,
            init_seed=self.seed,
        )

    @staticmethod
    def from_json(path_or_text) -> "TrainConfig":
        text = path_or_text
        if isinstance(path_or_text, (str, Path)):
            try:
                if Path(path_or_text).exists():
                    text = Path(path_or_text).read_text()
            except OSError:  # raw JSON text can exceed filename limits
                pass
        return TrainConfig(**json.loads(text))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


@dataclass
class TrainResult:
    field: NeuralField
    checkpoint_path: Path
    log_path: Path


def _validate_priors(
    data: SceneData, priors: dict[tuple[int, int], VisibilityPriorMap]
) -> None:
    for a in data.train_ids:
        for b in data.train_ids:
            if a != b and (a, b) not in priors:
                raise ValueError(f"missing visibility prior for view pair ({a}, {b})")


def _render_pixel_batch(field, cam, pixels, n_samples, rng, with_color=True):
    """Returns (samples, sigma, latent, render output, rgb head output)."""
    origins, dirs = rays_through_pixels(cam, pixels)
    samples = stratified_sample(origins, dirs, cam.z_min, cam.z_max, n_samples, rng=rng)
    sigma, latent = field.query_density(samples.points.reshape(-1, 3))
    rgb = vis_head = None
    if with_color:
        unit = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
        per_sample_dirs = np.repeat(unit, n_samples, axis=0)
        rgb, vis_head = field.query_radiance(latent, per_sample_dirs)
    out = composite(sigma, rgb, samples)
    return samples, latent, out, vis_head


def train(
    data: SceneData,
    priors: dict[tuple[int, int], VisibilityPriorMap],
    config: TrainConfig,
    out_dir: Path,
    dense_depth: dict[int, tuple[np.ndarray, np.ndarray]] | None = None,
) -> TrainResult:
    """Run the full training schedule; writes checkpoint + CSV loss log.

    `dense_depth` (per train view: depth map + valid mask) switches on the
    plane-sweep dense-depth supervision arm in place of the visibility prior
    when `config.dense_depth_supervision` is set.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if len(data.train_ids) < 2:
        raise ValueError("training needs at least 2 views")
    if config.dense_depth_supervision:
        if dense_depth is None:
            raise ValueError("dense_depth maps required for dense-depth supervision")
    else:
        _validate_priors(data, priors)

    field = NeuralField(config.field_config())
    weights = config.loss_weights()
    opt = AdamState(
        field.param_list,
        lr_base=config.lr_base,
        lr_final=config.lr_final,
        decay_steps=config.total_iterations,
        names=field.param_names,
    )
    rng = np.random.default_rng(config.seed)
    train_ids = list(data.train_ids)
    log_path = out_dir / "loss_log.csv"
    ckpt_path = out_dir / "checkpoint.bin"
    (out_dir / "train_config.json").write_text(config.to_json())

    with open(log_path, "w") as log:
        log.write(",".join(LOG_COLUMNS) + "\n")
        for it in range(config.total_iterations):
            primary = train_ids[rng.integers(len(train_ids))]
            others = [v for v in train_ids if v != primary]
            secondary = others[rng.integers(len(others))]
            cam = data.cameras[primary]
            xs = rng.integers(0, cam.width, size=config.rays_per_batch)
            ys = rng.integers(0, cam.height, size=config.rays_per_batch)
            pixels = np.stack([xs, ys], axis=-1).astype(np.float64)

            with Tape() as tape:
                samples, latent, out, vis_head = _render_pixel_batch(
                    field, cam, pixels, config.n_samples, rng
                )
                R, N = config.rays_per_batch, config.n_samples
                l_mse = loss_mse(out.color, data.images[primary][ys, xs])
                l_v = loss_vis_consistency(
                    out.transmittance, ad.reshape(vis_head, (R, N))
                )

                l_vip = None
                if (
                    not config.dense_depth_supervision
                    and weights.vip > 0
                    and it >= weights.vip_start_iteration
                ):
                    t_prime = pixel_visibility_efficient(
                        field, latent, samples, out, data.cameras[secondary]
                    )
                    tau = priors[(primary, secondary)].tau[ys, xs]
                    l_vip = loss_vip(t_prime, tau)

                l_dd = None
                if config.dense_depth_supervision:
                    dd_map, dd_valid = dense_depth[primary]
                    mask = dd_valid[ys, xs]
                    if np.any(mask):
                        pred = out.depth[np.nonzero(mask)[0]]
                        l_dd = loss_sparse_depth(pred, dd_map[ys, xs][mask])

                l_sd = None
                if weights.sparse_depth > 0 and primary in data.sparse_depth:
                    rows = data.sparse_depth[primary]
                    pick = rng.integers(0, len(rows), size=min(config.sd_rays_per_batch, len(rows)))
                    sd_pixels = rows[pick, :2]
                    sd_targets = rows[pick, 2]
                    _, _, sd_out, _ = _render_pixel_batch(
                        field, cam, sd_pixels, config.n_samples, rng, with_color=False
                    )
                    l_sd = loss_sparse_depth(sd_out.depth, sd_targets)

                total = total_loss(l_mse, l_sd, l_vip, l_v, weights, it)
                if l_dd is not None:
                    total = total + config.dense_depth_weight * l_dd
                ad.backward(tape, total)

            lr = ad.adam_step(opt)
            ad.zero_grad(field.param_list)

            row = [
                str(it),
                _fmt(l_mse.item()),
                _fmt(l_sd.item() if l_sd is not None else 0.0),
                _fmt(l_vip.item() if l_vip is not None else 0.0),
                _fmt(l_v.item()),
                _fmt(total.item()),
                _fmt(lr),
            ]
            log.write(",".join(row) + "\n")

            if (it + 1) % config.checkpoint_interval == 0:
                save_checkpoint(ckpt_path, field, it + 1)

    save_checkpoint(ckpt_path, field, config.total_iterations)
    return TrainResult(field=field, checkpoint_path=ckpt_path, log_path=log_path)


def _fmt(v: float) -> str:
    return f"{v:.12e}"


def render_view(
    field: NeuralField,
    cam: Camera,
    n_samples: int,
    chunk: int = 1024,
    secondary_cam: Camera | None = None,
) -> dict[str, np.ndarray]:
    """Full-frame deterministic render (midpoint sampling) of one view.

    Returns color (H, W, 3), depth (H, W), accumulation (H, W); plus the
    secondary-view visibility map t' when `secondary_cam` is given.
    """
    H, W = cam.height, cam.width
    xs, ys = np.meshgrid(np.arange(W), np.arange(H))
    pixels = np.stack([xs, ys], axis=-1).reshape(-1, 2).astype(np.float64)
    color = np.zeros((H * W, 3))
    depth = np.zeros(H * W)
    acc = np.zeros(H * W)
    visibility = np.zeros(H * W) if secondary_cam is not None else None
    for start in range(0, len(pixels), chunk):
        sl = slice(start, min(start + chunk, len(pixels)))
        with Tape():
            origins, dirs = rays_through_pixels(cam, pixels[sl])
            samples = stratified_sample(
                origins, dirs, cam.z_min, cam.z_max, n_samples, jitter=0.5
            )
            sigma, latent = field.query_density(samples.points.reshape(-1, 3))
            unit = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
            rgb, _ = field.query_radiance(latent, np.repeat(unit, n_samples, axis=0))
            out = composite(sigma, rgb, samples)
            color[sl] = out.color.data
            depth[sl] = out.depth.data
            acc[sl] = out.accumulation.data
            if secondary_cam is not None:
                t_prime = pixel_visibility_efficient(field, latent, samples, out, secondary_cam)
                visibility[sl] = t_prime.data
    result = {
        "color": np.clip(color.reshape(H, W, 3), 0.0, 1.0),
        "depth": depth.reshape(H, W),
        "accumulation": acc.reshape(H, W),
    }
    if visibility is not None:
        result["visibility"] = visibility.reshape(H, W)
    return result


def render_test_views(
    field: NeuralField,
    data: SceneData,
    out_dir: Path,
    n_samples: int,
) -> dict:
    """Render every test view (color + depth) and every ordered train-pair
    visibility map; writes PNGs and returns the arrays."""
    out_dir = Path(out_dir)
    (out_dir / "rgb").mkdir(parents=True, exist_ok=True)
    (out_dir / "depth").mkdir(parents=True, exist_ok=True)
    (out_dir / "vis").mkdir(parents=True, exist_ok=True)
    rendered = {"views": {}, "visibility": {}}
    for vid in data.test_ids:
        cam = data.cameras[vid]
        r = render_view(field, cam, n_samples)
        save_png(out_dir / "rgb" / f"{vid:02d}.png", r["color"])
        save_depth_png(out_dir / "depth" / f"{vid:02d}.png", r["depth"], cam.z_max)
        rendered["views"][vid] = r
    for a in data.train_ids:
        for b in data.train_ids:
            if a == b:
                continue
            r = render_view(field, data.cameras[a], n_samples, secondary_cam=data.cameras[b])
            vis = np.clip(r["visibility"], 0.0, 1.0)
            save_png(out_dir / "vis" / f"{a:02d}_{b:02d}.png", vis)
            rendered["visibility"][(a, b)] = vis
    return rendered
