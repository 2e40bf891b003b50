"""Command-line pipeline: scene generation, prior computation, training,
rendering, evaluation, and the ablation sweep.

Every subcommand is file-based and deterministic under --seed. Exit codes:
0 ok, 2 usage, 3 data error, 4 numeric failure. Errors are emitted to stderr
as a single line `vipnerf: error: <category>: <reason>`.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .dataset import (
    DatasetError,
    PRESETS,
    export_dataset,
    load_dataset,
    make_preset,
)
from .field import CheckpointError, load_checkpoint
from .metrics import MetricsReport, depth_rmse_srocc, prior_prf, psnr, ssim
from .plane_sweep import (
    build_psv,
    load_prior,
    prior_for_all_pairs,
    psv_dense_depth,
    sample_plane_depths,
    save_prior,
)
from .train import TrainConfig, render_test_views, train


def _fail(category: str, message: str, code: int) -> None:
    click.echo(f"vipnerf: error: {category}: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DatasetError, CheckpointError, FileNotFoundError) as e:
            _fail("data", str(e), 3)
        except (FloatingPointError, ZeroDivisionError) as e:
            _fail("numeric", str(e), 4)
        except ValueError as e:
            _fail("data", str(e), 3)

    return wrapper


@click.group()
def main():
    """Sparse-view radiance fields with plane-sweep visibility priors."""


@main.command("generate-scene")
@click.option("--preset", type=click.Choice(PRESETS), required=True)
@click.option("--views", default=2, show_default=True, help="Number of training views.")
@click.option("--test-views", default=8, show_default=True)
@click.option("--resolution", default=64, show_default=True)
@click.option("--k-sparse", default=200, show_default=True, help="Sparse depth samples per view.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guarded
def generate_scene(preset, views, test_views, resolution, k_sparse, seed, out):
    """Write a synthetic dataset (images, depth, visibility, cameras, split)."""
    scene, cameras, train_ids, test_ids = make_preset(
        preset, n_train_views=views, n_test_views=test_views, resolution=resolution, seed=seed
    )
    export_dataset(scene, cameras, train_ids, test_ids, k_sparse, out, seed=seed)
    click.echo(f"wrote dataset with {len(train_ids)} train / {len(test_ids)} test views to {out}")


@main.command("compute-prior")
@click.option("--dataset", "dataset_dir", type=click.Path(path_type=Path), required=True)
@click.option("--gamma", default=10.0, show_default=True)
@click.option("--planes", default=64, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guarded
def compute_prior(dataset_dir, gamma, planes, out):
    """Compute one visibility prior per ordered pair of training views."""
    data = load_dataset(dataset_dir)
    priors = prior_for_all_pairs(data.images, data.cameras, data.train_ids, D=planes, gamma=gamma)
    for prior in priors:
        save_prior(prior, out)
    click.echo(f"wrote {len(priors)} prior maps to {out}")


def _load_priors(priors_dir: Path) -> dict:
    priors = {}
    for png in sorted(Path(priors_dir).glob("*.png")):
        p = load_prior(png)
        priors[(p.primary_view_id, p.secondary_view_id)] = p
    if not priors:
        raise DatasetError(f"no prior maps found in {priors_dir}")
    return priors


def _dense_depth_maps(data, planes: int) -> dict:
    """Plane-sweep argmin depth per train view, against its next train view."""
    maps = {}
    for i, a in enumerate(data.train_ids):
        b = data.train_ids[(i + 1) % len(data.train_ids)]
        cam = data.cameras[a]
        psv = build_psv(
            data.images[a],
            cam,
            data.images[b],
            data.cameras[b],
            sample_plane_depths(cam.z_min, cam.z_max, planes),
        )
        maps[a] = psv_dense_depth(psv)
    return maps


@main.command("train")
@click.option("--dataset", "dataset_dir", type=click.Path(path_type=Path), required=True)
@click.option("--priors", "priors_dir", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--iterations", type=int, default=None, help="Override total iterations.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--psv-depth", is_flag=True, help="Supervise with plane-sweep dense depth instead of the visibility prior.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guarded
def train_cmd(dataset_dir, priors_dir, config_path, iterations, seed, psv_depth, out):
    """Train a radiance field; writes checkpoint.bin and loss_log.csv."""
    from dataclasses import replace

    data = load_dataset(dataset_dir)
    config = TrainConfig.from_json(config_path) if config_path else TrainConfig()
    if iterations is not None:
        config = replace(config, total_iterations=iterations)
    if seed is not None:
        config = replace(config, seed=seed)
    priors = _load_priors(priors_dir)
    dense_depth = None
    if psv_depth:
        # Dense-depth supervision replaces the visibility machinery wholesale,
        # so the visibility-head consistency term goes with the hinge.
        config = replace(
            config,
            dense_depth_supervision=True,
            lambda_vip=0.0,
            lambda_vis_consistency=0.0,
        )
        dense_depth = _dense_depth_maps(data, next(iter(priors.values())).plane_count)
    result = train(data, priors, config, out, dense_depth=dense_depth)
    click.echo(f"trained {config.total_iterations} iterations -> {result.checkpoint_path}")


@main.command("render")
@click.option("--dataset", "dataset_dir", type=click.Path(path_type=Path), required=True)
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--n-samples", default=None, type=int, help="Samples per ray (default: train config).")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guarded
def render_cmd(dataset_dir, checkpoint, n_samples, out):
    """Render all test views and train-pair visibility maps from a checkpoint."""
    data = load_dataset(dataset_dir)
    field, iteration = load_checkpoint(checkpoint)
    cfg_path = Path(checkpoint).parent / "train_config.json"
    if n_samples is None:
        n_samples = TrainConfig.from_json(cfg_path).n_samples if cfg_path.exists() else 64
    render_test_views(field, data, out, n_samples)
    click.echo(f"rendered {len(data.test_ids)} test views (iteration {iteration}) to {out}")


@main.command("evaluate")
@click.option("--dataset", "dataset_dir", type=click.Path(path_type=Path), required=True)
@click.option("--renders", "renders_dir", type=click.Path(path_type=Path), required=True)
@click.option("--priors", "priors_dir", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guarded
def evaluate_cmd(dataset_dir, renders_dir, priors_dir, out):
    """Compare renders (and optionally priors) against ground truth; write metrics.json."""
    from .dataset import load_depth_png, load_png

    data = load_dataset(dataset_dir)
    report = MetricsReport()
    psnrs, ssims, rmses, sroccs = [], [], [], []
    for vid in data.test_ids:
        pred = load_png(Path(renders_dir) / "rgb" / f"{vid:02d}.png")
        p = psnr(pred, data.images[vid])
        s = ssim(pred, data.images[vid])
        depth_file = Path(renders_dir) / "depth" / f"{vid:02d}.png"
        rmse = srocc = None
        if depth_file.exists():
            rmse, srocc = depth_rmse_srocc(load_depth_png(depth_file), data.depths[vid])
            rmses.append(rmse)
            sroccs.append(srocc)
        psnrs.append(p)
        ssims.append(s)
        report.per_view[str(vid)] = {
            "psnr": None if math.isinf(p) else p,
            "psnr_infinite": math.isinf(p),
            "ssim": s,
            "depth_rmse": rmse,
            "depth_srocc": srocc,
        }
    report.psnr, report.psnr_infinite = MetricsReport.aggregate_psnr(psnrs)
    report.ssim = float(np.mean(ssims))
    if rmses:
        report.depth_rmse = float(np.mean(rmses))
        report.depth_srocc = float(np.mean(sroccs))

    if priors_dir is not None:
        precisions, recalls, f1s = [], [], []
        for (a, b), prior in _load_priors(Path(priors_dir)).items():
            if (a, b) in data.visibility:
                p, r, f1 = prior_prf(prior.tau, data.visibility[(a, b)])
                if p is not None:
                    precisions.append(p)
                if r is not None:
                    recalls.append(r)
                if f1 is not None:
                    f1s.append(f1)
        if precisions:
            report.prior_precision = float(np.mean(precisions))
        if recalls:
            report.prior_recall = float(np.mean(recalls))
        if f1s:
            report.prior_f1 = float(np.mean(f1s))

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.save(out)
    click.echo(f"wrote {out}")


ABLATION_ARMS = ("full", "no-sparse-depth", "no-dense-visibility")


@main.command("ablate")
@click.option("--dataset", "dataset_dir", type=click.Path(path_type=Path), required=True)
@click.option("--priors", "priors_dir", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_guarded
def ablate_cmd(dataset_dir, priors_dir, config_path, seed, out):
    """Run the full model and the two single-prior ablation arms; emit a table."""
    from dataclasses import replace

    data = load_dataset(dataset_dir)
    priors = _load_priors(priors_dir)
    base = TrainConfig.from_json(config_path) if config_path else TrainConfig()
    base = replace(base, seed=seed)
    out = Path(out)
    rows = []
    for arm in ABLATION_ARMS:
        config = base
        if arm == "no-sparse-depth":
            config = replace(base, lambda_sparse_depth=0.0)
        elif arm == "no-dense-visibility":
            config = replace(base, lambda_vip=0.0, lambda_vis_consistency=0.0)
        arm_dir = out / arm
        result = train(data, priors, config, arm_dir)
        rendered = render_test_views(result.field, data, arm_dir / "renders", config.n_samples)
        psnrs = [
            psnr(rendered["views"][v]["color"], data.images[v]) for v in data.test_ids
        ]
        ssims = [
            ssim(rendered["views"][v]["color"], data.images[v]) for v in data.test_ids
        ]
        mean_psnr, inf_flag = MetricsReport.aggregate_psnr(psnrs)
        rows.append(
            {
                "arm": arm,
                "psnr": mean_psnr,
                "psnr_infinite": inf_flag,
                "ssim": float(np.mean(ssims)),
            }
        )
        click.echo(f"{arm}: psnr={rows[-1]['psnr']} ssim={rows[-1]['ssim']:.4f}")
    (out / "ablation.json").write_text(json.dumps(rows, indent=1))
    click.echo(f"wrote {out / 'ablation.json'}")


if __name__ == "__main__":
    main()
