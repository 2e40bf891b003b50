"""Sparse-input view synthesis with plane-sweep visibility priors."""

from .autodiff import AdamState, Tape, Tensor, adam_step, backward
from .dataset import SceneData, export_dataset, load_dataset, make_preset
from .estimator import SparseViewRadianceField
from .field import FieldConfig, NeuralField, load_checkpoint, save_checkpoint
from .geometry import Camera, Ray, project, ray_through_pixel, warp_at_depth
from .losses import LossWeights
from .metrics import MetricsReport, depth_rmse_srocc, prior_prf, psnr, ssim
from .plane_sweep import (
    build_psv,
    prior_for_all_pairs,
    psv_dense_depth,
    sample_plane_depths,
    visibility_prior,
)
from .render import composite, pixel_visibility_efficient, pixel_visibility_naive, stratified_sample
from .scene import AnalyticScene, Box, Sphere, ground_truth_visibility, raycast_ground_truth
from .train import TrainConfig, render_test_views, render_view, train

__version__ = "0.1.0"
