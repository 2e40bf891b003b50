"""Ray sampling and differentiable volume rendering.

Transmittance uses the exclusive running sum of delta*sigma; weights are
T * (1 - exp(-delta*sigma)). The last interval runs to the far bound, so
accumulated weight plus the terminal transmittance is exactly one.

Secondary-view pixel visibility comes in two flavors: the efficient decoder
head (one extra decoder pass, latent reused) and the naive oracle that
marches a secondary ray to every sample point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .geometry import Camera, Ray

__all__ = [
    "RaySamples",
    "RenderOutput",
    "stratified_depths",
    "stratified_sample",
    "composite",
    "pixel_visibility_efficient",
    "pixel_visibility_naive",
]


@dataclass(frozen=True)
class RaySamples:
    """Per-ray sample depths, intervals, and 3D positions for a ray batch."""

    origins: np.ndarray  # (R, 3)
    directions: np.ndarray  # (R, 3)
    z: np.ndarray  # (R, N), strictly increasing per ray
    deltas: np.ndarray  # (R, N); deltas[:, -1] = z_max - z[:, -1]
    points: np.ndarray  # (R, N, 3)

    @property
    def n_rays(self) -> int:
        return self.z.shape[0]

    @property
    def n_samples(self) -> int:
        return self.z.shape[1]


@dataclass
class RenderOutput:
    """Everything compositing produces, kept on the tape for training."""

    transmittance: Tensor  # (R, N)
    weights: Tensor  # (R, N)
    color: Tensor | None  # (R, 3)
    depth: Tensor  # (R,)
    accumulation: Tensor  # (R,) = sum of weights
    terminal_transmittance: Tensor  # (R,) = T_{N+1}


def stratified_depths(
    z_min: float,
    z_max: float,
    n_samples: int,
    n_rays: int,
    rng: np.random.Generator | None = None,
    jitter: float | None = None,
) -> np.ndarray:
    """One uniform jitter per equal bin of [z_min, z_max]; (R, N) depths.

    Pass `jitter` (e.g. 0.5 for bin midpoints) for a deterministic layout,
    otherwise draws from `rng`.
    """
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples per ray, got {n_samples}")
    edges = np.linspace(z_min, z_max, n_samples + 1)
    if jitter is not None:
        u = np.full((n_rays, n_samples), float(jitter))
    else:
        if rng is None:
            raise ValueError("either rng or jitter must be given")
        u = rng.uniform(size=(n_rays, n_samples))
    return edges[:-1] + u * (edges[1:] - edges[:-1])


def stratified_sample(
    origins: np.ndarray,
    directions: np.ndarray,
    z_min: float,
    z_max: float,
    n_samples: int,
    rng: np.random.Generator | None = None,
    jitter: float | None = None,
) -> RaySamples:
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    z = stratified_depths(z_min, z_max, n_samples, len(origins), rng, jitter)
    deltas = np.empty_like(z)
    deltas[:, :-1] = np.diff(z, axis=1)
    deltas[:, -1] = z_max - z[:, -1]
    points = origins[:, None, :] + z[..., None] * directions[:, None, :]
    return RaySamples(origins, directions, z, deltas, points)


def sample_ray(ray: Ray, cam: Camera, n_samples: int, rng=None, jitter=None) -> RaySamples:
    """Single-ray convenience wrapper using the camera's depth bounds."""
    return stratified_sample(
        ray.origin, ray.direction, cam.z_min, cam.z_max, n_samples, rng, jitter
    )


def composite(sigma: Tensor, color: Tensor | None, samples: RaySamples) -> RenderOutput:
    """Volume rendering of a ray batch.

    `sigma` is (R, N) (or flat (R*N,)), `color` (R, N, 3) or None to skip
    color compositing (depth-only supervision).
    """
    R, N = samples.n_rays, samples.n_samples
    if sigma.size != R * N:
        raise ad.ShapeError(f"sigma has {sigma.size} entries, expected {R}x{N}")
    if np.any(sigma.data < 0):
        raise ValueError("negative density violates the field contract")
    sigma = ad.reshape(sigma, (R, N))
    ds = sigma * Tensor(samples.deltas)
    transmittance = ad.exp(-ad.exclusive_cumsum(ds, axis=1))
    alpha = 1.0 - ad.exp(-ds)
    weights = transmittance * alpha
    accumulation = ad.tensor_sum(weights, axis=1)
    terminal = ad.exp(-ad.tensor_sum(ds, axis=1))
    depth = ad.tensor_sum(weights * Tensor(samples.z), axis=1)
    out_color = None
    if color is not None:
        color = ad.reshape(color, (R, N, 3))
        out_color = ad.tensor_sum(ad.reshape(weights, (R, N, 1)) * color, axis=1)
    return RenderOutput(transmittance, weights, out_color, depth, accumulation, terminal)


def secondary_view_dirs(samples: RaySamples, secondary_cam: Camera) -> np.ndarray:
    """Unit vectors from the secondary camera center to every sample point."""
    v = samples.points - secondary_cam.center
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def pixel_visibility_efficient(
    field,
    latent: Tensor,
    samples: RaySamples,
    out: RenderOutput,
    secondary_cam: Camera,
) -> Tensor:
    """t' = sum_i w_i * vis_head(h_i, v'_i): N decoder queries, no density re-query.

    `latent` is the (R*N, W) latent batch already produced while rendering
    the primary rays.
    """
    R, N = samples.n_rays, samples.n_samples
    dirs = secondary_view_dirs(samples, secondary_cam).reshape(-1, 3)
    _, vis = field.query_radiance(latent, dirs)
    return ad.tensor_sum(out.weights * ad.reshape(vis, (R, N)), axis=1)


def _density_values(field, points: np.ndarray) -> np.ndarray:
    # A private tape keeps these value-only queries off the caller's graph
    # (and off the default tape, which would otherwise grow unboundedly).
    with Tape():
        result = field.query_density(points)
    sigma = result[0] if isinstance(result, tuple) else result
    return sigma.data if isinstance(sigma, Tensor) else np.asarray(sigma, dtype=np.float64)


def pixel_visibility_naive(
    field,
    samples: RaySamples,
    weights: np.ndarray,
    secondary_cam: Camera,
    n_march: int,
    rng: np.random.Generator | None = None,
    jitter: float | None = 0.5,
) -> np.ndarray:
    """Oracle t': march a secondary ray to every sample point (N*M density queries).

    Secondary transmittance T'_i = exp(-sum delta' * sigma') along the segment
    from the secondary camera center to p_i; points behind the secondary
    camera get T'_i = 0.
    """
    if n_march < 2:
        raise ValueError(f"need at least 2 marching samples, got {n_march}")
    R, N = samples.n_rays, samples.n_samples
    to_points = samples.points - secondary_cam.center  # (R, N, 3)
    lengths = np.linalg.norm(to_points, axis=-1)
    cam_z = to_points @ secondary_cam.rotation[:, 2]
    in_front = cam_z > 1e-9

    # Fractional stratified positions along each segment, shared across rays.
    u = stratified_depths(0.0, 1.0, n_march, R * N, rng=rng, jitter=jitter)
    du = np.empty_like(u)
    du[:, :-1] = np.diff(u, axis=1)
    du[:, -1] = 1.0 - u[:, -1]
    seg = to_points.reshape(R * N, 1, 3)
    march_points = secondary_cam.center + u[..., None] * seg
    sigma = _density_values(field, march_points.reshape(-1, 3)).reshape(R * N, n_march)
    optical = (sigma * du).sum(axis=1) * lengths.reshape(-1)
    t_sec = np.exp(-optical).reshape(R, N)
    t_sec[~in_front] = 0.0
    return (np.asarray(weights) * t_sec).sum(axis=1)
