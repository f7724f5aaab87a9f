"""Differentiable parametric generators and their render maps.

Two generators are provided:

  * IdentityLatent -- the parameter vector is the rendered view, for
    experiments that optimise a latent point directly.
  * SplatGenerator -- a scene of anisotropic 2D Gaussian splats rasterised
    with front-to-back alpha compositing and hand-derived analytic gradients
    for every parameter except the depth sort key.

A View is an affine map from scene coordinates to image coordinates. Splat
footprints are evaluated at pixel centers pulled back into scene space, so
parameter gradients never touch the camera matrix.

Constraints are kept by construction: per-axis standard deviations are
exp(log_scale) and opacity is sigmoid(logit_opacity). Colors and background
live in [0, 1] and are clamped by the generator's parameter setter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError


@dataclass
class Splat2D:
    """One anisotropic Gaussian primitive in scene units."""

    center: np.ndarray        # (2,)
    log_scale: np.ndarray     # (2,); per-axis std-dev is exp(log_scale)
    rotation: float           # radians
    color: np.ndarray         # (C,), values in [0, 1]
    logit_opacity: float      # opacity is sigmoid(logit_opacity)
    depth: float = 0.0        # sort key only; not differentiated

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        self.log_scale = np.asarray(self.log_scale, dtype=float).reshape(2)
        self.color = np.asarray(self.color, dtype=float).ravel()


@dataclass
class SplatScene:
    splats: list[Splat2D]
    background: np.ndarray    # (C,), values in [0, 1]

    def __post_init__(self):
        self.background = np.asarray(self.background, dtype=float).ravel()

    @property
    def channels(self) -> int:
        return self.background.shape[0]

    def to_dict(self) -> dict:
        return {
            "background": self.background.tolist(),
            "splats": [
                {
                    "center": s.center.tolist(),
                    "log_scale": s.log_scale.tolist(),
                    "rotation": float(s.rotation),
                    "color": s.color.tolist(),
                    "logit_opacity": float(s.logit_opacity),
                    "depth": float(s.depth),
                }
                for s in self.splats
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplatScene":
        splats = [
            Splat2D(
                center=s["center"],
                log_scale=s["log_scale"],
                rotation=float(s["rotation"]),
                color=s["color"],
                logit_opacity=float(s["logit_opacity"]),
                depth=float(s.get("depth", 0.0)),
            )
            for s in d["splats"]
        ]
        return cls(splats=splats, background=np.asarray(d["background"], dtype=float))


@dataclass(frozen=True)
class View:
    """Affine camera: image_point = affine[:, :2] @ scene_point + affine[:, 2]."""

    affine: np.ndarray        # (2, 3)
    width: int
    height: int

    def __post_init__(self):
        a = np.asarray(self.affine, dtype=float).reshape(2, 3)
        a.flags.writeable = False
        object.__setattr__(self, "affine", a)

    @property
    def linear(self) -> np.ndarray:
        return self.affine[:, :2]

    @property
    def offset(self) -> np.ndarray:
        return self.affine[:, 2]


@dataclass(frozen=True)
class ViewJitterSpec:
    """Camera randomisation ranges; the zero spec is the canonical view."""

    rotation_max: float = 0.0
    zoom_min: float = 1.0
    zoom_max: float = 1.0
    shift_max: float = 0.0
    width: int = 16
    height: int = 16

    def __post_init__(self):
        if self.rotation_max < 0 or self.shift_max < 0:
            raise ConfigError("jitter ranges must be non-negative")
        if not 0 < self.zoom_min <= self.zoom_max:
            raise ConfigError("need 0 < zoom_min <= zoom_max")


def canonical_view(width: int, height: int) -> View:
    """Map the scene square [-1, 1]^2 onto the full image."""
    affine = np.array([[width / 2.0, 0.0, width / 2.0],
                       [0.0, height / 2.0, height / 2.0]])
    return View(affine=affine, width=width, height=height)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def sample_view(seed: int, jitter: ViewJitterSpec) -> View:
    """Deterministic jittered view: scene points are rotated, zoomed and
    shifted before the canonical projection. The zero-jitter spec returns the
    canonical view exactly."""
    rng = np.random.default_rng(seed)
    angle = rng.uniform(-jitter.rotation_max, jitter.rotation_max)
    zoom = rng.uniform(jitter.zoom_min, jitter.zoom_max)
    shift = rng.uniform(-jitter.shift_max, jitter.shift_max, size=2)
    base = canonical_view(jitter.width, jitter.height)
    linear = base.linear @ (zoom * rotation_matrix(angle))
    offset = base.linear @ shift + base.offset
    affine = np.concatenate([linear, offset[:, None]], axis=1)
    return View(affine=affine, width=jitter.width, height=jitter.height)


def view_rotation_angle(view: View, jitter: ViewJitterSpec) -> float:
    """Recover the scene-side rotation of a jittered view (diagnostics)."""
    base = canonical_view(jitter.width, jitter.height)
    m = np.linalg.solve(base.linear, view.linear)
    return math.atan2(m[1, 0], m[0, 0])


def _pixel_centers_scene(view: View) -> np.ndarray:
    """Pixel centers pulled back to scene coordinates, shape (H * W, 2),
    row-major over (y, x)."""
    det = np.linalg.det(view.linear)
    if abs(det) < 1e-12:
        raise ConfigError("degenerate view: affine block is singular")
    xs = np.arange(view.width) + 0.5
    ys = np.arange(view.height) + 0.5
    gx, gy = np.meshgrid(xs, ys)                    # (H, W)
    pix = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return np.linalg.solve(view.linear, (pix - view.offset).T).T


def _sorted_indices(scene: SplatScene) -> list[int]:
    """Front-to-back traversal order: ascending depth, original index breaks ties."""
    return sorted(range(len(scene.splats)), key=lambda i: (scene.splats[i].depth, i))


def _splat_alphas(scene: SplatScene, z: np.ndarray, order: Sequence[int],
                  truncate_sigma: Optional[float]):
    """Footprint alphas (n_splats, n_pixels) in traversal order, plus the
    per-splat frame quantities needed by the backward pass."""
    n, p = len(order), z.shape[0]
    alphas = np.zeros((n, p))
    frames = []
    for row, idx in enumerate(order):
        s = scene.splats[idx]
        u = z - s.center                            # (P, 2)
        r = rotation_matrix(s.rotation)
        w = u @ r                                   # rows are R^T u
        inv_var = np.exp(-2.0 * s.log_scale)        # 1 / std^2 per axis
        q = (w * w) @ inv_var
        g = np.exp(-0.5 * q)
        if truncate_sigma is not None:
            g = np.where(q <= truncate_sigma ** 2, g, 0.0)
        opacity = 1.0 / (1.0 + math.exp(-s.logit_opacity))
        alphas[row] = opacity * g
        frames.append((w, inv_var, r, opacity))
    return alphas, frames


def render(scene: SplatScene, view: View,
           truncate_sigma: Optional[float] = None) -> np.ndarray:
    """Rasterise the scene: front-to-back alpha compositing of Gaussian
    footprints over the background.

    Returns a flat array of length height * width * channels, row-major with
    channels innermost, values in [0, 1] whenever colors and background are.
    truncate_sigma optionally zeroes footprints beyond that many standard
    deviations (speed knob; perturbs values near the cut).
    """
    if not scene.splats:
        raise ConfigError("cannot render an empty scene")
    z = _pixel_centers_scene(view)
    order = _sorted_indices(scene)
    alphas, _ = _splat_alphas(scene, z, order, truncate_sigma)
    colors = np.stack([scene.splats[i].color for i in order])      # (N, C)

    trans = np.cumprod(1.0 - alphas, axis=0)
    t_excl = np.vstack([np.ones((1, alphas.shape[1])), trans[:-1]])  # before each splat
    weights = alphas * t_excl                                        # (N, P)
    img = weights.T @ colors + trans[-1][:, None] * scene.background[None, :]
    return img.ravel()


@dataclass
class SceneGrads:
    """Gradients of <grad_image, render(scene, view)> in original splat order."""

    center: np.ndarray         # (N, 2)
    log_scale: np.ndarray      # (N, 2)
    rotation: np.ndarray       # (N,)
    color: np.ndarray          # (N, C)
    logit_opacity: np.ndarray  # (N,)
    background: np.ndarray     # (C,)


def render_backward(scene: SplatScene, view: View, grad_image,
                    truncate_sigma: Optional[float] = None) -> SceneGrads:
    """Exact analytic gradients of the scalar <grad_image, render(scene, view)>
    with respect to every splat field except depth, plus the background."""
    n = len(scene.splats)
    c_ch = scene.channels
    p = view.width * view.height
    grad_image = np.asarray(grad_image, dtype=float).reshape(p, c_ch)

    z = _pixel_centers_scene(view)
    order = _sorted_indices(scene)
    alphas, frames = _splat_alphas(scene, z, order, truncate_sigma)
    colors = np.stack([scene.splats[i].color for i in order])

    trans = np.cumprod(1.0 - alphas, axis=0)
    t_excl = np.vstack([np.ones((1, p)), trans[:-1]])

    # behind[i]: composite of everything behind splat i, over the background.
    behind = np.empty((n, p, c_ch))
    behind[n - 1] = scene.background[None, :]
    for i in range(n - 1, 0, -1):
        a = alphas[i][:, None]
        behind[i - 1] = colors[i][None, :] * a + (1.0 - a) * behind[i]

    grads = SceneGrads(
        center=np.zeros((n, 2)),
        log_scale=np.zeros((n, 2)),
        rotation=np.zeros(n),
        color=np.zeros((n, c_ch)),
        logit_opacity=np.zeros(n),
        background=grad_image.T @ trans[-1],
    )

    for row, idx in enumerate(order):
        w, inv_var, r, opacity = frames[row]
        a = alphas[row]
        g_color = grad_image.T @ (a * t_excl[row])                    # (C,)
        g_alpha = t_excl[row] * np.einsum(
            "pc,pc->p", grad_image, colors[row][None, :] - behind[row])
        g_q = -0.5 * a * g_alpha

        grads.color[idx] = g_color
        grads.logit_opacity[idx] = float((g_alpha * a).sum() * (1.0 - opacity))
        # q = w^T diag(inv_var) w with w = R^T (z - center):
        #   dq/dcenter   = -2 R diag(inv_var) w
        #   dq/dlogscale = -2 w_a^2 inv_var_a
        #   dq/drotation =  2 w_x w_y (inv_var_x - inv_var_y)
        dq_dcenter = -2.0 * (w * inv_var[None, :]) @ r.T              # (P, 2)
        grads.center[idx] = g_q @ dq_dcenter
        grads.log_scale[idx] = g_q @ (-2.0 * (w * w) * inv_var[None, :])
        grads.rotation[idx] = float(
            g_q @ (2.0 * w[:, 0] * w[:, 1] * (inv_var[0] - inv_var[1])))
    return grads


class IdentityLatent:
    """Generator whose parameter vector is the rendered view itself."""

    def __init__(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if not np.isfinite(theta).all():
            raise ConfigError("latent parameters must be finite")
        self.theta = theta.copy()

    @property
    def n_params(self) -> int:
        return self.theta.shape[0]

    def get_params(self) -> np.ndarray:
        return self.theta.copy()

    def set_params(self, params) -> None:
        self.theta = np.asarray(params, dtype=float).copy()

    def render(self, view: Optional[View] = None) -> np.ndarray:
        return self.theta.copy()

    def backward(self, view: Optional[View], grad_output) -> np.ndarray:
        return np.asarray(grad_output, dtype=float).copy()

    def image_shape(self, jitter: ViewJitterSpec):
        """The rendered vector is not an image; no frames are produced."""
        return None


class SplatGenerator:
    """Adapter exposing a SplatScene as a flat, optimisable parameter vector.

    Per splat the packing is [center(2), log_scale(2), rotation, color(C),
    logit_opacity]; the background follows. Depth keys are fixed. Colors and
    background are clamped to [0, 1] whenever parameters are set.
    """

    def __init__(self, scene: SplatScene, truncate_sigma: Optional[float] = None):
        if not scene.splats:
            raise ConfigError("splat generator needs a non-empty scene")
        self.scene = scene
        self.truncate_sigma = truncate_sigma

    @property
    def channels(self) -> int:
        return self.scene.channels

    @property
    def per_splat(self) -> int:
        return 6 + self.channels

    @property
    def n_params(self) -> int:
        return len(self.scene.splats) * self.per_splat + self.channels

    def get_params(self) -> np.ndarray:
        parts = []
        for s in self.scene.splats:
            parts.append(s.center)
            parts.append(s.log_scale)
            parts.append([s.rotation])
            parts.append(s.color)
            parts.append([s.logit_opacity])
        parts.append(self.scene.background)
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])

    def set_params(self, params) -> None:
        params = np.asarray(params, dtype=float).ravel()
        if params.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape[0]}")
        c = self.channels
        k = 0
        for s in self.scene.splats:
            s.center = params[k:k + 2].copy(); k += 2
            s.log_scale = params[k:k + 2].copy(); k += 2
            s.rotation = float(params[k]); k += 1
            s.color = np.clip(params[k:k + c], 0.0, 1.0); k += c
            s.logit_opacity = float(params[k]); k += 1
        self.scene.background = np.clip(params[k:k + c], 0.0, 1.0)

    def render(self, view: View) -> np.ndarray:
        return render(self.scene, view, self.truncate_sigma)

    def image_shape(self, jitter: ViewJitterSpec) -> tuple[int, int, int]:
        return (jitter.height, jitter.width, self.channels)

    def backward(self, view: View, grad_output) -> np.ndarray:
        g = render_backward(self.scene, view, grad_output, self.truncate_sigma)
        c = self.channels
        out = np.zeros(self.n_params)
        k = 0
        for i in range(len(self.scene.splats)):
            out[k:k + 2] = g.center[i]; k += 2
            out[k:k + 2] = g.log_scale[i]; k += 2
            out[k] = g.rotation[i]; k += 1
            out[k:k + c] = g.color[i]; k += c
            out[k] = g.logit_opacity[i]; k += 1
        out[k:k + c] = g.background
        return out


def random_scene(n_splats: int, channels: int, seed: int,
                 background: Optional[Sequence[float]] = None) -> SplatScene:
    """Seeded scene initialisation: splats spread over the canonical square
    with moderate scales and mid opacities."""
    rng = np.random.default_rng(seed)
    splats = []
    for i in range(n_splats):
        splats.append(Splat2D(
            center=rng.uniform(-0.8, 0.8, size=2),
            log_scale=rng.uniform(math.log(0.08), math.log(0.25), size=2),
            rotation=rng.uniform(-math.pi, math.pi),
            color=rng.uniform(0.2, 0.8, size=channels),
            logit_opacity=rng.uniform(-1.5, 0.5),
            depth=float(i),
        ))
    bg = np.zeros(channels) if background is None else np.asarray(background, dtype=float)
    return SplatScene(splats=splats, background=bg)
