"""JSON experiment configuration: parsing and object builders.

The schema is documented in docs/config.md. Builders raise ConfigError with
the dotted key that failed, so the CLI can exit with the config-error code.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .distill import DistillConfig, OptimConfig
from .errors import ConfigError
from .generators import (
    IdentityLatent,
    SplatGenerator,
    SplatScene,
    ViewJitterSpec,
    random_scene,
)
from .oracle import GuidanceSpec, MixtureOracle
from .schedule import NoiseSchedule, make_schedule


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def get_key(cfg: dict, key: str, default=None, required: bool = False):
    node = cfg
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"missing config key {key!r}")
            return default
        node = node[part]
    return node


def build_schedule(cfg: dict) -> NoiseSchedule:
    return make_schedule(
        num_steps=int(get_key(cfg, "schedule.T", 1000)),
        beta_start=float(get_key(cfg, "schedule.beta_start", 0.00085)),
        beta_end=float(get_key(cfg, "schedule.beta_end", 0.012)),
        omega_kind=get_key(cfg, "schedule.omega", "unit"),
    )


def gaussian_blob_template(width: int, height: int, channels: int,
                           center, sigma: float, peak: float) -> np.ndarray:
    """Flat image of an isotropic blob over the canonical [-1, 1]^2 square;
    used to define image-space mixture components from compact configs."""
    xs = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    ys = (np.arange(height) + 0.5) / height * 2.0 - 1.0
    gx, gy = np.meshgrid(xs, ys)
    d2 = (gx - center[0]) ** 2 + (gy - center[1]) ** 2
    img = peak * np.exp(-0.5 * d2 / sigma ** 2)
    return np.repeat(img.ravel()[:, None], channels, axis=1).ravel()


def _component_mean(spec, dim: Optional[int]) -> np.ndarray:
    if isinstance(spec, dict):
        kind = spec.get("template")
        if kind != "gaussian_blob":
            raise ConfigError(f"unknown template kind {kind!r} in oracle.components[].mean")
        return gaussian_blob_template(
            width=int(spec.get("width", 16)),
            height=int(spec.get("height", 16)),
            channels=int(spec.get("channels", 1)),
            center=[float(v) for v in spec.get("center", (0.0, 0.0))],
            sigma=float(spec.get("sigma", 0.35)),
            peak=float(spec.get("peak", 0.9)),
        )
    mean = np.asarray(spec, dtype=float).ravel()
    if dim is not None and mean.shape[0] != dim:
        raise ConfigError(f"oracle.components[].mean has length {mean.shape[0]}, expected {dim}")
    return mean


def build_oracle(cfg: dict) -> MixtureOracle:
    comps = get_key(cfg, "oracle.components", required=True)
    if not comps:
        raise ConfigError("oracle.components must be non-empty")
    dim = get_key(cfg, "oracle.dim")
    dim = int(dim) if dim is not None else None
    means, sigmas, weights = [], [], []
    for comp in comps:
        means.append(_component_mean(comp.get("mean"), dim))
        sigmas.append(float(comp.get("sigma", 0.1)))
        weights.append(float(comp.get("weight", 1.0)))
    lens = {m.shape[0] for m in means}
    if len(lens) != 1:
        raise ConfigError("oracle components disagree on dimension")
    labels = get_key(cfg, "oracle.labels", {})
    return MixtureOracle(means=means, sigmas=sigmas, weights=weights, labels=labels)


def build_guidance(cfg: dict) -> GuidanceSpec:
    return GuidanceSpec(
        positive=get_key(cfg, "guidance.positive"),
        negative=get_key(cfg, "guidance.negative"),
        scale=float(get_key(cfg, "guidance.scale", 7.5)),
    )


def build_jitter(cfg: dict) -> ViewJitterSpec:
    return ViewJitterSpec(
        rotation_max=float(get_key(cfg, "jitter.rotation_max", 0.0)),
        zoom_min=float(get_key(cfg, "jitter.zoom_min", 1.0)),
        zoom_max=float(get_key(cfg, "jitter.zoom_max", 1.0)),
        shift_max=float(get_key(cfg, "jitter.shift_max", 0.0)),
        width=int(get_key(cfg, "view.width", 16)),
        height=int(get_key(cfg, "view.height", 16)),
    )


def build_generator(cfg: dict):
    kind = get_key(cfg, "generator.kind", "identity")
    if kind == "identity":
        theta = get_key(cfg, "generator.theta", required=True)
        return IdentityLatent(theta)
    if kind == "splats":
        truncate = get_key(cfg, "generator.truncate_sigma")
        truncate = float(truncate) if truncate is not None else None
        explicit = get_key(cfg, "generator.splats")
        if explicit is not None:
            scene = SplatScene.from_dict({
                "splats": explicit,
                "background": get_key(cfg, "generator.background", [0.0]),
            })
            return SplatGenerator(scene, truncate_sigma=truncate)
        scene = random_scene(
            n_splats=int(get_key(cfg, "generator.n_splats", 32)),
            channels=int(get_key(cfg, "generator.channels", 1)),
            seed=int(get_key(cfg, "generator.init_seed", 0)),
            background=get_key(cfg, "generator.background"),
        )
        return SplatGenerator(scene, truncate_sigma=truncate)
    raise ConfigError(f"generator.kind must be 'identity' or 'splats', got {kind!r}")


def build_distill(cfg: dict) -> DistillConfig:
    opt = OptimConfig(
        step_size=float(get_key(cfg, "distill.optimizer.step_size", 0.01)),
        beta1=float(get_key(cfg, "distill.optimizer.beta1", 0.9)),
        beta2=float(get_key(cfg, "distill.optimizer.beta2", 0.99)),
        eps_hat=float(get_key(cfg, "distill.optimizer.eps_hat", 1e-8)),
    )
    delta_t_start = int(get_key(cfg, "distill.delta_T_start", 200))
    return DistillConfig(
        objective=get_key(cfg, "distill.objective", "ism"),
        iterations=int(get_key(cfg, "distill.iterations", 1000)),
        t_min=int(get_key(cfg, "distill.t_min", 20 + delta_t_start)),
        t_max=int(get_key(cfg, "distill.t_max", 980)),
        delta_t_start=delta_t_start,
        delta_t_end=int(get_key(cfg, "distill.delta_T_end", 50)),
        delta_s=int(get_key(cfg, "distill.delta_S", 50)),
        guidance=build_guidance(cfg),
        view_batch=int(get_key(cfg, "distill.view_batch", 1)),
        optimizer=opt,
        seed=int(get_key(cfg, "distill.seed", 0)),
        jitter=build_jitter(cfg),
        snapshot_every=int(get_key(cfg, "distill.snapshot_every", 0)),
    )


def int_list(cfg, key, default):
    vals = get_key(cfg, key, default)
    out = [int(v) for v in vals]
    if not out:
        raise ConfigError(f"{key} must be non-empty")
    return out
