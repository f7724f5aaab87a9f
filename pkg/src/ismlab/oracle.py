"""Closed-form denoiser oracle over an isotropic Gaussian-mixture data prior.

The mixture plays the role a pretrained denoising network would play in a
full-scale distillation pipeline: given a noisy point x at timestep t it
returns the epsilon-prediction

    eps(x, t, label) = -sqrt(1 - alpha_bar_t) * grad_x log p_t(x | label),

where p_t restricted to a label is the noised mixture

    p_t(x | label) = sum_k w_k N(x; sqrt(alpha_bar_t) mu_k,
                                 (alpha_bar_t sigma_k^2 + 1 - alpha_bar_t) I)

over that label's components with renormalised weights. A label is a named
subset of mixture components (the mixture analog of a prompt selecting
modes); the reserved null label ``None`` selects every component.

Conventions:
  * eps(x, 0, label) = 0, the sigma > 0 limit of the formula at t = 0, so
    trajectories may start at the clean-data boundary.
  * component sigmas are clamped to SIGMA_MIN; an exact point mass would make
    the t -> 0 score singular off-manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, UnknownLabelError
from .schedule import NoiseSchedule

SIGMA_MIN = 1e-4

Label = Optional[str]


@dataclass(frozen=True)
class GuidanceSpec:
    """Classifier-free guidance settings.

    The guided prediction extrapolates from the negative-label branch toward
    the positive-label branch:

        eps_guided = eps(x, t, negative) + scale * (eps(x, t, positive)
                                                    - eps(x, t, negative))

    ``negative`` defaults to the null label (unconditional branch).
    """

    positive: Label
    negative: Label = None
    scale: float = 7.5

    def __post_init__(self):
        if not math.isfinite(self.scale):
            raise ConfigError(f"guidance scale must be finite, got {self.scale}")


class MixtureOracle:
    """Gaussian mixture with analytic noised scores and label conditioning.

    Treat instances as immutable after construction; the only mutated state is
    ``eps_evals``, a diagnostic counter of epsilon-prediction evaluations
    (guided predictions count each internal branch they evaluate).
    """

    def __init__(
        self,
        means: Sequence[Sequence[float]],
        sigmas: Sequence[float],
        weights: Sequence[float],
        labels: Optional[Mapping[str, Sequence[int]]] = None,
    ):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        sigmas = np.asarray(sigmas, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        n = means.shape[0]
        if sigmas.shape != (n,) or weights.shape != (n,):
            raise ConfigError("means, sigmas and weights must agree in length")
        if not (np.isfinite(means).all() and np.isfinite(sigmas).all()):
            raise ConfigError("mixture parameters must be finite")
        if np.any(weights <= 0) or not np.isfinite(weights).all():
            raise ConfigError("component weights must be positive and finite")

        self.means = means
        self.means.flags.writeable = False
        self.sigmas = np.maximum(sigmas, SIGMA_MIN)
        self.sigmas.flags.writeable = False
        self.weights = weights / weights.sum()
        self.weights.flags.writeable = False

        self.labels: dict[str, tuple[int, ...]] = {}
        for name, idx in (labels or {}).items():
            idx = tuple(int(i) for i in idx)
            if not idx:
                raise ConfigError(f"label {name!r} selects no components")
            if any(i < 0 or i >= n for i in idx):
                raise ConfigError(f"label {name!r} has out-of-range component index")
            self.labels[name] = idx

        # Per-label caches: component indices, log renormalised weights.
        self._cache: dict[Label, tuple[np.ndarray, np.ndarray]] = {}
        all_idx = np.arange(n)
        self._cache[None] = (all_idx, np.log(self.weights))
        for name, idx in self.labels.items():
            ia = np.asarray(idx)
            w = self.weights[ia]
            self._cache[name] = (ia, np.log(w / w.sum()))

        self.eps_evals = 0

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def label_means(self, label: Label) -> np.ndarray:
        idx, _ = self._select(label)
        return self.means[idx]

    def _select(self, label: Label) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self._cache[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected point of shape ({self.dim},), got {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("non-finite input point")
        return x

    def _log_terms(self, schedule: NoiseSchedule, x, t, label):
        """Per-component log densities of the noised, label-restricted mixture."""
        idx, logw = self._select(label)
        ab = schedule.alpha_bar[schedule._check_t(t, 0)]
        mu = math.sqrt(ab) * self.means[idx]
        var = ab * self.sigmas[idx] ** 2 + (1.0 - ab)
        diff = x[None, :] - mu
        sq = np.einsum("kd,kd->k", diff, diff)
        logs = logw - 0.5 * self.dim * np.log(2.0 * math.pi * var) - sq / (2.0 * var)
        return logs, diff, var

    def log_density(self, schedule: NoiseSchedule, x, t: int, label: Label = None) -> float:
        """Log of the noised, label-restricted mixture density at x."""
        x = self._check_x(x)
        logs, _, _ = self._log_terms(schedule, x, t, label)
        m = logs.max()
        return float(m + np.log(np.exp(logs - m).sum()))

    def eps_predict(self, schedule: NoiseSchedule, x, t: int, label: Label = None) -> np.ndarray:
        """Epsilon-prediction -sqrt(1 - alpha_bar_t) * score of the noised mixture.

        Returns the zero vector at t = 0 (clean-data boundary convention).
        """
        x = self._check_x(x)
        t = schedule._check_t(t, 0)
        self._select(label)
        self.eps_evals += 1
        if t == 0:
            return np.zeros(self.dim)
        logs, diff, var = self._log_terms(schedule, x, t, label)
        m = logs.max()
        resp = np.exp(logs - m)
        resp /= resp.sum()
        score = -(resp / var) @ diff
        return -schedule.sqrt_one_minus_alpha_bar(t) * score

    def sample(self, rng: np.random.Generator, n: int = 1, label: Label = None) -> np.ndarray:
        """Draw clean samples from the label-restricted mixture, shape (n, dim)."""
        idx, logw = self._select(label)
        probs = np.exp(logw)
        comps = rng.choice(idx, size=n, p=probs / probs.sum())
        return self.means[comps] + self.sigmas[comps][:, None] * rng.standard_normal((n, self.dim))

    def eps_guided(self, schedule: NoiseSchedule, x, t: int, g: GuidanceSpec) -> np.ndarray:
        """Classifier-free-guided prediction.

        scale = 1 returns the positive branch and scale = 0 the negative
        branch exactly (single evaluation, no float recombination).
        """
        self._select(g.positive)
        self._select(g.negative)
        if g.scale == 1.0:
            return self.eps_predict(schedule, x, t, g.positive)
        if g.scale == 0.0:
            return self.eps_predict(schedule, x, t, g.negative)
        eps_neg = self.eps_predict(schedule, x, t, g.negative)
        eps_pos = self.eps_predict(schedule, x, t, g.positive)
        return eps_neg + g.scale * (eps_pos - eps_neg)
