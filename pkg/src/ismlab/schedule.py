"""Discrete diffusion time axis.

A schedule owns the per-step variances beta_t, the cumulative signal levels
alpha_bar_t = prod_{u<=t} (1 - beta_u), the noise-to-signal ratio
sqrt(1 - alpha_bar_t) / sqrt(alpha_bar_t) that converts between epsilon-space
and sample-space update directions, and the per-timestep loss weight.

Index 0 is the clean-data boundary: beta[0] = 0 and alpha_bar[0] = 1 by
convention, so trajectories may start at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

OMEGA_KINDS = ("unit", "one_minus_alpha_bar")


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable lookup tables for a discrete forward-noising process.

    Attributes:
        num_steps: number of diffusion steps T; valid timesteps are 0..T.
        beta: array of shape (T + 1,); beta[0] = 0, beta[t] is the step-t
            variance increment.
        alpha_bar: array of shape (T + 1,); alpha_bar[0] = 1 and
            alpha_bar[t] = alpha_bar[t - 1] * (1 - beta[t]).
        omega_kind: which per-timestep loss weight to use, one of
            ``unit`` (constant 1) or ``one_minus_alpha_bar``.
    """

    num_steps: int
    beta: np.ndarray
    alpha_bar: np.ndarray
    omega_kind: str = "unit"

    def _check_t(self, t: int, lo: int) -> int:
        t = int(t)
        if not lo <= t <= self.num_steps:
            raise IndexError(f"timestep {t} outside [{lo}, {self.num_steps}]")
        return t

    def sqrt_alpha_bar(self, t: int) -> float:
        t = self._check_t(t, 0)
        return math.sqrt(self.alpha_bar[t])

    def sqrt_one_minus_alpha_bar(self, t: int) -> float:
        t = self._check_t(t, 0)
        return math.sqrt(1.0 - self.alpha_bar[t])

    def noise_to_signal(self, t: int) -> float:
        """Ratio sqrt(1 - alpha_bar_t) / sqrt(alpha_bar_t); zero at t = 0."""
        t = self._check_t(t, 0)
        ab = self.alpha_bar[t]
        return math.sqrt(1.0 - ab) / math.sqrt(ab)

    def loss_weight(self, t: int) -> float:
        """Per-timestep objective weight for 1 <= t <= T."""
        t = self._check_t(t, 1)
        if self.omega_kind == "unit":
            return 1.0
        return 1.0 - float(self.alpha_bar[t])


def make_schedule(
    num_steps: int,
    beta_start: float = 0.00085,
    beta_end: float = 0.012,
    omega_kind: str = "unit",
) -> NoiseSchedule:
    """Build a schedule whose beta ramps linearly from beta_start to beta_end.

    The defaults mirror common latent-diffusion training schedules so that
    timesteps drawn uniformly from [1, 1000] stay meaningful.

    Raises:
        ConfigError: if num_steps < 2, the beta range is not
            0 < beta_start <= beta_end < 1, or omega_kind is unknown.
    """
    if num_steps < 2:
        raise ConfigError(f"num_steps must be >= 2, got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )
    if omega_kind not in OMEGA_KINDS:
        raise ConfigError(f"omega_kind must be one of {OMEGA_KINDS}, got {omega_kind!r}")

    beta = np.zeros(num_steps + 1)
    beta[1:] = np.linspace(beta_start, beta_end, num_steps)
    alpha_bar = np.ones(num_steps + 1)
    alpha_bar[1:] = np.cumprod(1.0 - beta[1:])
    beta.flags.writeable = False
    alpha_bar.flags.writeable = False
    return NoiseSchedule(num_steps=num_steps, beta=beta, alpha_bar=alpha_bar,
                         omega_kind=omega_kind)
