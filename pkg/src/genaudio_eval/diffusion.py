"""Forward diffusion transitions, the noise-prediction objective, and reverse sampling.

The kernel operates on generic latent vectors; no trainable predictor ships
with it.  Single steps follow the variance-preserving transition
z_n = sqrt(1 - beta_n) z_{n-1} + sqrt(beta_n) xi, whose n-fold composition
has the closed-form marginal z_n = sqrt(abar_n) z_0 + sqrt(1 - abar_n) eps.
Steps are indexed 1..N; step 0 is the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvariantError


class StepError(InvariantError):
    """Latent step index inconsistent with the requested transition."""


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise levels beta_n with derived alpha and cumulative products."""

    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "betas", betas)
        if betas.size < 1:
            raise InvariantError("schedule needs at least one step")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise InvariantError("every beta must lie in (0, 1)")
        object.__setattr__(self, "alphas", 1.0 - betas)
        object.__setattr__(self, "alpha_bars", np.cumprod(1.0 - betas))

    @property
    def n_steps(self) -> int:
        return self.betas.size

    def _check(self, n: int) -> None:
        if not (1 <= n <= self.n_steps):
            raise StepError(f"step {n} outside 1..{self.n_steps}")

    def beta(self, n: int) -> float:
        self._check(n)
        return float(self.betas[n - 1])

    def alpha(self, n: int) -> float:
        self._check(n)
        return float(self.alphas[n - 1])

    def alpha_bar(self, n: int) -> float:
        if n == 0:
            return 1.0
        self._check(n)
        return float(self.alpha_bars[n - 1])


def make_schedule(n_steps: int, beta_start: float = 1e-4, beta_end: float = 0.02,
                  kind: str = "linear") -> NoiseSchedule:
    """Linear beta schedule from beta_start to beta_end over n_steps."""
    if kind != "linear":
        raise InvariantError(f"unknown schedule kind {kind!r}")
    if n_steps < 1:
        raise InvariantError("n_steps must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvariantError("require 0 < beta_start <= beta_end < 1")
    return NoiseSchedule(np.linspace(beta_start, beta_end, n_steps))


@dataclass
class Latent:
    """A latent vector together with its position along the diffusion chain."""

    values: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.values)):
            raise InvariantError("latent contains non-finite values")
        if self.step_index < 0:
            raise InvariantError("step_index must be >= 0")


@dataclass(frozen=True)
class ConditionEmbedding:
    """Opaque conditioning vector; the kernel treats audio and text identically."""

    values: np.ndarray
    modality: str = "audio"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            raise InvariantError("condition embedding contains non-finite values")
        if self.modality not in ("audio", "text"):
            raise InvariantError(f"modality must be 'audio' or 'text', got {self.modality!r}")


# A noise predictor maps (latent, step, condition) to a predicted noise vector.
NoisePredictor = Callable[[Latent, int, "ConditionEmbedding | None"], np.ndarray]


def forward_step(z_prev: Latent, n: int, sched: NoiseSchedule,
                 rng: np.random.Generator) -> Latent:
    """One forward transition: z_n = sqrt(1 - beta_n) z_{n-1} + sqrt(beta_n) xi."""
    sched._check(n)
    if z_prev.step_index != n - 1:
        raise StepError(f"latent at step {z_prev.step_index} cannot advance to step {n}")
    beta = sched.beta(n)
    xi = rng.standard_normal(z_prev.values.size)
    return Latent(np.sqrt(1.0 - beta) * z_prev.values + np.sqrt(beta) * xi, n)


def forward_marginal(z0: Latent, n: int, sched: NoiseSchedule, eps: np.ndarray) -> Latent:
    """Closed-form jump to step n: z_n = sqrt(abar_n) z_0 + sqrt(1 - abar_n) eps."""
    sched._check(n)
    if z0.step_index != 0:
        raise StepError(f"forward_marginal starts from step 0, got step {z0.step_index}")
    eps = np.asarray(eps, dtype=np.float64).reshape(-1)
    if eps.shape != z0.values.shape:
        raise InvariantError(f"eps dim {eps.size} does not match latent dim {z0.values.size}")
    abar = sched.alpha_bar(n)
    return Latent(np.sqrt(abar) * z0.values + np.sqrt(1.0 - abar) * eps, n)


def denoising_loss(z0: Latent, n: int, eps: np.ndarray, predictor: NoisePredictor,
                   cond: ConditionEmbedding | None, sched: NoiseSchedule) -> float:
    """Single-sample squared-error estimator of the noise-prediction objective.

    Returns ||eps - predictor(z_n, n, cond)||^2 with z_n from forward_marginal;
    averaging over draws of (eps, n) is the caller's loop.
    """
    zn = forward_marginal(z0, n, sched, eps)
    pred = np.asarray(predictor(zn, n, cond), dtype=np.float64).reshape(-1)
    if pred.shape != zn.values.shape:
        raise InvariantError(f"predictor returned dim {pred.size}, expected {zn.values.size}")
    eps = np.asarray(eps, dtype=np.float64).reshape(-1)
    diff = eps - pred
    return float(diff @ diff)


def reverse_step(zn: Latent, n: int, predictor: NoisePredictor,
                 cond: ConditionEmbedding | None, sched: NoiseSchedule,
                 rng: np.random.Generator, variance: str = "beta") -> Latent:
    """One reverse transition using the predicted-noise parameterization.

    mean = (z_n - beta_n / sqrt(1 - abar_n) * eps_hat) / sqrt(alpha_n), then
    Gaussian noise with sigma_n^2 = beta_n (or the posterior variance when
    variance="posterior") is added except at the final step n = 1.
    """
    sched._check(n)
    if zn.step_index != n:
        raise StepError(f"latent at step {zn.step_index} cannot reverse from step {n}")
    pred = np.asarray(predictor(zn, n, cond), dtype=np.float64).reshape(-1)
    if pred.shape != zn.values.shape:
        raise InvariantError(f"predictor returned dim {pred.size}, expected {zn.values.size}")
    beta = sched.beta(n)
    abar = sched.alpha_bar(n)
    mean = (zn.values - beta / np.sqrt(1.0 - abar) * pred) / np.sqrt(sched.alpha(n))
    if n == 1:
        return Latent(mean, 0)
    if variance == "beta":
        sigma2 = beta
    elif variance == "posterior":
        sigma2 = beta * (1.0 - sched.alpha_bar(n - 1)) / (1.0 - abar)
    else:
        raise InvariantError(f"unknown variance rule {variance!r}")
    xi = rng.standard_normal(zn.values.size)
    return Latent(mean + np.sqrt(sigma2) * xi, n - 1)
