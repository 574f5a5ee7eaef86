"""Per-agent stochastic cost models.

Each model exposes the true gradient and Hessian of its expected loss, an
instantaneous stochastic gradient computed from one streaming sample, and
batched sampling with caller-owned random generators so parallel runs keep
disjoint streams. The expected stochastic gradient equals the true gradient
(zero-mean gradient noise).
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch


def inv_one_plus_exp(z):
    """1 / (1 + exp(z)) without overflow, branching on the sign of z."""
    z = np.asarray(z, dtype=float)
    return np.exp(-np.maximum(z, 0.0)) / (1.0 + np.exp(-np.abs(z)))


def logistic_stochastic_gradient(w, gamma, h, rho):
    """Instantaneous gradient of the regularized logistic loss at one sample.

    The data term is -gamma * h / (1 + exp(gamma h.w)); the regularizer
    contributes rho * w.
    """
    z = gamma * (h @ w)
    return -(gamma * inv_one_plus_exp(z)) * h + rho * w


def finite_difference_gradient(f, point, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function; validation oracle."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    grad = np.empty_like(point)
    for i in range(point.size):
        step = np.zeros_like(point)
        step[i] = eps
        grad[i] = (f(point + step) - f(point - step)) / (2.0 * eps)
    return grad


@dataclass(frozen=True, eq=False)
class NoiseCovariance:
    """Gradient-noise covariance evaluated at one point."""

    g: np.ndarray  # (M, M), symmetric PSD


class CostModel(ABC):
    """Interface shared by all per-agent cost models."""

    dimension: int

    @abstractmethod
    def true_gradient(self, w: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, w: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def true_loss(self, w: np.ndarray) -> float: ...

    @abstractmethod
    def draw_batch(self, rng: np.random.Generator, n: int) -> tuple: ...

    @abstractmethod
    def stochastic_gradient(self, w: np.ndarray, sample: tuple) -> np.ndarray: ...

    @abstractmethod
    def sample_loss(self, w: np.ndarray, sample: tuple) -> float: ...

    @abstractmethod
    def gradients_at(self, w: np.ndarray, batch: tuple) -> np.ndarray:
        """Stochastic gradients of every sample in ``batch`` at one point."""

    @abstractmethod
    def gradient_rows(self, w_rows: np.ndarray, fields: tuple) -> np.ndarray:
        """Row-wise stochastic gradients: one sample and one point per row."""

    def draw_sample(self, rng: np.random.Generator) -> tuple:
        return tuple(f[0] for f in self.draw_batch(rng, 1))

    def noise_covariance(self, at: np.ndarray) -> np.ndarray | None:
        """Closed-form gradient-noise covariance, if the model has one."""
        return None


def _as_spd_matrix(spec, m: int, name: str) -> np.ndarray:
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(m)
    elif arr.ndim == 1:
        if arr.shape[0] != m:
            raise DimensionMismatch(f"{name} diagonal has length {arr.shape[0]}, expected {m}")
        arr = np.diag(arr)
    elif arr.shape != (m, m):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected ({m}, {m})")
    return arr


@dataclass(frozen=True, eq=False)
class QuadraticCost(CostModel):
    """Mean-square-error cost over a linear regression stream.

    Samples are pairs (u, d) with d = u.w_o + v, Gaussian regressor u with
    covariance r_u and white observation noise v of variance sigma_v2. The
    true gradient is 2 r_u (w - w_o) and the Hessian the constant 2 r_u.
    """

    r_u: np.ndarray
    sigma_v2: float
    w_o: np.ndarray

    def __init__(self, r_u, sigma_v2, w_o):
        w_o = np.atleast_1d(np.asarray(w_o, dtype=float))
        object.__setattr__(self, "w_o", w_o)
        object.__setattr__(self, "sigma_v2", float(sigma_v2))
        object.__setattr__(self, "r_u", _as_spd_matrix(r_u, w_o.shape[0], "r_u"))
        if self.sigma_v2 < 0:
            raise ValueError("sigma_v2 must be nonnegative")

    @property
    def dimension(self) -> int:
        return self.w_o.shape[0]

    @cached_property
    def _chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.r_u)

    def true_gradient(self, w):
        return 2.0 * self.r_u @ (np.asarray(w, dtype=float) - self.w_o)

    def hessian(self, w):
        return 2.0 * self.r_u

    def true_loss(self, w):
        err = np.asarray(w, dtype=float) - self.w_o
        return float(err @ self.r_u @ err + self.sigma_v2)

    def draw_batch(self, rng, n):
        u = rng.standard_normal((n, self.dimension)) @ self._chol.T
        v = rng.normal(0.0, np.sqrt(self.sigma_v2), n)
        d = u @ self.w_o + v
        return u, d

    def stochastic_gradient(self, w, sample):
        u, d = sample
        return 2.0 * u * (u @ w - d)

    def sample_loss(self, w, sample):
        u, d = sample
        return float((d - u @ w) ** 2)

    def gradients_at(self, w, batch):
        u, d = batch
        return 2.0 * u * (u @ w - d)[:, None]

    def gradient_rows(self, w_rows, fields):
        u, d = fields
        inner = np.einsum("rm,rm->r", u, w_rows)
        return 2.0 * u * (inner - d)[:, None]

    def noise_covariance(self, at):
        """Gaussian-regressor closed form, exact at any evaluation point."""
        wt = np.asarray(at, dtype=float) - self.w_o
        r = self.r_u
        rw = r @ wt
        return 4.0 * (np.outer(rw, rw) + (wt @ rw) * r) + 4.0 * self.sigma_v2 * r


class FeatureSampler(ABC):
    """Label/feature generator plugged into a logistic cost."""

    dimension: int

    @abstractmethod
    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Return labels (n,) in {+1, -1} and features (n, dimension)."""


@dataclass(frozen=True, eq=False)
class TwoClassGaussianSampler(FeatureSampler):
    """Features drawn from one Gaussian per class."""

    mean_pos: np.ndarray
    mean_neg: np.ndarray
    cov: np.ndarray
    p_pos: float = 0.5

    def __init__(self, mean_pos, mean_neg, cov=1.0, p_pos=0.5):
        mean_pos = np.atleast_1d(np.asarray(mean_pos, dtype=float))
        mean_neg = np.atleast_1d(np.asarray(mean_neg, dtype=float))
        if mean_pos.shape != mean_neg.shape:
            raise DimensionMismatch("class means differ in dimension")
        object.__setattr__(self, "mean_pos", mean_pos)
        object.__setattr__(self, "mean_neg", mean_neg)
        object.__setattr__(self, "cov", _as_spd_matrix(cov, mean_pos.shape[0], "cov"))
        object.__setattr__(self, "p_pos", float(p_pos))

    @property
    def dimension(self) -> int:
        return self.mean_pos.shape[0]

    @cached_property
    def _chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov)

    def draw(self, rng, n):
        gamma = np.where(rng.random(n) < self.p_pos, 1.0, -1.0)
        means = np.where(gamma[:, None] > 0, self.mean_pos, self.mean_neg)
        h = means + rng.standard_normal((n, self.dimension)) @ self._chol.T
        return gamma, h


def quadratic_features(points: np.ndarray) -> np.ndarray:
    """Map 2-D points to the feature vector (5, x, y, x^2, y^2, x y)."""
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([np.full_like(x, 5.0), x, y, x * x, y * y, x * y])


@dataclass(frozen=True)
class EllipseSampler(FeatureSampler):
    """Two classes separated by an ellipse, with optional outlier cluster.

    Class +1 points concentrate inside the ellipse (x/a)^2 + (y/b)^2 = 1,
    class -1 points fill a radial band outside it. A fraction of the +1
    draws can be relocated to a Gaussian cluster away from the origin to
    model outlier data. Features are the quadratic map of the 2-D point.
    """

    semi_axes: tuple[float, float] = (2.0, 1.0)
    outside_band: tuple[float, float] = (1.3, 2.2)
    p_pos: float = 0.5
    outlier_fraction: float = 0.0
    outlier_center: tuple[float, float] = (6.0, 6.0)
    outlier_std: float = 0.5

    dimension = 6

    def draw(self, rng, n):
        gamma = np.where(rng.random(n) < self.p_pos, 1.0, -1.0)
        a, b = self.semi_axes
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        radius = np.where(
            gamma > 0,
            0.9 * np.sqrt(rng.random(n)),
            rng.uniform(*self.outside_band, n),
        )
        pts = np.column_stack([a * radius * np.cos(theta), b * radius * np.sin(theta)])
        if self.outlier_fraction > 0.0:
            hit = (gamma > 0) & (rng.random(n) < self.outlier_fraction)
            cluster = np.asarray(self.outlier_center) + self.outlier_std * rng.standard_normal((int(hit.sum()), 2))
            pts[hit] = cluster
        return gamma, quadratic_features(pts)


@dataclass(frozen=True, eq=False)
class LogisticCost(CostModel):
    """Regularized logistic loss over a streaming label/feature source.

    The expected loss (rho / 2) ||w||^2 + E ln(1 + exp(-gamma h.w)) has no
    closed-form gradient, so ``true_gradient``, ``hessian`` and ``true_loss``
    are sample averages over a fixed internal design of ``eval_samples``
    draws (seeded by ``eval_seed``), which keeps them deterministic.
    """

    rho: float
    sampler: FeatureSampler
    eval_samples: int = 200000
    eval_seed: int = 0

    @property
    def dimension(self) -> int:
        return self.sampler.dimension

    @cached_property
    def _eval_batch(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.eval_seed)
        return self.sampler.draw(rng, self.eval_samples)

    def true_gradient(self, w):
        gamma, h = self._eval_batch
        w = np.asarray(w, dtype=float)
        sig = inv_one_plus_exp(gamma * (h @ w))
        return self.rho * w - (gamma * sig) @ h / gamma.shape[0]

    def hessian(self, w):
        gamma, h = self._eval_batch
        sig = inv_one_plus_exp(gamma * (h @ np.asarray(w, dtype=float)))
        weights = sig * (1.0 - sig)
        return self.rho * np.eye(self.dimension) + (h * weights[:, None]).T @ h / gamma.shape[0]

    def true_loss(self, w):
        gamma, h = self._eval_batch
        w = np.asarray(w, dtype=float)
        data = np.logaddexp(0.0, -gamma * (h @ w)).mean()
        return float(0.5 * self.rho * (w @ w) + data)

    def draw_batch(self, rng, n):
        return self.sampler.draw(rng, n)

    def stochastic_gradient(self, w, sample):
        gamma, h = sample
        return logistic_stochastic_gradient(np.asarray(w, dtype=float), gamma, h, self.rho)

    def sample_loss(self, w, sample):
        gamma, h = sample
        w = np.asarray(w, dtype=float)
        return float(0.5 * self.rho * (w @ w) + np.logaddexp(0.0, -gamma * (h @ w)))

    def gradients_at(self, w, batch):
        gamma, h = batch
        w = np.asarray(w, dtype=float)
        sig = inv_one_plus_exp(gamma * (h @ w))
        return -(gamma * sig)[:, None] * h + self.rho * w

    def gradient_rows(self, w_rows, fields):
        gamma, h = fields
        z = gamma * np.einsum("rm,rm->r", h, w_rows)
        sig = inv_one_plus_exp(z)
        return -(gamma * sig)[:, None] * h + self.rho * w_rows


@dataclass(frozen=True, eq=False)
class ZeroedObservations(CostModel):
    """Wrapper that blanks out a model's data stream.

    Draws consume the same random numbers as the wrapped model but every
    feature/observation is replaced by zero, so the agent keeps taking
    steps (of zero data gradient) without contributing any information.
    """

    inner: CostModel

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    def true_gradient(self, w):
        return self.inner.true_gradient(w)

    def hessian(self, w):
        return self.inner.hessian(w)

    def true_loss(self, w):
        return self.inner.true_loss(w)

    def draw_batch(self, rng, n):
        return tuple(
            np.zeros_like(np.asarray(f, dtype=float))
            for f in self.inner.draw_batch(rng, n)
        )

    def stochastic_gradient(self, w, sample):
        return self.inner.stochastic_gradient(w, sample)

    def sample_loss(self, w, sample):
        return self.inner.sample_loss(w, sample)

    def gradients_at(self, w, batch):
        return self.inner.gradients_at(w, batch)

    def gradient_rows(self, w_rows, fields):
        return self.inner.gradient_rows(w_rows, fields)


def noise_covariance_at(
    model: CostModel,
    point: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> NoiseCovariance:
    """Empirical covariance of the gradient noise at one point."""
    if n_samples < 1000:
        raise ValueError("covariance estimation needs n_samples >= 1000")
    point = np.asarray(point, dtype=float)
    batch = model.draw_batch(rng, n_samples)
    noise = model.gradients_at(point, batch) - model.true_gradient(point)
    return NoiseCovariance(g=noise.T @ noise / n_samples)


def hessian_at(model: CostModel, point: np.ndarray, n_samples: int | None = None) -> np.ndarray:
    """Hessian of the expected loss; closed form when the model has one.

    For sampled models an ``n_samples`` override re-estimates on a fresh
    design of that size instead of the model's fixed evaluation set.
    """
    if n_samples is not None and isinstance(model, LogisticCost):
        resized = LogisticCost(
            rho=model.rho,
            sampler=model.sampler,
            eval_samples=n_samples,
            eval_seed=model.eval_seed,
        )
        return resized.hessian(point)
    return model.hessian(point)
