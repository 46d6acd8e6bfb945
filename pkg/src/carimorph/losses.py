"""Perceptual training losses and their analytic gradients.

Three terms steer a caricature generator: a least-squares adversarial loss
(fake scores pulled to 0 for the discriminator, to 1 for the generator), a
character loss penalizing identity drift between the generated caricature
feature d_g and the reconstructed head feature d_p, and a caricature loss
rewarding identity-aligned magnitude growth,

    L_cha  = 1 - cos(d_g, d_p)
    L_cari = exp(-cos(d_g, d_p) * |d_g| / |d_p|) = exp(-(d_g . d_p) / |d_p|^2)

The exponential keeps the pull on |d_g| bounded: its gradient decays as the
exaggeration grows, so the adversarial term can anchor the magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchError, UndefinedIdentityError
from .exaggerate import FeatureVector


@dataclass(frozen=True)
class LossWeights:
    """Weights of the character and caricature terms in the overall objective."""

    lambda_cha: float = 2.0
    lambda_cari: float = 20.0

    def __post_init__(self):
        if self.lambda_cha < 0 or self.lambda_cari < 0:
            raise ValueError("loss weights must be non-negative")


def _as_array(x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _scores(batch) -> np.ndarray:
    arr = np.asarray(batch, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise BatchError("empty score batch")
    return arr


def adv_loss_discriminator(scores_fake, scores_real) -> float:
    """LSGAN discriminator loss: mean(fake^2) + mean((1 - real)^2)."""
    fake = _scores(scores_fake)
    real = _scores(scores_real)
    return float(np.mean(fake**2) + np.mean((1.0 - real) ** 2))


def adv_loss_generator(scores_fake) -> float:
    """LSGAN generator loss: mean((1 - fake)^2)."""
    fake = _scores(scores_fake)
    return float(np.mean((1.0 - fake) ** 2))


def _norms(d_g: np.ndarray, d_p: np.ndarray) -> tuple[float, float]:
    ng = float(np.linalg.norm(d_g))
    np_ = float(np.linalg.norm(d_p))
    if ng == 0.0 or np_ == 0.0:
        raise UndefinedIdentityError("zero-norm feature vector in loss")
    return ng, np_


def character_loss(d_g, d_p) -> float:
    """1 - cosine between the generated and reconstructed features; 0 when
    the identity direction is preserved exactly, 2 when inverted."""
    g = _as_array(d_g)
    p = _as_array(d_p)
    ng, np_ = _norms(g, p)
    return float(1.0 - np.dot(g, p) / (ng * np_))


def caricature_loss(d_g, d_p) -> float:
    """exp(-(d_g . d_p) / |d_p|^2); e^-1 when d_g = d_p, smaller for aligned
    magnitude growth, 1 for orthogonal features."""
    g = _as_array(d_g)
    p = _as_array(d_p)
    _norms(g, p)
    return float(np.exp(-np.dot(g, p) / np.dot(p, p)))


def character_loss_batch(d_g: np.ndarray, d_p: np.ndarray) -> float:
    """Mean character loss over paired rows of two (n, dim) batches."""
    g, p = _batch(d_g, d_p)
    ng = np.linalg.norm(g, axis=1)
    np_ = np.linalg.norm(p, axis=1)
    if (ng == 0).any() or (np_ == 0).any():
        raise UndefinedIdentityError("zero-norm feature vector in batch")
    return float(np.mean(1.0 - np.sum(g * p, axis=1) / (ng * np_)))


def caricature_loss_batch(d_g: np.ndarray, d_p: np.ndarray) -> float:
    """Mean caricature loss over paired rows of two (n, dim) batches."""
    g, p = _batch(d_g, d_p)
    q2 = np.sum(p * p, axis=1)
    if (q2 == 0).any() or (np.linalg.norm(g, axis=1) == 0).any():
        raise UndefinedIdentityError("zero-norm feature vector in batch")
    return float(np.mean(np.exp(-np.sum(g * p, axis=1) / q2)))


def _batch(d_g, d_p) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(d_g, dtype=np.float64)
    p = np.asarray(d_p, dtype=np.float64)
    if g.ndim != 2 or g.shape != p.shape:
        raise BatchError(f"batches must be matching (n, dim) arrays, got {g.shape} vs {p.shape}")
    if g.shape[0] == 0:
        raise BatchError("empty feature batch")
    return g, p


def total_loss(adv: float, cha: float, cari: float, weights: LossWeights) -> float:
    """adv + lambda_cha * cha + lambda_cari * cari."""
    out = adv + weights.lambda_cha * cha + weights.lambda_cari * cari
    if not np.isfinite(out):
        raise ValueError("non-finite loss total")
    return float(out)


def perceptual_gradient(d_g, d_p, weights: LossWeights) -> np.ndarray:
    """Analytic gradient of lambda_cha * L_cha + lambda_cari * L_cari with
    respect to d_g.

    d/dg (1 - cos)          = cos * g / |g|^2 - p / (|g| |p|)
    d/dg exp(-(g.p)/|p|^2)  = -exp(-(g.p)/|p|^2) * p / |p|^2
    """
    g = _as_array(d_g)
    p = _as_array(d_p)
    ng, np_ = _norms(g, p)
    cos = float(np.dot(g, p) / (ng * np_))
    grad_cha = cos * g / ng**2 - p / (ng * np_)
    grad_cari = -np.exp(-np.dot(g, p) / np_**2) * p / np_**2
    return weights.lambda_cha * grad_cha + weights.lambda_cari * grad_cari


def perceptual_gradient_batch(
    d_g: np.ndarray, d_p: np.ndarray, weights: LossWeights
) -> np.ndarray:
    """Row-wise :func:`perceptual_gradient` for (n, dim) batches, scaled by
    1/n so it is the gradient of the batch-mean loss."""
    g, p = _batch(d_g, d_p)
    ng = np.linalg.norm(g, axis=1)
    np_ = np.linalg.norm(p, axis=1)
    if (ng == 0).any() or (np_ == 0).any():
        raise UndefinedIdentityError("zero-norm feature vector in batch")
    cos = np.sum(g * p, axis=1) / (ng * np_)
    grad_cha = cos[:, None] * g / (ng**2)[:, None] - p / (ng * np_)[:, None]
    expo = np.exp(-np.sum(g * p, axis=1) / np_**2)
    grad_cari = -expo[:, None] * p / (np_**2)[:, None]
    return (weights.lambda_cha * grad_cha + weights.lambda_cari * grad_cari) / g.shape[0]
