"""Desk-scale adversarial trainer demonstrating the perceptual losses.

A linear generator maps an identity feature (the displacement of a normal
head from the mean head) to shape-space coefficients; a small discriminator
separates generated coefficient vectors from samples of the real coefficient
distribution.  Training alternates one discriminator and one generator Adam
step per iteration on the full batch, so runs are bitwise reproducible for a
fixed seed.

This is a demonstration rig for the loss terms, not a production trainer:
with the full objective the generated features align with the input identity
(cosine near 1) and overshoot its magnitude (ratio above 1); dropping the
caricature term loses the overshoot, dropping everything but the adversarial
term loses the alignment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BatchError, TrainingError, UndefinedIdentityError
from .exaggerate import MeanHead
from .losses import (
    LossWeights,
    adv_loss_discriminator,
    adv_loss_generator,
    caricature_loss_batch,
    character_loss_batch,
    perceptual_gradient_batch,
)
from .pca import CariPcaModel


@dataclass(frozen=True, eq=False)
class ToyDataset:
    """Paired training data: one identity feature row per sample plus draws
    from the real coefficient distribution."""

    features: np.ndarray      # (n, 3*n_v) identity features d_p
    real_coeffs: np.ndarray   # (n, d) samples of the real shape codes

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        c = np.asarray(self.real_coeffs, dtype=np.float64)
        if f.ndim != 2 or c.ndim != 2 or f.shape[0] != c.shape[0]:
            raise BatchError(f"inconsistent dataset shapes {f.shape} vs {c.shape}")
        if f.shape[0] == 0:
            raise BatchError("empty dataset")
        if (np.linalg.norm(f, axis=1) == 0).any():
            raise UndefinedIdentityError("dataset contains a zero identity feature")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "real_coeffs", c)

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(eq=False)
class ToyGenerator:
    """Linear map from identity features to shape-space coefficients."""

    weight: np.ndarray  # (in_dim, d)
    bias: np.ndarray    # (d,)

    def __call__(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weight + self.bias


@dataclass(eq=False)
class ToyDiscriminator:
    """Affine (or optional single-hidden-layer tanh) critic on coefficients."""

    weight: np.ndarray            # (d,) affine, or (d, h) with hidden layer
    bias: np.ndarray              # scalar array, or (h,)
    weight_out: np.ndarray | None = None  # (h,) when a hidden layer is used
    bias_out: float = 0.0

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        if self.weight_out is None:
            return coeffs @ self.weight + self.bias[0]
        hidden = np.tanh(coeffs @ self.weight + self.bias)
        return hidden @ self.weight_out + self.bias_out


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    init_scale: float = 0.01
    hidden: int = 0  # 0 = affine discriminator


@dataclass(eq=False)
class LossTrace:
    """Per-step loss values, writable as CSV."""

    steps: list[int] = field(default_factory=list)
    l_adv_d: list[float] = field(default_factory=list)
    l_adv_g: list[float] = field(default_factory=list)
    l_cha: list[float] = field(default_factory=list)
    l_cari: list[float] = field(default_factory=list)
    l_total: list[float] = field(default_factory=list)

    def append(self, step, adv_d, adv_g, cha, cari, total):
        self.steps.append(step)
        self.l_adv_d.append(adv_d)
        self.l_adv_g.append(adv_g)
        self.l_cha.append(cha)
        self.l_cari.append(cari)
        self.l_total.append(total)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "l_adv_d", "l_adv_g", "l_cha", "l_cari", "l_total"])
            for row in zip(
                self.steps, self.l_adv_d, self.l_adv_g, self.l_cha, self.l_cari, self.l_total
            ):
                writer.writerow([row[0]] + [repr(x) for x in row[1:]])


class _Adam:
    """Standard Adam update with bias correction."""

    def __init__(self, shape, lr, beta1, beta2, eps):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps

    def step(self, param: np.ndarray, grad: np.ndarray, t: int) -> np.ndarray:
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        m_hat = self.m / (1 - self.b1**t)
        v_hat = self.v / (1 - self.b2**t)
        return param - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_toy_dataset(
    model: CariPcaModel,
    n: int,
    seed: int,
    identity_basis: np.ndarray | None = None,
    identity_scale: float = 0.05,
) -> ToyDataset:
    """Synthesize identity features plus real coefficient samples.

    Identity features are random combinations of identity_basis directions
    (defaults to the model's own basis); real coefficients are drawn from a
    zero-mean Gaussian matched to the model's per-component variances.
    """
    rng = np.random.default_rng(seed)
    basis = model.basis if identity_basis is None else np.asarray(identity_basis)
    z = rng.standard_normal((n, basis.shape[1])) * identity_scale
    features = z @ basis.T
    # Resample near-zero identities; the losses are undefined for them.
    norms = np.linalg.norm(features, axis=1)
    while (norms < 1e-12).any():
        bad = norms < 1e-12
        z = rng.standard_normal((int(bad.sum()), basis.shape[1])) * identity_scale
        features[bad] = z @ basis.T
        norms = np.linalg.norm(features, axis=1)
    sigma = np.sqrt(np.maximum(model.variance_ratios, 0.0))
    scale = np.linalg.norm(features, axis=1).mean()
    real = rng.standard_normal((n, model.d)) * sigma * (3.0 * scale)
    return ToyDataset(features, real)


def synthetic_training_setup(
    seed: int,
    n_identities: int = 200,
    n_corpus: int = 60,
    grid: tuple[int, int] = (4, 3),
    k_identity: int = 6,
    d: int = 8,
    normal_scale: float = 0.05,
    cari_scale: float = 0.15,
) -> tuple[CariPcaModel, MeanHead, ToyDataset]:
    """Self-contained desk-scale setup: a caricature shape model fit on an
    exaggerated synthetic family, the matching mean head, and a dataset of
    identity features sharing the family's subspace.

    Normal identities and the caricature corpus draw from one smooth
    displacement basis with cari_scale > normal_scale, so exaggeration
    (feature norms above the input's) is reachable inside the model space.
    """
    from .pca import fit_pca
    from .synthetic import grid_mesh, smooth_displacement_basis, linear_shape_family

    rng = np.random.default_rng(seed)
    base = grid_mesh(*grid)
    mean_head = MeanHead(base)
    identity_basis = smooth_displacement_basis(base, k_identity, rng)
    corpus = linear_shape_family(base, identity_basis, n_corpus, cari_scale, rng)
    model = fit_pca(corpus, d=d)
    dataset = make_toy_dataset(
        model,
        n_identities,
        seed=int(rng.integers(0, 2**31)),
        identity_basis=identity_basis,
        identity_scale=normal_scale,
    )
    return model, mean_head, dataset


def train_toy_gan(
    dataset: ToyDataset,
    model: CariPcaModel,
    mean_head: MeanHead,
    weights: LossWeights,
    config: TrainConfig,
) -> tuple[ToyGenerator, ToyDiscriminator, LossTrace]:
    """Alternating full-batch LSGAN training with the perceptual terms.

    Returns the trained generator and discriminator plus per-step loss
    traces.  Raises TrainingError (with the step index) if any loss goes
    non-finite.
    """
    if model.mean.size != dataset.features.shape[1]:
        raise BatchError(
            f"dataset features of length {dataset.features.shape[1]} do not "
            f"match model dimension {model.mean.size}"
        )
    rng = np.random.default_rng(config.seed)
    in_dim = dataset.features.shape[1]
    d = model.d
    gen = ToyGenerator(
        rng.standard_normal((in_dim, d)) * config.init_scale,
        np.zeros(d),
    )
    if config.hidden > 0:
        disc = ToyDiscriminator(
            rng.standard_normal((d, config.hidden)) * 0.1,
            np.zeros(config.hidden),
            weight_out=rng.standard_normal(config.hidden) * 0.1,
            bias_out=0.0,
        )
    else:
        disc = ToyDiscriminator(rng.standard_normal(d) * 0.1, np.zeros(1))

    features = dataset.features
    real = dataset.real_coeffs
    n = len(dataset)
    offset = model.mean - mean_head.vector  # fixed part of d_g
    basis_t = model.basis.T

    lr = config.learning_rate
    adam_gw = _Adam(gen.weight.shape, lr, config.beta1, config.beta2, config.eps)
    adam_gb = _Adam(gen.bias.shape, lr, config.beta1, config.beta2, config.eps)
    adam_dw = _Adam(disc.weight.shape, lr, config.beta1, config.beta2, config.eps)
    adam_db = _Adam(disc.bias.shape, lr, config.beta1, config.beta2, config.eps)
    if disc.weight_out is not None:
        adam_dwo = _Adam(disc.weight_out.shape, lr, config.beta1, config.beta2, config.eps)
        adam_dbo = _Adam((), lr, config.beta1, config.beta2, config.eps)

    trace = LossTrace()
    for step in range(1, config.steps + 1):
        # --- discriminator step (generator frozen)
        alpha = gen(features)
        s_fake = disc(alpha)
        s_real = disc(real)
        if disc.weight_out is None:
            g_w = (2 * s_fake[:, None] * alpha).mean(axis=0) + (
                -2 * (1 - s_real)[:, None] * real
            ).mean(axis=0)
            g_b = np.array([(2 * s_fake).mean() - (2 * (1 - s_real)).mean()])
            disc.weight = adam_dw.step(disc.weight, g_w, step)
            disc.bias = adam_db.step(disc.bias, g_b, step)
        else:
            h_f = np.tanh(alpha @ disc.weight + disc.bias)
            h_r = np.tanh(real @ disc.weight + disc.bias)
            e_f = 2 * s_fake / n          # dL/ds per fake sample
            e_r = -2 * (1 - s_real) / n   # dL/ds per real sample
            g_wo = h_f.T @ e_f + h_r.T @ e_r
            g_bo = e_f.sum() + e_r.sum()
            back_f = (e_f[:, None] * disc.weight_out) * (1 - h_f**2)
            back_r = (e_r[:, None] * disc.weight_out) * (1 - h_r**2)
            g_w = alpha.T @ back_f + real.T @ back_r
            g_b = back_f.sum(axis=0) + back_r.sum(axis=0)
            disc.weight = adam_dw.step(disc.weight, g_w, step)
            disc.bias = adam_db.step(disc.bias, g_b, step)
            disc.weight_out = adam_dwo.step(disc.weight_out, g_wo, step)
            disc.bias_out = float(adam_dbo.step(np.float64(disc.bias_out), g_bo, step))

        # --- generator step (discriminator frozen)
        alpha = gen(features)
        s_fake = disc(alpha)
        d_g = offset + alpha @ basis_t  # (n, 3*n_v)
        grad_dg = perceptual_gradient_batch(d_g, features, weights)
        if disc.weight_out is None:
            grad_alpha_adv = (-2 * (1 - s_fake) / n)[:, None] * disc.weight
        else:
            hid = np.tanh(alpha @ disc.weight + disc.bias)
            e = -2 * (1 - s_fake) / n
            grad_alpha_adv = ((e[:, None] * disc.weight_out) * (1 - hid**2)) @ disc.weight.T
        grad_alpha = grad_alpha_adv + grad_dg @ model.basis
        gen.weight = adam_gw.step(gen.weight, features.T @ grad_alpha, step)
        gen.bias = adam_gb.step(gen.bias, grad_alpha.sum(axis=0), step)

        # --- bookkeeping
        alpha = gen(features)
        s_fake = disc(alpha)
        d_g = offset + alpha @ basis_t
        l_adv_d = adv_loss_discriminator(s_fake, disc(real))
        l_adv_g = adv_loss_generator(s_fake)
        l_cha = character_loss_batch(d_g, features)
        l_cari = caricature_loss_batch(d_g, features)
        l_total = l_adv_g + weights.lambda_cha * l_cha + weights.lambda_cari * l_cari
        if not np.isfinite(l_total) or not np.isfinite(l_adv_d):
            raise TrainingError("training diverged to a non-finite loss", step)
        trace.append(step, l_adv_d, l_adv_g, l_cha, l_cari, l_total)

    return gen, disc, trace


def generated_statistics(
    gen: ToyGenerator, dataset: ToyDataset, model: CariPcaModel, mean_head: MeanHead
) -> tuple[float, float]:
    """Mean cosine(d_g, d_p) and mean |d_g|/|d_p| over the dataset."""
    alpha = gen(dataset.features)
    d_g = (model.mean - mean_head.vector) + alpha @ model.basis.T
    d_p = dataset.features
    ng = np.linalg.norm(d_g, axis=1)
    np_ = np.linalg.norm(d_p, axis=1)
    cos = np.sum(d_g * d_p, axis=1) / (ng * np_)
    return float(cos.mean()), float((ng / np_).mean())
