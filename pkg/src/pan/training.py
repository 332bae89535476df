"""Alternating four-stage training of the encoder and its adversaries.

Per batch, k inner steps run three descents: (a) encoder+classifier on the
task loss, (b) the attribute discriminator on its own loss against frozen
features, (c) the reconstructor likewise.  One final step then descends the
combined objective

    C = l1 * task_ce - l2 * reconstruction_mse - l3 * attribute_ce

with respect to the encoder and task classifier only, which pushes the
features toward utility and away from whatever the two adversaries can
currently exploit.  Stages (b) and (c) never touch encoder weights; each
stage keeps its own Adam state.

Setting lambda3 = 0 drops the discriminator entirely (reconstruction-only
privacy).  Setting lambda2 = 0 keeps the reconstructor training as a probe
but removes its term from C, and with both zero the loop is observationally
a plain supervised classifier: same losses, same weights, step for step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Batch, Dataset, batches
from .errors import ConfigError, TrainingDiverged
from .models import (
    Model,
    build_encoder,
    build_mlp_classifier,
    build_reconstructor,
    forward,
    mirror_of,
)
from .nn import adam_init, adam_step, cross_entropy, gradients, mse, no_grad
from .nn.tensor import Tensor, mul, sub


@dataclass
class TrainingConfig:
    lambda1: float = 0.4
    lambda2: float = 0.3
    lambda3: float = 0.3
    inner_steps: int = 3  # k
    epochs: int = 20
    batch_size: int = 64
    lr_utility: float = 1e-3  # stage a
    lr_privacy_d: float = 1e-3  # stage b
    lr_privacy_r: float = 1e-3  # stage c
    lr_adversarial: float = 1e-3  # combined stage
    seed: int = 0


@dataclass
class Architectures:
    encoder_preset: str = "lenet"
    ud_hidden: tuple = (128,)
    pd_hidden: tuple = (128,)
    pr_preset: str = "mirror"  # co-trained reconstructor: "mirror" or "deconv"


@dataclass
class PanModels:
    encoder: Model
    utility: Model
    privacy_d: Model | None
    privacy_r: Model


@dataclass
class EpochRecord:
    epoch: int
    c_u: float
    c_p1: float
    c_p2: float
    c_sum: float
    seconds: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)


def validate_training_config(config: TrainingConfig, dataset: Dataset | None = None):
    if config.lambda1 <= 0:
        raise ConfigError("lambda1 must be positive (the task has to matter)")
    if config.lambda2 < 0 or config.lambda3 < 0:
        raise ConfigError("lambda2 and lambda3 must be non-negative")
    if config.inner_steps < 1:
        raise ConfigError("inner_steps must be at least 1")
    if config.epochs < 1 or config.batch_size < 1:
        raise ConfigError("epochs and batch_size must be at least 1")
    for name in ("lr_utility", "lr_privacy_d", "lr_privacy_r", "lr_adversarial"):
        if getattr(config, name) <= 0:
            raise ConfigError("%s must be positive" % name)
    if config.lambda3 > 0 and dataset is not None and dataset.z is None:
        raise ConfigError("lambda3 > 0 needs private labels (z) in the dataset")


def compute_c_sum(
    batch: Batch,
    encoder: Model,
    ud: Model,
    pd: Model | None,
    pr: Model,
    lambda1: float,
    lambda2: float,
    lambda3: float,
) -> Tensor:
    """Combined objective on one batch; zero-weight terms are not built."""
    if lambda3 > 0 and pd is None:
        raise ConfigError("lambda3 > 0 but no attribute discriminator was built")
    if lambda3 > 0 and batch.z is None:
        raise ConfigError("lambda3 > 0 but the batch carries no private labels")
    x = Tensor(batch.images)
    feats = forward(encoder, x)
    total = mul(cross_entropy(forward(ud, feats), batch.y), float(lambda1))
    if lambda2 > 0:
        total = sub(total, mul(mse(forward(pr, feats), x), float(lambda2)))
    if lambda3 > 0:
        total = sub(total, mul(cross_entropy(forward(pd, feats), batch.z), float(lambda3)))
    return total


def _check_finite(value: float, stage: str, epoch: int):
    if not np.isfinite(value):
        raise TrainingDiverged("%s loss went non-finite in epoch %d" % (stage, epoch))


def _prefixed(model: Model) -> dict:
    return {model.name + "." + k: v for k, v in model.params.items()}


def train_pan(
    dataset: Dataset,
    config: TrainingConfig,
    arch: Architectures | None = None,
    log=None,
) -> tuple[PanModels, TrainingHistory]:
    arch = arch or Architectures()
    validate_training_config(config, dataset)
    seed = config.seed

    encoder = build_encoder(dataset.sample_shape, arch.encoder_preset, seed=seed)
    feature_shape = encoder.output_shape
    ud = build_mlp_classifier(
        feature_shape, dataset.num_classes_y, list(arch.ud_hidden), seed=seed, name="utility"
    )
    pd = None
    if config.lambda3 > 0:
        pd = build_mlp_classifier(
            feature_shape, dataset.num_classes_z, list(arch.pd_hidden), seed=seed,
            name="privacy_d",
        )
    if arch.pr_preset == "mirror":
        pr = mirror_of(encoder, seed=seed, name="privacy_r")
    else:
        pr = build_reconstructor(
            feature_shape, dataset.sample_shape, arch.pr_preset, seed=seed, name="privacy_r"
        )

    task_params = {**_prefixed(encoder), **_prefixed(ud)}
    st_task = adam_init(task_params)
    st_combined = adam_init(task_params)
    st_pd = adam_init(pd.params) if pd is not None else None
    st_pr = adam_init(pr.params)

    history = TrainingHistory()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        sums = np.zeros(4)
        n_batches = 0
        for batch in batches(dataset, config.batch_size, seed, epoch):
            x = Tensor(batch.images)
            c_u = c_p1 = c_p2 = 0.0
            for _ in range(config.inner_steps):
                # (a) task descent through encoder + classifier
                loss_u = cross_entropy(forward(ud, forward(encoder, x)), batch.y)
                c_u = float(loss_u.data)
                _check_finite(c_u, "utility", epoch)
                adam_step(task_params, gradients(loss_u, task_params), st_task,
                          config.lr_utility)
                # stages (b) and (c) share one frozen-feature forward;
                # neither updates the encoder, so the features are current
                with no_grad():
                    feats = forward(encoder, x)
                # (b) attribute discriminator against frozen features
                if pd is not None:
                    loss_p1 = cross_entropy(forward(pd, feats), batch.z)
                    c_p1 = float(loss_p1.data)
                    _check_finite(c_p1, "attribute discriminator", epoch)
                    adam_step(pd.params, gradients(loss_p1, pd.params), st_pd,
                              config.lr_privacy_d)
                # (c) reconstructor against frozen features
                loss_p2 = mse(forward(pr, feats), x)
                c_p2 = float(loss_p2.data)
                _check_finite(c_p2, "reconstructor", epoch)
                adam_step(pr.params, gradients(loss_p2, pr.params), st_pr,
                          config.lr_privacy_r)
            # combined objective, encoder + task classifier only
            c_sum = compute_c_sum(
                batch, encoder, ud, pd, pr, config.lambda1, config.lambda2, config.lambda3
            )
            c_sum_val = float(c_sum.data)
            _check_finite(c_sum_val, "combined", epoch)
            adam_step(task_params, gradients(c_sum, task_params), st_combined,
                      config.lr_adversarial)
            sums += (c_u, c_p1, c_p2, c_sum_val)
            n_batches += 1
        means = sums / max(n_batches, 1)
        record = EpochRecord(
            epoch=epoch,
            c_u=float(means[0]),
            c_p1=float(means[1]),
            c_p2=float(means[2]),
            c_sum=float(means[3]),
            seconds=time.perf_counter() - t0,
        )
        history.records.append(record)
        if log is not None:
            log(
                "epoch %d  c_u %.4f  c_p1 %.4f  c_p2 %.4f  c_sum %.4f  (%.1fs)"
                % (record.epoch, record.c_u, record.c_p1, record.c_p2, record.c_sum,
                   record.seconds)
            )
    return PanModels(encoder=encoder, utility=ud, privacy_d=pd, privacy_r=pr), history


def train_plain_dnn(
    dataset: Dataset,
    config: TrainingConfig,
    arch: Architectures | None = None,
    log=None,
) -> tuple[PanModels, TrainingHistory]:
    """Conventional supervised baseline: the same loop with both privacy
    weights forced to zero, so it shares every code path and random draw."""
    plain = replace(config, lambda2=0.0, lambda3=0.0)
    return train_pan(dataset, plain, arch, log)
