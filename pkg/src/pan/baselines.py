"""Privacy baselines the adversarial encoder is compared against.

Two noise mechanisms perturb raw pixels (Laplace for local differential
privacy, Gaussian as in federated aggregation); their reconstruction risk
is the noise itself, measured directly as mse(I, noisy I), with expected
values 2*b^2 and sigma^2.  The plain DNN is the same training loop with
both privacy weights at zero.  The hybrid projects plain-DNN features onto
the top-d principal components, adds Laplace noise there, and projects
back, so the noise rides on the directions that carry most signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .evaluation import (
    AttackerBudget,
    TradeoffPoint,
    attack_classifiers,
    attack_reconstructors,
    encode_features,
    evaluate_encoder,
    tradeoff_score,
)
from .models import build_reconstructor, mirror_of
from .seeding import seeded_rng
from .training import Architectures, TrainingConfig, train_plain_dnn


@dataclass
class NoiseSpec:
    mechanism: str  # "laplace" or "gaussian"
    scale: float  # Laplace b, or Gaussian sigma (already on [0,1] pixel scale)
    seed: int = 0


@dataclass
class HybridSpec:
    components: int  # d, size of the retained principal subspace
    laplace_b: float
    seed: int = 0


@dataclass
class PcaBasis:
    mean: np.ndarray  # (D,)
    components: np.ndarray  # (D, d), orthonormal columns
    eigenvalues: np.ndarray  # (d,), descending


def dp_laplace(data: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Additive Laplace(0, b) on every value; deliberately not clipped so
    the reconstruction error stays exactly the injected noise."""
    if spec.mechanism != "laplace":
        raise ConfigError("dp_laplace got mechanism %r" % spec.mechanism)
    if spec.scale < 0:
        raise ConfigError("noise scale must be non-negative")
    rng = seeded_rng(spec.seed, "noise", "laplace")
    return (data + rng.laplace(0.0, spec.scale, data.shape)).astype(np.float32)


def fl_gaussian(data: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Additive Gaussian(0, sigma^2), also unclipped."""
    if spec.mechanism != "gaussian":
        raise ConfigError("fl_gaussian got mechanism %r" % spec.mechanism)
    if spec.scale < 0:
        raise ConfigError("noise scale must be non-negative")
    rng = seeded_rng(spec.seed, "noise", "gaussian")
    return (data + rng.normal(0.0, spec.scale, data.shape)).astype(np.float32)


def expected_mse(spec: NoiseSpec) -> float:
    """Mean squared perturbation the mechanism injects per value."""
    if spec.mechanism == "laplace":
        return 2.0 * spec.scale * spec.scale
    if spec.mechanism == "gaussian":
        return spec.scale * spec.scale
    raise ConfigError("unknown mechanism %r" % spec.mechanism)


def fit_pca(features: np.ndarray, d: int) -> PcaBasis:
    """Top-d eigenvectors of the (biased) covariance of flattened rows."""
    x = features.reshape(features.shape[0], -1).astype(np.float64)
    n, dim = x.shape
    if not 1 <= d <= dim:
        raise ConfigError("component count %d outside [1, %d]" % (d, dim))
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    evals, evecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(evals)[::-1][:d]
    return PcaBasis(
        mean=mean.astype(np.float32),
        components=evecs[:, order].astype(np.float32),
        eigenvalues=evals[order].astype(np.float32),
    )


def hybrid_transform(features: np.ndarray, basis: PcaBasis, spec: HybridSpec) -> np.ndarray:
    """Project to the retained subspace, add Laplace(0, b) there, project
    back to the original feature shape."""
    if basis.components.shape[1] != spec.components:
        raise ConfigError(
            "basis has %d components, spec says %d"
            % (basis.components.shape[1], spec.components)
        )
    shape = features.shape
    x = features.reshape(shape[0], -1).astype(np.float64)
    comp = basis.components.astype(np.float64)
    proj = (x - basis.mean) @ comp
    if spec.laplace_b > 0:
        rng = seeded_rng(spec.seed, "hybrid-noise")
        proj = proj + rng.laplace(0.0, spec.laplace_b, proj.shape)
    back = proj @ comp.T + basis.mean
    return back.astype(np.float32).reshape(shape)


# -- full baseline evaluations ------------------------------------------------


def _direct_mse(clean: np.ndarray, noisy: np.ndarray) -> float:
    return float(((noisy.astype(np.float64) - clean) ** 2).mean())


def run_noise_baseline(
    dataset: Dataset,
    mechanism: str,
    scales: list[float],
    budget: AttackerBudget,
    score_lambdas: tuple[float, float, float] = (0.4, 0.3, 0.3),
    sign: str = "+",
    seed: int = 0,
) -> list[tuple[str, TradeoffPoint]]:
    """Noise-on-pixels baseline: classifiers attack the noisy images, and
    the reconstruction risk is the injected noise measured directly."""
    mech_fn = dp_laplace if mechanism == "laplace" else fl_gaussian
    short = "dp" if mechanism == "laplace" else "fl"
    rows = []
    for i, scale in enumerate(scales):
        tr_spec = NoiseSpec(
            mechanism, scale, seed=int(seeded_rng(seed, "baseline", short, "train", i).integers(2**31))
        )
        te_spec = NoiseSpec(
            mechanism, scale, seed=int(seeded_rng(seed, "baseline", short, "test", i).integers(2**31))
        )
        noisy_train = mech_fn(dataset.train_images(), tr_spec)
        noisy_test = mech_fn(dataset.test_images(), te_spec)
        utility = attack_classifiers(
            noisy_train, dataset.train_labels("y"), noisy_test, dataset.test_labels("y"),
            dataset.num_classes_y, budget, "%s%d-utility" % (short, i),
        )
        u = max(m.metric for m in utility)
        p1 = None
        if dataset.z is not None:
            privacy = attack_classifiers(
                noisy_train, dataset.train_labels("z"), noisy_test, dataset.test_labels("z"),
                dataset.num_classes_z, budget, "%s%d-attribute" % (short, i),
            )
            p1 = max(m.metric for m in privacy)
        p2 = _direct_mse(dataset.test_images(), noisy_test)
        point = TradeoffPoint(
            lambda1=score_lambdas[0], lambda2=score_lambdas[1], lambda3=score_lambdas[2],
            utility=u, p1=p1, p2=p2, log_p2=float(np.log10(1.0 + p2)), score=0.0,
        )
        point.score = tradeoff_score(point, score_lambdas, sign)
        label = "%s:%s=%g" % (short, "b" if mechanism == "laplace" else "sigma", scale)
        rows.append((label, point))
    return rows


def run_dnn_baseline(
    dataset: Dataset,
    config: TrainingConfig,
    arch: Architectures | None = None,
    budget: AttackerBudget | None = None,
    score_lambdas: tuple[float, float, float] = (0.4, 0.3, 0.3),
    sign: str = "+",
    log=None,
):
    """Plain supervised encoder, then the standard attacker evaluation."""
    models, history = train_plain_dnn(dataset, config, arch, log)
    point = evaluate_encoder(
        models.encoder, dataset, budget, score_lambdas, sign,
        point_lambdas=(config.lambda1, 0.0, 0.0),
    )
    return models, history, point


def run_hybrid_baseline(
    dataset: Dataset,
    config: TrainingConfig,
    components: int,
    factors: list[float],
    arch: Architectures | None = None,
    budget: AttackerBudget | None = None,
    score_lambdas: tuple[float, float, float] = (0.4, 0.3, 0.3),
    sign: str = "+",
    log=None,
) -> list[tuple[str, TradeoffPoint]]:
    """PCA + Laplace on plain-DNN features, swept over noise factors."""
    budget = budget or AttackerBudget()
    models, _ = train_plain_dnn(dataset, config, arch, log)
    encoder = models.encoder
    f_train = encode_features(encoder, dataset.train_images())
    f_test = encode_features(encoder, dataset.test_images())
    feature_shape = tuple(f_train.shape[1:])
    basis = fit_pca(f_train, components)
    rows = []
    for i, b in enumerate(factors):
        tr_spec = HybridSpec(
            components, b, seed=int(seeded_rng(config.seed, "baseline", "hybrid", "train", i).integers(2**31))
        )
        te_spec = HybridSpec(
            components, b, seed=int(seeded_rng(config.seed, "baseline", "hybrid", "test", i).integers(2**31))
        )
        pf_train = hybrid_transform(f_train, basis, tr_spec)
        pf_test = hybrid_transform(f_test, basis, te_spec)
        utility = attack_classifiers(
            pf_train, dataset.train_labels("y"), pf_test, dataset.test_labels("y"),
            dataset.num_classes_y, budget, "hybrid%d-utility" % i,
        )
        u = max(m.metric for m in utility)
        p1 = None
        if dataset.z is not None:
            privacy = attack_classifiers(
                pf_train, dataset.train_labels("z"), pf_test, dataset.test_labels("z"),
                dataset.num_classes_z, budget, "hybrid%d-attribute" % i,
            )
            p1 = max(m.metric for m in privacy)
        candidates = [
            (
                "generic-deconv",
                build_reconstructor(
                    feature_shape, dataset.sample_shape, "deconv",
                    seed=int(seeded_rng(budget.seed, "attacker-init", "hybrid-deconv", i).integers(2**31)),
                    name="hybrid-deconv",
                ),
            ),
            (
                "encoder-mirror",
                mirror_of(
                    encoder,
                    seed=int(seeded_rng(budget.seed, "attacker-init", "hybrid-mirror", i).integers(2**31)),
                    name="hybrid-mirror",
                ),
            ),
        ]
        recon = attack_reconstructors(
            pf_train, dataset.train_images(), pf_test, dataset.test_images(), candidates, budget
        )
        p2 = min(m.metric for m in recon)
        point = TradeoffPoint(
            lambda1=score_lambdas[0], lambda2=score_lambdas[1], lambda3=score_lambdas[2],
            utility=u, p1=p1, p2=p2, log_p2=float(np.log10(1.0 + p2)), score=0.0,
        )
        point.score = tradeoff_score(point, score_lambdas, sign)
        rows.append(("hybrid:d=%d;b=%g" % (components, b), point))
    return rows
