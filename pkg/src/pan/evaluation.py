"""Third-party attacker evaluation of a frozen encoder.

The threat model assumes attackers who see released features and hold
labeled data of their own, but never touch the encoder weights.  Utility u
and attribute leakage p1 are the best test accuracy any classifier in the
ensemble reaches; reconstruction risk p2 is the lowest test MSE any
reconstructor reaches (the mirror of the encoder is always among them).
All attackers train under one fixed budget so comparisons across encoders
are apples to apples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .models import Model, build_mlp_classifier, build_reconstructor, forward, mirror_of
from .nn import adam_init, adam_step, cross_entropy, gradients, mse, no_grad
from .nn.tensor import Tensor
from .seeding import seeded_rng


@dataclass
class AttackerBudget:
    epochs: int = 15
    lr: float = 1e-3
    batch_size: int = 64
    classifier_widths: tuple = ((128,), (256,))
    seed: int = 0


@dataclass
class Member:
    name: str
    model: Model
    metric: float  # held-out accuracy % (classifiers) or test MSE (reconstructors)


@dataclass
class AttackerEnsemble:
    utility: list[Member]
    privacy: list[Member]
    reconstructors: list[Member]


@dataclass
class TradeoffPoint:
    lambda1: float
    lambda2: float
    lambda3: float
    utility: float
    p1: float | None
    p2: float
    log_p2: float
    score: float


def encode_features(encoder: Model, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Frozen inference pass; never mutates weights or running stats."""
    saved_mode = encoder.mode
    encoder.infer_mode()
    chunks = []
    with no_grad():
        for start in range(0, images.shape[0], batch_size):
            chunks.append(forward(encoder, images[start : start + batch_size]).data)
    encoder.mode = saved_mode
    return np.concatenate(chunks, axis=0)


def _predict_classes(model: Model, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
    saved_mode = model.mode
    model.infer_mode()
    preds = []
    with no_grad():
        for start in range(0, inputs.shape[0], batch_size):
            preds.append(forward(model, inputs[start : start + batch_size]).data.argmax(axis=-1))
    model.mode = saved_mode
    return np.concatenate(preds)


def _accuracy_percent(model: Model, inputs: np.ndarray, labels: np.ndarray) -> float:
    return 100.0 * float((_predict_classes(model, inputs) == labels).mean())


def _test_mse(model: Model, inputs: np.ndarray, targets: np.ndarray,
              batch_size: int = 256) -> float:
    saved_mode = model.mode
    model.infer_mode()
    total = 0.0
    count = 0
    with no_grad():
        for start in range(0, inputs.shape[0], batch_size):
            out = forward(model, inputs[start : start + batch_size]).data
            ref = targets[start : start + batch_size]
            total += float(((out.astype(np.float64) - ref) ** 2).sum())
            count += ref.size
    model.mode = saved_mode
    return total / count


def _train_supervised(model, inputs, make_loss, budget: AttackerBudget, role: str):
    """Shared attacker fit loop: seeded shuffles, Adam, fixed budget."""
    params = model.params
    state = adam_init(params)
    n = inputs.shape[0]
    model.train_mode()
    for epoch in range(budget.epochs):
        order = seeded_rng(budget.seed, "attacker-batches", role, epoch).permutation(n)
        for start in range(0, n, budget.batch_size):
            take = order[start : start + budget.batch_size]
            loss = make_loss(model, take)
            adam_step(params, gradients(loss, params), state, budget.lr)
    return model


def attack_classifiers(
    x_train: np.ndarray,
    labels_train: np.ndarray,
    x_test: np.ndarray,
    labels_test: np.ndarray,
    num_classes: int,
    budget: AttackerBudget,
    role: str,
) -> list[Member]:
    """Independently trained MLP heads, one per hidden-width preset."""
    members = []
    sample_shape = tuple(x_train.shape[1:])
    for i, widths in enumerate(budget.classifier_widths):
        name = "%s-mlp%s" % (role, "x".join(str(w) for w in widths))
        model = build_mlp_classifier(
            sample_shape, num_classes, list(widths),
            seed=int(seeded_rng(budget.seed, "attacker-init", role, i).integers(2**31)),
            name=name,
        )

        def ce_loss(m, take):
            return cross_entropy(forward(m, x_train[take]), labels_train[take])

        _train_supervised(model, x_train, ce_loss, budget, name)
        members.append(Member(name, model, _accuracy_percent(model, x_test, labels_test)))
    return members


def attack_reconstructors(
    f_train: np.ndarray,
    img_train: np.ndarray,
    f_test: np.ndarray,
    img_test: np.ndarray,
    candidates: list[tuple[str, Model]],
    budget: AttackerBudget,
) -> list[Member]:
    members = []
    for name, model in candidates:

        def mse_loss(m, take):
            return mse(forward(m, f_train[take]), Tensor(img_train[take]))

        _train_supervised(model, f_train, mse_loss, budget, name)
        members.append(Member(name, model, _test_mse(model, f_test, img_test)))
    return members


def train_third_party_attackers(
    encoder: Model, dataset: Dataset, budget: AttackerBudget | None = None
) -> AttackerEnsemble:
    """Fit the whole ensemble against one frozen encoder."""
    budget = budget or AttackerBudget()
    f_train = encode_features(encoder, dataset.train_images())
    f_test = encode_features(encoder, dataset.test_images())
    feature_shape = tuple(f_train.shape[1:])

    utility = attack_classifiers(
        f_train, dataset.train_labels("y"), f_test, dataset.test_labels("y"),
        dataset.num_classes_y, budget, "utility",
    )
    privacy = []
    if dataset.z is not None:
        privacy = attack_classifiers(
            f_train, dataset.train_labels("z"), f_test, dataset.test_labels("z"),
            dataset.num_classes_z, budget, "attribute",
        )
    candidates = [
        (
            "generic-deconv",
            build_reconstructor(
                feature_shape, dataset.sample_shape, "deconv",
                seed=int(seeded_rng(budget.seed, "attacker-init", "pr-deconv").integers(2**31)),
                name="attacker-deconv",
            ),
        ),
        (
            "encoder-mirror",
            mirror_of(
                encoder,
                seed=int(seeded_rng(budget.seed, "attacker-init", "pr-mirror").integers(2**31)),
                name="attacker-mirror",
            ),
        ),
    ]
    reconstructors = attack_reconstructors(
        f_train, dataset.train_images(), f_test, dataset.test_images(), candidates, budget
    )
    return AttackerEnsemble(utility=utility, privacy=privacy, reconstructors=reconstructors)


def eval_utility(encoder: Model, ensemble: AttackerEnsemble, dataset: Dataset) -> float:
    """Best task accuracy (%) any utility attacker reaches on the test split."""
    feats = encode_features(encoder, dataset.test_images())
    return max(
        _accuracy_percent(m.model, feats, dataset.test_labels("y")) for m in ensemble.utility
    )


def eval_privacy_p1(
    encoder: Model, ensemble: AttackerEnsemble, dataset: Dataset
) -> float | None:
    """Best private-attribute accuracy (%); None without private labels."""
    if not ensemble.privacy or dataset.z is None:
        return None
    feats = encode_features(encoder, dataset.test_images())
    return max(
        _accuracy_percent(m.model, feats, dataset.test_labels("z")) for m in ensemble.privacy
    )


def eval_privacy_p2(
    encoder: Model, ensemble: AttackerEnsemble, dataset: Dataset
) -> tuple[float, float]:
    """Lowest reconstruction MSE across attackers, and log10(1 + mse)."""
    feats = encode_features(encoder, dataset.test_images())
    p2 = min(_test_mse(m.model, feats, dataset.test_images()) for m in ensemble.reconstructors)
    return p2, math.log10(1.0 + p2)


def tradeoff_score(
    point: TradeoffPoint, lambdas: tuple[float, float, float], sign: str = "+"
) -> float:
    """lambda1*u + lambda2*(100 - p1) +/- lambda3*log_p2 (p1 term dropped
    when the point has no attribute attacker)."""
    if sign not in ("+", "-"):
        raise ConfigError("score sign must be '+' or '-', got %r" % sign)
    l1, l2, l3 = lambdas
    score = l1 * point.utility
    if point.p1 is not None:
        score += l2 * (100.0 - point.p1)
    score += (1.0 if sign == "+" else -1.0) * l3 * point.log_p2
    return score


def pareto_front(points: list[TradeoffPoint]) -> list[TradeoffPoint]:
    """Non-dominated subset, maximizing (u, 100-p1, log_p2) jointly.

    If any point lacks p1 the comparison drops that axis for the whole
    set, so dominance stays a uniform comparison.  Input order is kept.
    """
    use_p1 = all(p.p1 is not None for p in points)

    def key(p):
        if use_p1:
            return (p.utility, 100.0 - p.p1, p.log_p2)
        return (p.utility, p.log_p2)

    keys = [key(p) for p in points]

    def dominated(i):
        ki = keys[i]
        for j, kj in enumerate(keys):
            if j == i:
                continue
            if all(a >= b for a, b in zip(kj, ki)) and any(a > b for a, b in zip(kj, ki)):
                return True
        return False

    return [p for i, p in enumerate(points) if not dominated(i)]


def evaluate_encoder(
    encoder: Model,
    dataset: Dataset,
    budget: AttackerBudget | None = None,
    score_lambdas: tuple[float, float, float] = (0.4, 0.3, 0.3),
    sign: str = "+",
    point_lambdas: tuple[float, float, float] | None = None,
) -> TradeoffPoint:
    """Full pipeline: fit attackers, measure u/p1/p2, attach the score.

    score_lambdas weight the score; point_lambdas (default: same) are
    recorded on the point, e.g. the lambdas the encoder was trained with.
    """
    budget = budget or AttackerBudget()
    ensemble = train_third_party_attackers(encoder, dataset, budget)
    u = eval_utility(encoder, ensemble, dataset)
    p1 = eval_privacy_p1(encoder, ensemble, dataset)
    p2, log_p2 = eval_privacy_p2(encoder, ensemble, dataset)
    stamped = point_lambdas or score_lambdas
    point = TradeoffPoint(
        lambda1=stamped[0], lambda2=stamped[1], lambda3=stamped[2],
        utility=u, p1=p1, p2=p2, log_p2=log_p2, score=0.0,
    )
    return replace(point, score=tradeoff_score(point, score_lambdas, sign))
