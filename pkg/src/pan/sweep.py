"""Privacy-budget sweep: retrain across weightings, evaluate each encoder.

Each run fixes lambda3 and a value of lambda1, with lambda2 = 1 - lambda1
- lambda3, so the whole sweep walks the utility/reconstruction tradeoff
with a constant total weight.
"""

from __future__ import annotations

from dataclasses import replace

from .data import Dataset
from .errors import ConfigError
from .evaluation import AttackerBudget, TradeoffPoint, evaluate_encoder
from .training import Architectures, TrainingConfig, train_pan


def run_lambda_sweep(
    dataset: Dataset,
    base: TrainingConfig,
    lambda1_values,
    lambda3: float = 0.0,
    arch: Architectures | None = None,
    budget: AttackerBudget | None = None,
    score_lambdas: tuple[float, float, float] = (0.4, 0.3, 0.3),
    sign: str = "+",
    log=None,
) -> list[tuple[str, TradeoffPoint]]:
    rows = []
    for lambda1 in lambda1_values:
        lambda2 = 1.0 - lambda1 - lambda3
        if lambda2 < 0:
            raise ConfigError(
                "sweep point lambda1=%g lambda3=%g leaves lambda2=%g < 0"
                % (lambda1, lambda3, lambda2)
            )
        config = replace(base, lambda1=lambda1, lambda2=lambda2, lambda3=lambda3)
        if log is not None:
            log("sweep lambda1=%g lambda2=%g lambda3=%g" % (lambda1, lambda2, lambda3))
        models, _ = train_pan(dataset, config, arch, log)
        point = evaluate_encoder(
            models.encoder, dataset, budget, score_lambdas, sign,
            point_lambdas=(lambda1, lambda2, lambda3),
        )
        rows.append(("pan:l1=%g" % lambda1, point))
    return rows
