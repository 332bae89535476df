"""Release gate: the nine acceptance checks, one test per criterion.

Heavy desk runs (criteria 3, 4, 5, 8) share session-scoped fixtures so each
training run happens once.  The full gate is CPU-bound and takes roughly an
hour on one commodity core; everything is seeded and deterministic.
"""

import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from pan import data
from pan.baselines import NoiseSpec, dp_laplace, expected_mse, fl_gaussian
from pan.cli import main
from pan.evaluation import (
    AttackerBudget,
    TradeoffPoint,
    evaluate_encoder,
    pareto_front,
    tradeoff_score,
)
from pan.nn.gradcheck import TOLERANCE, check_all
from pan.reporting import format_history
from pan.serialization import load_tensors, save_tensors
from pan.sweep import run_lambda_sweep
from pan.training import TrainingConfig, train_pan, train_plain_dnn

DESK_BUDGET = AttackerBudget(
    epochs=15, lr=1e-3, batch_size=64, classifier_widths=((128,), (256,)), seed=0
)

PAN1_CONFIG = TrainingConfig(
    lambda1=0.3, lambda2=0.7, lambda3=0.0,
    inner_steps=3, epochs=20, batch_size=64, seed=0,
)

PAN2_CONFIG = TrainingConfig(
    lambda1=0.4, lambda2=0.3, lambda3=0.3,
    inner_steps=3, epochs=12, batch_size=64, seed=0,
)

SWEEP_EPOCHS = 8


@pytest.fixture(scope="session")
def desk_dataset():
    """Digit-recognition desk set: 5,000 train / 1,000 test at 28x28."""
    full = data.make_digits(6000, seed=0, size=28)
    return data.from_arrays(
        full.images, full.y, full.z,
        train_idx=np.arange(5000), test_idx=np.arange(5000, 6000),
    )


@pytest.fixture(scope="session")
def synth_dataset():
    """Dual-label set: independent utility and private labels, 4 classes each."""
    full = data.make_synthetic_dual(6000, seed=0, size=16)
    return data.from_arrays(
        full.images, full.y, full.z,
        train_idx=np.arange(5000), test_idx=np.arange(5000, 6000),
    )


def _timed_run(dataset, config, trainer):
    t0 = time.perf_counter()
    models, history = trainer(dataset, config)
    train_seconds = time.perf_counter() - t0
    point = evaluate_encoder(models.encoder, dataset, DESK_BUDGET, (0.4, 0.3, 0.3), "+")
    return SimpleNamespace(
        models=models, history=history, point=point,
        seconds=time.perf_counter() - t0, train_seconds=train_seconds,
    )


@pytest.fixture(scope="session")
def pan1_desk(desk_dataset):
    return _timed_run(desk_dataset, PAN1_CONFIG, train_pan)


@pytest.fixture(scope="session")
def plain_desk(desk_dataset):
    return _timed_run(desk_dataset, PAN1_CONFIG, train_plain_dnn)


@pytest.fixture(scope="session")
def pan2_synth(synth_dataset):
    return _timed_run(synth_dataset, PAN2_CONFIG, train_pan)


@pytest.fixture(scope="session")
def plain_synth(synth_dataset):
    return _timed_run(synth_dataset, PAN2_CONFIG, train_plain_dnn)


def test_01_gradient_fidelity():
    """Every layer's analytic gradient matches central differences."""
    t0 = time.perf_counter()
    reports = check_all(seed=0, cases=20)
    elapsed = time.perf_counter() - t0
    assert len(reports) == 10
    for r in reports:
        assert r.cases >= 20
        assert r.max_rel_err <= TOLERANCE, "%s rel err %.3e" % (r.name, r.max_rel_err)
    assert elapsed < 60.0


def test_02_degenerate_equivalence_bit_exact():
    """Zero privacy weights reproduce the plain supervised run, bit for bit."""
    full = data.make_digits(360, seed=7, size=20)
    ds = data.from_arrays(
        full.images, full.y, full.z,
        train_idx=np.arange(300), test_idx=np.arange(300, 360),
    )
    zeroed = TrainingConfig(lambda1=0.5, lambda2=0.0, lambda3=0.0,
                            inner_steps=2, epochs=3, batch_size=50, seed=11)
    _, hist_pan = train_pan(ds, zeroed)
    # the baseline gets nonzero weights and must force them to zero itself
    _, hist_plain = train_plain_dnn(ds, replace(zeroed, lambda2=0.7, lambda3=0.0))
    assert format_history(hist_plain) == format_history(hist_pan)


def test_03_desk_utility(pan1_desk):
    """Adversarially trained encoder keeps third-party task accuracy high."""
    assert pan1_desk.point.utility >= 90.0
    assert pan1_desk.seconds <= 30 * 60


def test_04_reconstruction_privacy_gain(pan1_desk, plain_desk):
    """Best third-party reconstructor does markedly worse against the
    adversarial features than against plain supervised features."""
    assert pan1_desk.point.p2 >= 1.5 * plain_desk.point.p2


def test_05_attribute_suppression(pan2_synth, plain_synth):
    """With a discriminator in the loop the private label becomes hard to
    infer while utility survives; the plain control stays leaky."""
    assert pan2_synth.point.p1 is not None and plain_synth.point.p1 is not None
    assert pan2_synth.point.p1 <= 40.0
    assert pan2_synth.point.utility >= 90.0
    assert plain_synth.point.p1 >= 60.0
    assert pan2_synth.seconds + plain_synth.seconds <= 20 * 60


def test_06_noise_calibration():
    """Additive mechanisms hit their analytic mean squared error."""
    clean = np.zeros(100_000, dtype=np.float32)
    for mechanism, scale in (("laplace", 0.3), ("gaussian", 0.2)):
        spec = NoiseSpec(mechanism=mechanism, scale=scale, seed=5)
        noisy = dp_laplace(clean, spec) if mechanism == "laplace" else fl_gaussian(clean, spec)
        measured = float(np.mean((noisy.astype(np.float64) - clean) ** 2))
        assert measured == pytest.approx(expected_mse(spec), rel=0.10)


def _brute_force_front(points):
    any_missing = any(p.p1 is None for p in points)

    def axes(p):
        a = [p.utility, p.log_p2]
        if not any_missing:
            a.append(100.0 - p.p1)
        return a

    def dominates(a, b):
        return all(x >= y for x, y in zip(axes(a), axes(b))) and any(
            x > y for x, y in zip(axes(a), axes(b))
        )

    return [p for p in points if not any(dominates(q, p) for q in points if q is not p)]


def test_07_tradeoff_arithmetic_and_pareto():
    """Score formula on reference values; front matches brute-force dominance."""
    case = TradeoffPoint(lambda1=0.4, lambda2=0.3, lambda3=0.3,
                         utility=99.1, p1=23.1, p2=10 ** 0.163 - 1.0,
                         log_p2=0.163, score=0.0)
    score = tradeoff_score(case, (0.4, 0.3, 0.3), "+")
    assert score == pytest.approx(62.76, abs=0.01)

    rng = np.random.default_rng(1234)
    for trial in range(100):
        n = int(rng.integers(1, 24))
        points = []
        for _ in range(n):
            p1 = None if (trial % 3 == 0 and rng.random() < 0.3) else float(rng.uniform(5, 95))
            points.append(TradeoffPoint(
                lambda1=0.3, lambda2=0.4, lambda3=0.3,
                utility=float(rng.uniform(50, 100)), p1=p1,
                p2=0.0, log_p2=float(rng.uniform(0.0, 0.3)), score=0.0,
            ))
        got = pareto_front(points)
        want = _brute_force_front(points)
        assert [id(p) for p in got] == [id(p) for p in want]


def test_08_sweep_endpoint_ordering(desk_dataset):
    """More utility weight buys accuracy; more privacy weight buys opacity."""
    base = replace(PAN1_CONFIG, epochs=SWEEP_EPOCHS)
    rows = run_lambda_sweep(
        desk_dataset, base, (0.1, 0.3, 0.5, 0.7, 0.9), 0.0,
        budget=DESK_BUDGET, score_lambdas=(0.4, 0.3, 0.3), sign="+",
    )
    by_l1 = {p.lambda1: p for _, p in rows}
    assert by_l1[0.9].utility > by_l1[0.1].utility
    assert by_l1[0.1].log_p2 > by_l1[0.9].log_p2


def test_09_serialization_and_run_determinism(tmp_path):
    """Weight files round trip bit-exact; a rerun reproduces every artifact."""
    rng = np.random.default_rng(99)
    tensors = {
        "w": rng.normal(size=(4, 3, 5, 5)).astype(np.float32),
        "b": rng.normal(size=(7,)).astype(np.float32),
        "scalar": np.float32(3.25),
    }
    path = tmp_path / "roundtrip.panw"
    save_tensors(path, "sample", tensors)
    name, back = load_tensors(path)
    assert name == "sample"
    for key, arr in tensors.items():
        got = back[key]
        assert got.shape == np.shape(arr) and got.dtype == np.float32
        assert got.tobytes() == np.asarray(arr, np.float32).tobytes()
    save_tensors(tmp_path / "again.panw", name, back)
    assert (tmp_path / "again.panw").read_bytes() == path.read_bytes()

    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "dataset.kind=digits\ndataset.size=20\n"
        "dataset.train_count=200\ndataset.test_count=40\n"
        "train.lambda1=0.5\ntrain.lambda2=0.5\ntrain.lambda3=0.0\n"
        "train.epochs=2\ntrain.batch_size=50\n"
        "report.figures=false\n"
    )
    out = tmp_path / "out"
    artifacts = ("encoder.panw", "utility.panw", "privacy_r.panw",
                 "history.csv", "run_config.txt")
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    first = {a: (out / a).read_bytes() for a in artifacts}
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    for a in artifacts:
        assert (out / a).read_bytes() == first[a], "%s changed between runs" % a
