"""Plain-text run configuration.

Files are UTF-8 `key=value` lines with `#` comments and dotted section
keys (`train.lambda1=0.4`).  Every key must appear in the schema below;
unknown or duplicate keys are rejected by name.  Serialization emits every
key in schema order with canonical value formatting, so parse -> serialize
-> parse is a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .training import Architectures, TrainingConfig


@dataclass
class DatasetConfig:
    kind: str = "synthetic"  # synthetic | digits | mnist
    dir: str = ""  # directory holding the four standard idx files
    train_images: str = ""  # explicit paths override dir
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    size: int = 16  # side length for generated datasets
    train_count: int = 5000
    test_count: int = 1000


@dataclass
class SweepConfig:
    lambda1: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    lambda3: float = 0.0  # lambda2 is always 1 - lambda1 - lambda3


@dataclass
class EvalConfig:
    attacker_epochs: int = 15
    attacker_lr: float = 1e-3
    attacker_batch: int = 64
    widths: tuple = ((128,), (256,))  # one classifier per width preset
    lambda1: float = 0.4  # scoring weights, independent of training weights
    lambda2: float = 0.3
    lambda3: float = 0.3
    sign: str = "+"


@dataclass
class BaselineConfig:
    dp_factors: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    fl_sigma: float = 40.0
    fl_sigma_scale: str = "raw"  # raw: sigma is on 0..255 pixels, divide by 255
    hybrid_components: int = 32
    hybrid_factors: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass
class OutputConfig:
    dir: str = "out"


@dataclass
class ReportConfig:
    figures: bool = True


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    arch: Architectures = field(default_factory=Architectures)
    train: TrainingConfig = field(default_factory=TrainingConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    report: ReportConfig = field(default_factory=ReportConfig)


# -- value codecs --------------------------------------------------------------


class _Int:
    def parse(self, v):
        try:
            return int(v)
        except ValueError:
            raise ConfigError("expected an integer, got %r" % v) from None

    def fmt(self, v):
        return str(int(v))


class _Float:
    def parse(self, v):
        try:
            return float(v)
        except ValueError:
            raise ConfigError("expected a number, got %r" % v) from None

    def fmt(self, v):
        return repr(float(v))


class _Str:
    def parse(self, v):
        return v

    def fmt(self, v):
        if "#" in v or "\n" in v or v != v.strip():
            raise ConfigError("string %r cannot be written to a config file" % v)
        return v


class _Bool:
    def parse(self, v):
        if v == "true":
            return True
        if v == "false":
            return False
        raise ConfigError("expected true or false, got %r" % v)

    def fmt(self, v):
        return "true" if v else "false"


class _Choice:
    def __init__(self, options):
        self.options = options

    def parse(self, v):
        if v not in self.options:
            raise ConfigError("expected one of %s, got %r" % ("/".join(self.options), v))
        return v

    def fmt(self, v):
        return self.parse(v)


class _Floats:
    def parse(self, v):
        if not v.strip():
            raise ConfigError("expected a comma separated list of numbers")
        return tuple(_FLOAT.parse(part.strip()) for part in v.split(","))

    def fmt(self, v):
        return ",".join(repr(float(x)) for x in v)


class _Widths:
    """Comma separated layer widths; empty means no hidden layers."""

    def parse(self, v):
        if not v.strip():
            return ()
        return tuple(_INT.parse(part.strip()) for part in v.split(","))

    def fmt(self, v):
        return ",".join(str(int(x)) for x in v)


class _WidthSets:
    """Pipe separated alternatives, each a comma separated width list."""

    def parse(self, v):
        if not v.strip():
            raise ConfigError("expected at least one width preset")
        return tuple(_WIDTHS.parse(part.strip()) for part in v.split("|"))

    def fmt(self, v):
        return "|".join(_WIDTHS.fmt(x) for x in v)


_INT = _Int()
_FLOAT = _Float()
_STR = _Str()
_BOOL = _Bool()
_WIDTHS = _Widths()
_FLOATS = _Floats()
_WIDTHSETS = _WidthSets()

# key -> (RunConfig attribute, field on that section, codec)
SCHEMA = {
    "dataset.kind": ("dataset", "kind", _Choice(("synthetic", "digits", "mnist"))),
    "dataset.dir": ("dataset", "dir", _STR),
    "dataset.train_images": ("dataset", "train_images", _STR),
    "dataset.train_labels": ("dataset", "train_labels", _STR),
    "dataset.test_images": ("dataset", "test_images", _STR),
    "dataset.test_labels": ("dataset", "test_labels", _STR),
    "dataset.size": ("dataset", "size", _INT),
    "dataset.train_count": ("dataset", "train_count", _INT),
    "dataset.test_count": ("dataset", "test_count", _INT),
    "arch.encoder": ("arch", "encoder_preset", _Choice(("lenet", "plain", "identity"))),
    "arch.ud_hidden": ("arch", "ud_hidden", _WIDTHS),
    "arch.pd_hidden": ("arch", "pd_hidden", _WIDTHS),
    "arch.pr": ("arch", "pr_preset", _Choice(("mirror", "deconv"))),
    "train.lambda1": ("train", "lambda1", _FLOAT),
    "train.lambda2": ("train", "lambda2", _FLOAT),
    "train.lambda3": ("train", "lambda3", _FLOAT),
    "train.inner_steps": ("train", "inner_steps", _INT),
    "train.epochs": ("train", "epochs", _INT),
    "train.batch_size": ("train", "batch_size", _INT),
    "train.lr_utility": ("train", "lr_utility", _FLOAT),
    "train.lr_privacy_d": ("train", "lr_privacy_d", _FLOAT),
    "train.lr_privacy_r": ("train", "lr_privacy_r", _FLOAT),
    "train.lr_adversarial": ("train", "lr_adversarial", _FLOAT),
    "train.seed": ("train", "seed", _INT),
    "sweep.lambda1": ("sweep", "lambda1", _FLOATS),
    "sweep.lambda3": ("sweep", "lambda3", _FLOAT),
    "eval.attacker_epochs": ("eval", "attacker_epochs", _INT),
    "eval.attacker_lr": ("eval", "attacker_lr", _FLOAT),
    "eval.attacker_batch": ("eval", "attacker_batch", _INT),
    "eval.widths": ("eval", "widths", _WIDTHSETS),
    "eval.lambda1": ("eval", "lambda1", _FLOAT),
    "eval.lambda2": ("eval", "lambda2", _FLOAT),
    "eval.lambda3": ("eval", "lambda3", _FLOAT),
    "eval.sign": ("eval", "sign", _Choice(("+", "-"))),
    "baseline.dp_factors": ("baseline", "dp_factors", _FLOATS),
    "baseline.fl_sigma": ("baseline", "fl_sigma", _FLOAT),
    "baseline.fl_sigma_scale": ("baseline", "fl_sigma_scale", _Choice(("raw", "normalized"))),
    "baseline.hybrid_components": ("baseline", "hybrid_components", _INT),
    "baseline.hybrid_factors": ("baseline", "hybrid_factors", _FLOATS),
    "output.dir": ("output", "dir", _STR),
    "report.figures": ("report", "figures", _BOOL),
}


def parse_config(text: str) -> RunConfig:
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected key=value, got %r" % (lineno, raw.strip()))
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ConfigError("line %d: unknown config key %r" % (lineno, key))
        if key in seen:
            raise ConfigError("line %d: duplicate key %r (first on line %d)" % (lineno, key, seen[key][1]))
        seen[key] = (val, lineno)
    cfg = RunConfig()
    for key, (val, lineno) in seen.items():
        section, attr, codec = SCHEMA[key]
        try:
            parsed = codec.parse(val)
        except ConfigError as e:
            raise ConfigError("line %d: key %r: %s" % (lineno, key, e)) from None
        setattr(getattr(cfg, section), attr, parsed)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    last_section = None
    for key, (section, attr, codec) in SCHEMA.items():
        if section != last_section:
            if last_section is not None:
                lines.append("")
            lines.append("# %s" % key.split(".", 1)[0])
            last_section = section
        lines.append("%s=%s" % (key, codec.fmt(getattr(getattr(cfg, section), attr))))
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("cannot read config %s: %s" % (path, e)) from None
    return parse_config(text)


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(serialize_config(cfg), encoding="utf-8")
