"""Model zoo: layer specs, shape-checked builders, and encoder mirroring.

A Model is a named list of layer specs plus its parameter tensors.  The
shape chain is validated at build time so a bad stack fails before any
training starts.  Weights use fan-in uniform init with limit sqrt(6/fan_in);
building twice with the same seed gives identical tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ops
from .nn.tensor import Tensor
from .seeding import seeded_rng


class BuildError(ValueError):
    pass


# kinds with no parameters or shape bookkeeping beyond pass-through
_STATELESS = {"relu", "softmax", "identity"}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    channels: int = 0  # conv / transposed_conv output channels
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    units: int = 0  # dense
    window: int = 0  # maxpool (stride defaults to the window)
    scale: int = 0  # unpool


def conv(channels, kernel, stride=1, padding=0):
    return LayerSpec("conv", channels=channels, kernel=kernel, stride=stride, padding=padding)


def tconv(channels, kernel, stride=1, padding=0):
    return LayerSpec(
        "transposed_conv", channels=channels, kernel=kernel, stride=stride, padding=padding
    )


def maxpool(window, stride=None):
    return LayerSpec("maxpool", window=window, stride=window if stride is None else stride)


def unpool(scale):
    return LayerSpec("unpool", scale=scale)


def dense(units):
    return LayerSpec("dense", units=units)


def batchnorm():
    return LayerSpec("batchnorm")


def relu():
    return LayerSpec("relu")


def softmax():
    return LayerSpec("softmax")


def flatten():
    return LayerSpec("flatten")


def identity():
    return LayerSpec("identity")


def _infer_shape(shape: tuple, spec: LayerSpec, where: str) -> tuple:
    kind = spec.kind
    if kind in _STATELESS or kind == "batchnorm":
        return shape
    if kind == "flatten":
        return (int(np.prod(shape)),)
    if kind == "dense":
        if len(shape) != 1:
            raise BuildError("%s: dense needs a flat input, got %r" % (where, shape))
        return (spec.units,)
    if len(shape) != 3:
        raise BuildError("%s: %s needs a (C,H,W) input, got %r" % (where, kind, shape))
    c, h, w = shape
    try:
        if kind == "conv":
            return (
                spec.channels,
                ops.conv_out_size(h, spec.kernel, spec.stride, spec.padding),
                ops.conv_out_size(w, spec.kernel, spec.stride, spec.padding),
            )
        if kind == "transposed_conv":
            return (
                spec.channels,
                ops.tconv_out_size(h, spec.kernel, spec.stride, spec.padding),
                ops.tconv_out_size(w, spec.kernel, spec.stride, spec.padding),
            )
        if kind == "maxpool":
            if spec.window > h or spec.window > w:
                raise ValueError("window %d exceeds %dx%d" % (spec.window, h, w))
            return (
                c,
                (h - spec.window) // spec.stride + 1,
                (w - spec.window) // spec.stride + 1,
            )
        if kind == "unpool":
            return (c, h * spec.scale, w * spec.scale)
    except ValueError as err:
        raise BuildError("%s: %s" % (where, err)) from err
    raise BuildError("%s: unknown layer kind %r" % (where, kind))


class Model:
    def __init__(self, name, input_shape, layers, params, stats, shapes):
        self.name = name
        self.input_shape = tuple(input_shape)
        self.layers = list(layers)
        self.params = params  # dict name -> Tensor (trainable)
        self.stats = stats  # dict name -> np.ndarray (batchnorm running stats)
        self.shapes = shapes  # per-layer output shapes, shapes[-1] is the output
        self.mode = "train"

    @property
    def output_shape(self):
        return self.shapes[-1]

    def train_mode(self):
        self.mode = "train"
        return self

    def infer_mode(self):
        self.mode = "infer"
        return self

    def tensors(self) -> dict[str, np.ndarray]:
        """All weights and running stats, in stable insertion order."""
        out = {k: t.data for k, t in self.params.items()}
        out.update(self.stats)
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]):
        want = {k: t.data.shape for k, t in self.params.items()}
        want.update({k: v.shape for k, v in self.stats.items()})
        if set(tensors) != set(want):
            missing = sorted(set(want) - set(tensors))
            extra = sorted(set(tensors) - set(want))
            raise BuildError(
                "tensor names do not match model %r (missing %r, unexpected %r)"
                % (self.name, missing, extra)
            )
        for k, v in tensors.items():
            if v.shape != want[k]:
                raise BuildError(
                    "tensor %r has shape %r, model %r expects %r"
                    % (k, v.shape, self.name, want[k])
                )
            if k in self.params:
                self.params[k].data = v.astype(np.float32)
            else:
                self.stats[k] = v.astype(np.float32)
        return self


def build(name: str, input_shape: tuple, specs: list[LayerSpec], seed: int = 0) -> Model:
    rng = seeded_rng(seed, "init", name)
    params: dict[str, Tensor] = {}
    stats: dict[str, np.ndarray] = {}
    shapes = []
    shape = tuple(int(s) for s in input_shape)

    def uniform(fan_in, size):
        limit = float(np.sqrt(6.0 / fan_in))
        return Tensor(rng.uniform(-limit, limit, size).astype(np.float32), requires_grad=True)

    for i, spec in enumerate(specs):
        where = "%s layer %d (%s)" % (name, i, spec.kind)
        out_shape = _infer_shape(shape, spec, where)
        key = "%d.%s" % (i, spec.kind)
        if spec.kind == "conv":
            c = shape[0]
            fan = c * spec.kernel * spec.kernel
            params[key + ".w"] = uniform(fan, (spec.channels, c, spec.kernel, spec.kernel))
            params[key + ".b"] = Tensor(np.zeros(spec.channels, np.float32), requires_grad=True)
        elif spec.kind == "transposed_conv":
            c = shape[0]
            fan = c * spec.kernel * spec.kernel
            params[key + ".w"] = uniform(fan, (c, spec.channels, spec.kernel, spec.kernel))
            params[key + ".b"] = Tensor(np.zeros(spec.channels, np.float32), requires_grad=True)
        elif spec.kind == "dense":
            params[key + ".w"] = uniform(shape[0], (shape[0], spec.units))
            params[key + ".b"] = Tensor(np.zeros(spec.units, np.float32), requires_grad=True)
        elif spec.kind == "batchnorm":
            c = shape[0]
            params[key + ".gamma"] = Tensor(np.ones(c, np.float32), requires_grad=True)
            params[key + ".beta"] = Tensor(np.zeros(c, np.float32), requires_grad=True)
            stats[key + ".mean"] = np.zeros(c, np.float32)
            stats[key + ".var"] = np.ones(c, np.float32)
        shape = out_shape
        shapes.append(shape)
    if not specs:
        raise BuildError("%s: empty layer list" % name)
    return Model(name, input_shape, specs, params, stats, shapes)


def forward(model: Model, x) -> Tensor:
    """Run the stack; input is (N, *input_shape) as Tensor or ndarray."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if tuple(x.shape[1:]) != model.input_shape:
        raise ValueError(
            "%s expects input (N, %s), got %r"
            % (model.name, ", ".join(map(str, model.input_shape)), tuple(x.shape))
        )
    out = x
    for i, spec in enumerate(model.layers):
        key = "%d.%s" % (i, spec.kind)
        kind = spec.kind
        if kind == "conv":
            out = ops.conv2d(
                out, model.params[key + ".w"], model.params[key + ".b"], spec.stride, spec.padding
            )
        elif kind == "transposed_conv":
            out = ops.transposed_conv2d(
                out, model.params[key + ".w"], model.params[key + ".b"], spec.stride, spec.padding
            )
        elif kind == "maxpool":
            out = ops.maxpool2d(out, spec.window, spec.stride)[0]
        elif kind == "unpool":
            out = ops.unpool_nearest(out, spec.scale)
        elif kind == "batchnorm":
            stats = {"mean": model.stats[key + ".mean"], "var": model.stats[key + ".var"]}
            out = ops.batchnorm(
                out, model.params[key + ".gamma"], model.params[key + ".beta"], stats, model.mode
            )
            model.stats[key + ".mean"] = stats["mean"]
            model.stats[key + ".var"] = stats["var"]
        elif kind == "dense":
            out = ops.dense(out, model.params[key + ".w"], model.params[key + ".b"])
        elif kind == "relu":
            out = ops.relu(out)
        elif kind == "softmax":
            out = ops.softmax(out)
        elif kind == "flatten":
            out = out.reshape((out.shape[0], -1))
        elif kind == "identity":
            pass
    return out


# -- builders ----------------------------------------------------------------


def build_encoder(input_shape: tuple, preset: str = "lenet", seed: int = 0) -> Model:
    """Convolutional feature encoder (no dense head; features stay spatial)."""
    if len(input_shape) != 3:
        raise BuildError("encoder input must be (C,H,W), got %r" % (input_shape,))
    c, h, w = input_shape
    if preset == "lenet":
        if h < 8 or w < 8:
            raise BuildError("lenet preset needs spatial size >= 8, got %dx%d" % (h, w))
        if h % 4 or w % 4:
            raise BuildError("lenet preset pools twice; %dx%d is not divisible by 4" % (h, w))
        specs = [
            conv(8, 5, 1, 2),
            batchnorm(),
            relu(),
            maxpool(2, 2),
            conv(16, 5, 1, 2),
            batchnorm(),
            relu(),
            maxpool(2, 2),
        ]
    elif preset == "plain":
        # batchnorm-free variant; mirrors back and forth exactly
        specs = [conv(8, 5, 1, 2), relu(), maxpool(2, 2), conv(16, 5, 1, 2), relu(), maxpool(2, 2)]
    elif preset == "identity":
        # pass-through: released features are the raw input, zero privacy
        specs = [identity()]
    else:
        raise BuildError("unknown encoder preset %r" % preset)
    return build("encoder", input_shape, specs, seed)


def build_mlp_classifier(
    feature_shape: tuple, num_classes: int, hidden: list[int], seed: int = 0,
    name: str = "classifier",
) -> Model:
    specs = [flatten()]
    for width in hidden:
        specs.append(dense(int(width)))
        specs.append(relu())
    specs.append(dense(int(num_classes)))
    specs.append(softmax())
    return build(name, feature_shape, specs, seed)


def build_reconstructor(
    feature_shape: tuple, target_shape: tuple, preset: str = "deconv", seed: int = 0,
    name: str = "reconstructor",
) -> Model:
    """Feature-to-image decoder derived from the two shapes.

    Each doubling of spatial size is one unpool + 5x5 transposed conv
    stage; equal sizes use a single 1x1 transposed conv.  Ratios that are
    not powers of two are not reachable and fail the build.
    """
    if preset != "deconv":
        raise BuildError("unknown reconstructor preset %r" % preset)
    if len(feature_shape) != 3 or len(target_shape) != 3:
        raise BuildError(
            "reconstructor maps (C,H,W) to (C,H,W), got %r -> %r"
            % (feature_shape, target_shape)
        )
    c, h, w = feature_shape
    tc, th, tw = target_shape
    if th % h or tw % w or (th // h) != (tw // w):
        raise BuildError(
            "target %dx%d is not an integer multiple of features %dx%d" % (th, tw, h, w)
        )
    ratio = th // h
    doublings = 0
    while ratio > 1:
        if ratio % 2:
            raise BuildError("spatial ratio %d is not a power of two" % (th // h))
        ratio //= 2
        doublings += 1
    if doublings == 0:
        specs = [tconv(tc, 1, 1, 0)]
    else:
        specs = []
        ch = c
        for stage in range(doublings):
            last = stage == doublings - 1
            out_ch = tc if last else max(tc, ch // 2)
            specs.append(unpool(2))
            specs.append(tconv(out_ch, 5, 1, 2))
            if not last:
                specs.append(relu())
            ch = out_ch
    model = build(name, feature_shape, specs, seed)
    if model.output_shape != tuple(target_shape):
        raise BuildError(
            "reconstructor reaches %r instead of %r" % (model.output_shape, tuple(target_shape))
        )
    return model


_MIRRORABLE = {"conv", "transposed_conv", "maxpool", "unpool", "batchnorm", "relu", "identity"}


def mirror_of(encoder: Model, seed: int = 0, name: str = "mirror") -> Model:
    """Layer-reversed decoder: conv <-> transposed conv, pool <-> unpool.

    Batchnorm has no spatial inverse and maps to identity.  Parameters are
    fresh, not transposed copies.  The result maps the encoder's output
    shape back to its input shape.
    """
    in_shapes = [encoder.input_shape] + list(encoder.shapes[:-1])
    specs: list[LayerSpec] = []
    for spec, in_shape in reversed(list(zip(encoder.layers, in_shapes))):
        kind = spec.kind
        if kind not in _MIRRORABLE:
            raise BuildError("cannot mirror layer kind %r" % kind)
        if kind == "conv":
            specs.append(tconv(in_shape[0], spec.kernel, spec.stride, spec.padding))
        elif kind == "transposed_conv":
            specs.append(conv(in_shape[0], spec.kernel, spec.stride, spec.padding))
        elif kind == "maxpool":
            if spec.window != spec.stride:
                raise BuildError(
                    "maxpool window %d != stride %d has no unpool mirror"
                    % (spec.window, spec.stride)
                )
            specs.append(unpool(spec.window))
        elif kind == "unpool":
            specs.append(maxpool(spec.scale, spec.scale))
        elif kind == "batchnorm":
            specs.append(identity())
        else:
            specs.append(LayerSpec(kind))
    model = build(name, encoder.output_shape, specs, seed)
    if model.output_shape != encoder.input_shape:
        raise BuildError(
            "mirror reaches %r instead of encoder input %r"
            % (model.output_shape, encoder.input_shape)
        )
    return model
