"""Dataset loading and generation.

IDX files are parsed with strict header checks (big-endian, magic
0x00000803 for images and 0x00000801 for labels) and pixel values land in
[0, 1] as float32 with layout (N, 1, H, W).  Two generators cover the
corpus needs: a 28x28 rendered-digit set with per-sample jitter for
desk-scale classification runs, and a 16x16 dual-label set whose glyph
class (y) and background texture (z) are drawn independently, so hiding z
does not have to cost y.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .seeding import seeded_rng

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class DataError(ValueError):
    pass


def _read_u32(buf: bytes, offset: int, path: str) -> int:
    if len(buf) < offset + 4:
        raise DataError("%s: truncated header at byte %d" % (path, offset))
    return struct.unpack_from(">I", buf, offset)[0]


def _read_idx_images(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = _read_u32(buf, 0, path)
    if magic != IMAGE_MAGIC:
        raise DataError(
            "%s: bad image magic 0x%08x at byte 0 (want 0x%08x)" % (path, magic, IMAGE_MAGIC)
        )
    count = _read_u32(buf, 4, path)
    rows = _read_u32(buf, 8, path)
    cols = _read_u32(buf, 12, path)
    want = 16 + count * rows * cols
    if len(buf) != want:
        raise DataError(
            "%s: payload is %d bytes, header at bytes 4-15 promises %d"
            % (path, len(buf) - 16, want - 16)
        )
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=16)
    return pixels.reshape(count, 1, rows, cols).astype(np.float32) / 255.0


def _read_idx_labels(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = _read_u32(buf, 0, path)
    if magic != LABEL_MAGIC:
        raise DataError(
            "%s: bad label magic 0x%08x at byte 0 (want 0x%08x)" % (path, magic, LABEL_MAGIC)
        )
    count = _read_u32(buf, 4, path)
    if len(buf) != 8 + count:
        raise DataError(
            "%s: payload is %d bytes, header at bytes 4-7 promises %d"
            % (path, len(buf) - 8, count)
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=8).astype(np.int64)


def load_idx(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label file pair; counts must agree."""
    images = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataError(
            "%s has %d images but %s has %d labels"
            % (images_path, images.shape[0], labels_path, labels.shape[0])
        )
    return images, labels


def save_idx(images_path: str, labels_path: str, images: np.ndarray, labels: np.ndarray):
    """Write float [0,1] images (N,1,H,W) and integer labels as IDX files."""
    n, c, h, w = images.shape
    if c != 1:
        raise DataError("IDX images are single-channel, got %d channels" % c)
    pixels = np.clip(np.round(images * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, n, h, w))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, n))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


@dataclass
class Dataset:
    images: np.ndarray  # (N, C, H, W) float32 in [0, 1]
    y: np.ndarray  # (N,) task labels
    z: np.ndarray | None  # (N,) private labels, when the corpus has them
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    @property
    def num_classes_y(self) -> int:
        return int(self.y.max()) + 1

    @property
    def num_classes_z(self) -> int:
        if self.z is None:
            raise DataError("dataset has no private labels")
        return int(self.z.max()) + 1

    def train_images(self) -> np.ndarray:
        return self.images[self.train_idx]

    def test_images(self) -> np.ndarray:
        return self.images[self.test_idx]

    def train_labels(self, which: str = "y") -> np.ndarray:
        return (self.y if which == "y" else self._z())[self.train_idx]

    def test_labels(self, which: str = "y") -> np.ndarray:
        return (self.y if which == "y" else self._z())[self.test_idx]

    def _z(self) -> np.ndarray:
        if self.z is None:
            raise DataError("dataset has no private labels")
        return self.z


@dataclass
class Batch:
    images: np.ndarray
    y: np.ndarray
    z: np.ndarray | None


def from_arrays(images, y, z=None, train_idx=None, test_idx=None) -> Dataset:
    n = images.shape[0]
    if train_idx is None:
        train_idx = np.arange(n)
        test_idx = np.arange(0)
    return Dataset(
        images=np.asarray(images, np.float32),
        y=np.asarray(y, np.int64),
        z=None if z is None else np.asarray(z, np.int64),
        train_idx=np.asarray(train_idx, np.int64),
        test_idx=np.asarray(test_idx, np.int64),
    )


def split(dataset: Dataset, train_fraction: float, seed: int) -> Dataset:
    """Re-split the whole corpus by a seeded permutation."""
    if not 0.0 <= train_fraction <= 1.0:
        raise DataError("train fraction %g outside [0, 1]" % train_fraction)
    n = dataset.images.shape[0]
    perm = seeded_rng(seed, "split").permutation(n)
    cut = int(round(train_fraction * n))
    return Dataset(
        images=dataset.images,
        y=dataset.y,
        z=dataset.z,
        train_idx=perm[:cut],
        test_idx=perm[cut:],
    )


def desk_subsample(dataset: Dataset, n_train: int, n_test: int, seed: int) -> Dataset:
    """Seeded subsample of both splits to desk-scale sizes."""
    if n_train > dataset.train_idx.size or n_test > dataset.test_idx.size:
        raise DataError(
            "subsample %d/%d exceeds available %d/%d"
            % (n_train, n_test, dataset.train_idx.size, dataset.test_idx.size)
        )
    rng = seeded_rng(seed, "subsample")
    tr = rng.permutation(dataset.train_idx)[:n_train]
    te = rng.permutation(dataset.test_idx)[:n_test]
    return Dataset(dataset.images, dataset.y, dataset.z, tr, te)


def batches(dataset: Dataset, batch_size: int, seed: int, epoch: int):
    """Yield training batches; fresh seeded shuffle each epoch, no
    replacement, final short batch included."""
    if batch_size < 1:
        raise DataError("batch size must be positive")
    order = seeded_rng(seed, "batches", epoch).permutation(dataset.train_idx)
    for start in range(0, order.size, batch_size):
        take = order[start : start + batch_size]
        yield Batch(
            images=dataset.images[take],
            y=dataset.y[take],
            z=None if dataset.z is None else dataset.z[take],
        )


# -- generated corpora -------------------------------------------------------

# 5x7 bitmap font, one row string per scanline
_DIGIT_FONT = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def _font_array(digit: int) -> np.ndarray:
    rows = _DIGIT_FONT[digit]
    return np.array([[int(ch) for ch in row] for row in rows], dtype=np.float32)


def make_digits(n: int, seed: int, size: int = 28) -> Dataset:
    """Rendered digits 0-9 with scale/position/weight/noise jitter."""
    if size < 17:
        raise DataError("digit canvas needs size >= 17, got %d" % size)
    rng = seeded_rng(seed, "digits")
    labels = rng.integers(0, 10, size=n)
    images = np.zeros((n, 1, size, size), dtype=np.float32)
    glyphs = {d: _font_array(d) for d in range(10)}
    max_scale = 3 if size >= 24 else 2  # the 15x21 glyph needs a 24px canvas
    for i in range(n):
        scale = int(rng.integers(2, max_scale + 1))  # 10x14 or 15x21 on the canvas
        glyph = np.kron(glyphs[int(labels[i])], np.ones((scale, scale), np.float32))
        if rng.random() < 0.4:  # heavier stroke
            glyph = np.maximum(glyph, np.roll(glyph, 1, axis=1))
        gh, gw = glyph.shape
        r0 = int(rng.integers(1, size - gh - 1))
        c0 = int(rng.integers(1, size - gw - 1))
        level = float(rng.uniform(0.75, 1.0))
        canvas = images[i, 0]
        canvas[r0 : r0 + gh, c0 : c0 + gw] = glyph * level
        # distractor strokes: structured clutter the task label never needs,
        # dimmer than the glyph so occlusion cannot erase it
        for _ in range(int(rng.integers(1, 4))):
            length = int(rng.integers(5, 11))
            thick = int(rng.integers(1, 3))
            a0 = int(rng.integers(0, size - thick))
            b0 = int(rng.integers(0, size - length))
            shade = float(rng.uniform(0.3, 0.7))
            if rng.random() < 0.5:
                patch = canvas[a0 : a0 + thick, b0 : b0 + length]
            else:
                patch = canvas[b0 : b0 + length, a0 : a0 + thick]
            np.maximum(patch, shade, out=patch)
        # dim background grating: reconstructable nuisance that never outshines
        # strokes or glyph (applied with max, so it only lifts dark pixels)
        amp = float(rng.uniform(0.08, 0.22))
        freq = float(rng.uniform(2.0, 6.0))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        axis = np.arange(size, dtype=np.float32)
        wave = np.sin(2.0 * np.pi * freq * axis / size + phase)
        orient = int(rng.integers(0, 3))
        if orient == 0:
            grating = np.broadcast_to(wave[None, :], (size, size))
        elif orient == 1:
            grating = np.broadcast_to(wave[:, None], (size, size))
        else:
            diag = np.arange(2 * size - 1, dtype=np.float32)
            band = np.sin(2.0 * np.pi * freq * diag / (2 * size) + phase)
            grating = band[np.add.outer(np.arange(size), np.arange(size))]
        np.maximum(canvas, (amp * 0.5 * (grating + 1.0)).astype(np.float32), out=canvas)
        canvas += rng.normal(0.0, 0.03, (size, size)).astype(np.float32)
    np.clip(images, 0.0, 1.0, out=images)
    return from_arrays(images, labels)


def make_synthetic_dual(n: int, seed: int, size: int = 16) -> Dataset:
    """Glyph class y and ambient brightness class z, drawn independently.

    The glyph (bar/cross/box/diagonal) is bright foreground; z picks one of
    four dim background levels, so both labels are recoverable from the
    image but neither determines the other.
    """
    rng = seeded_rng(seed, "synthetic")
    y = rng.integers(0, 4, size=n)
    z = rng.integers(0, 4, size=n)
    images = np.zeros((n, 1, size, size), dtype=np.float32)
    # class gap 0.04 dwarfs the jitter, and the per-pixel noise averages out
    # over the canvas, so z reads off the raw image at essentially 100%
    levels = (0.06, 0.10, 0.14, 0.18)
    rr, cc = np.indices((size, size))
    center = size // 2
    for i in range(n):
        dx = int(rng.integers(-2, 3))
        dy = int(rng.integers(-2, 3))
        thick = int(rng.integers(1, 3))
        kind = int(y[i])
        if kind == 0:  # horizontal bar
            mask = np.abs(rr - (center + dy)) < thick
        elif kind == 1:  # cross
            mask = (np.abs(rr - (center + dy)) < thick) | (np.abs(cc - (center + dx)) < thick)
        elif kind == 2:  # box outline
            r = 4 + thick
            dr = np.abs(rr - (center + dy))
            dc = np.abs(cc - (center + dx))
            mask = (np.maximum(dr, dc) <= r) & (np.maximum(dr, dc) >= r - thick)
        else:  # main diagonal band
            mask = np.abs((rr - (center + dy)) - (cc - (center + dx))) < thick
        base = levels[int(z[i])] + float(rng.uniform(-0.01, 0.01))
        img = np.full((size, size), base, dtype=np.float32)
        img[mask] = 0.95
        img += rng.normal(0.0, 0.05, (size, size)).astype(np.float32)
        images[i, 0] = img
    np.clip(images, 0.0, 1.0, out=images)
    return from_arrays(images, y, z)


def load_mnist_pairs(
    train_images: str, train_labels: str, test_images: str, test_labels: str
) -> Dataset:
    """Assemble a Dataset from four IDX paths; split follows the files."""
    tr_x, tr_y = load_idx(train_images, train_labels)
    te_x, te_y = load_idx(test_images, test_labels)
    if tr_x.shape[2:] != te_x.shape[2:]:
        raise DataError(
            "train images are %r but test images are %r" % (tr_x.shape[2:], te_x.shape[2:])
        )
    images = np.concatenate([tr_x, te_x], axis=0)
    labels = np.concatenate([tr_y, te_y], axis=0)
    n_train = tr_x.shape[0]
    return from_arrays(
        images,
        labels,
        train_idx=np.arange(n_train),
        test_idx=np.arange(n_train, labels.size),
    )
