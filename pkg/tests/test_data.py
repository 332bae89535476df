"""Dataset IO and generators: byte-level IDX checks, split/batch laws."""

import struct

import numpy as np
import pytest

from pan.data import (
    DataError,
    batches,
    desk_subsample,
    from_arrays,
    load_idx,
    load_mnist_pairs,
    make_digits,
    make_synthetic_dual,
    save_idx,
    split,
)


def craft_idx_pair(tmp_path, pixels, labels):
    """Build IDX files from raw bytes, independent of save_idx."""
    pixels = np.asarray(pixels, np.uint8)
    n, h, w = pixels.shape
    ip = tmp_path / "img"
    lp = tmp_path / "lab"
    ip.write_bytes(struct.pack(">IIII", 0x00000803, n, h, w) + pixels.tobytes())
    lp.write_bytes(struct.pack(">II", 0x00000801, n) + bytes(labels))
    return str(ip), str(lp)


class TestIdx:
    def test_load_hand_crafted_bytes(self, tmp_path):
        pixels = np.array([[[0, 255], [51, 102]], [[10, 20], [30, 40]]], np.uint8)
        ip, lp = craft_idx_pair(tmp_path, pixels, [7, 2])
        images, labels = load_idx(ip, lp)
        assert images.shape == (2, 1, 2, 2)
        assert images.dtype == np.float32
        assert np.allclose(images[0, 0], [[0.0, 1.0], [0.2, 0.4]])
        assert labels.tolist() == [7, 2]

    def test_roundtrip_quantizes_to_255ths(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.random((5, 1, 4, 3)).astype(np.float32)
        labels = np.array([0, 1, 2, 3, 9])
        ip, lp = str(tmp_path / "i"), str(tmp_path / "l")
        save_idx(ip, lp, images, labels)
        back, lab = load_idx(ip, lp)
        assert np.array_equal(back, np.round(images * 255.0) / np.float32(255.0))
        assert np.array_equal(lab, labels)

    def test_second_roundtrip_is_exact(self, tmp_path):
        images = (np.arange(24, dtype=np.float32).reshape(2, 1, 3, 4)) / 25.0
        p1 = [str(tmp_path / x) for x in ("i1", "l1")]
        p2 = [str(tmp_path / x) for x in ("i2", "l2")]
        save_idx(*p1, images, np.array([1, 2]))
        a, _ = load_idx(*p1)
        save_idx(*p2, a, np.array([1, 2]))
        assert (tmp_path / "i1").read_bytes() == (tmp_path / "i2").read_bytes()

    def test_bad_magic_names_byte_zero(self, tmp_path):
        ip, lp = craft_idx_pair(tmp_path, np.zeros((1, 2, 2), np.uint8), [0])
        bad = tmp_path / "bad"
        bad.write_bytes(struct.pack(">IIII", 0x00000801, 1, 2, 2) + bytes(4))
        with pytest.raises(DataError, match="bad image magic 0x00000801 at byte 0"):
            load_idx(str(bad), lp)
        badlab = tmp_path / "badlab"
        badlab.write_bytes(struct.pack(">II", 0x00000803, 1) + bytes(1))
        with pytest.raises(DataError, match="bad label magic"):
            load_idx(ip, str(badlab))

    def test_truncation_names_offsets(self, tmp_path):
        short = tmp_path / "short"
        short.write_bytes(struct.pack(">II", 0x00000803, 1))
        with pytest.raises(DataError, match="truncated header at byte 8"):
            load_idx(str(short), str(short))
        lied = tmp_path / "lied"
        lied.write_bytes(struct.pack(">IIII", 0x00000803, 3, 2, 2) + bytes(5))
        with pytest.raises(DataError, match="payload is 5 bytes, header at bytes 4-15 promises 12"):
            load_idx(str(lied), str(lied))

    def test_count_mismatch(self, tmp_path):
        ip, _ = craft_idx_pair(tmp_path, np.zeros((2, 2, 2), np.uint8), [0, 1])
        lp = tmp_path / "l3"
        lp.write_bytes(struct.pack(">II", 0x00000801, 3) + bytes(3))
        with pytest.raises(DataError, match="2 images but .* 3 labels"):
            load_idx(ip, str(lp))

    def test_multichannel_rejected_on_save(self, tmp_path):
        with pytest.raises(DataError, match="single-channel"):
            save_idx(str(tmp_path / "i"), str(tmp_path / "l"),
                     np.zeros((1, 3, 4, 4), np.float32), np.array([0]))

    def test_pair_loader_builds_both_splits(self, tmp_path):
        tr = craft_idx_pair(tmp_path, np.zeros((3, 2, 2), np.uint8), [0, 1, 2])
        sub = tmp_path / "te"
        sub.mkdir()
        te = craft_idx_pair(sub, np.full((2, 2, 2), 9, np.uint8), [3, 4])
        ds = load_mnist_pairs(tr[0], tr[1], te[0], te[1])
        assert ds.train_idx.tolist() == [0, 1, 2]
        assert ds.test_idx.tolist() == [3, 4]
        assert ds.z is None
        assert ds.test_labels().tolist() == [3, 4]


class TestGenerators:
    def test_digits_determinism_and_range(self):
        a = make_digits(40, seed=5)
        b = make_digits(40, seed=5)
        c = make_digits(40, seed=6)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.y, b.y)
        assert not np.array_equal(a.images, c.images)
        assert a.images.shape == (40, 1, 28, 28)
        assert a.images.min() >= 0.0 and a.images.max() <= 1.0
        assert set(np.unique(a.y)) <= set(range(10))
        assert a.z is None

    def test_digits_off_center_energy(self):
        ds = make_digits(30, seed=1)
        # glyphs plus noise: every image has real foreground mass
        assert (ds.images.reshape(30, -1).max(axis=1) > 0.5).all()

    def test_synthetic_shapes_and_labels(self):
        ds = make_synthetic_dual(60, seed=2)
        assert ds.images.shape == (60, 1, 16, 16)
        assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
        assert set(np.unique(ds.y)) <= set(range(4))
        assert set(np.unique(ds.z)) <= set(range(4))

    def test_synthetic_y_z_independent(self):
        ds = make_synthetic_dual(4000, seed=3)
        joint = np.zeros((4, 4))
        for yi, zi in zip(ds.y, ds.z):
            joint[yi, zi] += 1
        expected = np.outer(joint.sum(1), joint.sum(0)) / joint.sum()
        chi2 = ((joint - expected) ** 2 / expected).sum()
        assert chi2 < 30  # 9 dof; independence holds comfortably

    def test_synthetic_determinism(self):
        a = make_synthetic_dual(25, seed=9)
        b = make_synthetic_dual(25, seed=9)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.z, b.z)


class TestSplits:
    def make(self, n=20):
        images = np.arange(n * 4, dtype=np.float32).reshape(n, 1, 2, 2) / (n * 4)
        return from_arrays(images, np.arange(n) % 3)

    def test_split_partitions(self):
        ds = split(self.make(), 0.7, seed=1)
        assert ds.train_idx.size == 14 and ds.test_idx.size == 6
        together = np.sort(np.concatenate([ds.train_idx, ds.test_idx]))
        assert np.array_equal(together, np.arange(20))

    def test_split_deterministic_and_seed_sensitive(self):
        a = split(self.make(), 0.5, seed=4)
        b = split(self.make(), 0.5, seed=4)
        c = split(self.make(), 0.5, seed=5)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert not np.array_equal(a.train_idx, c.train_idx)

    def test_split_full_train(self):
        ds = split(self.make(), 1.0, seed=0)
        assert ds.test_idx.size == 0

    def test_split_validates_fraction(self):
        with pytest.raises(DataError, match="fraction"):
            split(self.make(), 1.5, seed=0)

    def test_subsample_sizes_and_bounds(self):
        ds = split(self.make(), 0.7, seed=1)
        sub = desk_subsample(ds, 5, 2, seed=0)
        assert sub.train_idx.size == 5 and sub.test_idx.size == 2
        assert set(sub.train_idx) <= set(ds.train_idx)
        assert set(sub.test_idx) <= set(ds.test_idx)
        with pytest.raises(DataError, match="exceeds available"):
            desk_subsample(ds, 15, 2, seed=0)

    def test_batches_cover_train_once(self):
        ds = split(self.make(), 0.5, seed=2)
        got = []
        sizes = []
        for batch in batches(ds, 3, seed=1, epoch=0):
            sizes.append(batch.y.size)
            got.extend(batch.images.reshape(batch.images.shape[0], -1)[:, 0].tolist())
        assert sizes == [3, 3, 3, 1]
        want = ds.images[ds.train_idx].reshape(10, -1)[:, 0].tolist()
        assert sorted(got) == sorted(want)

    def test_batches_epoch_changes_order(self):
        ds = split(self.make(), 0.5, seed=2)

        def order(epoch):
            return [
                tuple(b.y.tolist()) for b in batches(ds, 4, seed=1, epoch=epoch)
            ]

        assert order(0) == order(0)
        assert order(0) != order(1)

    def test_batches_carry_z(self):
        ds = make_synthetic_dual(10, seed=0)
        batch = next(iter(batches(ds, 4, seed=0, epoch=0)))
        assert batch.z is not None and batch.z.size == 4

    def test_batch_size_validated(self):
        with pytest.raises(DataError, match="batch size"):
            list(batches(self.make(), 0, seed=0, epoch=0))
