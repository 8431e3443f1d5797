import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from m2n2.data import (
    LabeledDataset,
    filter_digits,
    load_dataset,
    load_idx_images,
    load_idx_labels,
    save_dataset,
    save_idx_images,
    save_idx_labels,
    subset,
)
from m2n2.errors import DataFormatError
from m2n2.synth import make_dataset, make_digits


def write_images(path, pixels, rows, cols):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, pixels.shape[0], rows, cols))
        fh.write(pixels.astype(np.uint8).tobytes())


class TestIdxImages:
    def test_single_zero_image(self, tmp_path):
        path = tmp_path / "one.idx"
        write_images(path, np.zeros((1, 784), np.uint8), 28, 28)
        out = load_idx_images(path)
        assert out.shape == (1, 784)
        assert not out.any()

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "labels-as-images.idx"
        save_idx_labels(path, np.array([1, 2, 3]))
        with pytest.raises(DataFormatError, match="magic"):
            load_idx_images(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "short.idx"
        with open(path, "wb") as fh:
            fh.write(struct.pack(">IIII", 0x803, 2, 28, 28))
            fh.write(bytes(784))  # one image missing
        with pytest.raises(DataFormatError, match="payload"):
            load_idx_images(path)

    def test_gzip_transparently_supported(self, tmp_path):
        plain = tmp_path / "img.idx"
        pixels, _ = make_digits(5, 3)
        write_images(plain, pixels, 28, 28)
        packed = tmp_path / "img.idx.gz"
        packed.write_bytes(gzip.compress(plain.read_bytes()))
        np.testing.assert_array_equal(load_idx_images(packed), load_idx_images(plain))

    def test_nonsquare_shape(self, tmp_path):
        path = tmp_path / "small.idx"
        pixels = np.arange(12, dtype=np.uint8).reshape(2, 6)
        write_images(path, pixels, 2, 3)
        np.testing.assert_array_equal(load_idx_images(path), pixels)


class TestIdxLabels:
    def test_small_file(self, tmp_path):
        path = tmp_path / "labels.idx"
        save_idx_labels(path, np.array([0, 5, 9]))
        np.testing.assert_array_equal(load_idx_labels(path), [0, 5, 9])

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "labels.idx"
        with open(path, "wb") as fh:
            fh.write(struct.pack(">II", 0x801, 10))
            fh.write(bytes(4))
        with pytest.raises(DataFormatError, match="payload"):
            load_idx_labels(path)

    def test_out_of_range_label_rejected(self, tmp_path):
        path = tmp_path / "labels.idx"
        with open(path, "wb") as fh:
            fh.write(struct.pack(">II", 0x801, 2))
            fh.write(bytes([3, 11]))
        with pytest.raises(DataFormatError, match="label"):
            load_idx_labels(path)


class TestRoundTrip:
    def test_dataset_roundtrip_bit_exact(self, tmp_path):
        pixels, labels = make_digits(40, 17)
        img_in, lbl_in = tmp_path / "img.idx", tmp_path / "lbl.idx"
        save_idx_images(img_in, pixels)
        save_idx_labels(lbl_in, labels)
        dataset = load_dataset(img_in, lbl_in)
        img_out, lbl_out = tmp_path / "img2.idx", tmp_path / "lbl2.idx"
        save_dataset(dataset, img_out, lbl_out)
        assert img_out.read_bytes() == img_in.read_bytes()
        assert lbl_out.read_bytes() == lbl_in.read_bytes()

    def test_count_mismatch_rejected(self, tmp_path):
        pixels, labels = make_digits(4, 0)
        save_idx_images(tmp_path / "img.idx", pixels)
        save_idx_labels(tmp_path / "lbl.idx", labels[:3])
        with pytest.raises(DataFormatError, match="images"):
            load_dataset(tmp_path / "img.idx", tmp_path / "lbl.idx")


class TestSubset:
    def test_full_size_is_identity_permutation(self, train_data):
        out = subset(train_data, len(train_data), 0)
        np.testing.assert_array_equal(out.labels, train_data.labels)
        np.testing.assert_array_equal(out.images, train_data.images)

    def test_balanced_stratification(self):
        data = make_dataset(3000, 5)
        out = subset(data, 1000, 1)
        counts = np.bincount(out.labels, minlength=10)
        np.testing.assert_array_equal(counts, 100)

    def test_uneven_quota_differs_by_at_most_one(self, train_data):
        out = subset(train_data, 997, 3)
        counts = np.bincount(out.labels, minlength=10)
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == 997

    def test_deterministic(self, train_data):
        a = subset(train_data, 300, 42)
        b = subset(train_data, 300, 42)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_too_large_rejected(self, train_data):
        with pytest.raises(ValueError, match="subset size"):
            subset(train_data, len(train_data) + 1, 0)

    @given(n=st.integers(1, 120), seed=st.integers(0, 50))
    @settings(max_examples=40, deadline=None)
    def test_idempotent(self, n, seed):
        data = make_dataset(120, 9)
        once = subset(data, n, seed)
        twice = subset(once, n, seed)
        np.testing.assert_array_equal(once.labels, twice.labels)
        np.testing.assert_array_equal(once.images, twice.images)

    def test_scarce_class_redistributed(self):
        images = np.zeros((12, 4), dtype=np.float32)
        labels = np.array([0] * 10 + [1] * 2)
        data = LabeledDataset(images=images, labels=labels)
        out = subset(data, 8, 0)
        counts = np.bincount(out.labels, minlength=2)
        assert counts[1] == 2 and counts[0] == 6


class TestFilterDigits:
    def test_full_set_is_identity(self, train_data):
        out = filter_digits(train_data, range(10))
        np.testing.assert_array_equal(out.labels, train_data.labels)

    def test_order_preserved(self, train_data):
        out = filter_digits(train_data, {3, 7})
        expected = train_data.labels[np.isin(train_data.labels, [3, 7])]
        np.testing.assert_array_equal(out.labels, expected)

    def test_disjoint_union_counts_add(self, train_data):
        low = filter_digits(train_data, {0, 1, 2})
        high = filter_digits(train_data, {8, 9})
        both = filter_digits(train_data, {0, 1, 2, 8, 9})
        assert len(both) == len(low) + len(high)

    def test_missing_digit_gives_empty_dataset(self):
        data = make_dataset(20, 0)
        only_sevens = filter_digits(data, {7})
        none_left = filter_digits(only_sevens, {3})
        assert len(none_left) == 0

    def test_empty_digit_set_rejected(self, train_data):
        with pytest.raises(ValueError, match="non-empty"):
            filter_digits(train_data, set())

    def test_out_of_range_digit_rejected(self, train_data):
        with pytest.raises(ValueError, match="digits"):
            filter_digits(train_data, {4, 12})
