import struct

import numpy as np
import pytest

from ttnpe.datasets import add_noise, load_csv, load_idx
from ttnpe.errors import DataError


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    path.write_bytes(struct.pack(">iiii", 0x803, n, rows, cols) + images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    path.write_bytes(struct.pack(">ii", 0x801, len(labels)) + labels.tobytes())


class TestIdx:
    def test_hand_built_pair(self, tmp_path):
        imgs = np.arange(12, dtype=np.uint8).reshape(3, 2, 2)
        write_idx_images(tmp_path / "imgs", imgs)
        write_idx_labels(tmp_path / "lbls", [1, 2, 1])
        images, labels = load_idx(tmp_path / "imgs", tmp_path / "lbls")
        assert images.shape == (3, 2, 2)
        assert images.dtype == np.float64
        assert np.array_equal(images * 255.0, imgs.astype(np.float64))
        assert labels.tolist() == [1, 2, 1]
        assert labels.dtype == np.int64

    def test_value_255_scales_to_one(self, tmp_path):
        write_idx_images(tmp_path / "imgs", np.full((1, 1, 1), 255, dtype=np.uint8))
        write_idx_labels(tmp_path / "lbls", [0])
        images, _ = load_idx(tmp_path / "imgs", tmp_path / "lbls")
        assert images[0, 0, 0] == 1.0

    def test_wrong_magic(self, tmp_path):
        (tmp_path / "bad").write_bytes(struct.pack(">iiii", 0x802, 1, 1, 1) + b"\x00")
        write_idx_labels(tmp_path / "lbls", [0])
        with pytest.raises(DataError, match="magic"):
            load_idx(tmp_path / "bad", tmp_path / "lbls")

    def test_truncated_header(self, tmp_path):
        (tmp_path / "bad").write_bytes(struct.pack(">i", 0x803) + b"\x00\x00")
        write_idx_labels(tmp_path / "lbls", [0])
        with pytest.raises(DataError, match="truncated header"):
            load_idx(tmp_path / "bad", tmp_path / "lbls")

    def test_truncated_payload(self, tmp_path):
        (tmp_path / "bad").write_bytes(struct.pack(">iiii", 0x803, 2, 2, 2) + b"\x00" * 5)
        write_idx_labels(tmp_path / "lbls", [0, 1])
        with pytest.raises(DataError, match="truncated payload"):
            load_idx(tmp_path / "bad", tmp_path / "lbls")

    def test_count_mismatch(self, tmp_path):
        write_idx_images(tmp_path / "imgs", np.zeros((2, 1, 1), dtype=np.uint8))
        write_idx_labels(tmp_path / "lbls", [0, 1, 2])
        with pytest.raises(DataError, match="count mismatch"):
            load_idx(tmp_path / "imgs", tmp_path / "lbls")


class TestCsv:
    def test_plain_numeric(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2,3\n4,5,6\n")
        features, labels = load_csv(p, 0)
        assert np.array_equal(features, [[2.0, 3.0], [5.0, 6.0]])
        assert labels.tolist() == [1.0, 4.0]

    def test_header_detected_and_skipped(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("label,a,b\n7,1,2\n")
        features, labels = load_csv(p, 0)
        assert np.array_equal(features, [[1.0, 2.0]])
        assert labels.tolist() == [7.0]

    def test_last_column_label(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2,9\n3,4,8\n")
        features, labels = load_csv(p, 2)
        assert np.array_equal(features, [[1.0, 2.0], [3.0, 4.0]])
        assert labels.tolist() == [9.0, 8.0]

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2,3\n4,5\n")
        with pytest.raises(DataError, match="ragged"):
            load_csv(p, 0)

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2\n3,oops\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_csv(p, 0)

    def test_header_only(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,c\n")
        with pytest.raises(DataError, match="only a header"):
            load_csv(p, 0)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(p, 0)

    def test_label_column_out_of_range(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2\n")
        with pytest.raises(DataError, match="out of range"):
            load_csv(p, 5)


class TestNoise:
    def test_none_is_identity(self, rng):
        data = rng.standard_normal((2, 2, 5))
        assert add_noise(data, None, 0) is data

    def test_seeded_determinism(self, rng):
        data = rng.standard_normal((3, 3, 4))
        a = add_noise(data, 10.0, seed=7)
        b = add_noise(data, 10.0, seed=7)
        c = add_noise(data, 10.0, seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_zero_db_noise_power(self, rng):
        # at 0 dB noise variance equals mean per-entry signal power
        data = 2.0 * np.ones((10, 10, 50))
        noisy = add_noise(data, 0.0, seed=3)
        noise = noisy - data
        assert abs(np.var(noise) - 4.0) < 0.2

    def test_high_snr_small_perturbation(self, rng):
        data = rng.standard_normal((4, 4, 20))
        noisy = add_noise(data, 60.0, seed=1)
        rel = np.linalg.norm(noisy - data) / np.linalg.norm(data)
        assert rel < 0.01
