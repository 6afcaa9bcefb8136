import numpy as np
import pytest
from PIL import Image

from superpix import (ImageError, RasterImage, load_image, load_label_map,
                      rgb_to_lab, save_image, save_label_map,
                      save_label_overlay, to_feature_image)
from superpix.imaging import boundary_mask

from oracles import naive_boundary_pixels


def write(path, data: bytes):
    path.write_bytes(data)
    return path


class TestPnmDecode:
    def test_p6_two_pixels(self, tmp_path):
        p = write(tmp_path / "a.ppm",
                  b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 0]))
        img = load_image(p)
        assert (img.width, img.height, img.channels) == (2, 1, 3)
        assert img.data.ravel().tolist() == [255, 0, 0, 0, 0, 0]

    def test_p5_single_pixel(self, tmp_path):
        p = write(tmp_path / "a.pgm", b"P5\n1 1\n255\n" + bytes([128]))
        img = load_image(p)
        assert (img.width, img.height, img.channels) == (1, 1, 1)
        assert img.data[0, 0, 0] == 128

    def test_comments_in_header(self, tmp_path):
        p = write(tmp_path / "a.pgm",
                  b"P5\n# a comment\n1 1\n# another\n255\n" + bytes([7]))
        assert load_image(p).data[0, 0, 0] == 7

    def test_truncated(self, tmp_path):
        p = write(tmp_path / "a.ppm", b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(ImageError, match="malformed"):
            load_image(p)

    def test_unsupported_depth(self, tmp_path):
        p = write(tmp_path / "a.pgm", b"P5\n1 1\n65535\n\x00\x01")
        with pytest.raises(ImageError, match="bit depth"):
            load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageError):
            load_image(tmp_path / "nope.ppm")

    def test_garbage(self, tmp_path):
        p = write(tmp_path / "a.bin", b"not an image at all")
        with pytest.raises(ImageError):
            load_image(p)

    def test_round_trip_bit_identical(self, tmp_path, rng):
        data = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
        img = RasterImage(7, 5, 3, data)
        save_image(img, tmp_path / "r.ppm")
        again = load_image(tmp_path / "r.ppm")
        assert np.array_equal(again.data, data)
        save_image(again, tmp_path / "r2.ppm")
        assert (tmp_path / "r.ppm").read_bytes() == (tmp_path / "r2.ppm").read_bytes()

    def test_gray_round_trip(self, tmp_path, rng):
        data = rng.integers(0, 256, (4, 4, 1)).astype(np.uint8)
        save_image(RasterImage(4, 4, 1, data), tmp_path / "g.pgm")
        assert np.array_equal(load_image(tmp_path / "g.pgm").data, data)


class TestPngDecode:
    def test_rgb_png(self, tmp_path, rng):
        data = rng.integers(0, 256, (6, 5, 3)).astype(np.uint8)
        Image.fromarray(data).save(tmp_path / "a.png")
        img = load_image(tmp_path / "a.png")
        assert (img.width, img.height, img.channels) == (5, 6, 3)
        assert np.array_equal(img.data, data)

    def test_gray_png(self, tmp_path):
        Image.fromarray(np.full((2, 3), 42, dtype=np.uint8)).save(
            tmp_path / "g.png")
        img = load_image(tmp_path / "g.png")
        assert img.channels == 1
        assert img.data[0, 0, 0] == 42

    def test_16bit_png_rejected(self, tmp_path):
        Image.fromarray(np.full((2, 2), 1000, dtype=np.uint16)).save(
            tmp_path / "deep.png")
        with pytest.raises(ImageError, match="bit depth"):
            load_image(tmp_path / "deep.png")

    def test_png_save(self, tmp_path, rng):
        data = rng.integers(0, 256, (3, 3, 3)).astype(np.uint8)
        save_image(RasterImage(3, 3, 3, data), tmp_path / "o.png")
        assert np.array_equal(load_image(tmp_path / "o.png").data, data)


class TestCielab:
    # Frozen from a 40-digit evaluation of the sRGB/D65 CIELAB formulas.
    CASES = {
        (255, 255, 255): (100.0, 0.0, 0.0),
        (0, 0, 0): (0.0, 0.0, 0.0),
        (255, 0, 0): (53.2407941413, 80.0924595964, 67.2031965159),
        (0, 255, 0): (87.7347223528, -86.1827164205, 83.1793205027),
        (0, 0, 255): (32.2970109329, 79.1875198451, -107.860161754),
    }

    @pytest.mark.parametrize("rgb,expected", sorted(CASES.items()))
    def test_reference_colors(self, rgb, expected):
        lab = rgb_to_lab(np.array(rgb, dtype=np.uint8))
        assert np.allclose(lab, expected, atol=1e-4)

    def test_white_is_neutral(self):
        lab = rgb_to_lab(np.array([255, 255, 255], dtype=np.uint8))
        assert abs(lab[0] - 100.0) < 0.01
        assert abs(lab[1]) < 0.01 and abs(lab[2]) < 0.01

    def test_matches_skimage(self, rng):
        from skimage.color import rgb2lab
        rgb = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        ours = rgb_to_lab(rgb)
        theirs = rgb2lab(rgb)
        assert np.allclose(ours, theirs, atol=2e-2)

    def test_luminance_monotone_for_gray_ramp(self):
        grays = np.stack([np.arange(256)] * 3, axis=1).astype(np.uint8)
        L = rgb_to_lab(grays)[:, 0]
        assert np.all(np.diff(L) > 0)


class TestFeatureImage:
    def test_spatial_channels(self, rng):
        img = RasterImage(4, 3, 3,
                          rng.integers(0, 256, (3, 4, 3)).astype(np.uint8))
        feats = to_feature_image(img)
        assert feats.dim == 5
        idx = np.arange(12)
        assert np.array_equal(feats.features[:, 0], idx % 4)
        assert np.array_equal(feats.features[:, 1], idx // 4)

    def test_grayscale_passthrough(self):
        img = RasterImage(2, 1, 1, np.array([[[10], [250]]], dtype=np.uint8))
        feats = to_feature_image(img)
        assert feats.dim == 3
        assert feats.features[:, 2].tolist() == [10.0, 250.0]

    def test_lab_ranges(self, rng):
        img = RasterImage(8, 8, 3,
                          rng.integers(0, 256, (8, 8, 3)).astype(np.uint8))
        feats = to_feature_image(img)
        L = feats.features[:, 2]
        assert L.min() >= 0.0 and L.max() <= 100.0 + 1e-9


class TestOverlay:
    def test_uniform_labels_copy_image(self, tmp_path, rng):
        img = RasterImage(4, 4, 3,
                          rng.integers(0, 256, (4, 4, 3)).astype(np.uint8))
        save_label_overlay(img, np.zeros((4, 4), dtype=int),
                           tmp_path / "o.ppm")
        assert np.array_equal(load_image(tmp_path / "o.ppm").data, img.data)

    def test_two_pixel_map_all_boundary(self, tmp_path):
        img = RasterImage(2, 1, 3, np.zeros((1, 2, 3), dtype=np.uint8))
        save_label_overlay(img, np.array([[0, 1]]), tmp_path / "o.ppm")
        out = load_image(tmp_path / "o.ppm").data
        assert np.array_equal(out[0, 0], [255, 0, 0])
        assert np.array_equal(out[0, 1], [255, 0, 0])

    def test_center_pixel_differs_matches_bruteforce(self, tmp_path):
        labels = np.zeros((3, 3), dtype=int)
        labels[1, 1] = 1
        img = RasterImage(3, 3, 3, np.zeros((3, 3, 3), dtype=np.uint8))
        save_label_overlay(img, labels, tmp_path / "o.ppm")
        out = load_image(tmp_path / "o.ppm").data
        expected = naive_boundary_pixels(labels)
        for y in range(3):
            for x in range(3):
                painted = np.array_equal(out[y, x], [255, 0, 0])
                assert painted == ((y, x) in expected)

    def test_boundary_mask_matches_bruteforce(self, rng):
        labels = rng.integers(0, 4, (9, 11))
        mask = boundary_mask(labels)
        expected = naive_boundary_pixels(labels)
        assert {(y, x) for y, x in zip(*np.nonzero(mask))} == expected

    def test_dimension_mismatch(self, tmp_path):
        img = RasterImage(2, 2, 3, np.zeros((2, 2, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            save_label_overlay(img, np.zeros((3, 3), dtype=int),
                               tmp_path / "o.ppm")


class TestLabelMapIO:
    def test_round_trip(self, tmp_path, rng):
        labels = rng.integers(0, 1000, (6, 9))
        save_label_map(labels, tmp_path / "l.pgm")
        assert np.array_equal(load_label_map(tmp_path / "l.pgm"), labels)

    def test_big_endian_sixteen_bit(self, tmp_path):
        save_label_map(np.array([[258]]), tmp_path / "l.pgm")
        raw = (tmp_path / "l.pgm").read_bytes()
        assert raw.startswith(b"P5\n1 1\n65535\n")
        assert raw[-2:] == bytes([1, 2])  # 258 = 0x0102, big-endian

    def test_overflow_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_label_map(np.array([[70000]]), tmp_path / "l.pgm")

    def test_eight_bit_rejected_on_load(self, tmp_path):
        (tmp_path / "l.pgm").write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(ImageError, match="65535"):
            load_label_map(tmp_path / "l.pgm")
