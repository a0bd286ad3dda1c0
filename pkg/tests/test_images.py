import numpy as np
import pytest
from PIL import Image

from vesselseg.images import fundus_from_image, read_fundus, read_mask


def _ramp16():
    return (np.arange(12, dtype=np.uint16).reshape(3, 4) * 0x1111) + 0x0100


class TestFundusFromImage:
    def test_rgb_passes_through(self):
        rgb = np.random.default_rng(0).integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
        assert np.array_equal(fundus_from_image(Image.fromarray(rgb)).rgb, rgb)

    def test_sixteen_bit_keeps_top_byte(self):
        arr = _ramp16()
        img = Image.fromarray(arr)
        assert img.mode.startswith("I;16")
        assert np.array_equal(fundus_from_image(img).green, (arr >> 8).astype(np.uint8))

    def test_big_endian_sixteen_bit(self):
        arr = _ramp16()
        img = Image.frombytes("I;16B", (4, 3), arr.astype(">u2").tobytes())
        assert np.array_equal(fundus_from_image(img).green, (arr >> 8).astype(np.uint8))

    def test_eight_bit_values_in_int_mode_are_kept(self):
        arr = np.array([[0, 17, 128], [200, 254, 255]], dtype=np.int32)
        img = Image.fromarray(arr)
        assert img.mode == "I"
        assert fundus_from_image(img).green.tolist() == arr.tolist()


def test_sixteen_bit_png_round_trip(tmp_path):
    arr = _ramp16()
    path = tmp_path / "wide.png"
    Image.fromarray(arr).save(path)
    fundus = read_fundus(path)
    assert fundus.rgb.shape == (3, 4, 3)
    assert np.array_equal(fundus.green, (arr >> 8).astype(np.uint8))


def test_gif_is_rejected(tmp_path):
    path = tmp_path / "manual.gif"
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(path)
    with pytest.raises(ValueError, match="GIF"):
        read_mask(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_fundus(tmp_path / "absent.png")
