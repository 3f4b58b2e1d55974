import numpy as np
import pytest
from PIL import Image

from stylqr.imgio import (ImageIOError, load_png, resize_area, rgb_to_gray, save_png, to_gray,
                          to_rgb, to_uint8)


def test_round_trip_quantization(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.random((3, 20, 30))
    save_png(tmp_path / "a.png", img)
    back = load_png(tmp_path / "a.png")
    assert back.shape == (3, 20, 30)
    assert np.max(np.abs(back - img)) <= 1 / 510 + 1e-12
    # a second pass is lossless
    save_png(tmp_path / "b.png", back)
    assert np.array_equal(load_png(tmp_path / "b.png"), back)


def test_gray_round_trip(tmp_path):
    img = np.linspace(0, 1, 64).reshape(1, 8, 8)
    save_png(tmp_path / "g.png", img)
    assert Image.open(tmp_path / "g.png").mode == "L"
    assert np.max(np.abs(load_png(tmp_path / "g.png") - img)) <= 1 / 510 + 1e-12


def test_quantization_clips_and_rounds():
    assert list(to_uint8(np.array([[[-0.2, 0.0, 0.5, 1.0, 1.7]]]))[0, 0]) == [0, 0, 128, 255, 255]


def test_alpha_is_composited_on_white(tmp_path):
    rgba = np.zeros((2, 2, 4), dtype=np.uint8)
    rgba[0, 0] = [0, 0, 0, 0]  # fully transparent
    rgba[0, 1] = [0, 0, 0, 255]
    rgba[1, :] = [255, 0, 0, 255]
    Image.fromarray(rgba, mode="RGBA").save(tmp_path / "t.png")
    img = load_png(tmp_path / "t.png")
    assert img.shape == (3, 2, 2)
    assert np.all(img[:, 0, 0] == 1) and np.all(img[:, 0, 1] == 0)
    assert list(img[:, 1, 0]) == [1, 0, 0]


def test_unreadable_and_16bit(tmp_path):
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(ImageIOError):
        load_png(tmp_path / "junk.png")
    with pytest.raises(ImageIOError):
        load_png(tmp_path / "missing.png")
    Image.fromarray(np.full((4, 4), 40000, dtype=np.uint16)).save(tmp_path / "deep.png")
    with pytest.raises(ImageIOError):
        load_png(tmp_path / "deep.png")


def test_gray_conversion_examples():
    def px(r, g, b):
        return np.array([r, g, b], dtype=float).reshape(3, 1, 1)
    assert rgb_to_gray(px(1, 1, 1))[0, 0, 0] == pytest.approx(1.0, abs=1e-12)
    assert rgb_to_gray(px(1, 0, 0))[0, 0, 0] == pytest.approx(0.299)
    assert rgb_to_gray(px(0, 1, 0))[0, 0, 0] == pytest.approx(0.587)
    assert rgb_to_gray(px(0, 0, 1))[0, 0, 0] == pytest.approx(0.114)
    with pytest.raises(ValueError):
        rgb_to_gray(np.zeros((1, 2, 2)))
    g = np.random.default_rng(1).random((1, 3, 3))
    assert np.array_equal(to_gray(g), g)
    assert to_rgb(g).shape == (3, 3, 3)


def test_resize_examples():
    img = np.arange(16, dtype=float).reshape(1, 4, 4)
    small = resize_area(img, 2, 2)
    assert np.allclose(small[0], [[2.5, 4.5], [10.5, 12.5]])
    assert np.array_equal(resize_area(img, 4, 4), img)
    const = np.full((3, 7, 5), 0.3)
    for h, w in [(3, 2), (14, 10), (7, 9), (1, 1)]:
        assert np.allclose(resize_area(const, h, w), 0.3)
    # area shrinking undoes block replication
    rng = np.random.default_rng(2)
    x = rng.random((1, 5, 6))
    assert np.allclose(resize_area(np.kron(x, np.ones((1, 3, 2))), 5, 6), x)
    # bilinear enlarging keeps values inside the input range
    big = resize_area(x, 13, 17)
    assert big.min() >= x.min() - 1e-12 and big.max() <= x.max() + 1e-12
    with pytest.raises(ValueError):
        resize_area(x, 0, 3)


def test_resize_non_integer_area_weights():
    # 3 -> 2: each output averages 1.5 input cells
    x = np.array([[[0.0, 3.0, 6.0]]])
    out = resize_area(x, 1, 2)
    assert np.allclose(out[0, 0], [(0 + 1.5) / 1.5, (1.5 + 6) / 1.5])
