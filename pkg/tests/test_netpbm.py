"""PGM/PBM codec tests; these formats carry the bit-exact fixtures."""

import numpy as np
import pytest

from anpr.errors import AnprError
from anpr.netpbm import read_pbm, read_pgm, write_pbm, write_pgm


def _rand_gray(seed, h=13, w=17):
    return np.random.default_rng(seed).integers(
        0, 256, size=(h, w), dtype=np.uint8
    )


def test_p5_roundtrip():
    img = _rand_gray(1)
    assert np.array_equal(read_pgm(write_pgm(img)), img)


def test_p2_roundtrip():
    img = _rand_gray(2)
    assert np.array_equal(read_pgm(write_pgm(img, binary=False)), img)


def test_p5_bytes_are_canonical():
    img = np.array([[0, 128], [255, 7]], dtype=np.uint8)
    assert write_pgm(img) == b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])


def test_p2_handles_comments_and_whitespace():
    data = b"P2 # magic\n# a comment line\n 2 2\n255\n0 10\n20   30\n"
    assert np.array_equal(
        read_pgm(data), np.array([[0, 10], [20, 30]], dtype=np.uint8)
    )


def test_pgm_rejects_garbage():
    with pytest.raises(AnprError):
        read_pgm(b"P6\n2 2\n255\n" + bytes(12))      # wrong magic
    with pytest.raises(AnprError):
        read_pgm(b"P5\n2 2\n255\n" + bytes(3))       # truncated pixels
    with pytest.raises(AnprError):
        read_pgm(b"P5\n2 2\n")                       # truncated header
    with pytest.raises(AnprError):
        read_pgm(b"P5\n0 2\n255\n")                  # zero width
    with pytest.raises(AnprError):
        read_pgm(b"P5\n2 2\n70000\n" + bytes(4))     # 16-bit maxval
    with pytest.raises(AnprError):
        read_pgm(b"P2\n2 1\n100\n50 200\n")          # sample over maxval


def test_pgm_writer_rejects_bad_shapes():
    with pytest.raises(AnprError):
        write_pgm(np.zeros((2, 2, 3), dtype=np.uint8))


def test_pbm_roundtrip():
    mask = np.random.default_rng(3).random((9, 14)) < 0.4
    assert np.array_equal(read_pbm(write_pbm(mask)), mask)


def test_pbm_one_is_foreground():
    assert read_pbm(b"P1\n2 1\n1 0\n")[0, 0]
    assert not read_pbm(b"P1\n2 1\n1 0\n")[0, 1]


def test_pbm_accepts_packed_digits():
    mask = read_pbm(b"P1\n4 2\n1010\n0101\n")
    assert np.array_equal(
        mask,
        np.array([[1, 0, 1, 0], [0, 1, 0, 1]], dtype=bool),
    )


def test_pbm_rejects_garbage():
    with pytest.raises(AnprError):
        read_pbm(b"P4\n2 2\n\x00")       # binary pbm unsupported
    with pytest.raises(AnprError):
        read_pbm(b"P1\n2 2\n1 0 1\n")    # truncated
    with pytest.raises(AnprError):
        read_pbm(b"P1\n2 1\n1 2\n")      # bad sample
    with pytest.raises(AnprError):
        write_pbm(np.zeros((2, 2), dtype=np.uint8))  # not bool
