import numpy as np
import pytest

from pglr.errors import FormatError, InvalidInputError
from pglr.imgio import (
    quantize,
    read_image,
    read_pfmg,
    read_pgm,
    write_image,
    write_pfmg,
    write_pgm,
)


class TestQuantize:
    def test_rounds_half_away_from_zero(self):
        vals = np.array([[0.4, 0.5, 1.5, 254.49, 254.5]])
        assert quantize(vals).tolist() == [[0, 1, 2, 254, 255]]

    def test_clamps_range(self):
        vals = np.array([[-10.0, 300.0]])
        assert quantize(vals).tolist() == [[0, 255]]

    def test_dtype(self):
        assert quantize(np.zeros((2, 2))).dtype == np.uint8


class TestPgm:
    def test_round_trip(self, tmp_path):
        img = np.arange(30.0).reshape(5, 6)
        path = tmp_path / "a.pgm"
        write_pgm(path, img)
        assert np.array_equal(read_pgm(path), img)

    def test_round_trip_identity_on_quantized(self, tmp_path):
        rng = np.random.default_rng(1)
        img = quantize(rng.uniform(-20, 280, size=(16, 16))).astype(np.float64)
        path = tmp_path / "b.pgm"
        write_pgm(path, img)
        assert np.array_equal(read_pgm(path), img)

    def test_accepts_comments_and_whitespace(self, tmp_path):
        path = tmp_path / "c.pgm"
        raster = bytes([10, 20, 30, 40])
        path.write_bytes(b"P5 # type\n# a comment line\n 2 # width\n\t2\n255\n" + raster)
        img = read_pgm(path)
        assert img.tolist() == [[10.0, 20.0], [30.0, 40.0]]

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "d.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00")
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_rejects_maxval_over_255(self, tmp_path):
        path = tmp_path / "e.pgm"
        path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_rejects_truncated_raster(self, tmp_path):
        path = tmp_path / "f.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(FormatError):
            read_pgm(path)


class TestPfmg:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        img = rng.standard_normal((7, 9)) * 1e6
        path = tmp_path / "a.pfmg"
        write_pfmg(path, img)
        assert np.array_equal(read_pfmg(path), img)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "b.pfmg"
        write_pfmg(path, np.zeros((2, 3)))
        raw = path.read_bytes()
        assert raw[:8] == b"PFMG0001"
        assert np.frombuffer(raw[8:16], dtype="<u4").tolist() == [3, 2]
        assert len(raw) == 16 + 8 * 6

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "c.pfmg"
        path.write_bytes(b"XXXX0001" + b"\x00" * 16)
        with pytest.raises(FormatError):
            read_pfmg(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "d.pfmg"
        write_pfmg(path, np.zeros((4, 4)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FormatError):
            read_pfmg(path)


class TestDispatch:
    def test_extension_routing(self, tmp_path):
        img = np.arange(4.0).reshape(2, 2)
        pgm = tmp_path / "x.pgm"
        pfmg = tmp_path / "x.pfmg"
        write_image(pgm, img)
        write_image(pfmg, img + 0.25)
        assert np.array_equal(read_image(pgm), img)
        assert np.array_equal(read_image(pfmg), img + 0.25)

    def test_unknown_extension_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            write_image(tmp_path / "x.bmp", np.zeros((2, 2)))
        with pytest.raises(FormatError):
            read_image(tmp_path / "x.tif")

    def test_rejects_non_2d_input(self, tmp_path):
        with pytest.raises(InvalidInputError):
            write_pgm(tmp_path / "x.pgm", np.zeros(4))
