import math

import numpy as np
import pytest

from pglr.errors import InvalidInputError
from pglr.noise import add_noise, splitmix64, standard_normals

MASK = (1 << 64) - 1


def reference_stream(seed, count):
    """Scalar SplitMix64, written independently of the vectorized version."""
    state = seed & MASK
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & MASK
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.append(z)
    return out


class TestSplitmix64:
    def test_published_vectors_seed_zero(self):
        got = splitmix64(0, 3).tolist()
        assert got == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_frozen_vectors_seed_one(self):
        got = splitmix64(1, 2).tolist()
        assert got == [0x910A2DEC89025CC1, 0xBEEB8DA1658EEC67]

    def test_matches_scalar_reference(self):
        for seed in (0, 1, 42, 123456789, 2 ** 63, MASK):
            assert splitmix64(seed, 17).tolist() == reference_stream(seed, 17)

    def test_counter_based_prefix_property(self):
        long = splitmix64(99, 64)
        short = splitmix64(99, 10)
        assert np.array_equal(long[:10], short)


class TestStandardNormals:
    def test_first_pair_matches_box_muller_by_hand(self):
        z = reference_stream(1, 2)
        u1 = ((z[0] >> 11) + 1) * 2.0 ** -53
        u2 = (z[1] >> 11) * 2.0 ** -53
        r = math.sqrt(-2.0 * math.log(u1))
        got = standard_normals(1, 2)
        assert got[0] == r * math.cos(2.0 * math.pi * u2)
        assert got[1] == r * math.sin(2.0 * math.pi * u2)

    def test_odd_count_truncates_final_pair(self):
        assert np.array_equal(standard_normals(7, 5), standard_normals(7, 6)[:5])

    def test_moments(self):
        x = standard_normals(3, 400000)
        assert abs(x.mean()) < 0.01
        assert abs(x.std() - 1.0) < 0.01


class TestAddNoise:
    def test_sigma_zero_is_identity(self):
        img = np.arange(12.0).reshape(3, 4)
        out = add_noise(img, 0.0, 5)
        assert np.array_equal(out, img)
        assert out is not img

    def test_sample_std_in_band(self):
        img = np.full((512, 512), 128.0)
        out = add_noise(img, 25.0, 2)
        assert 24.5 <= (out - img).std() <= 25.5

    def test_same_seed_bit_identical(self):
        img = np.zeros((32, 32))
        assert np.array_equal(add_noise(img, 10.0, 9), add_noise(img, 10.0, 9))

    def test_different_seeds_differ(self):
        img = np.zeros((16, 16))
        assert not np.array_equal(add_noise(img, 10.0, 1), add_noise(img, 10.0, 2))

    def test_rejects_negative_sigma(self):
        with pytest.raises(InvalidInputError):
            add_noise(np.zeros((4, 4)), -1.0, 0)
