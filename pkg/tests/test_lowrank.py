import numpy as np
import pytest

from pglr.errors import InvalidInputError
from pglr.lowrank import (
    ShrinkageSpec,
    gnnm_objective,
    gnnm_shrink,
    nnp_shrink,
    svd,
    wnnp_shrink,
)


def random_matrix(rng, q, d, rank=None):
    if rank is None:
        return rng.standard_normal((q, d))
    a = rng.standard_normal((q, rank))
    b = rng.standard_normal((rank, d))
    return a @ b


def singular_values(a):
    return np.linalg.svd(a, compute_uv=False)


def perturbations(rng, shape, count, radius):
    delta = rng.standard_normal((count,) + shape)
    norms = np.sqrt((delta ** 2).sum(axis=(1, 2), keepdims=True))
    radii = rng.uniform(0.0, radius, size=(count, 1, 1))
    return delta / norms * radii


class TestSvd:
    def test_diagonal_matrix(self):
        f = svd(np.diag([3.0, 1.0]))
        assert np.array_equal(f.singular_values, [3.0, 1.0])

    def test_zero_matrix(self):
        f = svd(np.zeros((4, 4)))
        assert np.array_equal(f.singular_values, np.zeros(4))

    def test_reconstruction_random_5x3(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((5, 3))
        f = svd(m)
        recon = (f.u * f.singular_values) @ f.v.T
        assert np.linalg.norm(recon - m) <= 1e-8 * np.linalg.norm(m)

    def test_factorization_invariants_random_shapes(self):
        rng = np.random.default_rng(11)
        for trial in range(120):
            q = int(rng.integers(1, 13))
            d = int(rng.integers(1, 13))
            rank = None if trial % 3 else int(rng.integers(0, min(q, d) + 1))
            m = random_matrix(rng, q, d, rank)
            f = svd(m)
            s = f.singular_values
            assert np.all(s >= 0.0)
            assert np.all(np.diff(s) <= 0.0)
            scale = max(np.linalg.norm(m), 1e-300)
            assert np.linalg.norm((f.u * s) @ f.v.T - m) <= 1e-8 * scale
            k = s.size
            assert np.max(np.abs(f.u.T @ f.u - np.eye(k))) <= 1e-10
            assert np.max(np.abs(f.v.T @ f.v - np.eye(k))) <= 1e-10

    def test_matches_reference_singular_values(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            m = random_matrix(rng, int(rng.integers(1, 10)), int(rng.integers(1, 10)))
            ref = singular_values(m)
            got = svd(m).singular_values[: ref.size]
            assert np.allclose(got, ref, rtol=1e-10, atol=1e-10 * max(ref[0], 1.0))

    def test_deterministic_with_sign_convention(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((6, 4))
        f1 = svd(m)
        f2 = svd(m.copy())
        assert np.array_equal(f1.u, f2.u)
        assert np.array_equal(f1.singular_values, f2.singular_values)
        assert np.array_equal(f1.v, f2.v)
        for col in f1.v.T:
            nz = col[np.abs(col) > 1e-12]
            if nz.size:
                assert nz[0] > 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            svd(np.array([[1.0, np.nan]]))
        with pytest.raises(InvalidInputError):
            svd(np.array([[np.inf], [0.0]]))


class TestNnpShrink:
    def test_diagonal_soft_threshold(self):
        out = nnp_shrink(np.diag([3.0, 1.0]), 2.0)
        assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-12)

    def test_zero_threshold_is_identity(self):
        rng = np.random.default_rng(13)
        y = rng.standard_normal((6, 6))
        out = nnp_shrink(y, 0.0)
        assert np.linalg.norm(out - y) <= 1e-8 * np.linalg.norm(y)

    def test_singular_values_soft_thresholded(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            y = random_matrix(rng, int(rng.integers(2, 9)), int(rng.integers(2, 9)))
            mu = float(rng.uniform(0.0, 3.0))
            expect = np.maximum(singular_values(y) - mu, 0.0)
            got = singular_values(nnp_shrink(y, mu))
            assert np.allclose(got, expect, atol=1e-12 * max(1.0, expect.max()))

    def test_perturbation_oracle_6x6(self):
        rng = np.random.default_rng(19)
        y = rng.standard_normal((6, 6))
        mu = 0.5
        x = nnp_shrink(y, mu)

        def objective(z):
            return 0.5 * np.sum((y - z) ** 2, axis=(-2, -1)) + mu * np.linalg.svd(
                z, compute_uv=False
            ).sum(axis=-1)

        best = objective(x)
        others = objective(x + perturbations(rng, y.shape, 1000, 0.1))
        assert np.all(best <= others + 1e-9)

    def test_rejects_negative_mu(self):
        with pytest.raises(InvalidInputError):
            nnp_shrink(np.eye(2), -0.1)


class TestWnnpShrink:
    def test_equal_weights_reduce_to_nnp(self):
        out = wnnp_shrink(np.diag([5.0, 2.0]), ShrinkageSpec(weights=np.array([1.0, 1.0])))
        assert np.allclose(out, np.diag([4.0, 1.0]), atol=1e-12)

    def test_per_value_thresholds(self):
        out = wnnp_shrink(np.diag([5.0, 2.0]), ShrinkageSpec(weights=np.array([0.0, 3.0])))
        assert np.allclose(out, np.diag([5.0, 0.0]), atol=1e-12)

    def test_short_weights_padded_with_last(self):
        y = np.diag([9.0, 6.0, 3.0])
        out = wnnp_shrink(y, ShrinkageSpec(weights=np.array([2.0])))
        assert np.allclose(out, np.diag([7.0, 4.0, 1.0]), atol=1e-12)

    def test_perturbation_oracle_5x5(self):
        rng = np.random.default_rng(23)
        y = rng.standard_normal((5, 5))
        w = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        x = wnnp_shrink(y, ShrinkageSpec(weights=w))

        def objective(z):
            vals = np.linalg.svd(z, compute_uv=False)
            return 0.5 * np.sum((y - z) ** 2, axis=(-2, -1)) + vals @ w

        best = objective(x)
        others = objective(x + perturbations(rng, y.shape, 1000, 0.1))
        assert np.all(best <= others + 1e-9)

    def test_rejects_descending_weights(self):
        with pytest.raises(InvalidInputError):
            wnnp_shrink(np.eye(3), ShrinkageSpec(weights=np.array([0.5, 0.2, 0.1])))

    def test_rejects_missing_weights(self):
        with pytest.raises(InvalidInputError):
            wnnp_shrink(np.eye(3), ShrinkageSpec(mu=1.0))


class TestGnnmShrink:
    def test_diagonal_example(self):
        x, rank = gnnm_shrink(np.diag([3.0, 1.0]), 4.0)
        assert rank == 1
        assert np.allclose(singular_values(x), [np.sqrt(5.0), 0.0], atol=1e-12)

    def test_zero_matrix(self):
        x, rank = gnnm_shrink(np.zeros((3, 5)), 7.0)
        assert rank == 0
        assert np.array_equal(x, np.zeros((3, 5)))

    def test_zero_mu_copies_input(self):
        rng = np.random.default_rng(29)
        y = random_matrix(rng, 6, 4, rank=2)
        x, rank = gnnm_shrink(y, 0.0)
        assert np.array_equal(x, y)
        assert rank == 2

    def test_rank_never_exceeds_matrix_rank(self):
        rng = np.random.default_rng(31)
        for _ in range(40):
            q = int(rng.integers(1, 10))
            d = int(rng.integers(1, 10))
            y = random_matrix(rng, q, d)
            _, rank = gnnm_shrink(y, float(rng.uniform(0.0, 4.0)))
            assert 0 <= rank <= min(q, d)

    def test_double_application_formula_exact_on_diagonals(self):
        # values picked so the intermediate square roots are exact in floats
        y = np.diag([5.0, 4.0, 3.0])
        mu = 9.0
        once, _ = gnnm_shrink(y, mu)
        twice, _ = gnnm_shrink(once, mu)
        lam2 = np.array([25.0, 16.0, 9.0])
        expect = np.sqrt(np.maximum(np.maximum(lam2 - mu, 0.0) - mu, 0.0))
        assert np.array_equal(np.sort(np.abs(np.diag(twice)))[::-1], expect)

    def test_double_application_formula_general(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            y = random_matrix(rng, 7, 5)
            mu = float(rng.uniform(0.1, 2.0))
            once, _ = gnnm_shrink(y, mu)
            twice, _ = gnnm_shrink(once, mu)
            lam2 = singular_values(y) ** 2
            expect = np.sqrt(np.maximum(np.maximum(lam2 - mu, 0.0) - mu, 0.0))
            got = singular_values(twice)
            assert np.allclose(got, expect, atol=1e-9)

    def test_monotone_in_mu(self):
        rng = np.random.default_rng(41)
        for _ in range(30):
            y = random_matrix(rng, 6, 8)
            mu1, mu2 = np.sort(rng.uniform(0.0, 5.0, size=2))
            s1 = singular_values(gnnm_shrink(y, float(mu1))[0])
            s2 = singular_values(gnnm_shrink(y, float(mu2))[0])
            assert np.all(s1 >= s2 - 1e-12)

    def test_preserves_singular_vectors(self):
        rng = np.random.default_rng(43)
        u, _ = np.linalg.qr(rng.standard_normal((7, 3)))
        v, _ = np.linalg.qr(rng.standard_normal((5, 3)))
        y = (u * np.array([9.0, 5.0, 2.0])) @ v.T
        fy = svd(y)
        fx = svd(gnnm_shrink(y, 3.0)[0])
        # all three values survive mu=3; compare the leading factors
        assert np.allclose(fx.u[:, :3], fy.u[:, :3], atol=1e-8)
        assert np.allclose(fx.v[:, :3], fy.v[:, :3], atol=1e-8)

    def test_rejects_negative_mu(self):
        with pytest.raises(InvalidInputError):
            gnnm_shrink(np.eye(2), -1.0)


class TestGnnmObjective:
    def test_zero_everything(self):
        assert gnnm_objective(np.zeros((2, 2)), np.zeros((2, 2)), 1.0) == 0.0

    def test_hand_computed_value(self):
        y = np.array([[2.0]])
        assert gnnm_objective(y, np.zeros((1, 1)), 1.0) == 8.0

    def test_shrink_output_beats_identity(self):
        y = np.diag([3.0, 1.0])
        x, _ = gnnm_shrink(y, 4.0)
        assert gnnm_objective(y, x, 4.0) < gnnm_objective(y, y, 4.0)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            gnnm_objective(np.zeros((2, 2)), np.zeros((2, 3)), 1.0)
