import numpy as np
import pytest

from ima_lab.contrast import (
    hadamard_gap_upper_bound,
    local_contrast_from_gram,
    local_ima_contrast,
    offdiag_coherence,
    theoretical_success_bound,
)
from ima_lab.errors import DomainError, NonFiniteError, RankDeficientError, ZeroColumnError

# oracle values computed in 40-digit precision (mpmath) from the closed forms
SHEAR_CONTRAST = 0.34657359027997264  # log(sqrt(2)) for [[1,1],[0,1]]
HADAMARD_2_01 = 0.005025167926750721  # (-log 0.9 - log 1.1) / 2
BOUND_101_2 = 0.9267374444450632  # 1 - exp(2 log 2 - 100 * 0.16 / 4)


def random_corpus(n, seed=0, m_range=(2, 64), d_cap=8):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        d = int(rng.integers(1, min(m, d_cap) + 1))
        yield rng.standard_normal((m, d))


class TestLocalContrast:
    def test_orthogonal_columns_give_zero(self):
        J = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert local_ima_contrast(J) == 0.0

    def test_shear_matrix(self):
        J = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert local_ima_contrast(J) == pytest.approx(SHEAR_CONTRAST, abs=1e-14)

    def test_scaled_orthonormal_columns_give_zero(self):
        rng = np.random.default_rng(5)
        Q, _ = np.linalg.qr(rng.standard_normal((5, 3)))
        D = np.diag([0.3, 2.0, 11.0])
        assert local_ima_contrast(Q @ D) <= 1e-13

    def test_nonnegative_on_random_corpus(self):
        for J in random_corpus(2000, seed=1):
            assert local_ima_contrast(J) >= 0.0

    def test_left_orthogonal_invariance(self):
        rng = np.random.default_rng(2)
        for J in random_corpus(300, seed=3):
            Q, _ = np.linalg.qr(rng.standard_normal((J.shape[0], J.shape[0])))
            assert local_ima_contrast(Q @ J) == pytest.approx(local_ima_contrast(J), abs=1e-8)

    def test_right_permutation_diagonal_invariance(self):
        rng = np.random.default_rng(4)
        for J in random_corpus(300, seed=5):
            d = J.shape[1]
            P = np.eye(d)[rng.permutation(d)]
            D = np.diag(rng.uniform(0.1, 10.0, size=d))
            assert local_ima_contrast(J @ P @ D) == pytest.approx(local_ima_contrast(J), abs=1e-8)

    def test_rank_deficient_raises(self):
        J = np.ones((4, 2))
        with pytest.raises(RankDeficientError):
            local_ima_contrast(J)

    def test_nonfinite_raises(self):
        J = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(NonFiniteError):
            local_ima_contrast(J)

    def test_wide_matrix_rejected(self):
        with pytest.raises(DomainError):
            local_ima_contrast(np.ones((2, 3)))

    def test_gram_batch_agrees_with_scalar(self):
        mats = list(random_corpus(50, seed=6, m_range=(4, 12), d_cap=4))
        d = mats[0].shape[1]
        mats = [J for J in mats if J.shape[1] == d][:10]
        grams = np.stack([J.T @ J for J in mats])
        batch = local_contrast_from_gram(grams)
        for J, value in zip(mats, batch):
            assert max(value, 0.0) == pytest.approx(local_ima_contrast(J), abs=1e-9)


class TestHadamardBound:
    def test_zero_eps_is_zero(self):
        for d in (1, 2, 5, 17):
            assert hadamard_gap_upper_bound(d, 0.0) == 0.0

    def test_closed_form_value(self):
        assert hadamard_gap_upper_bound(2, 0.1) == pytest.approx(HADAMARD_2_01, abs=1e-15)

    def test_domain_violation(self):
        with pytest.raises(DomainError):
            hadamard_gap_upper_bound(3, 0.5)
        with pytest.raises(DomainError):
            hadamard_gap_upper_bound(2, -0.1)

    def test_bound_dominates_contrast_on_corpus(self):
        # coherence eps with (d-1) eps < 1 implies contrast <= bound(d, eps)
        checked = 0
        for J in random_corpus(2000, seed=7):
            d = J.shape[1]
            eps = offdiag_coherence(J)
            if (d - 1) * eps >= 1.0:
                continue
            assert local_ima_contrast(J) <= hadamard_gap_upper_bound(d, eps) + 1e-9
            checked += 1
        assert checked > 500


class TestTheoreticalBound:
    def test_clamps_to_zero_for_small_m(self):
        assert theoretical_success_bound(2, 3, 0.1, 1.0) == 0.0

    def test_limit_is_one(self):
        assert theoretical_success_bound(10**9, 2, 0.4, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_frozen_value(self):
        assert theoretical_success_bound(101, 2, 0.4, 1.0) == pytest.approx(BOUND_101_2, abs=1e-15)

    def test_monotonicity(self):
        ms = [50, 100, 400, 1600]
        vals = [theoretical_success_bound(m, 3, 0.2, 1.0) for m in ms]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        ds = [2, 3, 4, 6]
        vals_d = [theoretical_success_bound(400, d, 0.2, 1.0) for d in ds]
        assert all(a >= b for a, b in zip(vals_d, vals_d[1:]))

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            theoretical_success_bound(1, 2, 0.1)
        with pytest.raises(DomainError):
            theoretical_success_bound(10, 2, -0.1)
        with pytest.raises(DomainError):
            theoretical_success_bound(10, 2, 0.1, kappa=0.0)


class TestCoherence:
    def test_orthogonal_matrix_zero(self):
        Q, _ = np.linalg.qr(np.random.default_rng(8).standard_normal((6, 3)))
        assert offdiag_coherence(Q) <= 1e-15

    def test_shear_value(self):
        J = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert offdiag_coherence(J) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-15)

    def test_single_column_is_zero(self):
        assert offdiag_coherence(np.array([[3.0], [4.0]])) == 0.0

    def test_zero_column_raises(self):
        J = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ZeroColumnError):
            offdiag_coherence(J)

    def test_zero_contrast_implies_tiny_coherence(self):
        # construct near-orthogonal matrices; whenever c <= 1e-10 the
        # coherence must be <= 1e-4 (and orthogonal columns give c = 0)
        rng = np.random.default_rng(9)
        hits = 0
        for _ in range(200):
            m = int(rng.integers(4, 32))
            d = int(rng.integers(2, min(m, 6) + 1))
            Q, _ = np.linalg.qr(rng.standard_normal((m, d)))
            J = Q + 10.0 ** rng.uniform(-9, -3) * rng.standard_normal((m, d))
            c = local_ima_contrast(J)
            if c <= 1e-10:
                hits += 1
                assert offdiag_coherence(J) <= 1e-4
        assert hits > 10
