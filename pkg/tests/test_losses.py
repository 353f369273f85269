"""Softmax and loss semantics, including the frozen hand-computed values."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knfu.errors import InputError
from knfu.nn.losses import ce_loss, distill_loss_and_grad, kl_loss, sharpen, softmax


def simplex_rows(n_rows, n_cols):
    """Strategy producing (n_rows, n_cols) matrices with simplex rows."""
    return (
        st.lists(
            st.lists(st.floats(1e-6, 1.0), min_size=n_cols, max_size=n_cols),
            min_size=n_rows,
            max_size=n_rows,
        )
        .map(np.array)
        .map(lambda m: m / m.sum(axis=1, keepdims=True))
    )


class TestSoftmax:
    def test_equal_logits_give_uniform(self):
        for c in (2, 5, 10):
            for t in (0.5, 1.0, 3.0):
                out = softmax(np.full((4, c), 1.7), temperature=t)
                np.testing.assert_allclose(out, 1.0 / c, atol=1e-12)

    def test_two_class_values(self):
        # direct evaluation of exp(z)/sum(exp(z))
        out = softmax(np.array([[2.0, 0.0]]))
        np.testing.assert_allclose(
            out, [[0.8807970779778824, 0.11920292202211755]], atol=1e-12
        )

    def test_temperature_two(self):
        out = softmax(np.array([[2.0, 0.0]]), temperature=2.0)
        np.testing.assert_allclose(
            out, [[0.7310585786300049, 0.2689414213699951]], atol=1e-12
        )

    def test_temperature_one_is_plain_softmax(self):
        logits = np.random.default_rng(0).normal(size=(6, 4))
        np.testing.assert_array_equal(softmax(logits), softmax(logits, 1.0))

    def test_rows_sum_to_one(self):
        logits = np.random.default_rng(1).normal(size=(20, 7)) * 30
        out = softmax(logits, temperature=0.7)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert out.min() >= 0

    def test_nonpositive_temperature_rejected(self):
        with pytest.raises(InputError):
            softmax(np.zeros((1, 3)), temperature=0.0)


class TestCeLoss:
    def test_one_hot_correct_is_zero(self):
        preds = np.eye(4)
        assert ce_loss(preds, np.arange(4)) == 0.0

    def test_uniform_ten_classes(self):
        preds = np.full((3, 10), 0.1)
        assert ce_loss(preds, np.array([0, 4, 9])) == pytest.approx(
            2.302585092994046, abs=1e-12
        )

    def test_two_row_value(self):
        preds = np.array([[0.5, 0.5], [0.25, 0.75]])
        assert ce_loss(preds, np.array([0, 1])) == pytest.approx(
            0.4904146265058631, abs=1e-12
        )

    def test_zero_probability_clamped(self):
        preds = np.array([[0.0, 1.0]])
        loss = ce_loss(preds, np.array([0]))
        assert math.isfinite(loss)
        assert loss == pytest.approx(-math.log(1e-12))

    def test_label_out_of_range(self):
        with pytest.raises(InputError):
            ce_loss(np.full((1, 3), 1 / 3), np.array([3]))

    def test_permutation_equivariant_in_class_axis(self):
        rng = np.random.default_rng(2)
        preds = rng.dirichlet(np.ones(5), size=8)
        labels = rng.integers(0, 5, 8)
        perm = rng.permutation(5)
        inv = np.argsort(perm)
        assert ce_loss(preds, labels) == pytest.approx(
            ce_loss(preds[:, perm], inv[labels]), abs=1e-12
        )


class TestKlLoss:
    def test_identical_matrices_zero(self):
        m = np.random.default_rng(3).dirichlet(np.ones(6), size=5)
        assert kl_loss(m, m) == 0.0

    def test_hand_value(self):
        # sum-loop oracle: 0.9 ln(0.9/0.5) + 0.1 ln(0.1/0.5)
        assert kl_loss(np.array([[0.5, 0.5]]), np.array([[0.9, 0.1]])) == pytest.approx(
            0.3680642071684971, abs=1e-12
        )

    def test_uniform_pair_zero(self):
        for c in (2, 3, 17):
            m = np.full((4, c), 1.0 / c)
            assert kl_loss(m, m) == 0.0

    @given(simplex_rows(3, 4), simplex_rows(3, 4))
    @settings(max_examples=100, deadline=None)
    def test_nonnegative(self, student, target):
        assert kl_loss(student, target) >= 0.0

    def test_permutation_equivariant_in_class_axis(self):
        rng = np.random.default_rng(4)
        s = rng.dirichlet(np.ones(5), size=6)
        t = rng.dirichlet(np.ones(5), size=6)
        perm = rng.permutation(5)
        assert kl_loss(s, t) == pytest.approx(
            kl_loss(s[:, perm], t[:, perm]), abs=1e-12
        )

    def test_zero_entries_stay_finite(self):
        student = np.array([[1.0, 0.0]])
        target = np.array([[0.0, 1.0]])
        assert math.isfinite(kl_loss(student, target))


class TestSharpen:
    def test_temperature_one_is_identity(self):
        m = np.random.default_rng(5).dirichlet(np.ones(4), size=3)
        assert sharpen(m, 1.0) is m

    def test_high_temperature_flattens(self):
        m = np.array([[0.9, 0.1]])
        flat = sharpen(m, 10.0)
        assert abs(flat[0, 0] - flat[0, 1]) < abs(m[0, 0] - m[0, 1])
        np.testing.assert_allclose(flat.sum(axis=1), 1.0, atol=1e-12)


class TestCompositeLoss:
    def test_lambda_zero_is_plain_ce(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(5, 4))
        labels = rng.integers(0, 4, 5)
        loss, _ = distill_loss_and_grad(logits, labels, None, 0.0)
        assert loss == ce_loss(softmax(logits), labels)

    def test_target_without_lambda_rejected(self):
        with pytest.raises(InputError):
            distill_loss_and_grad(np.zeros((1, 2)), np.array([0]),
                                  np.array([[0.5, 0.5]]), 0.0)

    def test_lambda_without_target_rejected(self):
        with pytest.raises(InputError):
            distill_loss_and_grad(np.zeros((1, 2)), np.array([0]), None, 1.0)

    def test_matching_target_zeroes_kl_term(self):
        rng = np.random.default_rng(7)
        logits = rng.normal(size=(4, 3))
        labels = logits.argmax(axis=1)
        target = softmax(logits)
        composite, _ = distill_loss_and_grad(logits, labels, target, 1.0)
        ce_only, _ = distill_loss_and_grad(logits, labels, None, 0.0)
        assert composite == ce_only
