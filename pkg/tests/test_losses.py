"""Hand-computable cases and structural properties of the objective terms."""

import numpy as np
import pytest

from istpa import tensor as T
from istpa.errors import ContractError, DimensionError
from istpa.losses import (
    LossWeights,
    classification_loss,
    divergence_loss,
    interactive_loss,
    total_loss,
)
from istpa.pca import covariance_eigenbasis
from istpa.tensor import Tensor

RNG = np.random.default_rng(7)


def loop_interactive(a, x):
    """Literal double-sum evaluation of the interaction penalty."""
    proj = a @ x
    trace = 0.0
    for m in range(proj.shape[0]):
        trace += proj[m] @ proj[m]
    gram = a @ a.T
    ortho = 0.0
    for m in range(a.shape[0]):
        for n in range(a.shape[0]):
            if m != n:
                ortho += gram[m, n] ** 2
    return -trace + ortho


class TestInteractive:
    def test_identity_attention_identity_features(self):
        val = interactive_loss(Tensor(np.eye(2)), Tensor(np.eye(2))).item()
        assert val == pytest.approx(-2.0, abs=1e-12)

    def test_duplicated_row_case(self):
        a = Tensor(np.array([[1.0, 0.0], [1.0, 0.0]]))
        val = interactive_loss(a, Tensor(np.eye(2))).item()
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_matches_literal_double_sum(self):
        for _ in range(10):
            a = RNG.standard_normal((3, 5))
            x = RNG.standard_normal((5, 4))
            got = interactive_loss(Tensor(a), Tensor(x)).item()
            assert got == pytest.approx(loop_interactive(a, x), abs=1e-10)

    def test_orthogonality_term_vanishes_iff_rows_orthogonal(self):
        x = Tensor(np.zeros((3, 2)))  # kills the trace term
        ortho = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        assert interactive_loss(Tensor(ortho), x).item() == pytest.approx(0.0, abs=1e-15)
        oblique = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
        assert interactive_loss(Tensor(oblique), x).item() > 0.0

    def test_oracle_basis_attains_negative_eigenvalue_sum(self):
        for seed in range(5):
            x = np.random.default_rng(seed).standard_normal((6, 3))
            basis = covariance_eigenbasis(x, 2)
            val = interactive_loss(Tensor(basis.basis), Tensor(x)).item()
            assert val == pytest.approx(-basis.eigenvalues.sum(), abs=1e-8)

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            interactive_loss(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


class TestDivergence:
    def test_equal_matrices_give_sqrt_dp(self):
        a = np.full((4, 8), 1.0 / np.sqrt(8))
        val = divergence_loss(Tensor(a), [Tensor(a.copy())]).item()
        assert val == pytest.approx(np.sqrt(4 * 8), abs=1e-12)

    def test_unit_difference_everywhere_gives_zero(self):
        a = Tensor(np.ones((2, 3)))
        s = Tensor(np.zeros((2, 3)))
        assert divergence_loss(a, [s]).item() == pytest.approx(0.0, abs=1e-12)

    def test_multi_level_sum_inside_root(self):
        a = np.full((2, 4), 0.5)
        val = divergence_loss(Tensor(a), [Tensor(a.copy()), Tensor(a.copy())]).item()
        assert val == pytest.approx(np.sqrt(2 * 2 * 4), abs=1e-12)

    def test_out_of_range_difference_rejected(self):
        a = Tensor(np.full((2, 2), 2.0))
        s = Tensor(np.zeros((2, 2)))
        with pytest.raises(ContractError):
            divergence_loss(a, [s])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            divergence_loss(Tensor(np.ones((2, 2))), [Tensor(np.ones((2, 3)))])

    def test_needs_at_least_one_level(self):
        with pytest.raises(ContractError):
            divergence_loss(Tensor(np.ones((2, 2))), [])


class TestTotal:
    def make_inputs(self):
        logits = Tensor(RNG.standard_normal(3))
        a = np.abs(RNG.standard_normal((4, 8)))
        a /= np.sqrt((a * a).sum(axis=1, keepdims=True))
        attention = Tensor(a)
        x_top = Tensor(RNG.standard_normal((8, 5)))
        soft = np.abs(RNG.standard_normal((4, 8)))
        soft /= soft.sum(axis=1, keepdims=True)
        return logits, attention, x_top, [Tensor(soft)]

    def test_zero_weights_reduce_to_classification(self):
        logits, attention, x_top, level_softmax = self.make_inputs()
        trainable = [Tensor(RNG.standard_normal((3, 3)))]
        breakdown = total_loss(
            logits, 1, attention, x_top, level_softmax, trainable,
            LossWeights(lambda_wd=0.0, beta=0.0, gamma=0.0),
        )
        assert breakdown.total.item() == pytest.approx(breakdown.classification.item(), abs=1e-15)

    def test_disabled_terms_are_zero(self):
        logits, attention, x_top, level_softmax = self.make_inputs()
        breakdown = total_loss(
            logits, 0, attention, x_top, level_softmax, [], LossWeights(),
            enable_interactive=False, enable_divergence=False,
        )
        assert breakdown.interactive.item() == 0.0
        assert breakdown.divergence.item() == 0.0

    def test_weight_decay_counts_every_trainable(self):
        logits, attention, x_top, level_softmax = self.make_inputs()
        trainable = [Tensor(np.full(4, 2.0)), Tensor(np.array(3.0))]
        breakdown = total_loss(
            logits, 2, attention, x_top, level_softmax, trainable, LossWeights(lambda_wd=0.5),
        )
        assert breakdown.weight_decay.item() == pytest.approx(4 * 4.0 + 9.0, abs=1e-12)
        expect = (
            breakdown.classification.item()
            + 0.5 * 25.0
            + LossWeights().beta * breakdown.interactive.item()
            + LossWeights().gamma * breakdown.divergence.item()
        )
        assert breakdown.total.item() == pytest.approx(expect, abs=1e-10)

    def test_classification_is_cross_entropy(self):
        logits = np.array([0.2, -1.0, 2.0])
        p = np.exp(logits) / np.exp(logits).sum()
        assert classification_loss(Tensor(logits), 2).item() == pytest.approx(-np.log(p[2]), abs=1e-12)

    def test_negative_weights_rejected(self):
        with pytest.raises(ContractError):
            LossWeights(beta=-1.0)
