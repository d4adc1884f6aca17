"""Closed-form loss identities, invariances, and gradient checks."""

import math

import numpy as np
import pytest

from aualign.errors import ContractError, NumericDomainError
from aualign.gradcheck import grad_check
from aualign.losses import (
    LossConfig,
    clip_loss,
    cosine_sim,
    focal_loss,
    lambda_at,
    lambda_progress,
    total_loss,
)
from aualign.tensor import Tensor
from aualign.train import one_hot


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.3, -1.2, 2.0])
        assert cosine_sim(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_half_sqrt_two(self):
        assert cosine_sim([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(NumericDomainError):
            cosine_sim([0.0, 0.0], [1.0, 0.0])


class TestClipLoss:
    def test_single_pair_is_zero(self):
        x = Tensor(np.array([[0.4, -0.3, 0.8]]))
        assert clip_loss(x, x, 0.07).item() == 0.0

    def test_all_equal_similarities_k2(self):
        # identical rows make every pairwise similarity 1
        x = Tensor(np.array([[1.0, 0.0], [1.0, 0.0]]))
        assert clip_loss(x, x, 0.07).item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_identity_similarity_closed_form(self):
        # orthonormal matched rows: S = I
        x = Tensor(np.eye(2))
        expected = math.log1p(math.exp(-1.0 / 0.07))
        assert clip_loss(x, x, 0.07).item() == pytest.approx(expected, abs=1e-9)

    def test_row_rescaling_invariance(self):
        rng = np.random.default_rng(0)
        xv = rng.standard_normal((4, 6))
        xt = rng.standard_normal((4, 6))
        base = clip_loss(Tensor(xv), Tensor(xt), 0.07).item()
        xv2 = xv.copy()
        xv2[2] *= 37.5
        xt2 = xt.copy()
        xt2[0] *= 0.003
        scaled = clip_loss(Tensor(xv2), Tensor(xt2), 0.07).item()
        assert scaled == pytest.approx(base, abs=1e-10)

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(1)
        xv = rng.standard_normal((5, 4))
        xt = rng.standard_normal((5, 4))
        perm = rng.permutation(5)
        base = clip_loss(Tensor(xv), Tensor(xt), 0.07).item()
        permuted = clip_loss(Tensor(xv[perm]), Tensor(xt[perm]), 0.07).item()
        assert permuted == pytest.approx(base, abs=1e-12)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(2)
        xv = rng.standard_normal((4, 3))
        xt = rng.standard_normal((4, 3))
        assert clip_loss(Tensor(xv), Tensor(xt), 0.07).item() == pytest.approx(
            clip_loss(Tensor(xt), Tensor(xv), 0.07).item(), abs=1e-12
        )

    def test_zero_row_rejected(self):
        xv = np.ones((2, 3))
        xv[1] = 0.0
        with pytest.raises(NumericDomainError):
            clip_loss(Tensor(xv), Tensor(np.ones((2, 3))), 0.07)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        xt = Tensor(rng.standard_normal((3, 5)))
        err = grad_check(lambda x: clip_loss(x, xt, 0.07), Tensor(rng.standard_normal((3, 5))))
        assert err <= 1e-6

    def test_bad_tau(self):
        with pytest.raises(ContractError):
            clip_loss(Tensor(np.eye(2)), Tensor(np.eye(2)), 0.0)


class TestFocalLoss:
    def test_gamma_zero_is_cross_entropy_uniform(self):
        scores = Tensor(np.zeros((1, 2)))
        labels = one_hot([0], 2)
        assert focal_loss(scores, labels, 0.0).item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_perfect_prediction_vanishes(self):
        scores = Tensor(np.array([[40.0, 0.0, 0.0]]))
        labels = one_hot([0], 3)
        assert focal_loss(scores, labels, 2.0).item() == pytest.approx(0.0, abs=1e-12)

    def test_single_sample_closed_form(self):
        # logits chosen so softmax gives exactly (0.9, 0.1)
        scores = Tensor(np.log(np.array([[0.9, 0.1]])))
        labels = one_hot([0], 2)
        expected = -(0.1**2) * math.log(0.9)  # 0.00105361
        assert focal_loss(scores, labels, 2.0).item() == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.00105361, abs=1e-8)

    def test_gamma_zero_matches_mean_cross_entropy(self):
        rng = np.random.default_rng(4)
        scores = rng.standard_normal((6, 4))
        labels = one_hot(rng.integers(0, 4, 6).tolist(), 4)
        logp = scores - np.log(np.exp(scores - scores.max(1, keepdims=True)).sum(1, keepdims=True)) - scores.max(1, keepdims=True)
        expected = -(labels * logp).sum(axis=1).mean()
        assert focal_loss(Tensor(scores), labels, 0.0).item() == pytest.approx(expected, abs=1e-12)

    def test_nonnegative_and_monotone_in_p_true(self):
        values = []
        for p_true in (0.2, 0.5, 0.8, 0.95):
            scores = Tensor(np.log(np.array([[p_true, 1 - p_true]])))
            values.append(focal_loss(scores, one_hot([0], 2), 2.0).item())
        assert all(v >= 0 for v in values)
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_non_one_hot_rejected(self):
        with pytest.raises(ContractError):
            focal_loss(Tensor(np.zeros((2, 3))), np.full((2, 3), 0.5), 2.0)

    def test_gradient(self):
        rng = np.random.default_rng(5)
        labels = one_hot([1, 0, 2], 3)
        err = grad_check(lambda x: focal_loss(x, labels, 2.0), Tensor(rng.standard_normal((3, 3))))
        assert err <= 1e-6


class TestProgressiveSchedule:
    def test_endpoints(self):
        cfg = LossConfig()
        assert lambda_at(0, cfg) == 2.0
        assert lambda_at(cfg.total_epochs, cfg) == 1.0

    def test_linear_interpolation(self):
        cfg = LossConfig(total_epochs=55)
        assert lambda_at(22, cfg) == pytest.approx(1.6, abs=1e-12)

    def test_affine_in_epoch(self):
        cfg = LossConfig(total_epochs=55)
        vals = [lambda_at(e, cfg) for e in range(56)]
        deltas = {round(b - a, 12) for a, b in zip(vals, vals[1:])}
        assert len(deltas) == 1

    def test_weight_sum_constant(self):
        cfg = LossConfig()
        for ep in (0, 13, 30, 55):
            lam = lambda_at(ep, cfg)
            assert lam + (cfg.lambda_s - lam) == cfg.lambda_s

    def test_total_loss_endpoints(self):
        cfg = LossConfig(total_epochs=10)
        assert total_loss(3.0, 5.0, 0, cfg) == pytest.approx(2 * 3.0)
        assert total_loss(3.0, 5.0, 10, cfg) == pytest.approx(3.0 + 5.0)

    def test_out_of_range(self):
        cfg = LossConfig(total_epochs=10)
        with pytest.raises(ContractError):
            lambda_at(11, cfg)
        with pytest.raises(ContractError):
            lambda_progress(1.5, cfg)

    def test_config_validation(self):
        with pytest.raises(ContractError):
            LossConfig(tau=-1.0)
        with pytest.raises(ContractError):
            LossConfig(lambda_0=3.0, lambda_s=2.0)
