"""Forward values, error contracts, and serialization of the tensor kernel."""

import math

import numpy as np
import pytest

from aualign.errors import ContractError, NumericDomainError, ShapeError
from aualign import tensor as tt
from aualign.tensor import Tensor


class TestForwardValues:
    def test_matmul_identity_columns(self):
        # identity-padded 2x3 against ones picks out column sums
        a = Tensor([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        b = Tensor([[1.0], [1.0], [1.0]])
        out = tt.matmul(a, b)
        assert out.data.tolist() == [[2.0], [2.0]]

    def test_softmax_uniform(self):
        out = tt.softmax(Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.data, [1 / 3, 1 / 3, 1 / 3], rtol=0, atol=1e-15)

    def test_sigmoid_symmetry_point(self):
        assert tt.sigmoid(Tensor(0.0)).item() == 0.5

    def test_softmax_sums_to_one(self):
        rng = np.random.default_rng(3)
        out = tt.softmax(Tensor(rng.standard_normal((5, 7))))
        np.testing.assert_allclose(out.data.sum(axis=-1), np.ones(5), atol=1e-12)

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((4, 6))
        base = tt.softmax(Tensor(x)).data
        shifted = tt.softmax(Tensor(x + 17.25)).data
        np.testing.assert_allclose(base, shifted, atol=1e-12)

    def test_log_softmax_matches_log_of_softmax(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 5))
        np.testing.assert_allclose(
            tt.log_softmax(Tensor(x)).data, np.log(tt.softmax(Tensor(x)).data), atol=1e-12
        )

    def test_layer_norm_moments(self):
        rng = np.random.default_rng(6)
        out = tt.layer_norm(Tensor(rng.standard_normal((4, 32)) * 3 + 1)).data
        np.testing.assert_allclose(out.mean(axis=-1), np.zeros(4), atol=1e-12)
        np.testing.assert_allclose(out.std(axis=-1), np.ones(4), atol=1e-3)

    def test_concat_narrow_roundtrip(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((3, 4))
        t = Tensor(x)
        parts = [tt.narrow(t, 1, 0, 2), tt.narrow(t, 1, 2, 2)]
        np.testing.assert_array_equal(tt.concat(parts, axis=1).data, x)

    def test_norm_value(self):
        assert math.isclose(tt.norm(Tensor([3.0, 4.0])).item(), 5.0, rel_tol=1e-15)

    def test_reductions(self):
        t = Tensor([[1.0, 2.0], [3.0, 4.0]])
        assert tt.tsum(t).item() == 10.0
        assert tt.tmean(t).item() == 2.5
        assert tt.tsum(t, axis=0).data.tolist() == [4.0, 6.0]
        assert tt.tmean(t, axis=1, keepdims=True).data.tolist() == [[1.5], [3.5]]

    def test_permute_inverse(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((2, 3, 4, 5))
        t = tt.permute(Tensor(x), (0, 2, 1, 3))
        assert t.shape == (2, 4, 3, 5)
        np.testing.assert_array_equal(tt.permute(t, (0, 2, 1, 3)).data, x)


class TestErrorContracts:
    def test_shape_error_names_operation_and_shapes(self):
        with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(4, 5\)"):
            tt.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))

    def test_elementwise_shape_error(self):
        with pytest.raises(ShapeError, match="add"):
            tt.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4,))))

    def test_log_domain(self):
        with pytest.raises(NumericDomainError):
            tt.log(Tensor([1.0, 0.0]))
        with pytest.raises(NumericDomainError):
            tt.log(Tensor([np.inf]))

    def test_softmax_non_finite(self):
        with pytest.raises(NumericDomainError):
            tt.softmax(Tensor([np.nan, 0.0]))

    def test_exp_overflow(self):
        with pytest.raises(NumericDomainError):
            tt.exp(Tensor([1e4]))

    def test_norm_zero(self):
        with pytest.raises(NumericDomainError):
            tt.norm(Tensor([0.0, 0.0]))

    def test_div_by_zero(self):
        with pytest.raises(NumericDomainError):
            tt.div(Tensor([1.0]), Tensor([0.0]))

    def test_backward_requires_scalar(self):
        t = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ContractError):
            (t * 2.0).backward()

    def test_narrow_out_of_range(self):
        with pytest.raises(ShapeError):
            tt.narrow(Tensor(np.zeros((3, 3))), 0, 2, 2)


class TestAutodiffBasics:
    def test_grad_accumulates_over_reuse(self):
        x = Tensor([2.0], requires_grad=True)
        y = tt.tsum(x * x + x * 3.0)
        y.backward()
        np.testing.assert_allclose(x.grad, [7.0])  # 2x + 3

    def test_no_grad_without_flag(self):
        x = Tensor([1.0])
        y = tt.tsum(x * x)
        y.backward()
        assert x.grad is None

    def test_broadcast_gradient_shape(self):
        w = Tensor(np.ones((1, 4)), requires_grad=True)
        x = Tensor(np.ones((5, 4)))
        tt.tsum(x + w).backward()
        assert w.grad.shape == (1, 4)
        np.testing.assert_allclose(w.grad, np.full((1, 4), 5.0))

    def test_finite_outputs_after_ops(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.standard_normal((6, 6)))
        for out in (tt.softmax(x), tt.layer_norm(x), tt.sigmoid(x), tt.exp(x * 0.01)):
            assert np.isfinite(out.data).all()


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(12)
        arr = rng.standard_normal((3, 5, 2))
        path = tmp_path / "t.bin"
        tt.write_tensor(path, arr)
        np.testing.assert_array_equal(tt.read_tensor(path), arr)

    def test_header_format(self, tmp_path):
        path = tmp_path / "t.bin"
        tt.write_tensor(path, np.zeros((2, 3)))
        header = path.read_bytes().split(b"\n", 1)[0]
        assert header == b"2 2 3"

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.bin"
        tt.write_tensor(path, np.zeros((4, 4)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ContractError):
            tt.read_tensor(path)
