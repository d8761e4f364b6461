#!/usr/bin/env python
#
# Copyright 2026 The rdest Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Tensor operation tests."""

import unittest

import numpy as np

from rdest import rng
from rdest import tensor


def grid(values):
    """2-D list as a 1 x 1 x H x W float64 array."""
    return np.array(values, dtype=np.float64)[np.newaxis, np.newaxis]


def leaf(values):
    return tensor.Tensor(np.array(values, dtype=np.float64),
                         requires_grad=True)


class ConvTest(unittest.TestCase):

    def test_identity_kernel(self):
        x = rng.RngState(1).normal((1, 1, 3, 3), 1.0, np.float64)
        kernel = np.zeros((1, 1, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        out = tensor.conv2d(x, kernel, np.zeros(1))
        np.testing.assert_array_equal(x, out.data)

    def test_all_ones_kernel_with_zero_padding(self):
        out = tensor.conv2d(grid([[1, 2], [3, 4]]), np.ones((1, 1, 3, 3)),
                            np.zeros(1))
        np.testing.assert_array_equal(grid([[10, 10], [10, 10]]), out.data)

    def test_output_shape(self):
        out = tensor.conv2d(np.zeros((2, 3, 8, 4)), np.zeros((5, 3, 5, 5)),
                            np.zeros(5))
        self.assertEqual((2, 5, 8, 4), out.shape)

    def test_bias_is_added_per_output_channel(self):
        out = tensor.conv2d(np.zeros((1, 1, 2, 2)), np.zeros((2, 1, 3, 3)),
                            np.array([1.5, -2.0]))
        np.testing.assert_array_equal(np.full((2, 2), 1.5), out.data[0, 0])
        np.testing.assert_array_equal(np.full((2, 2), -2.0), out.data[0, 1])

    def test_linear_in_input(self):
        state = rng.RngState(2)
        x = state.normal((1, 2, 6, 6), 1.0, np.float64)
        y = state.normal((1, 2, 6, 6), 1.0, np.float64)
        kernel = state.normal((3, 2, 3, 3), 1.0, np.float64)
        bias = np.zeros(3)
        combined = tensor.conv2d(2.0 * x - 0.5 * y, kernel, bias).data
        separate = (2.0 * tensor.conv2d(x, kernel, bias).data -
                    0.5 * tensor.conv2d(y, kernel, bias).data)
        np.testing.assert_allclose(separate, combined, atol=1e-5)

    def test_channel_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.conv2d,
                          np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)),
                          np.zeros(1))

    def test_even_kernel(self):
        self.assertRaises(tensor.DimensionError, tensor.conv2d,
                          np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 2, 2)),
                          np.zeros(1))

    def test_bias_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.conv2d,
                          np.zeros((1, 1, 4, 4)), np.zeros((2, 1, 3, 3)),
                          np.zeros(3))

    def test_sum_gradient_of_kernel(self):
        x = leaf(grid([[1, 2], [3, 4]]))
        kernel = leaf(np.ones((1, 1, 3, 3)))
        bias = leaf(np.zeros(1))
        out = tensor.conv2d(x, kernel, bias)
        out.backward(np.ones(out.shape))
        # Each tap sees the input samples it overlaps inside the padding.
        expected = np.array([[1, 3, 2], [4, 10, 6], [3, 7, 4]],
                            dtype=np.float64)
        np.testing.assert_array_equal(expected, kernel.grad[0, 0])
        np.testing.assert_array_equal([4.0], bias.grad)
        np.testing.assert_array_equal(grid([[4, 4], [4, 4]]), x.grad)


class PoolingTest(unittest.TestCase):

    def test_maxpool(self):
        out = tensor.maxpool2(grid([[1, 2], [3, 4]]))
        np.testing.assert_array_equal(grid([[4]]), out.data)

    def test_maxpool_gradient_goes_to_argmax(self):
        x = leaf(grid([[1, 2], [3, 4]]))
        tensor.maxpool2(x).backward(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(grid([[0, 0], [0, 1]]), x.grad)

    def test_maxpool_tie_goes_to_first_in_row_major_order(self):
        x = leaf(grid([[5, 5], [5, 5]]))
        out = tensor.maxpool2(x)
        out.backward(np.ones((1, 1, 1, 1)))
        self.assertEqual(5.0, out.data.item())
        np.testing.assert_array_equal(grid([[1, 0], [0, 0]]), x.grad)

    def test_maxpool_odd_size(self):
        self.assertRaises(tensor.DimensionError, tensor.maxpool2,
                          np.zeros((1, 1, 3, 4)))

    def test_maxpool_windows(self):
        x = grid([[1, 9, 0, 0],
                  [2, 3, 0, 7],
                  [4, 4, 8, 1],
                  [4, 6, 2, 2]])
        np.testing.assert_array_equal(grid([[9, 7], [6, 8]]),
                                      tensor.maxpool2(x).data)

    def test_upsample(self):
        out = tensor.upsample2(grid([[1, 2], [3, 4]]))
        np.testing.assert_array_equal(grid([[1, 1, 2, 2],
                                            [1, 1, 2, 2],
                                            [3, 3, 4, 4],
                                            [3, 3, 4, 4]]), out.data)

    def test_upsample_backward_sums_four(self):
        x = leaf(grid([[1, 2], [3, 4]]))
        out = tensor.upsample2(x)
        out.backward(np.ones(out.shape))
        np.testing.assert_array_equal(np.full((1, 1, 2, 2), 4.0), x.grad)

    def test_upsample_of_maxpool_keeps_shape(self):
        x = np.zeros((2, 3, 6, 8))
        self.assertEqual(x.shape,
                         tensor.upsample2(tensor.maxpool2(x)).shape)

    def test_mean_pool_undoes_upsample(self):
        x = rng.RngState(3).normal((1, 2, 3, 5), 1.0, np.float64)
        up = tensor.upsample2(x).data
        pooled = up.reshape(1, 2, 3, 2, 5, 2).mean(axis=(3, 5))
        np.testing.assert_array_equal(x, pooled)

    def test_global_avg_pool(self):
        x = np.array([[[[1, 2], [3, 4]], [[5, 6], [7, 8]]]],
                     dtype=np.float64)
        out = tensor.global_avg_pool(x)
        self.assertEqual((1, 2, 1, 1), out.shape)
        np.testing.assert_array_equal([2.5, 6.5], out.data.ravel())


class ActivationTest(unittest.TestCase):

    def test_prelu_negative(self):
        out = tensor.prelu(grid([[-2.0]]), np.array([0.25]))
        self.assertEqual(-0.5, out.data.item())

    def test_prelu_positive_is_identity(self):
        x = grid([[0.0, 1.5], [3.0, 7.0]])
        for slope in (0.0, 0.25, 3.0):
            out = tensor.prelu(x, np.array([slope]))
            np.testing.assert_array_equal(x, out.data)

    def test_prelu_slope_gradient(self):
        slope = leaf([0.25])
        tensor.prelu(grid([[-3.0]]), slope).backward(np.ones((1, 1, 1, 1)))
        self.assertAlmostEqual(-3.0, slope.grad[0], delta=1e-6)

    def test_prelu_slope_per_channel(self):
        x = -np.ones((1, 2, 1, 1))
        out = tensor.prelu(x, np.array([0.1, 0.5]))
        np.testing.assert_allclose([-0.1, -0.5], out.data.ravel())
        self.assertRaises(tensor.DimensionError, tensor.prelu, x,
                          np.array([0.1]))

    def test_relu(self):
        out = tensor.relu(grid([[-1, 0], [2, -3]]))
        np.testing.assert_array_equal(grid([[0, 0], [2, 0]]), out.data)


class CombinationTest(unittest.TestCase):

    def test_concat_channels(self):
        out = tensor.concat_channels(np.zeros((1, 64, 8, 8)),
                                     np.ones((1, 64, 8, 8)))
        self.assertEqual((1, 128, 8, 8), out.shape)
        self.assertEqual(0.0, out.data[0, 63].max())
        self.assertEqual(1.0, out.data[0, 64].min())

    def test_concat_gradient_split_by_channel(self):
        a = leaf(np.zeros((1, 1, 2, 2)))
        b = leaf(np.zeros((1, 2, 2, 2)))
        grad = np.arange(12, dtype=np.float64).reshape(1, 3, 2, 2)
        tensor.concat_channels(a, b).backward(grad)
        np.testing.assert_array_equal(grad[:, :1], a.grad)
        np.testing.assert_array_equal(grad[:, 1:], b.grad)

    def test_concat_spatial_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.concat_channels,
                          np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 4, 2)))

    def test_add_shape_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.add,
                          np.zeros((1, 1, 2, 2)), np.zeros((1, 2, 2, 2)))

    def test_fully_connected_zero_weight_gives_bias(self):
        x = rng.RngState(4).normal((3, 64, 1, 1), 1.0, np.float64)
        bias = np.array([0.5, -1.0, 2.0])
        out = tensor.fully_connected(x, np.zeros((64, 3)), bias)
        self.assertEqual((3, 3, 1, 1), out.shape)
        for row in out.data.reshape(3, 3):
            np.testing.assert_array_equal(bias, row)

    def test_fully_connected_feature_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.fully_connected,
                          np.zeros((1, 4, 1, 1)), np.zeros((5, 2)),
                          np.zeros(2))

    def test_gradient_accumulates_over_reuse(self):
        x = leaf(grid([[1.0, -2.0]]))
        out = tensor.add(x, x)
        out.backward(np.ones(out.shape))
        np.testing.assert_array_equal(grid([[2.0, 2.0]]), x.grad)

    def test_backward_needs_gradient_for_arrays(self):
        x = leaf(grid([[1.0, 2.0]]))
        self.assertRaises(tensor.DimensionError, tensor.relu(x).backward)


class LossTest(unittest.TestCase):

    def test_mse_of_equal(self):
        x = np.arange(6, dtype=np.float64)
        self.assertEqual(0.0, tensor.loss_mse(x, x).item())

    def test_mse(self):
        self.assertEqual(2.0, tensor.loss_mse(np.array([1.0, 2.0]),
                                              np.array([3.0, 2.0])).item())

    def test_mse_gradient(self):
        pred = leaf([1.0, 2.0])
        tensor.loss_mse(pred, np.array([3.0, 2.0])).backward()
        np.testing.assert_array_equal([-2.0, 0.0], pred.grad)

    def test_mse_shape_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.loss_mse,
                          np.zeros(2), np.zeros(3))

    def test_mae(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([2.0, 2.0, 2.0, 4.0])
        self.assertEqual(0.5, tensor.loss_mae(a, b).item())
        self.assertEqual(tensor.loss_mae(a, b).item(),
                         tensor.loss_mae(b, a).item())
        self.assertEqual(0.0, tensor.loss_mae(a, a).item())

    def test_mae_subgradient_at_zero(self):
        pred = leaf([1.0, 5.0])
        tensor.loss_mae(pred, np.array([1.0, 3.0])).backward()
        np.testing.assert_array_equal([0.0, 0.5], pred.grad)

    def test_mae_length_mismatch(self):
        self.assertRaises(tensor.DimensionError, tensor.loss_mae,
                          np.zeros(4), np.zeros(3))

    def test_l2_penalty(self):
        a = leaf([1.0, -2.0])
        b = leaf([[3.0]])
        penalty = tensor.l2_penalty([a, b], 0.5)
        self.assertEqual(7.0, penalty.item())
        penalty.backward()
        np.testing.assert_array_equal([1.0, -2.0], a.grad)
        np.testing.assert_array_equal([[3.0]], b.grad)


if __name__ == '__main__':
    unittest.main()
