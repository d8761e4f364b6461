#!/usr/bin/env python

"""Tests for the estimator networks."""

import unittest

import numpy as np

from rdest import networks
from rdest import params
from rdest import rng
from rdest import tensor


QPS = (22, 27, 32, 37)


def zeroed(net, overrides=None):
    overrides = overrides or {}
    net.load_state([(name, overrides.get(name, np.zeros_like(value)))
                    for name, value in net.state_dict()])
    return net


def random_frame(seed, shape):
    return rng.RngState(seed).permutation(256 * 4)[
        :shape[0] * shape[1]].reshape(shape) % 256


class BuildTest(unittest.TestCase):

    def test_conv1_parameter_counts(self):
        g = networks.build_g(0)
        f = networks.build_f(0, QPS)
        self.assertEqual((64, 2, 3, 3), g.table.lookup('g/conv1/kernel').shape)
        self.assertEqual(1216, g.count('g/conv1') - 64)
        self.assertEqual(640, f.count('f/conv1'))

    def test_layer_shapes(self):
        g = networks.build_g(0)
        self.assertEqual((1, 128, 5, 5),
                         g.table.lookup('g/conv10/kernel').shape)
        self.assertEqual((64,), g.table.lookup('g/conv9/slope').shape)
        self.assertFalse('g/conv10/slope' in g.table)
        f = networks.build_f(0, QPS)
        self.assertEqual((64, 128, 3, 3),
                         f.table.lookup('f/conv10/kernel').shape)
        self.assertEqual((64, 128), f.table.lookup('f/fc1/weight').shape)
        self.assertEqual((128, 4), f.table.lookup('f/fc2/weight').shape)

    def test_initial_values(self):
        g = networks.build_g(0)
        np.testing.assert_array_equal(np.full(64, 0.25, dtype=np.float32),
                                      g.table.lookup('g/conv3/slope').data)
        np.testing.assert_array_equal(np.zeros(64, dtype=np.float32),
                                      g.table.lookup('g/conv3/bias').data)
        kernel = g.table.lookup('g/conv3/kernel').data
        self.assertEqual(np.float32, kernel.dtype)
        self.assertLess(abs(float(kernel.std()) - np.sqrt(2.0 / 576)), 0.005)

    def test_same_seed_is_bit_identical(self):
        for build in (lambda s: networks.build_g(s),
                      lambda s: networks.build_f(s, QPS)):
            a = build(5).state_dict()
            b = build(5).state_dict()
            c = build(6).state_dict()
            for (name_a, va), (name_b, vb) in zip(a, b):
                self.assertEqual(name_a, name_b)
                self.assertEqual(va.tobytes(), vb.tobytes())
            self.assertNotEqual(a[0][1].tobytes(), c[0][1].tobytes())

    def test_f_needs_a_qp(self):
        self.assertRaises(ValueError, networks.build_f, 0, ())

    def test_build_by_kind(self):
        self.assertEqual(networks.KIND_G, networks.build('g', 0, QPS).kind)
        f = networks.build('f-dist', 0, QPS)
        self.assertEqual(networks.KIND_F_DIST, f.kind)
        self.assertEqual(QPS, f.qps)


class NormalizeTest(unittest.TestCase):

    def test_luma(self):
        i_hat, _ = networks.normalize_inputs(np.array([[128, 0], [255, 64]]),
                                             8, 22)
        np.testing.assert_allclose([[1.0, 0.0], [255 / 128.0, 0.5]], i_hat)

    def test_qp_map(self):
        _, q_hat = networks.normalize_inputs(np.zeros((4, 4), np.uint8), 8,
                                             51)
        np.testing.assert_array_equal(np.ones((4, 4)), q_hat)
        _, q_hat = networks.normalize_inputs(np.zeros((4, 4), np.uint8), 8,
                                             22)
        np.testing.assert_allclose(np.full((4, 4), 0.431373), q_hat,
                                   atol=1e-6)

    def test_random_samples(self):
        frame = random_frame(1, (8, 8))
        i_hat, _ = networks.normalize_inputs(frame, 8, 30)
        np.testing.assert_allclose(frame / 128.0, i_hat, rtol=1e-7)
        frame10 = frame * 4
        i_hat, _ = networks.normalize_inputs(frame10, 10, 30)
        np.testing.assert_allclose(frame10 / 512.0, i_hat, rtol=1e-7)

    def test_out_of_range(self):
        frame = np.zeros((4, 4), np.uint8)
        self.assertRaises(ValueError, networks.normalize_inputs, frame, 8,
                          52)
        self.assertRaises(ValueError, networks.normalize_inputs, frame, 8,
                          -1)
        self.assertRaises(ValueError, networks.normalize_inputs,
                          np.full((4, 4), 256), 8, 22)


class ForwardTest(unittest.TestCase):

    def test_zero_weight_g_is_identity(self):
        net = zeroed(networks.build_g(0))
        frame = random_frame(2, (8, 12))
        i_hat, q_hat = networks.normalize_inputs(frame, 8, 37)
        np.testing.assert_array_equal(i_hat,
                                      networks.forward_g(net, i_hat, q_hat))

    def test_g_shape(self):
        net = networks.build_g(1)
        for shape in ((16, 16), (12, 20)):
            i_hat, q_hat = networks.normalize_inputs(
                random_frame(3, shape), 8, 27)
            m = networks.forward_g(net, i_hat, q_hat)
            self.assertEqual(shape, m.shape)
            self.assertTrue(np.all((m >= 0) & (m <= 2)))

    def test_g_batch_shape(self):
        net = networks.build_g(1)
        i_hat = np.zeros((3, 1, 8, 8), dtype=np.float32)
        self.assertEqual((3, 1, 8, 8),
                         networks.forward_g(net, i_hat, i_hat).shape)

    def test_g_training_mode_is_unclamped_tensor(self):
        net = networks.build_g(0)
        overrides = {'g/conv10/bias': np.array([5.0], dtype=np.float32)}
        zeroed(net, overrides)
        i_hat, q_hat = networks.normalize_inputs(np.zeros((4, 4)), 8, 22)
        out = networks.forward_g(net, i_hat, q_hat, training=True)
        self.assertTrue(isinstance(out, tensor.Tensor))
        np.testing.assert_allclose(np.full((1, 1, 4, 4), 5.0), out.data)
        np.testing.assert_allclose(np.full((4, 4), 2.0),
                                   networks.forward_g(net, i_hat, q_hat))

    def test_g_dimension_error(self):
        net = networks.build_g(0)
        i_hat, q_hat = networks.normalize_inputs(np.zeros((6, 6)), 8, 22)
        self.assertRaises(tensor.DimensionError, networks.forward_g, net,
                          i_hat, q_hat)
        self.assertRaises(tensor.DimensionError, networks.forward_g, net,
                          np.zeros((8, 8)), np.zeros((4, 8)))

    def test_zero_weight_f_gives_final_bias(self):
        bias = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32)
        net = zeroed(networks.build_f(0, QPS), {'f/fc2/bias': bias})
        i_hat, _ = networks.normalize_inputs(random_frame(4, (8, 8)), 8, 22)
        np.testing.assert_array_equal(bias, networks.forward_f(net, i_hat))

    def test_f_output_length(self):
        net = networks.build_f(2, QPS)
        i_hat, _ = networks.normalize_inputs(random_frame(5, (8, 8)), 8, 22)
        p = networks.forward_f(net, i_hat)
        self.assertEqual((4,), p.shape)
        self.assertTrue(np.all(np.isfinite(p)))

    def test_f_batch_purity(self):
        net = networks.build_f(3, QPS)
        frames = [networks.normalize_inputs(random_frame(s, (8, 8)), 8,
                                            22)[0] for s in (6, 7, 8)]
        batch = networks.forward_f(net, np.stack(frames)[:, np.newaxis])
        self.assertEqual((3, 4), batch.shape)
        for row, frame in zip(batch, frames):
            np.testing.assert_allclose(networks.forward_f(net, frame), row,
                                       rtol=1e-5, atol=1e-6)

    def test_f_training_mode_shape(self):
        net = networks.build_f(3, (22, 37))
        out = networks.forward_f(net, np.zeros((2, 1, 8, 8), np.float32),
                                 training=True)
        self.assertEqual((2, 2, 1, 1), out.shape)


class StateTest(unittest.TestCase):

    def test_load_state_round_trip(self):
        a = networks.build_g(1)
        b = networks.build_g(2)
        b.load_state(a.state_dict())
        for (_, va), (_, vb) in zip(a.state_dict(), b.state_dict()):
            self.assertEqual(va.tobytes(), vb.tobytes())

    def test_state_dict_is_a_copy(self):
        net = networks.build_g(1)
        state = net.state_dict()
        state[0][1][...] = 7.0
        self.assertNotEqual(7.0, float(net.state_dict()[0][1].flat[0]))

    def test_load_state_errors(self):
        net = networks.build_f(0, QPS)
        state = net.state_dict()
        self.assertRaises(params.Error, net.load_state, state[1:])
        self.assertRaises(params.Error, net.load_state,
                          state + [('f/extra', np.zeros(1))])
        self.assertRaises(params.Error, net.load_state, state + state[:1])
        name, value = state[0]
        bad = [(name, np.zeros(value.shape[:-1]))] + state[1:]
        self.assertRaises(tensor.DimensionError, net.load_state, bad)


if __name__ == '__main__':
    unittest.main()
