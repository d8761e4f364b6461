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

"""Estimator networks.

G maps a normalised luma patch and a normalised QP map to a distortion map
through a U-shaped stack of 3x3 convolutions with PReLU, two skip
concatenations, a bare 5x5 convolution and a residual sum with the luma
input. F shares the U-shaped trunk (ReLU instead of PReLU), adds two more
convolutions, averages each channel globally and ends in FC(128)+ReLU and
FC(K), one output per QP.
"""

import numpy as np

from . import params
from . import rng
from . import tensor


QP_MAX = 51
WIDTH = 64
PRELU_INIT = 0.25
FC_HIDDEN = 128

KIND_G = 'g'
KIND_F_BITS = 'f-bits'
KIND_F_DIST = 'f-dist'
KINDS = (KIND_G, KIND_F_BITS, KIND_F_DIST)

# (layer, input channels, output channels, kernel size)
G_LAYERS = (
    ('conv1', 2, WIDTH, 3),
    ('conv2', WIDTH, WIDTH, 3),
    ('conv3', WIDTH, WIDTH, 3),
    ('conv4', WIDTH, WIDTH, 3),
    ('conv5', WIDTH, WIDTH, 3),
    ('conv6', WIDTH, WIDTH, 3),
    ('conv7', WIDTH, WIDTH, 3),
    ('conv8', 2 * WIDTH, WIDTH, 3),
    ('conv9', WIDTH, WIDTH, 3),
    ('conv10', 2 * WIDTH, 1, 5),
)

F_LAYERS = (
    ('conv1', 1, WIDTH, 3),
    ('conv2', WIDTH, WIDTH, 3),
    ('conv3', WIDTH, WIDTH, 3),
    ('conv4', WIDTH, WIDTH, 3),
    ('conv5', WIDTH, WIDTH, 3),
    ('conv6', WIDTH, WIDTH, 3),
    ('conv7', WIDTH, WIDTH, 3),
    ('conv8', 2 * WIDTH, WIDTH, 3),
    ('conv9', WIDTH, WIDTH, 3),
    ('conv10', 2 * WIDTH, WIDTH, 3),
    ('conv11', WIDTH, WIDTH, 3),
)


class Network(object):

    """Parameters plus the forward pass of one estimator."""

    prefix = None

    def __init__(self, kind, qps):
        self.kind = kind
        self.qps = tuple(qps)
        self.table = params.ParameterTable()

    def parameters(self, trainable_only=False):
        return self.table.parameters(trainable_only)

    def count(self, prefix=''):
        return self.table.count(prefix)

    def _add(self, name, data, trainable=True):
        return self.table.add_parameter(
            params.Parameter('{}/{}'.format(self.prefix, name), data,
                             trainable))

    def _add_conv(self, state, name, in_channels, out_channels, size):
        fan_in = in_channels * size * size
        self._add(name + '/kernel',
                  state.normal((out_channels, in_channels, size, size),
                               np.sqrt(2.0 / fan_in)))
        self._add(name + '/bias', np.zeros(out_channels, dtype=np.float32))

    def _add_fc(self, state, name, in_features, out_features):
        self._add(name + '/weight',
                  state.normal((in_features, out_features),
                               np.sqrt(2.0 / in_features)))
        self._add(name + '/bias', np.zeros(out_features, dtype=np.float32))

    def _get(self, name, training):
        p = self.table.lookup('{}/{}'.format(self.prefix, name))
        if training:
            return p.tensor
        return tensor.Tensor(p.data)

    def _conv(self, x, name, training):
        return tensor.conv2d(x, self._get(name + '/kernel', training),
                             self._get(name + '/bias', training))

    def _trunk(self, x, activation, training):
        """Shared U-shape; returns the second skip concatenation."""
        def block(x, name):
            return activation(self._conv(x, name, training), name)

        conv2 = block(block(x, 'conv1'), 'conv2')
        conv4 = block(block(tensor.maxpool2(conv2), 'conv3'), 'conv4')
        conv5 = block(tensor.maxpool2(conv4), 'conv5')
        conv7 = block(block(tensor.upsample2(conv5), 'conv6'), 'conv7')
        merged = tensor.upsample2(tensor.concat_channels(conv7, conv4))
        conv9 = block(block(merged, 'conv8'), 'conv9')
        return tensor.concat_channels(conv9, conv2)

    def state_dict(self):
        """Copies of all parameter arrays keyed by name, in table order."""
        return [(p.name, p.data.copy()) for p in self.table]

    def load_state(self, state):
        """Replaces all parameter values from (name, array) pairs.

        Raises:
          params.Error for a missing or unknown name, tensor.DimensionError
          for a shape mismatch.
        """
        pairs = list(state)
        state = dict(pairs)
        if len(state) != len(pairs):
            raise params.Error('duplicate parameter names')
        if set(state) != set(self.table.names()):
            unknown = sorted(set(state) ^ set(self.table.names()))
            raise params.Error('parameter names differ: {}'.format(
                ', '.join(unknown)))
        for p in self.table:
            value = np.asarray(state[p.name])
            if value.shape != p.shape:
                raise tensor.DimensionError(
                    '{} has shape {}, expected {}'.format(p.name, value.shape,
                                                          p.shape))
            p.tensor.data = value.astype(np.float32, copy=True)


class NetworkG(Network):

    prefix = 'g'

    def __init__(self, qps=()):
        Network.__init__(self, KIND_G, qps)

    def forward(self, i_hat, q_hat, training=False):
        x = tensor.concat_channels(q_hat, i_hat)
        features = self._trunk(
            x, lambda t, name: tensor.prelu(
                t, self._get(name + '/slope', training)),
            training)
        residual = self._conv(features, 'conv10', training)
        return tensor.add(residual, i_hat)


class NetworkF(Network):

    prefix = 'f'

    def forward(self, i_hat, training=False):
        def activation(t, name):
            return tensor.relu(t)

        x = self._trunk(i_hat, activation, training)
        x = tensor.relu(self._conv(x, 'conv10', training))
        x = tensor.relu(self._conv(x, 'conv11', training))
        x = tensor.global_avg_pool(x)
        x = tensor.relu(tensor.fully_connected(
            x, self._get('fc1/weight', training),
            self._get('fc1/bias', training)))
        return tensor.fully_connected(x, self._get('fc2/weight', training),
                                      self._get('fc2/bias', training))


def build_g(seed, qps=()):
    """Builds G with He-initialised kernels, zero biases, slopes of 0.25."""
    state = rng.RngState(seed)
    net = NetworkG(qps)
    for name, in_channels, out_channels, size in G_LAYERS:
        net._add_conv(state, name, in_channels, out_channels, size)
        if name != 'conv10':
            net._add(name + '/slope',
                     np.full(out_channels, PRELU_INIT, dtype=np.float32))
    return net


def build_f(seed, qps, kind=KIND_F_BITS):
    """Builds F with one output per QP in qps."""
    if len(qps) < 1:
        raise ValueError('F needs at least one QP')
    if kind not in (KIND_F_BITS, KIND_F_DIST):
        raise ValueError('unknown F kind {!r}'.format(kind))
    state = rng.RngState(seed)
    net = NetworkF(kind, qps)
    for name, in_channels, out_channels, size in F_LAYERS:
        net._add_conv(state, name, in_channels, out_channels, size)
    net._add_fc(state, 'fc1', WIDTH, FC_HIDDEN)
    net._add_fc(state, 'fc2', FC_HIDDEN, len(qps))
    return net


def build(kind, seed, qps):
    if kind == KIND_G:
        return build_g(seed, qps)
    return build_f(seed, qps, kind)


def normalize_inputs(frame, bitdepth, qp):
    """Returns (I_hat, Q_hat) for an H x W integer luma array.

    I_hat = I / 2^(n-1), so samples lie in [0, 2); Q_hat is the constant
    map QP / 51.

    Raises:
      ValueError if QP or a sample is out of range.
    """
    if not 0 <= qp <= QP_MAX:
        raise ValueError('QP {} out of range [0, {}]'.format(qp, QP_MAX))
    frame = np.asarray(frame)
    if frame.size and (frame.min() < 0 or frame.max() >= 2 ** bitdepth):
        raise ValueError('samples exceed {}-bit range'.format(bitdepth))
    i_hat = (frame / float(2 ** (bitdepth - 1))).astype(np.float32)
    q_hat = np.full(frame.shape, qp / float(QP_MAX), dtype=np.float32)
    return i_hat, q_hat


def _check_spatial(shape):
    height, width = shape[-2:]
    if height % 4 or width % 4:
        raise tensor.DimensionError(
            'height and width must be multiples of 4, got {}x{}'.format(
                height, width))


def _as_batch(x):
    x = np.asarray(x.data if isinstance(x, tensor.Tensor) else x,
                   dtype=np.float32)
    if x.ndim == 2:
        x = x[np.newaxis, np.newaxis]
    return x


def forward_g(net, i_hat, q_hat, training=False):
    """Distortion map M = G(I_hat, Q_hat).

    Inputs are H x W maps or N x 1 x H x W batches. In training mode the
    result is the raw Tensor with its graph; otherwise an array of the input
    layout, clamped to [0, 2].
    """
    _check_spatial(np.shape(i_hat))
    squeeze = np.ndim(i_hat) == 2
    i_batch, q_batch = _as_batch(i_hat), _as_batch(q_hat)
    if i_batch.shape != q_batch.shape:
        raise tensor.DimensionError('I_hat shape {} and Q_hat shape {} '
                                    'differ'.format(i_batch.shape,
                                                    q_batch.shape))
    out = net.forward(tensor.Tensor(i_batch), tensor.Tensor(q_batch),
                      training)
    if training:
        return out
    m = np.clip(out.data, 0.0, 2.0)
    return m[0, 0] if squeeze else m


def forward_f(net, i_hat, training=False):
    """Vector P = F(I_hat), ascending QP order.

    Returns a Tensor N x K x 1 x 1 in training mode, else a K array for an
    H x W input or an N x K array for a batch.
    """
    _check_spatial(np.shape(i_hat))
    squeeze = np.ndim(i_hat) == 2
    out = net.forward(tensor.Tensor(_as_batch(i_hat)), training)
    if training:
        return out
    p = out.data.reshape(out.shape[0], -1)
    return p[0] if squeeze else p
