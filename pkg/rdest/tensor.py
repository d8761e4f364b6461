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

"""Reverse-mode differentiation over N x C x H x W arrays.

Only the operations the two estimator networks need are provided. Every
operation is a plain function that returns a new Tensor and, when any input
requires a gradient, records a closure mapping the upstream gradient to the
gradients of its inputs. Tensor.backward() walks the recorded graph in
reverse topological order.

Convolutions are stride 1 with zero same-padding. Pooling and upsampling work
on 2 x 2 windows.
"""

import numpy as np


class DimensionError(ValueError):

    """Raised when operand shapes do not fit an operation."""


class Tensor(object):

    """Array with an optional gradient slot.

    Activations are N x C x H x W. Parameters keep their natural rank
    (kernel K x C x kh x kw, bias K, slope C, FC weight F x K) and losses
    are 0-d.
    """

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into the grad of every leaf tensor.

        Args:
          grad: upstream gradient, defaults to one for single-element
            tensors.

        Raises:
          DimensionError if grad is omitted for a multi-element tensor or
          does not match the tensor shape.
        """
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(
                    'backward() without a gradient needs a single-element '
                    'tensor, got shape {}'.format(self.shape))
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise DimensionError('gradient shape {} does not match {}'.format(
                grad.shape, self.shape))

        pending = {id(self): grad}
        for node in reversed(_topological_order(self)):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if not node._parents:
                if node.grad is None:
                    node.grad = node_grad
                else:
                    node.grad = node.grad + node_grad
                continue
            for parent, parent_grad in zip(node._parents,
                                           node._backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

    def __str__(self):
        return 'Tensor(shape={}, dtype={}, requires_grad={})'.format(
            self.shape, self.dtype, self.requires_grad)

    __repr__ = __str__


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _topological_order(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def _result(data, parents, backward):
    requires_grad = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad)
    if requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_activation(x, op_name):
    if x.data.ndim != 4:
        raise DimensionError('{} expects an N x C x H x W tensor, got shape '
                             '{}'.format(op_name, x.shape))


def conv2d(x, kernel, bias):
    """Stride-1 convolution with zero same-padding.

    Args:
      x: Tensor N x C x H x W
      kernel: Tensor K x C x kh x kw, kh and kw odd
      bias: Tensor K

    Returns:
      Tensor N x K x H x W
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    _check_activation(x, 'conv2d')
    if kernel.data.ndim != 4:
        raise DimensionError('conv2d kernel must be K x C x kh x kw, got '
                             'shape {}'.format(kernel.shape))
    n, c, h, w = x.shape
    k, kc, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError('conv2d input has {} channels but kernel '
                             'expects {}'.format(c, kc))
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError('conv2d kernel size {}x{} is not odd'.format(
            kh, kw))
    if bias.shape != (k,):
        raise DimensionError('conv2d bias shape {} does not match {} '
                             'kernels'.format(bias.shape, k))

    ph, pw = kh // 2, kw // 2
    padded = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    dtype = np.result_type(x.data, kernel.data)
    # Accumulated as N x H x W x K, one kernel tap at a time.
    acc = np.zeros((n, h, w, k), dtype=dtype)
    for i in range(kh):
        for j in range(kw):
            acc += np.tensordot(padded[:, :, i:i + h, j:j + w],
                                kernel.data[:, :, i, j], axes=([1], [1]))
    out = acc.transpose(0, 3, 1, 2) + bias.data.reshape(1, k, 1, 1)

    def backward(grad):
        grad_padded = np.zeros_like(padded, dtype=grad.dtype)
        grad_kernel = np.empty(kernel.shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                tap = kernel.data[:, :, i, j]
                grad_padded[:, :, i:i + h, j:j + w] += np.tensordot(
                    grad, tap, axes=([1], [0])).transpose(0, 3, 1, 2)
                grad_kernel[:, :, i, j] = np.tensordot(
                    grad, padded[:, :, i:i + h, j:j + w],
                    axes=([0, 2, 3], [0, 2, 3]))
        grad_x = grad_padded[:, :, ph:ph + h, pw:pw + w]
        grad_bias = grad.sum(axis=(0, 2, 3))
        return grad_x, grad_kernel, grad_bias

    return _result(np.ascontiguousarray(out), (x, kernel, bias), backward)


def maxpool2(x):
    """2 x 2 max pooling with stride 2.

    Ties go to the first maximum of the window in row-major order, which is
    also the only sample receiving gradient.
    """
    x = as_tensor(x)
    _check_activation(x, 'maxpool2')
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError('maxpool2 needs even height and width, got '
                             '{}x{}'.format(h, w))
    windows = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(
        0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    index = windows.argmax(axis=-1)[..., np.newaxis]
    out = np.take_along_axis(windows, index, axis=-1)[..., 0]

    def backward(grad):
        routed = np.zeros(windows.shape, dtype=grad.dtype)
        np.put_along_axis(routed, index, grad[..., np.newaxis], axis=-1)
        return (routed.reshape(n, c, h // 2, w // 2, 2, 2).transpose(
            0, 1, 2, 4, 3, 5).reshape(n, c, h, w),)

    return _result(out, (x,), backward)


def upsample2(x):
    """Nearest-neighbour upsampling by 2 in both spatial directions."""
    x = as_tensor(x)
    _check_activation(x, 'upsample2')
    n, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(grad):
        return (grad.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return _result(out, (x,), backward)


def prelu(x, slope):
    """Parametric rectifier with one learnable slope per channel."""
    x, slope = as_tensor(x), as_tensor(slope)
    _check_activation(x, 'prelu')
    channels = x.shape[1]
    if slope.shape != (channels,):
        raise DimensionError('prelu slope shape {} does not match {} '
                             'channels'.format(slope.shape, channels))
    a = slope.data.reshape(1, channels, 1, 1)
    positive = x.data >= 0
    out = np.where(positive, x.data, a * x.data)

    def backward(grad):
        grad_x = np.where(positive, grad, a * grad)
        grad_slope = np.where(positive, 0, grad * x.data).sum(axis=(0, 2, 3))
        return grad_x, grad_slope.astype(grad.dtype)

    return _result(out, (x, slope), backward)


def relu(x):
    x = as_tensor(x)
    _check_activation(x, 'relu')
    positive = x.data > 0
    out = np.where(positive, x.data, 0).astype(x.dtype)

    def backward(grad):
        return (np.where(positive, grad, 0).astype(grad.dtype),)

    return _result(out, (x,), backward)


def concat_channels(*tensors):
    """Concatenate along the channel axis; N, H and W must agree."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError('concat_channels needs at least one tensor')
    for t in tensors:
        _check_activation(t, 'concat_channels')
    n, _, h, w = tensors[0].shape
    for t in tensors[1:]:
        if (t.shape[0], t.shape[2], t.shape[3]) != (n, h, w):
            raise DimensionError('concat_channels shapes {} and {} differ '
                                 'outside the channel axis'.format(
                                     tensors[0].shape, t.shape))
    out = np.concatenate([t.data for t in tensors], axis=1)
    boundaries = np.cumsum([t.shape[1] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, boundaries, axis=1))

    return _result(out, tensors, backward)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError('add shapes {} and {} differ'.format(a.shape,
                                                                   b.shape))

    def backward(grad):
        return grad, grad

    return _result(a.data + b.data, (a, b), backward)


def global_avg_pool(x):
    """Mean over H and W per channel, giving N x C x 1 x 1."""
    x = as_tensor(x)
    _check_activation(x, 'global_avg_pool')
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(grad):
        return (np.broadcast_to(grad / (h * w), x.shape).astype(grad.dtype),)

    return _result(out, (x,), backward)


def fully_connected(x, weight, bias):
    """Dense layer on the flattened features of each sample.

    Args:
      x: Tensor N x ... with F features per sample
      weight: Tensor F x K
      bias: Tensor K

    Returns:
      Tensor N x K x 1 x 1
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    n = x.shape[0]
    flat = x.data.reshape(n, -1)
    if weight.data.ndim != 2 or flat.shape[1] != weight.shape[0]:
        raise DimensionError('fully_connected got {} features for weight '
                             'shape {}'.format(flat.shape[1], weight.shape))
    k = weight.shape[1]
    if bias.shape != (k,):
        raise DimensionError('fully_connected bias shape {} does not match '
                             '{} outputs'.format(bias.shape, k))
    out = (flat @ weight.data + bias.data).reshape(n, k, 1, 1)

    def backward(grad):
        grad = grad.reshape(n, k)
        return ((grad @ weight.data.T).reshape(x.shape),
                flat.T @ grad,
                grad.sum(axis=0))

    return _result(out, (x, weight, bias), backward)


def loss_mse(pred, target):
    """Mean squared error over every entry, as a 0-d tensor."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError('loss_mse shapes {} and {} differ'.format(
            pred.shape, target.shape))
    diff = pred.data - target.data
    count = diff.size
    out = np.asarray(np.mean(diff * diff), dtype=diff.dtype)

    def backward(grad):
        grad_pred = grad * 2 * diff / count
        return grad_pred.astype(diff.dtype), (-grad_pred).astype(diff.dtype)

    return _result(out, (pred, target), backward)


def loss_mae(pred, target):
    """Mean absolute error; the subgradient at zero difference is 0."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError('loss_mae shapes {} and {} differ'.format(
            pred.shape, target.shape))
    diff = pred.data - target.data
    count = diff.size
    out = np.asarray(np.mean(np.abs(diff)), dtype=diff.dtype)

    def backward(grad):
        grad_pred = grad * np.sign(diff) / count
        return grad_pred.astype(diff.dtype), (-grad_pred).astype(diff.dtype)

    return _result(out, (pred, target), backward)


def l2_penalty(tensors, weight_decay):
    """weight_decay * sum of squares of all tensors, as a 0-d tensor."""
    tensors = [as_tensor(t) for t in tensors]
    dtype = np.result_type(*[t.data for t in tensors])
    total = sum(float(np.sum(np.square(t.data, dtype=np.float64)))
                for t in tensors)
    out = np.asarray(weight_decay * total, dtype=dtype)

    def backward(grad):
        return tuple((grad * 2 * weight_decay * t.data).astype(t.dtype)
                     for t in tensors)

    return _result(out, tensors, backward)
