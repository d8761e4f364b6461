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

"""Finite-difference verification of reverse-mode gradients."""

import logging

import numpy as np

from . import rng
from . import tensor


logger = logging.getLogger(__name__)

DEFAULT_STEPS = {np.dtype(np.float64): 1e-3, np.dtype(np.float32): 1e-2}


def grad_check(operation, inputs, tolerance=None, dtype=np.float64,
               step=None, seed=0):
    """Compares reverse-mode gradients with central differences.

    The scalar objective is sum(out * R) for a fixed random projection R of
    the operation's output (R = 1 for 0-d outputs), accumulated in float64.
    For each input the error is max|analytic - numeric| divided by the
    largest gradient magnitude of that input.

    Args:
      operation: callable taking len(inputs) Tensors and returning a Tensor
      inputs: sequence of array_like
      tolerance: if given, errors above it are logged
      dtype: np.float64 for high-precision mode, np.float32 for standard
      step: finite-difference step, defaults per dtype
      seed: seed of the projection

    Returns:
      the worst relative error over all inputs
    """
    dtype = np.dtype(dtype)
    if step is None:
        step = DEFAULT_STEPS[dtype]
    values = [np.array(x, dtype=dtype) for x in inputs]

    leaves = [tensor.Tensor(v.copy(), requires_grad=True) for v in values]
    out = operation(*leaves)
    if out.data.ndim == 0:
        projection = np.ones((), dtype=out.dtype)
    else:
        projection = rng.RngState(seed).uniform(out.shape, -1.0, 1.0,
                                                dtype=out.dtype)
    out.backward(projection)

    def objective():
        result = operation(*[tensor.Tensor(v) for v in values])
        return float(np.sum(result.data.astype(np.float64) *
                            projection.astype(np.float64)))

    worst = 0.0
    for value, leaf in zip(values, leaves):
        analytic = (np.zeros(value.shape) if leaf.grad is None
                    else leaf.grad.astype(np.float64))
        numeric = np.zeros(value.shape)
        for index in np.ndindex(value.shape):
            saved = value[index]
            value[index] = saved + step
            plus = objective()
            value[index] = saved - step
            minus = objective()
            value[index] = saved
            numeric[index] = (plus - minus) / (2 * step)
        scale = max(np.max(np.abs(analytic), initial=0.0),
                    np.max(np.abs(numeric), initial=0.0))
        if scale > 0:
            worst = max(worst,
                        float(np.max(np.abs(analytic - numeric))) / scale)

    if tolerance is not None and worst > tolerance:
        logger.warning('gradient check error %g exceeds %g', worst, tolerance)
    return worst
