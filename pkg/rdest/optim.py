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

"""Adam optimiser with coupled l2 regularisation."""

import numpy as np

from . import tensor


class TrainingError(RuntimeError):

    """Raised when a gradient or loss stops being finite."""


class AdamState(object):

    """First and second moments per parameter name plus the step count."""

    def __init__(self, parameters=()):
        self.t = 0
        self.moments = {}
        for p in parameters:
            self.moments[p.name] = (np.zeros_like(p.data),
                                    np.zeros_like(p.data))


def adam_step(parameters, grads, state, lr=1e-4, beta1=0.9, beta2=0.999,
              eps=1e-8, weight_decay=0.0):
    """Applies one bias-corrected Adam update in place.

    The l2 term weight_decay * sum(theta ** 2) is part of the objective, so
    2 * weight_decay * theta is added to each gradient before the moments
    are updated.

    Args:
      parameters: list of params.Parameter
      grads: list of arrays aligned with parameters; None counts as zero
      state: AdamState, updated in place

    Raises:
      TrainingError if any gradient is not finite. Nothing is updated then.
      tensor.DimensionError if the state does not match the parameters.
    """
    grads = [np.zeros_like(p.data) if g is None else g
             for p, g in zip(parameters, grads)]
    for p, g in zip(parameters, grads):
        if not np.all(np.isfinite(g)):
            raise TrainingError('non-finite gradient for {}'.format(p.name))
        m, _ = state.moments.get(p.name, (None, None))
        if m is None or m.shape != p.shape or g.shape != p.shape:
            raise tensor.DimensionError(
                'optimizer state does not match parameter {}'.format(p.name))

    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for p, g in zip(parameters, grads):
        m, v = state.moments[p.name]
        g = (g + 2 * weight_decay * p.data).astype(p.data.dtype)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state.moments[p.name] = (m, v)
        step = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        p.tensor.data = (p.data - step).astype(p.data.dtype)


def l2_value(parameters, weight_decay):
    """weight_decay * sum of squares, accumulated in float64."""
    return weight_decay * sum(
        float(np.sum(np.square(p.data, dtype=np.float64)))
        for p in parameters)


def zero_grads(parameters):
    for p in parameters:
        p.tensor.zero_grad()
