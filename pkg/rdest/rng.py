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

"""Seeded random streams.

A stream is identified by a 64-bit seed plus optional integer keys (for
example an epoch number), so independent consumers never share draws.
"""

import numpy as np


class RngState(object):

    """Deterministic random stream backed by PCG64.

    counter is the number of draws taken so far; two streams built from the
    same seed and keys produce the same sequence on every platform.
    """

    def __init__(self, seed, *keys):
        for value in (seed,) + keys:
            if not 0 <= int(value) < 2 ** 64:
                raise ValueError('seed {} is not a 64-bit unsigned '
                                 'integer'.format(value))
        self.seed = int(seed)
        self.keys = tuple(int(k) for k in keys)
        self.counter = 0
        sequence = np.random.SeedSequence([self.seed] + list(self.keys))
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def normal(self, shape, std, dtype=np.float32):
        """Zero-mean Gaussian draw, computed in float64 then cast."""
        self.counter += 1
        return (self._generator.standard_normal(shape) * std).astype(dtype)

    def uniform(self, shape, low=0.0, high=1.0, dtype=np.float64):
        self.counter += 1
        return self._generator.uniform(low, high, shape).astype(dtype)

    def permutation(self, count):
        self.counter += 1
        return self._generator.permutation(count)

    def __str__(self):
        return 'RngState(seed={}, keys={}, counter={})'.format(
            self.seed, self.keys, self.counter)

    __repr__ = __str__
