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

"""Model weights file.

Layout, all integers little-endian:

  magic 'RDNW' | version u16 | kind u8 | K u16 | K x QP u8 |
  seed u64 | best epoch u32 | count u32 |
  count x (name length u16 | name utf-8 | rank u8 | rank x dim u32 |
           float32 values)
"""

import struct

import numpy as np

from . import networks
from . import params
from . import tensor
from . import utils


MAGIC = b'RDNW'
FORMAT_VERSION = 1

KIND_CODES = {
    networks.KIND_G: 0,
    networks.KIND_F_BITS: 1,
    networks.KIND_F_DIST: 2,
}
KIND_NAMES = dict((code, name) for name, code in KIND_CODES.items())


class WeightsError(Exception):

    """Base class of weights file errors."""


class VersionError(WeightsError):

    """Raised for an unsupported format version."""


class KindError(WeightsError):

    """Raised when the file holds a different network kind."""


class ShapeError(WeightsError):

    """Raised when stored parameters do not fit the network layout."""


class TruncatedError(WeightsError):

    """Raised when the file ends before its declared content."""


class FormatError(WeightsError):

    """Raised for a bad magic number or trailing garbage."""


class ModelWeights(object):

    """Trained parameters of one network plus their provenance."""

    def __init__(self, kind, qps, parameters, seed=0, best_epoch=0,
                 version=FORMAT_VERSION):
        self.version = version
        self.kind = kind
        self.qps = tuple(qps)
        self.parameters = [(name, np.asarray(value, dtype=np.float32))
                           for name, value in parameters]
        self.seed = seed
        self.best_epoch = best_epoch

    @classmethod
    def from_network(cls, net, seed=0, best_epoch=0):
        return cls(net.kind, net.qps, net.state_dict(), seed, best_epoch)

    def __eq__(self, other):
        if not isinstance(other, ModelWeights):
            return NotImplemented
        if (self.version, self.kind, self.qps, self.seed,
                self.best_epoch) != (other.version, other.kind, other.qps,
                                     other.seed, other.best_epoch):
            return False
        if len(self.parameters) != len(other.parameters):
            return False
        for (name, value), (other_name, other_value) in zip(
                self.parameters, other.parameters):
            if (name != other_name or value.shape != other_value.shape or
                    value.tobytes() != other_value.tobytes()):
                return False
        return True

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result


def to_network(weights):
    """Builds the network described by weights and loads its values.

    Raises:
      ShapeError if names or shapes do not match the network layout.
    """
    net = networks.build(weights.kind, 0, weights.qps)
    try:
        net.load_state(weights.parameters)
    except (params.Error, tensor.DimensionError) as error:
        raise ShapeError(str(error))
    return net


def encode(weights):
    chunks = [struct.pack('<4sHBH', MAGIC, weights.version,
                          KIND_CODES[weights.kind], len(weights.qps)),
              struct.pack('<{}B'.format(len(weights.qps)), *weights.qps),
              struct.pack('<QII', weights.seed, weights.best_epoch,
                          len(weights.parameters))]
    for name, value in weights.parameters:
        raw_name = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack('<B{}I'.format(value.ndim), value.ndim,
                                  *value.shape))
        chunks.append(value.astype('<f4').tobytes())
    return b''.join(chunks)


class _Reader(object):

    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise TruncatedError('weights file truncated at byte {}'.format(
                len(self.data)))
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(data, kind=None):
    """Parses weights bytes.

    Args:
      data: bytes of a weights file
      kind: expected network kind, or None to accept any

    Raises:
      FormatError, VersionError, KindError or TruncatedError.
    """
    reader = _Reader(data)
    magic, version, kind_code, k = reader.unpack('<4sHBH')
    if magic != MAGIC:
        raise FormatError('not a weights file (magic {!r})'.format(magic))
    if version != FORMAT_VERSION:
        raise VersionError('weights format version {} is not supported '
                           '(expected {})'.format(version, FORMAT_VERSION))
    if kind_code not in KIND_NAMES:
        raise FormatError('unknown network kind code {}'.format(kind_code))
    stored_kind = KIND_NAMES[kind_code]
    if kind is not None and stored_kind != kind:
        raise KindError('weights are for {}, not {}'.format(stored_kind,
                                                            kind))
    qps = reader.unpack('<{}B'.format(k))
    seed, best_epoch, count = reader.unpack('<QII')
    parameters = []
    for _ in range(count):
        (name_length,) = reader.unpack('<H')
        try:
            name = reader.take(name_length).decode('utf-8')
        except UnicodeDecodeError:
            raise FormatError('parameter name is not valid UTF-8')
        (rank,) = reader.unpack('<B')
        shape = reader.unpack('<{}I'.format(rank))
        size = int(np.prod(shape, dtype=np.int64))
        value = np.frombuffer(reader.take(4 * size), dtype='<f4')
        parameters.append((name, value.astype(np.float32).reshape(shape)))
    if reader.offset != len(data):
        raise FormatError('{} trailing bytes after the last parameter'.format(
            len(data) - reader.offset))
    return ModelWeights(stored_kind, qps, parameters, seed, best_epoch,
                        version)


def save_weights(weights, path):
    with utils.atomic_write(path) as output:
        output.write(encode(weights))


def load_weights(path, kind=None):
    return decode(utils.read_binary(path), kind)
