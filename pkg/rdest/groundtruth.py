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

"""Ground-truth records: generation with the codec oracle and storage.

File layout, all integers little-endian:

  magic 'RDGT' | version u16 | W u16 | H u16 | bitdepth u8 | K u16 |
  K x QP u8 | count u32 |
  count x (patch id u32 | QP u8 | bits u32 | bpp f32 | mse f32 |
           distortion map, W*H samples, u8 (u16 above 8 bits))

mse is the mean squared distortion normalised by 2^(n-1). Records are
ordered by (patch id, QP).
"""

import collections
import concurrent.futures
import logging
import struct

import numpy as np

from . import codec
from . import utils


logger = logging.getLogger(__name__)

MAGIC = b'RDGT'
FORMAT_VERSION = 1

_HEADER = '<4sHHHBH'
_RECORD = '<IBIff'


class GroundTruthError(ValueError):

    """Raised for malformed or inconsistent ground-truth records."""


class GroundTruthRecord(object):

    """Codec outcome for one patch at one QP."""

    def __init__(self, patch_id, qp, bits, bpp, mse, distortion):
        self.patch_id = patch_id
        self.qp = qp
        self.bits = bits
        self.bpp = bpp
        self.mse = mse
        self.distortion = distortion

    @property
    def key(self):
        return (self.patch_id, self.qp)

    def __eq__(self, other):
        if not isinstance(other, GroundTruthRecord):
            return NotImplemented
        return (self.key == other.key and self.bits == other.bits and
                np.float32(self.bpp) == np.float32(other.bpp) and
                np.float32(self.mse) == np.float32(other.mse) and
                np.array_equal(self.distortion, other.distortion))

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    def __str__(self):
        return 'GroundTruthRecord(patch={}, qp={}, bits={})'.format(
            self.patch_id, self.qp, self.bits)

    __repr__ = __str__


class GroundTruth(object):

    """All records of a dataset, indexed by (patch id, QP)."""

    def __init__(self, width, height, bitdepth, qps, records=()):
        self.width = width
        self.height = height
        self.bitdepth = bitdepth
        self.qps = tuple(qps)
        self.records = sorted(records, key=lambda r: r.key)
        self._index = dict((r.key, r) for r in self.records)

    def get(self, patch_id, qp):
        return self._index.get((patch_id, qp))

    def __len__(self):
        return len(self.records)


def normalized_mse(distortion, bitdepth):
    scale = float(2 ** (bitdepth - 1))
    return float(np.mean(np.square(distortion / scale)))


def record_from_result(patch_id, result):
    # Held at file precision (float32).
    mse = normalized_mse(result.distortion, result.bitdepth)
    return GroundTruthRecord(patch_id, result.qp, result.bits,
                             float(np.float32(result.bpp)),
                             float(np.float32(mse)),
                             result.distortion.astype(np.uint16))


def _encode_patch(job):
    patch_id, samples, bitdepth, qps = job
    try:
        frame = codec.Frame(samples, bitdepth)
        return [record_from_result(patch_id, codec.encode_intra(frame, qp))
                for qp in qps]
    except codec.CodecError as error:
        raise GroundTruthError('patch {}: {}'.format(patch_id, error))


def generate_ground_truth(patches, qps, bitdepth=8, jobs=1):
    """Codes every patch at every QP.

    Args:
      patches: sequence of (patch id, H x W sample array), equal sizes
      qps: QP list
      jobs: worker processes; output order is (patch id, QP) regardless

    Returns:
      GroundTruth with len(patches) * len(qps) records
    """
    qps = sorted(qps)
    for qp in qps:
        codec.qstep(qp)
    patches = sorted(patches, key=lambda p: p[0])
    if not patches:
        raise GroundTruthError('no patches to encode')
    height, width = np.shape(patches[0][1])
    work = [(patch_id, samples, bitdepth, qps)
            for patch_id, samples in patches]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(jobs) as executor:
            results = list(executor.map(_encode_patch, work, chunksize=8))
    else:
        results = [_encode_patch(job) for job in work]
    records = [record for batch in results for record in batch]
    logger.info('encoded %d patches at %d QPs', len(patches), len(qps))
    return GroundTruth(width, height, bitdepth, qps, records)


def _sample_dtype(bitdepth):
    return np.dtype('u1') if bitdepth <= 8 else np.dtype('<u2')


def encode(ground_truth):
    gt = ground_truth
    dtype = _sample_dtype(gt.bitdepth)
    chunks = [struct.pack(_HEADER, MAGIC, FORMAT_VERSION, gt.width,
                          gt.height, gt.bitdepth, len(gt.qps)),
              struct.pack('<{}B'.format(len(gt.qps)), *gt.qps),
              struct.pack('<I', len(gt.records))]
    for r in gt.records:
        chunks.append(struct.pack(_RECORD, r.patch_id, r.qp, r.bits, r.bpp,
                                  r.mse))
        chunks.append(np.asarray(r.distortion).astype(dtype).tobytes())
    return b''.join(chunks)


def write_ground_truth(ground_truth, path):
    with utils.atomic_write(path) as output:
        output.write(encode(ground_truth))


def _check_record(index, record, gt):
    where = 'record {} (patch {}, QP {})'.format(index, record.patch_id,
                                                 record.qp)
    if record.qp not in gt.qps:
        raise GroundTruthError('{}: QP not in the header list'.format(where))
    if record.distortion.max(initial=0) > 2 ** gt.bitdepth - 1:
        raise GroundTruthError('{}: distortion exceeds {}-bit range'.format(
            where, gt.bitdepth))
    expected_bpp = record.bits / float(gt.width * gt.height)
    if abs(record.bpp - expected_bpp) > 1e-6 * max(1.0, expected_bpp):
        raise GroundTruthError('{}: bpp {} inconsistent with {} bits'.format(
            where, record.bpp, record.bits))
    expected_mse = normalized_mse(record.distortion, gt.bitdepth)
    if abs(record.mse - expected_mse) > 1e-6 * max(1.0, expected_mse):
        raise GroundTruthError('{}: mse {} inconsistent with its map'.format(
            where, record.mse))


def decode(data):
    """Parses and validates ground-truth bytes.

    Raises:
      GroundTruthError naming the offending record.
    """
    size = struct.calcsize(_HEADER)
    if len(data) < size:
        raise GroundTruthError('ground-truth header truncated')
    magic, version, width, height, bitdepth, k = struct.unpack_from(
        _HEADER, data)
    if magic != MAGIC:
        raise GroundTruthError('not a ground-truth file (magic {!r})'.format(
            magic))
    if version != FORMAT_VERSION:
        raise GroundTruthError('ground-truth version {} is not '
                               'supported'.format(version))
    offset = size
    try:
        qps = struct.unpack_from('<{}B'.format(k), data, offset)
        offset += k
        (count,) = struct.unpack_from('<I', data, offset)
        offset += 4
    except struct.error:
        raise GroundTruthError('ground-truth header truncated')

    gt = GroundTruth(width, height, bitdepth, qps)
    dtype = _sample_dtype(bitdepth)
    map_size = width * height * dtype.itemsize
    record_size = struct.calcsize(_RECORD)
    records = []
    seen = set()
    for index in range(count):
        if offset + record_size + map_size > len(data):
            raise GroundTruthError('record {} truncated'.format(index))
        patch_id, qp, bits, bpp, mse = struct.unpack_from(_RECORD, data,
                                                          offset)
        offset += record_size
        distortion = np.frombuffer(data, dtype=dtype, count=width * height,
                                   offset=offset).reshape(height, width)
        offset += map_size
        record = GroundTruthRecord(patch_id, qp, bits, bpp, mse,
                                   distortion.astype(np.uint16))
        if record.key in seen:
            raise GroundTruthError('record {} duplicates patch {} QP '
                                   '{}'.format(index, patch_id, qp))
        seen.add(record.key)
        _check_record(index, record, gt)
        records.append(record)
    if offset != len(data):
        raise GroundTruthError('{} trailing bytes after record {}'.format(
            len(data) - offset, count - 1))
    return GroundTruth(width, height, bitdepth, qps, records)


def read_ground_truth(path):
    return decode(utils.read_binary(path))


def import_ground_truth(path):
    """Reads externally produced ground truth as codec results.

    An empty file yields an empty mapping.

    Returns:
      OrderedDict (patch id, QP) -> codec.EncodeResult, without
      reconstructions
    """
    data = utils.read_binary(path)
    results = collections.OrderedDict()
    if not data:
        return results
    gt = decode(data)
    for record in gt.records:
        results[record.key] = codec.EncodeResult(
            record.qp, record.bits, gt.width, gt.height,
            record.distortion.astype(np.int32), gt.bitdepth)
    return results
