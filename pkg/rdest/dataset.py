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

"""Dataset preparation: luma patches, manifest, split and batching.

Patch store layout, all integers little-endian:

  magic 'RDPX' | version u16 | patch size u16 | bitdepth u8 | count u32 |
  count x (patch id u32 | patch size^2 samples, u8 (u16 above 8 bits))

The manifest is a text file of 'key: value' lines, a blank line and a CSV
table with one row per patch.
"""

import collections
import csv
import io
import logging
import math
import os
import struct

import numpy as np
from PIL import Image

from . import networks
from . import rng
from . import utils


logger = logging.getLogger(__name__)

PATCH_MAGIC = b'RDPX'
FORMAT_VERSION = 1
_PATCH_HEADER = '<4sHHBI'

SPLITS = ('train', 'val', 'test')
UNSPLIT = '-'

TARGET_MAP = 'distortion-map'
TARGET_BPP = 'bpp-vector'
TARGET_DIST = 'distortion-vector'
TARGET_KINDS = (TARGET_MAP, TARGET_BPP, TARGET_DIST)

# ITU-R BT.601 luma weights.
BT601 = (0.299, 0.587, 0.114)

IMAGE_EXTENSIONS = frozenset(['.pgm', '.png', '.jpg', '.jpeg', '.bmp',
                              '.tif', '.tiff', '.ppm'])

_ENTRY_COLUMNS = ['id', 'source', 'width', 'height', 'x', 'y', 'split']


class DatasetError(ValueError):

    """Raised for unusable inputs or invalid split requests."""


class DataIntegrityError(RuntimeError):

    """Raised when stored data is missing or does not fit together."""


PatchEntry = collections.namedtuple(
    'PatchEntry', ['id', 'source', 'width', 'height', 'x', 'y', 'split'])


class SplitSpec(object):

    """Train/val/test ratios plus the shuffle seed."""

    def __init__(self, train=0.7, val=0.1, test=0.2, seed=0):
        ratios = (train, val, test)
        if any(r <= 0 for r in ratios):
            raise DatasetError('split ratios must be positive: {}'.format(
                ratios))
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise DatasetError('split ratios must sum to 1: {}'.format(
                ratios))
        self.ratios = ratios
        self.seed = seed


class Manifest(object):

    """Dataset description; entries are ordered by id."""

    def __init__(self, name, patch_size, bitdepth, qps, entries,
                 split_ratios=None, seed=0):
        self.name = name
        self.patch_size = patch_size
        self.bitdepth = bitdepth
        self.qps = tuple(qps)
        self.entries = list(entries)
        self.split_ratios = split_ratios
        self.seed = seed

    def counts(self):
        counts = collections.OrderedDict((s, 0) for s in SPLITS)
        for entry in self.entries:
            if entry.split in counts:
                counts[entry.split] += 1
        return counts

    def ids(self, split):
        return [e.id for e in self.entries if e.split == split]

    def validate(self):
        """Raises DataIntegrityError unless ids are dense and crops fit."""
        for index, entry in enumerate(self.entries):
            if entry.id != index:
                raise DataIntegrityError('manifest ids are not dense at entry '
                                         '{}'.format(index))
            if (entry.x < 0 or entry.y < 0 or
                    entry.x + self.patch_size > entry.width or
                    entry.y + self.patch_size > entry.height):
                raise DataIntegrityError(
                    'patch {} crop lies outside {}'.format(entry.id,
                                                           entry.source))
            if entry.split not in SPLITS + (UNSPLIT,):
                raise DataIntegrityError('patch {} has unknown split '
                                         '{!r}'.format(entry.id, entry.split))


def load_luma(path):
    """Reads an 8-bit grayscale or RGB image as an H x W uint8 luma array.

    RGB goes through the BT.601 weights and is rounded.

    Raises:
      IOError if the file cannot be decoded, DatasetError for unsupported
      sample formats.
    """
    with Image.open(path) as image:
        image.load()
        if image.mode == 'L':
            return np.asarray(image, dtype=np.uint8).copy()
        if image.mode in ('I', 'I;16', 'I;16B', 'F'):
            raise DatasetError('{}: {} images are not 8-bit'.format(
                path, image.mode))
        rgb = np.asarray(image.convert('RGB'), dtype=np.float64)
    luma = rgb[..., 0] * BT601[0] + rgb[..., 1] * BT601[1] + \
        rgb[..., 2] * BT601[2]
    return np.clip(np.rint(luma), 0, 255).astype(np.uint8)


def list_images(directory):
    """Image files directly under directory, sorted by name."""
    names = sorted(os.listdir(directory))
    return [os.path.join(directory, n) for n in names
            if os.path.splitext(n)[1].lower() in IMAGE_EXTENSIONS]


def ingest_and_crop(image_paths, patch_size=128, stride=None, name='dataset',
                    qps=(22, 27, 32, 37), root=None):
    """Crops a top-left-aligned grid of full patches from every image.

    Partial border patches are dropped. Unreadable images are skipped with
    a warning.

    Args:
      image_paths: ordered image files
      root: directory that manifest source names are relative to

    Returns:
      (Manifest with untagged entries, list of patch arrays by id,
       number of skipped images)

    Raises:
      DatasetError if no patch could be cut.
    """
    stride = stride or patch_size
    entries = []
    patches = []
    skipped = 0
    for path in image_paths:
        try:
            luma = load_luma(path)
        except (IOError, OSError, DatasetError) as error:
            logger.warning('skipping %s: %s', path, error)
            skipped += 1
            continue
        height, width = luma.shape
        source = os.path.relpath(path, root) if root else \
            os.path.basename(path)
        for y in range(0, height - patch_size + 1, stride):
            for x in range(0, width - patch_size + 1, stride):
                entries.append(PatchEntry(len(entries), source, width,
                                          height, x, y, UNSPLIT))
                patches.append(luma[y:y + patch_size,
                                    x:x + patch_size].copy())
        if height < patch_size or width < patch_size:
            logger.warning('%s (%dx%d) is smaller than one %d patch', path,
                           width, height, patch_size)
    if skipped:
        logger.warning('%d of %d images skipped', skipped, len(image_paths))
    if not patches:
        raise DatasetError('no usable {0}x{0} patches in {1} '
                           'images'.format(patch_size, len(image_paths)))
    return Manifest(name, patch_size, 8, qps, entries), patches, skipped


def split_sizes(count, ratios):
    val = int(math.floor(ratios[1] * count + 0.5))
    test = int(math.floor(ratios[2] * count + 0.5))
    return count - val - test, val, test


def split(manifest, spec):
    """Tags entries by a seeded shuffle followed by a contiguous partition.

    Raises:
      DatasetError if any split would be empty.
    """
    count = len(manifest.entries)
    sizes = split_sizes(count, spec.ratios)
    for tag, size in zip(SPLITS, sizes):
        if size <= 0:
            raise DatasetError('{} split is empty for {} patches with ratios '
                               '{}'.format(tag, count, spec.ratios))
    order = rng.RngState(spec.seed).permutation(count)
    tags = [None] * count
    start = 0
    for tag, size in zip(SPLITS, sizes):
        for position in order[start:start + size]:
            tags[position] = tag
        start += size
    entries = [e._replace(split=tag) for e, tag in zip(manifest.entries,
                                                        tags)]
    return Manifest(manifest.name, manifest.patch_size, manifest.bitdepth,
                    manifest.qps, entries, spec.ratios, spec.seed)


def tag_all(manifest, tag):
    entries = [e._replace(split=tag) for e in manifest.entries]
    return Manifest(manifest.name, manifest.patch_size, manifest.bitdepth,
                    manifest.qps, entries, manifest.split_ratios,
                    manifest.seed)


def _format_list(values):
    return ','.join(repr(v) for v in values)


def format_manifest(manifest):
    lines = ['# rdest dataset manifest',
             'name: {}'.format(manifest.name),
             'patch_size: {}'.format(manifest.patch_size),
             'bitdepth: {}'.format(manifest.bitdepth),
             'qps: {}'.format(_format_list(manifest.qps)),
             'split: {}'.format(_format_list(manifest.split_ratios)
                                if manifest.split_ratios else UNSPLIT),
             'seed: {}'.format(manifest.seed)]
    for tag, count in manifest.counts().items():
        lines.append('count_{}: {}'.format(tag, count))
    table = io.StringIO()
    writer = csv.writer(table, lineterminator='\n')
    writer.writerow(_ENTRY_COLUMNS)
    for entry in manifest.entries:
        writer.writerow(list(entry))
    return '\n'.join(lines) + '\n\n' + table.getvalue()


def write_manifest(manifest, path):
    with utils.atomic_write(path, text=True) as output:
        output.write(format_manifest(manifest))


def parse_manifest(text):
    header, _, table = text.partition('\n\n')
    fields = {}
    for line in header.splitlines():
        if not line.strip() or line.startswith('#'):
            continue
        key, separator, value = line.partition(':')
        if not separator:
            raise DataIntegrityError('bad manifest line {!r}'.format(line))
        fields[key.strip()] = value.strip()
    try:
        rows = list(csv.reader(io.StringIO(table)))
        if not rows or rows[0] != _ENTRY_COLUMNS:
            raise DataIntegrityError('manifest entry table header missing')
        entries = [PatchEntry(int(r[0]), r[1], int(r[2]), int(r[3]),
                              int(r[4]), int(r[5]), r[6])
                   for r in rows[1:] if r]
        split_ratios = None
        if fields['split'] != UNSPLIT:
            split_ratios = tuple(float(v) for v in fields['split'].split(','))
        manifest = Manifest(fields['name'], int(fields['patch_size']),
                            int(fields['bitdepth']),
                            [int(v) for v in fields['qps'].split(',')],
                            entries, split_ratios, int(fields['seed']))
    except (KeyError, IndexError, ValueError) as error:
        raise DataIntegrityError('malformed manifest: {}'.format(error))
    manifest.validate()
    return manifest


def read_manifest(path):
    text = utils.read_file(path)
    if text is None:
        raise DataIntegrityError('cannot read manifest {}'.format(path))
    return parse_manifest(text)


def _sample_dtype(bitdepth):
    return np.dtype('u1') if bitdepth <= 8 else np.dtype('<u2')


def encode_patches(patch_size, bitdepth, patches):
    dtype = _sample_dtype(bitdepth)
    chunks = [struct.pack(_PATCH_HEADER, PATCH_MAGIC, FORMAT_VERSION,
                          patch_size, bitdepth, len(patches))]
    for patch_id, samples in enumerate(patches):
        chunks.append(struct.pack('<I', patch_id))
        chunks.append(np.asarray(samples).astype(dtype).tobytes())
    return b''.join(chunks)


def write_patches(path, patch_size, bitdepth, patches):
    with utils.atomic_write(path) as output:
        output.write(encode_patches(patch_size, bitdepth, patches))


def decode_patches(data):
    """Returns (patch size, bitdepth, list of patch arrays by id)."""
    size = struct.calcsize(_PATCH_HEADER)
    if len(data) < size:
        raise DataIntegrityError('patch store header truncated')
    magic, version, patch_size, bitdepth, count = struct.unpack_from(
        _PATCH_HEADER, data)
    if magic != PATCH_MAGIC:
        raise DataIntegrityError('not a patch store (magic {!r})'.format(
            magic))
    if version != FORMAT_VERSION:
        raise DataIntegrityError('patch store version {} is not '
                                 'supported'.format(version))
    dtype = _sample_dtype(bitdepth)
    samples = patch_size * patch_size
    offset = size
    patches = []
    for index in range(count):
        end = offset + 4 + samples * dtype.itemsize
        if end > len(data):
            raise DataIntegrityError('patch {} truncated'.format(index))
        (patch_id,) = struct.unpack_from('<I', data, offset)
        if patch_id != index:
            raise DataIntegrityError('patch ids are not dense at '
                                     '{}'.format(index))
        patches.append(np.frombuffer(data, dtype=dtype, count=samples,
                                     offset=offset + 4).reshape(
                                         patch_size, patch_size).copy())
        offset = end
    if offset != len(data):
        raise DataIntegrityError('trailing bytes in patch store')
    return patch_size, bitdepth, patches


def read_patches(path):
    return decode_patches(utils.read_binary(path))


class SampleSet(object):

    """Normalised training samples of one split and target kind.

    For distortion maps every patch is replicated once per QP; inputs are
    (I_hat, Q_hat) and targets D / 2^(n-1). For vectors inputs are I_hat and
    targets hold one bpp or normalised mse value per QP.
    """

    def __init__(self, kind, patch_ids, i_hat, targets, qps, sample_qps=None):
        self.kind = kind
        self.patch_ids = np.asarray(patch_ids)
        self.i_hat = i_hat
        self.targets = targets
        self.qps = tuple(qps)
        self.sample_qps = sample_qps

    def __len__(self):
        return len(self.patch_ids)

    def batch(self, indices):
        indices = np.asarray(indices)
        if self.kind == TARGET_MAP:
            q_hat = (self.sample_qps[indices] /
                     float(networks.QP_MAX)).astype(np.float32)
            q_hat = np.broadcast_to(q_hat[:, None, None, None],
                                    self.i_hat[indices].shape)
            return ((self.i_hat[indices], np.ascontiguousarray(q_hat)),
                    self.targets[indices])
        count = len(indices)
        return ((self.i_hat[indices],),
                self.targets[indices].reshape(count, -1, 1, 1))


def load_samples(manifest, patches, ground_truth, split_name, kind, qps=None):
    """Builds the SampleSet of split_name from the stored patches and records.

    Raises:
      DataIntegrityError if a (patch, QP) record is missing.
    """
    if kind not in TARGET_KINDS:
        raise DatasetError('unknown target kind {!r}'.format(kind))
    qps = tuple(sorted(qps or ground_truth.qps))
    ids = manifest.ids(split_name)
    scale = float(2 ** (manifest.bitdepth - 1))

    def record(patch_id, qp):
        found = ground_truth.get(patch_id, qp)
        if found is None:
            raise DataIntegrityError('no ground truth for patch {} at QP '
                                     '{}'.format(patch_id, qp))
        return found

    size = manifest.patch_size
    if kind == TARGET_MAP:
        sample_ids = [i for i in ids for _ in qps]
        sample_qps = np.array([qp for _ in ids for qp in qps])
        i_hat = np.empty((len(sample_ids), 1, size, size), dtype=np.float32)
        targets = np.empty_like(i_hat)
        for index, (patch_id, qp) in enumerate(zip(sample_ids, sample_qps)):
            i_hat[index, 0] = patches[patch_id] / scale
            targets[index, 0] = record(patch_id, qp).distortion / scale
        return SampleSet(kind, sample_ids, i_hat, targets, qps, sample_qps)

    i_hat = np.empty((len(ids), 1, size, size), dtype=np.float32)
    targets = np.empty((len(ids), len(qps)), dtype=np.float32)
    for index, patch_id in enumerate(ids):
        i_hat[index, 0] = patches[patch_id] / scale
        for column, qp in enumerate(qps):
            found = record(patch_id, qp)
            targets[index, column] = (found.bpp if kind == TARGET_BPP
                                      else found.mse)
    return SampleSet(kind, ids, i_hat, targets, qps)


def batches(samples, batch_size, seed, epoch):
    """Yields (inputs, targets) covering every sample once.

    The order is a pure function of (seed, epoch).
    """
    order = rng.RngState(seed, epoch).permutation(len(samples))
    for start in range(0, len(order), batch_size):
        yield samples.batch(order[start:start + batch_size])


def sequential_batches(samples, batch_size):
    for start in range(0, len(samples), batch_size):
        yield samples.batch(np.arange(start, min(start + batch_size,
                                                 len(samples))))
