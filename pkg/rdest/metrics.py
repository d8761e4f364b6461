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

"""Evaluation metrics: block-wise correlation, vector errors, Frechet.

Distortion maps are compared frame by frame: both maps are reduced to
per-block means of squares, correlated, and the per-frame coefficients are
aggregated as mean and standard deviation. Per-QP vectors (bpp, normalised
mse or PSNR) are compared by mean absolute error and by the discrete
Frechet distance between the two (QP, value) curves.
"""

import collections
import logging

import numpy as np
from scipy.spatial import distance

from . import codec
from . import networks


logger = logging.getLogger(__name__)

DENSIFY_STEPS = 16
BLOCK_SIZES = (8, 16, 32, 64)

KIND_BPP = 'bpp'
KIND_MSE = 'mse'
KIND_PSNR = 'psnr'
VECTOR_KINDS = (KIND_BPP, KIND_MSE, KIND_PSNR)


class UndefinedCorrelation(ArithmeticError):

    """Raised when a correlation input has zero variance."""


def block_reduce(values, block):
    """Per-block mean of squares in row-major block order.

    Raises:
      ValueError if block does not divide both dimensions.
    """
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape
    if block < 1 or height % block or width % block:
        raise ValueError('block size {} does not divide {}x{}'.format(
            block, width, height))
    blocks = np.square(values).reshape(height // block, block,
                                       width // block, block)
    return blocks.mean(axis=(1, 3)).ravel()


def pearson(u, v):
    """Pearson correlation coefficient, clipped to [-1, 1].

    Raises:
      ValueError for unequal or too short inputs.
      UndefinedCorrelation if either input is constant.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape or u.size < 2:
        raise ValueError('pearson needs two vectors of equal length >= 2, '
                         'got {} and {}'.format(u.size, v.size))
    if np.ptp(u) == 0 or np.ptp(v) == 0:
        raise UndefinedCorrelation('zero variance')
    du = u - u.mean()
    dv = v - v.mean()
    denominator = np.sqrt(np.dot(du, du) * np.dot(dv, dv))
    if denominator == 0:
        raise UndefinedCorrelation('zero variance')
    return float(np.clip(np.dot(du, dv) / denominator, -1.0, 1.0))


def aggregate(values):
    """(mean, population standard deviation); NaN for no values."""
    values = np.asarray(values, dtype=np.float64)
    if not values.size:
        return float('nan'), float('nan')
    return float(values.mean()), float(values.std())


def densify(points, steps=DENSIFY_STEPS):
    """Inserts steps - 1 evenly spaced samples inside every segment."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    if len(points) < 2:
        return points.copy()
    fractions = np.arange(steps, dtype=np.float64)[:, np.newaxis] / steps
    starts = points[:-1]
    deltas = points[1:] - points[:-1]
    inner = starts[:, np.newaxis, :] + deltas[:, np.newaxis, :] * \
        fractions[np.newaxis]
    return np.concatenate([inner.reshape(-1, points.shape[1]),
                           points[-1:]])


def discrete_frechet(a, b):
    """Discrete Frechet distance between two point sequences.

    Raises:
      ValueError if a curve is empty or the dimensions differ.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not len(a) or not len(b):
        raise ValueError('discrete_frechet needs non-empty curves')
    if a.ndim == 1:
        a = a[:, np.newaxis]
    if b.ndim == 1:
        b = b[:, np.newaxis]
    if a.shape[1] != b.shape[1]:
        raise ValueError('curve dimensions {} and {} differ'.format(
            a.shape[1], b.shape[1]))
    pairwise = distance.cdist(a, b)
    coupling = np.empty_like(pairwise)
    coupling[:, 0] = np.maximum.accumulate(pairwise[:, 0])
    coupling[0, :] = np.maximum.accumulate(pairwise[0, :])
    for i in range(1, len(a)):
        for j in range(1, len(b)):
            coupling[i, j] = max(min(coupling[i - 1, j], coupling[i, j - 1],
                                     coupling[i - 1, j - 1]),
                                 pairwise[i, j])
    return float(coupling[-1, -1])


def curve_frechet(qps, values_a, values_b, steps=DENSIFY_STEPS):
    """Frechet distance between two (QP, value) curves after densifying."""
    qps = np.asarray(qps, dtype=np.float64)
    a = densify(np.column_stack([qps, values_a]), steps)
    b = densify(np.column_stack([qps, values_b]), steps)
    return discrete_frechet(a, b)


def mse_to_psnr(mse, bitdepth):
    """PSNR in dB for normalised mse values, capped like the codec."""
    sample_scale = float(4 ** (bitdepth - 1))
    peak = 2 ** bitdepth - 1
    return np.vectorize(lambda m: codec.psnr(m * sample_scale, peak),
                        otypes=[np.float64])(np.asarray(mse))


class QpCurve(object):

    """One value per QP, QPs strictly ascending."""

    def __init__(self, qps, values):
        qps = tuple(qps)
        values = np.asarray(values, dtype=np.float64)
        if len(qps) != len(values):
            raise ValueError('{} QPs but {} values'.format(len(qps),
                                                           len(values)))
        if any(b <= a for a, b in zip(qps, qps[1:])):
            raise ValueError('QPs must be strictly increasing: {}'.format(
                qps))
        self.qps = qps
        self.values = values

    def frechet(self, other):
        if self.qps != other.qps:
            raise ValueError('curves over different QPs')
        return curve_frechet(self.qps, self.values, other.values)


class BlockPccReport(object):

    """Per-frame block correlations at one (QP, block size)."""

    def __init__(self, qp, block, pccs, skipped=0):
        self.qp = qp
        self.block = block
        self.pccs = list(pccs)
        self.skipped = skipped

    @property
    def frames(self):
        return len(self.pccs)

    @property
    def mean(self):
        return aggregate(self.pccs)[0]

    @property
    def std(self):
        return aggregate(self.pccs)[1]

    def __str__(self):
        return ('QP {} block {}: {:.3f} +- {:.3f} '
                '({} frames, {} skipped)').format(
            self.qp, self.block, self.mean, self.std, self.frames,
            self.skipped)


def block_pcc_report(qp, block, pairs):
    """Correlates block_reduce(D) with block_reduce(M) for (D, M) pairs."""
    pccs = []
    skipped = 0
    for truth, estimate in pairs:
        try:
            pccs.append(pearson(block_reduce(truth, block),
                                block_reduce(estimate, block)))
        except UndefinedCorrelation:
            skipped += 1
    return BlockPccReport(qp, block, pccs, skipped)


def usable_block_sizes(block_sizes, patch_size):
    """Block sizes that split a patch into at least two blocks."""
    usable = []
    for block in block_sizes:
        if patch_size % block == 0 and patch_size // block >= 2:
            usable.append(block)
        else:
            logger.warning('block size %d skipped for %d patches', block,
                           patch_size)
    return usable


def _i_hat(patches, bitdepth):
    scale = float(2 ** (bitdepth - 1))
    return (np.stack([np.asarray(p) for p in patches])[:, np.newaxis] /
            scale).astype(np.float32)


def predict_maps_g(net, patches, bitdepth, qp, batch_size=32):
    """Clamped normalised maps M, one H x W array per patch."""
    maps = []
    for start in range(0, len(patches), batch_size):
        i_hat = _i_hat(patches[start:start + batch_size], bitdepth)
        q_hat = np.full(i_hat.shape, qp / float(networks.QP_MAX),
                        dtype=np.float32)
        maps.extend(networks.forward_g(net, i_hat, q_hat)[:, 0])
    return maps


def predict_mse_g(net, patches, bitdepth, qps, batch_size=32):
    """N x K normalised mse derived from G as the mean of M squared."""
    columns = []
    for qp in qps:
        maps = predict_maps_g(net, patches, bitdepth, qp, batch_size)
        columns.append([np.mean(np.square(m, dtype=np.float64))
                        for m in maps])
    return np.array(columns, dtype=np.float64).T.reshape(len(patches),
                                                         len(qps))


def predict_psnr_g(net, patches, bitdepth, qps, batch_size=32):
    return mse_to_psnr(predict_mse_g(net, patches, bitdepth, qps,
                                     batch_size), bitdepth)


def predict_vectors_f(net, patches, bitdepth, batch_size=32):
    """N x K outputs of F, in the QP order of the network."""
    rows = []
    for start in range(0, len(patches), batch_size):
        rows.append(networks.forward_f(
            net, _i_hat(patches[start:start + batch_size], bitdepth)))
    if not rows:
        return np.empty((0, len(net.qps)))
    return np.concatenate(rows).astype(np.float64)


def ground_truth_vectors(ground_truth, patch_ids, qps, kind):
    """N x K ground-truth bpp, normalised mse or PSNR values.

    Raises:
      KeyError if a (patch, QP) record is missing.
    """
    values = np.empty((len(patch_ids), len(qps)), dtype=np.float64)
    for row, patch_id in enumerate(patch_ids):
        for column, qp in enumerate(qps):
            record = ground_truth.get(patch_id, qp)
            if record is None:
                raise KeyError('no ground truth for patch {} at QP '
                               '{}'.format(patch_id, qp))
            values[row, column] = (record.bpp if kind == KIND_BPP
                                   else record.mse)
    if kind == KIND_PSNR:
        return mse_to_psnr(values, ground_truth.bitdepth)
    return values


def evaluate_distortion_maps(net, patches, patch_ids, ground_truth, qps,
                             block_sizes=BLOCK_SIZES, batch_size=32):
    """Block-wise PCC reports ordered by (QP, block size).

    Raises:
      KeyError if a (patch, QP) record is missing.
    """
    if not patches:
        return []
    scale = float(2 ** (ground_truth.bitdepth - 1))
    reports = []
    for qp in qps:
        estimates = predict_maps_g(net, patches, ground_truth.bitdepth, qp,
                                   batch_size)
        truths = []
        for patch_id in patch_ids:
            record = ground_truth.get(patch_id, qp)
            if record is None:
                raise KeyError('no ground truth for patch {} at QP '
                               '{}'.format(patch_id, qp))
            truths.append(record.distortion / scale)
        for block in block_sizes:
            report = block_pcc_report(qp, block, zip(truths, estimates))
            logger.info('%s', report)
            reports.append(report)
    return reports


FrameVectors = collections.namedtuple(
    'FrameVectors', ['patch_id', 'gt', 'pred', 'mae', 'frechet'])


class VectorReport(object):

    """Per-frame vector errors of one kind over a fixed QP list."""

    def __init__(self, kind, qps, frames):
        self.kind = kind
        self.qps = tuple(qps)
        self.frames = list(frames)

    def mae(self):
        return aggregate([f.mae for f in self.frames])

    def frechet(self):
        return aggregate([f.frechet for f in self.frames])

    def qp_mae(self):
        """(QP, mean, std) of the absolute error at each QP."""
        return [(qp,) + aggregate([abs(f.pred[i] - f.gt[i])
                                   for f in self.frames])
                for i, qp in enumerate(self.qps)]

    def qp_means(self, which):
        """(QP, mean, std) of the 'gt' or 'pred' values at each QP."""
        return [(qp,) + aggregate([getattr(f, which)[i]
                                   for f in self.frames])
                for i, qp in enumerate(self.qps)]


def evaluate_vectors(kind, patch_ids, truth, prediction, qps):
    """Per-frame MAE and curve Frechet distance between N x K arrays."""
    if kind not in VECTOR_KINDS:
        raise ValueError('unknown vector kind {!r}'.format(kind))
    truth = np.asarray(truth, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    expected = (len(patch_ids), len(qps))
    if truth.shape != expected or prediction.shape != expected:
        raise ValueError('vector shapes {} and {} do not match {} '
                         'QPs'.format(truth.shape, prediction.shape,
                                      len(qps)))
    frames = []
    for patch_id, gt, pred in zip(patch_ids, truth, prediction):
        frames.append(FrameVectors(patch_id, gt, pred,
                                   float(np.mean(np.abs(pred - gt))),
                                   curve_frechet(qps, gt, pred)))
    return VectorReport(kind, qps, frames)
