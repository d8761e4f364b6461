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

"""Toy intra codec used as ground-truth oracle.

Each 8x8 block of the level-shifted frame goes through an orthonormal 2-D
DCT-II, a uniform quantiser with the H.265 step spacing 2^((QP-4)/6), a
signed order-0 exp-Golomb length count in zigzag order, dequantisation and
the inverse DCT. There is no intra prediction, no entropy coder state and no
in-loop filtering: only the rate-distortion trend matters.
"""

import math

import numpy as np
from scipy import fftpack


BLOCK = 8
QP_MAX = 51
PSNR_CAP = 100.0


class CodecError(ValueError):

    """Raised for invalid codec arguments."""


class Frame(object):

    """Luma plane of H x W integer samples in [0, 2^n - 1]."""

    def __init__(self, samples, bitdepth=8):
        samples = np.asarray(samples)
        if samples.ndim != 2 or samples.size == 0:
            raise CodecError('frame must be a non-empty 2-D array, got shape '
                             '{}'.format(samples.shape))
        if not np.issubdtype(samples.dtype, np.integer):
            if not np.array_equal(samples, np.round(samples)):
                raise CodecError('frame samples must be integers')
        if samples.min() < 0 or samples.max() > 2 ** bitdepth - 1:
            raise CodecError('frame samples exceed the {}-bit range'.format(
                bitdepth))
        self.samples = samples.astype(np.int32)
        self.bitdepth = bitdepth

    @property
    def height(self):
        return self.samples.shape[0]

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def peak(self):
        return 2 ** self.bitdepth - 1


class EncodeResult(object):

    """Outcome of coding one frame at one QP.

    reconstruction is None for results imported from a ground-truth file,
    which carries the distortion map but not the decoded samples.
    """

    def __init__(self, qp, bits, width, height, distortion, bitdepth=8,
                 reconstruction=None):
        self.qp = qp
        self.bits = int(bits)
        self.bpp = self.bits / float(width * height)
        self.distortion = distortion
        self.bitdepth = bitdepth
        self.reconstruction = reconstruction
        self.mse = float(np.mean(np.square(distortion, dtype=np.float64)))
        self.psnr = psnr(self.mse, 2 ** bitdepth - 1)


def psnr(mse, peak):
    """10 log10(peak^2 / mse) in dB, PSNR_CAP when mse is zero."""
    if mse <= 0:
        return PSNR_CAP
    return 10.0 * math.log10(peak * peak / mse)


def qstep(qp):
    """Quantiser step 2^((QP - 4) / 6)."""
    if not 0 <= qp <= QP_MAX:
        raise CodecError('QP {} out of range [0, {}]'.format(qp, QP_MAX))
    return 2.0 ** ((qp - 4) / 6.0)


def dct8_forward(block):
    """Orthonormal 2-D DCT-II over the last two axes."""
    return fftpack.dct(fftpack.dct(np.asarray(block, dtype=np.float64),
                                   type=2, norm='ortho', axis=-1),
                       type=2, norm='ortho', axis=-2)


def dct8_inverse(coefficients):
    return fftpack.idct(fftpack.idct(np.asarray(coefficients,
                                                dtype=np.float64),
                                     type=2, norm='ortho', axis=-1),
                        type=2, norm='ortho', axis=-2)


def _zigzag_order(size):
    cells = [(i, j) for i in range(size) for j in range(size)]
    cells.sort(key=lambda c: (c[0] + c[1],
                              c[0] if (c[0] + c[1]) % 2 else -c[0]))
    return np.array([i * size + j for i, j in cells])


ZIGZAG = _zigzag_order(BLOCK)


def exp_golomb_length(value):
    """Length in bits of the unsigned order-0 exp-Golomb code of value."""
    if value < 0:
        raise CodecError('exp-Golomb value {} is negative'.format(value))
    return ((value + 1).bit_length() - 1) * 2 + 1


def signed_exp_golomb_length(value):
    """Length of the se(v) code: v > 0 maps to 2v - 1, v <= 0 to -2v."""
    return exp_golomb_length(2 * value - 1 if value > 0 else -2 * value)


def signed_exp_golomb_lengths(levels):
    """Vectorised signed_exp_golomb_length over an integer array."""
    levels = np.asarray(levels, dtype=np.int64)
    code = np.where(levels > 0, 2 * levels - 1, -2 * levels)
    # frexp gives code + 1 = m * 2^e with m in [0.5, 1), so e is its
    # bit length.
    _, exponent = np.frexp((code + 1).astype(np.float64))
    return 2 * exponent.astype(np.int64) - 1


def _to_blocks(plane):
    height, width = plane.shape
    return plane.reshape(height // BLOCK, BLOCK, width // BLOCK,
                         BLOCK).transpose(0, 2, 1, 3)


def _from_blocks(blocks):
    rows, columns = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(rows * BLOCK,
                                                columns * BLOCK)


def _padded(frame):
    pad_y = -frame.height % BLOCK
    pad_x = -frame.width % BLOCK
    shifted = frame.samples.astype(np.float64) - 2 ** (frame.bitdepth - 1)
    return np.pad(shifted, ((0, pad_y), (0, pad_x)), mode='edge')


def encode_intra(frame, qp):
    """Codes frame at qp and returns the EncodeResult.

    Edge padding to a multiple of 8 is coded but excluded from the
    distortion map, mse and bpp.
    """
    step = qstep(qp)
    levels = np.rint(dct8_forward(_to_blocks(_padded(frame))) / step)
    levels = levels.astype(np.int64)
    scanned = levels.reshape(levels.shape[0], levels.shape[1],
                             BLOCK * BLOCK)[..., ZIGZAG]
    bits = int(signed_exp_golomb_lengths(scanned).sum())

    decoded = _from_blocks(dct8_inverse(levels * step))
    decoded = decoded[:frame.height, :frame.width] + 2 ** (frame.bitdepth - 1)
    reconstruction = np.clip(np.rint(decoded), 0, frame.peak).astype(np.int32)
    distortion = np.abs(frame.samples - reconstruction)
    return EncodeResult(qp, bits, frame.width, frame.height, distortion,
                        frame.bitdepth, Frame(reconstruction,
                                              frame.bitdepth))


def ac_energy_fraction(frame):
    """Share of the level-shifted frame energy held by AC coefficients."""
    coefficients = dct8_forward(_to_blocks(_padded(frame)))
    total = float(np.sum(np.square(coefficients)))
    if total == 0:
        return 0.0
    dc = float(np.sum(np.square(coefficients[..., 0, 0])))
    return (total - dc) / total
