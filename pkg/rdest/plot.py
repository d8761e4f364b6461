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

"""SVG line charts of per-QP ground truth against predictions."""

import collections
import csv
import io
import os
import xml.etree.ElementTree as ElementTree

from . import report
from . import utils


WIDTH = 480
HEIGHT = 320
MARGIN_LEFT = 64
MARGIN_RIGHT = 120
MARGIN_TOP = 24
MARGIN_BOTTOM = 48

SVG_NAMESPACE = 'http://www.w3.org/2000/svg'

SERIES = (('gt', 'ground truth', '#1f77b4'),
          ('pred', 'predicted', '#d62728'))

AXIS_LABELS = {
    'bpp': 'bits per pixel',
    'mse': 'normalised mse',
    'psnr': 'PSNR (dB)',
}


class PlotError(ValueError):

    """Raised for a malformed vectors file, naming the offending line."""


Curve = collections.namedtuple('Curve', ['frame_id', 'kind', 'qps', 'gt',
                                         'pred'])


def _number(text, line_number, column):
    try:
        return float(text)
    except ValueError:
        raise PlotError('line {}: {} {!r} is not a number'.format(
            line_number, column, text))


def parse_vectors(text):
    """Groups vectors.csv rows into curves ordered by first appearance.

    Frechet rows are ignored. Header-only or empty text gives no curves.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    if rows[0] != report.VECTOR_COLUMNS:
        raise PlotError('line 1: expected header {}'.format(
            ','.join(report.VECTOR_COLUMNS)))
    points = collections.OrderedDict()
    for line_number, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(report.VECTOR_COLUMNS):
            raise PlotError('line {}: expected {} fields, got {}'.format(
                line_number, len(report.VECTOR_COLUMNS), len(row)))
        frame_id, kind, qp = row[:3]
        if qp == report.FRECHET:
            continue
        try:
            qp = int(qp)
        except ValueError:
            raise PlotError('line {}: bad QP {!r}'.format(line_number, qp))
        values = points.setdefault((frame_id, kind), [])
        if values and qp <= values[-1][0]:
            raise PlotError('line {}: QP {} is not ascending'.format(
                line_number, qp))
        values.append((qp, _number(row[3], line_number, 'gt'),
                       _number(row[4], line_number, 'pred')))
    return [Curve(frame_id, kind, [p[0] for p in values],
                  [p[1] for p in values], [p[2] for p in values])
            for (frame_id, kind), values in points.items()]


def _scale(low, high, out_low, out_high):
    if high == low:
        low, high = low - 1.0, high + 1.0

    def scale(value):
        return out_low + (value - low) * (out_high - out_low) / (high - low)
    return scale


def _text(parent, x, y, content, anchor='middle', **attributes):
    element = ElementTree.SubElement(
        parent, 'text', x='{:.2f}'.format(x), y='{:.2f}'.format(y),
        attrib=dict({'text-anchor': anchor, 'font-family': 'sans-serif',
                     'font-size': '12'}, **attributes))
    element.text = content
    return element


def _line(parent, x1, y1, x2, y2, stroke='#000000'):
    return ElementTree.SubElement(
        parent, 'line', x1='{:.2f}'.format(x1), y1='{:.2f}'.format(y1),
        x2='{:.2f}'.format(x2), y2='{:.2f}'.format(y2), stroke=stroke)


def render_svg(curve):
    """Returns the chart of one curve as SVG text."""
    left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    top, bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM
    values = curve.gt + curve.pred
    x_of = _scale(min(curve.qps), max(curve.qps), left, right)
    y_of = _scale(min(values), max(values), bottom, top)

    svg = ElementTree.Element('svg', xmlns=SVG_NAMESPACE,
                              width=str(WIDTH), height=str(HEIGHT),
                              viewBox='0 0 {} {}'.format(WIDTH, HEIGHT))
    ElementTree.SubElement(svg, 'title').text = 'frame {} {}'.format(
        curve.frame_id, curve.kind)
    _line(svg, left, bottom, right, bottom)
    _line(svg, left, bottom, left, top)
    for qp in curve.qps:
        _line(svg, x_of(qp), bottom, x_of(qp), bottom + 4)
        _text(svg, x_of(qp), bottom + 18, str(qp))
    for value in (min(values), max(values)):
        _text(svg, left - 6, y_of(value) + 4, '{:.4g}'.format(value),
              anchor='end')
    _text(svg, (left + right) / 2.0, HEIGHT - 10, 'QP')
    _text(svg, 16, (top + bottom) / 2.0,
          AXIS_LABELS.get(curve.kind, curve.kind),
          transform='rotate(-90 16 {:.2f})'.format((top + bottom) / 2.0))

    for index, (field, label, color) in enumerate(SERIES):
        points = ' '.join('{:.2f},{:.2f}'.format(x_of(qp), y_of(value))
                          for qp, value in zip(curve.qps,
                                               getattr(curve, field)))
        ElementTree.SubElement(svg, 'polyline', points=points, fill='none',
                               stroke=color, attrib={'stroke-width': '2'})
        y = top + 16 + 20 * index
        _line(svg, right + 12, y - 4, right + 32, y - 4, stroke=color)
        _text(svg, right + 38, y, label, anchor='start')
    return ElementTree.tostring(svg, encoding='unicode') + '\n'


def svg_name(curve):
    return 'frame{}_{}.svg'.format(curve.frame_id, curve.kind)


def plot_vectors(csv_path, out_directory):
    """Writes one SVG per (frame, kind) of csv_path.

    Returns:
      list of written paths, empty when the file holds no curves

    Raises:
      PlotError for malformed content.
    """
    text = utils.read_file(csv_path)
    if text is None:
        raise PlotError('cannot read {}'.format(csv_path))
    curves = parse_vectors(text)
    paths = []
    if curves:
        utils.ensure_directory(out_directory)
    for curve in curves:
        path = os.path.join(out_directory, svg_name(curve))
        with utils.atomic_write(path, text=True) as output:
            output.write(render_svg(curve))
        paths.append(path)
    return paths
