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

"""CSV reports of an evaluation run.

pcc.csv      qp,block,mean_pcc,std_pcc,frames,skipped
vectors.csv  frame_id,kind,qp,gt,pred,abs_err, one row per QP plus one
             frechet row per frame with qp 'frechet' and abs_err the distance
summary.csv  kind,metric,mean,std
"""

import csv
import os

from . import metrics
from . import utils


PCC_FILE = 'pcc.csv'
VECTORS_FILE = 'vectors.csv'
SUMMARY_FILE = 'summary.csv'

PCC_COLUMNS = ['qp', 'block', 'mean_pcc', 'std_pcc', 'frames', 'skipped']
VECTOR_COLUMNS = ['frame_id', 'kind', 'qp', 'gt', 'pred', 'abs_err']
SUMMARY_COLUMNS = ['kind', 'metric', 'mean', 'std']

FRECHET = 'frechet'


def format_float(value):
    return repr(float(value))


def pcc_rows(pcc_reports):
    for report in pcc_reports:
        yield [report.qp, report.block, format_float(report.mean),
               format_float(report.std), report.frames, report.skipped]


def vector_rows(vector_reports):
    for report in vector_reports:
        for frame in report.frames:
            for qp, gt, pred in zip(report.qps, frame.gt, frame.pred):
                yield [frame.patch_id, report.kind, qp, format_float(gt),
                       format_float(pred), format_float(abs(pred - gt))]
            yield [frame.patch_id, report.kind, FRECHET, '', '',
                   format_float(frame.frechet)]


def summary_rows(vector_reports):
    for report in vector_reports:
        if not report.frames:
            continue
        yield [report.kind, 'mae'] + list(map(format_float, report.mae()))
        yield [report.kind, FRECHET] + list(map(format_float,
                                                report.frechet()))
        for qp, mean, std in report.qp_mae():
            yield [report.kind, 'mae_qp{}'.format(qp), format_float(mean),
                   format_float(std)]
        if report.kind == metrics.KIND_PSNR:
            for kind, which in (('psnr_gt', 'gt'), ('psnr', 'pred')):
                for qp, mean, std in report.qp_means(which):
                    yield [kind, 'mean_psnr_qp{}'.format(qp),
                           format_float(mean), format_float(std)]


def _write_csv(path, columns, rows):
    with utils.atomic_write(path, text=True) as output:
        writer = csv.writer(output, lineterminator='\n')
        writer.writerow(columns)
        writer.writerows(rows)


def emit_report(directory, pcc_reports=(), vector_reports=()):
    """Writes the three report files into directory.

    Returns:
      list of written paths
    """
    utils.ensure_directory(directory)
    outputs = [(PCC_FILE, PCC_COLUMNS, pcc_rows(pcc_reports)),
               (VECTORS_FILE, VECTOR_COLUMNS, vector_rows(vector_reports)),
               (SUMMARY_FILE, SUMMARY_COLUMNS, summary_rows(vector_reports))]
    paths = []
    for name, columns, rows in outputs:
        path = os.path.join(directory, name)
        _write_csv(path, columns, rows)
        paths.append(path)
    return paths
