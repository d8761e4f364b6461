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

"""Command-line front end.

Subcommands run one pipeline stage each:

  prepare   crop luma patches from a directory of images and split them
  gentruth  code every patch at every QP with the toy intra codec
  train     fit G (distortion maps) or F (bpp or mse vectors)
  predict   run trained weights on one image
  eval      block-wise correlation and per-QP vector errors on a split
  plot      SVG curves from an eval vectors.csv

Exit status is 0 on success, 2 for argument errors and 1 for runtime
errors.
"""

import argparse
import logging
import os
import sys

import numpy as np
from PIL import Image

from . import __version__
from . import codec
from . import dataset
from . import groundtruth
from . import metrics
from . import networks
from . import optim
from . import plot
from . import report
from . import tensor
from . import training
from . import utils
from . import weights


logger = logging.getLogger(__name__)

PROGRAM = 'rdest'
DEFAULT_QPS = (22, 27, 32, 37)
DEFAULT_SPLIT = (0.7, 0.1, 0.2)
SEED_VARIABLE = 'RD_SEED'

MANIFEST_FILE = 'manifest.txt'
PATCHES_FILE = 'patches.rdpx'
GROUND_TRUTH_FILE = 'groundtruth.rdgt'

RUNTIME_ERRORS = (
    codec.CodecError,
    dataset.DatasetError,
    dataset.DataIntegrityError,
    groundtruth.GroundTruthError,
    optim.TrainingError,
    plot.PlotError,
    tensor.DimensionError,
    weights.WeightsError,
    OSError,
    KeyError,
    ValueError,
)


class UsageError(Exception):

    """An argument error found after parsing; exits with status 2."""


def qp_list(text):
    """argparse type for comma-separated QPs."""
    try:
        qps = [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('invalid QP list {!r}'.format(text))
    if not qps:
        raise argparse.ArgumentTypeError('empty QP list')
    for qp in qps:
        if not 0 <= qp <= networks.QP_MAX:
            raise argparse.ArgumentTypeError(
                'QP out of range [0, {}]: {}'.format(networks.QP_MAX, qp))
    if len(set(qps)) != len(qps):
        raise argparse.ArgumentTypeError('duplicate QP in {!r}'.format(text))
    return sorted(qps)


def int_list(text):
    try:
        values = [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('invalid list {!r}'.format(text))
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError('invalid list {!r}'.format(text))
    return values


def ratio_list(text):
    try:
        ratios = tuple(float(v) for v in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError('invalid split {!r}'.format(text))
    if len(ratios) != 3:
        raise argparse.ArgumentTypeError(
            'split needs train,val,test ratios, got {!r}'.format(text))
    return ratios


def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('invalid integer {!r}'.format(text))
    if value < 1:
        raise argparse.ArgumentTypeError('must be at least 1: {}'.format(
            value))
    return value


def non_negative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('invalid integer {!r}'.format(text))
    if value < 0:
        raise argparse.ArgumentTypeError('must not be negative: {}'.format(
            value))
    return value


def resolve_seed(args, environ=None):
    """RD_SEED, when set, overrides --seed."""
    environ = os.environ if environ is None else environ
    value = environ.get(SEED_VARIABLE)
    if value is None:
        return args.seed
    try:
        seed = int(value)
    except ValueError:
        raise UsageError('{}={!r} is not an integer'.format(SEED_VARIABLE,
                                                              value))
    if not 0 <= seed < 2 ** 64:
        raise UsageError('{}={} is out of range'.format(SEED_VARIABLE, seed))
    return seed


def _load_dataset(directory, need_ground_truth=True):
    manifest = dataset.read_manifest(os.path.join(directory, MANIFEST_FILE))
    patch_size, bitdepth, patches = dataset.read_patches(
        os.path.join(directory, PATCHES_FILE))
    if (patch_size != manifest.patch_size or
            len(patches) != len(manifest.entries)):
        raise dataset.DataIntegrityError(
            'patch store does not match the manifest in {}'.format(directory))
    gt = None
    if need_ground_truth:
        gt = groundtruth.read_ground_truth(
            os.path.join(directory, GROUND_TRUTH_FILE))
    return manifest, patches, gt


def _write_pgm(path, samples):
    image = Image.fromarray(np.asarray(samples, dtype=np.uint8))
    with utils.atomic_write(path) as output:
        image.save(output, format='PPM')


def _map_to_samples(m, bitdepth):
    scale = float(2 ** (bitdepth - 1))
    return np.clip(np.rint(m * scale), 0, 255).astype(np.uint8)


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def command_prepare(args):
    if not os.path.isdir(args.images):
        raise UsageError('{} is not a directory'.format(args.images))
    spec = None
    if args.split is not None:
        try:
            spec = dataset.SplitSpec(*args.split, seed=args.seed)
        except dataset.DatasetError as error:
            raise UsageError(str(error))
    paths = dataset.list_images(args.images)
    manifest, patches, skipped = dataset.ingest_and_crop(
        paths, args.patch, args.stride, name=args.name or _stem(
            os.path.abspath(args.images)), qps=args.qps, root=args.images)
    manifest.seed = args.seed
    if spec is not None:
        try:
            manifest = dataset.split(manifest, spec)
        except dataset.DatasetError as error:
            raise UsageError(str(error))
    else:
        try:
            manifest = dataset.split(
                manifest, dataset.SplitSpec(*DEFAULT_SPLIT, seed=args.seed))
        except dataset.DatasetError as error:
            logger.warning('%s; tagging all patches train', error)
            manifest = dataset.tag_all(manifest, 'train')

    utils.ensure_directory(args.out)
    dataset.write_patches(os.path.join(args.out, PATCHES_FILE),
                          manifest.patch_size, manifest.bitdepth, patches)
    dataset.write_manifest(manifest, os.path.join(args.out, MANIFEST_FILE))
    counts = manifest.counts()
    print('{}: {} patches ({}), {} images skipped'.format(
        args.out, len(manifest.entries),
        ', '.join('{} {}'.format(k, v) for k, v in counts.items()), skipped))
    return 0


def command_gentruth(args):
    manifest, patches, _ = _load_dataset(args.dataset,
                                         need_ground_truth=False)
    qps = args.qps or list(manifest.qps)
    gt = groundtruth.generate_ground_truth(
        list(enumerate(patches)), qps, manifest.bitdepth, args.jobs)
    out = args.out or os.path.join(args.dataset, GROUND_TRUTH_FILE)
    groundtruth.write_ground_truth(gt, out)
    print('{}: {} records'.format(out, len(gt)))
    return 0


def command_train(args):
    target_kind = training.TARGET_FOR_NETWORK[args.net]
    try:
        cfg = training.TrainConfig(
            target_kind, args.max_epochs, batch_size=args.batch,
            learning_rate=args.lr, weight_decay=args.weight_decay,
            patience=args.patience, seed=args.seed)
    except ValueError as error:
        raise UsageError(str(error))
    manifest, patches, gt = _load_dataset(args.dataset)
    qps = args.qps or list(gt.qps)
    missing = sorted(set(qps) - set(gt.qps))
    if missing:
        raise UsageError('no ground truth at QP {}'.format(
            ','.join(map(str, missing))))

    train_set = dataset.load_samples(manifest, patches, gt, 'train',
                                     target_kind, qps)
    val_set = dataset.load_samples(manifest, patches, gt, 'val',
                                   target_kind, qps)
    if not len(train_set):
        raise dataset.DatasetError('the train split is empty')
    if not len(val_set):
        logger.warning('the val split is empty; validating on train')
        val_set = train_set

    net = networks.build(args.net, args.seed, qps)
    logger.info('%s network with %d parameters', args.net, net.count())
    trained, history = training.train(net, train_set, val_set, cfg)
    weights.save_weights(trained, args.out)
    training.write_history(history, training.history_path(args.out))
    best = history[trained.best_epoch - 1]
    print('{}: best epoch {} of {}, val loss {!r}'.format(
        args.out, trained.best_epoch, len(history), best.val_loss))
    return 0


def command_predict(args):
    try:
        model = weights.load_weights(args.weights, args.net)
    except weights.KindError as error:
        raise UsageError(str(error))
    if model.kind == networks.KIND_G:
        qps = args.qps or list(model.qps)
        if not qps:
            raise UsageError('--qps is required for G weights without a '
                             'QP list')
        if not args.out:
            raise UsageError('--out is required for G predictions')
    else:
        qps = list(model.qps)
        if args.qps and list(args.qps) != qps:
            raise UsageError('F weights estimate QPs {}, not {}'.format(
                ','.join(map(str, qps)), ','.join(map(str, args.qps))))
    net = weights.to_network(model)
    frame = dataset.load_luma(args.image)
    bitdepth = 8
    stem = _stem(args.image)

    if model.kind != networks.KIND_G:
        p = networks.forward_f(net, networks.normalize_inputs(
            frame, bitdepth, qps[0])[0])
        print(','.join(report.format_float(v) for v in p))
        return 0

    utils.ensure_directory(args.out)
    for qp in qps:
        i_hat, q_hat = networks.normalize_inputs(frame, bitdepth, qp)
        m = networks.forward_g(net, i_hat, q_hat)
        path = os.path.join(args.out, '{}_qp{}.pgm'.format(stem, qp))
        _write_pgm(path, _map_to_samples(m, bitdepth))
        mse = float(np.mean(np.square(m, dtype=np.float64)))
        print('{} qp={} mean={:.6f} psnr={:.4f}'.format(
            path, qp, float(np.mean(m, dtype=np.float64)) * 2 ** (
                bitdepth - 1), float(metrics.mse_to_psnr(mse, bitdepth))))
    return 0


def _dump_maps(directory, net, manifest, patches, ids, gt, qps, count):
    utils.ensure_directory(directory)
    ids = ids[:count]
    chosen = [patches[i] for i in ids]
    for patch_id, samples in zip(ids, chosen):
        _write_pgm(os.path.join(directory, 'patch{}_input.pgm'.format(
            patch_id)), samples)
    for qp in qps:
        maps = metrics.predict_maps_g(net, chosen, manifest.bitdepth, qp)
        for patch_id, m in zip(ids, maps):
            record = gt.get(patch_id, qp)
            prefix = os.path.join(directory, 'patch{}_qp{}'.format(patch_id,
                                                                   qp))
            _write_pgm(prefix + '_D.pgm',
                       np.clip(record.distortion, 0, 255))
            _write_pgm(prefix + '_M.pgm',
                       _map_to_samples(m, manifest.bitdepth))


def command_eval(args):
    models = []
    for path in args.weights:
        models.append(weights.load_weights(path))
    kinds = [m.kind for m in models]
    if len(set(kinds)) != len(kinds):
        raise UsageError('one weights file per network kind')
    if networks.KIND_G in kinds and networks.KIND_F_DIST in kinds:
        raise UsageError('G and f-dist weights both report mse and psnr; '
                         'evaluate them separately')
    if args.dump_maps and networks.KIND_G not in kinds:
        raise UsageError('--dump-maps needs G weights')

    manifest, patches, gt = _load_dataset(args.dataset)
    ids = manifest.ids(args.split)
    chosen = [patches[i] for i in ids]
    bitdepth = manifest.bitdepth
    pcc_reports = []
    vector_reports = []
    for model in models:
        net = weights.to_network(model)
        if model.kind == networks.KIND_G:
            qps = args.qps or list(gt.qps)
            blocks = metrics.usable_block_sizes(args.blocks,
                                                manifest.patch_size)
            pcc_reports.extend(metrics.evaluate_distortion_maps(
                net, chosen, ids, gt, qps, blocks, args.batch))
            predicted = metrics.predict_mse_g(net, chosen, bitdepth, qps,
                                              args.batch)
            if args.dump_maps:
                _dump_maps(os.path.join(args.out, 'maps'), net, manifest,
                           patches, ids, gt, qps, args.dump_maps)
        else:
            qps = list(model.qps)
            predicted = metrics.predict_vectors_f(net, chosen, bitdepth,
                                                  args.batch)
        if model.kind == networks.KIND_F_BITS:
            vector_reports.append(metrics.evaluate_vectors(
                metrics.KIND_BPP, ids, metrics.ground_truth_vectors(
                    gt, ids, qps, metrics.KIND_BPP), predicted, qps))
            continue
        vector_reports.append(metrics.evaluate_vectors(
            metrics.KIND_MSE, ids, metrics.ground_truth_vectors(
                gt, ids, qps, metrics.KIND_MSE), predicted, qps))
        vector_reports.append(metrics.evaluate_vectors(
            metrics.KIND_PSNR, ids, metrics.ground_truth_vectors(
                gt, ids, qps, metrics.KIND_PSNR),
            metrics.mse_to_psnr(predicted, bitdepth), qps))

    for path in report.emit_report(args.out, pcc_reports, vector_reports):
        print(path)
    return 0


def command_plot(args):
    paths = plot.plot_vectors(args.csv, args.out)
    if not paths:
        print('{}: no curves to plot'.format(args.csv))
    for path in paths:
        print(path)
    return 0


def _add_common(parser):
    parser.add_argument('--seed', type=non_negative_int, default=0,
                        help='random seed; the RD_SEED environment '
                             'variable overrides it (default: %(default)s)')
    parser.add_argument('--verbose', action='store_true',
                        help='log progress')


def build_parser():
    parser = argparse.ArgumentParser(
        prog=PROGRAM,
        description='Estimate rate and distortion of intra-coded frames '
                    'with convolutional networks.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    def add(name, function, help_text):
        sub = subparsers.add_parser(
            name, help=help_text, description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.set_defaults(function=function)
        _add_common(sub)
        return sub

    sub = add('prepare', command_prepare,
              'crop luma patches from images and split them')
    sub.add_argument('--images', required=True,
                     help='directory of 8-bit grayscale or RGB images')
    sub.add_argument('--patch', type=positive_int, default=128,
                     help='patch size')
    sub.add_argument('--stride', type=positive_int, default=None,
                     help='crop stride (default: the patch size)')
    sub.add_argument('--split', type=ratio_list, default=None,
                     help='train,val,test ratios (default: 0.7,0.1,0.2, '
                          'all train when a split would be empty)')
    sub.add_argument('--qps', type=qp_list, default=list(DEFAULT_QPS),
                     help='QP list recorded in the manifest')
    sub.add_argument('--name', default=None, help='dataset name')
    sub.add_argument('--out', required=True, help='dataset directory')

    sub = add('gentruth', command_gentruth,
              'code every patch at every QP')
    sub.add_argument('--dataset', required=True, help='dataset directory')
    sub.add_argument('--qps', type=qp_list, default=None,
                     help='QP list (default: the manifest QPs)')
    sub.add_argument('--jobs', type=positive_int, default=1,
                     help='worker processes')
    sub.add_argument('--out', default=None,
                     help='ground-truth file (default: '
                          '<dataset>/groundtruth.rdgt)')

    sub = add('train', command_train, 'train an estimator network')
    sub.add_argument('--dataset', required=True, help='dataset directory')
    sub.add_argument('--net', choices=networks.KINDS, required=True,
                     help='network kind')
    sub.add_argument('--qps', type=qp_list, default=None,
                     help='QP list (default: the ground-truth QPs)')
    sub.add_argument('--batch', type=positive_int, default=32,
                     help='batch size')
    sub.add_argument('--lr', type=float, default=1e-4,
                     help='Adam learning rate')
    sub.add_argument('--weight-decay', type=float, default=1e-4,
                     help='l2 weight decay')
    sub.add_argument('--patience', type=positive_int, default=10,
                     help='epochs without validation improvement before '
                          'stopping')
    sub.add_argument('--max-epochs', type=positive_int, required=True,
                     help='epoch limit')
    sub.add_argument('--out', required=True, help='weights file')

    sub = add('predict', command_predict, 'run trained weights on an image')
    sub.add_argument('--weights', required=True, help='weights file')
    sub.add_argument('--image', required=True, help='input image')
    sub.add_argument('--net', choices=networks.KINDS, default=None,
                     help='expected network kind')
    sub.add_argument('--qps', type=qp_list, default=None,
                     help='QP list (default: the QPs of the weights)')
    sub.add_argument('--out', default=None,
                     help='directory for G distortion maps')

    sub = add('eval', command_eval, 'evaluate trained weights on a split')
    sub.add_argument('--dataset', required=True, help='dataset directory')
    sub.add_argument('--weights', required=True, action='append',
                     help='weights file; repeat for several networks')
    sub.add_argument('--split', choices=dataset.SPLITS, default='test',
                     help='split to evaluate')
    sub.add_argument('--qps', type=qp_list, default=None,
                     help='QP list for G (default: the ground-truth QPs)')
    sub.add_argument('--blocks', type=int_list, default=[8, 16, 32, 64],
                     help='block sizes of the map correlation')
    sub.add_argument('--batch', type=positive_int, default=32,
                     help='inference batch size')
    sub.add_argument('--dump-maps', type=non_negative_int, default=0,
                     help='write input, D and M maps of the first N patches')
    sub.add_argument('--out', required=True, help='report directory')

    sub = add('plot', command_plot, 'plot curves of an eval vectors.csv')
    sub.add_argument('--csv', required=True, help='vectors.csv')
    sub.add_argument('--out', required=True, help='SVG directory')
    return parser


def main(argv=None, environ=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        format='%(name)s: %(levelname)s: %(message)s',
        level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.seed = resolve_seed(args, environ)
        return args.function(args)
    except UsageError as error:
        parser.print_usage(sys.stderr)
        print('{}: error: {}'.format(PROGRAM, error), file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as error:
        print('{}: error: {}'.format(PROGRAM, error), file=sys.stderr)
        return 1


def main_exit():
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(1)
