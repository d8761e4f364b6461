#!/usr/bin/env python

"""Tests for the command-line front end."""

import contextlib
import io
import os
import shutil
import tempfile
import unittest

import numpy as np
from PIL import Image

from rdest import cli
from rdest import dataset
from rdest import networks
from rdest import rng
from rdest import weights


SUBCOMMANDS = ('prepare', 'gentruth', 'train', 'predict', 'eval', 'plot')


def run(argv, environ=None):
    """Returns (exit status, stdout, stderr) of one command line."""
    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            status = cli.main(argv, environ or {})
        except SystemExit as exit_request:
            status = exit_request.code
    return status, out.getvalue(), err.getvalue()


def save_image(path, width, height, seed):
    state = rng.RngState(seed)
    ramp = np.add.outer(np.arange(height), np.arange(width)) * 2.0
    samples = np.clip(np.rint(40 + ramp + state.normal((height, width), 20.0,
                                                       np.float64)), 0, 255)
    Image.fromarray(samples.astype(np.uint8)).save(path)
    return samples.astype(np.uint8)


def zero_weights(net):
    net.load_state([(name, np.zeros_like(value))
                    for name, value in net.state_dict()])
    return weights.ModelWeights.from_network(net)


class CliTest(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def path(self, *names):
        return os.path.join(self.directory, *names)

    def make_images(self, sizes):
        os.mkdir(self.path('images'))
        for index, (width, height) in enumerate(sizes):
            save_image(self.path('images', 'img{}.png'.format(index)),
                       width, height, index)
        return self.path('images')


class HelpTest(CliTest):

    def test_every_subcommand(self):
        for command in SUBCOMMANDS:
            status, out, _ = run([command, '--help'])
            self.assertEqual(0, status, command)
            self.assertIn('--seed', out)
            self.assertIn('default', out)

    def test_no_command(self):
        self.assertEqual(2, run([])[0])

    def test_train_defaults(self):
        args = cli.build_parser().parse_args(
            ['train', '--dataset', 'ds', '--net', 'g', '--max-epochs', '5',
             '--out', 'g.rdnw'])
        self.assertEqual((32, 1e-4, 1e-4, 10, 0),
                         (args.batch, args.lr, args.weight_decay,
                          args.patience, args.seed))

    def test_max_epochs_is_required(self):
        status, _, err = run(['train', '--dataset', 'ds', '--net', 'g',
                              '--out', 'g.rdnw'])
        self.assertEqual(2, status)
        self.assertIn('--max-epochs', err)


class PrepareTest(CliTest):

    def test_one_large_image(self):
        images = self.make_images([(256, 256)])
        status, out, _ = run(['prepare', '--images', images, '--patch', '128',
                              '--out', self.path('ds')])
        self.assertEqual(0, status)
        manifest = dataset.read_manifest(self.path('ds', cli.MANIFEST_FILE))
        self.assertEqual(4, len(manifest.entries))
        # Too few patches for the default split: everything trains.
        self.assertEqual([0, 1, 2, 3], manifest.ids('train'))
        _, _, patches = dataset.read_patches(self.path('ds',
                                                       cli.PATCHES_FILE))
        self.assertEqual(4, len(patches))
        self.assertIn('4 patches', out)

    def test_explicit_empty_split(self):
        images = self.make_images([(64, 64)])
        status, _, err = run(['prepare', '--images', images, '--patch', '32',
                              '--split', '0.9,0.05,0.05',
                              '--out', self.path('ds')])
        self.assertEqual(2, status)
        self.assertIn('rdest: error:', err)
        self.assertFalse(os.path.exists(self.path('ds')))

    def test_no_usable_patches(self):
        images = self.make_images([(100, 100)])
        status, _, err = run(['prepare', '--images', images,
                              '--out', self.path('ds')])
        self.assertEqual(1, status)
        self.assertIn('rdest: error: no usable', err)

    def test_seed_variable_overrides_flag(self):
        images = self.make_images([(64, 64)])
        status, _, _ = run(['prepare', '--images', images, '--patch', '16',
                            '--seed', '1', '--out', self.path('ds')],
                           {'RD_SEED': '7'})
        self.assertEqual(0, status)
        manifest = dataset.read_manifest(self.path('ds', cli.MANIFEST_FILE))
        self.assertEqual(7, manifest.seed)

    def test_bad_seed_variable(self):
        images = self.make_images([(64, 64)])
        status, _, err = run(['prepare', '--images', images,
                              '--out', self.path('ds')], {'RD_SEED': 'x'})
        self.assertEqual(2, status)
        self.assertIn('RD_SEED', err)


class GenTruthTest(CliTest):

    def test_qp_out_of_range(self):
        status, _, err = run(['gentruth', '--dataset', self.path('ds'),
                              '--qps', '22,60'])
        self.assertEqual(2, status)
        self.assertIn('QP out of range', err)

    def test_missing_dataset(self):
        status, _, err = run(['gentruth', '--dataset', self.path('ds')])
        self.assertEqual(1, status)
        self.assertIn('rdest: error:', err)


class PredictTest(CliTest):

    def setUp(self):
        super(PredictTest, self).setUp()
        self.image = self.path('frame.png')
        self.samples = save_image(self.image, 16, 12, 3)

    def test_zero_g_reproduces_the_input(self):
        model = zero_weights(networks.build_g(0, (22, 37)))
        weights.save_weights(model, self.path('g.rdnw'))
        status, out, _ = run(['predict', '--weights', self.path('g.rdnw'),
                              '--image', self.image, '--qps', '22',
                              '--out', self.path('maps')])
        self.assertEqual(0, status)
        with Image.open(self.path('maps', 'frame_qp22.pgm')) as image:
            np.testing.assert_array_equal(self.samples, np.asarray(image))
        self.assertIn('qp=22', out)
        self.assertEqual(['frame_qp22.pgm'], os.listdir(self.path('maps')))

    def test_zero_f_prints_the_bias(self):
        net = networks.build_f(0, (22, 27, 32, 37))
        model = zero_weights(net)
        model.parameters = [(name, np.full_like(value, 0.5)
                             if name == 'f/fc2/bias' else value)
                            for name, value in model.parameters]
        weights.save_weights(model, self.path('f.rdnw'))
        status, out, _ = run(['predict', '--weights', self.path('f.rdnw'),
                              '--image', self.image])
        self.assertEqual(0, status)
        self.assertEqual('0.5,0.5,0.5,0.5\n', out)

    def test_qp_count_mismatch(self):
        model = networks.build_f(0, (22, 27, 32, 37))
        weights.save_weights(weights.ModelWeights.from_network(model),
                             self.path('f.rdnw'))
        status, _, err = run(['predict', '--weights', self.path('f.rdnw'),
                              '--image', self.image, '--qps', '22,27,32'])
        self.assertEqual(2, status)
        self.assertIn('rdest: error:', err)

    def test_kind_mismatch(self):
        model = networks.build_g(0, (22,))
        weights.save_weights(weights.ModelWeights.from_network(model),
                             self.path('g.rdnw'))
        status, _, _ = run(['predict', '--weights', self.path('g.rdnw'),
                            '--net', 'f-bits', '--image', self.image])
        self.assertEqual(2, status)


class PlotTest(CliTest):

    def write(self, text):
        with open(self.path('vectors.csv'), 'w') as output:
            output.write(text)

    def test_empty_vectors(self):
        self.write('frame_id,kind,qp,gt,pred,abs_err\n')
        status, out, _ = run(['plot', '--csv', self.path('vectors.csv'),
                              '--out', self.path('plots')])
        self.assertEqual(0, status)
        self.assertIn('no curves', out)
        self.assertFalse(os.path.exists(self.path('plots')))

    def test_malformed_vectors(self):
        self.write('frame_id,kind,qp,gt,pred,abs_err\n0,bpp,22,x,1,1\n')
        status, _, err = run(['plot', '--csv', self.path('vectors.csv'),
                              '--out', self.path('plots')])
        self.assertEqual(1, status)
        self.assertIn('line 2', err)


class PipelineTest(CliTest):

    def pipeline(self, root):
        """Runs every stage into root and returns the produced bytes."""
        images = os.path.join(root, 'images')
        ds = os.path.join(root, 'ds')
        report_dir = os.path.join(root, 'report')
        steps = [
            ['prepare', '--images', images, '--patch', '16', '--out', ds],
            ['gentruth', '--dataset', ds, '--qps', '22,37'],
            ['train', '--dataset', ds, '--net', 'g', '--max-epochs', '3',
             '--batch', '8', '--lr', '1e-3', '--out',
             os.path.join(root, 'g.rdnw')],
            ['train', '--dataset', ds, '--net', 'f-bits', '--max-epochs', '3',
             '--batch', '8', '--lr', '1e-3', '--out',
             os.path.join(root, 'f.rdnw')],
            ['eval', '--dataset', ds, '--weights',
             os.path.join(root, 'g.rdnw'), '--weights',
             os.path.join(root, 'f.rdnw'), '--blocks', '4,8',
             '--dump-maps', '1', '--out', report_dir],
            ['plot', '--csv', os.path.join(report_dir, 'vectors.csv'),
             '--out', os.path.join(root, 'plots')],
        ]
        for argv in steps:
            status, _, err = run(argv, {'RD_SEED': '3'})
            self.assertEqual(0, status, '{}: {}'.format(argv[0], err))
        produced = {}
        for directory, _, names in os.walk(root):
            for name in names:
                path = os.path.join(directory, name)
                with open(path, 'rb') as input_file:
                    produced[os.path.relpath(path, root)] = input_file.read()
        return produced

    def test_rerun_is_byte_identical(self):
        roots = [self.path('first'), self.path('second')]
        for root in roots:
            os.mkdir(root)
            os.mkdir(os.path.join(root, 'images'))
            for index in range(2):
                save_image(os.path.join(root, 'images',
                                        'img{}.png'.format(index)),
                           32, 32, index)
        first = self.pipeline(roots[0])
        second = self.pipeline(roots[1])
        self.assertEqual(sorted(first), sorted(second))
        for name in first:
            self.assertEqual(first[name], second[name], name)

        self.assertIn(os.path.join('report', 'summary.csv'), first)
        self.assertIn('g.rdnw.history.csv', first)
        maps = os.path.join('report', 'maps', 'patch')
        self.assertEqual(1, len([name for name in first
                                 if name.startswith(maps) and
                                 name.endswith('_qp22_M.pgm')]))
        svgs = [name for name in first if name.endswith('.svg')]
        # Two test patches, one bpp, one mse and one psnr curve each.
        self.assertEqual(6, len(svgs))
        for name in svgs:
            self.assertEqual(2, first[name].count(b'<polyline'))


if __name__ == '__main__':
    unittest.main()
