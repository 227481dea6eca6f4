import csv
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase
from openpyxl import load_workbook

from anomaly_app.core import GroundTruthMask
from anomaly_app.formats import read_cube, read_mask, write_mask
from anomaly_app.forms import parse_number_list
from anomaly_app.management.commands.ablate import Command as AblateCommand
from anomaly_app.management.commands.ablate import ablation_settings
from anomaly_app.models import DetectionRun, ThroughputRecord


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))


class CommandTestCase(TestCase):
    """Small synthetic cube generated into a scratch directory"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)
        self.call('gen', lines=240, pixels=60, bands=10, transition_width=10, target_columns=4,
                  target_size=8, mixing_fractions='0.1,0.5')
        self.cube = str(self.out / 'synthetic.hadc')
        self.mask = str(self.out / 'synthetic_gt.hadc')

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, name, /, **options):
        stdout = StringIO()
        call_command(name, stdout=stdout, out=str(self.out), **options)
        return stdout.getvalue()

    def assert_exit_code(self, code, name, /, **options):
        with self.assertLogs('anomaly_app', 'ERROR'), self.assertRaises(CommandError) as ctx:
            self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code)


class GenCommandTests(CommandTestCase):
    def test_synthetic_cube_and_mask(self):
        cube = read_cube(self.cube)
        self.assertEqual(cube.shape, (240, 60, 10))
        # two fractions repeated three times across-track
        self.assertEqual(read_mask(self.mask, cube).anomaly_count, 3 * 2 * (64 + 16 + 4 + 1))

    def test_flipped_copy(self):
        self.call('gen', lines=240, pixels=60, bands=10, transition_width=10, target_columns=4,
                  target_size=8, mixing_fractions='0.1,0.5', flipped=True)
        cube = read_cube(self.cube)
        flipped = read_cube(self.out / 'synthetic-flipped.hadc')
        np.testing.assert_array_equal(flipped.data, cube.data[::-1])
        mask = read_mask(self.out / 'synthetic-flipped_gt.hadc')
        np.testing.assert_array_equal(mask.data, read_mask(self.mask).data[::-1])

    def test_random_cube_has_no_mask(self):
        output = self.call('gen', kind='random', lines=12, pixels=5, bands=3, name='noise')
        self.assertEqual(read_cube(self.out / 'noise.hadc').shape, (12, 5, 3))
        self.assertFalse((self.out / 'noise_gt.hadc').exists())
        self.assertIn('noise', output)

    def test_class_switch_needs_a_line_inside_the_cube(self):
        self.assert_exit_code(2, 'gen', kind='class-switch', lines=20, switch_line=20)

    def test_invalid_mixing_fraction(self):
        self.assert_exit_code(2, 'gen', lines=240, pixels=60, bands=10, mixing_fractions='0.1,1.5')


class RunCommandTests(CommandTestCase):
    def test_seeds_and_directions(self):
        self.call('run', cube=self.cube, mask=self.mask, detector='erx', seeds=2,
                  directions='both', buffer=20)
        rows = read_rows(self.out / 'results.csv')
        runs = [row for row in rows if row['seed'] != 'mean±sd']
        self.assertEqual(len(runs), 4)
        self.assertEqual(len(rows) - len(runs), 2)
        self.assertTrue(all(row['auc'] for row in runs))
        self.assertEqual(DetectionRun.objects.count(), 4)
        self.assertTrue((self.out / 'mean_roc_erx_flipped.csv').exists())

    def test_deterministic_detector_has_zero_spread(self):
        self.call('run', cube=self.cube, mask=self.mask, detector='rx-baseline', seeds=3,
                  buffer=9, no_save=True)
        aggregate = [row for row in read_rows(self.out / 'results.csv')
                     if row['seed'] == 'mean±sd']
        self.assertTrue(aggregate[0]['auc'].endswith('±0.0000'))
        self.assertEqual(DetectionRun.objects.count(), 0)

    def test_without_mask_auc_is_blank(self):
        output = self.call('run', cube=self.cube, detector='rx-bil', seeds=1, buffer=20,
                           threshold=2.0, roc=True)
        rows = read_rows(self.out / 'results.csv')
        self.assertEqual(rows[0]['auc'], '')
        self.assertIn('pixels detected', output)
        self.assertFalse(list(self.out.glob('roc_*.csv')))

    def test_heatmap_and_roc_files(self):
        self.call('run', cube=self.cube, mask=self.mask, seeds=1, buffer=20, heatmap=True,
                  roc=True, no_save=True)
        self.assertTrue((self.out / 'heatmap_erx_forward_s0.hadc').exists())
        roc = self.out / 'roc_erx_forward_s0.csv'
        with open(roc, newline='') as handle:
            self.assertEqual(next(csv.reader(handle)), ['threshold', 'fpr', 'tpr'])

    def test_unknown_detector_is_a_configuration_error(self):
        self.assert_exit_code(2, 'run', cube=self.cube, detector='rx-nope')

    def test_zero_momentum_is_a_configuration_error(self):
        self.assert_exit_code(2, 'run', cube=self.cube, alpha=0.0)

    def test_corrupt_cube_is_a_data_error(self):
        corrupt = self.out / 'corrupt.hadc'
        corrupt.write_bytes(b'HADX' + Path(self.cube).read_bytes()[4:])
        self.assert_exit_code(3, 'run', cube=str(corrupt))

    def test_missing_cube_is_a_data_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('run', cube=str(self.out / 'absent.hadc'))
        self.assertEqual(ctx.exception.returncode, 3)


class AblateCommandTests(CommandTestCase):
    def test_one_row_per_setting_and_run(self):
        output = self.call('ablate', cube=self.cube, mask=self.mask, seeds=1, buffer=20,
                           dims_list='2,5', alphas='0.5,0.1')
        rows = [row for row in read_rows(self.out / 'ablation.csv') if row['seed'] != 'mean±sd']
        self.assertEqual(len(rows), 6)
        self.assertEqual({row['detector'] for row in rows},
                         {'erx d=2', 'erx d=5', 'erx no-srp', 'erx alpha=0.5', 'erx alpha=0.1',
                          'erx incremental'})
        self.assertEqual(DetectionRun.objects.count(), 6)
        self.assertIn('no-srp', output)

    def test_settings_can_be_skipped(self):
        self.call('ablate', cube=self.cube, mask=self.mask, seeds=1, buffer=20, dims_list='2',
                  alphas='0.1', skip_no_srp=True, skip_incremental=True, no_save=True)
        rows = [row for row in read_rows(self.out / 'ablation.csv') if row['seed'] != 'mean±sd']
        self.assertEqual({row['detector'] for row in rows}, {'erx d=2', 'erx alpha=0.1'})

    def test_default_sweep_has_eight_settings_each(self):
        parser = AblateCommand().create_parser('manage.py', 'ablate')
        defaults = vars(parser.parse_args(['--cube', self.cube]))
        sweep = ablation_settings(parse_number_list(defaults['dims_list'], int),
                                  parse_number_list(defaults['alphas'], float),
                                  no_srp=not defaults['skip_no_srp'],
                                  incremental=not defaults['skip_incremental'])
        labels = [label for label, _ in sweep]
        self.assertEqual(len(labels), 16)
        self.assertEqual(labels[7], 'no-srp')
        self.assertEqual(labels[-1], 'incremental')
        self.assertEqual(sum(label.startswith('alpha=') for label in labels[8:]), 7)

    def test_unparseable_dimension_list(self):
        self.assert_exit_code(2, 'ablate', cube=self.cube, seeds=1, buffer=20, dims_list='2,x',
                              alphas='0.1')


class BenchCommandTests(CommandTestCase):
    def test_band_sweep(self):
        self.call('bench', sweep='bands', bands_list='10,20', lines=120, repeats=1, buffer=20)
        rows = read_rows(self.out / 'throughput.csv')
        self.assertEqual(len(rows), 4)
        self.assertEqual([row['bands'] for row in rows], ['10', '20', '10', '20'])
        self.assertTrue(all(row['lps_sd'] == '0.000' for row in rows))
        self.assertEqual(ThroughputRecord.objects.count(), 4)

    def test_buffer_must_be_shorter_than_stream(self):
        self.assert_exit_code(2, 'bench', sweep='bands', bands_list='10', lines=20, buffer=20)


class MetricsCommandTests(CommandTestCase):
    def heatmap(self):
        self.call('run', cube=self.cube, seeds=1, buffer=20, heatmap=True, no_save=True)
        return str(self.out / 'heatmap_erx_forward_s0.hadc')

    def test_heatmap_against_mask(self):
        output = self.call('metrics', scores=self.heatmap(), mask=self.mask, warmup_lines=20)
        self.assertIn('AUC ', output)
        self.assertTrue((self.out / 'roc_synthetic-erx_forward_s0.csv').exists())

    def test_mask_without_anomalies_is_undefined(self):
        empty = write_mask(self.out / 'empty.hadc', GroundTruthMask(np.zeros((240, 60))))
        self.assert_exit_code(4, 'metrics', scores=self.heatmap(), mask=str(empty))

    def test_mask_of_another_shape_is_a_data_error(self):
        other = write_mask(self.out / 'other.hadc', GroundTruthMask(np.zeros((120, 60))))
        self.assert_exit_code(3, 'metrics', scores=self.heatmap(), mask=str(other))

    def test_scores_and_mask_are_both_required(self):
        self.assert_exit_code(2, 'metrics', scores=self.heatmap())

    def test_summary_of_stored_runs(self):
        self.call('run', cube=self.cube, mask=self.mask, seeds=2, buffer=20)
        self.call('metrics', summary=True)
        sheet = load_workbook(self.out / 'results.xlsx').active
        self.assertEqual(sheet['A3'].value, 'detector')
        self.assertEqual(sheet['A4'].value, 'erx')
        self.assertEqual(sheet.max_row, 5)
        self.assertEqual(len(read_rows(self.out / 'results.csv')), 3)

    def test_summary_without_runs(self):
        self.assertIn('No stored runs', self.call('metrics', summary=True))
