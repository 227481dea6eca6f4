import csv
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from openpyxl import load_workbook

from anomaly_app.core import FLIPPED, DataCube, GroundTruthMask, ScoredLine
from anomaly_app.exceptions import DataFormatError, ShapeMismatchError
from anomaly_app.formats import (
    DTYPE_UINT8,
    HEADER,
    _write_container,
    export_results_xlsx,
    import_bil,
    read_cube,
    read_heatmap,
    read_mask,
    write_cube,
    write_heatmap,
    write_mask,
    write_roc_csv,
    write_scores_csv,
    write_throughput_csv,
)
from anomaly_app.metrics import RunRecord, roc_curve
from anomaly_app.runner import ThroughputReport


def record(seed, auc, direction='forward'):
    return RunRecord(detector='erx', dataset='toy', direction=direction, seed=seed, auc=auc,
                     auc_td=auc, auc_bs=auc, lps=250.0, warmup_lines=99, config={'alpha': 0.1})


class FormatTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()


class ContainerTests(FormatTestCase):
    def test_cube_survives_a_write_and_read(self):
        data = np.random.default_rng(61).random((4, 3, 5), dtype=np.float32)
        path = write_cube(self.dir / 'cube.hadc', DataCube(data, name='scène'))
        cube = read_cube(path)
        np.testing.assert_array_equal(cube.data, data)
        self.assertEqual(cube.name, 'scène')

    def test_header_is_little_endian_with_declared_dims(self):
        path = write_cube(self.dir / 'cube.hadc', DataCube(np.zeros((2, 3, 4)), name='ab'))
        raw = path.read_bytes()
        magic, version, lines, pixels, bands, dtype, layout, name_len = HEADER.unpack_from(raw)
        self.assertEqual((magic, version, lines, pixels, bands, dtype, layout, name_len),
                         (b'HADC', 1, 2, 3, 4, 1, 1, 2))
        self.assertEqual(len(raw), HEADER.size + 2 + 2 * 3 * 4 * 4)

    def test_bad_magic_reports_offset_zero(self):
        path = write_cube(self.dir / 'cube.hadc', DataCube(np.zeros((2, 2, 2))))
        raw = bytearray(path.read_bytes())
        raw[:4] = b'XXXX'
        path.write_bytes(bytes(raw))
        with self.assertRaises(DataFormatError) as ctx:
            read_cube(path)
        self.assertEqual(ctx.exception.offset, 0)

    def test_truncated_payload(self):
        path = write_cube(self.dir / 'cube.hadc', DataCube(np.zeros((2, 2, 2))))
        path.write_bytes(path.read_bytes()[:-3])
        with self.assertRaises(DataFormatError) as ctx:
            read_cube(path)
        self.assertIn('byte offset', str(ctx.exception))

    def test_zero_dimension_in_header(self):
        path = self.dir / 'empty.hadc'
        path.write_bytes(HEADER.pack(b'HADC', 1, 0, 2, 2, 1, 1, 0))
        with self.assertRaises(DataFormatError) as ctx:
            read_cube(path)
        self.assertEqual(ctx.exception.offset, 6)

    def test_unknown_dtype(self):
        path = self.dir / 'odd.hadc'
        path.write_bytes(HEADER.pack(b'HADC', 1, 1, 1, 1, 9, 1, 0) + b'\0' * 4)
        with self.assertRaises(DataFormatError) as ctx:
            read_cube(path)
        self.assertEqual(ctx.exception.offset, 18)

    def test_non_finite_payload_is_located(self):
        data = np.zeros((1, 2, 2), dtype=np.float32)
        data[0, 1, 0] = np.inf
        path = _write_container(self.dir / 'inf.hadc', data, 1, '')
        with self.assertRaises(DataFormatError) as ctx:
            read_cube(path)
        self.assertEqual(ctx.exception.offset, HEADER.size + 2 * 4)


class MaskTests(FormatTestCase):
    def test_mask_round_trip_and_cube_check(self):
        mask = GroundTruthMask(np.array([[0, 1, 0], [1, 0, 0]]))
        path = write_mask(self.dir / 'gt.hadc', mask)
        np.testing.assert_array_equal(read_mask(path).data, mask.data)
        with self.assertRaises(ShapeMismatchError):
            read_mask(path, DataCube(np.zeros((3, 2, 1))))

    def test_mask_values_above_one(self):
        path = _write_container(self.dir / 'bad.hadc', np.array([[[0], [2]]], dtype=np.uint8),
                                DTYPE_UINT8, 'bad')
        with self.assertRaises(DataFormatError) as ctx:
            read_mask(path)
        self.assertEqual(ctx.exception.offset, HEADER.size + 3 + 1)

    def test_cube_is_not_a_mask(self):
        path = write_cube(self.dir / 'cube.hadc', DataCube(np.zeros((2, 2, 1))))
        with self.assertRaises(DataFormatError):
            read_mask(path)


class HeatmapTests(FormatTestCase):
    def test_flipped_scores_are_written_in_native_order(self):
        lines = [ScoredLine.from_distances(i, np.full(2, float(i)) + [0.0, 1.0]) for i in range(3)]
        path = write_heatmap(self.dir / 'heat.hadc', lines, 3, 2, direction=FLIPPED,
                             score_field='raw', name='heat')
        heat, name = read_heatmap(path)
        self.assertEqual(name, 'heat')
        np.testing.assert_array_equal(heat[:, 0], [2.0, 1.0, 0.0])

    def test_unscored_lines_are_zero(self):
        lines = [ScoredLine.unscored(0, 2), ScoredLine.from_distances(1, [1.0, 3.0])]
        heat, _ = read_heatmap(write_heatmap(self.dir / 'heat.hadc', lines, 2, 2))
        np.testing.assert_array_equal(heat[0], [0.0, 0.0])
        np.testing.assert_allclose(heat[1], [-1.0, 1.0])


class TableTests(FormatTestCase):
    def test_results_csv_has_runs_and_aggregate_rows(self):
        path = write_scores_csv(self.dir / 'results.csv',
                                [record(0, 0.8), record(1, 0.9), record(0, 0.7, 'flipped')])
        with open(path, newline='', encoding='utf-8') as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(len(rows), 5)
        self.assertEqual(rows[0]['auc'], '0.8000')
        self.assertEqual(rows[0]['config'], '{"alpha": 0.1}')
        aggregate = [row for row in rows if row['seed'] == 'mean±sd']
        self.assertEqual(len(aggregate), 2)
        self.assertEqual(aggregate[0]['auc'], '0.8500±0.0500')
        self.assertEqual(aggregate[0]['lps'], '250.00±0.00')

    def test_missing_auc_is_blank(self):
        path = write_scores_csv(self.dir / 'results.csv', [record(0, None)], aggregate=False)
        with open(path, newline='', encoding='utf-8') as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(rows[0]['auc'], '')

    def test_roc_csv_keeps_sentinels(self):
        roc = roc_curve(np.array([0.2, 0.9]), np.array([0, 1]))
        with open(write_roc_csv(self.dir / 'roc.csv', roc), newline='') as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ['threshold', 'fpr', 'tpr'])
        self.assertEqual(rows[1][0], 'inf')
        self.assertEqual(rows[-1][0], '-inf')

    def test_throughput_csv(self):
        report = ThroughputReport('erx', 500, 10, 3000, 2, 812.5, 3.25, 'host')
        with open(write_throughput_csv(self.dir / 't.csv', [report]), newline='') as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(rows[0]['lps_mean'], '812.500')
        self.assertEqual(rows[0]['bands'], '10')

    def test_results_workbook(self):
        path = export_results_xlsx(self.dir / 'results.xlsx', [record(0, 0.8)], title='Runs')
        sheet = load_workbook(path).active
        self.assertEqual(sheet['A1'].value, 'Runs')
        self.assertEqual(sheet['A3'].value, 'detector')
        self.assertEqual(sheet['E4'].value, 0.8)


class BilImportTests(FormatTestCase):
    def write_raw(self, array, interleave, **fields):
        raw = self.dir / 'scene.raw'
        array.astype('<f4').tofile(raw)
        header = self.dir / 'scene.hdr'
        lines = ['ENVI', 'samples = 3', 'lines = 2', 'bands = 4', 'data type = 4',
                 f'interleave = {interleave}', 'byte order = 0']
        lines += [f'{key} = {value}' for key, value in fields.items()]
        header.write_text('\n'.join(lines))
        return raw, header

    def test_bil_layout(self):
        expected = np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
        raw, header = self.write_raw(expected.transpose(0, 2, 1), 'bil')
        cube = import_bil(raw, header)
        np.testing.assert_array_equal(cube.data, expected)
        self.assertEqual(cube.name, 'scene')

    def test_bsq_layout(self):
        expected = np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
        raw, header = self.write_raw(expected.transpose(2, 0, 1), 'bsq')
        np.testing.assert_array_equal(import_bil(raw, header).data, expected)

    def test_size_mismatch(self):
        raw, header = self.write_raw(np.zeros(5), 'bil')
        with self.assertRaises(DataFormatError):
            import_bil(raw, header)

    def test_missing_header_field(self):
        raw, header = self.write_raw(np.zeros(24), 'bil')
        header.write_text('samples = 3\nlines = 2')
        with self.assertRaises(DataFormatError):
            import_bil(raw, header)
