import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from anomaly_app.core import FLIPPED, FORWARD, DataCube, GroundTruthMask
from anomaly_app.erx import ErxDetector
from anomaly_app.exceptions import ConfigurationError, ShapeMismatchError
from anomaly_app.forms import BenchOptionsForm, DetectorOptionsForm, parse_number_list, validated
from anomaly_app.reference_detectors import LblAdDetector, RxBilDetector
from anomaly_app.runner import (
    benchmark_lines,
    build_detector,
    count_detections,
    execute_run,
    expand_directions,
    mean_curves,
    measure_throughput,
    resolve_options,
    run_many,
    run_sweep,
)


def planted_cube(seed=70):
    """Gaussian background with one bright pixel every ten lines"""
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((80, 16, 4))
    mask = np.zeros((80, 16), dtype=np.uint8)
    mask[5::10, 3] = 1
    data[5::10, 3] += 8.0
    return DataCube(data, name='planted'), GroundTruthMask(mask)


class BuildDetectorTests(SimpleTestCase):
    def test_every_name_builds(self):
        self.assertIsInstance(build_detector('erx', 6), ErxDetector)
        self.assertIsInstance(build_detector('rx-bil', 6, options={'eta': 0.2}), RxBilDetector)
        self.assertEqual(build_detector('lbl-ad', 6, options={'components': 2}).k, 2)

    def test_unknown_name(self):
        with self.assertRaises(ConfigurationError):
            build_detector('rx-unknown', 6)

    def test_components_beyond_bands(self):
        with self.assertRaises(ConfigurationError):
            build_detector('lbl-ad', 2, options={'components': 3})

    def test_none_options_keep_defaults(self):
        options = resolve_options({'alpha': None, 'dims': 7})
        self.assertEqual(options['alpha'], settings.DETECTION['ERX_ALPHA'])
        self.assertEqual(options['dims'], 7)

    @override_settings(DETECTION={**settings.DETECTION, 'LBLAD_COMPONENTS': 1})
    def test_defaults_follow_settings(self):
        self.assertIsInstance(build_detector('lbl-ad', 1), LblAdDetector)


class ExecuteRunTests(SimpleTestCase):
    def setUp(self):
        self.cube, self.mask = planted_cube()

    def test_without_mask_metrics_are_empty(self):
        result = execute_run(self.cube, 'erx', {'buffer': 10, 'dims': 4})
        record = result.record
        self.assertIsNone(record.auc)
        self.assertIsNone(result.roc)
        self.assertEqual((record.lines, record.pixels, record.bands), (80, 16, 4))
        self.assertEqual(record.warmup_lines, 10)
        self.assertGreater(record.lps, 0)
        self.assertEqual(record.config['direction'], FORWARD)

    def test_planted_pixels_are_found(self):
        for name in ('erx', 'rx-baseline', 'rt-ck-rxd', 'rx-bil', 'lbl-ad'):
            with self.subTest(detector=name):
                options = {'buffer': 10, 'no_srp': True, 'components': 4}
                result = execute_run(self.cube, name, options, mask=self.mask, direction=FLIPPED)
                self.assertGreater(result.record.auc, 0.9)
                self.assertEqual(result.record.direction, FLIPPED)

    def test_threshold_counts_detections_outside_warmup(self):
        result = execute_run(self.cube, 'rt-ck-rxd', {'buffer': 10}, threshold=3.0)
        expected = sum(int((line.norm_scores >= 3.0).sum())
                       for line in result.scored_lines if line.scored and not line.warmup)
        self.assertEqual(result.record.detected, expected)
        self.assertEqual(result.record.config['threshold'], 3.0)
        self.assertGreater(expected, 0)

    def test_count_skips_unscored_lines(self):
        scored = execute_run(self.cube, 'rx-baseline', {'buffer': 9}).scored_lines
        count_detections(scored, 0.0)
        self.assertTrue(all(line.decisions is None for line in scored if not line.scored))

    def test_mask_must_match_cube(self):
        with self.assertRaises(ShapeMismatchError):
            execute_run(self.cube, 'erx', {'buffer': 10}, mask=GroundTruthMask(np.zeros((5, 5))))


class RunManyTests(SimpleTestCase):
    def setUp(self):
        self.cube, self.mask = planted_cube(71)

    def test_threads_return_serial_results(self):
        kwargs = dict(options={'buffer': 10, 'dims': 3}, seeds=(0, 1, 2), mask=self.mask)
        serial = run_many(self.cube, ['erx', 'rx-bil'], **kwargs)
        threaded = run_many(self.cube, ['erx', 'rx-bil'], workers=3, **kwargs)
        self.assertEqual(len(serial), 2 * 2 * 3)
        for a, b in zip(serial, threaded):
            self.assertEqual((a.record.detector, a.record.direction, a.record.seed),
                             (b.record.detector, b.record.direction, b.record.seed))
            self.assertEqual(a.record.auc, b.record.auc)

    def test_scored_lines_are_dropped_unless_kept(self):
        results = run_many(self.cube, ['erx'], {'buffer': 10}, directions=FORWARD)
        self.assertEqual(results[0].scored_lines, [])
        kept = run_many(self.cube, ['erx'], {'buffer': 10}, directions=FORWARD, keep_lines=True)
        self.assertEqual(len(kept[0].scored_lines), 80)

    def test_mean_curves_per_detector_and_direction(self):
        results = run_many(self.cube, ['erx'], {'buffer': 10}, seeds=(0, 1), mask=self.mask)
        curves = mean_curves(results)
        self.assertEqual(set(curves), {('erx', FORWARD), ('erx', FLIPPED)})
        grid, mean, sd = curves[('erx', FORWARD)]
        self.assertEqual(grid.shape, mean.shape)
        self.assertTrue(np.all(sd >= 0))

    def test_expand_directions(self):
        self.assertEqual(expand_directions('both'), [FORWARD, FLIPPED])
        self.assertEqual(expand_directions(FLIPPED), [FLIPPED])
        with self.assertRaises(ConfigurationError):
            expand_directions('sideways')


class ThroughputTests(SimpleTestCase):
    def test_single_repeat_has_no_spread(self):
        report = measure_throughput('erx', pixels=20, bands=6, lines=40, repeats=1,
                                    options={'buffer': 5, 'dims': 3})
        self.assertEqual(report.lps_sd, 0.0)
        self.assertGreater(report.lps_mean, 0)
        self.assertEqual((report.pixels, report.bands, report.lines), (20, 6, 40))

    def test_invalid_repeats_and_buffer(self):
        with self.assertRaises(ConfigurationError):
            measure_throughput('erx', 20, 6, 40, repeats=0)
        with self.assertRaises(ConfigurationError):
            measure_throughput('erx', 20, 6, 40, options={'buffer': 40})

    def test_benchmark_stream_cycles_a_bounded_pool(self):
        lines = benchmark_lines(pixels=4, lines=300, bands=2, seed=0)
        self.assertEqual([line.index for line in lines[:3]], [0, 1, 2])
        self.assertEqual(len(lines), 300)
        np.testing.assert_array_equal(lines[256].pixels, lines[0].pixels)

    def test_sweep_points(self):
        reports = run_sweep('pixels', ['rx-baseline'], lines=20, repeats=1,
                            options={'buffer': 5}, pixels_list=[60, 80])
        self.assertEqual([(r.pixels, r.bands) for r in reports],
                         [(60, settings.BENCHMARK['PIXEL_SWEEP_BANDS']),
                          (80, settings.BENCHMARK['PIXEL_SWEEP_BANDS'])])
        with self.assertRaises(ConfigurationError):
            run_sweep('diagonal', ['erx'], lines=20, repeats=1)


class FormTests(SimpleTestCase):
    def options(self, **overrides):
        values = dict(detector=['erx'], alpha=0.1, dims=5, buffer=99, epsilon=1e-5, seeds=5,
                      first_seed=None, directions='both', eta=0.5, chunk=32, components=3,
                      score_field='norm', workers=1)
        values.update(overrides)
        return values

    def test_cleaned_defaults(self):
        data = validated(DetectorOptionsForm, self.options())
        self.assertEqual(data['first_seed'], 0)
        self.assertFalse(data['no_srp'])
        self.assertIsNone(data['threshold'])

    def test_invalid_values_name_the_field(self):
        for field, value in (('alpha', 0.0), ('epsilon', 0.0), ('eta', 1.5), ('workers', 0),
                             ('detector', ['rx-nope'])):
            with self.subTest(field=field):
                with self.assertRaisesMessage(ConfigurationError, field):
                    validated(DetectorOptionsForm, self.options(**{field: value}))

    def test_bench_buffer_shorter_than_stream(self):
        options = dict(detector=['erx'], sweep='bands', lines=50, repeats=1, buffer=50, seed=0)
        with self.assertRaises(ConfigurationError):
            validated(BenchOptionsForm, options)

    def test_number_lists(self):
        self.assertEqual(parse_number_list('1, 3,5', int), [1, 3, 5])
        self.assertEqual(parse_number_list(''), [])
        with self.assertRaises(ConfigurationError):
            parse_number_list('1,two')
