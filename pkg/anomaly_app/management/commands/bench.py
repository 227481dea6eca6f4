from pathlib import Path

from django.conf import settings

from anomaly_app.formats import write_throughput_csv
from anomaly_app.forms import BenchOptionsForm, parse_number_list, validated
from anomaly_app.models import ThroughputRecord
from anomaly_app.runner import run_sweep

from ._base import LinescanCommand


class Command(LinescanCommand):
    help = 'Measure lines per second over band and pixel sweeps of random cubes'

    def add_arguments(self, parser):
        bench = settings.BENCHMARK
        parser.add_argument('--sweep', choices=['bands', 'pixels', 'both'], default='both')
        parser.add_argument('--detectors', default='erx,rx-baseline')
        parser.add_argument('--lines', type=int, default=bench['LINES'])
        parser.add_argument('--repeats', type=int, default=bench['REPEATS'])
        parser.add_argument('--bands-list', default=None,
                            help='Comma list of band counts (default 10..200 step 10)')
        parser.add_argument('--pixels-list', default=None,
                            help='Comma list of pixel counts (default 100..1500 step 100)')
        parser.add_argument('--buffer', type=int, default=settings.DETECTION['BUFFER_LEN'])
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--no-save', action='store_true')
        parser.add_argument('--out', default=settings.DETECTION['OUTPUT_DIR'])

    def run_command(self, **options):
        data = validated(BenchOptionsForm, {
            'detector': [name.strip() for name in options['detectors'].split(',') if name.strip()],
            'sweep': options['sweep'],
            'lines': options['lines'],
            'repeats': options['repeats'],
            'buffer': options['buffer'],
            'seed': options['seed'],
        })
        reports = run_sweep(
            data['sweep'], data['detector'], data['lines'], data['repeats'],
            options={'buffer': data['buffer']},
            bands_list=parse_number_list(options['bands_list'], int) or None,
            pixels_list=parse_number_list(options['pixels_list'], int) or None,
            seed=data['seed'],
        )

        for report in reports:
            self.stdout.write(
                f"{report.detector} {report.pixels} px x {report.bands} bands: "
                f"{report.lps_mean:.1f} ± {report.lps_sd:.1f} LPS"
            )
            if not options['no_save']:
                ThroughputRecord.objects.create(
                    detector=report.detector,
                    pixels=report.pixels,
                    bands=report.bands,
                    lines=report.lines,
                    repeats=report.repeats,
                    lps_mean=report.lps_mean,
                    lps_sd=report.lps_sd,
                    host=report.host[:200],
                )

        path = write_throughput_csv(Path(options['out']) / 'throughput.csv', reports)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(reports)} throughput rows to {path}"))
