import logging
from pathlib import Path

from django.conf import settings

from anomaly_app.formats import (
    read_cube,
    read_mask,
    write_heatmap,
    write_mean_roc_csv,
    write_roc_csv,
    write_scores_csv,
)
from anomaly_app.forms import DetectorOptionsForm, validated
from anomaly_app.models import DetectionRun
from anomaly_app.runner import DETECTORS, mean_curves, run_many

from ._base import LinescanCommand

logger = logging.getLogger(__name__)


def add_detector_arguments(parser):
    """Detector flags shared with the ablate command"""
    defaults = settings.DETECTION
    parser.add_argument('--cube', required=True, help='HADC cube to stream')
    parser.add_argument('--mask', help='HADC ground-truth mask; without it no AUC is computed')
    parser.add_argument('--alpha', type=float, default=defaults['ERX_ALPHA'])
    parser.add_argument('--dims', type=int, default=defaults['ERX_DIMS'])
    parser.add_argument('--buffer', type=int, default=defaults['BUFFER_LEN'])
    parser.add_argument('--epsilon', type=float, default=defaults['ERX_EPSILON'])
    parser.add_argument('--seeds', type=int, default=defaults['SEEDS'])
    parser.add_argument('--first-seed', type=int, default=0)
    parser.add_argument('--directions', choices=['forward', 'flipped', 'both'], default='forward')
    parser.add_argument('--workers', type=int, default=1)
    parser.add_argument('--out', default=defaults['OUTPUT_DIR'])


def detector_options(options, detectors):
    """Validate the command options; returns the cleaned form data"""
    defaults = settings.DETECTION
    return validated(DetectorOptionsForm, {
        'detector': detectors,
        'alpha': options['alpha'],
        'dims': options['dims'],
        'buffer': options['buffer'],
        'epsilon': options['epsilon'],
        'seeds': options['seeds'],
        'first_seed': options['first_seed'],
        'directions': options['directions'],
        'no_srp': options.get('no_srp', False),
        'incremental': options.get('incremental', False),
        'eta': options.get('eta', defaults['RXBIL_ETA']),
        'chunk': options.get('chunk', defaults['RXBIL_CHUNK']),
        'components': options.get('components', defaults['LBLAD_COMPONENTS']),
        'adaptive_exclude': options.get('adaptive_exclude', False),
        'threshold': options.get('threshold'),
        'score_field': options.get('score_field', 'norm'),
        'workers': options['workers'],
    })


class Command(LinescanCommand):
    help = 'Run detectors over a cube for several seeds and directions'

    def add_arguments(self, parser):
        defaults = settings.DETECTION
        parser.add_argument('--detector', default='erx',
                            help=f"One of {', '.join(DETECTORS)}, a comma list, or 'all'")
        add_detector_arguments(parser)
        parser.add_argument('--no-srp', action='store_true', help='ERX without projection')
        parser.add_argument('--incremental', action='store_true',
                            help='ERX with equal-weight statistics instead of the moving average')
        parser.add_argument('--eta', type=float, default=defaults['RXBIL_ETA'])
        parser.add_argument('--chunk', type=int, default=defaults['RXBIL_CHUNK'])
        parser.add_argument('--components', type=int, default=defaults['LBLAD_COMPONENTS'])
        parser.add_argument('--adaptive-exclude', action='store_true')
        parser.add_argument('--threshold', type=float, default=None,
                            help='Normalized-score threshold for per-pixel decisions')
        parser.add_argument('--score-field', choices=['norm', 'raw'], default='norm')
        parser.add_argument('--roc', action='store_true', help='Write one ROC CSV per run')
        parser.add_argument('--heatmap', action='store_true', help='Write one score heatmap per run')
        parser.add_argument('--no-save', action='store_true', help='Do not store runs in the database')

    def run_command(self, **options):
        detectors = list(DETECTORS) if options['detector'] == 'all' else [
            name.strip() for name in options['detector'].split(',') if name.strip()]
        data = detector_options(options, detectors)
        out = Path(options['out'])

        cube = read_cube(options['cube'])
        mask = read_mask(options['mask'], cube) if options['mask'] else None
        seeds = list(range(data['first_seed'], data['first_seed'] + data['seeds']))
        self.stdout.write(f"Streaming {cube} through {', '.join(detectors)}")

        run_options = {key: data[key] for key in (
            'alpha', 'dims', 'buffer', 'epsilon', 'no_srp', 'incremental', 'eta', 'chunk',
            'components', 'adaptive_exclude')}
        results = run_many(
            cube, detectors, run_options, seeds, data['directions'], mask,
            threshold=data['threshold'], score_field=data['score_field'],
            workers=data['workers'], keep_lines=options['heatmap'],
        )

        records = [result.record for result in results]
        for result in results:
            record = result.record
            label = f"{record.detector}_{record.direction}_s{record.seed}"
            line = f"{record.detector} {record.direction} seed {record.seed}: {record.lps:.1f} LPS"
            if record.auc is not None:
                line += f", AUC {record.auc:.4f} (TD {record.auc_td:.4f}, BS {record.auc_bs:.4f})"
            if record.detected is not None:
                line += f", {record.detected} pixels detected"
            self.stdout.write(line)
            if options['roc'] and result.roc is not None:
                write_roc_csv(out / f"roc_{label}.csv", result.roc)
            if options['heatmap']:
                write_heatmap(out / f"heatmap_{label}.hadc", result.scored_lines, cube.lines,
                              cube.pixels_per_line, record.direction, data['score_field'],
                              name=f"{cube.name}-{label}")
            if not options['no_save']:
                DetectionRun.from_record(record)

        if mask is None:
            self.stdout.write(self.style.WARNING('No mask given; AUC columns are empty'))
        for (detector, direction), (grid, tpr_mean, tpr_sd) in mean_curves(results).items():
            write_mean_roc_csv(out / f"mean_roc_{detector}_{direction}.csv", grid, tpr_mean, tpr_sd)

        path = write_scores_csv(out / 'results.csv', records)
        logger.info("%d runs written to %s", len(records), path)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(records)} result rows to {path}"))
