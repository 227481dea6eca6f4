from pathlib import Path

from anomaly_app.formats import read_cube, read_mask, write_scores_csv
from anomaly_app.forms import parse_number_list
from anomaly_app.models import DetectionRun
from anomaly_app.runner import run_many

from ._base import LinescanCommand
from .run import add_detector_arguments, detector_options


def ablation_settings(dims_list, alphas, no_srp=True, incremental=True):
    """(label, ERX option overrides) for every setting of the two sweeps"""
    settings_ = [(f"d={d}", {'dims': d}) for d in dims_list]
    if no_srp:
        settings_.append(('no-srp', {'no_srp': True}))
    settings_ += [(f"alpha={alpha:g}", {'alpha': alpha}) for alpha in alphas]
    if incremental:
        settings_.append(('incremental', {'incremental': True}))
    return settings_


class Command(LinescanCommand):
    help = 'Sweep ERX projected dimensions and momentum, reporting AUC and LPS per setting'

    def add_arguments(self, parser):
        add_detector_arguments(parser)
        parser.add_argument('--dims-list', default='1,3,5,10,20,30,50')
        parser.add_argument('--skip-no-srp', action='store_true',
                            help='Leave the unprojected setting out of the dimension sweep')
        parser.add_argument('--alphas', default='1,0.9,0.5,0.1,0.01,0.001,0.0001')
        parser.add_argument('--skip-incremental', action='store_true',
                            help='Leave the equal-weight setting out of the momentum sweep')
        parser.add_argument('--no-save', action='store_true')

    def run_command(self, **options):
        base = detector_options(options, ['erx'])
        dims_list = parse_number_list(options['dims_list'], int)
        alphas = parse_number_list(options['alphas'], float)
        out = Path(options['out'])

        cube = read_cube(options['cube'])
        mask = read_mask(options['mask'], cube) if options['mask'] else None
        seeds = list(range(base['first_seed'], base['first_seed'] + base['seeds']))

        records = []
        sweep = ablation_settings(dims_list, alphas, no_srp=not options['skip_no_srp'],
                                  incremental=not options['skip_incremental'])
        for label, overrides in sweep:
            # each override goes through the same validation as the run flags
            setting = detector_options({**options, **overrides}, ['erx'])
            run_options = {key: setting[key] for key in (
                'alpha', 'dims', 'buffer', 'epsilon', 'no_srp', 'incremental')}
            results = run_many(cube, ['erx'], run_options, seeds, base['directions'], mask,
                               workers=base['workers'])
            for result in results:
                record = result.record
                record.detector = f"erx {label}"
                records.append(record)
                if not options['no_save']:
                    DetectionRun.from_record(record)
            mean_lps = sum(r.record.lps for r in results) / len(results)
            self.stdout.write(f"{label}: {len(results)} runs, {mean_lps:.1f} LPS")

        path = write_scores_csv(out / 'ablation.csv', records)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(records)} ablation rows to {path}"))
