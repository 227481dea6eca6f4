from pathlib import Path

from django.conf import settings

from anomaly_app.core import GroundTruthMask, flip_cube
from anomaly_app.datagen import SyntheticSpec, gen_class_switch_cube, gen_random_cube, gen_synthetic
from anomaly_app.exceptions import ConfigurationError
from anomaly_app.formats import import_bil, write_cube, write_mask
from anomaly_app.forms import SyntheticSpecForm, validated

from ._base import LinescanCommand


class Command(LinescanCommand):
    help = 'Generate a synthetic, random or class-switch cube, or import a raw interleaved image'

    def add_arguments(self, parser):
        parser.add_argument('--kind', choices=['synthetic', 'random', 'class-switch'],
                            default='synthetic')
        parser.add_argument('--from-bil', dest='from_bil', help='Raw interleaved image to import')
        parser.add_argument('--bil-header', dest='bil_header', help='ENVI-style header of --from-bil')
        parser.add_argument('--lines', type=int, default=2400)
        parser.add_argument('--pixels', type=int, default=600)
        parser.add_argument('--bands', type=int, default=90)
        parser.add_argument('--class-regions', type=int, default=6,
                            help='Along-track background regions, cycling through the classes')
        parser.add_argument('--transition-width', type=int, default=20)
        parser.add_argument('--target-columns', type=int, default=24)
        parser.add_argument('--target-size', type=int, default=16)
        parser.add_argument('--size-cycle', type=int, default=6,
                            help='Columns after which target sizes restart from --target-size')
        parser.add_argument('--mixing-fractions', default='0.1,0.2,0.3,0.5')
        parser.add_argument('--target-repeats', type=int, default=3,
                            help='Across-track repetitions of the mixing-fraction rows')
        parser.add_argument('--noise-sigma', type=float, default=0.02)
        parser.add_argument('--brightness-sigma', type=float, default=0.05)
        parser.add_argument('--switch-line', type=int, default=None,
                            help='Line where the class-switch background changes (default: half way)')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--name', default=None)
        parser.add_argument('--flipped', action='store_true', help='Also write the along-track reversed cube')
        parser.add_argument('--out', default=settings.DETECTION['OUTPUT_DIR'])

    def run_command(self, **options):
        out = Path(options['out'])
        kind = options['kind']
        mask = None

        if options['from_bil']:
            if not options['bil_header']:
                raise ConfigurationError('--from-bil needs --bil-header')
            cube = import_bil(options['from_bil'], options['bil_header'], options['name'])
        elif kind == 'synthetic':
            data = validated(SyntheticSpecForm, {
                'lines': options['lines'],
                'pixels': options['pixels'],
                'bands': options['bands'],
                'class_regions': options['class_regions'],
                'transition_width': options['transition_width'],
                'target_columns': options['target_columns'],
                'target_base_size': options['target_size'],
                'size_cycle': options['size_cycle'],
                'mixing_fractions': options['mixing_fractions'],
                'target_repeats': options['target_repeats'],
                'noise_sigma': options['noise_sigma'],
                'brightness_sigma': options['brightness_sigma'],
                'seed': options['seed'],
                'name': options['name'] or 'synthetic',
            })
            cube, mask = gen_synthetic(SyntheticSpec(**data))
        elif kind == 'random':
            cube = gen_random_cube(options['pixels'], options['lines'], options['bands'],
                                   options['seed'])
        else:
            before = options['switch_line'] if options['switch_line'] is not None else options['lines'] // 2
            if not 0 < before < options['lines']:
                raise ConfigurationError(f"--switch-line must lie inside the {options['lines']} lines")
            cube = gen_class_switch_cube(options['pixels'], before, options['lines'] - before,
                                         options['bands'], seed=options['seed'])

        if options['name'] and cube.name != options['name']:
            cube = type(cube)(cube.data, name=options['name'])

        outputs = [(cube, mask)]
        if options['flipped']:
            flipped_mask = GroundTruthMask(mask.data[::-1]) if mask is not None else None
            outputs.append((flip_cube(cube), flipped_mask))

        for item, item_mask in outputs:
            path = write_cube(out / f"{item.name}.hadc", item)
            self.stdout.write(self.style.SUCCESS(f"Wrote {item} to {path}"))
            if item_mask is not None:
                mask_path = write_mask(out / f"{item.name}_gt.hadc", item_mask, name=f"{item.name}_gt")
                self.stdout.write(self.style.SUCCESS(
                    f"Wrote mask with {item_mask.anomaly_count} anomalous pixels to {mask_path}"))
