from pathlib import Path

from django.conf import settings

from anomaly_app.core import DIRECTIONS, FORWARD, ScoredLine, StreamConfig
from anomaly_app.exceptions import ConfigurationError, ShapeMismatchError
from anomaly_app.formats import (
    export_results_xlsx,
    read_heatmap,
    read_mask,
    write_roc_csv,
    write_scores_csv,
)
from anomaly_app.metrics import evaluate_run
from anomaly_app.models import DetectionRun

from ._base import LinescanCommand


def heatmap_lines(heat, direction, warmup_lines, trailing_lines):
    """ScoredLines in stream order from a native-order heatmap"""
    lines = heat.shape[0]
    rows = heat if direction == FORWARD else heat[::-1]
    scored = []
    for index, row in enumerate(rows):
        values = row.astype('float64')
        excluded = index < warmup_lines or index >= lines - trailing_lines
        scored.append(ScoredLine(index=index, raw_scores=values, norm_scores=values,
                                 warmup=excluded))
    return scored


class Command(LinescanCommand):
    help = 'Evaluate a score heatmap against a mask, or summarize stored runs'

    def add_arguments(self, parser):
        parser.add_argument('--scores', help='HADC score heatmap written by run --heatmap')
        parser.add_argument('--mask', help='HADC ground-truth mask')
        parser.add_argument('--direction', choices=DIRECTIONS, default=FORWARD,
                            help='Stream direction the heatmap was produced with')
        parser.add_argument('--warmup-lines', type=int, default=0)
        parser.add_argument('--trailing-lines', type=int, default=0)
        parser.add_argument('--summary', action='store_true',
                            help='Write results.csv and results.xlsx from the stored runs')
        parser.add_argument('--out', default=settings.DETECTION['OUTPUT_DIR'])

    def run_command(self, **options):
        out = Path(options['out'])
        if options['summary']:
            return self.summarize_runs(out)
        if not options['scores'] or not options['mask']:
            raise ConfigurationError('--scores and --mask are required unless --summary is given')
        if options['warmup_lines'] < 0 or options['trailing_lines'] < 0:
            raise ConfigurationError('warmup and trailing line counts must be >= 0')

        heat, name = read_heatmap(options['scores'])
        mask = read_mask(options['mask'])
        if mask.shape != heat.shape:
            raise ShapeMismatchError(f"mask {mask.shape} does not match heatmap {heat.shape}")

        scored = heatmap_lines(heat, options['direction'], options['warmup_lines'],
                               options['trailing_lines'])
        roc, _ = evaluate_run(scored, mask, StreamConfig(direction=options['direction']),
                              detector='heatmap', dataset=name)
        path = write_roc_csv(out / f"roc_{name}.csv", roc)
        self.stdout.write(f"AUC {roc.auc:.4f}  AUC_TD {roc.auc_td:.4f}  AUC_BS {roc.auc_bs:.4f}")
        self.stdout.write(self.style.SUCCESS(f"Wrote ROC with {roc.fpr.size} points to {path}"))

    def summarize_runs(self, out):
        runs = list(DetectionRun.objects.all())
        if not runs:
            self.stdout.write(self.style.WARNING('No stored runs to summarize'))
            return
        csv_path = write_scores_csv(out / 'results.csv', runs)
        xlsx_path = export_results_xlsx(out / 'results.xlsx', runs)
        self.stdout.write(self.style.SUCCESS(
            f"Summarized {len(runs)} runs to {csv_path} and {xlsx_path}"))
