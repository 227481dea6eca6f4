"""
Run orchestration behind the management commands: building detectors from
options, timing a pass over a stream, repeating it across seeds and
directions, and the throughput sweeps.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from django.conf import settings

from .core import DIRECTIONS, SpectralLine, StreamConfig, stream_cube
from .datagen import gen_random_cube
from .erx import ErxConfig, ErxDetector, apply_threshold
from .exceptions import ConfigurationError
from .formats import host_label
from .metrics import RocSummary, RunRecord, average_roc, evaluate_run
from .reference_detectors import LblAdDetector, RtCkRxdDetector, RxBaselineDetector, RxBilDetector

logger = logging.getLogger(__name__)

DETECTORS = ('erx', 'rx-baseline', 'rt-ck-rxd', 'rx-bil', 'lbl-ad')

# distinct random lines generated per throughput run; the stream cycles through them
BENCH_POOL_LINES = 256


def detector_defaults():
    """Option values taken from settings.DETECTION"""
    defaults = settings.DETECTION
    return {
        'alpha': defaults['ERX_ALPHA'],
        'dims': defaults['ERX_DIMS'],
        'buffer': defaults['BUFFER_LEN'],
        'epsilon': defaults['ERX_EPSILON'],
        'no_srp': False,
        'incremental': False,
        'eta': defaults['RXBIL_ETA'],
        'chunk': defaults['RXBIL_CHUNK'],
        'components': defaults['LBLAD_COMPONENTS'],
        'adaptive_exclude': False,
        'exclude_score': defaults['LBLAD_EXCLUDE_SCORE'],
        'max_iter': defaults['POWER_MAX_ITER'],
    }


def resolve_options(options=None):
    """Defaults overlaid with every option that is not None"""
    resolved = detector_defaults()
    resolved.update({key: value for key, value in (options or {}).items() if value is not None})
    return resolved


def build_detector(name, bands, seed=0, options=None):
    opts = resolve_options(options)
    if name == 'erx':
        cfg = ErxConfig(
            d=int(opts['dims']),
            alpha=float(opts['alpha']),
            buffer_len=int(opts['buffer']),
            epsilon=float(opts['epsilon']),
            seed=int(seed),
            no_srp=bool(opts['no_srp']),
            use_incremental=bool(opts['incremental']),
        )
        return ErxDetector(cfg, bands)
    if name == 'rx-baseline':
        return RxBaselineDetector(int(opts['buffer']), float(opts['epsilon']))
    if name == 'rt-ck-rxd':
        return RtCkRxdDetector(int(opts['buffer']), float(opts['epsilon']))
    if name == 'rx-bil':
        return RxBilDetector(int(opts['buffer']), float(opts['eta']), int(seed),
                             int(opts['chunk']), float(opts['epsilon']))
    if name == 'lbl-ad':
        if int(opts['components']) > bands:
            raise ConfigurationError(
                f"lbl-ad needs components <= bands, got {opts['components']} > {bands}")
        return LblAdDetector(int(opts['buffer']), int(opts['components']),
                             bool(opts['adaptive_exclude']), float(opts['exclude_score']),
                             int(opts['max_iter']))
    raise ConfigurationError(f"unknown detector {name!r}; choose from {', '.join(DETECTORS)}")


@dataclass
class RunResult:
    record: RunRecord
    roc: Optional[RocSummary] = None
    scored_lines: List = field(default_factory=list)


def timed_pass(detector, lines):
    """
    Feed every line through the detector.

    Returns the scored lines and the lines-per-second rate measured from the
    first line fed to the last ScoredLine produced.
    """
    start = time.perf_counter()
    scored = list(detector.run(lines))
    elapsed = max(time.perf_counter() - start, 1e-9)
    return scored, len(lines) / elapsed


def count_detections(scored_lines, threshold):
    """Set decisions on every scored line; return the detected count outside warmup"""
    detected = 0
    for line in scored_lines:
        if not line.scored:
            continue
        line.decisions = apply_threshold(line.norm_scores, threshold)
        if not line.warmup:
            detected += int(line.decisions.sum())
    return detected


def execute_run(cube, detector_name, options=None, seed=0, direction='forward', mask=None,
                threshold=None, score_field='norm'):
    """One detector pass over one stream, evaluated against the mask when there is one"""
    opts = resolve_options(options)
    cfg = StreamConfig(direction=direction, buffer_len=int(opts['buffer']))
    if mask is not None:
        mask.check_against(cube)
    detector = build_detector(detector_name, cube.bands, seed, opts)

    lines = list(stream_cube(cube, cfg))
    scored, lps = timed_pass(detector, lines)
    if len(scored) != cube.lines:
        raise ConfigurationError(
            f"{detector_name} emitted {len(scored)} lines for a {cube.lines}-line stream")

    detected = count_detections(scored, threshold) if threshold is not None else None
    config = detector.config_snapshot()
    config.update({'direction': direction, 'score_field': score_field})
    if threshold is not None:
        config['threshold'] = threshold

    roc = None
    if mask is not None:
        roc, record = evaluate_run(scored, mask, cfg, detector.name, cube.name, seed, lps,
                                   score_field, config)
    else:
        record = RunRecord(
            detector=detector.name, dataset=cube.name, direction=direction, seed=seed,
            auc=None, auc_td=None, auc_bs=None, lps=lps,
            warmup_lines=sum(1 for line in scored if line.warmup),
            lines=cube.lines, pixels=cube.pixels_per_line, config=config,
        )
    record.bands = cube.bands
    record.detected = detected
    logger.info("%s on %s (%s, seed %d): %.1f LPS", detector.name, cube.name, direction, seed, lps)
    return RunResult(record=record, roc=roc, scored_lines=scored)


def expand_directions(directions):
    if directions == 'both':
        return list(DIRECTIONS)
    if directions not in DIRECTIONS:
        raise ConfigurationError(f"directions must be forward, flipped or both, got {directions!r}")
    return [directions]


def run_many(cube, detectors, options=None, seeds=(0,), directions='both', mask=None,
             threshold=None, score_field='norm', workers=1, keep_lines=False):
    """
    Every (detector, direction, seed) combination over one cube.

    Results come back in submission order. With workers > 1 runs execute on
    a thread pool, one detector state per run.
    """
    jobs = [(name, direction, seed)
            for name in detectors
            for direction in expand_directions(directions)
            for seed in seeds]

    def work(job):
        name, direction, seed = job
        result = execute_run(cube, name, options, seed, direction, mask, threshold, score_field)
        if not keep_lines:
            result.scored_lines = []
        return result

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, jobs))
    return [work(job) for job in jobs]


def mean_curves(results):
    """average_roc per (detector, direction) over the runs that carry a curve"""
    groups = {}
    for result in results:
        if result.roc is not None:
            key = (result.record.detector, result.record.direction)
            groups.setdefault(key, []).append(result.roc)
    return {key: average_roc(curves) for key, curves in groups.items()}


@dataclass
class ThroughputReport:
    detector: str
    pixels: int
    bands: int
    lines: int
    repeats: int
    lps_mean: float
    lps_sd: float
    host: str = ''


def benchmark_lines(pixels, lines, bands, seed):
    """`lines` SpectralLines cycling through a pool of random lines"""
    pool = gen_random_cube(pixels, min(lines, BENCH_POOL_LINES), bands, seed)
    return [SpectralLine(index=i, pixels=pool.data[i % pool.lines]) for i in range(lines)]


def measure_throughput(detector_name, pixels, bands, lines, repeats=1, options=None, seed=0):
    """Mean and population SD of LPS over `repeats` passes on random data"""
    if repeats < 1:
        raise ConfigurationError(f"repeats must be >= 1, got {repeats}")
    opts = resolve_options(options)
    if int(opts['buffer']) >= lines:
        raise ConfigurationError(f"buffer {opts['buffer']} must be smaller than {lines} lines")
    rates = []
    for r in range(repeats):
        stream = benchmark_lines(pixels, lines, bands, seed + r)
        detector = build_detector(detector_name, bands, seed + r, opts)
        _, lps = timed_pass(detector, stream)
        rates.append(lps)
    rates = np.asarray(rates)
    report = ThroughputReport(
        detector=detector_name, pixels=pixels, bands=bands, lines=lines, repeats=repeats,
        lps_mean=float(rates.mean()), lps_sd=float(rates.std()), host=host_label(),
    )
    logger.info("%s at %d px x %d bands: %.1f ± %.1f LPS", detector_name, pixels, bands,
                report.lps_mean, report.lps_sd)
    return report


def run_sweep(sweep, detectors, lines, repeats, options=None, bands_list=None, pixels_list=None,
              seed=0):
    """
    Band sweep at a fixed pixel count and/or pixel sweep at a fixed band
    count, one ThroughputReport per (detector, point).
    """
    bench = settings.BENCHMARK
    points = []
    if sweep in ('bands', 'both'):
        points += [(bench['BAND_SWEEP_PIXELS'], b) for b in (bands_list or bench['BAND_SWEEP'])]
    if sweep in ('pixels', 'both'):
        points += [(p, bench['PIXEL_SWEEP_BANDS']) for p in (pixels_list or bench['PIXEL_SWEEP'])]
    if not points:
        raise ConfigurationError(f"sweep must be bands, pixels or both, got {sweep!r}")
    return [measure_throughput(name, pixels, bands, lines, repeats, options, seed)
            for name in detectors
            for pixels, bands in points]
