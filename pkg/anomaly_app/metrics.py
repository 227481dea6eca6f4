"""
Detection metrics: exact ROC, AUC, and the target-detectability /
background-suppressibility areas, plus per-run evaluation records.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .core import mask_for_stream
from .exceptions import MetricUndefinedError, ShapeMismatchError

logger = logging.getLogger(__name__)

SCORE_FIELDS = ('norm', 'raw')


@dataclass
class RocSummary:
    """
    Exact ROC samples, thresholds descending with +inf / -inf sentinels.

    The area fields are filled by summarize(); roc_curve leaves them None.
    """
    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: Optional[float] = None
    auc_td: Optional[float] = None
    auc_bs: Optional[float] = None


@dataclass
class RunRecord:
    detector: str
    dataset: str
    direction: str
    seed: int
    auc: Optional[float]
    auc_td: Optional[float]
    auc_bs: Optional[float]
    lps: float
    warmup_lines: int
    lines: int = 0
    pixels: int = 0
    bands: int = 0
    detected: Optional[int] = None
    config: dict = field(default_factory=dict)

    def as_row(self):
        return asdict(self)


def _check_inputs(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ShapeMismatchError(f"{scores.size} scores for {labels.size} labels")
    if not np.all(np.isfinite(scores)):
        raise MetricUndefinedError("scores must be finite")
    positives = int(labels.sum())
    if positives == 0 or positives == labels.size:
        raise MetricUndefinedError("labels must contain both anomalies and background")
    return scores, labels


def roc_curve(scores, labels):
    """TPR and FPR at every distinct score, predicting anomaly when score >= threshold."""
    scores, labels = _check_inputs(scores, labels)
    order = np.argsort(-scores, kind='mergesort')
    sorted_scores = scores[order]
    sorted_labels = labels[order]

    # last position of each run of equal scores
    distinct = np.flatnonzero(np.diff(sorted_scores))
    ends = np.r_[distinct, sorted_scores.size - 1]
    tp = np.cumsum(sorted_labels)[ends]
    fp = (ends + 1) - tp

    P = labels.sum()
    N = labels.size - P
    thresholds = np.r_[np.inf, sorted_scores[ends], -np.inf]
    tpr = np.r_[0.0, tp / P, 1.0]
    fpr = np.r_[0.0, fp / N, 1.0]
    return RocSummary(thresholds=thresholds, tpr=tpr, fpr=fpr)


def auc(roc):
    """Trapezoidal area under TPR over FPR"""
    return float(trapezoid(roc.tpr, roc.fpr))


def auc_td_bs(scores, labels):
    """
    Target detectability and background suppressibility areas.

    Scores are min-max normalized to [0, 1]; the area under TPR(tau) for tau
    in [0, 1] is then exactly the mean normalized score of the anomalies, and
    likewise FPR(tau) for the background.
    """
    scores, labels = _check_inputs(scores, labels)
    low, high = scores.min(), scores.max()
    if high - low <= 0:
        raise MetricUndefinedError("constant scores cannot be min-max normalized")
    normalized = (scores - low) / (high - low)
    area = auc(roc_curve(scores, labels))
    auc_tpr_tau = float(normalized[labels].mean())
    auc_fpr_tau = float(normalized[~labels].mean())
    return (area + auc_tpr_tau) / 2.0, (area - auc_fpr_tau + 1.0) / 2.0


def summarize(scores, labels):
    """Full RocSummary: curve plus AUC, AUC_TD and AUC_BS"""
    roc = roc_curve(scores, labels)
    roc.auc = auc(roc)
    roc.auc_td, roc.auc_bs = auc_td_bs(scores, labels)
    return roc


def collect_scores(scored_lines, mask, score_field='norm'):
    """Pool scores and labels of every non-warmup line."""
    if score_field not in SCORE_FIELDS:
        raise ValueError(f"score_field must be one of {SCORE_FIELDS}")
    scores, labels = [], []
    for line in scored_lines:
        if line.warmup:
            continue
        if not 0 <= line.index < mask.shape[0] or line.p != mask.shape[1]:
            raise ShapeMismatchError(
                f"scored line {line.index} with {line.p} pixels does not fit mask {mask.shape}"
            )
        scores.append(line.norm_scores if score_field == 'norm' else line.raw_scores)
        labels.append(mask.data[line.index])
    if not scores:
        raise MetricUndefinedError("every line is warmup; nothing to evaluate")
    return np.concatenate(scores), np.concatenate(labels)


def evaluate_run(scored_lines, mask, cfg, detector='', dataset='', seed=0, lps=0.0,
                 score_field='norm', config=None):
    """
    Evaluate one completed run against ground truth.

    The mask is in native line order; it is aligned to the stream direction
    here. Returns (RocSummary, RunRecord).
    """
    scored_lines = list(scored_lines)
    aligned = mask_for_stream(mask, cfg)
    scores, labels = collect_scores(scored_lines, aligned, score_field)
    roc = summarize(scores, labels)
    warmup = sum(1 for line in scored_lines if line.warmup)
    detected = None
    if any(line.decisions is not None for line in scored_lines):
        detected = int(sum(line.decisions.sum() for line in scored_lines
                           if line.decisions is not None and not line.warmup))
    record = RunRecord(
        detector=detector, dataset=dataset, direction=cfg.direction, seed=seed,
        auc=roc.auc, auc_td=roc.auc_td, auc_bs=roc.auc_bs, lps=lps,
        warmup_lines=warmup, lines=mask.shape[0], pixels=mask.shape[1],
        detected=detected, config=dict(config or {}),
    )
    logger.info("%s on %s (%s, seed %d): AUC %.4f", detector, dataset, cfg.direction,
                seed, roc.auc)
    return roc, record


def average_roc(curves, grid_points=101):
    """Mean and SD of TPR over a common FPR grid, across repeated runs."""
    if not curves:
        raise MetricUndefinedError("no curves to average")
    grid = np.linspace(0.0, 1.0, grid_points)
    stacked = []
    for roc in curves:
        # several points can share an FPR; take the highest TPR reached there
        fpr, first = np.unique(roc.fpr[::-1], return_index=True)
        tpr = roc.tpr[::-1][first]
        stacked.append(np.interp(grid, fpr, tpr))
    stacked = np.vstack(stacked)
    return grid, stacked.mean(axis=0), stacked.std(axis=0)


def aggregate_records(records):
    """
    Group run records by (detector, dataset, direction) and return
    (key, mean dict, sd dict) tuples for auc, auc_td, auc_bs and lps.
    """
    groups = {}
    for record in records:
        groups.setdefault((record.detector, record.dataset, record.direction), []).append(record)

    summary = []
    for key, members in groups.items():
        means, sds = {}, {}
        for name in ('auc', 'auc_td', 'auc_bs', 'lps'):
            values = np.array([getattr(r, name) for r in members
                               if getattr(r, name) is not None], dtype=np.float64)
            means[name] = float(values.mean()) if values.size else None
            sds[name] = float(values.std()) if values.size else None
        means['warmup_lines'] = members[0].warmup_lines
        summary.append((key, means, sds))
    return summary
