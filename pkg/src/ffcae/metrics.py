"""Confusion-matrix accounting and the binary change-detection score suite.

Changed pixels are the positive class. The detection-rate chain (FNR, TNR,
DR) follows the published formulas of the benchmark verbatim, including an
FNR denominator of FN+TN; the textbook miss rate FN/(FN+TP) is available
separately for diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .analysis import ChangeMap
from .cube import GroundTruth

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "confusion",
    "compute_metrics",
    "textbook_miss_rate",
    "METRIC_COLUMNS",
]

METRIC_COLUMNS = (
    "oa",
    "kappa",
    "f_score",
    "precision",
    "recall",
    "pwc",
    "fnr",
    "tnr",
    "dr",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Pixel counts with changed as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            count = getattr(self, name)
            if not isinstance(count, (int, np.integer)) or count < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {count!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricReport:
    """The full score suite for one change map against ground truth.

    `pwc` is a percentage in [0, 100]; everything else lives in [0, 1]
    except `kappa`, which can reach -1.
    """

    oa: float
    kappa: float
    f_score: float
    precision: float
    recall: float
    pwc: float
    fnr: float
    tnr: float
    dr: float

    def to_csv(self) -> str:
        """Header plus one row, every value fixed to 4 decimal places."""
        row = ",".join(f"{getattr(self, name):.4f}" for name in METRIC_COLUMNS)
        return ",".join(METRIC_COLUMNS) + "\n" + row + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def confusion(change_map: ChangeMap, gt: GroundTruth) -> ConfusionMatrix:
    """Count agreement between a change map and the ground truth."""
    pred = change_map.labels
    actual = gt.labels
    if pred.shape != actual.shape:
        raise ValueError(
            f"dimension mismatch: map {pred.shape} vs ground truth {actual.shape}"
        )
    pred_c = pred == 1
    actual_c = actual == 1
    return ConfusionMatrix(
        tp=int(np.count_nonzero(pred_c & actual_c)),
        fp=int(np.count_nonzero(pred_c & ~actual_c)),
        tn=int(np.count_nonzero(~pred_c & ~actual_c)),
        fn=int(np.count_nonzero(~pred_c & actual_c)),
    )


def compute_metrics(cm: ConfusionMatrix) -> MetricReport:
    """Evaluate the whole suite from raw counts.

    Degenerate denominators resolve so that a correct prediction keeps a
    perfect score: empty positive prediction gives precision 0, an
    all-unchanged truth gives recall 1, chance agreement of 1 gives kappa
    1 only for a perfect map, FNR falls to 0 and TNR rises to 1 when
    their denominators vanish.
    """
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    n = cm.total
    if n == 0:
        raise ValueError("empty confusion matrix")

    oa = (tp + tn) / n
    ca_u = (tp + fp) * (tp + fn) / n**2
    ca_c = (tn + fn) * (tn + fp) / n**2
    ca = ca_u + ca_c
    if ca == 1.0:
        kappa = 1.0 if oa == 1.0 else 0.0
    else:
        kappa = (oa - ca) / (1.0 - ca)

    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f_score = (
        2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    )

    pwc = 100.0 * (fp + fn) / n
    fnr = fn / (fn + tn) if fn + tn else 0.0
    tnr = tn / (fp + tn) if fp + tn else 1.0
    dr = (1.0 - fnr) * tnr

    return MetricReport(
        oa=oa,
        kappa=kappa,
        f_score=f_score,
        precision=precision,
        recall=recall,
        pwc=pwc,
        fnr=fnr,
        tnr=tnr,
        dr=dr,
    )


def textbook_miss_rate(cm: ConfusionMatrix) -> float:
    """Conventional miss rate FN/(FN+TP); zero when there are no positives.

    Kept apart from the report because the suite's `fnr` intentionally
    uses an FN+TN denominator instead.
    """
    if cm.fn + cm.tp == 0:
        return 0.0
    return cm.fn / (cm.fn + cm.tp)
