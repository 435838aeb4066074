"""Cross-dataset method ranking and Tukey HSD significance testing.

Scores for several methods over several datasets and metrics are turned
into fractional ranks (1 = best), averaged per metric across datasets,
and compared pairwise with the Tukey honestly-significant-difference
Q-statistic. The studentized-range critical value is an input, not
something computed here.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "ScoreCube",
    "RankTable",
    "TukeyResult",
    "rank_methods",
    "rank_sse",
    "mse_from_ranks",
    "tukey_hsd",
]

DEFAULT_LOWER_BETTER = ("pwc",)


@dataclass(frozen=True)
class ScoreCube:
    """Complete (method, dataset, metric) score table with orientations."""

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    metrics: tuple[str, ...]
    scores: np.ndarray
    lower_better: frozenset[str]

    def __post_init__(self) -> None:
        expected = (len(self.methods), len(self.datasets), len(self.metrics))
        if self.scores.shape != expected:
            raise ValueError(
                f"score array shape {self.scores.shape} does not match "
                f"{expected} (methods, datasets, metrics)"
            )
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("incomplete cube: non-finite scores present")
        unknown = self.lower_better - set(self.metrics)
        if unknown:
            raise ValueError(f"orientation given for unknown metrics: {sorted(unknown)}")

    @classmethod
    def from_records(
        cls,
        records: list[tuple[str, str, str, float]],
        lower_better: tuple[str, ...] = DEFAULT_LOWER_BETTER,
    ) -> "ScoreCube":
        methods: dict[str, None] = {}
        datasets: dict[str, None] = {}
        metrics: dict[str, None] = {}
        cells: dict[tuple[str, str, str], float] = {}
        for method, dataset, metric, value in records:
            key = (method, dataset, metric)
            if key in cells:
                raise ValueError(f"duplicate score for {key}")
            cells[key] = float(value)
            methods.setdefault(method, None)
            datasets.setdefault(dataset, None)
            metrics.setdefault(metric, None)
        method_names = tuple(methods)
        dataset_names = tuple(datasets)
        metric_names = tuple(metrics)
        scores = np.full(
            (len(method_names), len(dataset_names), len(metric_names)), np.nan
        )
        for (method, dataset, metric), value in cells.items():
            i = method_names.index(method)
            j = dataset_names.index(dataset)
            k = metric_names.index(metric)
            scores[i, j, k] = value
        if np.isnan(scores).any():
            missing = int(np.isnan(scores).sum())
            raise ValueError(f"incomplete cube: {missing} missing cells")
        keep = frozenset(m for m in lower_better if m in metric_names)
        return cls(method_names, dataset_names, metric_names, scores, keep)

    @classmethod
    def from_csv(
        cls,
        source: str | Path,
        lower_better: tuple[str, ...] = DEFAULT_LOWER_BETTER,
    ) -> "ScoreCube":
        """Read rows of method,dataset,metric,value (with that header)."""
        text = Path(source).read_text()
        reader = csv.DictReader(io.StringIO(text))
        required = {"method", "dataset", "metric", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"score CSV must have columns {sorted(required)}")
        records = [
            (row["method"], row["dataset"], row["metric"], float(row["value"]))
            for row in reader
        ]
        return cls.from_records(records, lower_better)


@dataclass(frozen=True)
class RankTable:
    """Average fractional rank per (metric, method); 1 is best."""

    methods: tuple[str, ...]
    metrics: tuple[str, ...]
    avg_rank: np.ndarray

    def __post_init__(self) -> None:
        expected = (len(self.metrics), len(self.methods))
        if self.avg_rank.shape != expected:
            raise ValueError(
                f"rank array shape {self.avg_rank.shape} does not match "
                f"{expected} (metrics, methods)"
            )
        k = len(self.methods)
        if self.avg_rank.size and (
            self.avg_rank.min() < 1.0 or self.avg_rank.max() > k
        ):
            raise ValueError(f"average ranks must lie in [1, {k}]")

    @property
    def method_means(self) -> np.ndarray:
        """Each method's mean rank over all metrics."""
        return self.avg_rank.mean(axis=0)

    def to_csv(self) -> str:
        lines = ["metric," + ",".join(self.methods)]
        for k, metric in enumerate(self.metrics):
            lines.append(metric + "," + ",".join(f"{v:.4f}" for v in self.avg_rank[k]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TukeyResult:
    """Pairwise Q-statistics and their significance against a critical value."""

    methods: tuple[str, ...]
    q: np.ndarray
    q_critical: float
    significant: np.ndarray
    n: int
    mse: float

    def to_csv(self) -> str:
        lines = ["method," + ",".join(self.methods)]
        for i, name in enumerate(self.methods):
            lines.append(name + "," + ",".join(f"{v:.4f}" for v in self.q[i]))
        return "\n".join(lines) + "\n"

    def report(self) -> str:
        """Human-readable pairwise verdicts, one line per method pair."""
        lines = [f"Q_critical = {self.q_critical:.4f} (n={self.n}, MSE={self.mse:.4f})"]
        k = len(self.methods)
        for i in range(k):
            for j in range(i + 1, k):
                verdict = "significant" if self.significant[i, j] else "not significant"
                lines.append(
                    f"{self.methods[i]} vs {self.methods[j]}: "
                    f"Q = {self.q[i, j]:.4f} ({verdict})"
                )
        return "\n".join(lines) + "\n"


def rank_methods(cube: ScoreCube) -> RankTable:
    """Rank methods per dataset and metric, then average over datasets.

    Rank 1 is the best score under the metric's orientation; ties share
    the average of the ranks they span.
    """
    if len(cube.methods) < 2:
        raise ValueError("ranking needs at least 2 methods")
    n_metrics = len(cube.metrics)
    n_datasets = len(cube.datasets)
    avg = np.zeros((n_metrics, len(cube.methods)))
    for k, metric in enumerate(cube.metrics):
        sign = 1.0 if metric in cube.lower_better else -1.0
        per_dataset = np.stack(
            [rankdata(sign * cube.scores[:, j, k]) for j in range(n_datasets)]
        )
        avg[k] = per_dataset.mean(axis=0)
    return RankTable(cube.methods, cube.metrics, avg)


def rank_sse(ranks: RankTable) -> float:
    """Sum of squared deviations of each method's ranks about its own mean."""
    deviations = ranks.avg_rank - ranks.method_means[None, :]
    return float((deviations**2).sum())


def mse_from_ranks(ranks: RankTable, nu: int = 32) -> float:
    """Rank SSE divided by the caller's error degrees of freedom."""
    if len(ranks.methods) < 2 or len(ranks.metrics) < 2:
        raise ValueError("need at least 2 methods and 2 metrics")
    if nu <= 0:
        raise ValueError("degrees of freedom must be positive")
    sse = rank_sse(ranks)
    if sse == 0.0:
        raise ValueError("degenerate table: all methods ranked identically")
    return sse / nu


def tukey_hsd(
    ranks: RankTable, n: int, mse: float, q_critical: float
) -> TukeyResult:
    """Pairwise Q = |mean-rank difference| * sqrt(n / MSE) for all methods."""
    if n < 1:
        raise ValueError("sample count must be at least 1")
    if mse <= 0.0:
        raise ValueError("mse must be positive")
    means = ranks.method_means
    scale = np.sqrt(n / mse)
    q = np.abs(means[:, None] - means[None, :]) * scale
    np.fill_diagonal(q, 0.0)
    significant = q > q_critical
    np.fill_diagonal(significant, False)
    return TukeyResult(
        methods=ranks.methods,
        q=q,
        q_critical=float(q_critical),
        significant=significant,
        n=int(n),
        mse=float(mse),
    )
