"""Entropy-based feature selection, difference images, and the k-means
changed/unchanged decision.

Feature maps that come out identical for both images carry no change
evidence; the entropy filter drops them. The survivors are differenced
either channel-wise (absolute difference, AD) or as per-pixel spectral
angles (SAM), and a 2-cluster k-means splits the difference image into
changed and unchanged pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import GroundTruth

__all__ = [
    "DifferenceImage",
    "ChangeMap",
    "FeatureSelection",
    "image_entropy",
    "select_feature_maps",
    "diff_ad",
    "diff_sam",
    "kmeans2",
    "decide_change",
    "compute_change_map",
]

ENTROPY_EPS = 1e-6
HIST_BINS = 256


@dataclass
class DifferenceImage:
    """Per-pixel dissimilarity between the two selected feature stacks.

    AD keeps one channel per selected feature map; SAM collapses to a
    single channel of angles in [0, pi]. Zero channels is the sentinel for
    "no discriminative features survived selection".
    """

    values: np.ndarray
    operator: str

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError("difference image must be (H, W, channels)")
        if arr.size and arr.min() < 0.0:
            raise ValueError("difference values must be non-negative")
        if self.operator not in ("ad", "sam"):
            raise ValueError(f"unknown difference operator {self.operator!r}")
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def is_empty(self) -> bool:
        return self.channels == 0


@dataclass
class ChangeMap:
    """Binary change decision: 1 changed, 0 unchanged."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError("change map must be 2-D")
        if not np.isin(np.unique(arr), (0, 1)).all():
            raise ValueError("change map labels must be 0 or 1")
        self.labels = arr.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def changed_fraction(self) -> float:
        return float(self.labels.mean())


@dataclass
class FeatureSelection:
    """Outcome of entropy filtering: surviving channels of both feature maps."""

    selected1: np.ndarray
    selected2: np.ndarray
    kept: list[int]
    entropies: np.ndarray

    @property
    def is_empty(self) -> bool:
        return not self.kept


def image_entropy(values: np.ndarray) -> float:
    """Shannon entropy (bits) of a single-channel map.

    The map is min-max normalized and histogrammed into 256 equal bins; a
    constant map has exactly zero entropy.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("entropy input contains non-finite values")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return 0.0
    scaled = (values - lo) / (hi - lo)
    counts, _ = np.histogram(scaled, bins=HIST_BINS, range=(0.0, 1.0))
    freq = counts[counts > 0] / values.size
    return float(-(freq * np.log2(freq)).sum())


def select_feature_maps(
    dfm1: np.ndarray, dfm2: np.ndarray, entropy_eps: float = ENTROPY_EPS
) -> FeatureSelection:
    """Keep the channels whose difference map carries any entropy.

    A channel identical in both images produces a constant (all-zero)
    difference with zero entropy and is discarded. An empty selection is
    the caller's signal that the pair shows no discriminative features.
    """
    dfm1 = np.asarray(dfm1, dtype=np.float64)
    dfm2 = np.asarray(dfm2, dtype=np.float64)
    if dfm1.shape != dfm2.shape:
        raise ValueError(f"feature map shapes differ: {dfm1.shape} vs {dfm2.shape}")
    entropies = np.array(
        [
            image_entropy(dfm1[:, :, c] - dfm2[:, :, c])
            for c in range(dfm1.shape[2])
        ]
    )
    kept = [int(c) for c in np.nonzero(entropies > entropy_eps)[0]]
    return FeatureSelection(
        selected1=dfm1[:, :, kept],
        selected2=dfm2[:, :, kept],
        kept=kept,
        entropies=entropies,
    )


def diff_ad(sel1: np.ndarray, sel2: np.ndarray) -> DifferenceImage:
    """Channel-wise absolute difference of the selected feature maps."""
    sel1 = np.asarray(sel1, dtype=np.float64)
    sel2 = np.asarray(sel2, dtype=np.float64)
    if sel1.shape != sel2.shape:
        raise ValueError(f"shape mismatch: {sel1.shape} vs {sel2.shape}")
    return DifferenceImage(np.abs(sel1 - sel2), operator="ad")


def diff_sam(sel1: np.ndarray, sel2: np.ndarray) -> DifferenceImage:
    """Per-pixel spectral angle between the two feature vectors.

    The angle is arccos of the clamped cosine similarity. Two zero vectors
    agree (angle 0); exactly one zero vector is maximally undecided
    (angle pi/2).
    """
    sel1 = np.asarray(sel1, dtype=np.float64)
    sel2 = np.asarray(sel2, dtype=np.float64)
    if sel1.shape != sel2.shape:
        raise ValueError(f"shape mismatch: {sel1.shape} vs {sel2.shape}")
    if sel1.shape[2] < 1:
        raise ValueError("spectral angle needs at least one channel")
    dot = np.einsum("ijc,ijc->ij", sel1, sel2)
    n1 = np.linalg.norm(sel1, axis=2)
    n2 = np.linalg.norm(sel2, axis=2)
    denom = n1 * n2
    safe = np.where(denom > 0.0, denom, 1.0)
    cos = np.clip(dot / safe, -1.0, 1.0)
    angle = np.arccos(cos)
    both_zero = (n1 == 0.0) & (n2 == 0.0)
    one_zero = (denom == 0.0) & ~both_zero
    angle[both_zero] = 0.0
    angle[one_zero] = np.pi / 2.0
    return DifferenceImage(angle[:, :, None], operator="sam")


def kmeans2(
    samples: np.ndarray,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-cluster k-means with seeded k-means++ start and Lloyd refinement.

    Stops when the largest centroid movement drops below `tol` or after
    `max_iter` sweeps. A cluster that empties out is restarted at the
    sample farthest from the surviving centroid. Raises on fewer than two
    distinct samples.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError("samples must be (n, dims)")
    n = samples.shape[0]
    if n < 2 or (samples == samples[0]).all():
        raise ValueError("degenerate clustering input: fewer than 2 distinct samples")

    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    d2 = ((samples - samples[first]) ** 2).sum(axis=1)
    second = int(rng.choice(n, p=d2 / d2.sum()))
    centroids = samples[[first, second]].copy()

    assignments = np.zeros(n, dtype=np.uint8)
    for _ in range(max_iter):
        dists = ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = dists.argmin(axis=1).astype(np.uint8)
        new_centroids = centroids.copy()
        for k in (0, 1):
            members = samples[assignments == k]
            if len(members):
                new_centroids[k] = members.mean(axis=0)
            else:
                other = ((samples - new_centroids[1 - k]) ** 2).sum(axis=1)
                new_centroids[k] = samples[int(other.argmax())]
        movement = np.abs(new_centroids - centroids).max()
        centroids = new_centroids
        if movement < tol:
            break
    dists = ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = dists.argmin(axis=1).astype(np.uint8)
    return assignments, centroids


def decide_change(
    di: DifferenceImage, seed: int, collapse: bool = False
) -> ChangeMap:
    """Label each pixel changed or unchanged by clustering the difference.

    The cluster whose centroid has the larger Euclidean norm is the
    changed class, so the output never depends on k-means' internal
    cluster numbering. An empty (zero-channel) difference image means no
    feature map discriminated the pair: everything is unchanged.
    `collapse=True` reduces a multi-channel difference to its per-pixel
    channel mean before clustering.
    """
    if di.is_empty:
        return ChangeMap(np.zeros((di.height, di.width), dtype=np.uint8))
    values = di.values
    if collapse and di.channels > 1:
        values = values.mean(axis=2, keepdims=True)
    samples = values.reshape(-1, values.shape[2])
    assignments, centroids = kmeans2(samples, seed)
    changed_cluster = int(np.linalg.norm(centroids, axis=1).argmax())
    labels = (assignments == changed_cluster).astype(np.uint8)
    return ChangeMap(labels.reshape(di.height, di.width))


def compute_change_map(
    dfm1: np.ndarray,
    dfm2: np.ndarray,
    operator: str = "ad",
    seed: int = 0,
    entropy_eps: float = ENTROPY_EPS,
    collapse: bool = False,
) -> tuple[ChangeMap, FeatureSelection]:
    """Selection, differencing, and decision in one call.

    Returns the change map together with the feature selection so callers
    can report which channels carried the evidence.
    """
    if operator not in ("ad", "sam"):
        raise ValueError(f"unknown difference operator {operator!r}")
    selection = select_feature_maps(dfm1, dfm2, entropy_eps)
    height, width = dfm1.shape[0], dfm1.shape[1]
    if selection.is_empty:
        return ChangeMap(np.zeros((height, width), dtype=np.uint8)), selection
    if operator == "ad":
        di = diff_ad(selection.selected1, selection.selected2)
    else:
        di = diff_sam(selection.selected1, selection.selected2)
    return decide_change(di, seed, collapse=collapse), selection


def change_map_from_truth(gt: GroundTruth) -> ChangeMap:
    """View a ground truth as a change map (useful for sanity baselines)."""
    return ChangeMap(gt.labels.copy())
