"""Hyperspectral cube and ground-truth containers, plus scene synthesis.

A cube is stored as a (height, width, bands) float32 array; a pixel is the
band vector at one (row, col) position. Ground truth is a binary (height,
width) label image with 1 marking changed pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HyperCube",
    "GroundTruth",
    "SceneSpec",
    "normalize_bands",
    "informative_band_mask",
    "drop_zero_entropy_bands",
    "synthesize_pair",
]


@dataclass
class HyperCube:
    """A (height, width, bands) cube of real-valued reflectances."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError("cube data must be 3-D (height, width, bands)")
        if min(arr.shape) < 1:
            raise ValueError(f"cube dimensions must all be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cube contains non-finite values")
        arr = np.array(arr, dtype=np.float32, order="C")
        arr.flags.writeable = False
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def band(self, index: int) -> np.ndarray:
        """Return the (height, width) plane of one band."""
        return self.data[:, :, index]


@dataclass
class GroundTruth:
    """Binary per-pixel change labels: 0 unchanged, 1 changed."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError("ground truth must be 2-D (height, width)")
        if min(arr.shape) < 1:
            raise ValueError(f"ground truth dimensions must be >= 1, got {arr.shape}")
        values = np.unique(arr)
        if not np.isin(values, (0, 1)).all():
            raise ValueError("ground truth labels must be 0 or 1 after binarization")
        arr = np.array(arr, dtype=np.uint8, order="C")
        arr.flags.writeable = False
        self.labels = arr

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def changed_fraction(self) -> float:
        return float(self.labels.mean())


@dataclass(frozen=True)
class SceneSpec:
    """Parameters for a synthetic bi-temporal scene pair."""

    height: int = 64
    width: int = 64
    bands: int = 32
    change_fraction: float = 0.15
    noise_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.height, self.width, self.bands) < 1:
            raise ValueError("scene dimensions must all be >= 1")
        if not 0.0 < self.change_fraction < 1.0:
            raise ValueError(
                f"change_fraction must lie strictly in (0, 1), got {self.change_fraction}"
            )
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be non-negative")


def normalize_bands(cube: HyperCube) -> HyperCube:
    """Min-max scale each band independently to [0, 1].

    A constant band maps to all zeros so no division by zero occurs.
    """
    data = cube.data.astype(np.float64)
    lo = data.min(axis=(0, 1), keepdims=True)
    hi = data.max(axis=(0, 1), keepdims=True)
    span = hi - lo
    span[span == 0.0] = 1.0
    out = (data - lo) / span
    return HyperCube(out.astype(np.float32))


def informative_band_mask(cube: HyperCube) -> np.ndarray:
    """Boolean mask marking bands that are not constant over all pixels."""
    flat = cube.data.reshape(-1, cube.bands)
    return flat.min(axis=0) != flat.max(axis=0)


def drop_zero_entropy_bands(cube: HyperCube) -> tuple[HyperCube, list[int]]:
    """Remove bands that are constant over all pixels (zero entropy).

    Returns the filtered cube and the kept band indices, in original order.
    Raises ValueError if every band is constant.
    """
    informative = informative_band_mask(cube)
    kept = [int(i) for i in np.nonzero(informative)[0]]
    if not kept:
        raise ValueError("no informative bands: all bands are constant")
    return HyperCube(cube.data[:, :, kept]), kept


def _smooth_curve(
    rng: np.random.Generator, bands: int, center: float, amplitude: float
) -> np.ndarray:
    """A smooth sinusoidal spectral curve within center +/- amplitude."""
    b = np.linspace(0.0, 1.0, bands)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    cycles = rng.uniform(0.9, 2.2)
    return center + amplitude * np.sin(2.0 * np.pi * cycles * b + phase)


def _smooth_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Smooth spatial gain in [0.85, 1.15], bilinear over a coarse grid."""
    gh = max(2, height // 16 + 2)
    gw = max(2, width // 16 + 2)
    grid = rng.uniform(0.85, 1.15, size=(gh, gw))
    rows = np.linspace(0.0, gh - 1.0, height)
    cols = np.linspace(0.0, gw - 1.0, width)
    r0 = np.floor(rows).astype(int).clip(0, gh - 2)
    c0 = np.floor(cols).astype(int).clip(0, gw - 2)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    g00 = grid[np.ix_(r0, c0)]
    g01 = grid[np.ix_(r0, c0 + 1)]
    g10 = grid[np.ix_(r0 + 1, c0)]
    g11 = grid[np.ix_(r0 + 1, c0 + 1)]
    return (
        g00 * (1 - fr) * (1 - fc)
        + g01 * (1 - fr) * fc
        + g10 * fr * (1 - fc)
        + g11 * fr * fc
    )


def _planted_rectangle(
    rng: np.random.Generator, height: int, width: int, fraction: float
) -> tuple[slice, slice]:
    """An axis-aligned rectangle covering approximately `fraction` of pixels."""
    target = max(1.0, fraction * height * width)
    aspect = height / width
    rh = int(round(np.sqrt(target * aspect)))
    rh = min(max(rh, 1), height)
    rw = int(round(target / rh))
    rw = min(max(rw, 1), width)
    top = int(rng.integers(0, height - rh + 1))
    left = int(rng.integers(0, width - rw + 1))
    return slice(top, top + rh), slice(left, left + rw)


def _unit_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """A smooth random field stretched to span exactly [0, 1]."""
    f = _smooth_field(rng, height, width)
    lo, hi = f.min(), f.max()
    if hi == lo:
        return np.zeros_like(f)
    return (f - lo) / (hi - lo)


def synthesize_pair(spec: SceneSpec) -> tuple[HyperCube, HyperCube, GroundTruth]:
    """Generate a deterministic bi-temporal pair with a planted change region.

    Image 1 is a clean scene mixing two well-separated smooth end-member
    signatures by a smooth spatial weight field, under a mild multiplicative
    gain. The mixing keeps every band's dynamic range wide, so per-band
    min-max normalization stays stable under the replacement and the noise.
    Image 2 equals image 1 with the planted rectangle's spectra replaced by
    a distinct smooth signature (placed strictly inside each band's observed
    range, and chosen as far as possible from the local mixture), plus
    i.i.d. Gaussian noise of scale ``noise_sigma`` over the whole image.
    The ground truth marks exactly the planted rectangle.
    """
    rng = np.random.default_rng(spec.seed)
    dark = _smooth_curve(rng, spec.bands, center=0.21, amplitude=0.09)
    separation = 0.75
    rows, cols = _planted_rectangle(rng, spec.height, spec.width, spec.change_fraction)
    # The mix floor keeps background pixels away from zero after
    # normalization (stable angles); a small dark corner patch outside the
    # planted region anchors each band's minimum in both images.
    mix = 0.25 + 0.75 * _unit_field(rng, spec.height, spec.width)
    bh, bw = min(2, spec.height), min(2, spec.width)
    for r0, c0 in (
        (0, 0),
        (0, spec.width - bw),
        (spec.height - bh, 0),
        (spec.height - bh, spec.width - bw),
    ):
        outside = (
            r0 + bh <= rows.start
            or r0 >= rows.stop
            or c0 + bw <= cols.start
            or c0 >= cols.stop
        )
        if outside:
            mix[r0 : r0 + bh, c0 : c0 + bw] = 0.0
            break
    gain = 0.97 + 0.06 * _unit_field(rng, spec.height, spec.width)
    image1 = (dark[None, None, :] + separation * mix[:, :, None]) * gain[:, :, None]

    lo = image1.min(axis=(0, 1))
    hi = image1.max(axis=(0, 1))
    local_mix = mix[rows, cols].reshape(-1)
    best_weights = None
    best_score = -np.inf
    # Fixed number of candidate replacement curves keeps the draw sequence
    # (hence determinism) independent of the scene content.
    for _ in range(16):
        weights = _smooth_curve(rng, spec.bands, center=0.5, amplitude=0.45)
        score = np.abs(weights[None, :] - local_mix[:, None]).mean()
        if score > best_score:
            best_weights = weights
            best_score = score
    foreground = lo + best_weights * (hi - lo)

    base2 = image1.copy()
    base2[rows, cols, :] = foreground[None, None, :]
    noise = rng.normal(0.0, spec.noise_sigma, size=base2.shape) if spec.noise_sigma else 0.0
    image2 = base2 + noise

    labels = np.zeros((spec.height, spec.width), dtype=np.uint8)
    labels[rows, cols] = 1
    return HyperCube(image1), HyperCube(image2), GroundTruth(labels)
