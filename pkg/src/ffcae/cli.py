"""Command-line frontend: synthesize pairs, train, detect, evaluate, rank.

Every subcommand is deterministic for a fixed seed, writes its artifacts
atomically, and exits nonzero on any error. FFCAE_THREADS caps the BLAS
thread pools for reproducible resource usage on shared machines.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .analysis import ChangeMap, compute_change_map
from .cube import (
    HyperCube,
    SceneSpec,
    informative_band_mask,
    normalize_bands,
    synthesize_pair,
)
from .metrics import compute_metrics, confusion
from .model import (
    FfcaeConfig,
    extract_dfm,
    load_model,
    save_model,
    train,
    write_loss_history,
)
from .ranking import ScoreCube, mse_from_ranks, rank_methods, rank_sse, tukey_hsd
from .storage import (
    atomic_write_text,
    load_cube,
    load_ground_truth,
    read_pgm,
    save_cube,
    write_pgm,
)

__all__ = ["RunConfig", "main", "bundled_scores_path"]

_CONFIG_KEYS = {"image1", "image2", "ground_truth", "operator", "seed", "output_dir", "ffcae"}


@dataclass(frozen=True)
class RunConfig:
    """One pipeline run: the input pair, model settings, and output home."""

    image1: Path
    image2: Path
    ground_truth: Path | None
    ffcae: FfcaeConfig
    difference_operator: str
    seed: int
    output_dir: Path

    def __post_init__(self) -> None:
        if self.difference_operator not in ("ad", "sam"):
            raise ValueError(
                f"difference operator must be 'ad' or 'sam', got "
                f"{self.difference_operator!r}"
            )

    def check_inputs(self) -> None:
        for label, path in (
            ("image1", self.image1),
            ("image2", self.image2),
            ("ground truth", self.ground_truth),
        ):
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{label} file not found: {path}")


def bundled_scores_path() -> Path:
    """The packaged benchmark score table (method,dataset,metric,value)."""
    return Path(str(importlib.resources.files("ffcae") / "data" / "benchmark_scores.csv"))


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return doc


def _run_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file, and explicit flags (flags win)."""
    doc = _load_config_file(getattr(args, "config", None))
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))

    ffcae_doc = dict(doc.get("ffcae", {}))
    ffcae_doc.setdefault("seed", seed)
    if args.seed is not None:
        ffcae_doc["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        ffcae_doc["epochs"] = args.epochs
    ffcae = FfcaeConfig(**ffcae_doc)

    image1 = getattr(args, "image1", None) or doc.get("image1")
    image2 = getattr(args, "image2", None) or doc.get("image2")
    if image1 is None or image2 is None:
        raise ValueError("image1 and image2 must be given as arguments or in --config")
    gt = getattr(args, "ground_truth", None) or doc.get("ground_truth")
    operator = getattr(args, "operator", None) or doc.get("operator", "ad")
    out = getattr(args, "out", None) or doc.get("output_dir", ".")

    config = RunConfig(
        image1=Path(image1),
        image2=Path(image2),
        ground_truth=Path(gt) if gt else None,
        ffcae=ffcae,
        difference_operator=operator,
        seed=seed,
        output_dir=Path(out),
    )
    config.check_inputs()
    return config


def _load_pair(config: RunConfig) -> tuple[HyperCube, HyperCube]:
    cube1 = load_cube(config.image1)
    cube2 = load_cube(config.image2)
    if cube1.shape != cube2.shape:
        raise ValueError(
            f"image shapes differ: {config.image1} is {cube1.shape}, "
            f"{config.image2} is {cube2.shape}"
        )
    return cube1, cube2


def _restrict_bands(cube: HyperCube, kept: list[int]) -> HyperCube:
    return HyperCube(cube.data[:, :, kept])


def informative_band_union(cube1: HyperCube, cube2: HyperCube) -> list[int]:
    """Bands worth training on: non-constant in at least one image.

    A band flat in one image but varying in the other still carries change
    evidence, so the union is kept rather than the intersection.
    """
    union = informative_band_mask(cube1) | informative_band_mask(cube2)
    kept = [int(i) for i in np.nonzero(union)[0]]
    if not kept:
        raise ValueError("no informative bands in either image")
    return kept


def cmd_train(args: argparse.Namespace) -> int:
    config = _run_config(args)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cube1, cube2 = _load_pair(config)
    kept = informative_band_union(cube1, cube2)
    norm1 = normalize_bands(_restrict_bands(cube1, kept))
    norm2 = normalize_bands(_restrict_bands(cube2, kept))
    model, history = train(norm1, norm2, config.ffcae)
    elapsed = time.perf_counter() - t0

    checkpoint = config.output_dir / "checkpoint.ffcae"
    save_model(model, checkpoint, extra_meta={"kept_bands": kept})
    write_loss_history(history, config.output_dir / "loss_history.csv")
    print(
        f"trained {config.ffcae.epochs} epochs on "
        f"{cube1.height}x{cube1.width}x{len(kept)} "
        f"(of {cube1.bands} bands) in {elapsed:.1f}s; "
        f"final losses {history[-1, 0]:.3e} / {history[-1, 1]:.3e}"
    )
    print(f"wrote {checkpoint}")
    print(f"wrote {config.output_dir / 'loss_history.csv'}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    config = _run_config(args)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    model, meta = load_model(args.checkpoint)

    t0 = time.perf_counter()
    cube1, cube2 = _load_pair(config)
    kept = meta.get("kept_bands")
    if kept is not None:
        kept = [int(i) for i in kept]
        if kept and max(kept) >= cube1.bands:
            raise ValueError(
                f"checkpoint selects band {max(kept)} but images have "
                f"only {cube1.bands} bands"
            )
        cube1 = _restrict_bands(cube1, kept)
        cube2 = _restrict_bands(cube2, kept)
    if cube1.bands != model.bands:
        raise ValueError(
            f"checkpoint topology expects {model.bands} bands, images "
            f"provide {cube1.bands} after band selection"
        )
    t_load = time.perf_counter()

    dfm1, dfm2 = extract_dfm(model, cube1, cube2)
    t_features = time.perf_counter()
    change_map, selection = compute_change_map(
        dfm1,
        dfm2,
        operator=config.difference_operator,
        seed=config.seed,
        collapse=args.collapse,
    )
    t_decide = time.perf_counter()

    map_path = config.output_dir / "change_map.pgm"
    write_pgm(change_map.labels, map_path)
    lines = ["channel,entropy,selected"]
    kept_set = set(selection.kept)
    for c, entropy in enumerate(selection.entropies):
        lines.append(f"{c},{entropy:.6f},{int(c in kept_set)}")
    atomic_write_text(config.output_dir / "selected_channels.csv", "\n".join(lines) + "\n")

    print(
        f"load {t_load - t0:.2f}s, features {t_features - t_load:.2f}s, "
        f"decision {t_decide - t_features:.2f}s, total {t_decide - t0:.2f}s"
    )
    print(
        f"wrote {map_path} ({config.difference_operator}, "
        f"{len(selection.kept)}/{len(selection.entropies)} channels, "
        f"changed fraction {change_map.changed_fraction:.4f})"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    labels = read_pgm(args.change_map)
    change_map = ChangeMap((labels > 0).astype(np.uint8))
    gt = load_ground_truth(
        args.ground_truth, expected_size=(change_map.height, change_map.width)
    )
    report = compute_metrics(confusion(change_map, gt))
    sys.stdout.write(report.to_csv())
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "metrics.csv", report.to_csv())
        atomic_write_text(out / "metrics.json", report.to_json())
        print(f"wrote {out / 'metrics.csv'} and {out / 'metrics.json'}")
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    scores = Path(args.scores) if args.scores else bundled_scores_path()
    cube = ScoreCube.from_csv(scores)
    table = rank_methods(cube)
    if args.mse == "auto":
        mse = mse_from_ranks(table, nu=args.nu)
        print(f"rank SSE {rank_sse(table):.4f}, MSE {mse:.4f} (nu={args.nu})")
    else:
        mse = float(args.mse)
    result = tukey_hsd(table, n=args.n, mse=mse, q_critical=args.q_critical)

    sys.stdout.write(table.to_csv())
    sys.stdout.write(result.report())
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "rank_table.csv", table.to_csv())
        atomic_write_text(out / "tukey_q.csv", result.to_csv())
        atomic_write_text(out / "significance.txt", result.report())
        print(f"wrote rank_table.csv, tukey_q.csv, significance.txt in {out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SceneSpec(
        height=args.height,
        width=args.width,
        bands=args.bands,
        change_fraction=args.change_fraction,
        noise_sigma=args.noise_sigma,
        seed=args.seed if args.seed is not None else 0,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    image1, image2, gt = synthesize_pair(spec)
    save_cube(image1, out / "image1.hsi")
    save_cube(image2, out / "image2.hsi")
    write_pgm(gt.labels, out / "ground_truth.pgm")
    print(
        f"wrote image1.hsi, image2.hsi, ground_truth.pgm in {out} "
        f"({spec.height}x{spec.width}x{spec.bands}, "
        f"changed fraction {gt.changed_fraction:.4f})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffcae",
        description="Unsupervised change detection for co-registered hyperspectral pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the autoencoder on an image pair")
    p_train.add_argument("image1", nargs="?", help="first image header (.hsi)")
    p_train.add_argument("image2", nargs="?", help="second image header (.hsi)")
    p_train.add_argument("--config", help="JSON run configuration")
    p_train.add_argument("--seed", type=int, help="seed for weight initialization")
    p_train.add_argument("--epochs", type=int, help="training epochs")
    p_train.add_argument("--out", help="output directory")
    p_train.set_defaults(handler=cmd_train)

    p_detect = sub.add_parser("detect", help="produce a change map from a checkpoint")
    p_detect.add_argument("image1", nargs="?", help="first image header (.hsi)")
    p_detect.add_argument("image2", nargs="?", help="second image header (.hsi)")
    p_detect.add_argument("--checkpoint", required=True, help="trained model file")
    p_detect.add_argument("--config", help="JSON run configuration")
    p_detect.add_argument("--operator", choices=("ad", "sam"), help="difference operator")
    p_detect.add_argument("--seed", type=int, help="seed for the clustering start")
    p_detect.add_argument(
        "--collapse",
        action="store_true",
        help="cluster the channel mean instead of full difference vectors",
    )
    p_detect.add_argument("--out", help="output directory")
    p_detect.set_defaults(handler=cmd_detect)

    p_eval = sub.add_parser("evaluate", help="score a change map against ground truth")
    p_eval.add_argument("change_map", help="change map PGM")
    p_eval.add_argument("ground_truth", help="ground truth PGM")
    p_eval.add_argument("--out", help="directory for metrics.csv / metrics.json")
    p_eval.set_defaults(handler=cmd_evaluate)

    p_rank = sub.add_parser("rank", help="rank methods and run the Tukey HSD test")
    p_rank.add_argument(
        "--scores", help="score CSV (method,dataset,metric,value); default: bundled table"
    )
    p_rank.add_argument("--n", type=int, default=5, help="samples per group (metric count)")
    p_rank.add_argument(
        "--mse", default="auto", help="mean-square error, or 'auto' to derive from ranks"
    )
    p_rank.add_argument("--nu", type=int, default=32, help="error degrees of freedom for auto MSE")
    p_rank.add_argument(
        "--q-critical", type=float, default=4.5209, help="studentized-range critical value"
    )
    p_rank.add_argument("--out", help="output directory")
    p_rank.set_defaults(handler=cmd_rank)

    p_synth = sub.add_parser("synth", help="write a synthetic pair with planted changes")
    p_synth.add_argument("--height", type=int, default=64)
    p_synth.add_argument("--width", type=int, default=64)
    p_synth.add_argument("--bands", type=int, default=32)
    p_synth.add_argument("--change-fraction", type=float, default=0.15)
    p_synth.add_argument("--noise-sigma", type=float, default=0.02)
    p_synth.add_argument("--seed", type=int, help="scene seed")
    p_synth.add_argument("--out", default=".", help="output directory")
    p_synth.set_defaults(handler=cmd_synth)

    return parser


def _thread_limit() -> int | None:
    raw = os.environ.get("FFCAE_THREADS")
    if raw is None:
        return None
    try:
        limit = int(raw)
    except ValueError:
        limit = 0
    if limit < 1:
        raise ValueError(f"FFCAE_THREADS must be a positive integer, got {raw!r}")
    return limit


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with threadpool_limits(limits=_thread_limit()):
            return args.handler(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
