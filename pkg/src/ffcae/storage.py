"""All on-disk formats: HSI container, PGM maps, CSV helpers, checkpoints.

HSI container
    ``<name>.json`` header + raw payload file. The header is a JSON document
    ``{"width", "height", "bands", "dtype": "f32", "interleave": "bsq",
    "data": <relative path>}``. The payload is little-endian float32,
    band-sequential: the full (height, width) plane of band 0, then band 1,
    and so on, each plane row-major.

Ground truth and change maps
    Binary PGM (P5), maxval 255. On input any nonzero pixel counts as
    changed; on output changed pixels are written as 255.

Checkpoint
    Magic ``FFCAE1`` and a newline, one JSON line describing the topology,
    then the little-endian float32 parameter payload in declaration order
    (weights then biases, per layer).

Every writer goes through an atomic temp-file/rename so interrupted runs
never leave partial outputs behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .cube import GroundTruth, HyperCube
from .nn import ConvLayer

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "load_cube",
    "save_cube",
    "load_ground_truth",
    "read_pgm",
    "write_pgm",
    "save_layers",
    "load_layers",
]

CHECKPOINT_MAGIC = b"FFCAE1"


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    """Write bytes to `path` via a temp file and atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# HSI container (JSON header + BSQ float32 payload)
# ---------------------------------------------------------------------------


def save_cube(cube: HyperCube, header_path: str | os.PathLike) -> None:
    """Write a cube as a JSON header plus raw BSQ float32 payload.

    The payload file sits next to the header and shares its stem with a
    ``.raw`` suffix.
    """
    header_path = Path(header_path)
    payload_name = header_path.stem + ".raw"
    header = {
        "width": cube.width,
        "height": cube.height,
        "bands": cube.bands,
        "dtype": "f32",
        "interleave": "bsq",
        "data": payload_name,
    }
    # (H, W, B) -> band-sequential planes, little-endian float32.
    bsq = np.transpose(cube.data, (2, 0, 1)).astype("<f4")
    atomic_write_bytes(header_path.parent / payload_name, bsq.tobytes())
    atomic_write_text(header_path, json.dumps(header, indent=2) + "\n")


def load_cube(header_path: str | os.PathLike) -> HyperCube:
    """Read a cube written by :func:`save_cube`, bit-exactly."""
    header_path = Path(header_path)
    try:
        header = json.loads(header_path.read_text())
    except FileNotFoundError:
        raise FileNotFoundError(f"cube header not found: {header_path}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed cube header {header_path}: {exc}") from None

    for key in ("width", "height", "bands", "dtype", "interleave", "data"):
        if key not in header:
            raise ValueError(f"cube header {header_path} missing field {key!r}")
    if header["dtype"] != "f32":
        raise ValueError(f"unsupported dtype {header['dtype']!r} (only 'f32')")
    if header["interleave"] != "bsq":
        raise ValueError(
            f"unsupported interleave {header['interleave']!r} (only 'bsq')"
        )
    height, width, bands = (int(header[k]) for k in ("height", "width", "bands"))

    payload_path = header_path.parent / header["data"]
    try:
        raw = payload_path.read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"cube payload not found: {payload_path}") from None
    expected = height * width * bands * 4
    if len(raw) != expected:
        raise ValueError(
            f"payload size mismatch for {payload_path}: "
            f"expected {expected} bytes, found {len(raw)}"
        )
    planes = np.frombuffer(raw, dtype="<f4").reshape(bands, height, width)
    return HyperCube(np.transpose(planes, (1, 2, 0)))


# ---------------------------------------------------------------------------
# PGM (P5)
# ---------------------------------------------------------------------------


def _parse_pgm_header(blob: bytes, path) -> tuple[list[bytes], int]:
    """Return the four header tokens of a P5 file and the pixel data offset.

    Whitespace runs and ``#`` comments may separate tokens; a single
    whitespace byte follows the maxval token before the binary pixels.
    """
    pos = 0
    tokens: list[bytes] = []
    while len(tokens) < 4:
        while pos < len(blob):
            c = blob[pos : pos + 1]
            if c.isspace():
                pos += 1
            elif c == b"#":
                while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(blob[start:pos])
    return tokens, pos + 1


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255 into a (H, W) uint8 array."""
    blob = Path(path).read_bytes()
    (magic, *fields), offset = _parse_pgm_header(blob, path)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header fields {fields}") from None
    if width < 1 or height < 1:
        raise ValueError(f"{path}: invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}")
    pixels = blob[offset : offset + width * height]
    if len(pixels) < width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(labels: np.ndarray, path: str | os.PathLike) -> None:
    """Write a binary image as PGM P5 with 0 unchanged and 255 changed."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("PGM output must be 2-D")
    out = np.where(labels > 0, 255, 0).astype(np.uint8)
    header = f"P5\n{out.shape[1]} {out.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + out.tobytes())


def load_ground_truth(
    path: str | os.PathLike, expected_size: tuple[int, int] | None = None
) -> GroundTruth:
    """Load a PGM ground truth, merging all nonzero classes into 'changed'.

    `expected_size` is an optional (height, width) check against the pair
    the truth belongs to.
    """
    raw = read_pgm(path)
    if expected_size is not None and raw.shape != tuple(expected_size):
        raise ValueError(
            f"{path}: ground truth is {raw.shape}, expected {tuple(expected_size)}"
        )
    return GroundTruth((raw > 0).astype(np.uint8))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_layers(
    layers: dict[str, ConvLayer], path: str | os.PathLike, meta: dict | None = None
) -> None:
    """Serialize named conv layers plus free-form metadata.

    Layer order in the topology block fixes the payload order: each layer
    contributes its weights then its biases, flattened C-order, as
    little-endian float32.
    """
    topology = {
        "layers": [
            {
                "name": name,
                "kernel_size": layer.kernel_size,
                "in_channels": layer.in_channels,
                "out_channels": layer.out_channels,
                "activation": layer.activation,
            }
            for name, layer in layers.items()
        ],
        "meta": meta or {},
    }
    chunks = [CHECKPOINT_MAGIC, b"\n", json.dumps(topology).encode("utf-8"), b"\n"]
    for layer in layers.values():
        chunks.append(layer.weights.astype("<f4").tobytes())
        chunks.append(layer.biases.astype("<f4").tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_layers(path: str | os.PathLike) -> tuple[dict[str, ConvLayer], dict]:
    """Read a checkpoint back into named layers and its metadata block."""
    blob = Path(path).read_bytes()
    if not blob.startswith(CHECKPOINT_MAGIC + b"\n"):
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    body = blob[len(CHECKPOINT_MAGIC) + 1 :]
    newline = body.find(b"\n")
    if newline < 0:
        raise ValueError(f"{path}: truncated checkpoint header")
    topology = json.loads(body[:newline])
    payload = body[newline + 1 :]

    layers: dict[str, ConvLayer] = {}
    offset = 0
    for entry in topology["layers"]:
        k = entry["kernel_size"]
        cin = entry["in_channels"]
        cout = entry["out_channels"]
        n_w = cout * cin * k * k
        need = (n_w + cout) * 4
        if offset + need > len(payload):
            raise ValueError(f"{path}: checkpoint payload too short")
        weights = np.frombuffer(payload, dtype="<f4", count=n_w, offset=offset)
        offset += n_w * 4
        biases = np.frombuffer(payload, dtype="<f4", count=cout, offset=offset)
        offset += cout * 4
        layers[entry["name"]] = ConvLayer(
            kernel_size=k,
            in_channels=cin,
            out_channels=cout,
            weights=weights.reshape(cout, cin, k, k).astype(np.float64),
            biases=biases.astype(np.float64),
            activation=entry["activation"],
        )
    if offset != len(payload):
        raise ValueError(f"{path}: checkpoint payload has trailing bytes")
    return layers, topology.get("meta", {})
