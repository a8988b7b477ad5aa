"""Model persistence (versioned binary format) and sample-image export."""

from __future__ import annotations

import math

import numpy as np

from . import model
from .exceptions import ConfigurationError, DataFormatError
from .model import RbmParams
from .validation import as_rng, check_binary_matrix

MODEL_MAGIC = "FLOWTRAIN-RBM"
MODEL_VERSION = 1


def save_model(path, params: RbmParams, provenance: dict | None = None):
    """Write a model file: text header, then a little-endian float64 payload.

    The payload holds ``tau``, ``W`` (row-major), ``b``, and ``c``; the
    round trip is bit-exact.  ``provenance`` entries (method, seed, ...) are
    stored as header lines.
    """
    header = [f"{MODEL_MAGIC} {MODEL_VERSION}", f"D {params.d}", f"H {params.h}"]
    for key, value in (provenance or {}).items():
        key = str(key)
        if any(ch.isspace() for ch in key):
            raise ValueError(f"provenance key {key!r} must not contain whitespace")
        header.append(f"prov {key} {value}")
    header.append("DATA")
    payload = np.concatenate([
        [params.tau], params.W.ravel(), params.b, params.c,
    ]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(payload.tobytes())


def _parse_header(blob: bytes, path: str):
    end = blob.find(b"DATA\n")
    if end < 0:
        raise DataFormatError(f"{path}: missing DATA marker; header corrupt or truncated")
    lines = blob[:end].decode("ascii", errors="replace").splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty header")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != MODEL_MAGIC:
        raise DataFormatError(f"{path}: not a {MODEL_MAGIC} file")
    if magic[1] != str(MODEL_VERSION):
        raise DataFormatError(f"{path}: unsupported version {magic[1]!r}")
    dims = {}
    provenance = {}
    for line in lines[1:]:
        parts = line.split(maxsplit=2)
        if parts[0] in ("D", "H"):
            dims[parts[0]] = int(parts[1])
        elif parts[0] == "prov":
            provenance[parts[1]] = parts[2] if len(parts) > 2 else ""
        else:
            raise DataFormatError(f"{path}: unrecognized header line {line!r}")
    if "D" not in dims or "H" not in dims:
        raise DataFormatError(f"{path}: header missing D or H")
    return dims["D"], dims["H"], provenance, end + len(b"DATA\n")


def load_model(path) -> RbmParams:
    """Read a model file; raises on version, header, or payload-size mismatch."""
    path = str(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    d, h, _, offset = _parse_header(blob, path)
    expected = 1 + d * h + d + h
    payload = np.frombuffer(blob, dtype="<f8", offset=offset)
    if payload.shape[0] != expected:
        raise DataFormatError(
            f"{path}: payload holds {payload.shape[0]} values, "
            f"expected {expected} for D={d}, H={h}")
    tau = float(payload[0])
    W = payload[1:1 + d * h].reshape(d, h).copy()
    b = payload[1 + d * h:1 + d * h + d].copy()
    c = payload[1 + d * h + d:].copy()
    return RbmParams(W, b, c, tau)


def model_provenance(path) -> dict:
    """Training provenance recorded in a model file's header."""
    with open(path, "rb") as fh:
        blob = fh.read()
    _, _, provenance, _ = _parse_header(blob, str(path))
    return provenance


def export_samples_pgm(path, params: RbmParams, n: int, gibbs_steps: int,
                       grid_side: int, seed=0, width: int | None = None,
                       height: int | None = None, init_states=None):
    """Sample visible states and tile them into one PGM (P5) image grid.

    Each of ``n`` chains runs ``gibbs_steps`` block sweeps from either
    uniform noise or rows of ``init_states``.  Cells are laid out row-major
    in a ``grid_side``-wide grid with 1-pixel separators; bit 1 maps to 255.
    Deterministic for a fixed seed.
    """
    if n < 1 or grid_side < 1:
        raise ConfigurationError("n and grid_side must be >= 1")
    if (width is None) != (height is None):
        raise ConfigurationError("give both width and height, or neither")
    if width is None:
        side = math.isqrt(params.d)
        if side * side != params.d:
            raise ConfigurationError(
                f"D = {params.d} is not a perfect square; pass width and height")
        width = height = side
    if width * height != params.d:
        raise ConfigurationError(f"width*height = {width * height} does not match D = {params.d}")
    if n > grid_side * grid_side:
        raise ConfigurationError(f"{n} samples do not fit a {grid_side}x{grid_side} grid")

    rng = as_rng(seed)
    if init_states is None:
        V = (rng.random((n, params.d)) < 0.5).astype(np.uint8)
    else:
        init_states = check_binary_matrix(init_states, "init_states")
        if init_states.shape[1] != params.d:
            raise ConfigurationError("init_states width does not match D")
        idx = rng.integers(0, init_states.shape[0], size=n)
        V = init_states[idx].copy()
    for _ in range(gibbs_steps):
        V, _ = model.gibbs_step(params, V, rng)

    n_rows = (n + grid_side - 1) // grid_side
    canvas_w = grid_side * width + (grid_side - 1)
    canvas_h = n_rows * height + (n_rows - 1)
    canvas = np.zeros((canvas_h, canvas_w), dtype=np.uint8)
    for i in range(n):
        r, c = divmod(i, grid_side)
        top, left = r * (height + 1), c * (width + 1)
        canvas[top:top + height, left:left + width] = \
            V[i].reshape(height, width) * np.uint8(255)

    with open(path, "wb") as fh:
        fh.write(f"P5\n{canvas_w} {canvas_h}\n255\n".encode("ascii"))
        fh.write(canvas.tobytes())
