"""Binary portable-pixmap output: P5 for single-channel, P6 for three-channel."""

from __future__ import annotations

import numpy as np


def write_ppm(path, image: np.ndarray) -> None:
    """Write an (H, W, C) or (H, W) float image with values in [0, 1] as an
    8-bit binary pixmap. C must be 1 (P5) or 3 (P6)."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, 1|3) image, got shape {img.shape}")
    h, w, c = img.shape
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    magic = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read back a P5/P6 pixmap written by write_ppm as (H, W, C) floats."""
    with open(path, "rb") as fh:
        raw = fh.read()
    fields = raw.split(maxsplit=4)
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported pixmap magic {magic!r}")
    c = 1 if magic == b"P5" else 3
    body = raw[raw.find(fields[3]) + len(fields[3]) + 1:]
    data = np.frombuffer(body[: w * h * c], dtype=np.uint8)
    return data.reshape(h, w, c).astype(float) / maxval
