"""Readers and writers for PFM float maps, PGM masks, intrinsics and meshes."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "FloatMap",
    "read_pfm",
    "write_pfm",
    "read_pgm",
    "write_pgm",
    "read_mask",
    "read_intrinsics",
    "write_intrinsics",
    "write_obj",
]


class FormatError(ValueError):
    """A file could not be parsed."""


@dataclass(eq=False)
class FloatMap:
    """A float32 image, top row first; ``data`` is ``(H, W)`` or ``(H, W, 3)``.

    ``scale_text`` keeps the magnitude token of the PFM scale line so that a
    little-endian file is rewritten byte for byte.
    """

    data: np.ndarray
    scale_text: str = "1.0"

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


def _read_token_line(fh, path) -> bytes:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise FormatError(f"{path}: truncated PFM header")
    return line[:-1]


def read_pfm(path) -> FloatMap:
    with open(path, "rb") as fh:
        tag = _read_token_line(fh, path).strip()
        if tag == b"Pf":
            channels = 1
        elif tag == b"PF":
            channels = 3
        else:
            raise FormatError(f"{path}: not a PFM file (header {tag[:8]!r})")
        dims = _read_token_line(fh, path).split()
        try:
            width, height = (int(t) for t in dims)
        except ValueError:
            raise FormatError(f"{path}: malformed PFM dimensions {dims!r}") from None
        if width <= 0 or height <= 0:
            raise FormatError(f"{path}: non-positive PFM dimensions")
        scale_tok = _read_token_line(fh, path).strip()
        try:
            scale = float(scale_tok)
        except ValueError:
            raise FormatError(f"{path}: malformed PFM scale {scale_tok!r}") from None
        if scale == 0 or not np.isfinite(scale):
            raise FormatError(f"{path}: PFM scale must be finite and nonzero")
        count = width * height * channels
        payload = fh.read(4 * count)
    if len(payload) < 4 * count:
        raise FormatError(f"{path}: truncated PFM payload ({len(payload)} of {4 * count} bytes)")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    data = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (height, width) if channels == 1 else (height, width, 3)
    data = np.flipud(data.reshape(shape)).copy()
    text = scale_tok.decode("ascii").lstrip("+-") or "1.0"
    return FloatMap(data, text)


def write_pfm(fmap, path) -> None:
    """Write little-endian PFM; accepts a :class:`FloatMap` or an array."""
    if not isinstance(fmap, FloatMap):
        fmap = FloatMap(np.asarray(fmap))
    data = np.asarray(fmap.data, dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim == 2:
        tag = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError("PFM maps have 1 or 3 channels")
    h, w = data.shape[:2]
    body = np.ascontiguousarray(np.flipud(data), dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(tag + b"\n" + f"{w} {h}\n-{fmap.scale_text}\n".encode("ascii") + body)


def _pnm_tokens(buf: bytes, count: int, path):
    """Parse ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    pattern = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")
    for _ in range(count):
        m = pattern.match(buf, pos)
        if not m:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM as a ``(H, W)`` integer array."""
    buf = Path(path).read_bytes()
    tokens, start = _pnm_tokens(buf, 4, path)
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary PGM (P5) is supported, got {tokens[0][:4]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid PGM header values")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = width * height * dtype.itemsize
    payload = buf[start:start + need]
    if len(payload) < need:
        raise FormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.int64)


def write_pgm(image, path) -> None:
    img = np.asarray(image)
    if img.dtype == bool:
        img = img.astype(np.uint8) * 255
    if img.ndim != 2 or img.min() < 0 or img.max() > 255:
        raise ValueError("PGM writer takes a 2D array with values in [0, 255]")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii") + img.astype(np.uint8).tobytes())


def read_mask(path) -> np.ndarray:
    """Foreground mask from a PGM (or, with Pillow installed, PNG); nonzero is foreground."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image
        except ImportError:
            raise FormatError(f"{path}: reading PNG masks needs Pillow") from None
        with Image.open(path) as im:
            return np.asarray(im.convert("L")) > 0
    return read_pgm(path) > 0


def read_intrinsics(path):
    """Parse ``f=``, ``cu=``, ``cv=`` lines (any order, ``#`` comments allowed)."""
    from .reconstruct import CameraIntrinsics

    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or key not in ("f", "cu", "cv"):
            raise FormatError(f"{path}:{lineno}: expected f=, cu= or cv=, got {raw!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad number {val.strip()!r}") from None
    missing = [k for k in ("f", "cu", "cv") if k not in values]
    if missing:
        raise FormatError(f"{path}: missing {', '.join(missing)}")
    if not values["f"] > 0:
        raise FormatError(f"{path}: focal length must be positive")
    return CameraIntrinsics(values["f"], values["cu"], values["cv"])


def write_intrinsics(intrinsics, path) -> None:
    Path(path).write_text(f"f={intrinsics.f!r}\ncu={intrinsics.cu!r}\ncv={intrinsics.cv!r}\n")


def write_obj(depth, path, intrinsics=None) -> None:
    """Triangle mesh of a depth field.

    Vertices are ``(u, v, z)`` or, given intrinsics, the perspective
    unprojection.  Each 2x2 block of foreground pixels yields two triangles;
    a block with exactly three foreground pixels yields one.
    """
    from .domain import unproject

    domain = depth.domain
    if intrinsics is None:
        verts = np.stack([domain.u, domain.v, depth.z], axis=1).astype(float)
    else:
        verts = unproject(domain.u, domain.v, depth.z, intrinsics)
    idx = domain.index_of
    a, b = idx[:-1, :-1], idx[:-1, 1:]
    c, d = idx[1:, :-1], idx[1:, 1:]
    faces = []
    full = (a >= 0) & (b >= 0) & (c >= 0) & (d >= 0)
    faces += [np.stack([a[full], c[full], b[full]], 1), np.stack([b[full], c[full], d[full]], 1)]
    for p, q, r, missing in ((a, c, d, b), (a, c, b, d), (a, d, b, c), (b, c, d, a)):
        sel = (p >= 0) & (q >= 0) & (r >= 0) & (missing < 0)
        faces.append(np.stack([p[sel], q[sel], r[sel]], 1))
    faces = np.concatenate(faces)
    with open(path, "w") as fh:
        for x, y, z in verts:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
