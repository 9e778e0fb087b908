"""File formats: COO text, dense binary, and PPM images.

COO text: header line ``I1 I2 I3 nnz``, then one ``i1 i2 i3 value`` line per
nonzero, whitespace-separated, 1-based indices.

Dense binary: magic bytes ``DT3\\0``, three little-endian uint64 extents,
then I1*I2*I3 little-endian float64 values in the canonical (mode-1
unfolding column order) layout.

PPM: plain (P3) and raw (P6) images, 8-bit, values normalized to [0, 1];
a stack of equally-sized images maps to an H x W x bands tensor.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError, ShapeError
from .tensors import DenseTensor3, Shape3, SparseTensor3

__all__ = [
    "read_coo",
    "write_coo",
    "read_dense",
    "write_dense",
    "ingest_ppm",
    "export_ppm",
]

DENSE_MAGIC = b"DT3\x00"


def read_coo(path) -> SparseTensor3:
    with open(path, "r") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 4:
            raise ParseError(f"{path}: COO header must be 'I1 I2 I3 nnz'", offset=0)
        try:
            I1, I2, I3, nnz = (int(p) for p in parts)
        except ValueError:
            raise ParseError(f"{path}: non-integer COO header {header!r}", offset=0)
        shape = Shape3((I1, I2, I3))
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 4))
    if data.shape != (nnz, 4):
        raise ParseError(
            f"{path}: expected {nnz} 'i1 i2 i3 value' lines, got array {data.shape}"
        )
    return SparseTensor3(shape, data[:, 0] - 1, data[:, 1] - 1, data[:, 2] - 1,
                         data[:, 3])


def write_coo(path, t: SparseTensor3):
    with open(path, "w") as fh:
        d = t.shape.dims
        fh.write(f"{d[0]} {d[1]} {d[2]} {t.nnz}\n")
        for a, b, c, v in zip(t.i1, t.i2, t.i3, t.values):
            fh.write(f"{a + 1} {b + 1} {c + 1} {float(v)!r}\n")


def read_dense(path) -> DenseTensor3:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DENSE_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}", offset=0)
        dims = np.fromfile(fh, dtype="<u8", count=3)
        if dims.size != 3:
            raise ParseError(f"{path}: truncated extents", offset=4)
        shape = Shape3(tuple(int(d) for d in dims))
        values = np.fromfile(fh, dtype="<f8", count=shape.size)
        if values.size != shape.size:
            raise ParseError(
                f"{path}: expected {shape.size} values, got {values.size}", offset=28
            )
    return DenseTensor3(shape, values)


def write_dense(path, t: DenseTensor3):
    with open(path, "wb") as fh:
        fh.write(DENSE_MAGIC)
        np.asarray(t.shape.dims, dtype="<u8").tofile(fh)
        t.values.astype("<f8").tofile(fh)


def _ppm_tokens(data: bytes):
    """Yield (token, offset) for header fields, skipping whitespace/comments."""
    i = 0
    while i < len(data):
        c = data[i:i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        else:
            start = i
            while i < len(data) and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
                i += 1
            yield data[start:i], start


def _read_one_ppm(path) -> np.ndarray:
    """One PPM file as an H x W x 3 float array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _ppm_tokens(data)

    def need(what):
        try:
            return next(toks)
        except StopIteration:
            raise ParseError(f"{path}: unexpected EOF reading {what}", offset=len(data))

    magic, off = need("magic")
    if magic not in (b"P3", b"P6"):
        raise ParseError(f"{path}: not a P3/P6 PPM (magic {magic!r})", offset=off)
    fields = []
    for what in ("width", "height", "maxval"):
        tok, off = need(what)
        try:
            fields.append(int(tok))
        except ValueError:
            raise ParseError(f"{path}: bad {what} {tok!r}", offset=off)
    w, h, maxval = fields
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ParseError(f"{path}: invalid dimensions {w}x{h} maxval {maxval}", offset=off)
    n = w * h * 3
    if magic == b"P6":
        if maxval > 255:
            raise ParseError(f"{path}: only 8-bit P6 supported", offset=off)
        start = off + len(str(maxval)) + 1  # single whitespace after maxval
        raw = data[start:start + n]
        if len(raw) < n:
            raise ParseError(
                f"{path}: P6 payload truncated ({len(raw)} of {n} bytes)",
                offset=start + len(raw))
        pix = np.frombuffer(raw, dtype=np.uint8, count=n).astype(np.float64)
    else:
        vals = []
        for _ in range(n):
            tok, off = need("pixel value")
            try:
                vals.append(int(tok))
            except ValueError:
                raise ParseError(f"{path}: bad pixel value {tok!r}", offset=off)
        pix = np.asarray(vals, dtype=np.float64)
        if np.any(pix > maxval) or np.any(pix < 0):
            raise ParseError(f"{path}: pixel value out of range 0..{maxval}")
    return (pix / maxval).reshape(h, w, 3)


def ingest_ppm(paths) -> DenseTensor3:
    """One image -> H x W x 3 tensor; a stack -> H x W x (3 * len) tensor."""
    paths = [paths] if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__") else list(paths)
    if not paths:
        raise ShapeError("no PPM paths given")
    imgs = [_read_one_ppm(p) for p in paths]
    base = imgs[0].shape
    for p, im in zip(paths, imgs):
        if im.shape != base:
            raise ShapeError(f"{p}: image size {im.shape} differs from {base}")
    return DenseTensor3.from_array(np.concatenate(imgs, axis=2))


def export_ppm(path, t: DenseTensor3, maxval: int = 255, raw: bool = False):
    """Write an H x W x 3 tensor as a PPM image, clipping to [0, 1].

    Plain (P3) export followed by ingest is lossless for values on the
    maxval grid.
    """
    dims = t.shape.dims
    if dims[2] != 3:
        raise ShapeError(f"PPM export needs 3 bands, got {dims[2]}")
    arr = np.clip(t.as_array(), 0.0, 1.0)
    pix = np.rint(arr * maxval).astype(np.uint16 if maxval > 255 else np.uint8)
    h, w = dims[0], dims[1]
    if raw:
        if maxval > 255:
            raise ShapeError("raw (P6) export is 8-bit only")
        with open(path, "wb") as fh:
            fh.write(f"P6 {w} {h} {maxval}\n".encode())
            pix.reshape(h, w * 3).tofile(fh)
    else:
        with open(path, "w") as fh:
            fh.write(f"P3\n{w} {h}\n{maxval}\n")
            flat = pix.reshape(h, w * 3)
            for row in flat:
                fh.write(" ".join(str(v) for v in row) + "\n")
