"""Portable float map (grayscale ``Pf``) images with a sibling P5 graymap mask.

PFM stores 32-bit floats, bottom row first. A negative scale in the header
means little-endian data, which is what we always write. Pixels survive a
save/load round trip bit-exactly when they are float32-representable; wider
values are rounded to float32 on save.
"""

import os
import re

import numpy as np

from ..errors import ParseError, ValidationError
from ..image import Image

_TOKEN = re.compile(rb"\S+")


def mask_path(path):
    """``dir/<id>.pfm`` -> ``dir/<id>.mask.pgm``."""
    root, _ = os.path.splitext(os.fspath(path))
    return root + ".mask.pgm"


def _header_tokens(data, count, magic_expected):
    """First ``count`` whitespace-separated header tokens and the data offset."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        m = _TOKEN.search(data, pos)
        if m is None:
            raise ParseError(f"truncated header, expected {count} fields", offset=len(data))
        tokens.append((m.group(), m.start()))
        pos = m.end()
        if len(tokens) == 1 and m.group() != magic_expected:
            raise ParseError(
                f"bad magic {m.group()[:8]!r}, expected {magic_expected.decode()!r}", offset=m.start()
            )
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos : pos + 1] not in (b"\n", b" ", b"\r", b"\t"):
        raise ParseError("missing whitespace after header", offset=pos)
    return tokens, pos + 1


def _int_token(tok, what):
    text, off = tok
    try:
        v = int(text)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {text[:16]!r}", offset=off) from None
    if v <= 0:
        raise ParseError(f"{what} must be positive, got {v}", offset=off)
    return v


def encode_pfm(pixels):
    px = np.asarray(pixels)
    if px.ndim != 2:
        raise ValidationError("PFM writer expects a 2-D array")
    h, w = px.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(px[::-1], dtype="<f4").tobytes()


def decode_pfm(data):
    tokens, start = _header_tokens(data, 4, b"Pf")
    w = _int_token(tokens[1], "width")
    h = _int_token(tokens[2], "height")
    text, off = tokens[3]
    try:
        scale = float(text)
    except ValueError:
        raise ParseError(f"scale is not a number: {text[:16]!r}", offset=off) from None
    if scale == 0 or not np.isfinite(scale):
        raise ParseError("scale must be finite and non-zero", offset=off)
    dtype = "<f4" if scale < 0 else ">f4"
    need = w * h * 4
    have = len(data) - start
    if have < need:
        raise ParseError(f"raster truncated: need {need} bytes, have {have}", offset=len(data))
    if have > need:
        raise ParseError(f"{have - need} trailing bytes after raster", offset=start + need)
    px = np.frombuffer(data, dtype=dtype, count=w * h, offset=start).reshape(h, w)
    return px[::-1].astype(np.float64)


def encode_pgm(mask):
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + (m.astype(np.uint8) * 255).tobytes()


def decode_pgm(data):
    tokens, start = _header_tokens(data, 4, b"P5")
    w = _int_token(tokens[1], "width")
    h = _int_token(tokens[2], "height")
    maxval = _int_token(tokens[3], "maxval")
    if maxval > 255:
        raise ParseError("only 8-bit graymaps are supported", offset=tokens[3][1])
    need = w * h
    have = len(data) - start
    if have < need:
        raise ParseError(f"raster truncated: need {need} bytes, have {have}", offset=len(data))
    if have > need:
        raise ParseError(f"{have - need} trailing bytes after raster", offset=start + need)
    return np.frombuffer(data, dtype=np.uint8, count=need, offset=start).reshape(h, w) > 0


def save_image(path, img):
    """Write ``img`` to ``path`` (PFM) and its mask, if any, to the sibling PGM."""
    with open(path, "wb") as fh:
        fh.write(encode_pfm(img.pixels))
    mpath = mask_path(path)
    if img.mask is not None:
        with open(mpath, "wb") as fh:
            fh.write(encode_pgm(img.mask))
    elif os.path.exists(mpath):
        os.remove(mpath)


def load_image(path):
    with open(path, "rb") as fh:
        pixels = decode_pfm(fh.read())
    mask = None
    mpath = mask_path(path)
    if os.path.exists(mpath):
        with open(mpath, "rb") as fh:
            try:
                mask = decode_pgm(fh.read())
            except ParseError as exc:
                raise ParseError(f"{mpath}: {exc}") from exc
        if mask.shape != pixels.shape:
            raise ParseError(f"mask {mask.shape} does not match image {pixels.shape}")
    return Image(pixels, mask)
