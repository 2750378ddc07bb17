"""Readers and writers for PGM (P5), raw I420 and Y4M (4:2:0) files.

Samples are copied byte for byte; no colour conversion or range scaling.
"""

import os
import re

import numpy as np

from .errors import DimensionError, IoError, ParseError
from .image import YUV420, PlanarImage, chroma_shape

FORMATS = ("pgm", "i420", "y4m")
_EXTENSIONS = {
    ".pgm": "pgm",
    ".y4m": "y4m",
    ".yuv": "i420",
    ".i420": "i420",
}


def guess_format(path):
    ext = os.path.splitext(str(path))[1].lower()
    try:
        return _EXTENSIONS[ext]
    except KeyError:
        raise ParseError(f"cannot infer image format from extension {ext!r}") from None


def load_image(path, format=None, width=None, height=None, frame=0):
    """Read ``path`` into a :class:`PlanarImage`.

    ``format`` is one of ``pgm``, ``i420`` or ``y4m`` (inferred from the file
    extension when omitted). Raw I420 needs ``width`` and ``height``. For Y4M
    and I420 ``frame`` selects the frame index.
    """
    format = format or guess_format(path)
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if format == "pgm":
        return parse_pgm(data)
    if format == "i420":
        if width is None or height is None:
            raise DimensionError("raw I420 requires explicit width and height")
        return parse_i420(data, width, height, frame)
    if format == "y4m":
        return parse_y4m(data, frame)
    raise ValueError(f"unknown format {format!r}")


def save_image(img, path, format=None):
    """Write ``img``; ``load_image`` of the result reproduces it exactly."""
    format = format or guess_format(path)
    if format == "pgm":
        data = encode_pgm(img)
    elif format == "i420":
        data = encode_i420(img)
    elif format == "y4m":
        data = encode_y4m(img)
    else:
        raise ValueError(f"unknown format {format!r}")
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# -- PGM ---------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def parse_pgm(data):
    if not data.startswith(b"P5"):
        raise ParseError("not a binary PGM (missing P5 magic)")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise ParseError("truncated PGM header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise ParseError(f"bad PGM header field {m.group(1)!r}") from None
        pos = m.end()
    width, height, maxval = fields
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ParseError("PGM header must end with a single whitespace byte")
    pos += 1
    if width <= 0 or height <= 0:
        raise ParseError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise ParseError(f"only 8-bit PGM supported (maxval {maxval})")
    pixels = data[pos:]
    if len(pixels) != width * height:
        raise DimensionError(f"PGM declares {width}x{height} but carries {len(pixels)} bytes")
    return PlanarImage(np.frombuffer(pixels, np.uint8).reshape(height, width))


def encode_pgm(img):
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.y.tobytes()


# -- raw I420 ----------------------------------------------------------------


def i420_frame_size(width, height):
    ch, cw = chroma_shape(height, width)
    return width * height + 2 * ch * cw


def _split_i420(buf, width, height):
    ch, cw = chroma_shape(height, width)
    ysize, csize = width * height, ch * cw
    y = np.frombuffer(buf, np.uint8, ysize, 0).reshape(height, width)
    cb = np.frombuffer(buf, np.uint8, csize, ysize).reshape(ch, cw)
    cr = np.frombuffer(buf, np.uint8, csize, ysize + csize).reshape(ch, cw)
    return PlanarImage(y, cb, cr, YUV420)


def parse_i420(data, width, height, frame=0):
    size = i420_frame_size(width, height)
    if len(data) == 0 or len(data) % size != 0:
        raise DimensionError(
            f"raw I420 of {len(data)} bytes is not a whole number of {width}x{height} frames"
        )
    if not 0 <= frame < len(data) // size:
        raise DimensionError(f"frame {frame} out of range")
    return _split_i420(data[frame * size : (frame + 1) * size], width, height)


def encode_i420(img):
    if not img.has_chroma:
        raise DimensionError("I420 output needs chroma planes; image is Y-only")
    return img.y.tobytes() + img.cb.tobytes() + img.cr.tobytes()


# -- Y4M ---------------------------------------------------------------------


def parse_y4m(data, frame=0):
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"YUV4MPEG2"):
        raise ParseError("not a Y4M stream")
    params = data[:nl].split()[1:]
    width = height = None
    colour = "420jpeg"
    for p in params:
        tag, val = chr(p[0]), p[1:].decode("ascii", "replace")
        try:
            if tag == "W":
                width = int(val)
            elif tag == "H":
                height = int(val)
        except ValueError:
            raise ParseError(f"bad Y4M parameter {p!r}") from None
        if tag == "C":
            colour = val
    if not width or not height or width < 0 or height < 0:
        raise ParseError("Y4M header lacks valid W/H")
    if not colour.startswith("420"):
        raise ParseError(f"unsupported Y4M colour space C{colour}")
    size = i420_frame_size(width, height)
    pos = nl + 1
    index = 0
    while True:
        if pos >= len(data):
            raise DimensionError(f"Y4M stream has no frame {frame}")
        fnl = data.find(b"\n", pos)
        if fnl < 0 or not data.startswith(b"FRAME", pos):
            raise ParseError("bad Y4M frame header")
        start = fnl + 1
        if start + size > len(data):
            raise DimensionError("truncated Y4M frame")
        if index == frame:
            return _split_i420(data[start : start + size], width, height)
        pos = start + size
        index += 1


def encode_y4m(img, fps="30:1"):
    if not img.has_chroma:
        raise DimensionError("Y4M output supports C420 only; image is Y-only")
    header = f"YUV4MPEG2 W{img.width} H{img.height} F{fps} C420\n".encode("ascii")
    return header + b"FRAME\n" + encode_i420(img)
