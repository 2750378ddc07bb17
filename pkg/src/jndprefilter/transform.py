"""8x8 DCT, a surrogate intra codec and an adapter for external encoders."""

import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .errors import ExternalCodecError, ParseError
from .image import PlanarImage, pad_to_multiple
from .io import load_image, save_image

DCT8 = kernels.DCT8
SURROGATE = "surrogate"
EXTERNAL = "external"


def forward_dct8(block):
    """Orthonormal 2-D DCT-II of ``block - 128`` (an 8x8 array)."""
    x = np.asarray(block, dtype=np.float64)
    if x.shape != (8, 8):
        raise ValueError(f"expected an 8x8 block, got {x.shape}")
    return DCT8 @ (x - 128.0) @ DCT8.T


def inverse_dct8(coeffs):
    """Inverse of :func:`forward_dct8`; real-valued, neither rounded nor clamped."""
    c = np.asarray(coeffs, dtype=np.float64)
    return DCT8.T @ c @ DCT8 + 128.0


def qstep(qp):
    """HEVC/VVC-style quantizer step, ``2 ** ((qp - 4) / 6)``."""
    return 2.0 ** ((qp - 4) / 6.0)


def block_bits(levels):
    """Code-length proxy of one block of quantized levels (8x8 integers)."""
    total = 4
    for q in np.asarray(levels).ravel():
        q = abs(int(q))
        if q:
            total += 2 * (q.bit_length() - 1) + 3
    return total


@dataclass(frozen=True)
class CodecConfig:
    qp: int = 27
    codec: str = SURROGATE
    # argv template for external encoders; {in}, {out}, {qp} and optional {bs}
    external_command: Optional[List[str]] = None
    recon_format: str = "y4m"
    workdir: Optional[str] = None

    def __post_init__(self):
        if not 0 <= self.qp <= 63:
            raise ValueError(f"qp {self.qp} outside 0..63")
        if self.codec not in (SURROGATE, EXTERNAL):
            raise ValueError(f"unknown codec {self.codec!r}")
        if self.codec == EXTERNAL and not self.external_command:
            raise ValueError("external codec requires a command template")

    @property
    def codec_id(self):
        if self.codec == SURROGATE:
            return SURROGATE
        return "external:" + shlex.join(self.external_command)

    @classmethod
    def parse(cls, text, qp=27):
        """Build from a CLI string: ``surrogate`` or ``external:CMD``."""
        if text == SURROGATE:
            return cls(qp=qp)
        if text.startswith("external:"):
            return cls(qp=qp, codec=EXTERNAL, external_command=shlex.split(text[len("external:"):]))
        raise ValueError(f"bad codec string {text!r}")


@dataclass(frozen=True, eq=False)
class CodecResult:
    reconstructed: PlanarImage
    bits: int


def _code_plane(plane, step):
    h, w = plane.shape
    if h == 0 or w == 0:
        return plane, 0
    padded = np.ascontiguousarray(pad_to_multiple(plane, 8))
    rec, bits = kernels.quantize_plane(padded, step, DCT8)
    return rec[:h, :w], int(bits)


def surrogate_encode(img, cfg=None):
    """Flat-quantized 8x8 DCT coding of every plane at ``cfg.qp``.

    Each block is transformed, quantized with ``qstep(qp)`` (half away from
    zero), charged ``2*floor(log2|q|) + 3`` bits per nonzero level plus 4
    end-of-block bits, dequantized and inverse transformed.
    """
    cfg = cfg or CodecConfig()
    step = qstep(cfg.qp)
    planes, total = [], 0
    for plane in img.planes():
        rec, bits = _code_plane(plane, step)
        planes.append(rec)
        total += bits
    if img.has_chroma:
        rec = PlanarImage(planes[0], planes[1], planes[2], img.subsampling)
    else:
        rec = PlanarImage(planes[0])
    return CodecResult(rec, total)


_BITS_RE = re.compile(r"^\s*bits\s*[:=]\s*(\d+)\s*$", re.IGNORECASE | re.MULTILINE)


def external_encode(img, cfg):
    """Run an external encoder described by ``cfg.external_command``.

    The image is written as Y4M to ``{in}``; the encoder must write its
    reconstruction to ``{out}`` in ``cfg.recon_format``. Bits come from a
    ``bits: N`` line on stdout if present, otherwise from the size of ``{bs}``
    (or of ``{out}`` if the template has no ``{bs}``) times 8.
    """
    if cfg.codec != EXTERNAL:
        raise ValueError("external_encode needs an external codec config")
    base = cfg.workdir or os.environ.get("JNDPREFILTER_TMPDIR") or None
    with tempfile.TemporaryDirectory(prefix="jndcodec-", dir=base) as tmp:
        src = os.path.join(tmp, "input.y4m")
        bs = os.path.join(tmp, "stream.bin")
        template = cfg.external_command
        out = os.path.join(tmp, "recon.yuv" if cfg.recon_format == "i420" else "recon.y4m")
        if not img.has_chroma:
            raise ExternalCodecError("external codecs need 4:2:0 input")
        save_image(img, src, "y4m")
        argv = [a.format(**{"in": src, "out": out, "qp": cfg.qp, "bs": bs}) for a in template]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, cwd=tmp)
        except OSError as exc:
            raise ExternalCodecError(f"cannot run {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalCodecError(
                f"{argv[0]} exited with status {proc.returncode}",
                proc.stdout,
                proc.stderr,
                proc.returncode,
            )
        if not os.path.exists(out):
            raise ParseError(f"encoder produced no reconstruction at {out}")
        rec = load_image(out, cfg.recon_format, width=img.width, height=img.height)
        if rec.y.shape != img.y.shape:
            raise ParseError(f"reconstruction is {rec.width}x{rec.height}, expected {img.width}x{img.height}")
        m = _BITS_RE.search(proc.stdout or "")
        if m:
            bits = int(m.group(1))
        elif any("{bs}" in a for a in template) and os.path.exists(bs):
            bits = os.path.getsize(bs) * 8
        else:
            bits = os.path.getsize(out) * 8
    return CodecResult(rec, bits)


def encode(img, cfg):
    if cfg.codec == SURROGATE:
        return surrogate_encode(img, cfg)
    return external_encode(img, cfg)
