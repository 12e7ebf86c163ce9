"""Multi-channel render target and its two export encodings.

GHFB raw layout (little endian): 4-byte magic "GHFB", u32 width, u32 height,
u32 channel count (16-byte header), then channel-major float32 planes.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

GHFB_MAGIC = b"GHFB"


class FormatError(ValueError):
    """Malformed binary payload (bad magic, truncation, size mismatch)."""


@dataclass
class FrameBuffer:
    width: int
    height: int
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    # (rec_offsets, rec_idx, rec_w, rec_g, rec_T) pixel-major CSR, if retained
    contributors: tuple | None = None

    @property
    def color(self) -> np.ndarray | None:
        return self.channels.get("color")

    @property
    def alpha(self) -> np.ndarray:
        return self.channels["alpha"]

    @property
    def orientation(self) -> np.ndarray | None:
        return self.channels.get("orientation")

    @property
    def validity(self) -> np.ndarray | None:
        return self.channels.get("validity")

    def plane_stack(self) -> tuple[np.ndarray, list[str]]:
        """Flatten channels to (C, H, W) float32 planes plus their names."""
        planes, names = [], []
        for name in sorted(self.channels):
            arr = self.channels[name]
            if arr.ndim == 2:
                planes.append(arr.astype(np.float32))
                names.append(name)
            else:
                for ch in range(arr.shape[2]):
                    planes.append(arr[:, :, ch].astype(np.float32))
                    names.append(f"{name}.{ch}")
        return np.stack(planes, axis=0), names


def color_to_png_bytes(color: np.ndarray, alpha: np.ndarray | None = None) -> bytes:
    """Encode a [0,1] color image (optionally with alpha) as 8-bit PNG."""
    from PIL import Image

    arr = np.clip(color, 0.0, 1.0)
    u8 = (arr * 255.0 + 0.5).astype(np.uint8)
    if alpha is not None:
        a8 = (np.clip(alpha, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
        u8 = np.concatenate([u8, a8[:, :, None]], axis=2)
        img = Image.fromarray(u8, mode="RGBA")
    else:
        img = Image.fromarray(u8, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, color: np.ndarray, alpha: np.ndarray | None = None) -> None:
    with open(path, "wb") as f:
        f.write(color_to_png_bytes(color, alpha))


def read_png(path) -> np.ndarray:
    """Load a PNG as float64 in [0, 1]; RGB channels only."""
    from PIL import Image

    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def write_ghfb(path, fb: FrameBuffer) -> None:
    planes, _ = fb.plane_stack()
    with open(path, "wb") as f:
        f.write(GHFB_MAGIC)
        f.write(struct.pack("<III", fb.width, fb.height, planes.shape[0]))
        f.write(planes.astype("<f4").tobytes())


def read_ghfb(path) -> np.ndarray:
    """Read raw planes back as (C, H, W) float32."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16:
        raise FormatError("truncated header")
    if data[:4] != GHFB_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    width, height, n_ch = struct.unpack("<III", data[4:16])
    expect = 16 + 4 * width * height * n_ch
    if len(data) != expect:
        raise FormatError(f"expected {expect} bytes, file has {len(data)}")
    planes = np.frombuffer(data, dtype="<f4", offset=16)
    return planes.reshape(n_ch, height, width).copy()
