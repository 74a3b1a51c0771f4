"""
Video containers and the PPM/PBM frame formats.

RGB frames are written as binary PPM (P6), masks as binary PBM (P4). Both
carry a ``# maskworld v1`` comment line after the magic number. Pixel
values are clamped to [0, 255] and rounded only when a frame is written.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import ShapeError

FORMAT_COMMENT = b"# maskworld v1"
FRAME_PATTERN = "frame_{:04d}.ppm"
MASK_PATTERN = "mask_{:04d}.pbm"


@dataclass(frozen=True, eq=False)
class RgbVideo:
    """T x H x W x 3 pixels (uint8 or float in pixel units)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim == 3:
            pixels = pixels[None]
        if pixels.ndim != 4 or pixels.shape[-1] != 3 or pixels.shape[0] < 1:
            raise ShapeError(f"RGB video must be (T, H, W, 3), got {pixels.shape}")
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_frames(cls, frames: Sequence[np.ndarray]) -> "RgbVideo":
        return cls(np.stack([np.asarray(f) for f in frames]))

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def resolution(self) -> Tuple[int, int]:
        """(height, width)."""
        return self.pixels.shape[1], self.pixels.shape[2]

    def frame(self, t: int) -> np.ndarray:
        return self.pixels[t]

    @property
    def first(self) -> np.ndarray:
        return self.pixels[0]

    @property
    def last(self) -> np.ndarray:
        return self.pixels[-1]

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(float)


@dataclass(frozen=True, eq=False)
class MaskVideo:
    """T x H x W binary embodiment masks."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim == 2:
            bits = bits[None]
        if bits.ndim != 3 or bits.shape[0] < 1:
            raise ShapeError(f"mask video must be (T, H, W), got {bits.shape}")
        object.__setattr__(self, "bits", bits.astype(bool))

    @classmethod
    def from_frames(cls, frames: Sequence[np.ndarray]) -> "MaskVideo":
        return cls(np.stack([np.asarray(f, dtype=bool) for f in frames]))

    def __len__(self) -> int:
        return self.bits.shape[0]

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.bits.shape[1], self.bits.shape[2]

    def frame(self, t: int) -> np.ndarray:
        return self.bits[t]

    def to_rgb(self) -> RgbVideo:
        """Masks lifted to three channels (set pixels 255, others 0)."""
        lifted = np.repeat(self.bits[..., None], 3, axis=-1).astype(np.uint8) * 255
        return RgbVideo(lifted)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.dtype == np.uint8:
        return pixels
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)


def encode_ppm(frame: np.ndarray) -> bytes:
    """Binary PPM (P6) bytes of an (H, W, 3) frame."""
    frame = to_uint8(frame)
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ShapeError(f"PPM frame must be (H, W, 3), got {frame.shape}")
    height, width = frame.shape[:2]
    header = b"P6\n" + FORMAT_COMMENT + b"\n" + f"{width} {height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(frame).tobytes()


def encode_pbm(mask: np.ndarray) -> bytes:
    """Binary PBM (P4) bytes of an (H, W) mask; set pixels are black (1)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ShapeError(f"PBM mask must be (H, W), got {mask.shape}")
    height, width = mask.shape
    header = b"P4\n" + FORMAT_COMMENT + b"\n" + f"{width} {height}\n".encode("ascii")
    return header + np.packbits(mask, axis=1).tobytes()


def _read_header(data: bytes, fields: int) -> Tuple[bytes, List[int], int]:
    """Magic number, integer header fields and offset of the raster."""
    pos = 0
    tokens: List[bytes] = []
    while len(tokens) < fields + 1:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ShapeError("truncated PNM header")
        tokens.append(data[start:pos])
    try:
        values = [int(t) for t in tokens[1:]]
    except ValueError:
        raise ShapeError(f"non-numeric PNM header: {tokens}")
    # exactly one whitespace byte separates the header from the raster
    return tokens[0], values, pos + 1


def decode_ppm(data: bytes) -> np.ndarray:
    magic, (width, height, maxval), offset = _read_header(data, 3)
    if magic != b"P6" or maxval != 255:
        raise ShapeError(f"expected an 8-bit P6 image, got {magic!r} maxval {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=offset)
    return raster.reshape(height, width, 3).copy()


def decode_pbm(data: bytes) -> np.ndarray:
    magic, (width, height), offset = _read_header(data, 2)
    if magic != b"P4":
        raise ShapeError(f"expected a P4 bitmap, got {magic!r}")
    row_bytes = (width + 7) // 8
    raster = np.frombuffer(data, dtype=np.uint8, count=row_bytes * height, offset=offset)
    return np.unpackbits(raster.reshape(height, row_bytes), axis=1)[:, :width].astype(bool)


def write_ppm(path: Union[str, Path], frame: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(frame))


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())


def write_pbm(path: Union[str, Path], mask: np.ndarray) -> None:
    Path(path).write_bytes(encode_pbm(mask))


def read_pbm(path: Union[str, Path]) -> np.ndarray:
    return decode_pbm(Path(path).read_bytes())


def write_rgb_video(directory: Union[str, Path], video: RgbVideo) -> List[Path]:
    """Write ``frame_0000.ppm`` ... into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(len(video)):
        path = directory / FRAME_PATTERN.format(t)
        write_ppm(path, video.frame(t))
        paths.append(path)
    return paths


def write_mask_video(directory: Union[str, Path], masks: MaskVideo) -> List[Path]:
    """Write ``mask_0000.pbm`` ... into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(len(masks)):
        path = directory / MASK_PATTERN.format(t)
        write_pbm(path, masks.frame(t))
        paths.append(path)
    return paths


def read_rgb_video(directory: Union[str, Path]) -> RgbVideo:
    paths = sorted(Path(directory).glob("frame_*.ppm"))
    if not paths:
        raise ShapeError(f"no PPM frames in {directory}")
    return RgbVideo.from_frames([read_ppm(p) for p in paths])


def read_mask_video(directory: Union[str, Path]) -> MaskVideo:
    paths = sorted(Path(directory).glob("mask_*.pbm"))
    if not paths:
        raise ShapeError(f"no PBM masks in {directory}")
    return MaskVideo.from_frames([read_pbm(p) for p in paths])
