"""Readers and writers for the dataset formats used in evaluation.

* PFM (Middlebury ground truth): grayscale ``Pf`` only.
* KITTI disparity PNG: 16-bit grayscale, ``d = raw / 256``, ``raw = 0`` invalid.
  Encoded and decoded here directly (zlib + chunk parsing) so that the output
  bytes are reproducible; other PNG flavours are rejected.
* Input images (any format Pillow reads), converted to 8-bit gray.
* Pair manifests and calibration files (plain text).
"""

import os
import struct
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._accel import njit
from .types import INVALID, Calibration, DisparityMap, FormatError, GrayImage


class MalformedHeaderError(FormatError):
    pass


class TruncatedDataError(FormatError):
    pass


class TrailingDataError(FormatError):
    pass


class UnsupportedFormatError(FormatError):
    pass


# --------------------------------------------------------------------------
# PFM


def _read_header_line(buf, pos):
    end = buf.find(b"\n", pos)
    if end < 0:
        raise MalformedHeaderError("unterminated PFM header line")
    return buf[pos:end].decode("ascii", errors="replace").strip(), end + 1


def read_pfm(path):
    """Read a grayscale PFM file; non-finite values become invalid pixels."""
    with open(path, "rb") as f:
        buf = f.read()
    magic, pos = _read_header_line(buf, 0)
    if magic == "PF":
        raise UnsupportedFormatError(f"{path}: color PFM ('PF') is not a disparity map")
    if magic != "Pf":
        raise MalformedHeaderError(f"{path}: bad PFM magic {magic[:16]!r}")
    dims, pos = _read_header_line(buf, pos)
    try:
        width, height = (int(t) for t in dims.split())
    except ValueError:
        raise MalformedHeaderError(f"{path}: bad PFM dimensions line {dims!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{path}: bad PFM dimensions {width}x{height}")
    scale_line, pos = _read_header_line(buf, pos)
    try:
        scale = float(scale_line)
    except ValueError:
        raise MalformedHeaderError(f"{path}: bad PFM scale {scale_line!r}") from None
    if scale == 0 or not np.isfinite(scale):
        raise MalformedHeaderError(f"{path}: bad PFM scale {scale_line!r}")
    dtype = "<f4" if scale < 0 else ">f4"
    nbytes = 4 * width * height
    payload = buf[pos:]
    if len(payload) < nbytes:
        raise TruncatedDataError(f"{path}: expected {nbytes} data bytes, found {len(payload)}")
    if len(payload) > nbytes:
        raise TrailingDataError(f"{path}: {len(payload) - nbytes} bytes after the PFM payload")
    data = np.frombuffer(payload, dtype=dtype).reshape(height, width)[::-1]
    data = data.astype(np.float32)
    return DisparityMap(np.where(np.isfinite(data), data, INVALID))


def pfm_bytes(disp):
    h, w = disp.d.shape
    data = np.where(disp.valid, disp.d, np.float32(np.inf)).astype("<f4")
    return f"Pf\n{w} {h}\n-1.0\n".encode("ascii") + data[::-1].tobytes()


def write_pfm(disp, path):
    """Write little-endian grayscale PFM; invalid pixels are stored as +inf."""
    with open(path, "wb") as f:
        f.write(pfm_bytes(disp))


# --------------------------------------------------------------------------
# KITTI 16-bit PNG

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(kind, data):
    crc = zlib.crc32(kind + data) & 0xFFFFFFFF
    return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", crc)


def encode_png16(raw):
    """Encode a uint16 array as a 16-bit grayscale PNG (filter 0, zlib level 6)."""
    raw = np.asarray(raw, dtype=np.uint16)
    h, w = raw.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 16, 0, 0, 0, 0)
    rows = np.ascontiguousarray(raw, dtype=">u2").view(np.uint8).reshape(h, w * 2)
    scan = np.hstack([np.zeros((h, 1), dtype=np.uint8), rows]).tobytes()
    return (PNG_SIGNATURE + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(scan, 6)) + _chunk(b"IEND", b""))


@njit
def _unfilter(data, h, stride, bpp):
    out = np.zeros((h, stride), dtype=np.uint8)
    pos = 0
    for y in range(h):
        ftype = data[pos]
        pos += 1
        for i in range(stride):
            x = np.int32(data[pos + i])
            a = np.int32(out[y, i - bpp]) if i >= bpp else 0
            b = np.int32(out[y - 1, i]) if y > 0 else 0
            c = np.int32(out[y - 1, i - bpp]) if (y > 0 and i >= bpp) else 0
            if ftype == 0:
                v = x
            elif ftype == 1:
                v = x + a
            elif ftype == 2:
                v = x + b
            elif ftype == 3:
                v = x + (a + b) // 2
            elif ftype == 4:
                p = a + b - c
                pa = abs(p - a)
                pb = abs(p - b)
                pc = abs(p - c)
                if pa <= pb and pa <= pc:
                    pr = a
                elif pb <= pc:
                    pr = b
                else:
                    pr = c
                v = x + pr
            else:
                return out, y
            out[y, i] = v & 0xFF
        pos += stride
    return out, -1


def decode_png16(buf, name="<png>"):
    """Decode a 16-bit grayscale, non-interlaced PNG into a uint16 array."""
    if not buf.startswith(PNG_SIGNATURE):
        raise MalformedHeaderError(f"{name}: not a PNG file")
    pos = len(PNG_SIGNATURE)
    header = None
    idat = []
    while True:
        if pos + 8 > len(buf):
            raise TruncatedDataError(f"{name}: PNG ends before IEND")
        length, kind = struct.unpack(">I4s", buf[pos:pos + 8])
        data = buf[pos + 8:pos + 8 + length]
        crc_bytes = buf[pos + 8 + length:pos + 12 + length]
        if len(data) < length or len(crc_bytes) < 4:
            raise TruncatedDataError(f"{name}: truncated {kind!r} chunk")
        if zlib.crc32(kind + data) & 0xFFFFFFFF != struct.unpack(">I", crc_bytes)[0]:
            raise MalformedHeaderError(f"{name}: CRC mismatch in {kind!r} chunk")
        pos += 12 + length
        if kind == b"IHDR":
            if length != 13:
                raise MalformedHeaderError(f"{name}: bad IHDR length")
            header = struct.unpack(">IIBBBBB", data)
        elif kind == b"IDAT":
            idat.append(data)
        elif kind == b"IEND":
            break
    if pos != len(buf):
        raise TrailingDataError(f"{name}: {len(buf) - pos} bytes after IEND")
    if header is None:
        raise MalformedHeaderError(f"{name}: missing IHDR")
    w, h, depth, color, compression, filt, interlace = header
    if depth != 16 or color != 0:
        raise UnsupportedFormatError(
            f"{name}: expected 16-bit grayscale PNG, got bit depth {depth}, color type {color}"
        )
    if compression != 0 or filt != 0 or interlace != 0:
        raise UnsupportedFormatError(f"{name}: interlaced or non-standard PNG is not supported")
    try:
        scan = zlib.decompress(b"".join(idat))
    except zlib.error as exc:
        raise TruncatedDataError(f"{name}: corrupt image data ({exc})") from None
    stride = 2 * w
    if len(scan) != h * (stride + 1):
        raise TruncatedDataError(f"{name}: image data has {len(scan)} bytes, expected {h * (stride + 1)}")
    rows, bad_row = _unfilter(np.frombuffer(scan, dtype=np.uint8), h, stride, 2)
    if bad_row >= 0:
        raise MalformedHeaderError(f"{name}: unknown filter type in row {bad_row}")
    return rows.view(">u2").astype(np.uint16).reshape(h, w)


def read_kitti_disparity(path):
    with open(path, "rb") as f:
        raw = decode_png16(f.read(), str(path))
    d = raw.astype(np.float32) / np.float32(256.0)
    return DisparityMap(np.where(raw > 0, d, INVALID))


def kitti_raw(disp):
    d = np.where(disp.valid, disp.d, 0).astype(np.float64)
    raw = np.clip(np.rint(d * 256.0), 1, 65535).astype(np.uint16)
    return np.where(disp.valid, raw, 0).astype(np.uint16)


def write_kitti_disparity(disp, path):
    """Write KITTI-style PNG: ``raw = round(256 d)`` clamped to [1, 65535], 0 invalid."""
    with open(path, "wb") as f:
        f.write(encode_png16(kitti_raw(disp)))


def read_disparity(path):
    """Read a ground-truth/prediction map by extension (``.pfm`` or ``.png``)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pfm":
        return read_pfm(path)
    if ext == ".png":
        return read_kitti_disparity(path)
    raise UnsupportedFormatError(f"{path}: unknown disparity format {ext!r}")


def write_disparity(disp, path, fmt=None):
    fmt = fmt or ("kitti-png" if str(path).lower().endswith(".png") else "pfm")
    if fmt == "pfm":
        write_pfm(disp, path)
    elif fmt == "kitti-png":
        write_kitti_disparity(disp, path)
    else:
        raise UnsupportedFormatError(f"unknown output format {fmt!r}")


# --------------------------------------------------------------------------
# images

REC601 = (0.299, 0.587, 0.114)


def to_gray(arr):
    """8-bit gray from a 2-D array or an RGB(A) array via Rec. 601 luma."""
    arr = np.asarray(arr)
    if arr.ndim == 3:
        rgb = arr[..., :3].astype(np.float64)
        arr = rgb @ np.asarray(REC601)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return GrayImage(arr)


def read_image(path):
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "RGB", "RGBA"):
            return to_gray(np.array(im))
        if im.mode == "P":
            return to_gray(np.array(im.convert("RGB")))
        raise UnsupportedFormatError(f"{path}: unsupported image mode {im.mode}")


def write_image(img, path):
    from PIL import Image

    Image.fromarray(np.asarray(img.data, dtype=np.uint8), mode="L").save(path)


def downsample_image(img, factor=2):
    """Box-filter downsampling by an integer factor (edges cropped)."""
    h, w = img.data.shape
    hh, ww = h // factor, w // factor
    a = img.data[:hh * factor, :ww * factor].astype(np.float64)
    a = a.reshape(hh, factor, ww, factor).mean(axis=(1, 3))
    return GrayImage(np.rint(a).astype(np.uint8))


def downsample_disparity(disp, factor=2):
    """Mean of the valid disparities in each block, divided by ``factor``."""
    h, w = disp.d.shape
    hh, ww = h // factor, w // factor
    d = disp.d[:hh * factor, :ww * factor].reshape(hh, factor, ww, factor)
    valid = d >= 0
    n = valid.sum(axis=(1, 3))
    s = np.where(valid, d, 0).astype(np.float64).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(n > 0, s / np.maximum(n, 1) / factor, INVALID)
    return DisparityMap(out.astype(np.float32))


# --------------------------------------------------------------------------
# manifest and calibration


@dataclass(frozen=True)
class StereoPairRecord:
    name: str
    left: str
    right: str
    gt_disparity: Optional[str] = None
    calibration: Optional[Calibration] = None


def _clean_lines(path):
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def read_calibration(path):
    """``key=value`` file with ``focal_px`` and ``baseline_m``."""
    values = {}
    for lineno, line in _clean_lines(path):
        if "=" not in line:
            raise MalformedHeaderError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = float(value)
        except ValueError:
            raise MalformedHeaderError(f"{path}:{lineno}: {key} is not a number: {value!r}") from None
    missing = [k for k in ("focal_px", "baseline_m") if k not in values]
    if missing:
        raise MalformedHeaderError(f"{path}: missing {', '.join(missing)}")
    return Calibration(values["focal_px"], values["baseline_m"])


def write_calibration(cal, path):
    with open(path, "w") as f:
        f.write(f"focal_px={cal.focal_px!r}\nbaseline_m={cal.baseline_m!r}\n")


def read_manifest(path):
    """Parse ``name left right [gt] [calib]`` lines; paths are relative to the manifest."""
    base = os.path.dirname(os.path.abspath(path))
    records = []
    seen = set()
    for lineno, line in _clean_lines(path):
        parts = line.split()
        if not 3 <= len(parts) <= 5:
            raise MalformedHeaderError(
                f"{path}:{lineno}: expected 'name left right [gt] [calib]', got {line!r}"
            )
        name = parts[0]
        if name in seen:
            raise MalformedHeaderError(f"{path}:{lineno}: duplicate pair name {name!r}")
        seen.add(name)
        files = [os.path.join(base, p) for p in parts[1:]]
        for f in files:
            if not os.path.isfile(f):
                raise FileNotFoundError(f"{path}:{lineno}: missing file {f}")
        cal = read_calibration(files[3]) if len(files) > 3 else None
        records.append(StereoPairRecord(
            name=name,
            left=files[0],
            right=files[1],
            gt_disparity=files[2] if len(files) > 2 else None,
            calibration=cal,
        ))
    return records
