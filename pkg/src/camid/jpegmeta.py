"""Minimal JPEG stream parsing: quantization tables and the EXIF Software tag.

Walks the marker segments of a JPEG byte stream directly; no codec involved.
Only what curation needs is extracted: DQT payloads (for quality estimation)
and the Software ASCII field (tag 0x0131) from a TIFF structure embedded in
an APP1 "Exif" segment.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import MissingTablesError, NotAJpegError
from .jpegtables import dezigzag

_SOI = 0xD8
_EOI = 0xD9
_SOS = 0xDA
_DQT = 0xDB
_APP1 = 0xE1
_STANDALONE = {0xD8, 0xD9, 0x01} | set(range(0xD0, 0xD8))  # no length word

_SOFTWARE_TAG = 0x0131
_ASCII_TYPE = 2


def iter_segments(data: bytes):
    """Yield (marker, payload) for each segment up to start-of-scan."""
    if len(data) < 2 or data[0] != 0xFF or data[1] != _SOI:
        raise NotAJpegError("missing SOI marker")
    pos = 2
    while pos + 1 < len(data):
        if data[pos] != 0xFF:
            raise NotAJpegError(f"expected marker at byte {pos}")
        # skip fill bytes
        while pos + 1 < len(data) and data[pos + 1] == 0xFF:
            pos += 1
        marker = data[pos + 1]
        pos += 2
        if marker in _STANDALONE:
            if marker == _EOI:
                return
            continue
        if pos + 2 > len(data):
            raise NotAJpegError("truncated segment header")
        length = struct.unpack(">H", data[pos : pos + 2])[0]
        payload = data[pos + 2 : pos + length]
        yield marker, payload
        pos += length
        if marker == _SOS:
            return


def quant_tables(data: bytes) -> dict[int, np.ndarray]:
    """All quantization tables by id, entries in natural order."""
    tables: dict[int, np.ndarray] = {}
    for marker, payload in iter_segments(data):
        if marker != _DQT:
            continue
        i = 0
        while i < len(payload):
            precision = payload[i] >> 4
            table_id = payload[i] & 0x0F
            i += 1
            if precision == 0:
                raw = np.frombuffer(payload[i : i + 64], dtype=np.uint8)
                i += 64
            else:
                raw = np.frombuffer(payload[i : i + 128], dtype=">u2")
                i += 128
            if raw.size != 64:
                raise NotAJpegError("truncated quantization table")
            tables[table_id] = dezigzag(raw.astype(np.int64))
    if not tables:
        raise MissingTablesError("no DQT segment found")
    return tables


def exif_software(data: bytes) -> str | None:
    """Software string from the EXIF APP1 segment, or None if absent."""
    for marker, payload in iter_segments(data):
        if marker != _APP1 or not payload.startswith(b"Exif\x00\x00"):
            continue
        return _tiff_software(payload[6:])
    return None


def _tiff_software(tiff: bytes) -> str | None:
    if len(tiff) < 8:
        return None
    if tiff[:2] == b"II":
        endian = "<"
    elif tiff[:2] == b"MM":
        endian = ">"
    else:
        return None
    (magic,) = struct.unpack(endian + "H", tiff[2:4])
    if magic != 42:
        return None
    (ifd_offset,) = struct.unpack(endian + "I", tiff[4:8])
    if ifd_offset + 2 > len(tiff):
        return None
    (count,) = struct.unpack(endian + "H", tiff[ifd_offset : ifd_offset + 2])
    for k in range(count):
        entry = tiff[ifd_offset + 2 + 12 * k : ifd_offset + 2 + 12 * (k + 1)]
        if len(entry) < 12:
            return None
        tag, typ, n = struct.unpack(endian + "HHI", entry[:8])
        if tag != _SOFTWARE_TAG or typ != _ASCII_TYPE:
            continue
        if n <= 4:
            raw = entry[8 : 8 + n]
        else:
            (offset,) = struct.unpack(endian + "I", entry[8:12])
            raw = tiff[offset : offset + n]
        return raw.split(b"\x00", 1)[0].decode("ascii", errors="replace")
    return None


def image_dimensions(data: bytes) -> tuple[int, int] | None:
    """(width, height) from the SOF segment, or None if no frame found."""
    for marker, payload in iter_segments(data):
        if 0xC0 <= marker <= 0xCF and marker not in (0xC4, 0xC8, 0xCC):
            height, width = struct.unpack(">HH", payload[1:5])
            return width, height
    return None
