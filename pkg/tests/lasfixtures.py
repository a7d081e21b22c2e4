"""Hand-rolled LAS byte builders for parser tests.

These encode headers and point records field by field with struct.pack
at explicit offsets, independently of the package's own writer, so the
parser is checked against a second implementation of the layout.
"""

import struct

HEADER_SIZE_12 = 227
HEADER_SIZE_14 = 375


def build_header(point_format, record_length, n_points,
                 scale=(0.01, 0.01, 0.01), offset=(0.0, 0.0, 0.0),
                 version_minor=2, offset_to_points=None, declared_count=None):
    header_size = HEADER_SIZE_14 if version_minor >= 4 else HEADER_SIZE_12
    if offset_to_points is None:
        offset_to_points = header_size
    h = bytearray(header_size)
    h[0:4] = b"LASF"
    struct.pack_into("<BB", h, 24, 1, version_minor)
    struct.pack_into("<H", h, 94, header_size)
    struct.pack_into("<I", h, 96, offset_to_points)
    h[104] = point_format
    struct.pack_into("<H", h, 105, record_length)
    count = n_points if declared_count is None else declared_count
    if version_minor >= 4:
        struct.pack_into("<I", h, 107, 0)
        struct.pack_into("<Q", h, 247, count)
    else:
        struct.pack_into("<I", h, 107, count)
    struct.pack_into("<3d", h, 131, *scale)
    struct.pack_into("<3d", h, 155, *offset)
    return bytes(h)


def point_record_legacy(raw_x, raw_y, raw_z, intensity=0, return_number=1,
                        num_returns=1, classification_byte=0, scan_angle=0,
                        gps_time=None, extra=b""):
    """Format 0 record (20 bytes), or format 1 with gps_time (28 bytes)."""
    flags = (return_number & 0x07) | ((num_returns & 0x07) << 3)
    rec = struct.pack("<iiiHBBbBH", raw_x, raw_y, raw_z, intensity, flags,
                      classification_byte, scan_angle, 0, 0)
    if gps_time is not None:
        rec += struct.pack("<d", gps_time)
    return rec + extra


def point_record_modern(raw_x, raw_y, raw_z, intensity=0, return_number=1,
                        num_returns=1, classification=0, scan_angle_units=0,
                        gps_time=0.0, extra=b""):
    """Format 6 record (30 bytes); scan angle in 0.006 degree units."""
    returns = (return_number & 0x0F) | ((num_returns & 0x0F) << 4)
    rec = struct.pack("<iiiHBBBBhHd", raw_x, raw_y, raw_z, intensity, returns,
                      0, classification, 0, scan_angle_units, 0, gps_time)
    return rec + extra


def build_las(point_format, records, **header_kwargs):
    body = b"".join(records)
    if records:
        record_length = len(records[0])
    else:
        record_length = {0: 20, 1: 28, 6: 30}[point_format]
    version_minor = 4 if point_format >= 6 else header_kwargs.pop("version_minor", 2)
    header = build_header(point_format, record_length, len(records),
                          version_minor=version_minor, **header_kwargs)
    return header + body
