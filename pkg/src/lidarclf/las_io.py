"""LAS point cloud ingestion.

Reads LAS 1.2-1.4 binary files (point record formats 0-3 and 6-8,
little-endian throughout), keeps the seven attributes the pipeline uses
(x, y, z, intensity, scan_angle, num_returns, return_number) plus the
classification code, and provides class filtering and order-preserving
uniform subsampling. A plain CSV reader/writer with the same columns is
included so pipelines can run without binary fixtures, and a minimal LAS
writer exists for building test files.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, EmptyCloud, SampleTooLarge, Truncated, UnsupportedFormat

SUPPORTED_FORMATS = frozenset({0, 1, 2, 3, 6, 7, 8})

# Target classes: ground, noise, water, rail, bridge deck, high noise.
DEFAULT_CLASS_CODES = frozenset({2, 7, 9, 10, 17, 18})

CSV_COLUMNS = ("x", "y", "z", "intensity", "scan_angle",
               "num_returns", "return_number", "class")

_MIN_RECORD_LENGTH = {0: 20, 1: 28, 2: 26, 3: 34, 6: 30, 7: 36, 8: 38}

# Scan angle unit for point formats 6-10 (signed short in 0.006 degree steps).
_ANGLE_UNIT_14 = 0.006


@dataclass(frozen=True)
class LasHeader:
    version_major: int
    version_minor: int
    point_data_format: int
    point_count: int
    point_record_length: int
    offset_to_points: int
    scale_x: float
    scale_y: float
    scale_z: float
    offset_x: float
    offset_y: float
    offset_z: float


@dataclass(frozen=True)
class LidarPoint:
    x: float
    y: float
    z: float
    intensity: float
    scan_angle: float
    num_returns: int
    return_number: int
    class_code: int


@dataclass(frozen=True)
class PointCloud:
    """Columnar point storage; file order is preserved.

    ``clamp_warnings`` counts records whose scan angle or return fields
    were out of range and got clamped during parsing.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    intensity: np.ndarray
    scan_angle: np.ndarray
    num_returns: np.ndarray
    return_number: np.ndarray
    class_code: np.ndarray
    clamp_warnings: int = 0

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, i: int) -> LidarPoint:
        return LidarPoint(
            float(self.x[i]), float(self.y[i]), float(self.z[i]),
            float(self.intensity[i]), float(self.scan_angle[i]),
            int(self.num_returns[i]), int(self.return_number[i]),
            int(self.class_code[i]),
        )

    def take(self, indices) -> "PointCloud":
        idx = np.asarray(indices)
        return PointCloud(
            self.x[idx], self.y[idx], self.z[idx], self.intensity[idx],
            self.scan_angle[idx], self.num_returns[idx],
            self.return_number[idx], self.class_code[idx],
            clamp_warnings=self.clamp_warnings,
        )

    def class_counts(self) -> dict[int, int]:
        codes, counts = np.unique(self.class_code, return_counts=True)
        return {int(c): int(n) for c, n in zip(codes, counts)}


def from_points(points) -> PointCloud:
    """Build a cloud from an iterable of LidarPoint (fixtures, synthesis)."""
    pts = list(points)
    if not pts:
        raise EmptyCloud("cannot build a cloud from zero points")
    cols = {name: np.array([getattr(p, name) for p in pts]) for name in
            ("x", "y", "z", "intensity", "scan_angle")}
    return PointCloud(
        x=cols["x"].astype(float), y=cols["y"].astype(float),
        z=cols["z"].astype(float), intensity=cols["intensity"].astype(float),
        scan_angle=cols["scan_angle"].astype(float),
        num_returns=np.array([p.num_returns for p in pts], dtype=np.int64),
        return_number=np.array([p.return_number for p in pts], dtype=np.int64),
        class_code=np.array([p.class_code for p in pts], dtype=np.int64),
    )


def parse_header(data: bytes) -> LasHeader:
    if len(data) < 4 or data[:4] != b"LASF":
        raise BadMagic("not a LAS file (missing LASF signature)")
    if len(data) < 227:
        raise Truncated(f"header needs at least 227 bytes, got {len(data)}")

    version_major, version_minor = struct.unpack_from("<BB", data, 24)
    header_size, offset_to_points = struct.unpack_from("<HI", data, 94)
    point_format, record_length, legacy_count = struct.unpack_from("<BHI", data, 104)
    scale_x, scale_y, scale_z, offset_x, offset_y, offset_z = \
        struct.unpack_from("<6d", data, 131)

    # Bit 7 of the format id flags LAZ compression, which is out of scope.
    if point_format & 0x80:
        raise UnsupportedFormat("compressed (LAZ) input is not supported")
    if point_format not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(
            f"point data format {point_format} not in supported set "
            f"{sorted(SUPPORTED_FORMATS)}")
    if record_length < _MIN_RECORD_LENGTH[point_format]:
        raise Truncated(
            f"record length {record_length} below the minimum "
            f"{_MIN_RECORD_LENGTH[point_format]} for format {point_format}")
    if offset_to_points < header_size:
        raise Truncated("point data offset lies inside the header")

    point_count = legacy_count
    if version_minor >= 4:
        if len(data) < 255:
            raise Truncated("LAS 1.4 header truncated")
        (count64,) = struct.unpack_from("<Q", data, 247)
        if count64:
            point_count = count64

    return LasHeader(
        version_major=version_major, version_minor=version_minor,
        point_data_format=point_format, point_count=point_count,
        point_record_length=record_length, offset_to_points=offset_to_points,
        scale_x=scale_x, scale_y=scale_y, scale_z=scale_z,
        offset_x=offset_x, offset_y=offset_y, offset_z=offset_z,
    )


def _point_dtype(point_format: int, record_length: int) -> np.dtype:
    if point_format <= 5:
        fields = {
            "X": ("<i4", 0), "Y": ("<i4", 4), "Z": ("<i4", 8),
            "intensity": ("<u2", 12), "flags": ("u1", 14),
            "classification": ("u1", 15), "scan_angle": ("i1", 16),
        }
    else:
        fields = {
            "X": ("<i4", 0), "Y": ("<i4", 4), "Z": ("<i4", 8),
            "intensity": ("<u2", 12), "returns": ("u1", 14),
            "classification": ("u1", 16), "scan_angle": ("<i2", 18),
        }
    names = list(fields)
    return np.dtype({
        "names": names,
        "formats": [fields[n][0] for n in names],
        "offsets": [fields[n][1] for n in names],
        "itemsize": record_length,
    })


def parse_las(data: bytes) -> PointCloud:
    """Decode LAS bytes into a PointCloud.

    Coordinates come back scaled (raw * scale + offset). Out-of-range
    scan angles and zero return fields are clamped and counted in
    ``clamp_warnings`` rather than rejected.
    """
    header = parse_header(data)
    n = header.point_count
    fmt = header.point_data_format
    need = header.offset_to_points + n * header.point_record_length
    if len(data) < need:
        raise Truncated(
            f"header declares {n} x {header.point_record_length}-byte records "
            f"at offset {header.offset_to_points}; need {need} bytes, "
            f"got {len(data)}")

    raw = np.frombuffer(data, dtype=_point_dtype(fmt, header.point_record_length),
                        count=n, offset=header.offset_to_points)

    x = raw["X"].astype(np.float64) * header.scale_x + header.offset_x
    y = raw["Y"].astype(np.float64) * header.scale_y + header.offset_y
    z = raw["Z"].astype(np.float64) * header.scale_z + header.offset_z
    intensity = raw["intensity"].astype(np.float64)

    if fmt <= 5:
        flags = raw["flags"]
        return_number = (flags & 0x07).astype(np.int64)
        num_returns = ((flags >> 3) & 0x07).astype(np.int64)
        class_code = (raw["classification"] & 0x1F).astype(np.int64)
        scan_angle = raw["scan_angle"].astype(np.float64)
    else:
        returns = raw["returns"]
        return_number = (returns & 0x0F).astype(np.int64)
        num_returns = ((returns >> 4) & 0x0F).astype(np.int64)
        class_code = raw["classification"].astype(np.int64)
        scan_angle = raw["scan_angle"].astype(np.float64) * _ANGLE_UNIT_14

    clamps = 0
    bad_angle = (scan_angle < -90.0) | (scan_angle > 90.0)
    if bad_angle.any():
        clamps += int(bad_angle.sum())
        scan_angle = np.clip(scan_angle, -90.0, 90.0)
    bad_nr = num_returns < 1
    if bad_nr.any():
        clamps += int(bad_nr.sum())
        num_returns = np.where(bad_nr, 1, num_returns)
    bad_rn = return_number < 1
    if bad_rn.any():
        clamps += int(bad_rn.sum())
        return_number = np.where(bad_rn, 1, return_number)
    over = return_number > num_returns
    if over.any():
        clamps += int(over.sum())
        return_number = np.where(over, num_returns, return_number)

    return PointCloud(x=x, y=y, z=z, intensity=intensity,
                      scan_angle=scan_angle, num_returns=num_returns,
                      return_number=return_number, class_code=class_code,
                      clamp_warnings=clamps)


def write_las(cloud: PointCloud, point_format: int = 0,
              scale: tuple[float, float, float] = (0.001, 0.001, 0.001),
              offset: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> bytes:
    """Encode a cloud as LAS bytes (test fixture support).

    Formats 0-3 are written as LAS 1.2, formats 6-8 as LAS 1.4. For
    formats 0-5 the scan angle is rounded to whole degrees; for 6-8 to
    0.006 degree steps. Coordinates are quantized by ``scale``.
    """
    if point_format not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"cannot write point format {point_format}")
    n = len(cloud)
    record_length = _MIN_RECORD_LENGTH[point_format]
    modern = point_format >= 6
    version_minor = 4 if modern else 2
    header_size = 375 if modern else 227

    rec = np.zeros(n, dtype=_point_dtype(point_format, record_length))
    for name, sc, off in (("X", scale[0], offset[0]),
                          ("Y", scale[1], offset[1]),
                          ("Z", scale[2], offset[2])):
        col = getattr(cloud, name.lower())
        rec[name] = np.round((col - off) / sc).astype(np.int64)
    rec["intensity"] = np.clip(cloud.intensity, 0, 65535).astype(np.uint16)

    rn = np.clip(cloud.return_number, 1, 15 if modern else 7)
    nr = np.clip(cloud.num_returns, 1, 15 if modern else 7)
    if modern:
        rec["returns"] = (rn | (nr << 4)).astype(np.uint8)
        rec["classification"] = np.clip(cloud.class_code, 0, 255).astype(np.uint8)
        rec["scan_angle"] = np.round(cloud.scan_angle / _ANGLE_UNIT_14).astype(np.int16)
    else:
        rec["flags"] = (rn | (nr << 3)).astype(np.uint8)
        rec["classification"] = (cloud.class_code.astype(np.int64) & 0x1F).astype(np.uint8)
        rec["scan_angle"] = np.round(cloud.scan_angle).astype(np.int8)

    buf = io.BytesIO()
    header = bytearray(header_size)
    header[0:4] = b"LASF"
    struct.pack_into("<BB", header, 24, 1, version_minor)
    struct.pack_into("<HI", header, 94, header_size, header_size)
    struct.pack_into("<BHI", header, 104, point_format, record_length,
                     0 if modern else n)
    struct.pack_into("<6d", header, 131, scale[0], scale[1], scale[2],
                     offset[0], offset[1], offset[2])
    if modern:
        struct.pack_into("<Q", header, 247, n)
    buf.write(bytes(header))
    buf.write(rec.tobytes())
    return buf.getvalue()


def filter_classes(cloud: PointCloud, codes) -> PointCloud:
    """Keep points whose class code is in ``codes``; order preserved."""
    codes = set(int(c) for c in codes)
    if not codes:
        mask = np.zeros(len(cloud), dtype=bool)
    else:
        mask = np.isin(cloud.class_code, sorted(codes))
    return cloud.take(np.flatnonzero(mask))


def subsample_uniform(cloud: PointCloud, s: int) -> PointCloud:
    """Take s points equally spaced in file order: indices floor(i*n/s)."""
    n = len(cloud)
    if s < 1 or s > n:
        raise SampleTooLarge(f"requested {s} of {n} points")
    idx = (np.arange(s, dtype=np.int64) * n) // s
    return cloud.take(idx)


def write_csv(cloud: PointCloud, path) -> None:
    data = np.column_stack([
        cloud.x, cloud.y, cloud.z, cloud.intensity, cloud.scan_angle,
        cloud.num_returns.astype(np.float64),
        cloud.return_number.astype(np.float64),
        cloud.class_code.astype(np.float64),
    ])
    np.savetxt(path, data, delimiter=",", header=",".join(CSV_COLUMNS),
               comments="", fmt="%.10g")


def read_csv(path) -> PointCloud:
    """Read the CSV fallback format (header row naming the columns)."""
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        names = [c.strip().lower() for c in header_line.split(",")]
        missing = [c for c in CSV_COLUMNS if c not in names]
        if missing:
            raise BadMagic(f"CSV is missing columns {missing}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise EmptyCloud(f"{path} holds no points")
    col = {name: data[:, i] for i, name in enumerate(names)}
    return PointCloud(
        x=col["x"], y=col["y"], z=col["z"], intensity=col["intensity"],
        scan_angle=col["scan_angle"],
        num_returns=col["num_returns"].astype(np.int64),
        return_number=col["return_number"].astype(np.int64),
        class_code=col["class"].astype(np.int64),
    )


def load_cloud(path) -> PointCloud:
    """Load a cloud from a .las file or the CSV fallback."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"LASF":
        with open(path, "rb") as fh:
            return parse_las(fh.read())
    return read_csv(path)
