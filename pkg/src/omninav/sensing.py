"""Sensor models: sparse base lasers, depth-slice scan extraction, and the
base+depth scan merge.

All merging happens in a single body-centered frame; per-sensor scans are
re-expressed with transform_scan_to_body first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import INVALID_RANGE, LaserScan, ScanFrame, normalize_angle


@dataclass(frozen=True)
class BaseLaserConfig:
    """The three sparse base lasers: 60 deg sectors, 15 points each."""

    centers: tuple[float, float, float] = (0.0, math.radians(90.0), math.radians(-90.0))
    fov_per_laser: float = math.radians(60.0)
    points_per_laser: int = 15
    range_min: float = 0.05
    range_max: float = 3.0
    mount_height: float = 0.1

    def __post_init__(self):
        if self.points_per_laser < 2:
            raise ValueError("points_per_laser must be >= 2")
        # sectors must not overlap
        cs = sorted(normalize_angle(c) for c in self.centers)
        for a, b in zip(cs, cs[1:]):
            if b - a < self.fov_per_laser:
                raise ValueError("base laser sectors overlap")

    @property
    def angle_increment(self) -> float:
        return self.fov_per_laser / (self.points_per_laser - 1)


@dataclass(frozen=True)
class DepthScanConfig:
    """Dense scan extracted from a horizontal slice of the depth image."""

    fov: float = math.radians(58.0)
    points: int = 320
    range_min: float = 0.1
    range_max: float = 4.0
    mount_height: float = 1.1
    slice_row: int = 0

    def __post_init__(self):
        if not 0 < self.fov < math.pi:
            raise ValueError("fov must be in (0, pi)")
        if self.points < 2:
            raise ValueError("points must be >= 2")

    @property
    def angle_increment(self) -> float:
        return self.fov / (self.points - 1)


@dataclass
class DepthImage:
    """Row-major depth values in meters; non-positive depth is invalid."""

    width: int
    height: int
    depths: list[float] = field(default_factory=list)
    horizontal_fov: float = math.radians(58.0)

    def __post_init__(self):
        if len(self.depths) != self.width * self.height:
            raise ValueError("depths length must equal width * height")

    def at(self, col: int, row: int) -> float:
        return self.depths[row * self.width + col]


def column_bearing(img: DepthImage, col: int) -> float:
    """Pinhole bearing of an image column; column 0 is leftmost (+Y side)."""
    f = (img.width / 2.0) / math.tan(img.horizontal_fov / 2.0)
    cx = (img.width - 1) / 2.0
    return math.atan((cx - col) / f)


def depth_image_to_scan(img: DepthImage, cfg: DepthScanConfig) -> LaserScan:
    """Extract a laser scan from one horizontal slice of a depth image.

    One beam per pixel column; depth (distance along the optical axis) is
    converted to range by dividing by cos(bearing). Invalid depths stay
    invalid.
    """
    if not 0 <= cfg.slice_row < img.height:
        raise ValueError(f"slice_row {cfg.slice_row} outside image height {img.height}")
    n = img.width
    bearings = [column_bearing(img, c) for c in range(n)]
    # beams ordered by increasing angle: rightmost column first
    ranges = []
    for c in reversed(range(n)):
        d = img.at(c, cfg.slice_row)
        if d <= 0.0 or not math.isfinite(d):
            ranges.append(INVALID_RANGE)
            continue
        r = d / math.cos(bearings[c])
        ranges.append(r if cfg.range_min <= r <= cfg.range_max else INVALID_RANGE)
    angle_min = bearings[-1]
    angle_max = bearings[0]
    inc = (angle_max - angle_min) / (n - 1)
    return LaserScan(angle_min, angle_max, inc, cfg.range_min, cfg.range_max, ranges, ScanFrame.DEPTH)


def transform_scan_to_body(
    scan: LaserScan, mount_bearing: float, mount_offset: tuple[float, float] = (0.0, 0.0)
) -> LaserScan:
    """Re-express a sensor scan in the body frame.

    With zero offset this is a pure angular shift. With a nonzero offset each
    valid endpoint is re-expressed from the body origin and snapped to the
    nearest bin of a uniform grid at the scan's own increment (closer return
    wins on collision).
    """
    ox, oy = mount_offset
    if abs(ox) < 1e-12 and abs(oy) < 1e-12:
        return LaserScan(
            scan.angle_min + mount_bearing,
            scan.angle_max + mount_bearing,
            scan.angle_increment,
            scan.range_min,
            scan.range_max,
            list(scan.ranges),
            scan.frame,
        )
    # endpoint re-expression; bearings may leave the original span slightly
    points = []
    for i, r in enumerate(scan.ranges):
        if r < 0.0:
            continue
        a = scan.angle(i) + mount_bearing
        x = ox + r * math.cos(a)
        y = oy + r * math.sin(a)
        points.append((math.atan2(y, x), math.hypot(x, y)))
    inc = scan.angle_increment
    if not points:
        a0 = scan.angle_min + mount_bearing
        return LaserScan(
            a0, a0 + (len(scan.ranges) - 1) * inc, inc, scan.range_min, scan.range_max,
            [INVALID_RANGE] * len(scan.ranges), scan.frame,
        )
    lo = min(b for b, _ in points)
    hi = max(b for b, _ in points)
    n = max(1, int(round((hi - lo) / inc))) + 1
    ranges = [INVALID_RANGE] * n
    for b, r in points:
        k = min(n - 1, max(0, int(round((b - lo) / inc))))
        if ranges[k] < 0.0 or r < ranges[k]:
            ranges[k] = r
    return LaserScan(lo, lo + (n - 1) * inc, inc, scan.range_min, scan.range_max, ranges, scan.frame)


def _lookup(scan: LaserScan, bearing: float, tol: float) -> float:
    """Nearest beam of `scan` within `tol` of `bearing`, else invalid."""
    if scan.angle_increment <= 0:
        return INVALID_RANGE
    k = int(round((bearing - scan.angle_min) / scan.angle_increment))
    if not 0 <= k < len(scan.ranges):
        return INVALID_RANGE
    if abs(scan.angle(k) - bearing) > tol:
        return INVALID_RANGE
    return scan.ranges[k]


def combine_base_scans(scans: list[LaserScan], cfg: BaseLaserConfig) -> LaserScan:
    """Stitch the per-laser body-frame scans into one sparse BASE scan.

    All sector scans share the same increment; gaps between sectors become
    invalid bins on the common grid.
    """
    if not scans:
        raise ValueError("no base scans given")
    inc = cfg.angle_increment
    lo = min(s.angle_min for s in scans)
    hi = max(s.angle_max for s in scans)
    n = int(round((hi - lo) / inc)) + 1
    ranges = [INVALID_RANGE] * n
    for s in scans:
        for i, r in enumerate(s.ranges):
            if r < 0.0:
                continue
            k = int(round((s.angle(i) - lo) / inc))
            if 0 <= k < n and (ranges[k] < 0.0 or r < ranges[k]):
                ranges[k] = r
    return LaserScan(lo, lo + (n - 1) * inc, inc, cfg.range_min, cfg.range_max, ranges, ScanFrame.BASE)


def merge_scans(base: LaserScan, depth: LaserScan) -> LaserScan:
    """Fuse the sparse base scan and the dense depth scan.

    The merged span is the union hull of both inputs at the depth scan's
    resolution. Overlapping bins take the closer return; bins covered only by
    the base scan get a value only when a base beam lands within half an
    increment of the bin center, everything else stays invalid.
    """
    if base.frame != ScanFrame.BASE or depth.frame != ScanFrame.DEPTH:
        raise ValueError(f"expected BASE + DEPTH scans, got {base.frame} + {depth.frame}")
    inc = depth.angle_increment
    lo = min(base.angle_min, depth.angle_min)
    hi = max(base.angle_max, depth.angle_max)
    n = int(math.floor((hi - lo) / inc + 1e-9)) + 1
    tol = inc / 2 + 1e-12
    ranges = []
    for k in range(n):
        a = lo + k * inc
        rd = _lookup(depth, a, tol)
        rb = _lookup(base, a, tol)
        if rd >= 0.0 and rb >= 0.0:
            ranges.append(min(rd, rb))
        elif rd >= 0.0:
            ranges.append(rd)
        elif rb >= 0.0:
            ranges.append(rb)
        else:
            ranges.append(INVALID_RANGE)
    return LaserScan(
        lo, lo + (n - 1) * inc, inc,
        min(base.range_min, depth.range_min),
        max(base.range_max, depth.range_max),
        ranges, ScanFrame.MERGED,
    )
