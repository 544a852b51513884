"""Appearance descriptors: HSV histograms, Bhattacharyya distance, part distance."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .geometry import OrientedRect

H_BINS, S_BINS, V_BINS = 16, 4, 4
N_BINS = H_BINS * S_BINS * V_BINS

_NORM_TOL = 1e-9


class MissingFeatureError(ValueError):
    pass


class EmptyRegionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Descriptor:
    """Normalized HSV histogram plus an optional opaque auxiliary payload.

    ``empty`` flags the all-zero histogram produced by an empty crop.
    """

    hsv_hist: np.ndarray
    aux: Any = None
    empty: bool = False

    def __post_init__(self):
        h = np.asarray(self.hsv_hist, dtype=float)
        if h.ndim != 1 or np.any(h < 0):
            raise ValueError("histogram must be a 1-d vector of non-negative values")
        total = h.sum()
        if total == 0:
            object.__setattr__(self, "empty", True)
        elif abs(total - 1.0) > _NORM_TOL:
            raise ValueError(f"histogram not L1-normalized (sum={total!r})")
        h.setflags(write=False)
        object.__setattr__(self, "hsv_hist", h)

    @classmethod
    def from_counts(cls, counts, aux=None) -> Descriptor:
        c = np.asarray(counts, dtype=float)
        total = c.sum()
        return cls(c / total if total > 0 else c, aux=aux)


@dataclass(eq=False)
class Raster:
    """8-bit RGB image, row-major, shape (height, width, 3)."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("raster pixels must have shape (height, width, 3)")
        self.pixels = px.astype(np.uint8, copy=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def rgb_to_hsv(r: float, g: float, b: float) -> tuple[float, float, float]:
    """Hexcone HSV with h in degrees [0, 360), s and v in [0, 1]."""
    rf, gf, bf = r / 255.0, g / 255.0, b / 255.0
    mx, mn = max(rf, gf, bf), min(rf, gf, bf)
    v = mx
    delta = mx - mn
    if mx == 0 or delta == 0:
        return (0.0, 0.0, v)
    s = delta / mx
    if mx == rf:
        h = 60.0 * (((gf - bf) / delta) % 6.0)
    elif mx == gf:
        h = 60.0 * ((bf - rf) / delta + 2.0)
    else:
        h = 60.0 * ((rf - gf) / delta + 4.0)
    return (h % 360.0, s, v)


def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorized ``rgb_to_hsv`` over an (..., 3) uint8 array."""
    x = np.asarray(rgb, dtype=float) / 255.0
    r, g, b = x[..., 0], x[..., 1], x[..., 2]
    mx = x.max(axis=-1)
    mn = x.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)
    h = np.where(
        mx == r,
        np.mod((g - b) / safe, 6.0),
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta == 0, 0.0, np.mod(60.0 * h, 360.0))
    s = np.where(mx == 0, 0.0, delta / np.where(mx == 0, 1.0, mx))
    return np.stack([h, s, mx], axis=-1)


def hsv_bin_index(hsv: np.ndarray, bins: tuple[int, int, int] = (H_BINS, S_BINS, V_BINS)) -> np.ndarray:
    nh, ns, nv = bins
    h = np.minimum((hsv[..., 0] / 360.0 * nh).astype(int), nh - 1)
    s = np.minimum((hsv[..., 1] * ns).astype(int), ns - 1)
    v = np.minimum((hsv[..., 2] * nv).astype(int), nv - 1)
    return (h * ns + s) * nv + v


def hsv_histogram(
    img: Raster,
    region: OrientedRect,
    mask: np.ndarray | None = None,
    bins: tuple[int, int, int] = (H_BINS, S_BINS, V_BINS),
) -> Descriptor:
    """Joint H x S x V histogram over pixels whose centers fall in ``region``.

    Raises EmptyRegionError when the region misses the image entirely. A
    mask that removes every pixel yields the flagged all-zero histogram.
    """
    x0, y0, x1, y1 = region.bounds()
    c0 = max(int(np.floor(x0)), 0)
    r0 = max(int(np.floor(y0)), 0)
    c1 = min(int(np.ceil(x1)), img.width)
    r1 = min(int(np.ceil(y1)), img.height)
    n_bins = bins[0] * bins[1] * bins[2]
    if c1 <= c0 or r1 <= r0:
        raise EmptyRegionError("region lies outside the image")
    yy, xx = np.mgrid[r0:r1, c0:c1]
    inside = region.contains(xx + 0.5, yy + 0.5)
    if mask is not None:
        inside &= np.asarray(mask, dtype=bool)[r0:r1, c0:c1]
    if not inside.any():
        return Descriptor(np.zeros(n_bins))
    hsv = rgb_to_hsv_array(img.pixels[r0:r1, c0:c1][inside])
    counts = np.bincount(hsv_bin_index(hsv, bins), minlength=n_bins)
    return Descriptor.from_counts(counts)


def bhattacharyya(h1, h2) -> float:
    """sqrt(1 - sum(sqrt(h1 * h2))) for L1-normalized histograms."""
    a = np.asarray(h1, dtype=float)
    b = np.asarray(h2, dtype=float)
    if a.shape != b.shape:
        raise ValueError("histogram lengths differ")
    if abs(a.sum() - 1.0) > _NORM_TOL or abs(b.sum() - 1.0) > _NORM_TOL:
        raise ValueError("bhattacharyya requires L1-normalized histograms")
    # for unit-mass inputs 1 - sum(sqrt(ab)) = sum((sqrt(a) - sqrt(b))^2) / 2;
    # this form has no cancellation, so identical histograms give exactly 0
    d2 = 0.5 * float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))
    return float(np.sqrt(min(1.0, d2)))


AuxMetric = Callable[[Any, Any], float]


def zero_aux_metric(a, b) -> float:
    return 0.0


def vector_aux_metric(scale: float = 1.0) -> AuxMetric:
    """Scaled RMS difference between two equal-length numeric payloads.

    A missing payload on either side contributes nothing.
    """

    def metric(a, b) -> float:
        if a is None or b is None:
            return 0.0
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        if a.shape != b.shape:
            raise ValueError("auxiliary payloads differ in length")
        return scale * float(np.sqrt(np.mean((a - b) ** 2))) if a.size else 0.0

    return metric


def part_distance(g1: Descriptor | None, g2: Descriptor | None, aux_metric: AuxMetric = zero_aux_metric) -> float:
    if g1 is None or g2 is None:
        raise MissingFeatureError("part distance needs descriptors on both proposals")
    return bhattacharyya(g1.hsv_hist, g2.hsv_hist) + float(aux_metric(g1.aux, g2.aux))


# ---- PPM / PBM ----------------------------------------------------------


def _read_tokens(data: bytes, count: int, pos: int = 0) -> tuple[list[bytes], int]:
    tokens = []
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_ppm(path: str | Path) -> Raster:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _read_tokens(data, 4)
    if magic != b"P6" or int(maxval) != 255:
        raise ValueError("only binary 8-bit PPM (P6) is supported")
    w, h = int(w), int(h)
    px = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return Raster(px.reshape(h, w, 3).copy())


def write_ppm(path: str | Path, img: Raster) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + img.pixels.tobytes())


def read_pbm(path: str | Path) -> np.ndarray:
    """Read a PBM bitmap (P1 or P4). 1 (black) marks foreground."""
    data = Path(path).read_bytes()
    (magic, w, h), pos = _read_tokens(data, 3)
    w, h = int(w), int(h)
    if magic == b"P4":
        row_bytes = (w + 7) // 8
        raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=pos)
        bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
        return bits.astype(bool)
    if magic == b"P1":
        digits = [c for c in data[pos - 1 :].decode("ascii") if c in "01"]
        return np.array(digits[: w * h], dtype=int).reshape(h, w).astype(bool)
    raise ValueError(f"unsupported PBM magic {magic!r}")


def write_pbm(path: str | Path, mask: np.ndarray) -> None:
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    packed = np.packbits(m.astype(np.uint8), axis=1)
    Path(path).write_bytes(f"P4\n{w} {h}\n".encode() + packed.tobytes())
