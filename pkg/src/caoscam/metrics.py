"""Dynamic-range metrology on decoded CAOS images.

Signal is the mean decoded value over a patch interior; noise is the RMS
decoded value over known-dark pixels. A patch counts as recovered while its
SNR exceeds 1, which marks the camera's detection-limited dynamic range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage, stats

from .errors import ConfigurationError, DomainError, InsufficientDataError

__all__ = [
    "LinearityFit",
    "PatchReport",
    "PatchRow",
    "dr_db",
    "linearity_fit",
    "median_smooth",
    "patch_interiors",
    "patch_snr",
    "region_mask",
    "uniformity_pct",
]

MIN_DARK_PIXELS = 30
MIN_INTERIOR_PIXELS = 4


def _values(image) -> np.ndarray:
    for attr in ("values", "irradiance"):
        if hasattr(image, attr):
            return np.asarray(getattr(image, attr), dtype=np.float64)
    return np.asarray(image, dtype=np.float64)


def dr_db(p_ref, p):
    """Dynamic range ``10 log10(p_ref / p)`` in dB."""
    p_ref = np.asarray(p_ref, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if np.any(p_ref <= 0) or np.any(p <= 0):
        raise DomainError("dynamic range needs strictly positive powers")
    out = 10.0 * np.log10(p_ref / p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PatchRow:
    patch: int
    truth_dr_db: float
    measured_db: float
    snr: float
    signal: float
    recovered: bool


@dataclass(frozen=True)
class PatchReport:
    """Per-patch DR table laid out like the reference DR ladder."""

    rows: tuple[PatchRow, ...]
    dark_rms: float

    @property
    def recovered_patches(self) -> list[int]:
        return [r.patch for r in self.rows if r.recovered]

    def recovered_prefix(self) -> int:
        """Number of leading patches (1, 2, ...) that are all recovered."""
        n = 0
        for r in self.rows:
            if not r.recovered:
                break
            n += 1
        return n

    def row(self, patch: int) -> PatchRow:
        return next(r for r in self.rows if r.patch == patch)


@dataclass(frozen=True)
class LinearityFit:
    slope: float
    intercept: float
    r_squared: float
    x: tuple[float, ...]
    y: tuple[float, ...]


def patch_interiors(patch_map: np.ndarray, erode: int = 1) -> dict[int, np.ndarray]:
    """Boolean interior mask per patch label, eroded ``erode`` pixels inward."""
    patch_map = np.asarray(patch_map)
    out = {}
    for label in np.unique(patch_map):
        if label == 0:
            continue
        m = patch_map == label
        if erode:
            m = ndimage.binary_erosion(m, structure=np.ones((3, 3), bool), iterations=erode)
        out[int(label)] = m
    return out


def patch_snr(decoded, patch_map, dark_mask, truth_dr_db=None, erode: int = 1) -> PatchReport:
    """Signal, measured dB and dark-referenced SNR for every labelled patch.

    Parameters
    ----------
    decoded : DecodedImage or array
        Decoded scaled irradiance.
    patch_map : array of int
        0 for no patch, 1..n for patch labels.
    dark_mask : array of bool
        Pixels known to receive no light.
    truth_dr_db : sequence of float, optional
        Nominal attenuation of patch ``i`` at index ``i - 1``.
    """
    values = _values(decoded)
    dark_mask = np.asarray(dark_mask, dtype=bool)
    patch_map = np.asarray(patch_map)
    if values.shape != dark_mask.shape or values.shape != patch_map.shape:
        raise ConfigurationError("decoded image, patch map and dark mask differ in shape")
    n_dark = int(dark_mask.sum())
    if n_dark < MIN_DARK_PIXELS:
        raise ConfigurationError(f"dark mask has {n_dark} pixels, need at least {MIN_DARK_PIXELS}")
    noise = float(np.sqrt(np.mean(values[dark_mask] ** 2)))

    interiors = patch_interiors(patch_map, erode)
    if not interiors:
        raise ConfigurationError("patch map contains no patches")
    signals = {}
    for label, m in interiors.items():
        if m.sum() < MIN_INTERIOR_PIXELS:
            raise ConfigurationError(
                f"patch {label} has {int(m.sum())} interior pixels, need {MIN_INTERIOR_PIXELS}"
            )
        signals[label] = float(values[m].mean())

    ref = signals[min(signals)]
    rows = []
    for label in sorted(signals):
        s = signals[label]
        measured = dr_db(ref, s) if (s > 0 and ref > 0) else float("nan")
        snr = max(s, 0.0) / noise if noise > 0 else float("inf")
        truth = float(truth_dr_db[label - 1]) if truth_dr_db is not None else float("nan")
        rows.append(PatchRow(label, truth, measured, snr, s, bool(snr > 1.0)))
    return PatchReport(tuple(rows), noise)


def fit_line(x, y) -> LinearityFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2:
        raise InsufficientDataError(f"linearity fit needs >= 2 points, got {x.size}")
    if np.ptp(x) == 0:
        raise InsufficientDataError("linearity fit needs distinct x values")
    res = stats.linregress(x, y)
    return LinearityFit(float(res.slope), float(res.intercept), float(res.rvalue**2),
                        tuple(map(float, x)), tuple(map(float, y)))


def linearity_fit(report: PatchReport) -> LinearityFit:
    """OLS of measured dB against nominal dB over recovered patches."""
    pts = [(r.truth_dr_db, r.measured_db) for r in report.rows if r.recovered and np.isfinite(r.measured_db)]
    if len(pts) < 2:
        raise InsufficientDataError(f"linearity fit needs >= 2 recovered patches, got {len(pts)}")
    x, y = zip(*pts)
    return fit_line(x, y)


def region_mask(shape, region) -> np.ndarray:
    """Accept a boolean mask or a half-open ``(row0, col0, row1, col1)`` rectangle."""
    if isinstance(region, tuple) and len(region) == 4 and not isinstance(region[0], np.ndarray):
        r0, c0, r1, c1 = region
        m = np.zeros(shape, dtype=bool)
        m[r0:r1, c0:c1] = True
        return m
    m = np.asarray(region, dtype=bool)
    if m.shape != tuple(shape):
        raise ConfigurationError("region mask shape differs from image")
    return m


def median_smooth(values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """3x3 median over in-mask neighbours only; out-of-mask output is NaN."""
    v = np.array(values, dtype=np.float64)
    if mask is not None:
        v[~np.asarray(mask, dtype=bool)] = np.nan
    padded = np.pad(v, 1, constant_values=np.nan)
    win = sliding_window_view(padded, (3, 3)).reshape(*v.shape, 9)
    out = np.full(v.shape, np.nan)
    ok = ~np.isnan(v)
    out[ok] = np.nanmedian(win[ok], axis=-1)
    return out


def uniformity_pct(image, region) -> float:
    """Min-max illumination uniformity ``100 (1 - (max - min)/(max + min))``.

    Extremes are taken after a 3x3 median restricted to the region, so a
    single noisy pixel cannot set them.
    """
    values = _values(image)
    mask = region_mask(values.shape, region)
    if not mask.any():
        raise ConfigurationError("uniformity region is empty")
    sm = median_smooth(values, mask)[mask]
    vmax, vmin = sm.max(), sm.min()
    if vmax + vmin <= 0:
        raise DomainError("uniformity is undefined for a non-positive region")
    return float(100.0 * (1.0 - (vmax - vmin) / (vmax + vmin)))
