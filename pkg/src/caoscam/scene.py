"""Ground-truth irradiance scenes on the CAOS pixel grid.

Irradiance is dimensionless scaled optical power with the brightest
(reference) patch at 1.0. Pixels outside the illuminated mask are exactly
zero and serve as the dark-pixel noise reference after decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "SceneImage",
    "TargetSpec",
    "TABLE1_DR_DB",
    "TABLE1_M_DB",
    "TABLE1_SNR",
    "table1_override",
    "generate_patch_target",
    "generate_flat_field",
]

# Published per-patch results for the 36-patch target (patches 1-14).
TABLE1_DR_DB = (0.0, 4.6, 9.2, 13.8, 18.2, 22.8, 27.4, 32.0, 36.6, 41.2, 45.8, 50.2, 54.8, 59.4)
TABLE1_M_DB = (0.0, 4.2, 8.9, 12.5, 17.1, 21.5, 26.0, 30.0, 34.0, 37.5, 44.5, 48.4, 52.4, 55.3)
TABLE1_SNR = (836.7, 516.8, 301.9, 198.3, 117.4, 70.7, 42.1, 26.6, 16.8, 11.2, 5.0, 3.2, 2.0, 1.4)


def table1_override(patch_count: int = 36, step_db: float = 4.6) -> tuple[float, ...]:
    """Attenuation table matching the published patches 1-14.

    Patches beyond 14 continue in ``step_db`` increments, which for 36
    patches ends near 160 dB like the physical target.
    """
    if patch_count <= len(TABLE1_DR_DB):
        return TABLE1_DR_DB[:patch_count]
    extra = [TABLE1_DR_DB[-1] + step_db * i for i in range(1, patch_count - len(TABLE1_DR_DB) + 1)]
    return TABLE1_DR_DB + tuple(round(v, 10) for v in extra)


@dataclass(frozen=True)
class SceneImage:
    """Scaled irradiance on a ``rows x cols`` CAOS pixel grid.

    ``patch_map`` holds labels 1..n for target patches and 0 elsewhere;
    ``truth_dr_db[i]`` is the nominal attenuation of patch ``i + 1``.
    """

    irradiance: np.ndarray
    illuminated_mask: np.ndarray
    patch_map: np.ndarray | None = None
    truth_dr_db: tuple[float, ...] | None = None

    def __post_init__(self):
        irr = np.asarray(self.irradiance, dtype=np.float64)
        mask = np.asarray(self.illuminated_mask, dtype=bool)
        if irr.ndim != 2 or mask.shape != irr.shape:
            raise ParameterError("irradiance and illuminated_mask must be equal-shape 2-D grids")
        if np.any(irr < 0) or not np.all(np.isfinite(irr)):
            raise ParameterError("irradiance must be finite and nonnegative")
        object.__setattr__(self, "irradiance", irr)
        object.__setattr__(self, "illuminated_mask", mask)
        if self.patch_map is not None:
            pm = np.asarray(self.patch_map, dtype=np.int32)
            if pm.shape != irr.shape:
                raise ParameterError("patch_map shape differs from irradiance")
            object.__setattr__(self, "patch_map", pm)

    @property
    def rows(self) -> int:
        return self.irradiance.shape[0]

    @property
    def cols(self) -> int:
        return self.irradiance.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.irradiance.shape

    @property
    def dark_mask(self) -> np.ndarray:
        return ~self.illuminated_mask

    def __add__(self, other: "SceneImage") -> "SceneImage":
        return SceneImage(
            self.irradiance + other.irradiance,
            self.illuminated_mask | other.illuminated_mask,
        )

    def scaled(self, factor: float) -> "SceneImage":
        return SceneImage(self.irradiance * factor, self.illuminated_mask, self.patch_map, self.truth_dr_db)


@dataclass(frozen=True)
class TargetSpec:
    """Geometry and attenuation ladder of the calibrated patch target.

    Without an override, patch ``i`` (1-based) is attenuated by
    ``(i - 1) * total_dr_db / (patch_count - 1)`` dB. An override fixes the
    per-patch attenuations directly and sets ``patch_count`` to its length.
    Patches are laid out in raster order, ``layout_cols`` per row, and the
    whole block is centered in the grid.
    """

    patch_count: int = 36
    total_dr_db: float = 160.0
    patch_size_px: int = 8
    gap_px: int = 1
    border_px: int = 2
    layout_cols: int = 6
    dr_table_override: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dr_table_override is not None:
            table = tuple(float(a) for a in self.dr_table_override)
            if not table:
                raise ParameterError("dr_table_override must not be empty")
            object.__setattr__(self, "dr_table_override", table)
            object.__setattr__(self, "patch_count", len(table))
        if self.patch_count < 1:
            raise ParameterError("patch_count must be >= 1")
        if self.total_dr_db <= 0:
            raise ParameterError("total_dr_db must be > 0")
        if self.patch_size_px < 1 or self.gap_px < 0 or self.border_px < 0 or self.layout_cols < 1:
            raise ParameterError("patch geometry values must be positive")

    def attenuations_db(self) -> tuple[float, ...]:
        if self.dr_table_override is not None:
            return self.dr_table_override
        if self.patch_count == 1:
            return (0.0,)
        step = self.total_dr_db / (self.patch_count - 1)
        return tuple(i * step for i in range(self.patch_count))

    def layout(self) -> tuple[int, int]:
        ncols = min(self.layout_cols, self.patch_count)
        return math.ceil(self.patch_count / ncols), ncols

    def extent(self) -> tuple[int, int]:
        """Rows and columns occupied by the patch block plus its border."""
        gr, gc = self.layout()
        span = lambda n: 2 * self.border_px + n * self.patch_size_px + (n - 1) * self.gap_px  # noqa: E731
        return span(gr), span(gc)


def generate_patch_target(spec: TargetSpec, rows: int, cols: int) -> SceneImage:
    """Render the numbered patch target onto a ``rows x cols`` grid."""
    need_r, need_c = spec.extent()
    if need_r > rows or need_c > cols:
        raise ParameterError(
            f"patch layout needs {need_r}x{need_c} pixels but the grid is {rows}x{cols}"
        )
    atten = spec.attenuations_db()
    gr, gc = spec.layout()
    r0 = spec.border_px + (rows - need_r) // 2
    c0 = spec.border_px + (cols - need_c) // 2
    pitch = spec.patch_size_px + spec.gap_px

    irr = np.zeros((rows, cols))
    pmap = np.zeros((rows, cols), dtype=np.int32)
    for i, a in enumerate(atten):
        pr, pc = divmod(i, gc)
        rs = slice(r0 + pr * pitch, r0 + pr * pitch + spec.patch_size_px)
        cs = slice(c0 + pc * pitch, c0 + pc * pitch + spec.patch_size_px)
        irr[rs, cs] = 10.0 ** (-a / 10.0)
        pmap[rs, cs] = i + 1
    return SceneImage(irr, pmap > 0, pmap, tuple(atten))


def _smooth_profile(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    # bilinear ramp plus a few low-frequency cosine bumps, unnormalized
    h, w = shape
    y, x = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")
    gx, gy, gxy = rng.uniform(-1, 1, size=3)
    prof = gx * x + gy * y + 0.5 * gxy * x * y
    for _ in range(3):
        fx, fy = rng.uniform(0.2, 0.8, size=2)
        px, py = rng.uniform(0, 2 * np.pi, size=2)
        prof += 0.3 * rng.uniform(0.2, 1.0) * np.cos(np.pi * fx * x + px) * np.cos(np.pi * fy * y + py)
    return prof


def generate_flat_field(
    rows: int,
    cols: int,
    mean_level: float = 0.76,
    uniformity_pct: float = 95.0,
    illuminated_region: tuple[int, int, int, int] | None = None,
    seed: int = 0,
) -> SceneImage:
    """Smooth illumination field hitting a requested mean and uniformity.

    Parameters
    ----------
    illuminated_region : (row0, col0, row1, col1), optional
        Half-open rectangle that receives light; defaults to the whole grid.
        Everything outside is dark.
    seed : int
        Seeds the shape of the non-uniformity profile.

    Notes
    -----
    The profile is rescaled in closed form so that
    :func:`caoscam.metrics.uniformity_pct` over the region returns
    ``uniformity_pct`` and the region mean equals ``mean_level``.
    """
    from .metrics import median_smooth

    if not 0 < mean_level <= 1:
        raise ParameterError(f"mean_level must be in (0, 1], got {mean_level}")
    if not 0 < uniformity_pct <= 100:
        raise ParameterError(f"uniformity_pct must be in (0, 100], got {uniformity_pct}")
    r0, c0, r1, c1 = illuminated_region if illuminated_region is not None else (0, 0, rows, cols)
    if not (0 <= r0 < r1 <= rows and 0 <= c0 < c1 <= cols):
        raise ParameterError(
            f"illuminated region {(r0, c0, r1, c1)} does not fit a {rows}x{cols} grid"
        )

    irr = np.zeros((rows, cols))
    mask = np.zeros((rows, cols), dtype=bool)
    mask[r0:r1, c0:c1] = True
    contrast = 1.0 - uniformity_pct / 100.0

    if contrast == 0.0:
        irr[mask] = mean_level
        return SceneImage(irr, mask)

    q = _smooth_profile((r1 - r0, c1 - c0), np.random.default_rng(seed))
    q -= q.mean()
    # median smoothing commutes with positive affine maps, so solve for the
    # amplitude on the smoothed zero-mean shape
    qs = median_smooth(q)
    spread, total = qs.max() - qs.min(), qs.max() + qs.min()
    amp = 2.0 * contrast / (spread - contrast * total)
    field_ = mean_level * (1.0 + amp * q)
    if field_.min() < 0:
        raise ParameterError(f"uniformity {uniformity_pct}% is too low for a nonnegative field")
    irr[r0:r1, c0:c1] = field_
    return SceneImage(irr, mask)
