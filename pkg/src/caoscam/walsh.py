"""Sylvester-ordered Walsh-Hadamard codes and CAOS pixel code assignment.

Every CAOS pixel is tagged with one bipolar row of a K x K Hadamard matrix.
Row 0 (all ones) is never handed out, so each assigned code is zero-mean and
the correlation decoder rejects any constant background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ParameterError

__all__ = [
    "WalshCodebook",
    "assign_codes",
    "build_hadamard",
    "fwht",
    "is_power_of_two",
]


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def build_hadamard(order: int) -> np.ndarray:
    """Return the ``order x order`` Sylvester-Hadamard matrix as int8.

    Built by repeated doubling ``H_2n = [[H, H], [H, -H]]`` starting from
    ``[[1]]``; row 0 is therefore all +1.
    """
    if not is_power_of_two(order):
        raise ParameterError(f"Hadamard order must be a power of 2 >= 1, got {order!r}")
    h = np.ones((1, 1), dtype=np.int8)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


def fwht(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along ``axis``.

    Equivalent to ``build_hadamard(K) @ x`` for Sylvester ordering, in
    O(K log K). Integer input stays integer; float input stays float64.
    """
    src = np.moveaxis(np.asarray(x), axis, -1)
    dtype = np.int64 if np.issubdtype(src.dtype, np.integer) else np.float64
    # C-contiguous copy so the reshaped butterflies below are views into it
    a = np.array(src, dtype=dtype, order="C", copy=True)
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise ParameterError(f"transform length must be a power of 2, got {n}")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        v = a.reshape(*lead, n // (2 * h), 2, h)
        top = v[..., 0, :].copy()
        bot = v[..., 1, :]
        v[..., 0, :] += bot
        v[..., 1, :] = top - bot
        h *= 2
    return np.moveaxis(a, -1, axis)


def assign_codes(pixel_count: int, codebook_order: int) -> list[int]:
    """Code indices for ``pixel_count`` pixels in row-major scan order.

    Pixel ``j`` (0-based, row-major) gets Walsh row ``j + 1``.
    """
    if not is_power_of_two(codebook_order):
        raise ParameterError(f"codebook order must be a power of 2, got {codebook_order!r}")
    if pixel_count < 1:
        raise ParameterError(f"pixel count must be >= 1, got {pixel_count}")
    if pixel_count > codebook_order - 1:
        raise CapacityError(
            f"{pixel_count} pixels exceed the {codebook_order - 1} usable codes "
            f"of a K={codebook_order} codebook (row 0 is reserved)"
        )
    return list(range(1, pixel_count + 1))


@dataclass(frozen=True)
class WalshCodebook:
    """K-bit Walsh codebook plus the per-pixel code assignment.

    Attributes
    ----------
    order : int
        Code length K in bits (power of 2).
    assignment : tuple of int
        One code index per CAOS pixel, row-major, each in ``[1, K-1]``.
    """

    order: int
    assignment: tuple[int, ...]
    _codes: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not is_power_of_two(self.order):
            raise ParameterError(f"codebook order must be a power of 2, got {self.order!r}")
        idx = tuple(int(i) for i in self.assignment)
        if len(idx) > self.order - 1:
            raise CapacityError(
                f"{len(idx)} pixels exceed the {self.order - 1} usable codes of K={self.order}"
            )
        if any(i < 1 or i >= self.order for i in idx):
            raise ParameterError("assignment indices must lie in [1, K-1]")
        if len(set(idx)) != len(idx):
            raise ParameterError("assignment contains duplicate code indices")
        object.__setattr__(self, "assignment", idx)

    @classmethod
    def for_pixels(cls, pixel_count: int, order: int) -> "WalshCodebook":
        return cls(order, tuple(assign_codes(pixel_count, order)))

    @property
    def pixel_count(self) -> int:
        return len(self.assignment)

    @property
    def codes(self) -> np.ndarray:
        """Full K x K bipolar matrix, generated lazily and cached."""
        if self._codes is None:
            h = build_hadamard(self.order)
            h.setflags(write=False)
            object.__setattr__(self, "_codes", h)
        return self._codes

    def pixel_codes(self) -> np.ndarray:
        """M x K matrix of the codes assigned to each pixel."""
        return self.codes[list(self.assignment)]

    def spread(self, values) -> np.ndarray:
        """Place per-pixel values on their code indices in a length-K vector."""
        v = np.zeros(self.order, dtype=np.float64)
        v[list(self.assignment)] = np.ravel(values)
        return v
