"""Axis-aligned boxes: the common currency for input sets, disturbance sets,
lattice cells, obstacles, and targets."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d]."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have equal length")
        for a, b in zip(self.lo, self.hi):
            if not (np.isfinite(a) and np.isfinite(b)) or a > b:
                raise ValueError(f"invalid box bounds [{a}, {b}]")

    @classmethod
    def make(cls, lo: Sequence[float], hi: Sequence[float]) -> "Box":
        return cls(tuple(float(v) for v in lo), tuple(float(v) for v in hi))

    @classmethod
    def cube(cls, half_width: float, dim: int, center: Sequence[float] | None = None) -> "Box":
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls.make(c - half_width, c + half_width)

    @classmethod
    def point(cls, value: Sequence[float]) -> "Box":
        return cls.make(value, value)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @cached_property
    def lo_arr(self) -> np.ndarray:
        return np.array(self.lo)

    @cached_property
    def hi_arr(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo_arr + self.hi_arr)

    @property
    def widths(self) -> np.ndarray:
        return self.hi_arr - self.lo_arr

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo_arr - tol) and np.all(x <= self.hi_arr + tol))

    def contains_many(self, xs: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Row-wise membership for an (N, d) array."""
        xs = np.asarray(xs, dtype=float)
        return np.all(xs >= self.lo_arr - tol, axis=-1) & np.all(xs <= self.hi_arr + tol, axis=-1)

    def intersects(self, other: "Box") -> bool:
        """Closed-box intersection; shared boundaries count as intersecting."""
        return bool(
            np.all(self.lo_arr <= other.hi_arr) and np.all(self.hi_arr >= other.lo_arr)
        )

    def contains_box(self, inner: "Box", tol: float = 0.0) -> bool:
        return bool(
            np.all(inner.lo_arr >= self.lo_arr - tol)
            and np.all(inner.hi_arr <= self.hi_arr + tol)
        )

    def inflate(self, r: float) -> "Box":
        return Box.make(self.lo_arr - r, self.hi_arr + r)

    def try_shrink(self, r: float) -> Optional["Box"]:
        """Shrink by ``r`` per face; None if some axis empties."""
        lo = self.lo_arr + r
        hi = self.hi_arr - r
        if np.any(lo > hi):
            return None
        return Box.make(lo, hi)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo_arr, self.hi_arr)

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        size = None if n is None else (n, self.dim)
        return rng.uniform(self.lo_arr, self.hi_arr, size=size)

    def corner_sup_norm(self) -> float:
        """Largest Euclidean norm over the box, attained at a corner."""
        return float(np.sqrt(np.sum(np.maximum(self.lo_arr**2, self.hi_arr**2))))

    def corners(self) -> Iterator[np.ndarray]:
        d = self.dim
        for mask in range(2**d):
            yield np.array(
                [self.hi[i] if (mask >> i) & 1 else self.lo[i] for i in range(d)]
            )

    def is_degenerate(self) -> bool:
        return bool(np.all(self.lo_arr == self.hi_arr))
