"""State-space lattice and quantizer.

The lattice with parameter eta uses axis spacing 2*eta/sqrt(n), so the
nearest lattice point is always within eta/sqrt(n) per axis and hence
within eta in Euclidean norm. Points are identified by integer index
vectors so that planner hashing is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError
from .geometry import Box


@dataclass(frozen=True)
class LatticePoint:
    """A lattice point: integer index vector plus its real coordinates."""

    indices: tuple[int, ...]
    coordinates: tuple[float, ...]

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.coordinates)

    def __repr__(self) -> str:  # keep planner traces readable
        return f"LatticePoint{self.indices}"


@dataclass(frozen=True)
class Quantizer:
    """Quantizer onto the lattice with axis spacing 2*eta/sqrt(n).

    Quantization error is at most eta/sqrt(n) per axis and eta in
    Euclidean norm. Cell-boundary ties round half away from zero so the
    map is single-valued and platform-independent.
    """

    n: int
    eta: float

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("dimension must be positive")
        if not (self.eta > 0.0 and np.isfinite(self.eta)):
            raise ValueError("eta must be positive and finite")

    @property
    def spacing(self) -> float:
        return 2.0 * self.eta / np.sqrt(self.n)

    @property
    def cell_half_width(self) -> float:
        return self.eta / np.sqrt(self.n)

    def indices_of(self, x) -> np.ndarray:
        """Integer indices of the nearest lattice point (vectorized).

        Accepts shape (n,) or (N, n); rounds half away from zero.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("cannot quantize non-finite coordinates")
        r = x / self.spacing
        return (np.sign(r) * np.floor(np.abs(r) + 0.5)).astype(np.int64)

    def coords_of_indices(self, k) -> np.ndarray:
        return np.asarray(k, dtype=float) * self.spacing

    def point_from_indices(self, k) -> LatticePoint:
        k = tuple(int(v) for v in k)
        if len(k) != self.n:
            raise ValueError(f"expected {self.n} indices, got {len(k)}")
        coords = tuple(float(v) for v in self.coords_of_indices(k))
        return LatticePoint(indices=k, coordinates=coords)

    def quantize(self, x) -> LatticePoint:
        """Nearest lattice point of a single state vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected shape ({self.n},), got {x.shape}")
        return self.point_from_indices(self.indices_of(x))

    def quantize_coords(self, x) -> np.ndarray:
        """Coordinates of the nearest lattice point(s); shape-preserving."""
        return self.coords_of_indices(self.indices_of(x))

    def cell_of(self, p: LatticePoint) -> Box:
        """Axis-aligned cell of half-width eta/sqrt(n) centered at ``p``.

        Cells of adjacent points tile the space up to shared boundaries.
        """
        c = p.coords
        h = self.cell_half_width
        return Box.make(c - h, c + h)

    def neighbors(self, p: LatticePoint) -> list[LatticePoint]:
        """The 2n axis neighbors, axis-major with minus before plus."""
        out = []
        for axis in range(self.n):
            for step in (-1, 1):
                k = list(p.indices)
                k[axis] += step
                out.append(self.point_from_indices(k))
        return out

    def neighbor_indices(self, k: tuple[int, ...]) -> list[tuple[int, ...]]:
        out = []
        for axis in range(self.n):
            for step in (-1, 1):
                kk = list(k)
                kk[axis] += step
                out.append(tuple(kk))
        return out
