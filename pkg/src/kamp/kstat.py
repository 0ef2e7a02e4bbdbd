"""Empirical univariate and bivariate Ripley's K over a radius grid.

K is accumulated cumulatively from one pass over the qualifying pairs of the
relevant subpattern instead of being recomputed per radius: pair distances
are binned against the grid once and the bin histogram is cumulatively
summed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    IdenticalMarksError,
    InsufficientPointsError,
    KampError,
    RadiusNotOnGridError,
)
from .geometry import EdgeCorrection, PointPattern, neighbor_pairs, pair_weights

DEFAULT_GRID_SIZE = 101


@dataclass(frozen=True)
class RadiusGrid:
    """Ordered evaluation radii for all K-type curves.

    Radii must be non-negative and strictly increasing. When evaluated
    against a window, the largest radius may not exceed half the shorter
    window side (the validity limit of the translation correction).
    """

    radii: np.ndarray

    def __post_init__(self):
        radii = np.ascontiguousarray(np.asarray(self.radii, dtype=float))
        if radii.ndim != 1 or radii.size == 0:
            raise KampError("radius grid must be a non-empty 1-d array")
        if radii[0] < 0:
            raise KampError("radii must be non-negative")
        if np.any(np.diff(radii) <= 0):
            raise KampError("radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)

    def __len__(self) -> int:
        return self.radii.size

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    @property
    def radii_sq(self) -> np.ndarray:
        return self.radii * self.radii

    @classmethod
    def default(cls, window, size: int = DEFAULT_GRID_SIZE) -> "RadiusGrid":
        """Evenly spaced grid from 0 to a quarter of the shorter window side."""
        return cls(np.linspace(0.0, window.shorter_side / 4.0, size))

    @classmethod
    def from_range(cls, r_max: float, step: float) -> "RadiusGrid":
        if r_max <= 0 or step <= 0:
            raise KampError("r_max and step must be positive")
        n_steps = int(round(r_max / step))
        radii = step * np.arange(n_steps + 1)
        if radii[-1] < r_max - 1e-9 * r_max:
            radii = np.append(radii, r_max)
        return cls(radii)

    def validate_for_window(self, window) -> None:
        limit = window.shorter_side / 2.0
        if self.r_max > limit:
            raise KampError(
                f"max radius {self.r_max} exceeds half the shorter window "
                f"side ({limit}); the translation correction is invalid there"
            )

    def index_of(self, r: float, rtol: float = 1e-9) -> int:
        """Index of a radius on the grid, matched within relative tolerance."""
        idx = int(np.argmin(np.abs(self.radii - r)))
        if abs(self.radii[idx] - r) <= rtol * max(1.0, abs(r)):
            return idx
        raise RadiusNotOnGridError(f"radius {r} is not on the evaluation grid")


@dataclass(frozen=True)
class MarkQuery:
    """Which mark (univariate) or ordered mark pair (bivariate) K targets."""

    mark1: str
    mark2: str | None = None

    def __post_init__(self):
        if self.mark2 is not None and self.mark2 == self.mark1:
            raise IdenticalMarksError(
                f"bivariate query needs two distinct marks, got {self.mark1!r} twice"
            )

    @property
    def is_bivariate(self) -> bool:
        return self.mark2 is not None

    @classmethod
    def univariate(cls, mark: str) -> "MarkQuery":
        return cls(mark1=str(mark))

    @classmethod
    def bivariate(cls, mark1: str, mark2: str) -> "MarkQuery":
        return cls(mark1=str(mark1), mark2=str(mark2))

    def describe(self) -> str:
        if self.is_bivariate:
            return f"{self.mark1}:{self.mark2}"
        return self.mark1


@dataclass
class KCurve:
    """One K function evaluated on a radius grid."""

    grid: RadiusGrid
    values: np.ndarray
    n_points: int
    counts: tuple
    correction: EdgeCorrection


def encode_marks(marks: np.ndarray, query: MarkQuery) -> tuple[np.ndarray, tuple]:
    """Int8 mark codes for kernels plus the marked counts of the query.

    Univariate: 1 for the target mark, 0 otherwise, counts (m,).
    Bivariate: 1 / 2 for the two marks, 0 otherwise, counts (m1, m2).
    """
    codes = np.zeros(marks.shape[0], dtype=np.int8)
    codes[marks == query.mark1] = 1
    m1 = int(np.sum(codes == 1))
    if not query.is_bivariate:
        return codes, (m1,)
    codes[marks == query.mark2] = 2
    m2 = int(np.sum(codes == 2))
    return codes, (m1, m2)


def _cumulative_k(pattern, pairs, grid, correction, pair_factor, norm):
    weights = pair_weights(pattern, pairs, correction)
    bins = np.searchsorted(grid.radii_sq, pairs.dist_sq, side="left")
    hist = np.bincount(bins, weights=pair_factor * weights, minlength=len(grid))
    return norm * np.cumsum(hist)


def k_univariate(
    pattern: PointPattern,
    mark: str,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
) -> KCurve:
    """Univariate Ripley's K of the points carrying one mark.

    For each radius r this is |A| / (m(m-1)) times the ordered sum over
    distinct marked pairs of 1(d <= r) e_ij; every unordered pair therefore
    contributes twice.
    """
    grid.validate_for_window(pattern.window)
    sel = pattern.marks == mark
    m = int(np.sum(sel))
    if m < 2:
        raise InsufficientPointsError(
            f"univariate K needs at least 2 points marked {mark!r}, found {m}"
        )
    sub = pattern.subset(sel)
    pairs = neighbor_pairs(sub, grid.r_max)
    norm = pattern.window.area / (m * (m - 1))
    values = _cumulative_k(sub, pairs, grid, correction, 2.0, norm)
    return KCurve(
        grid=grid,
        values=values,
        n_points=pattern.n,
        counts=(m,),
        correction=correction,
    )


def k_bivariate(
    pattern: PointPattern,
    mark1: str,
    mark2: str,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
) -> KCurve:
    """Bivariate (cross-type) Ripley's K between two distinct marks.

    For each radius r this is |A| / (m1 m2) times the sum over ordered
    cross pairs (one point of each mark) of 1(d <= r) e_ij.
    """
    if mark1 == mark2:
        raise IdenticalMarksError("bivariate K needs two distinct marks")
    grid.validate_for_window(pattern.window)
    query = MarkQuery.bivariate(mark1, mark2)
    codes, (m1, m2) = encode_marks(pattern.marks, query)
    if m1 < 1 or m2 < 1:
        raise InsufficientPointsError(
            f"bivariate K needs at least one point of each mark; "
            f"found {m1} x {mark1!r}, {m2} x {mark2!r}"
        )
    sub = pattern.subset(codes > 0)
    sub_codes = codes[codes > 0]
    pairs = neighbor_pairs(sub, grid.r_max)
    cross = sub_codes[pairs.i] != sub_codes[pairs.j]
    weights = pair_weights(sub, pairs, correction)[cross]
    bins = np.searchsorted(grid.radii_sq, pairs.dist_sq[cross], side="left")
    hist = np.bincount(bins, weights=weights, minlength=len(grid))
    values = (pattern.window.area / (m1 * m2)) * np.cumsum(hist)
    return KCurve(
        grid=grid,
        values=values,
        n_points=pattern.n,
        counts=(m1, m2),
        correction=correction,
    )


def theoretical_csr(grid: RadiusGrid) -> np.ndarray:
    """The complete-spatial-randomness baseline pi r^2 on the grid."""
    return np.pi * grid.radii**2
