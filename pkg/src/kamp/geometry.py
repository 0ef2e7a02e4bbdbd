"""Observation windows, marked point patterns, and pairwise-distance search.

Coordinates live in an axis-aligned rectangular window; the window supplies
the area normalization and the geometry of the translation edge correction.
Pair enumeration uses a cell-list grid so cost scales with the number of
qualifying pairs rather than n^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DegeneratePairError, KampError


class EdgeCorrection(Enum):
    """Symmetric pair-weight schemes for boundary bias."""

    NONE = "none"
    TRANSLATION = "translation"

    @classmethod
    def parse(cls, name: str) -> "EdgeCorrection":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise KampError(
                f"unknown edge correction {name!r}; expected 'none' or 'translation'"
            ) from None


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangular observation region.

    Parameters
    ----------
    x_min, x_max, y_min, y_max : float
        Rectangle bounds in the same length units as the point coordinates.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise KampError(
                f"degenerate window [{self.x_min}, {self.x_max}] x "
                f"[{self.y_min}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def shorter_side(self) -> float:
        return min(self.width, self.height)

    def contains(self, x, y) -> np.ndarray:
        """Boolean mask of points inside or on the boundary."""
        x = np.asarray(x)
        y = np.asarray(y)
        return (
            (x >= self.x_min)
            & (x <= self.x_max)
            & (y >= self.y_min)
            & (y <= self.y_max)
        )

    @classmethod
    def bounding_box(cls, x, y) -> "Window":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size == 0:
            raise KampError("cannot infer a window from an empty pattern")
        w = cls(float(x.min()), float(x.max()), float(y.min()), float(y.max()))
        return w


def window_area(window: Window) -> float:
    """Area of the observation window."""
    return window.area


@dataclass(frozen=True)
class PointPattern:
    """Planar points with one categorical mark per point inside a window.

    Attributes
    ----------
    points : (n, 2) float ndarray
        Point coordinates.
    marks : (n,) ndarray of str
        Categorical label per point (e.g. "background", "immune").
    window : Window
        Observation region; every point must lie inside or on its boundary.
    window_inferred : bool
        True when the window was defaulted to the tight bounding box of the
        points rather than supplied by the caller (recorded in run metadata).
    """

    points: np.ndarray
    marks: np.ndarray
    window: Window
    window_inferred: bool = field(default=False, compare=False)

    def __post_init__(self):
        points = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if points.ndim != 2 or points.shape[1] != 2:
            raise KampError("points must be an (n, 2) array")
        marks = np.asarray(self.marks)
        if marks.shape != (points.shape[0],):
            raise KampError(
                f"marks length {marks.shape} does not match {points.shape[0]} points"
            )
        inside = self.window.contains(points[:, 0], points[:, 1])
        if not bool(np.all(inside)):
            bad = int(np.flatnonzero(~inside)[0])
            raise KampError(
                f"point {bad} at {tuple(points[bad])} lies outside the window"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "marks", marks)

    @classmethod
    def from_arrays(cls, x, y, marks, window: Window | None = None) -> "PointPattern":
        """Build a pattern, defaulting the window to the points' bounding box."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inferred = window is None
        if window is None:
            window = Window.bounding_box(x, y)
        return cls(
            points=np.column_stack([x, y]),
            marks=np.asarray(marks),
            window=window,
            window_inferred=inferred,
        )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def mark_count(self, mark) -> int:
        return int(np.sum(self.marks == mark))

    def subset(self, mask) -> "PointPattern":
        """Sub-pattern of the masked points; window is kept unchanged."""
        mask = np.asarray(mask)
        return PointPattern(
            points=self.points[mask],
            marks=self.marks[mask],
            window=self.window,
            window_inferred=self.window_inferred,
        )

    def with_marks(self, marks) -> "PointPattern":
        return PointPattern(
            points=self.points,
            marks=np.asarray(marks),
            window=self.window,
            window_inferred=self.window_inferred,
        )


@dataclass(frozen=True)
class PairStream:
    """Unordered point pairs (i < j) within a cutoff distance.

    ``dist_sq`` is the exact quantity used for qualification and radius
    binning; ``dist`` is its square root, provided for consumers that want
    plain distances. Iterating yields (i, j, dist) triples.
    """

    i: np.ndarray
    j: np.ndarray
    dist: np.ndarray
    dist_sq: np.ndarray
    r_max: float

    def __len__(self) -> int:
        return self.i.shape[0]

    def __iter__(self):
        for k in range(self.i.shape[0]):
            yield int(self.i[k]), int(self.j[k]), float(self.dist[k])


def translation_weight(p_i, p_j, window: Window) -> float:
    """Translation edge-correction weight for one pair of points.

    The weight is |A| over the area of the window intersected with itself
    shifted by the pair displacement: |A| / ((width - |dx|)(height - |dy|)).
    It is symmetric in the two points and >= 1, with equality only for
    coincident points.
    """
    dx = abs(float(p_i[0]) - float(p_j[0]))
    dy = abs(float(p_i[1]) - float(p_j[1]))
    if dx >= window.width or dy >= window.height:
        raise DegeneratePairError(
            f"pair displacement ({dx}, {dy}) reaches the window extent "
            f"({window.width}, {window.height}); input is corrupt"
        )
    return window.area / ((window.width - dx) * (window.height - dy))


def translation_weights(abs_dx, abs_dy, window: Window) -> np.ndarray:
    """Vectorized translation weights from absolute displacements."""
    abs_dx = np.asarray(abs_dx, dtype=float)
    abs_dy = np.asarray(abs_dy, dtype=float)
    if np.any(abs_dx >= window.width) or np.any(abs_dy >= window.height):
        raise DegeneratePairError("a pair displacement reaches the window extent")
    return window.area / ((window.width - abs_dx) * (window.height - abs_dy))


def pair_weights(pattern: PointPattern, pairs: PairStream, correction: EdgeCorrection) -> np.ndarray:
    """Edge-correction weight for every pair in a stream."""
    if correction is EdgeCorrection.NONE:
        return np.ones(len(pairs))
    adx = np.abs(pattern.x[pairs.i] - pattern.x[pairs.j])
    ady = np.abs(pattern.y[pairs.i] - pattern.y[pairs.j])
    return translation_weights(adx, ady, pattern.window)


def neighbor_pairs(pattern: PointPattern, r_max: float) -> PairStream:
    """All unordered point pairs at distance <= r_max.

    Uses grid binning with cells of side >= r_max so only the 3x3 cell
    neighbourhood of each point is scanned; distance ties at exactly r_max
    are included. Coincident points produce distance-0 pairs.
    """
    if r_max <= 0:
        raise KampError(f"r_max must be positive, got {r_max}")
    empty = np.empty(0)
    if pattern.n < 2:
        return PairStream(
            i=empty.astype(np.int64),
            j=empty.astype(np.int64),
            dist=empty,
            dist_sq=empty,
            r_max=float(r_max),
        )
    w = pattern.window
    xs, ys, orig, starts, nx, ny = _kernels.cell_layout(
        pattern.x, pattern.y, w.x_min, w.y_min, w.width, w.height, r_max
    )
    pi, pj, d2 = _kernels.collect_pairs(xs, ys, orig, starts, nx, ny, float(r_max) ** 2)
    swap = pi > pj
    if swap.any():
        pi, pj = np.where(swap, pj, pi), np.where(swap, pi, pj)
    return PairStream(i=pi, j=pj, dist=np.sqrt(d2), dist_sq=d2, r_max=float(r_max))
