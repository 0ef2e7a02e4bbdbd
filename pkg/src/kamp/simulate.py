"""Synthetic multitype point patterns for the four spatial-organization
conditions used by the test suite and the benchmark harness: homogeneous and
inhomogeneous nulls, and their clustered (alternative) counterparts.

lambda_n is the expected TOTAL cell count of a sample; the per-area
intensity is lambda_n / |A|. The default window is [0, 10] x [0, 10], which
makes the default 25 clusters of radius 1.25 geometrically sensible. All
generators are deterministic given the scenario seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InfeasibleAbundanceError, KampError
from .geometry import PointPattern, Window

BACKGROUND = "background"
IMMUNE = "immune"
IMMUNE1 = "immune1"
IMMUNE2 = "immune2"


class Condition(Enum):
    HOM_NULL = "hom_null"
    INHOM_NULL = "inhom_null"
    HOM_CLUSTERED = "hom_clustered"
    INHOM_CLUSTERED = "inhom_clustered"

    @classmethod
    def parse(cls, name: str) -> "Condition":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise KampError(f"unknown condition {name!r}; expected one of {valid}") from None


def _default_window() -> Window:
    return Window(0.0, 10.0, 0.0, 10.0)


@dataclass
class SimScenario:
    """Parameters of one simulated sample.

    abundance is the expected fraction of cells carrying the immune mark
    (per immune type when ``bivariate``). cluster_* parameters are active in
    the clustered conditions, hole_* in the inhomogeneous-clustered one
    (hole radii are drawn uniformly from the given range).
    """

    condition: Condition
    lambda_n: float
    abundance: float
    window: Window = field(default_factory=_default_window)
    cluster_count: int = 25
    cluster_radius: float = 1.25
    hole_count: int = 5
    hole_radius: tuple[float, float] = (0.5, 1.5)
    bivariate: bool = False
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.abundance < 1.0:
            raise KampError(f"abundance must be in (0, 1), got {self.abundance}")
        if self.bivariate and self.abundance >= 0.5:
            raise KampError("bivariate scenarios need abundance < 0.5 per type")
        if self.lambda_n <= 0:
            raise KampError(f"lambda_n must be positive, got {self.lambda_n}")


def _null_marks(rng, n: int, p: float, bivariate: bool) -> np.ndarray:
    u = rng.random(n)
    if bivariate:
        marks = np.full(n, BACKGROUND, dtype=object)
        marks[u < p] = IMMUNE1
        marks[(u >= p) & (u < 2 * p)] = IMMUNE2
        return marks.astype(str)
    return np.where(u < p, IMMUNE, BACKGROUND)


def sim_hom_null(scenario: SimScenario) -> PointPattern:
    """Homogeneous multitype Poisson process: the classical CSR null."""
    rng = np.random.default_rng(scenario.seed)
    w = scenario.window
    n = rng.poisson(scenario.lambda_n)
    x = rng.uniform(w.x_min, w.x_max, n)
    y = rng.uniform(w.y_min, w.y_max, n)
    marks = _null_marks(rng, n, scenario.abundance, scenario.bivariate)
    return PointPattern.from_arrays(x, y, marks, window=w)


def sim_inhom_null(scenario: SimScenario) -> PointPattern:
    """Inhomogeneous null: intensity proportional to x^2 along the x-axis.

    Both mark types share the same intensity shape, so marks stay
    independent of location; the expected total count is lambda_n.
    """
    rng = np.random.default_rng(scenario.seed)
    w = scenario.window
    n = rng.poisson(scenario.lambda_n)
    # inverse-CDF sampling of density proportional to x^2 on [x_min, x_max]
    u = rng.random(n)
    lo3, hi3 = w.x_min**3, w.x_max**3
    x = np.cbrt(lo3 + u * (hi3 - lo3))
    y = rng.uniform(w.y_min, w.y_max, n)
    marks = _null_marks(rng, n, scenario.abundance, scenario.bivariate)
    return PointPattern.from_arrays(x, y, marks, window=w)


def _clustered_marks(rng, inside: np.ndarray, p: float, bivariate: bool) -> np.ndarray:
    """Assign immune marks with elevated probability inside cluster disks.

    The inside-disk probability q_in and outside probability q_out solve
    coverage * q_in + (1 - coverage) * q_out = p with q_out fixed at p / 4,
    so the overall immune abundance stays at the target p.
    """
    n = inside.shape[0]
    if n == 0:
        return np.empty(0, dtype="U16")
    coverage = float(inside.mean())
    q_out = p / 4.0
    if coverage <= 0.0:
        raise InfeasibleAbundanceError(
            "no points fall inside any cluster disk; cannot reach the target abundance"
        )
    q_in = (p - (1.0 - coverage) * q_out) / coverage
    if not 0.0 <= q_in <= 1.0:
        raise InfeasibleAbundanceError(
            f"calibrated in-cluster probability {q_in:.4f} is outside [0, 1] "
            f"(coverage {coverage:.4f}, abundance {p})"
        )
    immune = rng.random(n) < np.where(inside, q_in, q_out)
    if not bivariate:
        return np.where(immune, IMMUNE, BACKGROUND)
    marks = np.full(n, BACKGROUND, dtype=object)
    split = rng.random(n) < 0.5
    marks[immune & split] = IMMUNE1
    marks[immune & ~split] = IMMUNE2
    return marks.astype(str)


def _clustered_points(rng, scenario):
    w = scenario.window
    n = rng.poisson(scenario.lambda_n)
    x = rng.uniform(w.x_min, w.x_max, n)
    y = rng.uniform(w.y_min, w.y_max, n)
    cx = rng.uniform(w.x_min, w.x_max, scenario.cluster_count)
    cy = rng.uniform(w.y_min, w.y_max, scenario.cluster_count)
    d2 = (x[:, None] - cx[None, :]) ** 2 + (y[:, None] - cy[None, :]) ** 2
    inside = np.any(d2 <= scenario.cluster_radius**2, axis=1)
    return x, y, inside


def sim_hom_clustered(scenario: SimScenario) -> PointPattern:
    """Homogeneous locations with immune marks clustered into random disks."""
    rng = np.random.default_rng(scenario.seed)
    x, y, inside = _clustered_points(rng, scenario)
    marks = _clustered_marks(rng, inside, scenario.abundance, scenario.bivariate)
    return PointPattern.from_arrays(x, y, marks, window=scenario.window)


def sim_inhom_clustered(scenario: SimScenario) -> PointPattern:
    """Clustered marks plus random holes mimicking tissue tearing.

    Generated exactly as the homogeneous clustered condition, then every
    point inside any of ``hole_count`` random disks is deleted.
    """
    rng = np.random.default_rng(scenario.seed)
    x, y, inside = _clustered_points(rng, scenario)
    marks = _clustered_marks(rng, inside, scenario.abundance, scenario.bivariate)
    w = scenario.window
    hx = rng.uniform(w.x_min, w.x_max, scenario.hole_count)
    hy = rng.uniform(w.y_min, w.y_max, scenario.hole_count)
    hr = rng.uniform(scenario.hole_radius[0], scenario.hole_radius[1], scenario.hole_count)
    d2 = (x[:, None] - hx[None, :]) ** 2 + (y[:, None] - hy[None, :]) ** 2
    keep = ~np.any(d2 <= hr[None, :] ** 2, axis=1)
    return PointPattern.from_arrays(x[keep], y[keep], np.asarray(marks)[keep], window=w)


_GENERATORS = {
    Condition.HOM_NULL: sim_hom_null,
    Condition.INHOM_NULL: sim_inhom_null,
    Condition.HOM_CLUSTERED: sim_hom_clustered,
    Condition.INHOM_CLUSTERED: sim_inhom_clustered,
}


def simulate(scenario: SimScenario) -> PointPattern:
    """Generate one pattern for the scenario's condition."""
    return _GENERATORS[scenario.condition](scenario)
