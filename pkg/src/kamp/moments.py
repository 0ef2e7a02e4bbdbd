"""Closed-form mean and variance of K under the label-permutation null.

Permuting the marks of a pattern while holding the point locations fixed
induces a distribution for the K statistic. Its first two moments have
closed forms in four scalar summaries of the symmetric pair-weight matrix
W(r), with entries W_ij(r) = 1(d_ij <= r) e_ij and zero diagonal:

    R0 = sum_{i != j} W_ij            (ordered pair-weight total)
    R1 = sum_{i != j} W_ij^2
    R2 = sum over ordered triples of W_ij W_iu
    R3 = sum over ordered quadruples (all distinct) of W_ij W_uv

R2 and R3 are never computed by their literal triple/quadruple sums; for
symmetric W they follow from the identities

    R2 = sum_i w_i(r)^2 - R1,   with w_i(r) the i-th row sum of W(r),
    R3 = R0^2 - 2 R1 - 4 R2,

which reduce the cost to one pass over qualifying pairs. Both identities are
unit-tested against the literal loops on small patterns.

The variance prefactor of the univariate form is |A|^2 / (m(m-1))^2, the
squared normalizer of the K estimator; it is pinned by the exact-enumeration
tests in the suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InsufficientPointsError, InternalConsistencyError
from .geometry import EdgeCorrection, PointPattern
from .kstat import MarkQuery, RadiusGrid, encode_marks

# Relative slack (vs E^2, the cancelling term) inside which a negative
# variance is treated as float cancellation and clamped to zero.
VARIANCE_CLAMP_RTOL = 1e-9


@dataclass
class RStatistics:
    """Per-radius pair-weight summaries of one point pattern."""

    grid: RadiusGrid
    r0: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    row_sums: np.ndarray  # (n_points, n_radii) running row sums w_i(r)
    n_points: int
    area: float


@dataclass
class MomentPair:
    """Expectation and variance of K under the permutation null."""

    expectation: np.ndarray
    variance: np.ndarray
    clamped: np.ndarray  # True where a tiny negative variance was zeroed
    query: MarkQuery | None = None


@dataclass
class ConditionDiagnostics:
    """Finite-sample proxies for the normal-approximation conditions.

    rho1 is the h = 3 moment ratio of the centered row sums; rho2 compares
    the centered pair weights against the centered row sums. Small values
    support the normal approximation; the report is advisory only and never
    blocks computation. ``degenerate`` flags radii where all centered row
    sums vanish.
    """

    grid: RadiusGrid
    rho1: np.ndarray
    rho2: np.ndarray
    degenerate: np.ndarray


def scan_pattern(
    pattern: PointPattern,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
    query: MarkQuery | None = None,
):
    """One streaming pass over qualifying pairs of the whole pattern.

    Returns (RStatistics, khat) where khat is the normalized K curve of the
    queried marks accumulated in the same pass, or None when no query is
    given. Raising r over the sorted grid only ever adds pairs, so all
    outputs are cumulative sums of per-bin increments.
    """
    n = pattern.n
    if n < 2:
        raise InsufficientPointsError(
            f"permutation moments need at least 2 points, found {n}"
        )
    grid.validate_for_window(pattern.window)
    w = pattern.window
    if query is None:
        codes = np.zeros(n, dtype=np.int8)
        counts: tuple = ()
        kind = 0
    else:
        codes, counts = encode_marks(pattern.marks, query)
        kind = 2 if query.is_bivariate else 1
    xs, ys, orig, starts, nx, ny = _kernels.cell_layout(
        pattern.x, pattern.y, w.x_min, w.y_min, w.width, w.height, grid.r_max
    )
    r0_inc, r1_inc, row_inc, khat_inc = _kernels.moment_scan(
        xs,
        ys,
        orig,
        starts,
        nx,
        ny,
        grid.radii_sq,
        correction is EdgeCorrection.TRANSLATION,
        w.area,
        w.width,
        w.height,
        codes[orig],
        kind,
        n,
    )
    r0 = np.cumsum(r0_inc)
    r1 = np.cumsum(r1_inc)
    row_sums = np.cumsum(row_inc, axis=1)
    r2 = np.einsum("ij,ij->j", row_sums, row_sums) - r1
    r3 = r0 * r0 - 2.0 * r1 - 4.0 * r2
    stats = RStatistics(
        grid=grid,
        r0=r0,
        r1=r1,
        r2=r2,
        r3=r3,
        row_sums=row_sums,
        n_points=n,
        area=w.area,
    )
    if query is None:
        return stats, None
    if kind == 1:
        m = counts[0]
        if m < 2:
            raise InsufficientPointsError(
                f"univariate query needs m >= 2 marked points, found {m}"
            )
        norm = w.area / (m * (m - 1))
    else:
        m1, m2 = counts
        if m1 < 1 or m2 < 1:
            raise InsufficientPointsError(
                f"bivariate query needs both marks present, found {m1} and {m2}"
            )
        norm = w.area / (m1 * m2)
    return stats, norm * np.cumsum(khat_inc)


def accumulate_r_statistics(
    pattern: PointPattern,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
) -> RStatistics:
    """R0..R3 and running row sums for every grid radius."""
    stats, _ = scan_pattern(pattern, grid, correction)
    return stats


def expectation_k(stats: RStatistics) -> np.ndarray:
    """E(K) under the permutation null: |A| R0 / (n(n-1)).

    The same for univariate and bivariate queries, and equal to the
    univariate K of the pattern with every point marked.
    """
    # evaluated as (|A|/(n(n-1))) * R0 so the all-marked K estimate, which
    # normalizes the identical pair sum the same way, matches bitwise
    n = stats.n_points
    return (stats.area / (n * (n - 1))) * stats.r0


def _clamp_variance(variance, expectation):
    scale = np.maximum(expectation * expectation, np.finfo(float).tiny)
    negative = variance < 0
    clamped = negative & (np.abs(variance) <= VARIANCE_CLAMP_RTOL * scale)
    bad = negative & ~clamped
    if np.any(bad):
        worst = float(np.min(variance[bad]))
        raise InternalConsistencyError(
            f"variance went negative beyond float tolerance (min {worst:g})"
        )
    out = np.where(clamped, 0.0, variance)
    return out, clamped


def variance_k_univariate(stats: RStatistics, m: int) -> np.ndarray:
    """Var(K) of the univariate estimator with m marked points.

    Evaluates |A|^2/(m(m-1))^2 {2 R1 f1(m) + 4 R2 f2(m) + R3 f3(m)} - E(K)^2
    with the falling-factorial ratios f1, f2, f3. When m = n the bracket
    collapses to R0^2 by the R3 identity, so the variance is identically
    zero: permuting identical labels changes nothing.
    """
    var, _ = moment_pair_univariate(stats, m)
    return var


def moment_pair_univariate(stats: RStatistics, m: int):
    n = stats.n_points
    if m < 2:
        raise InsufficientPointsError(f"variance needs m >= 2, found {m}")
    if m > n:
        raise InsufficientPointsError(f"m = {m} exceeds the pattern size {n}")
    e = expectation_k(stats)
    if m == n:
        zeros = np.zeros_like(e)
        return zeros, zeros.astype(bool)
    f1 = (m * (m - 1)) / (n * (n - 1))
    f2 = 0.0 if m < 3 else (m * (m - 1) * (m - 2)) / (n * (n - 1) * (n - 2))
    f3 = (
        0.0
        if m < 4
        else (m * (m - 1) * (m - 2) * (m - 3)) / (n * (n - 1) * (n - 2) * (n - 3))
    )
    bracket = 2.0 * stats.r1 * f1 + 4.0 * stats.r2 * f2 + stats.r3 * f3
    prefactor = stats.area**2 / float(m * (m - 1)) ** 2
    return _clamp_variance(prefactor * bracket - e * e, e)


def variance_k_bivariate(stats: RStatistics, m1: int, m2: int) -> np.ndarray:
    """Var(K) of the cross-type estimator with m1 and m2 marked points.

    Evaluates |A|^2/(m1^2 m2^2) {R1 h1 + R2 h2 + R3 h3} - E(K)^2 with the
    cross-count ratios h1, h2, h3.
    """
    var, _ = moment_pair_bivariate(stats, m1, m2)
    return var


def moment_pair_bivariate(stats: RStatistics, m1: int, m2: int):
    n = stats.n_points
    if m1 < 1 or m2 < 1:
        raise InsufficientPointsError(
            f"bivariate variance needs m1, m2 >= 1, found {m1}, {m2}"
        )
    if m1 + m2 > n:
        raise InsufficientPointsError(
            f"marked counts {m1} + {m2} exceed the pattern size {n}"
        )
    e = expectation_k(stats)
    h1 = (m1 * m2) / (n * (n - 1))
    h2 = (
        0.0
        if m1 + m2 < 3
        else (m1 * m2 * (m1 + m2 - 2)) / (n * (n - 1) * (n - 2))
    )
    h3 = (
        0.0
        if min(m1, m2) < 2
        else (m1 * m2 * (m1 - 1) * (m2 - 1))
        / (n * (n - 1) * (n - 2) * (n - 3))
    )
    bracket = stats.r1 * h1 + stats.r2 * h2 + stats.r3 * h3
    prefactor = stats.area**2 / float(m1 * m1 * m2 * m2)
    return _clamp_variance(prefactor * bracket - e * e, e)


def permutation_moments(stats: RStatistics, query: MarkQuery, counts: tuple) -> MomentPair:
    """Expectation and variance for a mark query given its marked counts."""
    e = expectation_k(stats)
    if query.is_bivariate:
        var, clamped = moment_pair_bivariate(stats, counts[0], counts[1])
    else:
        var, clamped = moment_pair_univariate(stats, counts[0])
    return MomentPair(expectation=e, variance=var, clamped=clamped, query=query)


def condition_diagnostics(stats: RStatistics) -> ConditionDiagnostics:
    """Advisory proxy ratios for the normal-approximation conditions."""
    n = stats.n_points
    if n < 2:
        raise InsufficientPointsError("diagnostics need at least 2 points")
    w_bar = stats.r0 / (n * (n - 1))
    rows_tilde = stats.row_sums - (n - 1) * w_bar
    s2 = np.einsum("ij,ij->j", rows_tilde, rows_tilde)
    s3 = np.einsum("ij,ij->j", np.abs(rows_tilde), rows_tilde * rows_tilde)
    pair_tilde_sq = stats.r1 - n * (n - 1) * w_bar * w_bar
    degenerate = s2 <= 0
    safe = np.where(degenerate, 1.0, s2)
    rho1 = np.where(degenerate, np.nan, s3 / safe**1.5)
    rho2 = np.where(degenerate, np.nan, pair_tilde_sq / safe)
    return ConditionDiagnostics(
        grid=stats.grid, rho1=rho1, rho2=rho2, degenerate=degenerate
    )
