"""Explicit label-permutation machinery.

Provides the permutation comparator method ("perm"), which estimates the
null distribution of K by repeatedly permuting marks over fixed locations,
and the exhaustive small-pattern enumeration used as the ground-truth oracle
for the closed-form moments.

The expensive per-permutation K re-uses one precomputed pair table (with bin
indices and edge weights): labels change under permutation, geometry does
not. Empirical p-values use the add-one convention (1 + count) / (B + 1)
with a non-strict inequality, which avoids exact zeros.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EnumerationTooLargeError, InsufficientPointsError
from .geometry import (
    EdgeCorrection,
    PointPattern,
    neighbor_pairs,
    pair_weights,
    translation_weights,
)
from .inference import KampResult, z_statistic
from .kstat import MarkQuery, RadiusGrid, encode_marks

ENUMERATION_LIMIT = 10


@dataclass
class PermNullSummary:
    """Empirical permutation-null summary of K over B permutations."""

    grid: RadiusGrid
    mean: np.ndarray
    variance: np.ndarray
    lower: np.ndarray  # 2.5% quantile
    upper: np.ndarray  # 97.5% quantile
    p_value: np.ndarray
    n_perms: int
    seed: int


def permute_labels(pattern: PointPattern, seed: int) -> PointPattern:
    """Uniformly random permutation of the marks over fixed locations."""
    if pattern.n < 2:
        raise InsufficientPointsError("permutation needs at least 2 points")
    rng = np.random.default_rng(seed)
    return pattern.with_marks(pattern.marks[rng.permutation(pattern.n)])


def perm_null(
    pattern: PointPattern,
    query: MarkQuery | str,
    grid: RadiusGrid | None = None,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
    n_perms: int = 1000,
    seed: int = 0,
    sample_id: str | None = None,
    permute_fn=None,
) -> tuple[PermNullSummary, KampResult]:
    """Permutation comparator: empirical null mean, variance, and p-values.

    Runs ``n_perms`` seeded mark permutations, evaluating K for each from the
    shared pair table, and summarizes the empirical null per radius. The
    returned KampResult uses the empirical mean as the null K (so k_tilde is
    k_hat minus the empirical mean) and the empirical add-one p-value.
    ``permute_fn(rng, n) -> index array`` can replace the permutation draw;
    it exists for validation hooks.
    """
    if n_perms < 1:
        raise InsufficientPointsError("n_perms must be >= 1")
    query_obj = query if isinstance(query, MarkQuery) else MarkQuery.univariate(query)
    if grid is None:
        grid = RadiusGrid.default(pattern.window)
    grid.validate_for_window(pattern.window)
    codes, counts = encode_marks(pattern.marks, query_obj)
    kind = 2 if query_obj.is_bivariate else 1
    if kind == 1:
        m = counts[0]
        if m < 2:
            raise InsufficientPointsError(
                f"univariate query needs m >= 2 marked points, found {m}"
            )
        norm = pattern.window.area / (m * (m - 1))
    else:
        m1, m2 = counts
        if m1 < 1 or m2 < 1:
            raise InsufficientPointsError(
                f"bivariate query needs both marks present, found {m1} and {m2}"
            )
        norm = pattern.window.area / (m1 * m2)

    pairs = neighbor_pairs(pattern, grid.r_max)
    weights = pair_weights(pattern, pairs, correction)
    bins = np.searchsorted(grid.radii_sq, pairs.dist_sq, side="left").astype(np.int64)

    n_bins = len(grid)
    rng = np.random.default_rng(seed)
    labels = np.empty((n_perms, pattern.n), dtype=np.int8)
    for b in range(n_perms):
        order = permute_fn(rng, pattern.n) if permute_fn else rng.permutation(pattern.n)
        labels[b] = codes[order]
    observed = codes.reshape(1, -1)
    k_hat = norm * np.cumsum(
        _kernels.perm_histograms(pairs.i, pairs.j, bins, weights, observed, kind, n_bins)[0]
    )
    hists = _kernels.perm_histograms(
        pairs.i, pairs.j, bins, weights, labels, kind, n_bins
    )
    k_perm = norm * np.cumsum(hists, axis=1)

    mean = k_perm.mean(axis=0)
    variance = k_perm.var(axis=0, ddof=1) if n_perms > 1 else np.zeros(n_bins)
    lower, upper = np.quantile(k_perm, [0.025, 0.975], axis=0)
    p_emp = (1.0 + np.sum(k_perm >= k_hat[None, :], axis=0)) / (n_perms + 1.0)
    summary = PermNullSummary(
        grid=grid,
        mean=mean,
        variance=variance,
        lower=lower,
        upper=upper,
        p_value=p_emp,
        n_perms=n_perms,
        seed=seed,
    )
    z = z_statistic(k_hat, mean, variance)
    result = KampResult(
        sample_id=sample_id,
        method="perm",
        query=query_obj,
        grid=grid,
        correction=correction,
        k_hat=k_hat,
        expectation=mean,
        variance=variance,
        z=z,
        p_value=p_emp,
        k_tilde=k_hat - mean,
        z_undefined=~(variance > 0),
        n_points=pattern.n,
        counts=counts,
        seed=seed,
        thin_prob=None,
    )
    return summary, result


def _weight_matrix(pattern: PointPattern, r: float, correction: EdgeCorrection):
    """Dense pair-weight matrix W(r) for tiny patterns (oracle path).

    Built directly from coordinate broadcasts, independent of the streaming
    pair-search machinery it is used to validate.
    """
    x, y = pattern.x, pattern.y
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    inside = dx * dx + dy * dy <= r * r
    if correction is EdgeCorrection.TRANSLATION:
        w = translation_weights(np.abs(dx), np.abs(dy), pattern.window)
    else:
        w = np.ones_like(dx)
    mat = np.where(inside, w, 0.0)
    np.fill_diagonal(mat, 0.0)
    return mat


def exact_moments_small(
    pattern: PointPattern,
    query: MarkQuery | str,
    r: float,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
) -> tuple[float, float]:
    """Exact permutation mean and variance of K(r) by full enumeration.

    Enumerates every distinct label assignment (a multinomial-coefficient
    count), computes K for each, and returns the exact first two moments
    with compensated summation. Only valid for n <= 10.
    """
    n = pattern.n
    if n > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"exact enumeration is limited to n <= {ENUMERATION_LIMIT}, got {n}"
        )
    query_obj = query if isinstance(query, MarkQuery) else MarkQuery.univariate(query)
    _, counts = encode_marks(pattern.marks, query_obj)
    mat = _weight_matrix(pattern, r, correction)
    area = pattern.window.area
    values = []
    if query_obj.is_bivariate:
        m1, m2 = counts
        if m1 < 1 or m2 < 1:
            raise InsufficientPointsError("bivariate enumeration needs both marks")
        norm = area / (m1 * m2)
        indices = range(n)
        for s1 in itertools.combinations(indices, m1):
            rest = [i for i in indices if i not in s1]
            for s2 in itertools.combinations(rest, m2):
                values.append(norm * mat[np.ix_(s1, s2)].sum())
    else:
        (m,) = counts
        if m < 2:
            raise InsufficientPointsError("univariate enumeration needs m >= 2")
        norm = area / (m * (m - 1))
        for s in itertools.combinations(range(n), m):
            values.append(norm * mat[np.ix_(s, s)].sum())
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, var
