"""Within-sample inference: Z statistics, upper-tail p-values, degree of
clustering, and the thinned variant of the analytical-moment pipeline.

Where the permutation variance is exactly zero (every point carries the
queried mark) the Z statistic and p-value are undefined; they are emitted as
NaN together with an explicit ``z_undefined`` mask so batch outputs stay
machine-parsable instead of silently propagating NaN.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import GridMismatchError, KampError
from .geometry import EdgeCorrection, PointPattern
from .kstat import KCurve, MarkQuery, RadiusGrid, encode_marks
from .moments import permutation_moments, scan_pattern

_SQRT2 = np.sqrt(2.0)


@dataclass
class KampResult:
    """Per-radius inference bundle for one sample and one method.

    k_tilde is constructed as k_hat - expectation (never re-derived), so the
    identity holds bitwise. ``z_undefined`` marks radii where the null
    variance is zero and z / p_value are NaN flags.
    """

    sample_id: str | None
    method: str
    query: MarkQuery
    grid: RadiusGrid
    correction: EdgeCorrection
    k_hat: np.ndarray
    expectation: np.ndarray
    variance: np.ndarray
    z: np.ndarray
    p_value: np.ndarray
    k_tilde: np.ndarray
    z_undefined: np.ndarray
    n_points: int
    counts: tuple
    seed: int | None = None
    thin_prob: float | None = None

    @property
    def n_marked(self) -> int:
        return int(sum(self.counts))


def z_statistic(k_hat, expectation, variance):
    """Standardized deviation (k_hat - E) / sqrt(Var).

    Where the variance is zero the statistic is undefined and NaN is
    returned without performing the division. Accepts scalars or arrays.
    """
    k_hat = np.asarray(k_hat, dtype=float)
    expectation = np.asarray(expectation, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise KampError("variance must be non-negative")
    defined = variance > 0
    z = np.full(np.broadcast(k_hat, expectation, variance).shape, np.nan)
    sd = np.sqrt(np.where(defined, variance, 1.0))
    z = np.where(defined, (k_hat - expectation) / sd, z)
    if z.ndim == 0:
        return float(z)
    return z


def p_value_upper(z):
    """Upper-tail standard-normal probability 1 - Phi(z).

    Large positive z values evidence clustering, so the test is one-sided.
    Evaluated via erfc for full accuracy in the far tail; NaN (undefined)
    inputs propagate.
    """
    z = np.asarray(z, dtype=float)
    p = 0.5 * erfc(z / _SQRT2)
    if p.ndim == 0:
        return float(p)
    return p


def degree_of_clustering(k_hat, null_curve):
    """Pointwise difference between an observed K curve and a null curve.

    Both arguments may be KCurve objects or plain arrays; curves must share
    one radius grid.
    """
    k_grid = k_hat.grid if isinstance(k_hat, KCurve) else None
    e_grid = null_curve.grid if isinstance(null_curve, KCurve) else None
    k_values = k_hat.values if isinstance(k_hat, KCurve) else np.asarray(k_hat, dtype=float)
    e_values = (
        null_curve.values
        if isinstance(null_curve, KCurve)
        else np.asarray(null_curve, dtype=float)
    )
    if k_grid is not None and e_grid is not None:
        if not np.array_equal(k_grid.radii, e_grid.radii):
            raise GridMismatchError("curves are evaluated on different radius grids")
    if k_values.shape != e_values.shape:
        raise GridMismatchError(
            f"curve lengths differ: {k_values.shape} vs {e_values.shape}"
        )
    return k_values - e_values


def thin_pattern(pattern: PointPattern, keep_prob: float, seed: int) -> PointPattern:
    """Independent random thinning: keep each point with probability keep_prob.

    Marks travel with their points and the window is unchanged, so a thinned
    point process keeps the distributional structure of the original. The
    generator is seeded per call; identical seeds give identical output.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise KampError(f"keep_prob must be in (0, 1], got {keep_prob}")
    rng = np.random.default_rng(seed)
    keep = rng.random(pattern.n) < keep_prob
    kept = int(keep.sum())
    if kept < 2:
        warnings.warn(
            f"thinning left {kept} point(s); downstream estimators will fail",
            stacklevel=2,
        )
    return pattern.subset(keep)


def _assemble_result(
    pattern, query, grid, correction, method, sample_id, seed, thin_prob
) -> KampResult:
    query_obj = query if isinstance(query, MarkQuery) else MarkQuery.univariate(query)
    _, counts = encode_marks(pattern.marks, query_obj)
    stats, k_hat = scan_pattern(pattern, grid, correction, query_obj)
    pair = permutation_moments(stats, query_obj, counts)
    z = z_statistic(k_hat, pair.expectation, pair.variance)
    undefined = ~(pair.variance > 0)
    return KampResult(
        sample_id=sample_id,
        method=method,
        query=query_obj,
        grid=grid,
        correction=correction,
        k_hat=k_hat,
        expectation=pair.expectation,
        variance=pair.variance,
        z=z,
        p_value=p_value_upper(z),
        k_tilde=k_hat - pair.expectation,
        z_undefined=undefined,
        n_points=pattern.n,
        counts=counts,
        seed=seed,
        thin_prob=thin_prob,
    )


def run_kamp(
    pattern: PointPattern,
    query: MarkQuery | str,
    grid: RadiusGrid | None = None,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
    sample_id: str | None = None,
) -> KampResult:
    """Analytical-moment pipeline on the full pattern.

    One pass over the qualifying pairs yields the observed K of the queried
    marks together with the permutation-null expectation and variance; from
    those come Z, the upper-tail p-value, and the degree of clustering
    k_tilde = k_hat - E(K). Fully deterministic.
    """
    if grid is None:
        grid = RadiusGrid.default(pattern.window)
    return _assemble_result(
        pattern, query, grid, correction, "kamp", sample_id, None, None
    )


def run_kamp_lite(
    pattern: PointPattern,
    query: MarkQuery | str,
    grid: RadiusGrid | None = None,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
    keep_prob: float = 0.5,
    seed: int = 0,
    sample_id: str | None = None,
) -> KampResult:
    """Thinned variant: thin the whole pattern once, then run the full
    analytical-moment pipeline on what remains.

    Thinning is applied exactly once per sample (no repeated-thinning
    averaging); keep_prob = 1 reproduces run_kamp exactly.
    """
    if grid is None:
        grid = RadiusGrid.default(pattern.window)
    thinned = thin_pattern(pattern, keep_prob, seed)
    result = _assemble_result(
        thinned, query, grid, correction, "kamp_lite", sample_id, seed, keep_prob
    )
    return result


def run_theoretical(
    pattern: PointPattern,
    query: MarkQuery | str,
    grid: RadiusGrid | None = None,
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION,
    sample_id: str | None = None,
) -> KampResult:
    """Naive comparator: the CSR baseline pi r^2 as the null K.

    No variance exists under this null, so z and p_value are undefined at
    every radius; k_tilde = k_hat - pi r^2.
    """
    from .kstat import k_bivariate, k_univariate, theoretical_csr

    if grid is None:
        grid = RadiusGrid.default(pattern.window)
    query_obj = query if isinstance(query, MarkQuery) else MarkQuery.univariate(query)
    if query_obj.is_bivariate:
        curve = k_bivariate(pattern, query_obj.mark1, query_obj.mark2, grid, correction)
    else:
        curve = k_univariate(pattern, query_obj.mark1, grid, correction)
    baseline = theoretical_csr(grid)
    nan = np.full(len(grid), np.nan)
    return KampResult(
        sample_id=sample_id,
        method="k_theoretical",
        query=query_obj,
        grid=grid,
        correction=correction,
        k_hat=curve.values,
        expectation=baseline,
        variance=nan.copy(),
        z=nan.copy(),
        p_value=nan.copy(),
        k_tilde=curve.values - baseline,
        z_undefined=np.ones(len(grid), dtype=bool),
        n_points=pattern.n,
        counts=curve.counts,
        seed=None,
        thin_prob=None,
    )
