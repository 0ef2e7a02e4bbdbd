"""Hot numeric kernels: grid-binned pair scans over planar point sets.

Every kernel exists twice, as a numba ``@njit`` function and as a pure numpy
fallback. The active backend is picked at import time (numba when importable)
and can be forced to the fallback with ``KAMP_DISABLE_JIT=1`` or switched at
runtime with :func:`set_backend` / :func:`use_backend`. Both backends visit
cells, block offsets, and in-block pairs in the same order, so accumulation
order (and therefore float rounding) matches between them.

All kernels work on a cell-list layout built by :func:`cell_layout`: points
sorted by grid cell, cell start offsets, and the original index of each
sorted point. Cells have side >= r_max, so only the 3x3 cell neighbourhood
must be scanned; unordered cell pairs are visited once via the half-offset
set (0,0), (1,0), (1,1), (0,1), (-1,1). Distance qualification and radius
binning both happen in squared space to avoid square-root rounding at bin
boundaries.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

_ENV_DISABLE = os.environ.get("KAMP_DISABLE_JIT", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

_backend = "numba" if (HAS_NUMBA and not _ENV_DISABLE) else "numpy"

# Half neighbourhood: together with the in-cell block this visits every
# unordered pair of adjacent cells exactly once.
_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1))


def active_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    global _backend
    _backend = name


@contextmanager
def use_backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def cell_layout(x, y, x_min, y_min, width, height, r_max):
    """Sort points into grid cells of side >= r_max.

    Returns (xs, ys, orig, starts, nx, ny) where xs/ys are cell-sorted
    coordinates, orig maps sorted position -> original index, and starts has
    length nx*ny + 1 with the slice bounds of each cell in the sorted arrays.
    Cell counts are capped near 4n so degenerate r_max values cannot blow up
    the cell table; any cell side >= r_max keeps the 3x3 scan correct.
    """
    n = x.shape[0]
    cap = int(np.sqrt(4.0 * max(n, 1))) + 1
    nx = min(max(1, int(width / r_max)), cap) if r_max > 0 else 1
    ny = min(max(1, int(height / r_max)), cap) if r_max > 0 else 1
    side_x = width / nx
    side_y = height / ny
    cx = np.minimum((np.maximum(x - x_min, 0.0) / side_x).astype(np.int64), nx - 1)
    cy = np.minimum((np.maximum(y - y_min, 0.0) / side_y).astype(np.int64), ny - 1)
    cell = cx * ny + cy
    orig = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=nx * ny)
    starts = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return x[orig], y[orig], orig.astype(np.int64), starts, nx, ny


# ---------------------------------------------------------------------------
# numpy fallback implementations
# ---------------------------------------------------------------------------


def _iter_blocks(xs, ys, starts, nx, ny):
    """Yield (idx_a, idx_b, within) index blocks in deterministic cell order."""
    occupied = np.flatnonzero(np.diff(starts))
    for c in occupied:
        cx, cy = divmod(int(c), ny)
        s0, e0 = starts[c], starts[c + 1]
        yield np.arange(s0, e0), None, True
        for ox, oy in _OFFSETS:
            bx, by = cx + ox, cy + oy
            if 0 <= bx < nx and 0 <= by < ny:
                c2 = bx * ny + by
                s1, e1 = starts[c2], starts[c2 + 1]
                if e1 > s1:
                    yield np.arange(s0, e0), np.arange(s1, e1), False


def _block_pairs(xs, ys, ia, ib, within, r2_max):
    """All qualifying (a, b, d2) pairs between two blocks (or within one)."""
    if within:
        if ia.shape[0] < 2:
            return None
        au, bu = np.triu_indices(ia.shape[0], k=1)
        aa, bb = ia[au], ia[bu]
    else:
        aa = np.repeat(ia, ib.shape[0])
        bb = np.tile(ib, ia.shape[0])
    dx = xs[aa] - xs[bb]
    dy = ys[aa] - ys[bb]
    d2 = dx * dx + dy * dy
    keep = d2 <= r2_max
    if not keep.any():
        return None
    return aa[keep], bb[keep], d2[keep]

def _collect_pairs_numpy(xs, ys, orig, starts, nx, ny, r2_max):
    out_i, out_j, out_d2 = [], [], []
    for ia, ib, within in _iter_blocks(xs, ys, starts, nx, ny):
        got = _block_pairs(xs, ys, ia, ib, within, r2_max)
        if got is None:
            continue
        aa, bb, d2 = got
        out_i.append(orig[aa])
        out_j.append(orig[bb])
        out_d2.append(d2)
    if not out_i:
        e = np.empty(0)
        return e.astype(np.int64), e.astype(np.int64), e
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_d2)


def _moment_scan_numpy(
    xs,
    ys,
    orig,
    starts,
    nx,
    ny,
    radii_sq,
    translation,
    area,
    width,
    height,
    codes,
    query_kind,
    n_points,
):
    # The fallback materializes the pair table once and post-processes it
    # vectorized; memory is O(pairs), which is the accepted fallback cost.
    n_bins = radii_sq.shape[0]
    sa, sb, d2 = [], [], []
    r2_max = radii_sq[-1]
    for ia, ib, within in _iter_blocks(xs, ys, starts, nx, ny):
        got = _block_pairs(xs, ys, ia, ib, within, r2_max)
        if got is not None:
            sa.append(got[0])
            sb.append(got[1])
            d2.append(got[2])
    if not sa:
        return (
            np.zeros(n_bins),
            np.zeros(n_bins),
            np.zeros((n_points, n_bins)),
            np.zeros(n_bins),
        )
    sa = np.concatenate(sa)
    sb = np.concatenate(sb)
    d2 = np.concatenate(d2)
    bins = np.searchsorted(radii_sq, d2, side="left")
    if translation:
        adx = np.abs(xs[sa] - xs[sb])
        ady = np.abs(ys[sa] - ys[sb])
        w = area / ((width - adx) * (height - ady))
    else:
        w = np.ones(d2.shape[0])
    oa, ob = orig[sa], orig[sb]
    r0_inc = np.bincount(bins, weights=2.0 * w, minlength=n_bins)
    r1_inc = np.bincount(bins, weights=2.0 * w * w, minlength=n_bins)
    row_flat = np.bincount(oa * n_bins + bins, weights=w, minlength=n_points * n_bins)
    row_flat += np.bincount(ob * n_bins + bins, weights=w, minlength=n_points * n_bins)
    khat_inc = np.zeros(n_bins)
    if query_kind == 1:
        hit = (codes[sa] == 1) & (codes[sb] == 1)
        if hit.any():
            khat_inc = np.bincount(bins[hit], weights=2.0 * w[hit], minlength=n_bins)
    elif query_kind == 2:
        ca, cb = codes[sa], codes[sb]
        hit = ((ca == 1) & (cb == 2)) | ((ca == 2) & (cb == 1))
        if hit.any():
            khat_inc = np.bincount(bins[hit], weights=w[hit], minlength=n_bins)
    return r0_inc, r1_inc, row_flat.reshape(n_points, n_bins), khat_inc


def _perm_histograms_numpy(pi, pj, bins, w, labels, query_kind, n_bins):
    n_perm = labels.shape[0]
    out = np.zeros((n_perm, n_bins))
    for b in range(n_perm):
        la = labels[b, pi]
        lb = labels[b, pj]
        if query_kind == 1:
            hit = (la == 1) & (lb == 1)
            if hit.any():
                out[b] = np.bincount(bins[hit], weights=2.0 * w[hit], minlength=n_bins)
        else:
            hit = ((la == 1) & (lb == 2)) | ((la == 2) & (lb == 1))
            if hit.any():
                out[b] = np.bincount(bins[hit], weights=w[hit], minlength=n_bins)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _bisect_left(a, v):
        lo = 0
        hi = a.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if a[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @njit(cache=True)
    def _count_pairs_njit(xs, ys, starts, nx, ny, r2_max):
        total = 0
        for cx in range(nx):
            for cy in range(ny):
                c = cx * ny + cy
                s0, e0 = starts[c], starts[c + 1]
                if e0 == s0:
                    continue
                for a in range(s0, e0):
                    for b in range(a + 1, e0):
                        dx = xs[a] - xs[b]
                        dy = ys[a] - ys[b]
                        if dx * dx + dy * dy <= r2_max:
                            total += 1
                for ox, oy in ((1, 0), (1, 1), (0, 1), (-1, 1)):
                    bx, by = cx + ox, cy + oy
                    if bx < 0 or bx >= nx or by < 0 or by >= ny:
                        continue
                    c2 = bx * ny + by
                    s1, e1 = starts[c2], starts[c2 + 1]
                    for a in range(s0, e0):
                        for b in range(s1, e1):
                            dx = xs[a] - xs[b]
                            dy = ys[a] - ys[b]
                            if dx * dx + dy * dy <= r2_max:
                                total += 1
        return total

    @njit(cache=True)
    def _fill_pairs_njit(xs, ys, orig, starts, nx, ny, r2_max, out_i, out_j, out_d2):
        k = 0
        for cx in range(nx):
            for cy in range(ny):
                c = cx * ny + cy
                s0, e0 = starts[c], starts[c + 1]
                if e0 == s0:
                    continue
                for a in range(s0, e0):
                    for b in range(a + 1, e0):
                        dx = xs[a] - xs[b]
                        dy = ys[a] - ys[b]
                        d2 = dx * dx + dy * dy
                        if d2 <= r2_max:
                            out_i[k] = orig[a]
                            out_j[k] = orig[b]
                            out_d2[k] = d2
                            k += 1
                for ox, oy in ((1, 0), (1, 1), (0, 1), (-1, 1)):
                    bx, by = cx + ox, cy + oy
                    if bx < 0 or bx >= nx or by < 0 or by >= ny:
                        continue
                    c2 = bx * ny + by
                    s1, e1 = starts[c2], starts[c2 + 1]
                    for a in range(s0, e0):
                        for b in range(s1, e1):
                            dx = xs[a] - xs[b]
                            dy = ys[a] - ys[b]
                            d2 = dx * dx + dy * dy
                            if d2 <= r2_max:
                                out_i[k] = orig[a]
                                out_j[k] = orig[b]
                                out_d2[k] = d2
                                k += 1
        return k

    def _collect_pairs_njit(xs, ys, orig, starts, nx, ny, r2_max):
        total = _count_pairs_njit(xs, ys, starts, nx, ny, r2_max)
        out_i = np.empty(total, dtype=np.int64)
        out_j = np.empty(total, dtype=np.int64)
        out_d2 = np.empty(total)
        _fill_pairs_njit(xs, ys, orig, starts, nx, ny, r2_max, out_i, out_j, out_d2)
        return out_i, out_j, out_d2

    @njit(cache=True)
    def _moment_scan_njit(
        xs,
        ys,
        starts,
        nx,
        ny,
        radii_sq,
        hint_table,
        hint_inv,
        translation,
        area,
        width,
        height,
        codes,
        query_kind,
        n_points,
    ):
        # Row sums are accumulated against SORTED point indices (both ends of
        # a pair live in the same or an adjacent cell, keeping writes local);
        # the caller maps rows back to original indices. Radius binning uses
        # the uniform hint table to start near the answer, then fixes up with
        # the guard loops below; the result is exactly bisect_left(radii_sq).
        n_bins = radii_sq.shape[0]
        n_hint = hint_table.shape[0] - 1
        r0_inc = np.zeros(n_bins)
        r1_inc = np.zeros(n_bins)
        khat_inc = np.zeros(n_bins)
        row_inc = np.zeros((n_points, n_bins))
        r2_max = radii_sq[-1]
        for cx in range(nx):
            for cy in range(ny):
                c = cx * ny + cy
                s0, e0 = starts[c], starts[c + 1]
                if e0 == s0:
                    continue
                for pass_kind in range(5):
                    if pass_kind == 0:
                        s1, e1 = s0, e0
                    else:
                        if pass_kind == 1:
                            bx, by = cx + 1, cy
                        elif pass_kind == 2:
                            bx, by = cx + 1, cy + 1
                        elif pass_kind == 3:
                            bx, by = cx, cy + 1
                        else:
                            bx, by = cx - 1, cy + 1
                        if bx < 0 or bx >= nx or by < 0 or by >= ny:
                            continue
                        c2 = bx * ny + by
                        s1, e1 = starts[c2], starts[c2 + 1]
                    for a in range(s0, e0):
                        b_lo = a + 1 if pass_kind == 0 else s1
                        for b in range(b_lo, e1):
                            dx = xs[a] - xs[b]
                            dy = ys[a] - ys[b]
                            d2 = dx * dx + dy * dy
                            if d2 > r2_max:
                                continue
                            t = int(d2 * hint_inv)
                            if t > n_hint:
                                t = n_hint
                            bin_idx = hint_table[t]
                            while bin_idx < n_bins and radii_sq[bin_idx] < d2:
                                bin_idx += 1
                            while bin_idx > 0 and radii_sq[bin_idx - 1] >= d2:
                                bin_idx -= 1
                            if translation:
                                adx = dx if dx >= 0.0 else -dx
                                ady = dy if dy >= 0.0 else -dy
                                w = area / ((width - adx) * (height - ady))
                            else:
                                w = 1.0
                            r0_inc[bin_idx] += 2.0 * w
                            r1_inc[bin_idx] += 2.0 * w * w
                            row_inc[a, bin_idx] += w
                            row_inc[b, bin_idx] += w
                            if query_kind == 1:
                                if codes[a] == 1 and codes[b] == 1:
                                    khat_inc[bin_idx] += 2.0 * w
                            elif query_kind == 2:
                                ca, cb = codes[a], codes[b]
                                if (ca == 1 and cb == 2) or (ca == 2 and cb == 1):
                                    khat_inc[bin_idx] += w
        return r0_inc, r1_inc, row_inc, khat_inc

    @njit(cache=True)
    def _perm_histograms_njit(pi, pj, bins, w, labels, query_kind, n_bins):
        n_perm = labels.shape[0]
        n_pairs = pi.shape[0]
        out = np.zeros((n_perm, n_bins))
        for b in range(n_perm):
            for k in range(n_pairs):
                la = labels[b, pi[k]]
                lb = labels[b, pj[k]]
                if query_kind == 1:
                    if la == 1 and lb == 1:
                        out[b, bins[k]] += 2.0 * w[k]
                else:
                    if (la == 1 and lb == 2) or (la == 2 and lb == 1):
                        out[b, bins[k]] += w[k]
        return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_HINT_CELLS = 2048


def _bin_hint_table(radii_sq):
    """Uniform lookup over squared distance giving a starting bin index.

    The table is only a hint; the kernel's guard loops land on the exact
    bisect_left answer, so any table inaccuracies cost probes, not
    correctness.
    """
    r2_max = radii_sq[-1]
    edges = np.arange(_HINT_CELLS + 1) * (r2_max / _HINT_CELLS)
    table = np.searchsorted(radii_sq, edges, side="left").astype(np.int64)
    return table, _HINT_CELLS / r2_max


def collect_pairs(xs, ys, orig, starts, nx, ny, r2_max):
    """Qualifying unordered pairs as (orig_i, orig_j, squared distance)."""
    if _backend == "numba":
        return _collect_pairs_njit(xs, ys, orig, starts, nx, ny, r2_max)
    return _collect_pairs_numpy(xs, ys, orig, starts, nx, ny, r2_max)


def moment_scan(
    xs,
    ys,
    orig,
    starts,
    nx,
    ny,
    radii_sq,
    translation,
    area,
    width,
    height,
    codes,
    query_kind,
    n_points,
):
    """Single pass over qualifying pairs, accumulating per-radius-bin sums.

    Returns (r0_inc, r1_inc, row_inc, khat_inc): per-bin increments of the
    ordered pair-weight sum, its squared version, per-point row sums, and the
    marked-pair sum for the requested query (0 = none, 1 = univariate,
    2 = bivariate cross pairs). Cumulative sums over bins are left to the
    caller.
    """
    if _backend == "numba":
        hint_table, hint_inv = _bin_hint_table(radii_sq)
        r0_inc, r1_inc, row_sorted, khat_inc = _moment_scan_njit(
            xs,
            ys,
            starts,
            nx,
            ny,
            radii_sq,
            hint_table,
            hint_inv,
            translation,
            area,
            width,
            height,
            codes,
            query_kind,
            n_points,
        )
        row_inc = np.empty_like(row_sorted)
        row_inc[orig] = row_sorted
        return r0_inc, r1_inc, row_inc, khat_inc
    return _moment_scan_numpy(
        xs,
        ys,
        orig,
        starts,
        nx,
        ny,
        radii_sq,
        translation,
        area,
        width,
        height,
        codes,
        query_kind,
        n_points,
    )


def perm_histograms(pi, pj, bins, w, labels, query_kind, n_bins):
    """Per-permutation marked-pair histograms over precomputed pairs.

    labels is an (n_perm, n_points) int8 matrix of permuted mark codes; rows
    of the result are per-bin increments (not yet cumulative).
    """
    if _backend == "numba":
        return _perm_histograms_njit(pi, pj, bins, w, labels, query_kind, n_bins)
    return _perm_histograms_numpy(pi, pj, bins, w, labels, query_kind, n_bins)
