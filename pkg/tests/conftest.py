"""Shared fixtures and independent brute-force oracles.

The oracles here deliberately use plain double/triple/quadruple loops and
dense matrices; they share no code with the streaming pair-scan machinery
they validate.
"""

import itertools
import math

import numpy as np
import pytest

from kamp import EdgeCorrection, PointPattern, Window

# acceptance verdict lines collected by tests/test_acceptance.py; printed
# after the run (outside capture) by the terminal-summary hook below
ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_pattern(rng, n, window=Window(0.0, 1.0, 0.0, 1.0), marks=None):
    x = rng.uniform(window.x_min, window.x_max, n)
    y = rng.uniform(window.y_min, window.y_max, n)
    if marks is None:
        marks = np.full(n, "all")
    return PointPattern.from_arrays(x, y, marks, window=window)


def brute_pair_set(x, y, r_max):
    """All unordered index pairs with distance <= r_max, by double loop."""
    pairs = set()
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            if math.hypot(x[i] - x[j], y[i] - y[j]) <= r_max:
                pairs.add((i, j))
    return pairs


def brute_weight(xi, yi, xj, yj, window, correction):
    if correction is EdgeCorrection.NONE:
        return 1.0
    return window.area / (
        (window.width - abs(xi - xj)) * (window.height - abs(yi - yj))
    )


def brute_w_matrix(pattern, r, correction):
    """Dense W(r) by explicit loops: 1(d <= r) e_ij with zero diagonal."""
    n = pattern.n
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = math.hypot(
                pattern.x[i] - pattern.x[j], pattern.y[i] - pattern.y[j]
            )
            if d <= r:
                mat[i, j] = brute_weight(
                    pattern.x[i],
                    pattern.y[i],
                    pattern.x[j],
                    pattern.y[j],
                    pattern.window,
                    correction,
                )
    return mat


def brute_k_univariate(pattern, mark, radii, correction):
    """Ordered double-sum K of the marked points, one value per radius."""
    sel = np.flatnonzero(pattern.marks == mark)
    m = sel.size
    out = np.zeros(len(radii))
    for k, r in enumerate(radii):
        total = 0.0
        for i in sel:
            for j in sel:
                if i == j:
                    continue
                d = math.hypot(
                    pattern.x[i] - pattern.x[j], pattern.y[i] - pattern.y[j]
                )
                if d <= r:
                    total += brute_weight(
                        pattern.x[i],
                        pattern.y[i],
                        pattern.x[j],
                        pattern.y[j],
                        pattern.window,
                        correction,
                    )
        out[k] = pattern.window.area * total / (m * (m - 1))
    return out


def brute_k_bivariate(pattern, mark1, mark2, radii, correction):
    sel1 = np.flatnonzero(pattern.marks == mark1)
    sel2 = np.flatnonzero(pattern.marks == mark2)
    out = np.zeros(len(radii))
    for k, r in enumerate(radii):
        total = 0.0
        for i in sel1:
            for j in sel2:
                d = math.hypot(
                    pattern.x[i] - pattern.x[j], pattern.y[i] - pattern.y[j]
                )
                if d <= r:
                    total += brute_weight(
                        pattern.x[i],
                        pattern.y[i],
                        pattern.x[j],
                        pattern.y[j],
                        pattern.window,
                        correction,
                    )
        out[k] = pattern.window.area * total / (sel1.size * sel2.size)
    return out


def brute_r_statistics(mat):
    """Literal R0..R3 sums over ordered index tuples of a dense W matrix."""
    n = mat.shape[0]
    r0 = sum(mat[i, j] for i in range(n) for j in range(n) if i != j)
    r1 = sum(mat[i, j] ** 2 for i in range(n) for j in range(n) if i != j)
    r2 = sum(
        mat[i, j] * mat[i, u]
        for i in range(n)
        for j in range(n)
        for u in range(n)
        if i != j and u != i and u != j
    )
    r3 = sum(
        mat[i, j] * mat[u, v]
        for i in range(n)
        for j in range(n)
        for u in range(n)
        for v in range(n)
        if i != j and u not in (i, j) and v not in (u, i, j)
    )
    return r0, r1, r2, r3


def enum_univariate_moments(mat, area, n, m):
    """Mean and variance of K over all m-subsets, independent enumeration."""
    norm = area / (m * (m - 1))
    values = [
        norm * mat[np.ix_(s, s)].sum() for s in itertools.combinations(range(n), m)
    ]
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, var
