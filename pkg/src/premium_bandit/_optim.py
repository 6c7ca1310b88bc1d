"""Bounded scalar maximisation: dense grid scan followed by golden-section refinement."""

import math

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, lo, hi, tol=1e-8, max_iter=200):
    """Maximise a unimodal scalar function on [lo, hi]. Returns (x, f(x))."""
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        # >= keeps the lower bracket on ties
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def grid_then_golden(f, lo, hi, n_grid, tol=1e-8, f_scalar=None):
    """Maximise ``f`` over [lo, hi].

    ``f`` must accept a numpy array; ``f_scalar``, if given, is used for the
    golden-section stage on plain floats. The best grid point is refined by
    golden-section search on its two neighbouring cells; the refined point
    replaces the grid point only if it is strictly better. Ties on the grid
    go to the lowest price.
    """
    lo, hi = float(lo), float(hi)
    if hi <= lo:
        return lo, float(f(np.array([lo]))[0])
    grid = np.linspace(lo, hi, int(n_grid))
    values = np.asarray(f(grid), dtype=float)
    i = int(np.argmax(values))
    best_x, best_v = float(grid[i]), float(values[i])
    left = grid[max(i - 1, 0)]
    right = grid[min(i + 1, len(grid) - 1)]
    if right > left:
        if f_scalar is None:
            def f_scalar(z):
                return float(f(np.array([z]))[0])
        x, v = golden_section_max(f_scalar, float(left), float(right), tol=tol)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, best_v
