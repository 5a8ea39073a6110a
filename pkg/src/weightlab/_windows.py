"""Per-side window reductions over cube families.

All family suprema reduce to the same loop: for each side ``s`` compute a
sum/min/max of one or more arrays over every cube of that side, then either
take a global max or spread a per-cube value back to the cells the cube
contains.  Sums are accumulated with additions only (no prefix-sum
differences), so heavy-tailed positive data such as ``w**(1-p')`` near a
singularity keeps full relative precision.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d

from .grid import CubeFamily, Grid, family_anchors, family_sides


def _reduce_1d(x, s, idx, op):
    v = sliding_window_view(x, s, axis=-1)[..., idx, :]
    return getattr(v, op)(axis=-1)


def _reduce_2d(x, s, idx, op):
    r = sliding_window_view(x, s, axis=-1)[..., idx, :]
    r = getattr(r, op)(axis=-1)  # (..., n, m)
    v = sliding_window_view(r, s, axis=-2)[..., idx, :, :]
    return getattr(v, op)(axis=-1)  # (..., m, m)


def iter_windows(grid: Grid, family, sums=None, mins=None, maxs=None):
    """Yield ``(s, idx, S, lo, hi)`` per side of the family.

    ``sums``/``mins``/``maxs`` are arrays of shape ``(k, *grid.shape)`` (or
    ``None``).  The outputs have shape ``(k, m)`` in 1D and ``(k, m, m)``
    in 2D, where ``m = len(idx)`` and the anchors are ``idx`` (per axis).
    """
    family = CubeFamily.parse(family)
    ops = [(sums, "sum"), (mins, "min"), (maxs, "max")]
    if grid.dim == 1 and family is CubeFamily.ALL:
        yield from _iter_all_1d(grid, sums, mins, maxs)
        return
    red = _reduce_1d if grid.dim == 1 else _reduce_2d
    for s in family_sides(grid, family):
        idx = family_anchors(grid, family, s)
        out = [None if a is None else red(a, s, idx, op) for a, op in ops]
        yield (s, idx, *out)


def _iter_all_1d(grid, sums, mins, maxs):
    n = grid.n
    S = None if sums is None else np.array(sums, dtype=float, copy=True)
    lo = None if mins is None else np.array(mins, dtype=float, copy=True)
    hi = None if maxs is None else np.array(maxs, dtype=float, copy=True)
    idx_all = np.arange(n)
    for s in range(1, n + 1):
        if s > 1:
            if S is not None:
                S = S[..., :-1] + sums[..., s - 1:]
            if lo is not None:
                lo = np.minimum(lo[..., :-1], mins[..., s - 1:])
            if hi is not None:
                hi = np.maximum(hi[..., :-1], maxs[..., s - 1:])
        yield (s, idx_all[: n - s + 1], S, lo, hi)


def _cover_axis(full, s, axis):
    """Max over anchors ``a`` with ``a <= x < a + s`` along ``axis``."""
    if s == 1:
        return full
    pad = [(0, 0)] * full.ndim
    pad[axis] = (s - 1, s - 1)
    padded = np.pad(full, pad, constant_values=-np.inf)
    mf = maximum_filter1d(padded, size=s, axis=axis, mode="constant", cval=-np.inf)
    n = full.shape[axis] + s - 1
    take = [slice(None)] * full.ndim
    take[axis] = slice(s // 2, s // 2 + n)
    return mf[tuple(take)]


def spread_max(vals, grid: Grid, s: int, idx: np.ndarray) -> np.ndarray:
    """Cellwise max of per-cube values over the cubes containing each cell.

    ``vals`` has shape ``(..., m)`` or ``(..., m, m)``.  Cells covered by no
    cube of this side receive ``-inf``.
    """
    n = grid.n
    lead = vals.shape[: vals.ndim - grid.dim]
    full = np.full(lead + (n - s + 1,) * grid.dim, -np.inf)
    if grid.dim == 1:
        full[..., idx] = vals
        return _cover_axis(full, s, full.ndim - 1)
    full[..., idx[:, None], idx[None, :]] = vals
    out = _cover_axis(full, s, full.ndim - 2)
    return _cover_axis(out, s, out.ndim - 1)


def family_cube_count(grid: Grid, family) -> int:
    total = 0
    for s in family_sides(grid, family):
        total += len(family_anchors(grid, family, s)) ** grid.dim
    return total
