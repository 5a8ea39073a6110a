"""Maximal operators and mean oscillation on cube families.

The uncentered maximal function, its iterates, the sharp maximal function,
a kernel-based sharp maximal function ``M#_D`` and the BMO seminorm.  All
suprema run over a :class:`~weightlab.grid.CubeFamily`; single cells belong
to every family, so ``M f >= |f|`` cellwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import irfftn, next_fast_len, rfftn
from scipy.signal import fftconvolve

from ._windows import iter_windows, spread_max
from .grid import (
    Cube,
    CubeFamily,
    Grid,
    GridFunction,
    Measure,
    box_slices,
    family_anchors,
    family_sides,
)

__all__ = [
    "DKernelParams",
    "maximal",
    "iterated_maximal",
    "sharp_maximal",
    "d_operator",
    "d_sharp_maximal",
    "d_sharp_maximal_many",
    "domination_constant",
    "bmo_norm",
    "john_nirenberg_constant",
    "level_set_measure",
]


def _exp_profile(s):
    return np.exp(-s)


@dataclass(frozen=True)
class DKernelParams:
    """Kernel ``h((|x - y| / l(Q))**m)`` defining ``D_t`` at scale ``t = l(Q)**m``.

    ``profile`` must be positive, decreasing and vectorized.  After clipping
    to the domain each row is renormalized, so ``D_t 1 = 1``.
    """

    m: float = 2.0
    profile: Callable = field(default=_exp_profile, compare=False)
    name: str = "exp"

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("kernel scaling exponent m must be positive")

    def radial(self, r, side):
        return self.profile((np.asarray(r, dtype=float) / side) ** self.m)


def _measure_or_lebesgue(f: GridFunction, measure):
    if measure is None or measure.is_lebesgue:
        return None
    if measure.grid != f.grid:
        raise ValueError("measure and function live on different grids")
    return measure.density


def maximal(f: GridFunction, family=CubeFamily.ALL, measure: Measure | None = None) -> GridFunction:
    """Uncentered maximal function ``sup_{Q ∋ x} avg_Q |f| dmu`` over ``family``."""
    grid = f.grid
    a = np.abs(f.values)
    dens = _measure_or_lebesgue(f, measure)
    if dens is None:
        stack = a[None]
    else:
        stack = np.stack([a * dens, dens])
    out = np.zeros(grid.shape)
    for s, idx, S, _, _ in iter_windows(grid, family, sums=stack):
        avg = S[0] / (s**grid.dim) if dens is None else S[0] / S[1]
        np.maximum(out, spread_max(avg, grid, s, idx), out=out)
    return GridFunction(grid, out)


def iterated_maximal(f: GridFunction, k: int, family=CubeFamily.ALL) -> GridFunction:
    """``M^k f``, the surrogate for the ``L(log L)^{k-1}`` maximal operator."""
    if k < 1:
        raise ValueError("k must be >= 1")
    g = f
    for _ in range(k):
        g = maximal(g, family)
    return g


# ---------------------------------------------------------------------------
# mean oscillation
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _oscillation_all_1d(x):
    """Cellwise sup and global sup of mean oscillation over all intervals.

    For each left end the right end sweeps forward while a Fenwick tree over
    value ranks keeps the count and sum of entries below the running mean.
    """
    n = x.size
    order = np.argsort(x, kind="mergesort")
    sorted_vals = x[order]
    rank = np.empty(n, np.int64)
    for r in range(n):
        rank[order[r]] = r
    best = np.zeros(n)
    gmax = 0.0
    cnt = np.zeros(n + 1, np.int64)
    sm = np.zeros(n + 1)
    row = np.zeros(n)
    for i in range(n):
        cnt[:] = 0
        sm[:] = 0.0
        total = 0.0
        for j in range(i, n):
            r = rank[j] + 1
            v = x[j]
            while r <= n:
                cnt[r] += 1
                sm[r] += v
                r += r & (-r)
            total += v
            length = j - i + 1
            mean = total / length
            k = np.searchsorted(sorted_vals, mean, side="right")
            c = 0
            s = 0.0
            r = k
            while r > 0:
                c += cnt[r]
                s += sm[r]
                r -= r & (-r)
            osc = (mean * c - s) + ((total - s) - mean * (length - c))
            row[j] = max(osc, 0.0) / length
        run = 0.0
        for j in range(n - 1, i - 1, -1):
            if row[j] > run:
                run = row[j]
            if run > best[j]:
                best[j] = run
        if run > gmax:
            gmax = run
    return best, gmax


def _window_view(x, s, idx, dim):
    if dim == 1:
        return sliding_window_view(x, s)[idx]
    v = sliding_window_view(x, (s, s))
    return v[idx[:, None], idx[None, :]]


def _oscillations(f: GridFunction, family):
    """Yield ``(s, idx, osc)`` per side with per-cube mean oscillations."""
    grid = f.grid
    x = f.values
    axes = tuple(range(-grid.dim, 0))
    for s in family_sides(grid, family):
        idx = family_anchors(grid, family, s)
        v = _window_view(x, s, idx, grid.dim)
        mean = v.mean(axis=axes, keepdims=True)
        yield s, idx, np.abs(v - mean).mean(axis=axes)


def _is_all_1d(grid, family):
    return grid.dim == 1 and CubeFamily.parse(family) is CubeFamily.ALL


def sharp_maximal(f: GridFunction, family=CubeFamily.ALL) -> GridFunction:
    """Sharp maximal function ``sup_{Q ∋ x} avg_Q |f - f_Q|`` (Lebesgue)."""
    grid = f.grid
    if _is_all_1d(grid, family):
        best, _ = _oscillation_all_1d(np.ascontiguousarray(f.values))
        return GridFunction(grid, best)
    out = np.zeros(grid.shape)
    for s, idx, osc in _oscillations(f, family):
        np.maximum(out, spread_max(osc, grid, s, idx), out=out)
    return GridFunction(grid, out)


def bmo_norm(b: GridFunction, family=CubeFamily.ALL) -> float:
    """``sup_Q avg_Q |b - b_Q|`` over the family."""
    if _is_all_1d(b.grid, family):
        return float(_oscillation_all_1d(np.ascontiguousarray(b.values))[1])
    return float(max(osc.max() for _, _, osc in _oscillations(b, family)))


def john_nirenberg_constant(b: GridFunction, norm: float | None = None) -> dict:
    """Measured ``kappa`` in ``avg_{2^j Q} |b - b_Q| <= kappa (1 + j) ||b||_BMO``.

    Runs over dyadic cubes ``Q`` and every ``j`` until ``2^j Q`` covers the
    domain (dilations clipped).  ``norm`` defaults to the dyadic BMO norm.
    """
    grid = b.grid
    x = b.values
    if norm is None:
        norm = bmo_norm(b, CubeFamily.DYADIC)
    kappa = 0.0
    worst = None
    if norm == 0:
        return {"kappa": 0.0, "bmo": 0.0, "worst": None}
    for s in family_sides(grid, CubeFamily.DYADIC):
        idx = family_anchors(grid, CubeFamily.DYADIC, s)
        anchors = [(int(a),) for a in idx] if grid.dim == 1 else [
            (int(a), int(c)) for a in idx for c in idx
        ]
        for anchor in anchors:
            q = Cube(anchor, s)
            bq = x[q.slices()].mean()
            j = 0
            while True:
                box = q.dilate_box(2.0**j, grid)
                val = np.abs(x[box_slices(box)] - bq).mean()
                ratio = val / ((1 + j) * norm)
                if ratio > kappa:
                    kappa, worst = ratio, {"cube": q.to_dict(), "j": j}
                if all(lo == 0 and hi == grid.n for lo, hi in box):
                    break
                j += 1
    return {"kappa": float(kappa), "bmo": float(norm), "worst": worst}


# ---------------------------------------------------------------------------
# kernel sharp maximal function
# ---------------------------------------------------------------------------


def _kernel_array(params: DKernelParams, grid: Grid, side: int):
    off = np.arange(-(grid.n - 1), grid.n)
    if grid.dim == 1:
        r = np.abs(off)
    else:
        r = np.hypot(off[:, None], off[None, :])
    return params.radial(r, side)


def _conv(x, k):
    """Convolution cropped to the grid; leading axes of ``x`` are batch axes."""
    dim = k.ndim
    n = k.shape[-1] // 2 + 1
    axes = tuple(range(x.ndim - dim, x.ndim))
    kk = k.reshape((1,) * (x.ndim - dim) + k.shape)
    full = fftconvolve(x, kk, mode="full", axes=axes)
    sl = (Ellipsis,) + tuple(slice(n - 1, 2 * n - 1) for _ in range(dim))
    return full[sl]


def _d_values(x, params, grid, side):
    k = _kernel_array(params, grid, side)
    return _conv(x, k) / _conv(np.ones(grid.shape), k)


def d_operator(f: GridFunction, params: DKernelParams, side: int) -> GridFunction:
    """``D_t f`` at ``t = (side * h)**m``, row-normalized on the clipped domain."""
    return GridFunction(f.grid, _d_values(f.values, params, f.grid, side))


def domination_constant(params: DKernelParams, grid: Grid, side: int | None = None) -> float:
    """Constant ``C`` with ``|D_t f| <= C M f`` cellwise (``M`` over all cubes).

    The kernel is majorized by the radial-decreasing profile of the sup
    distance; a layer-cake sum over sup-metric boxes (each inside a cube of
    side ``min(2r+1, n)``) gives the bound.  With ``side=None`` the max over
    all sides is returned.
    """
    n = grid.n
    sides = [side] if side is not None else list(range(1, n + 1))
    best = 0.0
    r = np.arange(n)
    box = np.minimum(2 * r + 1, n).astype(float) ** grid.dim
    for s in sides:
        kt = params.radial(r, s)
        diffs = np.append(kt[:-1] - kt[1:], kt[-1])
        layer = float((diffs * box).sum())
        k = _kernel_array(params, grid, s)
        zmin = float(_conv(np.ones(grid.shape), k).min())
        best = max(best, layer / zmin)
    return best


def d_sharp_maximal(f: GridFunction, params: DKernelParams, family=CubeFamily.ALL) -> GridFunction:
    """``sup_{Q ∋ x} avg_Q |f - D_{t_Q} f|`` with ``t_Q = l(Q)**m``."""
    return d_sharp_maximal_many([f], params, family)[0]


def d_sharp_maximal_many(fs, params: DKernelParams, family=CubeFamily.ALL) -> list:
    """:func:`d_sharp_maximal` for several functions on one grid.

    The input transforms are computed once; each side costs one kernel
    transform and one batched inverse.
    """
    grid = fs[0].grid
    if any(f.grid != grid for f in fs):
        raise ValueError("all functions must live on the same grid")
    n, dim = grid.n, grid.dim
    x = np.stack([f.values for f in fs] + [np.ones(grid.shape)])  # last row: normalizer
    shape = (next_fast_len(3 * n - 2, real=True),) * dim
    axes = tuple(range(1, dim + 1))
    X = rfftn(x, shape, axes=axes)
    crop = (slice(None),) + (slice(n - 1, 2 * n - 1),) * dim
    out = np.zeros((len(fs),) + grid.shape)
    family = CubeFamily.parse(family)
    for s in family_sides(grid, family):
        idx = family_anchors(grid, family, s)
        kern = rfftn(_kernel_array(params, grid, s), shape)
        conv = irfftn(X * kern, shape, axes=axes)[crop]
        dev = np.abs(x[:-1] - conv[:-1] / conv[-1])
        if dim == 1:
            # nonnegative integrand; prefix sums at this magnitude are exact enough
            c = np.concatenate([np.zeros((len(fs), 1)), np.cumsum(dev, axis=1)], axis=1)
            avg = (c[:, idx + s] - c[:, idx]) / s
        else:
            v = sliding_window_view(dev, (s, s), axis=(1, 2))
            avg = v[:, idx[:, None], idx[None, :]].mean(axis=(-2, -1))
        np.maximum(out, spread_max(avg, grid, s, idx), out=out)
    return [GridFunction(grid, o) for o in out]


def level_set_measure(f: GridFunction, lam: float, measure: Measure | None = None) -> float:
    """``mu{f > lam}`` as an exact sum of cell measures."""
    mask = f.values > lam
    dens = 1.0 if measure is None else measure.density
    return float((mask * dens).sum() * f.grid.cell_measure)
