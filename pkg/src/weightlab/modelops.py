"""Model operators: a discrete Hilbert-type transform and block averages.

``HILBERT`` is ``g_i = sum_{j != i} f_j / ((i - j) h) * h``, i.e. the
continuum kernel ``1/(x - y)`` at cell centres with the diagonal dropped.
It is evaluated by FFT convolution and then antisymmetrized, which makes
reflection antisymmetry hold bit for bit.  ``AVERAGING(r)`` replaces each
cell by the mean over the dyadic cube of side ``r`` cells containing it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import comb

from .grid import Grid, GridFunction, family_anchors, family_sides, CubeFamily
from .maximal import bmo_norm, maximal

__all__ = [
    "OpKind",
    "ModelOperator",
    "HILBERT",
    "apply",
    "reflect",
    "commutator",
    "commutator_direct",
    "hilbert_indicator_profile",
    "hypothesis_check",
    "weighted_norm_ratio",
]


class OpKind(str, enum.Enum):
    HILBERT = "hilbert"
    AVERAGING = "averaging"


@dataclass(frozen=True)
class ModelOperator:
    kind: OpKind = OpKind.HILBERT
    r: int = 1  # block side in cells, AVERAGING only

    def __post_init__(self):
        object.__setattr__(self, "kind", OpKind(self.kind))
        if self.kind is OpKind.AVERAGING and (self.r < 1 or self.r & (self.r - 1)):
            raise ValueError("averaging side must be a power of two")

    @classmethod
    def averaging(cls, r: int) -> "ModelOperator":
        return cls(OpKind.AVERAGING, int(r))


HILBERT = ModelOperator()


def _hilbert_kernel(n):
    off = np.arange(-(n - 1), n, dtype=float)
    k = np.zeros_like(off)
    nz = off != 0
    k[nz] = 1.0 / off[nz]
    return k


def _hilbert_raw(x):
    n = x.shape[0]
    return fftconvolve(x, _hilbert_kernel(n), mode="full")[n - 1 : 2 * n - 1]


def _hilbert(x):
    # antisymmetrized so that H(reflect f) == -reflect(H f) exactly
    return 0.5 * (_hilbert_raw(x) - _hilbert_raw(x[::-1])[::-1])


def _block_mean(x, r):
    if r == 1:
        return x.copy()
    n = x.shape[0]
    if x.ndim == 1:
        m = x.reshape(n // r, r).mean(axis=1)
        return np.repeat(m, r)
    m = x.reshape(n // r, r, n // r, r).mean(axis=(1, 3))
    return np.repeat(np.repeat(m, r, axis=0), r, axis=1)


def _apply_values(op: ModelOperator, x: np.ndarray, grid: Grid) -> np.ndarray:
    if op.kind is OpKind.HILBERT:
        if grid.dim != 1:
            raise NotImplementedError("HILBERT is one-dimensional")
        return _hilbert(x)
    if op.r > grid.n:
        raise ValueError("averaging side exceeds the grid")
    return _block_mean(x, op.r)


def apply(op: ModelOperator, f: GridFunction) -> GridFunction:
    return f.like(_apply_values(op, f.values, f.grid))


def reflect(f: GridFunction) -> GridFunction:
    return f.like(f.values[(slice(None, None, -1),) * f.grid.dim])


def hilbert_indicator_profile(grid: Grid, a: float, b: float) -> np.ndarray:
    """Continuum ``log|(x - a)/(x - b)|`` at cell centres (transform of ``chi_[a,b)``)."""
    x = grid.centers()
    with np.errstate(divide="ignore"):
        return np.log(np.abs((x - a) / (x - b)))


def commutator(op: ModelOperator, b: GridFunction, f: GridFunction, k: int = 1) -> GridFunction:
    """``T((b(x) - b)^k f)(x)`` through the binomial expansion."""
    if k < 1:
        raise ValueError("k must be >= 1")
    fv = f.values
    # b - c leaves (b(x) - b(y)) unchanged; centring at an attained value
    # makes constant symbols vanish exactly and limits cancellation
    bv = b.values - np.median(b.values)
    acc = np.zeros(f.grid.shape)
    for m in range(k + 1):
        acc += comb(k, m, exact=True) * (-1) ** m * bv ** (k - m) * _apply_values(op, bv**m * fv, f.grid)
    return f.like(acc)


def commutator_direct(
    op: ModelOperator, b: GridFunction, f: GridFunction, k: int = 1, chunk: int = 512
) -> GridFunction:
    """Same commutator from the kernel definition, summed row block by row block."""
    if k < 1:
        raise ValueError("k must be >= 1")
    grid = f.grid
    bv, fv = b.values, f.values
    if op.kind is OpKind.HILBERT:
        if grid.dim != 1:
            raise NotImplementedError("HILBERT is one-dimensional")
        n = grid.n
        j = np.arange(n)
        out = np.empty(n)
        for s in range(0, n, chunk):
            i = np.arange(s, min(n, s + chunk))
            d = (i[:, None] - j[None, :]).astype(float)
            ker = np.divide(1.0, d, out=np.zeros_like(d), where=d != 0)
            out[i] = ((bv[i, None] - bv[None, :]) ** k * ker) @ fv
        return f.like(out)
    r = op.r
    out = np.empty(grid.shape)
    flatb, flatf = bv, fv
    if grid.dim == 1:
        for a in range(0, grid.n, r):
            blk = slice(a, a + r)
            out[blk] = ((flatb[blk, None] - flatb[None, blk]) ** k * flatf[None, blk]).mean(axis=1)
        return f.like(out)
    for a in range(0, grid.n, r):
        for c in range(0, grid.n, r):
            blk = (slice(a, a + r), slice(c, c + r))
            bb = flatb[blk].ravel()
            ff = flatf[blk].ravel()
            out[blk] = (((bb[:, None] - bb[None, :]) ** k) * ff[None, :]).mean(axis=1).reshape(r, r)
    return f.like(out)


def _lp(v, p, w):
    return float((np.abs(v) ** p * w).sum()) ** (1.0 / p)


def weighted_norm_ratio(
    op: ModelOperator,
    w: GridFunction | None,
    p: float,
    suite: Sequence[GridFunction],
    *,
    b: GridFunction | None = None,
    k: int = 0,
) -> dict:
    """``max_f ||Op f||_{L^p(w)} / ||f||_{L^p(w)}`` over ``suite``.

    With a symbol ``b`` and ``k >= 1`` the operator is the commutator of
    order ``k`` and the ratio is divided by ``||b||_BMO^k``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not suite:
        raise ValueError("empty suite")
    grid = suite[0].grid
    wv = np.ones(grid.shape) if w is None else w.values
    norm = 1.0
    if k:
        if b is None:
            raise ValueError("commutator ratio needs a symbol b")
        norm = bmo_norm(b) ** k
    best, arg = 0.0, None
    for i, f in enumerate(suite):
        den = _lp(f.values, p, wv)
        if den == 0:
            continue
        g = commutator(op, b, f, k).values if k else _apply_values(op, f.values, grid)
        r = _lp(g, p, wv) / den
        if r > best:
            best, arg = r, i
    ratio = best / norm if norm > 0 else (0.0 if best == 0 else math.inf)
    return {"ratio": ratio, "raw_ratio": best, "bmo_power": norm, "argmax": arg, "p": p, "k": k}


def _block_reduce(x, s, fn):
    n = x.shape[0]
    return fn(x.reshape(n // s, s), axis=1)


def hypothesis_check(
    op: ModelOperator,
    suite: Sequence[GridFunction],
    p0: float = 1.0,
    q0: float = math.inf,
    *,
    ar_family: str = "averaging",
    cutoff_dilation: float = 2.0,
) -> dict:
    """Unweighted constants of the two hypotheses over dyadic intervals ``B``.

    ``I-A`` quotient: ``(avg_B |T(I - A_B) f|^{p0})^{1/p0} / inf_B M(|f|^{p0})^{1/p0}``.
    ``A`` quotient: the same with ``T A_B f`` and exponent ``q0`` (sup when
    ``q0 = inf``).  ``ar_family`` picks ``A_B``: ``averaging`` (dyadic block
    mean at the side of ``B``), ``cutoff`` (``(1 - chi_{cB}) f`` with
    ``c = cutoff_dilation``) or ``identity``.
    """
    if not suite:
        raise ValueError("empty suite")
    grid = suite[0].grid
    if grid.dim != 1:
        raise NotImplementedError("hypothesis_check is one-dimensional")
    if ar_family not in ("averaging", "cutoff", "identity"):
        raise ValueError(f"unknown approximation family {ar_family!r}")
    n = grid.n
    c_ia = c_a = 0.0
    for f in suite:
        fv = f.values
        mf = maximal(f.like(np.abs(fv) ** p0)).values ** (1.0 / p0)
        for s in family_sides(grid, CubeFamily.DYADIC):
            idx = family_anchors(grid, CubeFamily.DYADIC, s)
            inf_m = _block_reduce(mf, s, np.min)
            if ar_family == "cutoff":
                ia_vals, a_vals = [], []
                for a0 in idx:
                    lo, hi = _dilate(a0, s, cutoff_dilation, n)
                    af = fv.copy()
                    af[lo:hi] = 0.0
                    ta = _apply_values(op, af, grid)[a0 : a0 + s]
                    tia = _apply_values(op, fv - af, grid)[a0 : a0 + s]
                    ia_vals.append(_avg_p(tia, p0))
                    a_vals.append(_avg_p(ta, q0))
                ia, aa = np.array(ia_vals), np.array(a_vals)
            else:
                af = _block_mean(fv, s) if ar_family == "averaging" else fv
                tia = _apply_values(op, fv - af, grid)
                ta = _apply_values(op, af, grid)
                ia = _block_avg_p(tia, s, p0)
                aa = _block_avg_p(ta, s, q0)
            pos = inf_m > 0
            if np.any(pos):
                c_ia = max(c_ia, float((ia[pos] / inf_m[pos]).max()))
                c_a = max(c_a, float((aa[pos] / inf_m[pos]).max()))
    return {"C_I_minus_A": c_ia, "C_A": c_a, "p0": p0, "q0": q0, "ar_family": ar_family, "suite_size": len(suite)}


def _dilate(a0, s, c, n):
    extra = int(math.floor((c - 1.0) * s / 2.0))
    return max(0, a0 - extra), min(n, a0 + s + extra)


def _avg_p(v, p):
    a = np.abs(v)
    if math.isinf(p):
        return float(a.max())
    return float((a**p).mean()) ** (1.0 / p)


def _block_avg_p(v, s, p):
    a = np.abs(v)
    if math.isinf(p):
        return _block_reduce(a, s, np.max)
    return _block_reduce(a**p, s, np.mean) ** (1.0 / p)
