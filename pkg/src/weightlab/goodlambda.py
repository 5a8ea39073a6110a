"""Verification harness for two-parameter good-lambda inequalities.

For an instance ``(F, G, H1, H2, q, a, s, w)`` the sweep measures

    lhs = w{MF > K lam, G + H2 <= gamma lam}
    rhs = w{MF + MH1 > lam}

and records ``lhs / (factor * rhs)`` with ``factor = (a^q/K^q + gamma/K)^{1/s}``.
For ``q = inf`` the ``K^{-q}`` term is dropped.  The empirical constant is
the largest finite ratio.  Constants are measured, never assumed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import CubeFamily, GridFunction, Measure
from .maximal import DKernelParams, d_sharp_maximal, domination_constant, maximal, sharp_maximal

__all__ = [
    "GoodLambdaInstance",
    "GoodLambdaReport",
    "goodlambda_sweep",
    "lp_domination_check",
    "weak_lp_quasinorm",
    "fefferman_stein_instance",
    "dsharp_instance",
    "IncompatibleInstance",
]

INF = math.inf


class IncompatibleInstance(ValueError):
    """The right-hand side vanishes while the left-hand side does not."""


@dataclass(frozen=True, eq=False)
class GoodLambdaInstance:
    F: GridFunction
    G: GridFunction
    H1: GridFunction
    H2: GridFunction
    q: float = INF
    a: float = 1.0
    s: float = 1.0
    w: GridFunction | None = None
    name: str = "custom"

    def __post_init__(self):
        grid = self.F.grid
        for nm in ("G", "H1", "H2"):
            if getattr(self, nm).grid != grid:
                raise ValueError(f"{nm} lives on a different grid")
        for nm in ("F", "G", "H1", "H2"):
            if np.any(getattr(self, nm).values < 0):
                raise ValueError(f"{nm} must be non-negative")
        if self.a < 1:
            raise ValueError("a must be >= 1")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not self.q > 1:
            raise ValueError("q must exceed 1")
        if self.w is not None and (self.w.grid != grid or np.any(self.w.values <= 0)):
            raise ValueError("w must be a positive weight on the same grid")

    @property
    def grid(self):
        return self.F.grid

    @property
    def density(self) -> np.ndarray:
        return np.ones(self.grid.shape) if self.w is None else self.w.values

    def factor(self, K: float, gamma: float) -> float:
        base = gamma / K if math.isinf(self.q) else (self.a / K) ** self.q + gamma / K
        return base ** (1.0 / self.s)


@dataclass
class GoodLambdaReport:
    sweep: list  # rows: dict(lam, K, gamma, lhs, rhs, factor, ratio)
    empirical_C: float
    K0_used: float
    excluded_zero_rhs: int
    monotone_in_K: bool
    monotone_in_gamma: bool
    inclusion_ok: bool
    lp_checks: dict = field(default_factory=dict)
    instance: str = ""

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else float(x)

        return {
            "instance": self.instance,
            "empirical_C": num(self.empirical_C),
            "K0_used": self.K0_used,
            "excluded_zero_rhs": self.excluded_zero_rhs,
            "monotone_in_K": self.monotone_in_K,
            "monotone_in_gamma": self.monotone_in_gamma,
            "inclusion_ok": self.inclusion_ok,
            "lp_checks": {k: num(v) for k, v in sorted(self.lp_checks.items())},
            "sweep": [{k: num(v) for k, v in row.items()} for row in self.sweep],
        }


def _measure(mask, dens, cell):
    return float((dens * mask).sum() * cell)


def goodlambda_sweep(
    inst: GoodLambdaInstance,
    lambdas: Sequence[float],
    Ks: Sequence[float],
    gammas: Sequence[float],
    family=CubeFamily.ALL,
    K0: float | None = None,
    lp_exponents: Sequence[float] = (),
) -> GoodLambdaReport:
    """Sweep ``(lam, K, gamma)`` and measure both level sets under ``w dx``."""
    if not len(lambdas) or not len(Ks) or not len(gammas):
        raise ValueError("sweep grids must be non-empty")
    if any(g <= 0 or g >= 1 for g in gammas):
        raise ValueError("gamma values must lie in (0, 1)")
    if any(l <= 0 for l in lambdas):
        raise ValueError("lambda values must be positive")
    K0 = float(8**inst.grid.dim * inst.a) if K0 is None else float(K0)
    if K0 < 1:
        raise ValueError("K0 must be >= 1")
    if any(K < K0 for K in Ks):
        raise ValueError(f"every K must be >= K0 = {K0}")
    mf = maximal(inst.F, family).values
    mh = maximal(inst.H1, family).values
    good = inst.G.values + inst.H2.values
    dens = inst.density
    cell = inst.grid.cell_measure
    Ks = sorted(Ks)
    gammas = sorted(gammas)
    rows = []
    best = 0.0
    excluded = 0
    mono_K = mono_g = incl = True
    for lam in lambdas:
        rset = (mf + mh) > lam
        rhs = _measure(rset, dens, cell)
        table = np.zeros((len(Ks), len(gammas)))
        for i, K in enumerate(Ks):
            big = mf > K * lam
            for j, gam in enumerate(gammas):
                lset = big & (good <= gam * lam)
                incl &= bool(np.all(~lset | rset))
                lhs = _measure(lset, dens, cell)
                table[i, j] = lhs
                fac = inst.factor(K, gam)
                if rhs > 0:
                    ratio = lhs / (fac * rhs)
                    best = max(best, ratio)
                else:
                    excluded += 1
                    ratio = None
                rows.append({"lam": lam, "K": K, "gamma": gam, "lhs": lhs, "rhs": rhs, "factor": fac, "ratio": ratio})
        mono_K &= bool(np.all(np.diff(table, axis=0) <= 0))
        mono_g &= bool(np.all(np.diff(table, axis=1) >= 0))
    rep = GoodLambdaReport(rows, best, K0, excluded, mono_K, mono_g, incl, instance=inst.name)
    for p in lp_exponents:
        rep.lp_checks[f"p={p:g}"] = lp_domination_check(inst, p, family)
    return rep


def _lp(v, p, dens, cell):
    return float(((np.abs(v) ** p) * dens).sum() * cell) ** (1.0 / p)


def weak_lp_quasinorm(v: np.ndarray, p: float, dens: np.ndarray, cell: float) -> float:
    """``sup_lam lam * mu{v > lam}^{1/p}``, exact for piecewise-constant data."""
    flat = np.abs(np.asarray(v)).ravel()
    wts = np.broadcast_to(dens, np.shape(v)).ravel() * cell
    order = np.argsort(-flat, kind="mergesort")
    vals = flat[order]
    cum = np.cumsum(wts[order])
    # group ties: the level set {v >= vals[k]} includes every tied cell
    last = np.r_[vals[1:] != vals[:-1], True]
    vals, cum = vals[last], cum[last]
    return float((vals * cum ** (1.0 / p)).max()) if vals.size else 0.0


def lp_domination_check(
    inst: GoodLambdaInstance,
    p: float,
    family=CubeFamily.ALL,
    *,
    weak: bool = False,
    allow_endpoint: bool = False,
) -> float:
    """``||MF||_{L^p(w)} / (||G|| + ||MH1|| + ||H2||)`` (weak quasinorm on top if ``weak``).

    Needs ``p < q/s`` (any ``p`` when ``q = inf``); the endpoint ``p = q/s``
    is allowed with ``allow_endpoint`` and is advisory only.  Raises
    :class:`IncompatibleInstance` when the denominator vanishes but the
    numerator does not.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if not math.isinf(inst.q):
        lim = inst.q / inst.s
        if p > lim or (p == lim and not allow_endpoint):
            raise ValueError(f"p must be below q/s = {lim}")
    dens = inst.density
    cell = inst.grid.cell_measure
    mf = maximal(inst.F, family).values
    mh = maximal(inst.H1, family).values
    num = weak_lp_quasinorm(mf, p, dens, cell) if weak else _lp(mf, p, dens, cell)
    den = _lp(inst.G.values, p, dens, cell) + _lp(mh, p, dens, cell) + _lp(inst.H2.values, p, dens, cell)
    if den == 0:
        if num == 0:
            return 0.0
        raise IncompatibleInstance("right-hand side vanishes while ||MF|| > 0")
    return num / den


def _zeros(f):
    return f.like(np.zeros(f.grid.shape))


def fefferman_stein_instance(
    f: GridFunction, w: GridFunction | None = None, family=CubeFamily.ALL, s: float = 1.0
) -> GoodLambdaInstance:
    """``F = |f|``, ``G = M# f``, ``H1 = H2 = 0``, ``q = inf``, ``a = 1``."""
    return GoodLambdaInstance(
        F=abs(f), G=sharp_maximal(f, family), H1=_zeros(f), H2=_zeros(f), q=INF, a=1.0, s=s, w=w,
        name="fefferman-stein",
    )


def dsharp_instance(
    f: GridFunction,
    kernel: DKernelParams,
    w: GridFunction | None = None,
    family=CubeFamily.ALL,
    s: float = 1.0,
) -> GoodLambdaInstance:
    """``F = |f|``, ``G = M#_D f``, ``q = inf``, ``a`` = the kernel's domination constant."""
    a = max(1.0, domination_constant(kernel, f.grid))
    return GoodLambdaInstance(
        F=abs(f), G=d_sharp_maximal(f, kernel, family), H1=_zeros(f), H2=_zeros(f), q=INF, a=a, s=s, w=w,
        name="d-sharp",
    )
